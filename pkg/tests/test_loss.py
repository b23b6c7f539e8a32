import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chloss.errors import DomainError
from chloss.gradcheck import central_difference, interior_batch, relative_errors
from chloss.histogram import (
    BinaryHistograms,
    BinConfig,
    HistogramGrid,
    PairBatch,
    build_binary_histograms,
    build_joint_histogram,
    segments,
    similarity_bins,
)
from chloss.loss import (
    chl,
    chl_grad_distances,
    chl_value_and_grad,
    chl_variant_l1,
    chl_variant_l2,
    grad_l1_wrt_histogram,
    grad_l2_wrt_histogram,
    grad_wrt_histogram,
    histogram_loss,
    hl_reduction_check,
    hl_value_and_grad,
    prior_product,
)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def naive_chl(v, orientation="phi"):
    n, m = v.shape
    total = 0.0
    for r in range(n):
        for z in range(m):
            for r2 in range(n):
                for z2 in range(m):
                    if orientation == "phi" and r2 >= r and z2 > z:
                        total += v[r, z] * v[r2, z2]
                    if orientation == "psi" and r2 <= r and z2 < z:
                        total += v[r, z] * v[r2, z2]
    return total


def joint(d, s, n, m):
    return build_joint_histogram(PairBatch(d, s), BinConfig(n, m))


def random_grid(rng, n, m):
    v = rng.uniform(size=(n, m)) * (rng.uniform(size=(n, m)) < 0.7)
    v[0, 0] += 1e-3
    return HistogramGrid.from_values(v / v.sum())


class TestHistogramLoss:
    def _h(self, pos, neg):
        return BinaryHistograms(np.array(pos, float), np.array(neg, float), 1, 1)

    def test_separated(self):
        assert histogram_loss(self._h([1, 0], [0, 1])) == 0.0

    def test_reversed(self):
        assert histogram_loss(self._h([0, 1], [1, 0])) == 1.0

    def test_overlapping(self):
        assert histogram_loss(self._h([0.5, 0.5], [0.5, 0.5])) == pytest.approx(0.75, abs=1e-15)

    def test_value_gradient_matches_finite_difference(self):
        rng = np.random.default_rng(10)
        cfg = BinConfig(12, 2)
        for _ in range(10):
            batch = interior_batch(rng, 30, cfg)
            s = (rng.uniform(size=30) < 0.4).astype(float)
            s[:2] = [0.0, 1.0]
            batch = PairBatch(batch.distances, s)
            _, grad = hl_value_and_grad(batch, cfg)

            def loss(d):
                return histogram_loss(build_binary_histograms(PairBatch(d, s), cfg))

            numeric = central_difference(loss, batch.distances, 1e-7)
            assert relative_errors(grad, numeric).max() <= 1e-5


class TestChl:
    def test_anti_monotone_is_zero(self):
        assert chl(joint([0, 1], [1, 0], 2, 2)) == 0.0

    def test_monotone_pair(self):
        assert chl(joint([0, 1], [0, 1], 2, 2)) == 0.25

    def test_single_similarity_bin(self):
        rng = np.random.default_rng(11)
        h = joint(rng.uniform(size=100), np.full(100, 0.3), 20, 20)
        assert chl(h) == 0.0

    def test_against_naive(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            h = random_grid(rng, *rng.integers(2, 9, size=2))
            assert chl(h) == pytest.approx(naive_chl(h.values), abs=1e-14)
            assert chl_variant_l1(h) == pytest.approx(naive_chl(h.values, "psi"), abs=1e-14)

    @settings(max_examples=100)
    @given(
        pairs=st.lists(st.tuples(unit, unit), min_size=1, max_size=40),
        n=st.integers(2, 20),
        m=st.integers(2, 20),
    )
    def test_range(self, pairs, n, m):
        d, s = zip(*pairs)
        value = chl(joint(d, s, n, m))
        assert 0.0 <= value <= 1.0

    def test_prop1_minimum_is_exactly_zero(self):
        # similarity bin z sits at distance bin n-1-z
        n = m = 9
        rng = np.random.default_rng(13)
        z = rng.integers(0, m, size=200)
        d = (n - 1 - z) / (n - 1)
        s = z / (m - 1)
        assert chl(joint(d, s, n, m)) == 0.0


class TestVariants:
    def test_l1_monotone_pair(self):
        assert chl_variant_l1(joint([0, 1], [0, 1], 2, 2)) == 0.25

    def test_l1_anti_monotone(self):
        assert chl_variant_l1(joint([0, 1], [1, 0], 2, 2)) == 0.0

    def test_l1_single_bin(self):
        assert chl_variant_l1(joint([0.1, 0.7, 0.2], [0.5, 0.5, 0.5], 5, 5)) == 0.0

    def test_l2_examples(self):
        assert chl_variant_l2(joint([0, 1], [0, 1], 2, 2)) == 0.5
        assert chl_variant_l2(joint([0, 1], [1, 0], 2, 2)) == 0.0

    def test_l2_is_sum(self):
        h = random_grid(np.random.default_rng(14), 10, 7)
        assert abs(chl_variant_l2(h) - (chl(h) + chl_variant_l1(h))) <= 1e-15

    def test_values_differ_in_general(self):
        h = random_grid(np.random.default_rng(15), 10, 7)
        assert chl(h) != chl_variant_l1(h)


class TestHistogramGradient:
    def test_uniform_two_by_two(self):
        # L = h00 (h01 + h11) + h10 h11, differentiated by hand
        h = HistogramGrid.from_values(np.full((2, 2), 0.25))
        np.testing.assert_array_equal(grad_wrt_histogram(h), [[0.5, 0.25], [0.25, 0.5]])
        numeric = central_difference(lambda v: chl(HistogramGrid.from_values(v)), h.values, 1e-6)
        np.testing.assert_allclose(numeric, [[0.5, 0.25], [0.25, 0.5]], atol=1e-9)

    def test_corner_entry_is_phi(self):
        from chloss.histogram import cumulative_tables

        h = random_grid(np.random.default_rng(16), 6, 6)
        assert grad_wrt_histogram(h)[0, 0] == cumulative_tables(h).phi[0, 0]

    @pytest.mark.parametrize(
        "loss,grad",
        [(chl, grad_wrt_histogram), (chl_variant_l1, grad_l1_wrt_histogram),
         (chl_variant_l2, grad_l2_wrt_histogram)],
    )
    def test_finite_difference_free_entries(self, loss, grad):
        rng = np.random.default_rng(17)
        v = rng.uniform(0.1, 1.0, size=(7, 5))
        h = HistogramGrid.from_values(v / v.sum())
        numeric = central_difference(lambda v: loss(HistogramGrid.from_values(v)), h.values, 1e-6)
        np.testing.assert_allclose(grad(h), numeric, atol=1e-6, rtol=0)

    def test_variant_gradients_proportional(self):
        rng = np.random.default_rng(18)
        for _ in range(50):
            h = random_grid(rng, *rng.integers(2, 33, size=2))
            g = grad_wrt_histogram(h)
            assert np.max(np.abs(grad_l1_wrt_histogram(h) - g)) <= 1e-15
            assert np.max(np.abs(grad_l2_wrt_histogram(h) - 2 * g)) <= 1e-15


class TestDistanceGradient:
    def test_single_similarity_bin_is_zero(self):
        rng = np.random.default_rng(19)
        batch = PairBatch(rng.uniform(size=50), np.full(50, 0.62))
        assert np.all(chl_grad_distances(batch, BinConfig(10, 10)) == 0.0)

    def test_hand_example(self):
        # s=0 pair sits in row 0 with the s=1 pair at higher similarity:
        # (1/(delta*M)) * (0 - h[0, 1]) = (1 / (1 * 2)) * (0 - 0.5)
        grad = chl_grad_distances(PairBatch([0.0, 0.0], [0.0, 1.0]), BinConfig(2, 2))
        assert grad[0] == -0.25
        assert grad[1] == 0.0

    def test_matches_table_route(self):
        from chloss.histogram import cumulative_tables

        rng = np.random.default_rng(20)
        cfg = BinConfig(13, 9)
        batch = PairBatch(rng.uniform(size=80), rng.uniform(size=80))
        h = build_joint_histogram(batch, cfg)
        t = cumulative_tables(h)
        dl_dh = t.phi + t.psi
        seg, _ = segments(batch.distances, cfg.n)
        z = similarity_bins(batch.similarities, cfg.m)
        expected = (dl_dh[seg + 1, z] - dl_dh[seg, z]) / (cfg.delta_d * len(batch))
        np.testing.assert_allclose(chl_grad_distances(batch, cfg), expected, atol=1e-15)

    def test_finite_difference_interior(self):
        rng = np.random.default_rng(21)
        cfg = BinConfig(16, 16)
        for _ in range(5):
            batch = interior_batch(rng, 64, cfg)
            sims = batch.similarities
            numeric = central_difference(
                lambda d: chl(build_joint_histogram(PairBatch(d, sims), cfg)),
                batch.distances,
                1e-7,
            )
            errors = relative_errors(chl_grad_distances(batch, cfg), numeric)
            assert errors.max() <= 1e-5

    def test_node_uses_left_derivative(self):
        cfg = BinConfig(5, 3)
        d = np.array([0.5, 0.1, 0.9, 0.3])
        s = np.array([0.0, 1.0, 1.0, 0.5])
        grad = chl_grad_distances(PairBatch(d, s), cfg)

        def loss(x):
            return chl(build_joint_histogram(PairBatch(np.r_[x, d[1:]], s), cfg))

        left = (loss(0.5) - loss(0.5 - 1e-7)) / 1e-7
        assert grad[0] == pytest.approx(left, abs=1e-8)

    def test_sign_property(self):
        rng = np.random.default_rng(22)
        cfg = BinConfig(11, 7)
        batch = PairBatch(rng.uniform(size=60), rng.uniform(size=60))
        h = build_joint_histogram(batch, cfg).values
        seg, _ = segments(batch.distances, cfg.n)
        z = similarity_bins(batch.similarities, cfg.m)
        grad = chl_grad_distances(batch, cfg)
        for i in range(60):
            balance = h[seg[i] + 1, : z[i]].sum() - h[seg[i], z[i] + 1 :].sum()
            assert np.sign(grad[i]) == np.sign(round(balance, 14))

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(23)
        cfg = BinConfig(16, 16)
        d, s = rng.uniform(size=128), rng.uniform(size=128)
        p = rng.permutation(128)
        v1, g1 = chl_value_and_grad(PairBatch(d, s), cfg)
        v2, g2 = chl_value_and_grad(PairBatch(d[p], s[p]), cfg)
        assert v1 == v2
        assert np.array_equal(g1[p], g2)


class TestReduction:
    def test_separated(self):
        r = hl_reduction_check(PairBatch([0, 1], [1, 0]), BinConfig(2, 2))
        assert (r.chl_value, r.hl_value, r.residual) == (0.0, 0.0, 0.0)

    def test_reversed(self):
        r = hl_reduction_check(PairBatch([0, 1], [0, 1]), BinConfig(2, 2))
        assert r.hl_value == 1.0
        assert r.prior_product == 0.25
        assert r.chl_value == 0.25
        assert r.residual == 0.0

    def test_random_binary(self):
        rng = np.random.default_rng(24)
        s = (rng.uniform(size=500) < 0.3).astype(float)
        r = hl_reduction_check(PairBatch(rng.uniform(size=500), s), BinConfig(32, 8))
        assert r.residual <= 1e-12
        assert r.chl_value > 0

    def test_non_binary_rejected(self):
        with pytest.raises(DomainError):
            hl_reduction_check(PairBatch([0.2, 0.4], [0.0, 0.5]), BinConfig(4, 2))

    def test_scaled_gradients_coincide(self):
        rng = np.random.default_rng(25)
        s = (rng.uniform(size=200) < 0.5).astype(float)
        batch = PairBatch(rng.uniform(size=200), s)
        cfg = BinConfig(20, 2)
        _, g_chl = chl_value_and_grad(batch, cfg)
        _, g_hl = hl_value_and_grad(batch, cfg)
        np.testing.assert_allclose(g_chl, prior_product(s) * g_hl, rtol=1e-12, atol=1e-18)
