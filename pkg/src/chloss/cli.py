"""Command-line entry point: ``chloss synth | gradcheck | train | replay``.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from chloss import __version__
from chloss.embed.data import load_idx, make_blobs
from chloss.embed.train import TrainConfig, embed, ordering_score, train_embedding
from chloss.errors import DomainError, IdxParseError
from chloss.export import write_grid_csv, write_heatmap_pgm, write_table_csv
from chloss.gradcheck import (
    DISTANCE_TOLERANCE,
    NETWORK_TOLERANCE,
    check_distance_gradient,
    check_network_gradient,
    interior_batch,
    random_network_case,
)
from chloss.histogram import BinConfig, build_joint_histogram
from chloss.optimizer import DISTRIBUTION_KINDS, make_synthetic_run, optimize_distances

logger = logging.getLogger("chloss")

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
OUTPUT_ENV = "CHLOSS_OUTPUT_DIR"


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    params: dict = field(default_factory=dict)
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        return cls(command=data["command"], params=data.get("params", {}), version=data["version"])

    def write(self, directory) -> None:
        Path(directory, "manifest.json").write_text(self.to_json(), encoding="utf-8")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _default_out() -> str:
    return os.environ.get(OUTPUT_ENV, "runs")


def _prepare_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    return path


# -- synth -------------------------------------------------------------------


def run_synth(params: dict) -> int:
    kinds = DISTRIBUTION_KINDS if params["dist"] == "all" else (params["dist"],)
    root = _prepare_dir(params["out"])
    for kind in kinds:
        out = _prepare_dir(root / kind)
        run = make_synthetic_run(
            kind,
            pairs=params["pairs"],
            bins=params["bins"],
            bins_sim=params["bins_sim"],
            learning_rate=params["lr"],
            iterations=params["iterations"],
            snapshot_steps=tuple(params["snapshots"]) + (params["iterations"],),
            seed=params["seed"],
        )
        trajectory = optimize_distances(run)
        loss = trajectory.loss_curve
        write_table_csv(out / "loss.csv", ["iteration", "loss"], [range(loss.size), loss])
        snapshots = [(0, build_joint_histogram(run.batch, run.config))] + trajectory.snapshots
        for step, grid in snapshots:
            write_grid_csv(grid, out / f"snapshot_{step}.csv")
            write_heatmap_pgm(grid, out / f"snapshot_{step}.ppm")
        final = trajectory.final_batch
        write_table_csv(
            out / "pairs.csv",
            ["index", "similarity", "initial_distance", "final_distance"],
            [range(len(final)), final.similarities, run.batch.distances, final.distances],
        )
        RunManifest("synth", dict(params, dist=kind)).write(out)
        print(f"{kind}: loss {loss[0]:.6g} -> {loss[-1]:.6g} ({out})")
    return EXIT_OK


# -- gradcheck ---------------------------------------------------------------


def run_gradcheck(params: dict) -> int:
    rng = np.random.default_rng(params["seed"])
    config = BinConfig(params["bins"], params["bins"])
    per_pair = np.zeros(params["pairs"])
    per_pair_abs = np.zeros(params["pairs"])
    for _ in range(params["batches"]):
        batch = interior_batch(rng, params["pairs"], config)
        report = check_distance_gradient(batch, config)
        per_pair = np.maximum(per_pair, report.errors)
        per_pair_abs = np.maximum(per_pair_abs, np.abs(report.analytic - report.numeric))
    print(f"distance gradient: {params['batches']} batches, {params['pairs']} pairs, "
          f"n=m={params['bins']}")
    for i, (err, diff) in enumerate(zip(per_pair, per_pair_abs)):
        print(f"  pair {i:4d} worst relative error {err:.3e} (abs diff {diff:.3e})")
    dist_ok = per_pair.max() <= DISTANCE_TOLERANCE
    print(f"distance max relative error {per_pair.max():.3e} (abs diff {per_pair_abs.max():.3e}) "
          f"(tolerance {DISTANCE_TOLERANCE:g}) {'PASS' if dist_ok else 'FAIL'}")

    net_worst = net_abs = 0.0
    for _ in range(params["net_cases"]):
        net, xa, xb, sims = random_network_case(
            rng, tuple(params["net"]), params["net_pairs"], config
        )
        report = check_network_gradient(net, xa, xb, sims, config)
        net_worst = max(net_worst, report.max_error)
        net_abs = max(net_abs, float(np.abs(report.analytic - report.numeric).max()))
    net_ok = net_worst <= NETWORK_TOLERANCE
    print(f"network max relative error {net_worst:.3e} (abs diff {net_abs:.3e}) "
          f"(tolerance {NETWORK_TOLERANCE:g}) {'PASS' if net_ok else 'FAIL'}")
    return EXIT_OK if dist_ok and net_ok else EXIT_VERIFY


# -- train -------------------------------------------------------------------


def parse_data_source(text: str, params: dict):
    kind, _, rest = text.partition(":")
    parts = [p for p in rest.split(",") if p]
    if kind == "idx" and len(parts) == 2:
        return load_idx(parts[0], parts[1])
    if kind == "blobs" and len(parts) == 2:
        try:
            classes, per_class = int(parts[0]), int(parts[1])
        except ValueError:
            raise UsageError(f"malformed blobs source {text!r}")
        return make_blobs(classes, per_class, params["blob_dim"], params["blob_spread"],
                          params["seed"])
    raise UsageError(
        f"malformed data source {text!r}; use idx:<images>,<labels> or blobs:<classes>,<per_class>"
    )


def run_train(params: dict) -> int:
    dataset = parse_data_source(params["data"], params)
    config = TrainConfig(
        epochs=params["epochs"],
        batch_size=params["batch_size"],
        pairs_per_batch=params["pairs_per_batch"],
        bins=params["bins"],
        bins_sim=params["bins_sim"] or params["bins"],
        learning_rate=params["lr"],
        hidden=tuple(params["hidden"]),
        out_dim=params["out_dim"],
        loss=params["loss"],
        binary_similarity=params["binary_sim"],
        seed=params["seed"],
    )
    out = _prepare_dir(params["out"])
    result = train_embedding(dataset, config)
    epochs = range(1, len(result.epoch_losses) + 1)
    write_table_csv(out / "epoch_loss.csv", ["epoch", "loss", "raw_loss"],
                    [epochs, result.epoch_losses, result.raw_losses])
    points = embed(result.net, dataset.inputs)
    write_table_csv(
        out / "embedding.csv",
        ["index", "label"] + [f"e{k + 1}" for k in range(points.shape[1])],
        [range(len(dataset)), dataset.labels.tolist(), *points.T],
    )
    RunManifest("train", params).write(out)
    if result.epoch_losses:
        print(f"final epoch loss {result.epoch_losses[-1]:.6g}")
    if points.shape[1] >= 2:
        print(f"class ordering (Spearman) {ordering_score(points, dataset.labels):.4f}")
    return EXIT_OK


RUNNERS = {"synth": run_synth, "gradcheck": run_gradcheck, "train": run_train}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chloss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="optimize distances directly (synthetic study)")
    synth.add_argument("--dist", choices=DISTRIBUTION_KINDS + ("all",), default="all")
    synth.add_argument("--pairs", type=int, default=10_000)
    synth.add_argument("--bins", type=int, default=51)
    synth.add_argument("--bins-sim", type=int, default=51)
    synth.add_argument("--lr", type=float, default=0.1)
    synth.add_argument("--iterations", type=int, default=3000)
    synth.add_argument("--snapshots", type=_int_list, default=[500, 1000, 3000])
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", default=None)

    grad = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    grad.add_argument("--bins", type=int, default=16)
    grad.add_argument("--pairs", type=int, default=64)
    grad.add_argument("--batches", type=int, default=100)
    grad.add_argument("--net", type=_int_list, default=[8, 6, 2])
    grad.add_argument("--net-pairs", type=int, default=16)
    grad.add_argument("--net-cases", type=int, default=10)
    grad.add_argument("--seed", type=int, default=0)

    train = sub.add_parser("train", help="train an embedding net")
    train.add_argument("--data", required=True,
                       help="idx:<images>,<labels> or blobs:<classes>,<per_class>")
    train.add_argument("--epochs", type=int, default=10)
    train.add_argument("--lr", type=float, default=0.002)
    train.add_argument("--bins", type=int, default=100)
    train.add_argument("--bins-sim", type=int, default=None, help="defaults to --bins")
    train.add_argument("--batch-size", type=int, default=256)
    train.add_argument("--pairs-per-batch", type=int, default=None)
    train.add_argument("--hidden", type=_int_list, default=[256, 128])
    train.add_argument("--out-dim", type=int, default=2)
    train.add_argument("--loss", choices=("chl", "hl"), default="chl")
    train.add_argument("--binary-sim", action="store_true",
                       help="similarity 1 for same class, 0 otherwise")
    train.add_argument("--blob-dim", type=int, default=16)
    train.add_argument("--blob-spread", type=float, default=2.0)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--out", default=None)

    replay = sub.add_parser("replay", help="rerun a command from its manifest.json")
    replay.add_argument("manifest")
    replay.add_argument("--out", default=None, help="override the recorded output directory")
    return parser


def _params_from_args(args) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "verbose")}
    if "out" in params and params["out"] is None:
        params["out"] = str(Path(_default_out()) / args.command)
    return params


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "replay":
            manifest = RunManifest.from_json(Path(args.manifest).read_text(encoding="utf-8"))
            if manifest.command not in RUNNERS:
                raise UsageError(f"manifest has unknown command {manifest.command!r}")
            params = dict(manifest.params)
            if args.out is not None:
                params["out"] = args.out
            return RUNNERS[manifest.command](params)
        return RUNNERS[args.command](_params_from_args(args))
    except (UsageError, DomainError) as exc:
        print(f"chloss: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, IdxParseError, json.JSONDecodeError, KeyError) as exc:
        print(f"chloss: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
