from chloss.embed.adam import Adam
from chloss.embed.data import LabeledDataset, class_similarity, load_idx, make_blobs
from chloss.embed.net import EmbeddingNet, MetricSpec, backward_pairs, forward_pairs
from chloss.embed.train import TrainConfig, TrainResult, embed, ordering_score, train_embedding

__all__ = [
    "Adam",
    "EmbeddingNet",
    "LabeledDataset",
    "MetricSpec",
    "TrainConfig",
    "TrainResult",
    "backward_pairs",
    "class_similarity",
    "embed",
    "forward_pairs",
    "load_idx",
    "make_blobs",
    "ordering_score",
    "train_embedding",
]
