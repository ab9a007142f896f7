"""Node embeddings for attributed networks with missing links and attributes."""

__version__ = "0.1.0"

from .graph import AttributedGraph, LabelAssignment, load_attrs, load_edges, load_labels
from .model import EmbeddingModel, TrainConfig, Trainer, train

__all__ = [
    "AttributedGraph",
    "EmbeddingModel",
    "LabelAssignment",
    "TrainConfig",
    "Trainer",
    "load_attrs",
    "load_edges",
    "load_labels",
    "train",
]
