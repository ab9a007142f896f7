"""Link prediction: edge features, heuristic scores, pair sampling, AUC."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .graph import AttributedGraph

OPERATORS = ("average", "hadamard", "weighted_l1", "weighted_l2")
HEURISTICS = ("common_neighbors", "jaccard", "adamic_adar", "preferential_attachment")
MAX_RESAMPLES = 1000

_OPERATOR_ALIASES = {"l1": "weighted_l1", "l2": "weighted_l2"}
_HEURISTIC_ALIASES = {
    "common": "common_neighbors",
    "cn": "common_neighbors",
    "aa": "adamic_adar",
    "pref": "preferential_attachment",
    "pa": "preferential_attachment",
}


def canonical_operator(name: str) -> str:
    name = _OPERATOR_ALIASES.get(name, name)
    if name not in OPERATORS:
        raise ValueError(f"unknown edge operator {name!r}")
    return name


def canonical_heuristic(name: str) -> str:
    name = _HEURISTIC_ALIASES.get(name, name)
    if name not in HEURISTICS:
        raise ValueError(f"unknown heuristic {name!r}")
    return name


def edge_feature(op: str, x, y) -> np.ndarray:
    """Combine two embeddings (or two aligned batches of them) into edge features."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    op = canonical_operator(op)
    if op == "average":
        return (x + y) / 2.0
    if op == "hadamard":
        return x * y
    if op == "weighted_l1":
        return np.abs(x - y)
    return (x - y) ** 2


def heuristic_score(graph: AttributedGraph, i: int, j: int, kind: str) -> float:
    kind = canonical_heuristic(kind)
    ni = set(graph.neighbors(i).tolist())
    nj = set(graph.neighbors(j).tolist())
    if kind == "common_neighbors":
        return float(len(ni & nj))
    if kind == "jaccard":
        union = ni | nj
        return len(ni & nj) / len(union) if union else 0.0
    if kind == "adamic_adar":
        deg = graph.degree()
        # fsum is correctly rounded, so the score does not depend on set order
        return math.fsum(1.0 / math.log(deg[k]) for k in ni & nj if deg[k] > 1)
    return float(len(ni) * len(nj))


@dataclass(frozen=True)
class PairDataset:
    """Node pairs with binary labels (1 = linked)."""

    src: np.ndarray
    dst: np.ndarray
    labels: np.ndarray
    tag: str

    def __len__(self) -> int:
        return len(self.labels)

    def pairs(self) -> np.ndarray:
        return np.column_stack([self.src, self.dst])

    def subsample(self, fraction: float, seed) -> "PairDataset":
        """Keep a random ``fraction`` of positives together with their negatives."""
        n_pos = len(self) // 2
        k = max(1, int(round(fraction * n_pos)))
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(n_pos, size=k, replace=False))
        idx = np.concatenate([keep, keep + n_pos])
        return PairDataset(self.src[idx], self.dst[idx], self.labels[idx], self.tag)


def _sample_negatives(positives: np.ndarray, forbidden: AttributedGraph, rng, tag: str):
    n = forbidden.node_count
    out = np.empty(len(positives), dtype=np.int64)
    for r, i in enumerate(positives[:, 0]):
        for _ in range(MAX_RESAMPLES):
            k = int(rng.integers(n))
            if k != i and not forbidden.has_edge(i, k):
                out[r] = k
                break
        else:
            raise RuntimeError(
                f"could not sample a {tag} negative partner for node {i} "
                f"after {MAX_RESAMPLES} attempts"
            )
    return out


def _dataset(positives, negatives_dst, tag):
    m = len(positives)
    return PairDataset(
        np.concatenate([positives[:, 0], positives[:, 0]]),
        np.concatenate([positives[:, 1], negatives_dst]),
        np.concatenate([np.ones(m, dtype=np.int8), np.zeros(m, dtype=np.int8)]),
        tag,
    )


def build_pair_datasets(full: AttributedGraph, remaining: AttributedGraph, removed, seed):
    """Balanced train/test pair sets for link prediction.

    Test positives are the removed edges, each paired with a negative
    ``(i, k)`` that is not an edge of ``full``. Train positives are the
    edges of ``remaining``, each paired with a negative ``(i, k)`` that is
    not an edge of ``remaining``.
    """
    removed = np.asarray(removed, dtype=np.int64).reshape(-1, 2)
    if len(removed) == 0:
        raise ValueError("no removed edges to build a test set from")
    rng = np.random.default_rng(seed)
    train_pos = remaining.edges()
    train = _dataset(train_pos, _sample_negatives(train_pos, remaining, rng, "train"), "train")
    test = _dataset(removed, _sample_negatives(removed, full, rng, "test"), "test")
    return train, test


def pair_features(dataset: PairDataset, embeddings: np.ndarray, op: str) -> np.ndarray:
    return edge_feature(op, embeddings[dataset.src], embeddings[dataset.dst])


@dataclass
class LinkClassifier:
    """L2-regularised logistic regression on standardised edge features."""

    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    op: str

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        return ((features - self.mean) / self.scale) @ self.weights + self.bias

    def score_pairs(self, dataset: PairDataset, embeddings: np.ndarray) -> np.ndarray:
        return self.decision_function(pair_features(dataset, embeddings, self.op))

    @property
    def direction(self) -> np.ndarray:
        """Decision direction in the original feature space, unit length."""
        w = self.weights / self.scale
        norm = np.linalg.norm(w)
        return w / norm if norm > 0 else w


def fit_logistic(features: np.ndarray, labels: np.ndarray, l2: float = 1e-3,
                 epochs: int = 500):
    """Full-batch gradient descent on mean log-loss plus ``l2/2 * |w|^2``.

    The step size is the inverse Lipschitz constant of the gradient, so each
    epoch is a guaranteed descent step. Returns ``(weights, bias)`` for
    features already in the scale they will be scored in.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    n, d = x.shape
    xb = np.hstack([x, np.ones((n, 1))])
    lipschitz = 0.25 * np.linalg.norm(xb, 2) ** 2 / n + l2
    step = 1.0 / lipschitz
    theta = np.zeros(d + 1)
    reg = np.full(d + 1, l2)
    reg[-1] = 0.0
    for _ in range(epochs):
        p = 1.0 / (1.0 + np.exp(-(xb @ theta)))
        theta -= step * (xb.T @ (p - y) / n + reg * theta)
    return theta[:-1], float(theta[-1])


def train_link_classifier(train: PairDataset, embeddings: np.ndarray, op: str,
                          l2: float = 1e-3, epochs: int = 500) -> LinkClassifier:
    if len(train) == 0:
        raise ValueError("empty training set")
    op = canonical_operator(op)
    x = pair_features(train, embeddings, op)
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    if np.all(scale == 0):
        warnings.warn("all edge features are identical; the classifier cannot separate classes",
                      stacklevel=2)
    scale = np.where(scale > 0, scale, 1.0)
    w, b = fit_logistic((x - mean) / scale, train.labels, l2=l2, epochs=epochs)
    return LinkClassifier(w, b, mean, scale, op)


def auc(scores, labels) -> float:
    """Probability a positive outscores a negative, ties counting one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative examples")
    ranks = rankdata(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def heuristic_auc(graph: AttributedGraph, dataset: PairDataset, kind: str) -> float:
    scores = [heuristic_score(graph, i, j, kind) for i, j in zip(dataset.src, dataset.dst)]
    return auc(scores, dataset.labels)


def embedding_auc(train: PairDataset, test: PairDataset, embeddings: np.ndarray, op: str) -> float:
    clf = train_link_classifier(train, embeddings, op)
    return auc(clf.score_pairs(test, embeddings), test.labels)
