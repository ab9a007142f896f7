"""Missing-data generators: attribute rows/columns and edges.

Every function returns a new graph; the part of the graph a corruption does
not target is carried over unchanged (the same arrays).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import AttributedGraph, LabelAssignment

KINDS = ("row_random", "row_important", "col_random", "col_important", "edge_random")


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    fraction: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown corruption kind {self.kind!r}; expected one of {KINDS}")
        _check_fraction(self.fraction)


def _check_fraction(fraction: float) -> None:
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def target_count(fraction: float, total: int) -> int:
    _check_fraction(fraction)
    return min(round_half_up(fraction * total), total)


def _clear_rows(graph: AttributedGraph, rows: np.ndarray) -> AttributedGraph:
    drop = np.zeros(graph.node_count, dtype=bool)
    drop[rows] = True
    return graph.replace_attrs(~drop[graph.attr_rows()])


def _clear_cols(graph: AttributedGraph, cols: np.ndarray) -> AttributedGraph:
    drop = np.zeros(graph.attr_count, dtype=bool)
    drop[cols] = True
    return graph.replace_attrs(~drop[graph.attr_indices])


def drop_rows_random(graph: AttributedGraph, fraction: float, seed) -> AttributedGraph:
    """Remove every attribute of a uniformly chosen ``fraction`` of the nodes."""
    k = target_count(fraction, graph.node_count)
    rng = np.random.default_rng(seed)
    return _clear_rows(graph, rng.choice(graph.node_count, size=k, replace=False))


def importance_by_degree(graph: AttributedGraph) -> np.ndarray:
    """Node ids by weighted degree, descending; ties by ascending id."""
    return np.lexsort((np.arange(graph.node_count), -graph.weighted_degree()))


def drop_rows_important(graph: AttributedGraph, fraction: float) -> AttributedGraph:
    """Remove the attributes of the highest-degree ``fraction`` of the nodes."""
    k = target_count(fraction, graph.node_count)
    return _clear_rows(graph, importance_by_degree(graph)[:k])


def drop_cols_random(graph: AttributedGraph, fraction: float, seed) -> AttributedGraph:
    k = target_count(fraction, graph.attr_count)
    rng = np.random.default_rng(seed)
    return _clear_cols(graph, rng.choice(graph.attr_count, size=k, replace=False))


def mutual_information(x: np.ndarray, y: np.ndarray) -> float:
    """Plug-in mutual information (nats) between two discrete samples."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValueError("samples must have equal length")
    n = x.size
    if n == 0:
        return 0.0
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    joint = np.zeros((xi.max() + 1, yi.max() + 1))
    np.add.at(joint, (xi, yi), 1.0)
    joint /= n
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / (px @ py)[nz])))
    return max(mi, 0.0)


def attribute_mutual_information(graph: AttributedGraph, labels: LabelAssignment) -> np.ndarray:
    """MI between each attribute's presence (observed and > 0) and the class label.

    Only labeled nodes are used.
    """
    labeled = labels.labeled
    if len(np.unique(labels.labels[labeled])) < 2:
        raise ValueError("column importance needs labels covering at least two classes")
    rows = graph.attr_rows()
    present = np.zeros((graph.node_count, graph.attr_count), dtype=np.int8)
    hit = graph.attr_values > 0
    present[rows[hit], graph.attr_indices[hit]] = 1
    present = present[labeled]
    y = labels.labels[labeled]
    return np.array([mutual_information(present[:, j], y) for j in range(graph.attr_count)])


def importance_by_mutual_information(graph: AttributedGraph, labels: LabelAssignment) -> np.ndarray:
    """Attribute ids by MI with the label, descending; ties by ascending id."""
    mi = attribute_mutual_information(graph, labels)
    # rounding keeps analytically equal scores tied despite float noise
    return np.lexsort((np.arange(graph.attr_count), -np.round(mi, 12)))


def drop_cols_important(graph: AttributedGraph, labels: LabelAssignment,
                        fraction: float) -> AttributedGraph:
    """Remove the ``fraction`` of attribute columns most informative about the label."""
    k = target_count(fraction, graph.attr_count)
    return _clear_cols(graph, importance_by_mutual_information(graph, labels)[:k])


def remove_edges_random(graph: AttributedGraph, fraction: float, seed):
    """Remove a uniform ``fraction`` of undirected edges.

    Returns ``(corrupted, removed)`` where ``removed`` is an ``(m, 2)`` array
    of ``i < j`` pairs in ascending order.
    """
    edges = graph.edges()
    k = target_count(fraction, len(edges))
    rng = np.random.default_rng(seed)
    chosen = np.zeros(len(edges), dtype=bool)
    chosen[rng.choice(len(edges), size=k, replace=False)] = True
    weights = graph.edge_weights()
    kept = [(i, j, w) for (i, j), w in zip(edges[~chosen], weights[~chosen])]
    return graph.replace_edges(kept), edges[chosen].copy()


def corrupt(graph: AttributedGraph, spec: CorruptionSpec, labels: LabelAssignment | None = None):
    """Apply ``spec``; returns ``(graph, removed_edges)``."""
    none = np.empty((0, 2), dtype=np.int64)
    if spec.kind == "row_random":
        return drop_rows_random(graph, spec.fraction, spec.seed), none
    if spec.kind == "row_important":
        return drop_rows_important(graph, spec.fraction), none
    if spec.kind == "col_random":
        return drop_cols_random(graph, spec.fraction, spec.seed), none
    if spec.kind == "col_important":
        if labels is None:
            raise ValueError("col_important corruption requires labels")
        return drop_cols_important(graph, labels, spec.fraction), none
    return remove_edges_random(graph, spec.fraction, spec.seed)
