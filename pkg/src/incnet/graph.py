"""Attributed graph data model and text-file ingestion.

Nodes and attributes are addressed by dense 0-based ids. Structure is kept
as a symmetric CSR adjacency; attributes as a CSR matrix whose stored
entries are exactly the observed cells (an entry present means observed,
even when its value is zero).
"""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

class GraphFormatError(ValueError):
    """A malformed line in an input file."""

    def __init__(self, path, lineno: int, message: str):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


class Vocab:
    """Bidirectional mapping between external string ids and dense ints."""

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        idx = self._index.get(name)
        if idx is None:
            idx = len(self._names)
            self._names.append(name)
            self._index[name] = idx
        return idx

    def id(self, name: str) -> int:
        return self._index[name]

    def get(self, name: str, default=None):
        return self._index.get(name, default)

    def name(self, idx: int) -> str:
        return self._names[idx]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._names)

    def __contains__(self, name) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self._names == other._names

    def __repr__(self) -> str:
        return f"Vocab({len(self)} entries)"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _csr_from_triples(n_rows, rows, cols, vals):
    """Sort triples by (row, col) and build CSR arrays. Assumes no duplicates."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=indptr[1:])
    return indptr, cols, vals


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Undirected graph with a partially observed nonnegative attribute matrix.

    Use :meth:`from_edges` to construct; the raw CSR fields are exposed for
    the numeric kernels and must not be mutated.
    """

    node_vocab: Vocab
    attr_vocab: Vocab
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray
    attr_indptr: np.ndarray
    attr_indices: np.ndarray
    attr_values: np.ndarray
    _edge_cache: dict = field(default_factory=dict, repr=False)

    # -- construction ------------------------------------------------------

    @classmethod
    def from_edges(
        cls,
        node_names: Sequence[str] | int,
        edges: Iterable[tuple[int, int, float]] = (),
        attr_names: Sequence[str] = (),
        attrs: Iterable[tuple[int, int, float]] = (),
    ) -> "AttributedGraph":
        """Build a graph from internal-id triples.

        ``edges`` holds ``(i, j, w)``; direction is ignored, duplicates are
        summed and self-loops dropped. ``attrs`` holds ``(node, attr, value)``
        observed cells; a repeated cell keeps the last value.
        """
        if isinstance(node_names, int):
            node_names = [str(i) for i in range(node_names)]
        node_vocab = Vocab(node_names)
        attr_vocab = Vocab(attr_names)
        n = len(node_vocab)
        if len(node_vocab) != len(node_names):
            raise ValueError("duplicate node names")

        merged: dict[tuple[int, int], float] = {}
        for i, j, *rest in edges:
            w = float(rest[0]) if rest else 1.0
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) references an unknown node")
            if w < 0 or not np.isfinite(w):
                raise ValueError(f"edge ({i}, {j}) has invalid weight {w}")
            if i == j:
                continue
            key = (i, j) if i < j else (j, i)
            merged[key] = merged.get(key, 0.0) + w
        # zero total weight carries no structure
        merged = {k: w for k, w in merged.items() if w > 0}
        if merged:
            pairs = np.array(list(merged.keys()), dtype=np.int64)
            w = np.array(list(merged.values()), dtype=np.float64)
            rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
            cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
            vals = np.concatenate([w, w])
        else:
            rows = cols = np.empty(0, dtype=np.int64)
            vals = np.empty(0, dtype=np.float64)
        indptr, indices, weights = _csr_from_triples(n, rows, cols, vals)

        cells: dict[tuple[int, int], float] = {}
        n_attr = len(attr_vocab)
        for i, j, v in attrs:
            i, j, v = int(i), int(j), float(v)
            if not (0 <= i < n and 0 <= j < n_attr):
                raise ValueError(f"attribute entry ({i}, {j}) out of range")
            if v < 0 or not np.isfinite(v):
                raise ValueError(f"attribute entry ({i}, {j}) has invalid value {v}")
            cells[(i, j)] = v
        if cells:
            keys = np.array(list(cells.keys()), dtype=np.int64)
            a_indptr, a_indices, a_values = _csr_from_triples(
                n, keys[:, 0], keys[:, 1], list(cells.values())
            )
        else:
            a_indptr = np.zeros(n + 1, dtype=np.int64)
            a_indices = np.empty(0, dtype=np.int64)
            a_values = np.empty(0, dtype=np.float64)

        return cls(
            node_vocab,
            attr_vocab,
            _frozen(indptr),
            _frozen(indices),
            _frozen(weights),
            _frozen(a_indptr),
            _frozen(a_indices),
            _frozen(a_values),
        )

    def replace_edges(self, edges: Iterable[tuple[int, int, float]]) -> "AttributedGraph":
        """Same nodes and attributes, new edge set."""
        return AttributedGraph(
            self.node_vocab,
            self.attr_vocab,
            *_rebuild_adjacency(self.node_count, edges),
            self.attr_indptr,
            self.attr_indices,
            self.attr_values,
        )

    def replace_attrs(self, keep: np.ndarray) -> "AttributedGraph":
        """Same structure, keeping only the stored attribute entries where ``keep`` is true."""
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != self.attr_indices.shape:
            raise ValueError("mask must cover every stored attribute entry")
        rows = np.repeat(np.arange(self.node_count), np.diff(self.attr_indptr))[keep]
        indptr = np.zeros(self.node_count + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=self.node_count), out=indptr[1:])
        return AttributedGraph(
            self.node_vocab,
            self.attr_vocab,
            self.indptr,
            self.indices,
            self.weights,
            _frozen(indptr),
            _frozen(self.attr_indices[keep]),
            _frozen(self.attr_values[keep]),
        )

    def without_attrs(self) -> "AttributedGraph":
        return self.replace_attrs(np.zeros(self.attr_indices.shape, dtype=bool))

    # -- queries -----------------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.node_vocab)

    @property
    def attr_count(self) -> int:
        return len(self.attr_vocab)

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    @property
    def observed_count(self) -> int:
        return len(self.attr_indices)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i] : self.indptr[i + 1]]

    def neighbor_weights(self, i: int) -> np.ndarray:
        return self.weights[self.indptr[i] : self.indptr[i + 1]]

    def degree(self, i: int | None = None):
        """Number of neighbours of ``i``, or the whole degree vector."""
        deg = np.diff(self.indptr)
        return deg if i is None else int(deg[i])

    def weighted_degree(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.node_count), np.diff(self.indptr))
        return np.bincount(rows, weights=self.weights, minlength=self.node_count)

    def has_edge(self, i: int, j: int) -> bool:
        nbrs = self.neighbors(i)
        k = np.searchsorted(nbrs, j)
        return bool(k < len(nbrs) and nbrs[k] == j)

    def edges(self) -> np.ndarray:
        """Undirected edges as an ``(m, 2)`` int array with ``i < j``, sorted."""
        if "edges" not in self._edge_cache:
            rows = np.repeat(np.arange(self.node_count), np.diff(self.indptr))
            upper = rows < self.indices
            arr = np.column_stack([rows[upper], self.indices[upper]])
            self._edge_cache["edges"] = _frozen(arr)
            self._edge_cache["edge_weights"] = _frozen(self.weights[upper])
        return self._edge_cache["edges"]

    def edge_weights(self) -> np.ndarray:
        """Weights aligned with :meth:`edges`."""
        self.edges()
        return self._edge_cache["edge_weights"]

    def attr_row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.attr_indptr[i], self.attr_indptr[i + 1]
        return self.attr_indices[lo:hi], self.attr_values[lo:hi]

    def attr_rows(self) -> np.ndarray:
        """Node id of every stored attribute entry."""
        return np.repeat(np.arange(self.node_count), np.diff(self.attr_indptr))

    def observed(self, i: int, j: int) -> int:
        """Observation mask: 1 if cell (i, j) is observed, else 0."""
        cols, _ = self.attr_row(i)
        k = np.searchsorted(cols, j)
        return int(k < len(cols) and cols[k] == j)

    def attr_value(self, i: int, j: int) -> float:
        """Observed value of cell (i, j); 0 for unobserved cells."""
        cols, vals = self.attr_row(i)
        k = np.searchsorted(cols, j)
        if k < len(cols) and cols[k] == j:
            return float(vals[k])
        return 0.0

    def attr_matrix(self) -> np.ndarray:
        """Dense node-by-attribute matrix of observed values (unobserved cells are 0)."""
        dense = np.zeros((self.node_count, self.attr_count))
        dense[self.attr_rows(), self.attr_indices] = self.attr_values
        return dense

    def mask_matrix(self) -> np.ndarray:
        dense = np.zeros((self.node_count, self.attr_count), dtype=np.int8)
        dense[self.attr_rows(), self.attr_indices] = 1
        return dense

    def __repr__(self) -> str:
        return (
            f"AttributedGraph(nodes={self.node_count}, edges={self.edge_count}, "
            f"attrs={self.attr_count}, observed={self.observed_count})"
        )


def _rebuild_adjacency(n, edges):
    triples = [(int(i), int(j), float(rest[0]) if rest else 1.0) for i, j, *rest in edges]
    g = AttributedGraph.from_edges(n, triples)
    return g.indptr, g.indices, g.weights


@dataclass(frozen=True)
class LabelAssignment:
    """Optional class label per node; ``-1`` marks unlabeled nodes."""

    labels: np.ndarray
    class_names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def labeled(self) -> np.ndarray:
        return self.labels >= 0

    def __getitem__(self, i: int) -> int | None:
        lab = int(self.labels[i])
        return None if lab < 0 else lab


# -- text formats ------------------------------------------------------------


def _records(path) -> Iterator[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0]
            fields = line.split()
            if fields:
                yield lineno, fields


def _parse_number(path, lineno, token, what):
    try:
        value = float(token)
    except ValueError:
        raise GraphFormatError(path, lineno, f"{what} {token!r} is not a number") from None
    if not np.isfinite(value):
        raise GraphFormatError(path, lineno, f"{what} {token!r} is not finite")
    if value < 0:
        raise GraphFormatError(path, lineno, f"negative {what} {token}")
    return value


def load_edges(path: str | os.PathLike) -> AttributedGraph:
    """Read ``src dst [weight]`` lines into a structure-only graph.

    A line holding a single token declares an isolated node. Node ids are
    assigned in first-seen order. Duplicate edges (in either direction) have
    their weights summed; self-loops are dropped but their endpoints still
    become nodes.
    """
    vocab = Vocab()
    triples = []
    for lineno, fields in _records(path):
        if len(fields) == 1:
            vocab.add(fields[0])
            continue
        if len(fields) not in (2, 3):
            raise GraphFormatError(path, lineno, f"expected 'src dst [weight]', got {len(fields)} fields")
        w = _parse_number(path, lineno, fields[2], "weight") if len(fields) == 3 else 1.0
        i, j = vocab.add(fields[0]), vocab.add(fields[1])
        triples.append((i, j, w))
    return AttributedGraph.from_edges(vocab.names, triples)


def load_attrs(graph: AttributedGraph, path: str | os.PathLike) -> AttributedGraph:
    """Attach ``node attr value`` observations to ``graph``.

    Attributes already known to ``graph`` keep their ids; new attribute names
    are appended in first-seen order. Existing observations are kept unless
    overridden by a line in the file.
    """
    attr_vocab = Vocab(graph.attr_vocab)
    cells: dict[tuple[int, int], float] = {}
    rows = graph.attr_rows()
    for i, j, v in zip(rows, graph.attr_indices, graph.attr_values):
        cells[(int(i), int(j))] = float(v)
    from_file: set[tuple[int, int]] = set()
    for lineno, fields in _records(path):
        if len(fields) != 3:
            raise GraphFormatError(path, lineno, f"expected 'node attr value', got {len(fields)} fields")
        node = graph.node_vocab.get(fields[0])
        if node is None:
            raise GraphFormatError(path, lineno, f"unknown node {fields[0]!r}")
        value = _parse_number(path, lineno, fields[2], "attribute value")
        key = (node, attr_vocab.add(fields[1]))
        if key in from_file:
            warnings.warn(
                f"{path}:{lineno}: duplicate entry for node {fields[0]!r} attribute "
                f"{fields[1]!r}; keeping the last value",
                stacklevel=2,
            )
        from_file.add(key)
        cells[key] = value
    triples = [(i, j, v) for (i, j), v in cells.items()]
    base = AttributedGraph.from_edges(graph.node_vocab.names, (), attr_vocab.names, triples)
    return AttributedGraph(
        graph.node_vocab,
        base.attr_vocab,
        graph.indptr,
        graph.indices,
        graph.weights,
        base.attr_indptr,
        base.attr_indices,
        base.attr_values,
    )


def load_labels(graph: AttributedGraph, path: str | os.PathLike) -> LabelAssignment:
    """Read ``node label`` lines; class ids follow first-seen order."""
    labels = np.full(graph.node_count, -1, dtype=np.int64)
    classes = Vocab()
    for lineno, fields in _records(path):
        if len(fields) != 2:
            raise GraphFormatError(path, lineno, f"expected 'node label', got {len(fields)} fields")
        node = graph.node_vocab.get(fields[0])
        if node is None:
            raise GraphFormatError(path, lineno, f"unknown node {fields[0]!r}")
        if labels[node] >= 0:
            raise GraphFormatError(path, lineno, f"duplicate label for node {fields[0]!r}")
        labels[node] = classes.add(fields[1])
    labels.setflags(write=False)
    return LabelAssignment(labels, classes.names)


def save_edges(graph: AttributedGraph, path: str | os.PathLike) -> None:
    """Write each undirected edge once as ``src dst weight``.

    Isolated nodes are written as single-token lines so they survive a reload.
    """
    names = graph.node_vocab
    with open(path, "w", encoding="utf-8") as fh:
        for (i, j), w in zip(graph.edges(), graph.edge_weights()):
            fh.write(f"{names.name(i)} {names.name(j)} {w:.17g}\n")
        for i in np.flatnonzero(graph.degree() == 0):
            fh.write(f"{names.name(i)}\n")


def save_attrs(graph: AttributedGraph, path: str | os.PathLike) -> None:
    names, attrs = graph.node_vocab, graph.attr_vocab
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, v in zip(graph.attr_rows(), graph.attr_indices, graph.attr_values):
            fh.write(f"{names.name(i)} {attrs.name(j)} {v:.17g}\n")
