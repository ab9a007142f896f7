"""Truncated random walks and window co-occurrence counts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import AttributedGraph

PAD = -1


@dataclass(frozen=True)
class ContextPairCounts:
    """Sparse counts n(center, context), sorted by (center, context)."""

    centers: np.ndarray
    contexts: np.ndarray
    counts: np.ndarray
    node_count: int

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return len(self.counts)

    def get(self, i: int, j: int) -> int:
        key = np.int64(i) * self.node_count + j
        keys = self.centers * self.node_count + self.contexts
        k = np.searchsorted(keys, key)
        if k < len(keys) and keys[k] == key:
            return int(self.counts[k])
        return 0

    def as_dict(self) -> dict[tuple[int, int], int]:
        return {
            (int(i), int(j)): int(c)
            for i, j, c in zip(self.centers, self.contexts, self.counts)
        }

    def node_mass(self) -> np.ndarray:
        """Total context occurrences per node (row sums of the pair counts)."""
        return np.bincount(self.centers, weights=self.counts, minlength=self.node_count)

    def dense(self) -> np.ndarray:
        mat = np.zeros((self.node_count, self.node_count))
        mat[self.centers, self.contexts] = self.counts
        return mat


def generate_walks(graph: AttributedGraph, walk_len: int, walks_per_node: int, seed) -> np.ndarray:
    """Run ``walks_per_node`` rounds of one walk per node, ascending node id.

    Returns an int array of shape ``(walks_per_node * |V|, walk_len)``; walk
    ``r * |V| + i`` starts at node ``i``. Walks that reach a node without
    neighbours stop there and are padded with ``PAD``.
    """
    if walk_len < 1 or walks_per_node < 1:
        raise ValueError("walk_len and walks_per_node must be >= 1")
    rng = np.random.default_rng(seed)
    n = graph.node_count
    walks = np.full((walks_per_node * n, walk_len), PAD, dtype=np.int64)
    if n == 0:
        return walks
    indptr = graph.indptr
    deg = np.diff(indptr)
    cum = np.cumsum(graph.weights)
    start_cum = np.concatenate([[0.0], cum])[indptr[:-1]]
    strength = np.concatenate([[0.0], cum])[indptr[1:]] - start_cum

    walks[:, 0] = np.tile(np.arange(n), walks_per_node)
    alive = np.arange(len(walks))
    for step in range(1, walk_len):
        cur = walks[alive, step - 1]
        alive = alive[deg[cur] > 0]
        if alive.size == 0:
            break
        cur = walks[alive, step - 1]
        target = start_cum[cur] + rng.random(alive.size) * strength[cur]
        pos = np.searchsorted(cum, target, side="right")
        pos = np.clip(pos, indptr[cur], indptr[cur + 1] - 1)
        walks[alive, step] = graph.indices[pos]
    return walks


def walk_lengths(walks: np.ndarray) -> np.ndarray:
    return np.count_nonzero(walks != PAD, axis=1)


def count_context_pairs(walks, window: int, node_count: int | None = None) -> ContextPairCounts:
    """Count ordered (center, context) co-occurrences within ``window`` steps.

    ``walks`` may be a padded 2-D array from :func:`generate_walks` or any
    iterable of node-id sequences. Positions holding the same node are not
    counted as a pair.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    if isinstance(walks, np.ndarray) and walks.ndim == 2:
        padded = walks.astype(np.int64, copy=False)
    else:
        seqs = [np.asarray(w, dtype=np.int64) for w in walks]
        width = max((len(w) for w in seqs), default=0)
        padded = np.full((len(seqs), width), PAD, dtype=np.int64)
        for r, w in enumerate(seqs):
            padded[r, : len(w)] = w
    if node_count is None:
        node_count = int(padded.max()) + 1 if padded.size else 0

    centers, contexts = [], []
    for off in range(1, min(window, padded.shape[1] - 1) + 1):
        a = padded[:, :-off].ravel()
        b = padded[:, off:].ravel()
        keep = (a != PAD) & (b != PAD) & (a != b)
        a, b = a[keep], b[keep]
        centers += [a, b]
        contexts += [b, a]
    if centers:
        keys = np.concatenate(centers) * node_count + np.concatenate(contexts)
    else:
        keys = np.empty(0, dtype=np.int64)
    if node_count and node_count * node_count <= 1 << 24:
        dense = np.bincount(keys, minlength=node_count * node_count)
        uniq = np.flatnonzero(dense)
        cnt = dense[uniq]
    else:
        uniq, cnt = np.unique(keys, return_counts=True)
    return ContextPairCounts(
        uniq // max(node_count, 1),
        uniq % max(node_count, 1),
        cnt.astype(np.int64),
        node_count,
    )
