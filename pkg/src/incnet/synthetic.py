"""Seeded synthetic attributed graphs for experiments and tests."""
from __future__ import annotations

import numpy as np

from .graph import AttributedGraph, LabelAssignment


def block_graph(
    n_nodes: int = 200,
    n_blocks: int = 2,
    p_in: float = 0.10,
    p_out: float = 0.01,
    attrs_per_block: int = 50,
    flip: float = 0.1,
    seed=0,
) -> tuple[AttributedGraph, LabelAssignment]:
    """Stochastic block model with block-indicative binary attributes.

    Nodes are split into contiguous equal blocks. Each block owns
    ``attrs_per_block`` attributes; a node's value for an attribute is 1 if
    the attribute belongs to its block, then flipped with probability
    ``flip``. Every cell is observed (zeros are stored explicitly).
    """
    rng = np.random.default_rng(seed)
    block = np.arange(n_nodes) * n_blocks // n_nodes
    iu, ju = np.triu_indices(n_nodes, k=1)
    p = np.where(block[iu] == block[ju], p_in, p_out)
    hit = rng.random(len(iu)) < p
    edges = [(int(i), int(j), 1.0) for i, j in zip(iu[hit], ju[hit])]

    n_attrs = n_blocks * attrs_per_block
    owner = np.arange(n_attrs) // attrs_per_block
    values = (owner[None, :] == block[:, None]).astype(np.float64)
    flips = rng.random(values.shape) < flip
    values[flips] = 1.0 - values[flips]
    rows, cols = np.indices(values.shape)
    attrs = zip(rows.ravel(), cols.ravel(), values.ravel())

    graph = AttributedGraph.from_edges(
        [f"n{i}" for i in range(n_nodes)],
        edges,
        [f"w{j}" for j in range(n_attrs)],
        attrs,
    )
    labels = LabelAssignment(block.astype(np.int64), tuple(f"c{b}" for b in range(n_blocks)))
    return graph, labels
