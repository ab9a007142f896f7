"""Compiled inner loops for negative-sampling SGD.

Output matrices are passed as ``(items, d)`` row-major views, i.e. the
transposes of the ``d x items`` parameter matrices, so every column touched
by an update is contiguous.
"""
import math

import numpy as np
from numba import njit, prange

MIXED, STRUCTURE_ONLY, ATTRIBUTE_ONLY = 0, 1, 2
MAX_REJECTIONS = 1000


@njit(cache=True, inline="always")
def sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@njit(cache=True)
def sgd_update(w_in, out_rows, i, targets, lr, coef, grad):
    """Apply one negative-sampling step for input row ``i``.

    ``targets[0]`` is the positive item, the rest are negatives. Every
    gradient is evaluated at the pre-step parameters, so repeated negatives
    contribute additively.
    """
    d = w_in.shape[1]
    n_t = targets.shape[0]
    for t in range(n_t):
        row = targets[t]
        s = 0.0
        for k in range(d):
            s += w_in[i, k] * out_rows[row, k]
        coef[t] = sigmoid(s) - 1.0 if t == 0 else sigmoid(s)
    for k in range(d):
        grad[k] = 0.0
    for t in range(n_t):
        row = targets[t]
        c = coef[t]
        for k in range(d):
            grad[k] += c * out_rows[row, k]
    for t in range(n_t):
        row = targets[t]
        step = lr * coef[t]
        for k in range(d):
            out_rows[row, k] -= step * w_in[i, k]
    for k in range(d):
        w_in[i, k] -= lr * grad[k]


@njit(cache=True, inline="always")
def alias_draw(prob, alias):
    slot = np.int64(np.random.random() * prob.shape[0])
    if slot >= prob.shape[0]:
        slot = prob.shape[0] - 1
    if np.random.random() >= prob[slot]:
        slot = alias[slot]
    return slot


@njit(cache=True)
def _fill_targets(targets, positive, neg_prob, neg_alias):
    targets[0] = positive
    filled = 1
    misses = 0
    while filled < targets.shape[0]:
        k = alias_draw(neg_prob, neg_alias)
        if k == positive:
            misses += 1
            if misses >= MAX_REJECTIONS:
                raise RuntimeError("negative sampling kept hitting the positive item")
            continue
        targets[filled] = k
        filled += 1


@njit(cache=True)
def _run(
    w_in, out_s, out_a,
    s_prob, s_alias, s_centers, s_contexts,
    a_prob, a_alias, a_nodes, a_attrs,
    ns_prob, ns_alias, na_prob, na_alias,
    negatives, n_iters, lr, structure_prob, mode,
):
    d = w_in.shape[1]
    targets = np.empty(negatives + 1, dtype=np.int64)
    coef = np.empty(negatives + 1)
    grad = np.empty(d)
    n_structure = 0
    for _ in range(n_iters):
        if mode == STRUCTURE_ONLY:
            structural = True
        elif mode == ATTRIBUTE_ONLY:
            structural = False
        else:
            # r in (0, 1]
            structural = 1.0 - np.random.random() <= structure_prob
        if structural:
            p = alias_draw(s_prob, s_alias)
            _fill_targets(targets, s_contexts[p], ns_prob, ns_alias)
            sgd_update(w_in, out_s, s_centers[p], targets, lr, coef, grad)
            n_structure += 1
        else:
            p = alias_draw(a_prob, a_alias)
            _fill_targets(targets, a_attrs[p], na_prob, na_alias)
            sgd_update(w_in, out_a, a_nodes[p], targets, lr, coef, grad)
    return n_structure


@njit(cache=True)
def run_sgd(
    w_in, out_s, out_a,
    s_prob, s_alias, s_centers, s_contexts,
    a_prob, a_alias, a_nodes, a_attrs,
    ns_prob, ns_alias, na_prob, na_alias,
    negatives, n_iters, lr, structure_prob, mode, seed,
):
    """Single-stream SGD for ``n_iters`` iterations at a fixed rate.

    Returns the number of structure steps taken.
    """
    np.random.seed(seed)
    return _run(
        w_in, out_s, out_a,
        s_prob, s_alias, s_centers, s_contexts,
        a_prob, a_alias, a_nodes, a_attrs,
        ns_prob, ns_alias, na_prob, na_alias,
        negatives, n_iters, lr, structure_prob, mode,
    )


@njit(cache=True, parallel=True)
def run_sgd_hogwild(
    w_in, out_s, out_a,
    s_prob, s_alias, s_centers, s_contexts,
    a_prob, a_alias, a_nodes, a_attrs,
    ns_prob, ns_alias, na_prob, na_alias,
    negatives, n_iters, lr, structure_prob, mode, seed, n_workers,
):
    """Lock-free variant: workers share the parameters and race on updates."""
    counts = np.zeros(n_workers, dtype=np.int64)
    for w in prange(n_workers):
        np.random.seed(seed + w)
        share = n_iters // n_workers + (1 if w < n_iters % n_workers else 0)
        counts[w] = _run(
            w_in, out_s, out_a,
            s_prob, s_alias, s_centers, s_contexts,
            a_prob, a_alias, a_nodes, a_attrs,
            ns_prob, ns_alias, na_prob, na_alias,
            negatives, share, lr, structure_prob, mode,
        )
    return counts.sum()
