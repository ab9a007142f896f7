"""Embedding parameters, objectives, gradients and the SGD trainer.

A node ``v_i`` is embedded as row ``i`` of ``w_in``. Two output matrices
predict, respectively, the context nodes of ``v_i`` sampled from random
walks (``w_out_s``, ``d x |V|``) and the attributes observed on ``v_i``
(``w_out_a``, ``d x |A|``). Training alternates between the two prediction
tasks with negative sampling.
"""
from __future__ import annotations

import dataclasses
import logging
import os
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit, log_expit, logsumexp

from . import _kernels
from .graph import AttributedGraph
from .sampling import AliasTable, NegativeSampler, build_alias
from .walks import ContextPairCounts, count_context_pairs, generate_walks

logger = logging.getLogger(__name__)


@dataclass
class EmbeddingModel:
    """Parameter matrices; output matrices are stored column-major."""

    w_in: np.ndarray
    w_out_s: np.ndarray
    w_out_a: np.ndarray

    def __post_init__(self):
        self.w_in = np.ascontiguousarray(self.w_in, dtype=np.float64)
        self.w_out_s = np.asfortranarray(self.w_out_s, dtype=np.float64)
        self.w_out_a = np.asfortranarray(self.w_out_a, dtype=np.float64)
        d = self.w_in.shape[1]
        if self.w_out_s.shape != (d, self.w_in.shape[0]) or self.w_out_a.shape[0] != d:
            raise ValueError("inconsistent parameter shapes")

    @property
    def dim(self) -> int:
        return self.w_in.shape[1]

    @property
    def node_count(self) -> int:
        return self.w_in.shape[0]

    @property
    def attr_count(self) -> int:
        return self.w_out_a.shape[1]

    def embedding(self, i: int) -> np.ndarray:
        return self.w_in[i]

    @property
    def embeddings(self) -> np.ndarray:
        return self.w_in

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.w_in.copy(), self.w_out_s.copy(), self.w_out_a.copy())

    def is_finite(self) -> bool:
        return bool(
            np.isfinite(self.w_in).all()
            and np.isfinite(self.w_out_s).all()
            and np.isfinite(self.w_out_a).all()
        )


@dataclass
class TrainConfig:
    walk_len: int = 100
    walks_per_node: int = 40
    window: int = 10
    dim: int = 256
    negatives: int = 5
    max_iters: int = 100_000_000
    lr0: float = 0.025
    lr_update_period: int = 10_000
    lr_floor: float | None = None
    seed: int = 0
    structure_prob: float = 0.5
    deterministic: bool = True
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("walk_len", "walks_per_node", "window", "dim", "negatives",
                     "max_iters", "lr_update_period", "threads"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.lr0 > 0:
            raise ValueError("lr0 must be positive")
        if self.lr_floor is not None and self.lr_floor < 0:
            raise ValueError("lr_floor must be nonnegative")
        if not 0.0 <= self.structure_prob <= 1.0:
            raise ValueError("structure_prob must lie in [0, 1]")
        if self.deterministic and self.threads != 1:
            raise ValueError("deterministic training requires threads == 1")

    @property
    def effective_lr_floor(self) -> float:
        return self.lr0 * 1e-4 if self.lr_floor is None else self.lr_floor

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ObjectiveReport:
    structure_sum: float
    attribute_sum: float
    alpha1: float
    alpha2: float

    @property
    def structure_term(self) -> float:
        return self.alpha1 * self.structure_sum

    @property
    def attribute_term(self) -> float:
        return self.alpha2 * self.attribute_sum

    @property
    def total(self) -> float:
        return self.structure_term + self.attribute_term


def init_model(n_nodes: int, n_attrs: int, dim: int, seed=None) -> EmbeddingModel:
    """Uniform ``(-0.5/d, 0.5/d)`` input weights, all-zero output weights."""
    if n_nodes < 1 or n_attrs < 0 or dim < 1:
        raise ValueError("model dimensions must be positive")
    rng = np.random.default_rng(seed)
    w_in = (rng.random((n_nodes, dim)) - 0.5) / dim
    return EmbeddingModel(
        w_in,
        np.zeros((dim, n_nodes), order="F"),
        np.zeros((dim, n_attrs), order="F"),
    )


# -- full-softmax quantities (evaluation only) --------------------------------


def _log_softmax_row(phi, out):
    logits = phi @ out
    return logits - logsumexp(logits)


def prob_context(model: EmbeddingModel, i: int, j: int) -> float:
    """P(v_j | v_i) under the full softmax over nodes."""
    return float(np.exp(_log_softmax_row(model.w_in[i], model.w_out_s)[j]))


def prob_attr(model: EmbeddingModel, i: int, j: int) -> float:
    """P(a_j | v_i) under the full softmax over attributes."""
    return float(np.exp(_log_softmax_row(model.w_in[i], model.w_out_a)[j]))


def exact_objective(
    model: EmbeddingModel, counts: ContextPairCounts, graph: AttributedGraph
) -> ObjectiveReport:
    """Normalised full-softmax objective over all observed pairs.

    Costs O(|V|^2 d); meant for small graphs and tests.
    """
    if counts.total <= 0:
        raise ValueError("no context pairs to evaluate")
    logits = model.w_in @ model.w_out_s
    logp = logits - logsumexp(logits, axis=1, keepdims=True)
    s_sum = -float(np.dot(counts.counts, logp[counts.centers, counts.contexts]))
    alpha1 = 1.0 / counts.total

    mass = float(graph.attr_values.sum())
    if mass > 0:
        logits = model.w_in @ model.w_out_a
        logp = logits - logsumexp(logits, axis=1, keepdims=True)
        rows = graph.attr_rows()
        a_sum = -float(np.dot(graph.attr_values, logp[rows, graph.attr_indices]))
        alpha2 = 1.0 / mass
    else:
        a_sum, alpha2 = 0.0, 0.0
    return ObjectiveReport(s_sum, a_sum, alpha1, alpha2)


# -- negative-sampling objectives ---------------------------------------------


def _ns_grads(phi, out, j, negs):
    negs = np.asarray(negs, dtype=np.int64)
    if np.any(negs == j):
        raise ValueError("the positive item must not appear among the negatives")
    pos = out[:, j]
    neg = out[:, negs]
    g_pos = expit(phi @ pos) - 1.0
    g_neg = expit(phi @ neg)
    grad_in = g_pos * pos + neg @ g_neg
    return grad_in, g_pos * phi, np.outer(g_neg, phi)


def structure_grads(model: EmbeddingModel, i: int, j: int, negs):
    """Gradients of the sampled structure loss for pair (v_i, v_j).

    Returns ``(grad_in, grad_pos, grad_negs)``: the gradient for row ``i`` of
    ``w_in``, for column ``j`` of ``w_out_s``, and one row per entry of
    ``negs`` for the corresponding columns (a repeated negative appears once
    per occurrence; its columns' total gradient is the sum).
    """
    return _ns_grads(model.w_in[i], model.w_out_s, j, negs)


def attr_grads(model: EmbeddingModel, i: int, j: int, negs):
    """As :func:`structure_grads` for pair (v_i, a_j) against ``w_out_a``."""
    return _ns_grads(model.w_in[i], model.w_out_a, j, negs)


def ns_loss(phi, out, j, negs) -> float:
    """Negative-sampling loss: positive log-sigmoid term plus one per negative."""
    negs = np.asarray(negs, dtype=np.int64)
    return float(-log_expit(phi @ out[:, j]) - log_expit(-(phi @ out[:, negs])).sum())


def _step(model, out, i, j, negs, lr):
    if lr < 0:
        raise ValueError("learning rate must be nonnegative")
    negs = np.asarray(negs, dtype=np.int64)
    if np.any(negs == j):
        raise ValueError("the positive item must not appear among the negatives")
    targets = np.concatenate([[j], negs]).astype(np.int64)
    _kernels.sgd_update(
        model.w_in, out.T, int(i), targets, float(lr),
        np.empty(len(targets)), np.empty(model.dim),
    )
    return model


def sgd_step_structure(model: EmbeddingModel, i: int, j: int, negs, lr: float) -> EmbeddingModel:
    """In-place descent step on the structure loss of pair (v_i, v_j)."""
    return _step(model, model.w_out_s, i, j, negs, lr)


def sgd_step_attr(model: EmbeddingModel, i: int, j: int, negs, lr: float) -> EmbeddingModel:
    """In-place descent step on the attribute loss of pair (v_i, a_j)."""
    return _step(model, model.w_out_a, i, j, negs, lr)


def lr_schedule(lr0: float, elapsed: int, max_iters: int, period: int = 10_000,
                floor: float | None = None) -> float:
    """Linear decay updated in steps of ``period`` iterations, clamped at ``floor``."""
    if floor is None:
        floor = lr0 * 1e-4
    stepped = (elapsed // period) * period
    return max(lr0 * (1.0 - stepped / max_iters), floor)


# -- training -----------------------------------------------------------------


def derive_seed(seed: int, phase: str) -> int:
    """Independent sub-seed for a named phase of a run."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(phase.encode())])
    return int(ss.generate_state(1)[0])


def _block_seed(base: int, block: int, offset: int) -> int:
    return int(np.random.SeedSequence([base, block, offset]).generate_state(1)[0] >> 1)


@dataclass
class Trainer:
    """Prepared sampling state for one training run.

    ``Trainer.prepare`` performs the walk/count phase; :meth:`run` performs
    the SGD phase and may be called repeatedly to continue training.
    """

    graph: AttributedGraph
    config: TrainConfig
    model: EmbeddingModel
    counts: ContextPairCounts
    mode: int
    structure_pairs: AliasTable | None
    attribute_pairs: AliasTable | None
    node_negatives: NegativeSampler | None
    attr_negatives: NegativeSampler | None
    elapsed: int = 0
    structure_steps: int = 0
    timings: dict = field(default_factory=dict)
    _sgd_seed: int = 0

    @classmethod
    def prepare(cls, graph: AttributedGraph, config: TrainConfig) -> "Trainer":
        config.validate()
        timings = {}
        t0 = time.perf_counter()
        if graph.edge_count:
            walks = generate_walks(
                graph, config.walk_len, config.walks_per_node, derive_seed(config.seed, "walks")
            )
            counts = count_context_pairs(walks, config.window, graph.node_count)
        else:
            counts = count_context_pairs(np.empty((0, 1), dtype=np.int64), 1, graph.node_count)
        timings["walks"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        has_structure = counts.total > 0
        has_attrs = graph.attr_values.sum() > 0
        if not (has_structure or has_attrs):
            raise ValueError("graph has neither context pairs nor attribute observations to train on")
        if has_structure and has_attrs:
            mode = _kernels.MIXED
        elif has_structure:
            mode = _kernels.STRUCTURE_ONLY
            logger.info("no attribute mass; training on structure only")
        else:
            mode = _kernels.ATTRIBUTE_ONLY
            logger.info("no context pairs; training on attributes only")

        s_pairs = node_neg = a_pairs = attr_neg = None
        if has_structure:
            s_pairs = build_alias(counts.counts)
            node_neg = NegativeSampler.from_mass(counts.node_mass())
            if node_neg.support_size < 2:
                raise ValueError("structure training needs at least two context nodes")
        if has_attrs:
            a_pairs = build_alias(graph.attr_values)
            mass = np.bincount(graph.attr_indices, weights=graph.attr_values,
                               minlength=graph.attr_count)
            attr_neg = NegativeSampler.from_mass(mass)
            if attr_neg.support_size < 2:
                raise ValueError("attribute training needs at least two attributes with positive mass")
        timings["tables"] = time.perf_counter() - t0

        model = init_model(graph.node_count, graph.attr_count, config.dim,
                           derive_seed(config.seed, "init"))
        return cls(
            graph, config, model, counts, mode, s_pairs, a_pairs, node_neg, attr_neg,
            timings=timings,
            _sgd_seed=derive_seed(config.seed, "sgd"),
        )

    def _kernel_args(self):
        empty_f = np.zeros(1)
        empty_i = np.zeros(1, dtype=np.int64)
        g = self.graph
        if self.structure_pairs is not None:
            s = (self.structure_pairs.prob, self.structure_pairs.alias,
                 self.counts.centers, self.counts.contexts)
            ns = (self.node_negatives.table.prob, self.node_negatives.table.alias)
        else:
            s = (empty_f, empty_i, empty_i, empty_i)
            ns = (empty_f, empty_i)
        if self.attribute_pairs is not None:
            a = (self.attribute_pairs.prob, self.attribute_pairs.alias,
                 g.attr_rows(), np.ascontiguousarray(g.attr_indices))
            na = (self.attr_negatives.table.prob, self.attr_negatives.table.alias)
        else:
            a = (empty_f, empty_i, empty_i, empty_i)
            na = (empty_f, empty_i)
        return s, a, ns, na

    def run(
        self,
        n_iters: int | None = None,
        callback: Callable[["Trainer"], None] | None = None,
        callback_every: int | None = None,
    ) -> EmbeddingModel:
        """Advance training by ``n_iters`` (default: until ``max_iters``).

        Iterations are executed in blocks of ``lr_update_period``, each with
        its own sub-seed, so splitting a run at block boundaries does not
        change the result. ``callback`` fires whenever ``elapsed`` reaches a multiple of
        ``callback_every``, which must itself be a multiple of the period.
        """
        cfg = self.config
        period = cfg.lr_update_period
        if n_iters is None:
            n_iters = cfg.max_iters - self.elapsed
        stop = self.elapsed + n_iters
        if callback is not None:
            callback_every = callback_every or period
            if callback_every % period:
                raise ValueError("callback_every must be a multiple of lr_update_period")
        s, a, ns, na = self._kernel_args()
        w = self.model
        t0 = time.perf_counter()
        while self.elapsed < stop:
            block, offset = divmod(self.elapsed, period)
            block_end = min((block + 1) * period, stop)
            n = block_end - self.elapsed
            lr = lr_schedule(cfg.lr0, self.elapsed, cfg.max_iters, period, cfg.effective_lr_floor)
            seed = _block_seed(self._sgd_seed, block, offset)
            if cfg.threads > 1:
                steps = _kernels.run_sgd_hogwild(
                    w.w_in, w.w_out_s.T, w.w_out_a.T, *s, *a, *ns, *na,
                    cfg.negatives, n, lr, cfg.structure_prob, self.mode, seed, cfg.threads,
                )
            else:
                steps = _kernels.run_sgd(
                    w.w_in, w.w_out_s.T, w.w_out_a.T, *s, *a, *ns, *na,
                    cfg.negatives, n, lr, cfg.structure_prob, self.mode, seed,
                )
            self.structure_steps += int(steps)
            self.elapsed = block_end
            if callback is not None and self.elapsed % callback_every == 0:
                callback(self)
        self.timings["sgd"] = self.timings.get("sgd", 0.0) + time.perf_counter() - t0
        return self.model


def train(
    graph: AttributedGraph,
    config: TrainConfig,
    callback: Callable[[Trainer], None] | None = None,
    callback_every: int | None = None,
) -> EmbeddingModel:
    """Walk, count, then run ``config.max_iters`` SGD iterations."""
    trainer = Trainer.prepare(graph, config)
    return trainer.run(callback=callback, callback_every=callback_every)


def save_embeddings(model: EmbeddingModel, graph: AttributedGraph, path: str | os.PathLike) -> None:
    """Text format: ``|V| d`` header, then ``node f1 ... fd`` per node."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{model.node_count} {model.dim}\n")
        for i, row in enumerate(model.w_in):
            fh.write(graph.node_vocab.name(i) + " " + " ".join(f"{x:.6f}" for x in row) + "\n")


def load_embeddings(path: str | os.PathLike) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        n, d = map(int, fh.readline().split())
        names, rows = [], []
        for line in fh:
            parts = line.split()
            names.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    emb = np.array(rows, dtype=np.float64).reshape(n, d)
    return names, emb
