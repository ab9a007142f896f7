"""Alias-method sampling of training pairs and negatives."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NEGATIVE_POWER = 0.75
MAX_REJECTIONS = 1000


@dataclass(frozen=True)
class AliasTable:
    """Vose alias table over ``len(prob)`` items.

    ``items`` maps slot index to the id returned by a draw; by default it is
    the identity.
    """

    prob: np.ndarray
    alias: np.ndarray
    items: np.ndarray
    weight_total: float

    def __len__(self) -> int:
        return len(self.prob)

    def induced_probabilities(self) -> np.ndarray:
        """Exact probability of drawing each slot, read off the table."""
        n = len(self.prob)
        mass = self.prob.copy()
        np.add.at(mass, self.alias, 1.0 - self.prob)
        return mass / n

    def draw(self, rng: np.random.Generator) -> int:
        return draw(self, rng)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Vectorised draws; same distribution as repeated :func:`draw`."""
        slots = rng.integers(len(self.prob), size=size)
        coins = rng.random(size)
        slots = np.where(coins < self.prob[slots], slots, self.alias[slots])
        return self.items[slots]


def build_alias(weights, items=None) -> AliasTable:
    """Vose's two-worklist construction, O(n)."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.size == 0:
        raise ValueError("cannot build an alias table over zero items")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = float(w.sum())
    if total <= 0:
        raise ValueError("at least one weight must be positive")
    n = w.size
    scaled = w * (n / total)
    prob = np.zeros(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        if scaled[g] < 1.0:
            small.append(g)
        else:
            large.append(g)
    # leftovers differ from 1 only by rounding
    for i in large:
        prob[i] = 1.0
    for i in small:
        prob[i] = 1.0 if w[i] > 0 else 0.0
    if items is None:
        items = np.arange(n, dtype=np.int64)
    else:
        items = np.asarray(items, dtype=np.int64)
        if items.shape != (n,):
            raise ValueError("items must align with weights")
    for arr in (prob, alias, items):
        arr.setflags(write=False)
    return AliasTable(prob, alias, items, total)


def draw(table: AliasTable, rng: np.random.Generator) -> int:
    """One uniform slot pick plus one biased coin."""
    slot = int(rng.integers(len(table.prob)))
    if rng.random() >= table.prob[slot]:
        slot = int(table.alias[slot])
    return int(table.items[slot])


@dataclass(frozen=True)
class NegativeSampler:
    """Alias table over candidate ids weighted by ``mass ** 0.75``."""

    table: AliasTable
    mass: np.ndarray

    @classmethod
    def from_mass(cls, mass, power: float = NEGATIVE_POWER) -> "NegativeSampler":
        mass = np.asarray(mass, dtype=np.float64)
        return cls(build_alias(np.power(mass, power)), mass)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.mass > 0))


def _draw_negatives(sampler: NegativeSampler, exclude: int, k: int, rng):
    support = sampler.mass > 0
    if support.sum() < 2 and (support.sum() == 0 or support[exclude]):
        raise ValueError(f"no negative candidates remain after excluding item {exclude}")
    out = np.empty(k, dtype=np.int64)
    retries = 0
    filled = 0
    while filled < k:
        item = draw(sampler.table, rng)
        if item == exclude:
            retries += 1
            if retries >= MAX_REJECTIONS:
                raise RuntimeError("negative sampling kept hitting the excluded item")
            continue
        out[filled] = item
        filled += 1
    return out, retries


def draw_negatives(sampler: NegativeSampler, exclude: int, k: int, rng) -> np.ndarray:
    """Draw exactly ``k`` ids distinct from ``exclude`` (duplicates allowed).

    Hits on ``exclude`` are redrawn rather than dropped.
    """
    return _draw_negatives(sampler, exclude, k, rng)[0]
