"""Revenue-ordered level sets and the per-nest singleton catalogs built
from them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._validation import check_nest_index, check_probability
from .model import NestedLogitInstance
from .optimize import SingletonValueTable

INFINITY = math.inf


@dataclass(frozen=True)
class Singleton:
    """A level set ``{j : r_j >= threshold}`` treated as one aggregate item.
    The ``INFINITY`` threshold stands for the empty assortment."""

    threshold: float
    members: tuple[int, ...]

    @property
    def is_empty(self) -> bool:
        return math.isinf(self.threshold)


EMPTY_SINGLETON = Singleton(INFINITY, ())


@dataclass(frozen=True)
class SingletonCatalog:
    """Per-nest singleton lists, ordered by descending threshold with the
    empty singleton last."""

    per_nest: tuple[tuple[Singleton, ...], ...]
    granularity: float = 0.0

    @property
    def num_nests(self) -> int:
        return len(self.per_nest)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.per_nest], dtype=int)

    @property
    def k_max(self) -> int:
        return max(len(c) for c in self.per_nest)

    def index_of(self, nest_index: int, threshold: float) -> int:
        for k, s in enumerate(self.per_nest[nest_index]):
            if s.threshold == threshold:
                return k
        raise KeyError(f"threshold {threshold} is not in the catalog of nest {nest_index}")

    def thresholds(self, indices: Sequence[int]) -> tuple[float, ...]:
        return tuple(self.per_nest[i][k].threshold for i, k in enumerate(indices))

    def combination(self, indices: Sequence[int]) -> tuple[tuple[int, ...], ...]:
        """Member sets for a vector of per-nest catalog positions."""
        if len(indices) != self.num_nests:
            raise ValueError(f"expected {self.num_nests} catalog positions, got {len(indices)}")
        return tuple(self.per_nest[i][int(k)].members for i, k in enumerate(indices))


def _grid(delta: float) -> list[float]:
    # round() keeps k*delta on the intended decimal (3 * 0.1 -> 0.3)
    count = int(math.floor(1.0 / delta + 1e-9))
    return [round(k * delta, 12) for k in range(count + 1)]


def build_catalog(instance: NestedLogitInstance, delta: float = 0.0) -> SingletonCatalog:
    """Singleton catalog for every nest.

    ``delta == 0`` uses every distinct item revenue as a threshold.  A positive
    ``delta`` restricts thresholds to multiples of ``delta`` in ``[0, 1]``; when
    several grid points give the same level set the largest one is kept.
    Padded items never enter a level set.
    """
    delta = check_probability("delta", delta, upper_open=True)
    nests = []
    for i in range(instance.num_nests):
        real = np.flatnonzero(~instance.padded[i])
        rev = instance.revenues[i, real]
        if delta == 0.0:
            candidates = sorted(set(rev.tolist()), reverse=True)
        else:
            candidates = sorted(_grid(delta), reverse=True)
        seen = set()
        singles = []
        for theta in candidates:
            members = tuple(int(j) for j in real[rev >= theta])
            if not members or members in seen:
                continue
            seen.add(members)
            singles.append(Singleton(float(theta), members))
        singles.append(EMPTY_SINGLETON)
        nests.append(tuple(singles))
    return SingletonCatalog(tuple(nests), delta)


def singleton_params(instance: NestedLogitInstance, nest_index: int, singleton: Singleton) -> tuple[float, float]:
    """True ``(u, phi)``: the nest's attraction ``V^gamma`` and its
    preference-weighted mean revenue when offering the singleton's level set."""
    check_nest_index(instance, nest_index)
    if singleton.is_empty or not singleton.members:
        return 0.0, 0.0
    idx = list(singleton.members)
    w = instance.preferences[nest_index, idx]
    total = float(w.sum())
    if total <= 0.0:
        return 0.0, 0.0
    u = total ** float(instance.gammas[nest_index])
    phi = float(np.dot(instance.revenues[nest_index, idx], w) / total)
    return u, phi


def true_value_table(instance: NestedLogitInstance, catalog: SingletonValueTable | SingletonCatalog) -> SingletonValueTable:
    """Value table holding the ground-truth ``(phi, u)`` of every singleton."""
    sizes = catalog.sizes
    phi = np.zeros((catalog.num_nests, catalog.k_max))
    u = np.zeros_like(phi)
    for i, singles in enumerate(catalog.per_nest):
        for k, s in enumerate(singles):
            u[i, k], phi[i, k] = singleton_params(instance, i, s)
    return SingletonValueTable(phi, u, sizes)


def to_combination(catalog: SingletonCatalog, theta_vector: Sequence[float]) -> tuple[tuple[int, ...], ...]:
    """Assortment combination offering ``L_i(theta_i)`` in every nest."""
    if len(theta_vector) != catalog.num_nests:
        raise ValueError(f"expected {catalog.num_nests} thresholds, got {len(theta_vector)}")
    return catalog.combination([catalog.index_of(i, t) for i, t in enumerate(theta_vector)])
