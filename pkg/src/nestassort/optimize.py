"""Static assortment optimization over singleton catalogs.

The fast path is a bisection on the target revenue ``lam``: for fixed
``lam`` the potential ``sum_i (phi_i - lam) * u_i`` separates across nests,
and its maximum exceeds ``lam`` exactly when the best achievable revenue
does.  Exhaustive enumerations are kept as independent oracles.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .model import NestedLogitInstance

DEFAULT_EPSILON_BS = 1e-9
BRUTE_FORCE_CAP = 10**6
FULL_SPACE_CAP = 2**20


class CapExceededError(ValueError):
    """Raised when an exhaustive enumeration would exceed its size cap."""


class SingletonValueTable:
    """Per-(nest, singleton) values ``phi`` and ``u`` fed to the optimizer.

    Rows are padded to a common width; entries past ``sizes[i]`` are ignored.
    The last valid entry of every nest is the empty singleton and must be
    ``(0, 0)``.
    """

    def __init__(self, phi, u, sizes=None):
        phi = np.array(phi, dtype=float, ndmin=2)
        u = np.array(u, dtype=float, ndmin=2)
        if phi.shape != u.shape:
            raise ValueError(f"phi and u shapes differ: {phi.shape} vs {u.shape}")
        m, k = phi.shape
        sizes = np.full(m, k, dtype=int) if sizes is None else np.array(sizes, dtype=int)
        if sizes.shape != (m,) or np.any(sizes < 1) or np.any(sizes > k):
            raise ValueError("sizes must give 1..K valid entries per nest")
        valid = np.arange(k)[None, :] < sizes[:, None]
        if not (np.all(np.isfinite(phi[valid])) and np.all(np.isfinite(u[valid]))):
            raise ValueError("table values must be finite")
        if np.any(phi[valid] < 0.0) or np.any(u[valid] < 0.0):
            raise ValueError("table values must be non-negative")
        if np.any(phi[valid] > 1.0):
            raise ValueError("phi values above 1 break the bisection; rejecting table")
        last = sizes - 1
        rows = np.arange(m)
        if np.any(phi[rows, last] != 0.0) or np.any(u[rows, last] != 0.0):
            raise ValueError("the last entry of each nest (empty singleton) must be (0, 0)")
        phi = np.where(valid, phi, 0.0)
        u = np.where(valid, u, 0.0)
        for arr in (phi, u, sizes, valid):
            arr.setflags(write=False)
        self.phi = phi
        self.u = u
        self.sizes = sizes
        self.valid = valid
        self._gain = phi * u

    @property
    def num_nests(self) -> int:
        return self.phi.shape[0]

    @property
    def k_max(self) -> int:
        return self.phi.shape[1]

    def revenue(self, theta: Sequence[int]) -> float:
        """Optimistic/true revenue ``sum phi u / (1 + sum u)`` of a position vector."""
        idx = np.asarray(theta, dtype=int)
        rows = np.arange(self.num_nests)
        return float(self._gain[rows, idx].sum() / (1.0 + self.u[rows, idx].sum()))


def _check_theta(table: SingletonValueTable, theta) -> np.ndarray:
    idx = np.asarray(theta, dtype=int)
    if idx.shape != (table.num_nests,):
        raise ValueError(f"expected {table.num_nests} positions, got shape {idx.shape}")
    if np.any(idx < 0) or np.any(idx >= table.sizes):
        raise IndexError(f"positions {idx.tolist()} out of catalog range {table.sizes.tolist()}")
    return idx


def potential(table: SingletonValueTable, theta, lam: float) -> float:
    idx = _check_theta(table, theta)
    rows = np.arange(table.num_nests)
    return float(((table.phi[rows, idx] - lam) * table.u[rows, idx]).sum())


def maximize_potential(table: SingletonValueTable, lam: float) -> tuple[np.ndarray, float]:
    """Per-nest argmax of ``(phi - lam) * u``; ties go to the earliest catalog
    entry, except that a nest with no positive score offers its empty singleton."""
    score = np.where(table.valid, (table.phi - lam) * table.u, -np.inf)
    theta = score.argmax(axis=1)
    rows = np.arange(table.num_nests)
    theta = np.where(score[rows, theta] > 0.0, theta, table.sizes - 1)
    value = float(score[rows, theta].sum())
    return theta, value


def binary_search_optimum(table: SingletonValueTable, epsilon_bs: float = DEFAULT_EPSILON_BS,
                          stats: dict | None = None) -> tuple[np.ndarray, float]:
    """Approximate maximizer of the table revenue by bisection on ``lam``.

    Runs ``ceil(log2(1 / epsilon_bs))`` rounds.  The returned positions
    maximize the potential at the final lower end ``lo`` of the bracket, which
    guarantees revenue above ``lo >= optimum - epsilon_bs``; the returned value
    is that vector's revenue computed directly.
    """
    if not epsilon_bs > 0.0:
        raise ValueError(f"epsilon_bs must be positive, got {epsilon_bs}")
    rounds = max(0, math.ceil(math.log2(1.0 / epsilon_bs)))
    lo, hi = 0.0, 1.0
    rows = np.arange(table.num_nests)
    masked_u = np.where(table.valid, table.u, 0.0)
    masked_gain = np.where(table.valid, table._gain, -np.inf)
    for _ in range(rounds):
        lam = 0.5 * (lo + hi)
        # (phi - lam) * u written as gain - lam * u to save one product
        score = masked_gain - lam * masked_u
        if score.max(axis=1).sum() > lam:
            lo = lam
        else:
            hi = lam
    theta, _ = maximize_potential(table, lo)
    if stats is not None:
        reads = (rounds + 1) * int(table.sizes.sum())
        stats["rounds"] = rounds
        stats["table_reads"] = stats.get("table_reads", 0) + reads
        stats["bracket"] = (lo, hi)
    return theta, table.revenue(theta)


def _product_sums(parts: list[np.ndarray]) -> np.ndarray:
    """Sum over the Cartesian product of per-nest arrays, flattened in
    lexicographic (row-major) order."""
    total = np.zeros(())
    for i, a in enumerate(parts):
        shape = [1] * len(parts)
        shape[i] = a.size
        total = total + a.reshape(shape)
    return total.ravel()


def brute_force_optimum(table: SingletonValueTable, cap: int = BRUTE_FORCE_CAP) -> tuple[np.ndarray, float]:
    """Exact maximizer of the table revenue by full enumeration.  Ties go to
    the lexicographically first position vector."""
    count = math.prod(int(k) for k in table.sizes)
    if count > cap:
        raise CapExceededError(f"{count} position vectors exceed the cap of {cap}")
    gains = [table._gain[i, : table.sizes[i]] for i in range(table.num_nests)]
    utils = [table.u[i, : table.sizes[i]] for i in range(table.num_nests)]
    values = _product_sums(gains) / (1.0 + _product_sums(utils))
    best = int(values.argmax())
    theta = np.array(np.unravel_index(best, tuple(table.sizes)), dtype=int)
    return theta, table.revenue(theta)


def subset_terms(instance: NestedLogitInstance, nest_index: int) -> tuple[np.ndarray, np.ndarray]:
    """``(R_i V_i^gamma, V_i^gamma)`` for all ``2^N`` subsets of a nest,
    indexed by bitmask (bit ``j`` set means item ``j`` is offered)."""
    n = instance.num_items
    masks = np.arange(2**n)
    bits = (masks[:, None] >> np.arange(n)[None, :]) & 1
    v = instance.preferences[nest_index]
    r = instance.revenues[nest_index]
    big_v = bits @ v
    rv = bits @ (r * v)
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_r = np.where(big_v > 0, rv / np.where(big_v > 0, big_v, 1.0), 0.0)
    weight = np.where(big_v > 0, big_v ** instance.gammas[nest_index], 0.0)
    return mean_r * weight, weight


def brute_force_full_space(instance: NestedLogitInstance, cap: int = FULL_SPACE_CAP):
    """Exact optimum of the expected revenue over every subset combination."""
    m, n = instance.num_nests, instance.num_items
    count = (2**n) ** m
    if count > cap:
        raise CapExceededError(f"{count} combinations exceed the cap of {cap}")
    terms = [subset_terms(instance, i) for i in range(m)]
    values = _product_sums([t[0] for t in terms]) / (1.0 + _product_sums([t[1] for t in terms]))
    best = int(values.argmax())
    masks = np.unravel_index(best, (2**n,) * m)
    combination = tuple(tuple(j for j in range(n) if (int(mask) >> j) & 1) for mask in masks)
    return combination, float(values[best])
