"""Hard two-type instances for the regret lower bound, with numeric checks
of their revenue gaps and per-period KL divergences.

Every nest holds three items with revenues ``(1, 0.8, rho)``.  Type A nests
weight items ``((1+eps), (1-eps), 1) / M^2``, type B nests swap the first two
weights, and all nests use ``gamma = 0.5``.  ``rho`` is the unique value for
which ``{0, 1}`` and ``{0, 1, 2}`` are equally good at ``eps = 0``, so a small
``eps`` decides which is optimal and the two types are hard to tell apart.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_combination
from .model import NestedLogitInstance, expected_revenue
from .optimize import CapExceededError, subset_terms

SQRT2, SQRT3, SQRT6 = math.sqrt(2.0), math.sqrt(3.0), math.sqrt(6.0)
RHO = (36.0 + 18.0 * SQRT3 - 27.0 * SQRT2 - 9.0 * SQRT6) / 10.0  # ~0.694774
ITEM_REVENUES = (1.0, 0.8, RHO)
TYPE_A_BEST = (0, 1)
TYPE_B_BEST = (0, 1, 2)
EXHAUSTIVE_CAP = 2**18

# Largest KL(P_U || P_W) * M / eps^2 (2.60744, rounded up) seen by ``calibrate_kl_constant()`` over
# M in {4, 8, 16}, eps in {0.1, 0.05, 0.01}, every subset of the swapped nest
# and 40 random offers per case (seed 2024), both swap directions.  Rerun the
# function to reproduce; the value is an empirical fixture, not a proven bound.
KL_CONSTANT = 2.6075


@dataclass(frozen=True)
class AdversarialSpec:
    num_nests: int
    epsilon: float
    type_a_set: frozenset = field(default=None)  # type: ignore[assignment]
    rho: float = RHO

    def __post_init__(self):
        m = self.num_nests
        if m < 4 or m % 4:
            raise ValueError(f"num_nests must be a positive multiple of 4, got {m}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        a = frozenset(range(m // 4)) if self.type_a_set is None else frozenset(int(i) for i in self.type_a_set)
        if len(a) != m // 4 or any(not 0 <= i < m for i in a):
            raise ValueError(f"type_a_set must name {m // 4} distinct nests in [0, {m})")
        object.__setattr__(self, "type_a_set", a)

    @classmethod
    def random(cls, num_nests: int, epsilon: float, rng: np.random.Generator) -> "AdversarialSpec":
        chosen = rng.choice(num_nests, size=num_nests // 4, replace=False)
        return cls(num_nests, epsilon, frozenset(int(i) for i in chosen))

    def optimal_combination(self) -> tuple[tuple[int, ...], ...]:
        return tuple(TYPE_A_BEST if i in self.type_a_set else TYPE_B_BEST for i in range(self.num_nests))


def two_type_instance(num_nests: int, epsilon: float, type_a, rho: float = RHO) -> NestedLogitInstance:
    """Instance with the given type A nests; no constraint on how many."""
    m2 = float(num_nests) ** 2
    a_row = np.array([1.0 + epsilon, 1.0 - epsilon, 1.0]) / m2
    b_row = np.array([1.0 - epsilon, 1.0 + epsilon, 1.0]) / m2
    type_a = set(type_a)
    prefs = np.array([a_row if i in type_a else b_row for i in range(num_nests)])
    revenues = np.tile([1.0, 0.8, rho], (num_nests, 1))
    return NestedLogitInstance(revenues, prefs, np.full(num_nests, 0.5), c_v=2.0 / m2)


def build_adversarial_instance(spec: AdversarialSpec) -> NestedLogitInstance:
    return two_type_instance(spec.num_nests, spec.epsilon, spec.type_a_set, spec.rho)


def swap_nest(spec: AdversarialSpec, nest: int) -> NestedLogitInstance:
    """Instance whose type A set differs from ``spec``'s in exactly ``nest``."""
    flipped = set(spec.type_a_set) ^ {int(nest)}
    return two_type_instance(spec.num_nests, spec.epsilon, flipped, spec.rho)


def deviation_count(spec: AdversarialSpec, combination) -> int:
    best = spec.optimal_combination()
    return sum(tuple(sorted(s)) != b for s, b in zip(combination, best))


_SUBSETS = tuple(tuple(j for j in range(3) if (mask >> j) & 1) for mask in range(8))


@dataclass
class Deviation:
    nests: tuple[int, ...]
    subsets: tuple[tuple[int, ...], ...]
    gap: float
    ratio: float
    swap: bool


@dataclass
class GapReport:
    mode: str
    epsilon: float
    num_nests: int
    optimal_value: float
    best_other_value: float
    min_ratio: float
    min_swap_ratio: float
    min_other_gap: float
    deviations: list[Deviation]

    @property
    def passed(self) -> bool:
        return self.best_other_value < self.optimal_value and self.min_ratio > 0.0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "epsilon": self.epsilon,
            "num_nests": self.num_nests,
            "optimal_value": self.optimal_value,
            "best_other_value": self.best_other_value,
            "min_ratio": self.min_ratio,
            "min_swap_ratio": self.min_swap_ratio,
            "min_other_gap": self.min_other_gap,
            "deviations_checked": len(self.deviations),
            "passed": self.passed,
        }


def _is_swap(spec: AdversarialSpec, nest: int, subset) -> bool:
    other = TYPE_B_BEST if nest in spec.type_a_set else TYPE_A_BEST
    return tuple(subset) == other


def deviation_gap_check(spec: AdversarialSpec, instance: NestedLogitInstance | None = None,
                        mode: str = "auto", cap: int = EXHAUSTIVE_CAP) -> GapReport:
    """Revenue lost by moving away from the optimal combination.

    ``mode="exhaustive"`` scores all ``8^M`` combinations; ``"single"`` scores
    every one-nest deviation and, for ``M == 4``, every two-nest deviation.
    The ratio reported for a deviation is ``gap * M / (m * eps)`` with ``m``
    the number of nests that differ from the optimum.
    """
    inst = build_adversarial_instance(spec) if instance is None else instance
    m, eps = spec.num_nests, spec.epsilon
    best = spec.optimal_combination()
    r_star = expected_revenue(inst, best)
    if mode == "auto":
        mode = "exhaustive" if 8**m <= cap else "single"
    deviations: list[Deviation] = []
    best_other = -math.inf
    if mode == "exhaustive":
        if 8**m > cap:
            raise CapExceededError(f"8^{m} combinations exceed the cap of {cap}")
        terms = [subset_terms(inst, i) for i in range(m)]
        for masks in itertools.product(range(8), repeat=m):
            comb = tuple(_SUBSETS[k] for k in masks)
            if comb == best:
                continue
            num = sum(terms[i][0][k] for i, k in enumerate(masks))
            den = 1.0 + sum(terms[i][1][k] for i, k in enumerate(masks))
            value = num / den
            best_other = max(best_other, value)
            diff = [i for i in range(m) if comb[i] != best[i]]
            gap = r_star - value
            swap = all(_is_swap(spec, i, comb[i]) for i in diff)
            deviations.append(Deviation(tuple(diff), tuple(comb[i] for i in diff), gap,
                                        gap * m / (len(diff) * eps), swap))
    elif mode == "single":
        width = 2 if m == 4 else 1
        for count in range(1, width + 1):
            for nests in itertools.combinations(range(m), count):
                choices = [[s for s in _SUBSETS if s != best[i]] for i in nests]
                for subsets in itertools.product(*choices):
                    comb = list(best)
                    for i, s in zip(nests, subsets):
                        comb[i] = s
                    value = expected_revenue(inst, comb)
                    best_other = max(best_other, value)
                    gap = r_star - value
                    swap = all(_is_swap(spec, i, s) for i, s in zip(nests, subsets))
                    deviations.append(Deviation(nests, tuple(subsets), gap, gap * m / (count * eps), swap))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    swaps = [d.ratio for d in deviations if d.swap]
    others = [d.gap for d in deviations if not d.swap]
    return GapReport(
        mode=mode,
        epsilon=eps,
        num_nests=m,
        optimal_value=r_star,
        best_other_value=best_other,
        min_ratio=min(d.ratio for d in deviations),
        min_swap_ratio=min(swaps) if swaps else math.nan,
        min_other_gap=min(others) if others else math.nan,
        deviations=deviations,
    )


def outcome_distribution(instance: NestedLogitInstance, combination) -> np.ndarray:
    """Probabilities of no purchase (entry 0) and of each (nest, item) pair
    (entry ``1 + i * N + j``)."""
    comb = check_combination(instance, combination)
    m, n = instance.num_nests, instance.num_items
    probs = np.zeros(1 + m * n)
    weights = np.zeros(m)
    within = []
    for i, subset in enumerate(comb):
        idx = list(subset)
        w = instance.preferences[i, idx]
        total = w.sum()
        if total > 0:
            weights[i] = total ** instance.gammas[i]
        within.append((idx, w / total if total > 0 else w))
    den = 1.0 + weights.sum()
    probs[0] = 1.0 / den
    for i, (idx, cond) in enumerate(within):
        for j, p in zip(idx, cond):
            probs[1 + i * n + j] = weights[i] / den * p
    return probs


def kl_one_swap(spec: AdversarialSpec | None, instance_u: NestedLogitInstance,
                instance_w: NestedLogitInstance, combination) -> float:
    """Exact ``KL(P_U(.|S) || P_W(.|S))`` over purchase outcomes.

    The two instances must differ in at most one nest.  Returns ``inf`` when
    some outcome is possible under ``U`` but not under ``W``.
    """
    if instance_u.revenues.shape != instance_w.revenues.shape:
        raise ValueError("instances have different shapes")
    differing = np.flatnonzero(np.any(instance_u.preferences != instance_w.preferences, axis=1))
    if differing.size > 1:
        raise ValueError(f"instances differ in {differing.size} nests; expected at most one")
    if spec is not None and instance_u.num_nests != spec.num_nests:
        raise ValueError("spec and instances disagree on the number of nests")
    p = outcome_distribution(instance_u, combination)
    q = outcome_distribution(instance_w, combination)
    support = p > 0
    if np.any(q[support] == 0):
        return math.inf
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def random_combination(num_nests: int, rng: np.random.Generator) -> tuple[tuple[int, ...], ...]:
    return tuple(_SUBSETS[int(k)] for k in rng.integers(0, 8, size=num_nests))


def calibrate_kl_constant(nests=(4, 8, 16), epsilons=(0.1, 0.05, 0.01), random_offers: int = 40,
                          seed: int = 2024) -> float:
    """Largest ``KL * M / eps^2`` over a sweep of one-swap pairs and offers."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for m in nests:
        for eps in epsilons:
            spec = AdversarialSpec(m, eps)
            base = build_adversarial_instance(spec)
            for nest in (0, m - 1):
                other = swap_nest(spec, nest)
                offers = [random_combination(m, rng) for _ in range(random_offers)]
                offers += [tuple(TYPE_B_BEST for _ in range(m)), tuple(() for _ in range(m))]
                for offer in offers:
                    for s in _SUBSETS:
                        comb = list(offer)
                        comb[nest] = s
                        for a, b in ((base, other), (other, base)):
                            worst = max(worst, kl_one_swap(None, a, b, comb) * m / eps**2)
    return worst


def kl_report(spec: AdversarialSpec, random_offers: int = 20, seed: int = 0) -> dict:
    """KL over every one-swap neighbour of ``spec`` and some random offers."""
    rng = np.random.default_rng(seed)
    base = build_adversarial_instance(spec)
    offers = [random_combination(spec.num_nests, rng) for _ in range(random_offers)]
    worst = 0.0
    for nest in range(spec.num_nests):
        other = swap_nest(spec, nest)
        for offer in offers:
            worst = max(worst, kl_one_swap(spec, base, other, offer), kl_one_swap(spec, other, base, offer))
    bound = 2.0 * KL_CONSTANT * spec.epsilon**2 / spec.num_nests
    return {"kl_max": worst, "kl_scaled_max": worst * spec.num_nests / spec.epsilon**2,
            "kl_bound": bound, "kl_within_bound": worst <= bound}
