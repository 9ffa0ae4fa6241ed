"""Two-level nested logit choice model: representation, choice sampling and
exact expected revenue."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._validation import check_combination, check_nest_index, check_subset

# Weight of the outside (no-purchase) option. Fixed at one throughout.
NO_PURCHASE_WEIGHT = 1.0

Combination = tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class NestedLogitInstance:
    """Ground-truth nested logit parameters.

    ``revenues`` and ``preferences`` are ``(M, N)`` arrays; ``gammas`` has
    length ``M``.  Items with zero preference are padding (used when nests
    have uneven sizes) and are exempt from the positivity requirement.
    """

    revenues: np.ndarray
    preferences: np.ndarray
    gammas: np.ndarray
    c_v: float = 1.0
    padded: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        r = np.array(self.revenues, dtype=float, copy=True)
        v = np.array(self.preferences, dtype=float, copy=True)
        g = np.array(self.gammas, dtype=float, copy=True).reshape(-1)
        if r.ndim != 2 or r.shape != v.shape:
            raise ValueError(
                f"revenues and preferences must be matching 2-d arrays, got {r.shape} and {v.shape}"
            )
        if g.shape != (r.shape[0],):
            raise ValueError(f"gammas must have length {r.shape[0]}, got {g.shape}")
        if r.size == 0:
            raise ValueError("instance needs at least one nest and one item")
        pad = v == 0.0 if self.padded is None else np.array(self.padded, dtype=bool)
        if pad.shape != r.shape:
            raise ValueError("padded mask must have the same shape as revenues")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(v)) or not np.all(np.isfinite(g)):
            raise ValueError("parameters must be finite")
        if np.any(r < 0.0) or np.any(r > 1.0):
            raise ValueError("revenues must lie in [0, 1]")
        if not self.c_v > 0.0:
            raise ValueError(f"c_v must be positive, got {self.c_v}")
        real = ~pad
        if np.any(v[real] <= 0.0) or np.any(v > self.c_v):
            raise ValueError("preferences of real items must lie in (0, c_v]")
        if np.any(v[pad] != 0.0):
            raise ValueError("padded items must have zero preference")
        if np.any(g < 0.0) or np.any(g > 1.0):
            raise ValueError("gammas must lie in [0, 1]")
        for name, arr in (("revenues", r), ("preferences", v), ("gammas", g), ("padded", pad)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "c_v", float(self.c_v))

    @property
    def num_nests(self) -> int:
        return self.revenues.shape[0]

    @property
    def num_items(self) -> int:
        return self.revenues.shape[1]

    @classmethod
    def from_nests(cls, revenues: Sequence[Sequence[float]], preferences: Sequence[Sequence[float]],
                   gammas: Sequence[float], c_v: float = 1.0) -> "NestedLogitInstance":
        """Build an instance from ragged per-nest lists, padding short nests
        with zero-revenue, zero-preference items."""
        if len(revenues) != len(preferences):
            raise ValueError("revenues and preferences must list the same nests")
        n = max(len(row) for row in revenues)
        m = len(revenues)
        r = np.zeros((m, n))
        v = np.zeros((m, n))
        pad = np.ones((m, n), dtype=bool)
        for i, (ri, vi) in enumerate(zip(revenues, preferences)):
            if len(ri) != len(vi):
                raise ValueError(f"nest {i}: revenues and preferences differ in length")
            r[i, : len(ri)] = ri
            v[i, : len(vi)] = vi
            pad[i, : len(ri)] = False
        return cls(r, v, gammas, c_v, pad)

    def to_dict(self) -> dict:
        out = {
            "num_nests": self.num_nests,
            "num_items": self.num_items,
            "revenues": self.revenues.tolist(),
            "preferences": self.preferences.tolist(),
            "gammas": self.gammas.tolist(),
            "c_v": self.c_v,
        }
        if self.padded.any():
            out["padded"] = self.padded.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NestedLogitInstance":
        missing = {"num_nests", "num_items", "revenues", "preferences", "gammas", "c_v"} - set(data)
        if missing:
            raise ValueError(f"instance document is missing keys: {sorted(missing)}")
        inst = cls(data["revenues"], data["preferences"], data["gammas"], data["c_v"], data.get("padded"))
        if inst.num_nests != data["num_nests"] or inst.num_items != data["num_items"]:
            raise ValueError(
                f"declared shape ({data['num_nests']}, {data['num_items']}) does not match "
                f"parameter arrays {inst.revenues.shape}"
            )
        return inst

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "NestedLogitInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ChoiceOutcome:
    """Result of one customer arrival.  ``nest == 0`` means no purchase;
    purchased nests are numbered from 1 and items from 0."""

    nest: int
    item: int | None
    revenue: float


def empty_combination(instance: NestedLogitInstance) -> Combination:
    return tuple(() for _ in range(instance.num_nests))


def nest_utility(instance: NestedLogitInstance, nest_index: int, subset) -> float:
    """Total preference weight of ``subset`` within a nest (0 for the empty set)."""
    check_nest_index(instance, nest_index)
    idx = check_subset(instance, subset)
    if not idx:
        return 0.0
    return float(instance.preferences[nest_index, list(idx)].sum())


def nest_revenue(instance: NestedLogitInstance, nest_index: int, subset) -> float:
    """Preference-weighted mean revenue of ``subset``.

    Empty or zero-weight subsets return 0, so the nest contributes nothing
    to the expected revenue.
    """
    check_nest_index(instance, nest_index)
    idx = list(check_subset(instance, subset))
    if not idx:
        return 0.0
    w = instance.preferences[nest_index, idx]
    total = w.sum()
    if total <= 0.0:
        return 0.0
    return float(np.dot(instance.revenues[nest_index, idx], w) / total)


def _nest_terms(instance: NestedLogitInstance, combination: Combination):
    """Per-nest (V_i^gamma_i, R_i) for a validated combination."""
    m = instance.num_nests
    weight = np.zeros(m)
    mean_rev = np.zeros(m)
    for i, subset in enumerate(combination):
        if not subset:
            continue
        idx = list(subset)
        w = instance.preferences[i, idx]
        total = w.sum()
        if total <= 0.0:
            continue
        weight[i] = total ** instance.gammas[i]
        mean_rev[i] = np.dot(instance.revenues[i, idx], w) / total
    return weight, mean_rev


def choice_probabilities(instance: NestedLogitInstance, combination) -> np.ndarray:
    """Length ``M + 1`` vector: no-purchase probability followed by the
    probability of buying from each nest."""
    comb = check_combination(instance, combination)
    weight, _ = _nest_terms(instance, comb)
    denom = NO_PURCHASE_WEIGHT + weight.sum()
    return np.concatenate(([NO_PURCHASE_WEIGHT], weight)) / denom


def expected_revenue(instance: NestedLogitInstance, combination) -> float:
    comb = check_combination(instance, combination)
    weight, mean_rev = _nest_terms(instance, comb)
    num = float(np.dot(mean_rev, weight))
    den = NO_PURCHASE_WEIGHT + float(weight.sum())
    return num / den


def mnl_revenue(revenues, preferences) -> float:
    """Plain MNL expected revenue of offering every listed item together."""
    r = np.asarray(revenues, dtype=float)
    v = np.asarray(preferences, dtype=float)
    return float(np.dot(r, v) / (NO_PURCHASE_WEIGHT + v.sum()))


def sample_choice(instance: NestedLogitInstance, combination, rng: np.random.Generator) -> ChoiceOutcome:
    """Draw one customer decision: first a nest (or no purchase), then an
    item within the chosen nest."""
    comb = check_combination(instance, combination)
    probs = choice_probabilities(instance, comb)
    nest = int(rng.choice(probs.size, p=probs))
    if nest == 0:
        return ChoiceOutcome(0, None, 0.0)
    members = list(comb[nest - 1])
    w = instance.preferences[nest - 1, members]
    item = members[int(rng.choice(len(members), p=w / w.sum()))]
    return ChoiceOutcome(nest, item, float(instance.revenues[nest - 1, item]))


def per_period_regret(instance: NestedLogitInstance, combination, optimal_value: float) -> float:
    """Expected revenue shortfall of one period; float noise below zero is clamped."""
    return max(0.0, optimal_value - expected_revenue(instance, combination))
