"""Epoch-based UCB policy over nest-level singletons.

Each epoch offers one level set per nest and keeps offering it until a
customer walks away.  Purchase counts and revenue totals per nest are
pooled across every epoch that offered the same singleton in that nest,
whatever the other nests showed, and optimistic bands on those pooled
estimates drive the next choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_probability
from .level_sets import SingletonCatalog, build_catalog, true_value_table
from .model import NestedLogitInstance, sample_choice
from .optimize import DEFAULT_EPSILON_BS, SingletonValueTable, binary_search_optimum

# Band constants of the concentration bound on pooled epoch counts.
ACTIVATION_FACTOR = 96.0
SPREAD_FACTOR = 96.0
OFFSET_FACTOR = 144.0


@dataclass(frozen=True)
class PolicyConfig:
    u_upper: float
    horizon: int
    delta: float = 0.0
    epsilon_bs: float = DEFAULT_EPSILON_BS
    k_value: int | None = None

    def __post_init__(self):
        if not self.u_upper > 0:
            raise ValueError(f"u_upper must be positive, got {self.u_upper}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")
        check_probability("delta", self.delta, upper_open=True)
        if not self.epsilon_bs > 0:
            raise ValueError(f"epsilon_bs must be positive, got {self.epsilon_bs}")
        if self.k_value is not None and self.k_value < 1:
            raise ValueError(f"k_value must be positive, got {self.k_value}")

    def log_term(self, num_nests: int, k_value: int) -> float:
        """``ln(2 M T K)`` with ``K`` from the config when set."""
        k = self.k_value if self.k_value is not None else k_value
        return math.log(2.0 * num_nests * self.horizon * k)


def default_config(instance: NestedLogitInstance, horizon: int, **kwargs) -> PolicyConfig:
    """Config with ``U = N * C_V``, the largest attraction any level set can have."""
    kwargs.setdefault("u_upper", instance.num_items * instance.c_v)
    return PolicyConfig(horizon=horizon, **kwargs)


@dataclass
class PolicyState:
    """Mutable learner state; arrays are ``(M, K)`` over catalog positions."""

    epoch_count: np.ndarray
    purchase_sum: np.ndarray
    revenue_sum: np.ndarray
    u_hat: np.ndarray
    phi_hat: np.ndarray
    u_bar: np.ndarray
    phi_bar: np.ndarray
    sizes: np.ndarray
    log_term: float
    u_upper: float
    epoch: int = 0
    period: int = 0
    theta: np.ndarray | None = None
    _table: SingletonValueTable | None = field(default=None, repr=False)

    @property
    def activation_threshold(self) -> float:
        return ACTIVATION_FACTOR * self.log_term

    @property
    def empty_mask(self) -> np.ndarray:
        """Empty singletons and row padding; never updated."""
        k = self.u_bar.shape[1]
        return np.arange(k)[None, :] >= (self.sizes - 1)[:, None]

    def band_table(self) -> SingletonValueTable:
        if self._table is None:
            self._table = SingletonValueTable(self.phi_bar, self.u_bar, self.sizes)
        return self._table


def initial_state(catalog: SingletonCatalog, config: PolicyConfig) -> PolicyState:
    m, k = catalog.num_nests, catalog.k_max
    sizes = catalog.sizes
    live = np.arange(k)[None, :] < (sizes - 1)[:, None]
    u0 = np.where(live, float(config.u_upper), 0.0)
    phi0 = np.where(live, 1.0, 0.0)
    return PolicyState(
        epoch_count=np.zeros((m, k), dtype=np.int64),
        purchase_sum=np.zeros((m, k), dtype=np.int64),
        revenue_sum=np.zeros((m, k)),
        u_hat=u0.copy(),
        phi_hat=phi0.copy(),
        u_bar=u0.copy(),
        phi_bar=phi0.copy(),
        sizes=sizes,
        log_term=config.log_term(m, catalog.k_max),
        u_upper=float(config.u_upper),
    )


@dataclass(frozen=True)
class EpochRecord:
    """Observations from one epoch.  ``truncated`` marks an epoch cut short by
    the horizon, in which case no no-purchase closed it."""

    theta: np.ndarray
    n_hat: np.ndarray
    r_hat: np.ndarray
    length: int
    truncated: bool = False


class ChoiceSimulator:
    """Samples whole epochs for singleton position vectors of one instance.

    Within an epoch the offer is fixed, so the epoch length is geometric with
    success probability ``1 / (1 + sum u)``, purchases split multinomially
    across nests in proportion to ``u``, and items within a nest in proportion
    to their preference weights.  This has the same law as drawing customers
    one at a time until a no-purchase.
    """

    def __init__(self, instance: NestedLogitInstance, catalog: SingletonCatalog):
        self.instance = instance
        self.catalog = catalog
        self.table = true_value_table(instance, catalog)
        self._items = []
        for i, singles in enumerate(catalog.per_nest):
            rows = []
            for s in singles:
                idx = np.array(s.members, dtype=int)
                w = instance.preferences[i, idx]
                total = w.sum()
                probs = w / total if total > 0 else w
                rows.append((idx, probs, instance.revenues[i, idx]))
            self._items.append(rows)
        self._rows = np.arange(catalog.num_nests)

    def revenue(self, theta) -> float:
        return self.table.revenue(theta)

    def sample_epoch(self, theta, max_length: int, rng: np.random.Generator) -> EpochRecord:
        theta = np.asarray(theta, dtype=int)
        m = theta.size
        u = self.table.u[self._rows, theta]
        total = float(u.sum())
        n_hat = np.zeros(m, dtype=np.int64)
        r_hat = np.zeros(m)
        if total <= 0.0:
            return EpochRecord(theta, n_hat, r_hat, 1, False)
        length = int(rng.geometric(1.0 / (1.0 + total)))
        truncated = length > max_length
        if truncated:
            length = max_length
            purchases = max_length
        else:
            purchases = length - 1
        if purchases:
            n_hat = rng.multinomial(purchases, u / total).astype(np.int64)
            for i in np.flatnonzero(n_hat):
                _, probs, rev = self._items[i][theta[i]]
                if rev.size == 1:
                    r_hat[i] = n_hat[i] * rev[0]
                else:
                    r_hat[i] = float(rng.multinomial(n_hat[i], probs) @ rev)
        return EpochRecord(theta, n_hat, r_hat, length, truncated)

    def sample_epoch_by_period(self, theta, max_length: int, rng: np.random.Generator) -> EpochRecord:
        """Reference sampler: one customer at a time through the choice model."""
        theta = np.asarray(theta, dtype=int)
        comb = self.catalog.combination(theta)
        n_hat = np.zeros(theta.size, dtype=np.int64)
        r_hat = np.zeros(theta.size)
        length = 0
        while length < max_length:
            length += 1
            out = sample_choice(self.instance, comb, rng)
            if out.nest == 0:
                return EpochRecord(theta, n_hat, r_hat, length, False)
            n_hat[out.nest - 1] += 1
            r_hat[out.nest - 1] += out.revenue
        return EpochRecord(theta, n_hat, r_hat, length, True)


def select_epoch_assortment(state: PolicyState, config: PolicyConfig, catalog: SingletonCatalog | None = None) -> np.ndarray:
    """Positions maximizing the optimistic revenue of the current bands."""
    theta, _ = binary_search_optimum(state.band_table(), config.epsilon_bs)
    state.theta = theta
    return theta


def run_epoch(state: PolicyState, config: PolicyConfig, catalog: SingletonCatalog, instance,
              rng: np.random.Generator, *, per_period: bool = False) -> EpochRecord:
    """Offer ``state.theta`` until a no-purchase or the horizon ends.

    ``instance`` may be a :class:`NestedLogitInstance` or a prebuilt
    :class:`ChoiceSimulator` for the same catalog.
    """
    if state.period >= config.horizon:
        raise RuntimeError("horizon already exhausted")
    if state.theta is None:
        select_epoch_assortment(state, config, catalog)
    sim = instance if isinstance(instance, ChoiceSimulator) else ChoiceSimulator(instance, catalog)
    remaining = config.horizon - state.period
    sampler = sim.sample_epoch_by_period if per_period else sim.sample_epoch
    record = sampler(state.theta, remaining, rng)
    state.period += record.length
    return record


def upper_bands(u_hat: float, phi_hat: float, count: int, log_term: float, u_upper: float) -> tuple[float, float]:
    """Optimistic ``(u_bar, phi_bar)`` after ``count`` epochs; no activation check."""
    spread = math.sqrt(SPREAD_FACTOR * max(u_hat, u_hat * u_hat) * log_term / count)
    u_bar = min(u_upper, u_hat + spread + OFFSET_FACTOR * log_term / count)
    if u_hat > 0.0:
        phi_bar = min(1.0, phi_hat + math.sqrt(log_term / (count * u_hat)))
    else:
        phi_bar = 1.0
    return u_bar, float(phi_bar)


def update_estimates(state: PolicyState, config: PolicyConfig, record: EpochRecord) -> PolicyState:
    """Fold one epoch into the pooled estimates of the offered singletons
    and refresh their bands."""
    log_term = state.log_term
    active_at = state.activation_threshold
    u_upper = state.u_upper
    last = state.sizes - 1
    changed = False
    for i, k in enumerate(record.theta):
        k = int(k)
        if k >= last[i]:
            continue
        state.epoch_count[i, k] += 1
        state.purchase_sum[i, k] += int(record.n_hat[i])
        state.revenue_sum[i, k] += float(record.r_hat[i])
        n = int(state.epoch_count[i, k])
        purchases = int(state.purchase_sum[i, k])
        u_hat = purchases / n
        state.u_hat[i, k] = u_hat
        if purchases > 0:
            state.phi_hat[i, k] = state.revenue_sum[i, k] / purchases
        if n >= active_at:
            u_bar, phi_bar = upper_bands(u_hat, state.phi_hat[i, k], n, log_term, u_upper)
        else:
            u_bar, phi_bar = u_upper, 1.0
        if u_bar != state.u_bar[i, k] or phi_bar != state.phi_bar[i, k]:
            state.u_bar[i, k] = u_bar
            state.phi_bar[i, k] = phi_bar
            changed = True
    if changed:
        state._table = None
    state.epoch += 1
    state.theta = None
    return state


def checkpoint_grid(horizon: int) -> list[int]:
    """Powers of two up to the horizon, plus the horizon itself."""
    points = []
    t = 1
    while t < horizon:
        points.append(t)
        t *= 2
    points.append(horizon)
    return points


@dataclass
class RegretTrace:
    """Cumulative expected regret at checkpoint periods for one trial."""

    checkpoints: list[tuple[int, float]]
    epochs_used: int
    num_nests: int
    num_items: int
    horizon: int
    delta: float
    seed: int | None = None
    trial_id: int | None = None

    @property
    def final_regret(self) -> float:
        return self.checkpoints[-1][1]


def optimal_revenue(instance: NestedLogitInstance, epsilon_bs: float = DEFAULT_EPSILON_BS) -> float:
    """Best expected revenue, searched over the undiscretized level sets
    (revenue-ordered sets contain an optimum)."""
    table = true_value_table(instance, build_catalog(instance, 0.0))
    return binary_search_optimum(table, epsilon_bs)[1]


def run_policy(instance: NestedLogitInstance, config: PolicyConfig, rng: np.random.Generator, *,
               catalog: SingletonCatalog | None = None, optimal_value: float | None = None,
               checkpoints: Sequence[int] | None = None,
               callback: Callable[[PolicyState, EpochRecord], None] | None = None,
               per_period: bool = False) -> RegretTrace:
    """Run the policy for ``config.horizon`` periods and record expected regret."""
    if catalog is None:
        catalog = build_catalog(instance, config.delta)
    if optimal_value is None:
        optimal_value = optimal_revenue(instance)
    points = sorted(set(checkpoints)) if checkpoints is not None else checkpoint_grid(config.horizon)
    if points and (points[0] < 1 or points[-1] > config.horizon):
        raise ValueError("checkpoints must lie in [1, horizon]")
    sim = ChoiceSimulator(instance, catalog)
    state = initial_state(catalog, config)
    cumulative = 0.0
    recorded: list[tuple[int, float]] = []
    next_point = 0
    while state.period < config.horizon:
        theta = select_epoch_assortment(state, config, catalog)
        gap = max(0.0, optimal_value - sim.revenue(theta))
        start = state.period
        record = run_epoch(state, config, catalog, sim, rng, per_period=per_period)
        end = state.period
        while next_point < len(points) and points[next_point] <= end:
            recorded.append((points[next_point], cumulative + (points[next_point] - start) * gap))
            next_point += 1
        cumulative += record.length * gap
        update_estimates(state, config, record)
        if callback is not None:
            callback(state, record)
    return RegretTrace(recorded, state.epoch, instance.num_nests, instance.num_items,
                       config.horizon, config.delta)


class NestedUCB(BaseEstimator):
    """Estimator-style wrapper around the policy for use one epoch at a time.

    Only revenues are needed to start (they are known to the seller); the
    learner sees purchase counts and revenue totals through ``partial_fit``.

    >>> policy = NestedUCB(u_upper=5.0, horizon=1000).start(revenues)   # doctest: +SKIP
    >>> theta = policy.select()                                         # doctest: +SKIP
    >>> policy.partial_fit(record)                                      # doctest: +SKIP
    """

    def __init__(self, u_upper=1.0, horizon=1, delta=0.0, epsilon_bs=DEFAULT_EPSILON_BS, k_value=None):
        self.u_upper = u_upper
        self.horizon = horizon
        self.delta = delta
        self.epsilon_bs = epsilon_bs
        self.k_value = k_value

    @property
    def config(self) -> PolicyConfig:
        return PolicyConfig(self.u_upper, self.horizon, self.delta, self.epsilon_bs, self.k_value)

    def start(self, revenues, padded=None):
        """Build the singleton catalog from item revenues and reset the state."""
        r = np.array(revenues, dtype=float, ndmin=2)
        pad = np.zeros(r.shape, dtype=bool) if padded is None else np.asarray(padded, dtype=bool)
        # preference values are placeholders; only revenues shape the catalog
        shell = NestedLogitInstance(r, np.where(pad, 0.0, 1.0), np.ones(r.shape[0]), 1.0, pad)
        self.catalog_ = build_catalog(shell, self.delta)
        self.state_ = initial_state(self.catalog_, self.config)
        return self

    def select(self) -> np.ndarray:
        check_is_fitted(self, "state_")
        return select_epoch_assortment(self.state_, self.config, self.catalog_)

    def assortment(self, theta=None):
        """Member sets for ``theta`` (the current selection by default)."""
        check_is_fitted(self, "state_")
        if theta is None:
            theta = self.state_.theta if self.state_.theta is not None else self.select()
        return self.catalog_.combination(theta)

    def partial_fit(self, record: EpochRecord):
        check_is_fitted(self, "state_")
        self.state_.period += record.length
        update_estimates(self.state_, self.config, record)
        return self

    def fit(self, instance: NestedLogitInstance, rng=None):
        """Simulate a full horizon against ``instance``; the trace is kept in ``trace_``."""
        rng = np.random.default_rng(rng)
        self.catalog_ = build_catalog(instance, self.delta)

        def keep(state, record):
            self.state_ = state

        self.trace_ = run_policy(instance, self.config, rng, catalog=self.catalog_, callback=keep)
        return self
