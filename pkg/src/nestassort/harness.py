"""Seeded regret experiments over grids of (M, N, T, delta)."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .level_sets import build_catalog
from .model import NestedLogitInstance
from .optimize import FULL_SPACE_CAP, brute_force_full_space
from .policy import PolicyConfig, RegretTrace, checkpoint_grid, optimal_revenue, run_policy

log = logging.getLogger(__name__)

WORKERS_ENV = "NESTASSORT_WORKERS"
TRACE_HEADER = ["cell_m", "cell_n", "horizon", "delta", "trial", "seed", "checkpoint_t", "cum_regret"]
SUMMARY_HEADER = ["cell_m", "cell_n", "horizon", "delta", "trials", "median_final_regret", "max_final_regret"]


@dataclass
class ExperimentConfig:
    """Experiment grid and instance-generation ranges.

    Preference draws are uniform on ``[preference_low, preference_high] /
    (N (M - 1))``.  Stored as JSON with these field names.
    """

    grid: list[tuple[int, int]] = field(default_factory=lambda: [(5, 100)])
    horizons: list[int] = field(default_factory=lambda: [10_000])
    deltas: list[float] = field(default_factory=lambda: [0.0])
    trials: int = 100
    master_seed: int = 0
    revenue_low: float = 0.2
    revenue_high: float = 0.8
    preference_low: float = 10.0
    preference_high: float = 20.0
    gamma_low: float = 0.5
    gamma_high: float = 1.0
    u_upper: float | None = None
    epsilon_bs: float = 1e-9
    checkpoints: str | list[int] = "geometric"
    output: str | None = None
    redraw_instance_per_trial: bool = False

    def __post_init__(self):
        self.grid = [tuple(int(x) for x in cell) for cell in self.grid]
        self.horizons = [int(t) for t in self.horizons]
        self.deltas = [float(d) for d in self.deltas]
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(t < 1 for t in self.horizons):
            raise ValueError("horizons must be positive")
        if any(not 0.0 <= d < 1.0 for d in self.deltas):
            raise ValueError("deltas must lie in [0, 1)")
        if len(set(self.deltas)) != len(self.deltas):
            raise ValueError("deltas must be distinct")
        for lo, hi, name in ((self.revenue_low, self.revenue_high, "revenue"),
                             (self.preference_low, self.preference_high, "preference"),
                             (self.gamma_low, self.gamma_high, "gamma")):
            if not lo <= hi:
                raise ValueError(f"{name} range is not ordered: [{lo}, {hi}]")
        if not (0.0 <= self.revenue_low and self.revenue_high <= 1.0):
            raise ValueError("revenue range must sit inside [0, 1]")
        if not (0.0 <= self.gamma_low and self.gamma_high <= 1.0):
            raise ValueError("gamma range must sit inside [0, 1]")
        if self.preference_low <= 0.0:
            raise ValueError("preference range must be positive")
        if self.checkpoints != "geometric" and not isinstance(self.checkpoints, list):
            raise ValueError("checkpoints must be 'geometric' or a list of periods")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["grid"] = [list(c) for c in self.grid]
        return out

    def cells(self) -> list["Cell"]:
        return [Cell(m, n, t, d) for (m, n) in self.grid for t in self.horizons for d in self.deltas]


class Cell(NamedTuple):
    m: int
    n: int
    horizon: int
    delta: float


def derive_seed(*parts: int) -> int:
    """64-bit seed from integer parts: the first 8 bytes of BLAKE2b over
    their decimal strings joined by ``|``."""
    text = "|".join(str(int(p)) for p in parts)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


INSTANCE_TAG = 1
TRIAL_TAG = 2


def instance_seed(config: ExperimentConfig, m: int, n: int, trial: int) -> int:
    key = trial if config.redraw_instance_per_trial else -1
    return derive_seed(INSTANCE_TAG, config.master_seed, m, n, key)


def trial_seed(config: ExperimentConfig, cell: Cell, trial: int) -> int:
    return derive_seed(TRIAL_TAG, config.master_seed, cell.m, cell.n, cell.horizon,
                       config.deltas.index(cell.delta), trial)


def generate_instance(config: ExperimentConfig, cell, rng: np.random.Generator) -> NestedLogitInstance:
    """Random instance: revenues, preferences and gammas drawn i.i.d. uniform.
    The declared preference bound is the top of the preference range."""
    m, n = int(cell[0]), int(cell[1])
    if m < 2:
        raise ValueError("instance generation divides by M - 1 and needs at least two nests")
    scale = n * (m - 1)
    r = rng.uniform(config.revenue_low, config.revenue_high, size=(m, n))
    v = rng.uniform(config.preference_low / scale, config.preference_high / scale, size=(m, n))
    g = rng.uniform(config.gamma_low, config.gamma_high, size=m)
    return NestedLogitInstance(r, v, g, c_v=config.preference_high / scale)


def cell_instance(config: ExperimentConfig, m: int, n: int, trial: int) -> NestedLogitInstance:
    return generate_instance(config, (m, n), make_rng(instance_seed(config, m, n, trial)))


def reference_optimum(instance: NestedLogitInstance, epsilon_bs: float = 1e-9) -> float:
    """Optimal expected revenue; cross-checked by full enumeration when small."""
    value = optimal_revenue(instance, epsilon_bs)
    if (2**instance.num_items) ** instance.num_nests <= FULL_SPACE_CAP:
        exact = brute_force_full_space(instance)[1]
        if abs(exact - value) > 1e-6:
            raise RuntimeError(f"bisection optimum {value} disagrees with enumeration {exact}")
    return value


def run_trial(config: ExperimentConfig, cell: Cell, trial: int,
              instance: NestedLogitInstance | None = None, optimal_value: float | None = None) -> RegretTrace:
    if instance is None:
        instance = cell_instance(config, cell.m, cell.n, trial)
    if optimal_value is None:
        optimal_value = reference_optimum(instance, config.epsilon_bs)
    u_upper = config.u_upper if config.u_upper is not None else instance.num_items * instance.c_v
    policy = PolicyConfig(u_upper=u_upper, horizon=cell.horizon, delta=cell.delta, epsilon_bs=config.epsilon_bs)
    points = checkpoint_grid(cell.horizon) if config.checkpoints == "geometric" else \
        sorted({int(t) for t in config.checkpoints if 1 <= int(t) <= cell.horizon} | {cell.horizon})
    seed = trial_seed(config, cell, trial)
    try:
        trace = run_policy(instance, policy, make_rng(seed), catalog=build_catalog(instance, cell.delta),
                           optimal_value=optimal_value, checkpoints=points)
    except Exception as exc:
        raise RuntimeError(f"trial {trial} of cell {tuple(cell)} failed: {exc}") from exc
    trace.seed = seed
    trace.trial_id = trial
    return trace


def _trial_job(args):
    return run_trial(*args)


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_cell(config: ExperimentConfig, cell, workers: int | None = None) -> list[RegretTrace]:
    """All trials of one cell, ordered by trial id regardless of scheduling."""
    cell = Cell(*cell)
    jobs = []
    shared = None
    if not config.redraw_instance_per_trial:
        inst = cell_instance(config, cell.m, cell.n, 0)
        shared = (inst, reference_optimum(inst, config.epsilon_bs))
    for trial in range(config.trials):
        if shared is None:
            jobs.append((config, cell, trial))
        else:
            jobs.append((config, cell, trial, *shared))
    n_workers = min(worker_count(workers), len(jobs))
    if n_workers <= 1:
        traces = [_trial_job(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            traces = list(pool.map(_trial_job, jobs))
    return sorted(traces, key=lambda tr: tr.trial_id)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> tuple[list[RegretTrace], list[dict]]:
    traces = []
    for cell in config.cells():
        log.info("running cell M=%d N=%d T=%d delta=%g", *cell)
        traces.extend(run_cell(config, cell, workers))
    return traces, summarize(traces)


def _cell_key(tr: RegretTrace):
    return (tr.num_nests, tr.num_items, tr.horizon, tr.delta)


def summarize(traces: list[RegretTrace]) -> list[dict]:
    """Median and maximum final regret per cell, in cell order."""
    groups: dict[tuple, list[float]] = {}
    for tr in traces:
        groups.setdefault(_cell_key(tr), []).append(tr.final_regret)
    rows = []
    for key in sorted(groups):
        finals = groups[key]
        rows.append({
            "cell_m": key[0], "cell_n": key[1], "horizon": key[2], "delta": key[3],
            "trials": len(finals),
            "median_final_regret": statistics.median(finals),
            "max_final_regret": max(finals),
        })
    return rows


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def emit_csv(traces: list[RegretTrace], summaries: list[dict], path) -> tuple[Path, Path]:
    """Write ``traces.csv`` and ``summary.csv`` into directory ``path``."""
    out = Path(path)
    trace_path, summary_path = out / "traces.csv", out / "summary.csv"
    try:
        out.mkdir(parents=True, exist_ok=True)
        ordered = sorted(traces, key=lambda tr: (_cell_key(tr), tr.trial_id if tr.trial_id is not None else -1))
        with open(trace_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for tr in ordered:
                for t, value in tr.checkpoints:
                    writer.writerow([tr.num_nests, tr.num_items, tr.horizon, _fmt(tr.delta),
                                     tr.trial_id, tr.seed, t, _fmt(value)])
        with open(summary_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SUMMARY_HEADER)
            for row in sorted(summaries, key=lambda r: (r["cell_m"], r["cell_n"], r["horizon"], r["delta"])):
                writer.writerow([row["cell_m"], row["cell_n"], row["horizon"], _fmt(row["delta"]), row["trials"],
                                 _fmt(row["median_final_regret"]), _fmt(row["max_final_regret"])])
    except OSError as exc:
        raise OSError(f"could not write results under {out}: {exc}") from exc
    return trace_path, summary_path


def format_table(summary_path) -> str:
    """Aligned plain-text rendering of a ``summary.csv`` file."""
    with open(summary_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return ""
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)
