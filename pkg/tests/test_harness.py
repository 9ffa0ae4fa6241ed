import csv
import json

import numpy as np
import pytest

from nestassort.harness import (
    SUMMARY_HEADER,
    TRACE_HEADER,
    Cell,
    ExperimentConfig,
    cell_instance,
    derive_seed,
    emit_csv,
    format_table,
    generate_instance,
    make_rng,
    run_cell,
    run_experiment,
    summarize,
    worker_count,
)
from nestassort.policy import RegretTrace


def trace(final, trial=0, m=2, n=3, horizon=10, delta=0.0, points=None):
    points = points or [(horizon, final)]
    return RegretTrace(points, 1, m, n, horizon, delta, seed=99, trial_id=trial)


def small_config(**kw):
    base = dict(grid=[[3, 4]], horizons=[300], deltas=[0.0, 0.1], trials=3, master_seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.trials == 100
    assert (cfg.revenue_low, cfg.revenue_high) == (0.2, 0.8)
    assert (cfg.gamma_low, cfg.gamma_high) == (0.5, 1.0)
    assert (cfg.preference_low, cfg.preference_high) == (10.0, 20.0)
    assert cfg.redraw_instance_per_trial is False


@pytest.mark.parametrize("kwargs", [dict(trials=0), dict(deltas=[1.0]), dict(deltas=[-0.1]),
                                    dict(revenue_low=0.9), dict(gamma_low=0.5, gamma_high=0.2),
                                    dict(deltas=[0.1, 0.1]), dict(horizons=[0]), dict(checkpoints="linear")])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(**kwargs)


def test_config_json(tmp_path):
    cfg = small_config()
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path) == cfg
    path.write_text(json.dumps({"grid": [[2, 2]], "bogus": 1}))
    with pytest.raises(ValueError):
        ExperimentConfig.load(path)


def test_generated_ranges():
    cfg = ExperimentConfig()
    inst = generate_instance(cfg, (5, 100), make_rng(1))
    assert inst.preferences.min() >= 0.025 and inst.preferences.max() <= 0.05
    assert inst.revenues.min() >= 0.2 and inst.revenues.max() <= 0.8
    assert inst.gammas.min() >= 0.5 and inst.gammas.max() <= 1.0
    assert inst.c_v == pytest.approx(0.05)
    with pytest.raises(ValueError):
        generate_instance(cfg, (1, 10), make_rng(1))


def test_instance_determinism():
    cfg = small_config()
    a = cell_instance(cfg, 3, 4, 0)
    b = cell_instance(cfg, 3, 4, 0)
    np.testing.assert_array_equal(a.revenues, b.revenues)
    np.testing.assert_array_equal(a.preferences, b.preferences)
    # shared across trials by default, redrawn when asked
    np.testing.assert_array_equal(cell_instance(cfg, 3, 4, 7).revenues, a.revenues)
    redraw = small_config(redraw_instance_per_trial=True)
    assert not np.array_equal(cell_instance(redraw, 3, 4, 1).revenues, cell_instance(redraw, 3, 4, 0).revenues)


def test_seed_hash_is_stable():
    # blake2b(b"0|5|100|10000|0|0", digest_size=8), little-endian
    assert derive_seed(0, 5, 100, 10000, 0, 0) == 8779141457754169329
    assert derive_seed(1, 2) != derive_seed(2, 1)


def test_worker_count(monkeypatch):
    monkeypatch.setenv("NESTASSORT_WORKERS", "3")
    assert worker_count() == 3
    assert worker_count(1) == 1
    monkeypatch.setenv("NESTASSORT_WORKERS", "0")
    assert worker_count() == 1


def test_single_trial_reproducible():
    cfg = small_config(trials=1)
    a = run_cell(cfg, Cell(3, 4, 300, 0.0), workers=1)
    b = run_cell(cfg, Cell(3, 4, 300, 0.0), workers=1)
    assert len(a) == 1
    assert a[0].checkpoints == b[0].checkpoints and a[0].seed == b[0].seed


def test_serial_and_parallel_agree():
    cfg = small_config(trials=4, horizons=[2000])
    serial = run_cell(cfg, Cell(3, 4, 2000, 0.1), workers=1)
    parallel = run_cell(cfg, Cell(3, 4, 2000, 0.1), workers=2)
    assert [t.trial_id for t in parallel] == [0, 1, 2, 3]
    assert [t.checkpoints for t in serial] == [t.checkpoints for t in parallel]
    assert len({t.seed for t in serial}) == 4


def test_trial_errors_name_the_trial(monkeypatch):
    import nestassort.harness as harness

    def boom(*args, **kwargs):
        raise ArithmeticError("bad draw")

    monkeypatch.setattr(harness, "run_policy", boom)
    with pytest.raises(RuntimeError, match="trial 0 of cell"):
        run_cell(small_config(trials=1), Cell(3, 4, 300, 0.0), workers=1)


def test_trace_invariants():
    traces, _ = run_experiment(small_config(), workers=1)
    for tr in traces:
        ts = [t for t, _ in tr.checkpoints]
        vals = [v for _, v in tr.checkpoints]
        assert ts[-1] == tr.horizon
        assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_summarize():
    rows = summarize([trace(4.0)])
    assert rows[0]["median_final_regret"] == rows[0]["max_final_regret"] == 4.0
    rows = summarize([trace(1.0, 0), trace(3.0, 1), trace(2.0, 2)])
    assert rows[0]["median_final_regret"] == 2.0 and rows[0]["max_final_regret"] == 3.0
    assert rows[0]["trials"] == 3
    rows = summarize([trace(1.0, delta=0.1), trace(5.0, delta=0.0)])
    assert [r["delta"] for r in rows] == [0.0, 0.1]


def read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_emit_empty(tmp_path):
    traces_path, summary_path = emit_csv([], [], tmp_path / "out")
    assert read(traces_path) == [TRACE_HEADER]
    assert read(summary_path) == [SUMMARY_HEADER]


def test_emit_rows_and_format(tmp_path):
    tr = trace(2.0 / 3.0, points=[(1, 0.123456789), (10, 2.0 / 3.0)])
    traces_path, summary_path = emit_csv([tr], summarize([tr]), tmp_path)
    rows = read(traces_path)
    assert rows[0] == TRACE_HEADER
    assert rows[1:] == [["2", "3", "10", "0", "0", "99", "1", "0.123457"],
                        ["2", "3", "10", "0", "0", "99", "10", "0.666667"]]
    assert read(summary_path)[1] == ["2", "3", "10", "0", "1", "0.666667", "0.666667"]
    text = format_table(summary_path)
    assert text.splitlines()[0].split() == SUMMARY_HEADER


def test_emit_sorted(tmp_path):
    items = [trace(1.0, trial=1, delta=0.1), trace(1.0, trial=0, delta=0.1), trace(1.0, trial=0, m=1)]
    traces_path, _ = emit_csv(items, summarize(items), tmp_path)
    keys = [(r[0], r[3], r[4]) for r in read(traces_path)[1:]]
    assert keys == [("1", "0", "0"), ("2", "0.1", "0"), ("2", "0.1", "1")]


def test_emit_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_csv([], [], blocker / "sub")


def test_rerun_is_byte_identical(tmp_path):
    cfg = small_config()
    for name in ("a", "b"):
        traces, summaries = run_experiment(cfg, workers=1)
        emit_csv(traces, summaries, tmp_path / name)
    for f in ("traces.csv", "summary.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_instance_shared_across_deltas():
    cfg = small_config(trials=2)
    traces, _ = run_experiment(cfg, workers=1)
    zero = [t for t in traces if t.delta == 0.0]
    tenth = [t for t in traces if t.delta == 0.1]
    assert len(zero) == len(tenth) == 2
    assert {t.seed for t in zero}.isdisjoint({t.seed for t in tenth})
