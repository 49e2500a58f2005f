import math

import numpy as np
import pytest

from tests.conftest import tiny_config
from vlcsee.harness import (CURVE_COLUMNS, SUMMARY_COLUMNS, RunRecord, curve_columns, moving_average, read_curve,
                            _cell, run_one, run_sweep, summarize, sweep_cells)


def test_moving_average():
    np.testing.assert_array_equal(moving_average(np.full(250, 0.37), 100), np.full(250, 0.37))
    np.testing.assert_allclose(moving_average([1.0, 2.0, 3.0, 4.0], 2), [1.0, 1.5, 2.5, 3.5], rtol=1e-15)
    np.testing.assert_array_equal(moving_average([5.0], 100), [5.0])
    with pytest.raises(ValueError):
        moving_average([1.0], 0)


def test_curve_columns_expand_per_lu():
    cols = curve_columns(3)
    assert cols[:6] == ["step", "avg_reward", "avg_reward_ma", "see", "see_ma", "best_reward"]
    assert [c for c in cols if c.startswith("rate_lu")] == ["rate_lu1", "rate_lu2", "rate_lu3"]
    assert len(cols) == len(CURVE_COLUMNS) - 2 + 6


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    cfg = tiny_config(**{"sweep.param": "irs.n_elements", "sweep.values": [4, 8, 16],
                         "experiment.seeds": [0, 1], "baselines.kinds": ["ds_ppo", "eps_greedy"],
                         "experiment.workers": 2})
    return out, run_sweep(cfg, out)


def test_sweep_counts(sweep_dir):
    out, records = sweep_dir
    assert len(records) == 12
    assert all(r.status == "ok" for r in records)
    assert len(list(out.glob("curve_*.csv"))) == 12
    assert [p.name for p in out.glob("summary_*.csv")] == ["summary_irs-n_elements.csv"]
    lines = (out / "summary_irs-n_elements.csv").read_text().splitlines()
    assert lines[0].split(",") == SUMMARY_COLUMNS
    assert len(lines) == 1 + 3 * 2


def test_curve_file_contents(sweep_dir):
    out, records = sweep_dir
    rec = next(r for r in records if r.kind == "ds_ppo" and r.sweep_value == 8 and r.seed == 1)
    meta, rows = read_curve(rec.curve_path)
    assert meta["kind"] == "ds_ppo" and meta["seed"] == "1" and meta["config_hash"] == rec.config_hash
    assert [r["step"] for r in rows] == [32, 64, 96]
    assert rows[-1]["avg_reward_ma"] == pytest.approx((rows[-1]["avg_reward"] + rows[-2]["avg_reward"]) / 2)
    assert rec.final_avg_reward == pytest.approx(rows[-1]["avg_reward_ma"])


def test_cells_are_deterministic(sweep_dir, tmp_path):
    out, records = sweep_dir
    rec = next(r for r in records if r.kind == "ds_ppo" and r.sweep_value == 4 and r.seed == 0)
    cfg = tiny_config(**{"sweep.param": "irs.n_elements", "sweep.values": [4, 8, 16],
                         "experiment.seeds": [0, 1], "baselines.kinds": ["ds_ppo", "eps_greedy"]})
    cell = next(c for c in sweep_cells(cfg, tmp_path) if c[1] == "ds_ppo" and c[2] == 0 and c[5] == 4)
    again = _cell(cell)
    assert again.config_hash == rec.config_hash
    assert open(again.curve_path, "rb").read() == open(rec.curve_path, "rb").read()
    assert again.final_see == rec.final_see and again.rates == rec.rates


def test_summary_of_duplicates_equals_single():
    rec = RunRecord("h", 0, "ds_ppo", "power.p_max", 10.0, final_see=0.31, final_avg_reward=0.2, best_reward=1.0,
                    rates=[2.5, 3.0])
    single = summarize([rec])[0]
    double = summarize([rec, RunRecord(**{**rec.__dict__})])[0]
    assert double["see_mean"] == single["see_mean"] == 0.31
    assert double["see_std"] == 0.0 and double["n_ok"] == 2
    assert double["rate_lu_min_mean"] == 2.5


def test_failed_run_recorded_not_raised(tmp_path):
    cfg = tiny_config(**{"trainer.total_steps": 10})  # shorter than one update
    rec = run_one(cfg, "ds_ppo", 0, tmp_path)
    assert rec.status == "failed" and "no log rows" in rec.error
    assert list(tmp_path.glob("*.error.txt"))
    row = summarize([rec])[0]
    assert row["n_failed"] == 1 and math.isnan(row["see_mean"])


def test_sweep_survives_failures(tmp_path):
    cfg = tiny_config(**{"sweep.param": "power.p_max", "sweep.values": [20.0],
                         "baselines.kinds": ["ds_ppo", "eps_greedy"], "trainer.total_steps": 40})
    # ds_ppo needs 32 buffered steps before its first update, so both cells log once
    recs = run_sweep(cfg, tmp_path)
    assert len(recs) == 2
    cfg.set("trainer.total_steps", 20)
    recs = run_sweep(cfg, tmp_path / "b")
    assert [r.status for r in recs] == ["failed", "ok"]
    assert (tmp_path / "b" / "summary_power-p_max.csv").exists()
