import pytest

from tests.conftest import tiny_config
from vlcsee.harness import run_sweep
from vlcsee.plots import PLOT_CONVERGENCE_COLUMNS, PLOT_SWEEP_COLUMNS, MissingInputError, emit_plot_data


@pytest.fixture(scope="module")
def results(tmp_path_factory):
    out = tmp_path_factory.mktemp("plots")
    cfg = tiny_config(**{"sweep.param": "power.p_max", "sweep.values": [10.0, 20.0],
                         "baselines.kinds": ["ds_ppo", "eps_greedy"]})
    run_sweep(cfg, out)
    return out


def test_golden_headers(results):
    emit_plot_data(results)
    conv = (results / "fig_convergence.csv").read_text().splitlines()[0]
    sweep = (results / "fig_power-p_max.csv").read_text().splitlines()[0]
    assert conv == "kind,seed,sweep,step,avg_reward,avg_reward_ma,see_ma"
    assert sweep == "sweep_value,kind,see_mean,see_std,reward_mean,reward_std"
    assert conv.split(",") == PLOT_CONVERGENCE_COLUMNS and sweep.split(",") == PLOT_SWEEP_COLUMNS


def test_regeneration_is_byte_identical(results):
    first = {p.name: p.read_bytes() for p in emit_plot_data(results)}
    second = {p.name: p.read_bytes() for p in emit_plot_data(results)}
    assert first == second
    assert set(first) == {"fig_convergence.csv", "fig_convergence.svg", "fig_power-p_max.csv",
                          "fig_power-p_max.svg"}


def test_axis_label_from_sweep(results):
    emit_plot_data(results)
    svg = (results / "fig_power-p_max.svg").read_text()
    assert "Power budget (W)" in svg


def test_single_point_sweep(tmp_path):
    cfg = tiny_config(**{"sweep.param": "power.qos", "sweep.values": [2.0], "baselines.kinds": ["eps_greedy"]})
    run_sweep(cfg, tmp_path)
    emit_plot_data(tmp_path)
    rows = (tmp_path / "fig_power-qos.csv").read_text().splitlines()
    assert len(rows) == 2
    svg = (tmp_path / "fig_power-qos.svg").read_text()
    # one data point is drawn as a marker
    assert "<use " in svg or "marker" in svg


def test_missing_input(tmp_path):
    with pytest.raises(MissingInputError):
        emit_plot_data(tmp_path)
