"""Plot-ready CSV and SVG figures from a results directory.

Outputs written next to the inputs:

``fig_convergence.csv``  columns ``PLOT_CONVERGENCE_COLUMNS``, one row per
    logged update of every curve file; ``fig_convergence.svg`` plots the
    smoothed average reward per (kind, seed).
``fig_<param>.csv``      columns ``PLOT_SWEEP_COLUMNS`` for each summary
    that has a sweep axis; ``fig_<param>.svg`` plots mean SEE against the
    swept value, one line per kind.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import read_curve  # noqa: E402

PLOT_CONVERGENCE_COLUMNS = ["kind", "seed", "sweep", "step", "avg_reward", "avg_reward_ma", "see_ma"]
PLOT_SWEEP_COLUMNS = ["sweep_value", "kind", "see_mean", "see_std", "reward_mean", "reward_std"]

AXIS_LABELS = {
    "irs-n_elements": "Number of IRS elements",
    "scene-n_lus": "Number of LUs",
    "power-p_max": "Power budget (W)",
    "power-qos": "QoS threshold (bit/s/Hz)",
    "trainer-lr": "Initial learning rate",
}


class MissingInputError(FileNotFoundError):
    pass


def _svg(fig, path):
    with plt.rc_context({"svg.hashsalt": "vlcsee", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue())


def _num(s):
    try:
        return float(s)
    except ValueError:
        return s


def emit_plot_data(directory) -> list[Path]:
    directory = Path(directory)
    curves = sorted(directory.glob("curve_*.csv"))
    summaries = sorted(directory.glob("summary_*.csv"))
    if not curves and not summaries:
        raise MissingInputError(f"no curve_*.csv or summary_*.csv files in {directory}")
    written = []

    if curves:
        rows = []
        fig, ax = plt.subplots(figsize=(6, 4))
        for path in curves:
            meta, data = read_curve(path)
            for r in data:
                rows.append([meta["kind"], meta["seed"], meta.get("sweep", "-"), int(r["step"]),
                             repr(r["avg_reward"]), repr(r["avg_reward_ma"]), repr(r["see_ma"])])
            ax.plot([r["step"] for r in data], [r["avg_reward_ma"] for r in data],
                    marker="o" if len(data) == 1 else None, label=path.stem.removeprefix("curve_"))
        ax.set_xlabel("Training step")
        ax.set_ylabel("Average reward (moving average)")
        ax.legend(fontsize=6)
        _write_csv(directory / "fig_convergence.csv", PLOT_CONVERGENCE_COLUMNS, rows)
        _svg(fig, directory / "fig_convergence.svg")
        written += [directory / "fig_convergence.csv", directory / "fig_convergence.svg"]

    for path in summaries:
        param = path.stem.removeprefix("summary_")
        if param == "none":
            continue
        with open(path, newline="") as fh:
            data = list(csv.DictReader(fh))
        by_kind: dict = {}
        for r in data:
            by_kind.setdefault(r["kind"], []).append(r)
        rows = [[r["sweep_value"], r["kind"], r["see_mean"], r["see_std"], r["reward_mean"], r["reward_std"]]
                for r in data]
        fig, ax = plt.subplots(figsize=(6, 4))
        for kind, rs in by_kind.items():
            rs = sorted(rs, key=lambda r: _num(r["sweep_value"]))
            xs = [_num(r["sweep_value"]) for r in rs]
            ys = [float(r["see_mean"]) for r in rs]
            errs = [float(r["see_std"]) for r in rs]
            ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=3, label=kind)
        ax.set_xlabel(AXIS_LABELS.get(param, param))
        ax.set_ylabel("SEE (bit/s/Hz/W)")
        ax.legend()
        _write_csv(directory / f"fig_{param}.csv", PLOT_SWEEP_COLUMNS, rows)
        _svg(fig, directory / f"fig_{param}.svg")
        written += [directory / f"fig_{param}.csv", directory / f"fig_{param}.svg"]
    return written
