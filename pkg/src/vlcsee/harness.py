"""Run single trainings and parameter sweeps; persist curves and summaries as CSV.

Curve CSV (one per run): a ``# kind=... seed=... config_hash=... sweep=...``
header line, then the columns of ``CURVE_COLUMNS`` (per-LU columns expand
to one column per LU).  Summary CSV (one per sweep): ``SUMMARY_COLUMNS``.
"""
from __future__ import annotations

import csv
import io
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import run_eps_greedy, run_mrt_only, run_ppo_baseline
from .config import ExperimentConfig
from .env import VlcEnv
from .ppo import TrainingLog, train

CURVE_COLUMNS = ["step", "avg_reward", "avg_reward_ma", "see", "see_ma", "best_reward", "rate_lu*", "eve_common",
                 "eve_private*", "p_total", "actor_loss", "critic_loss", "lr", "policy_std", "viol_power",
                 "viol_common", "viol_qos", "viol_linear", "viol_decode"]
SUMMARY_COLUMNS = ["sweep_param", "sweep_value", "kind", "n_ok", "n_failed", "see_mean", "see_std",
                   "reward_mean", "reward_std", "best_reward_mean", "rate_lu_min_mean"]


def version_tag() -> str:
    return f"v{__version__}"


def moving_average(x, window: int) -> np.ndarray:
    """Trailing mean over up to ``window`` points (shorter at the start)."""
    if window < 1:
        raise ValueError(f"smoothing window must be >= 1, got {window}")
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return x
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    out = (c[idx] - c[lo]) / (idx - lo)
    # cumsum drift would break the identity on constant input
    const = np.all(x == x[0])
    return np.full_like(x, x[0]) if const else out


def curve_columns(K: int) -> list[str]:
    cols = []
    for c in CURVE_COLUMNS:
        if c.endswith("*"):
            cols += [f"{c[:-1]}{k + 1}" for k in range(K)]
        else:
            cols.append(c)
    return cols


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def curve_csv(log: TrainingLog, K: int, window: int, header: str) -> str:
    rows = log.rows
    ma_r = moving_average([r["avg_reward"] for r in rows], window)
    ma_s = moving_average([r["see"] for r in rows], window)
    cols = curve_columns(K)
    buf = io.StringIO()
    buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for i, r in enumerate(rows):
        full = dict(r, avg_reward_ma=ma_r[i], see_ma=ma_s[i])
        w.writerow([_fmt(full.get(c, 0.0)) for c in cols])
    return buf.getvalue()


def read_curve(path) -> tuple[dict, list[dict]]:
    """Parse a curve CSV into (header fields, rows of floats)."""
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("# "):
        raise ValueError(f"{path}: missing header line")
    meta = dict(item.split("=", 1) for item in text[0][2:].split())
    rows = [{k: float(v) for k, v in row.items()} for row in csv.DictReader(text[1:])]
    return meta, rows


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    kind: str
    sweep_param: str
    sweep_value: object
    final_see: float = math.nan
    final_avg_reward: float = math.nan
    best_reward: float = math.nan
    rates: list = field(default_factory=list)
    wall_clock: float = 0.0
    version: str = field(default_factory=version_tag)
    status: str = "ok"
    error: str = ""
    curve_path: str = ""


def build_env(cfg: ExperimentConfig) -> VlcEnv:
    b = cfg["baselines"]
    return VlcEnv(cfg.channels(), cfg.power_limits(), episode_length=cfg["env"]["episode_length"],
                  sdma=b["sdma"], irs_off=b["irs_off"])


def run_kind(cfg: ExperimentConfig, kind: str, seed: int, **kw) -> TrainingLog:
    env = build_env(cfg)
    tc = cfg.trainer_config()
    if kind == "ds_ppo":
        return train(env, tc, seed, **kw)
    if kind == "ppo":
        return run_ppo_baseline(env, tc, seed, **kw)
    if kind == "mrt_only":
        return run_mrt_only(env, tc, seed, **kw)
    if kind == "eps_greedy":
        b = cfg["baselines"]
        return run_eps_greedy(env, tc.total_steps, seed, eps=b["eps"], logit_range=b["logit_range"],
                              log_interval=tc.update_interval).log
    raise ValueError(f"unknown baseline kind '{kind}'")


def run_file_stem(kind: str, seed: int, sweep_param: str = "", sweep_value=None) -> str:
    tag = f"_{sweep_param.replace('.', '-')}={sweep_value}" if sweep_param else ""
    return f"curve_{kind}{tag}_seed{seed}"


def run_one(cfg: ExperimentConfig, kind: str, seed: int, out_dir, sweep_param="", sweep_value=None,
            checkpoint=False) -> RunRecord:
    """Train one cell and write its curve CSV; failures become a failed record."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rec = RunRecord(cfg.config_hash(), seed, kind, sweep_param, sweep_value)
    stem = run_file_stem(kind, seed, sweep_param, sweep_value)
    t0 = time.perf_counter()
    try:
        ckpt = out_dir / f"{stem}.ckpt" if checkpoint and kind != "eps_greedy" else None
        log = run_kind(cfg, kind, seed, **({"checkpoint_path": ckpt} if ckpt else {}))
        if not log.rows:
            raise RuntimeError("run produced no log rows; total_steps shorter than one update")
        K = cfg.n_lus()
        window = int(cfg["experiment"]["smoothing_window"])
        header = (f"kind={kind} seed={seed} config_hash={rec.config_hash} "
                  f"sweep={sweep_param or '-'}={sweep_value if sweep_param else '-'}")
        path = out_dir / f"{stem}.csv"
        path.write_text(curve_csv(log, K, window, header))
        tail = log.rows[-window:]
        rec.final_avg_reward = float(np.mean([r["avg_reward"] for r in tail]))
        rec.final_see = float(np.mean([r["see"] for r in tail]))
        rec.best_reward = float(log.rows[-1]["best_reward"])
        rec.rates = [float(np.mean([r.get(f"rate_lu{k + 1}", 0.0) for r in tail])) for k in range(K)]
        rec.curve_path = str(path)
    except Exception as exc:  # recorded, never fatal for a sweep
        rec.status = "failed"
        rec.error = f"{type(exc).__name__}: {exc}"
        (out_dir / f"{stem}.error.txt").write_text(traceback.format_exc())
    rec.wall_clock = time.perf_counter() - t0
    return rec


def _cell(args):
    data, kind, seed, out_dir, param, value = args
    cfg = ExperimentConfig(data)
    if param:
        cfg.set(param, value)
    return run_one(cfg, kind, seed, out_dir, param, value)


def sweep_cells(cfg: ExperimentConfig, out_dir) -> list[tuple]:
    param = cfg["sweep"]["param"]
    values = cfg["sweep"]["values"] if param else [None]
    return [(cfg.data, kind, int(seed), str(out_dir), param, value)
            for value in values for seed in cfg["experiment"]["seeds"] for kind in cfg["baselines"]["kinds"]]


def summarize(records: list[RunRecord]) -> list[dict]:
    groups: dict = {}
    for r in records:
        groups.setdefault((r.sweep_param, repr(r.sweep_value), r.kind), []).append(r)
    out = []
    for (param, _, kind), recs in groups.items():
        ok = [r for r in recs if r.status == "ok"]
        see = [r.final_see for r in ok]
        rew = [r.final_avg_reward for r in ok]

        def stat(xs, fn):
            return float(fn(xs)) if xs else math.nan

        out.append({
            "sweep_param": param or "-",
            "sweep_value": recs[0].sweep_value if param else "-",
            "kind": kind,
            "n_ok": len(ok),
            "n_failed": len(recs) - len(ok),
            "see_mean": stat(see, np.mean),
            "see_std": stat(see, np.std),
            "reward_mean": stat(rew, np.mean),
            "reward_std": stat(rew, np.std),
            "best_reward_mean": stat([r.best_reward for r in ok], np.mean),
            "rate_lu_min_mean": stat([min(r.rates) for r in ok if r.rates], np.mean),
        })
    return out


def write_summary(rows: list[dict], path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in rows:
        w.writerow([r[c] if isinstance(r[c], str) else _fmt(r[c]) for c in SUMMARY_COLUMNS])
    Path(path).write_text(buf.getvalue())


def write_records(records: list[RunRecord], path) -> None:
    cols = [f for f in asdict(records[0])] if records else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in records:
            row = asdict(r)
            row["rates"] = " ".join(repr(x) for x in r.rates)
            w.writerow(row)


def run_sweep(cfg: ExperimentConfig, out_dir=None) -> list[RunRecord]:
    """Every (sweep value x seed x baseline) cell, in parallel up to ``experiment.workers``."""
    out_dir = Path(out_dir or cfg["experiment"]["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = sweep_cells(cfg, out_dir)
    workers = int(cfg["experiment"]["workers"])
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_cell, cells))
    else:
        records = [_cell(c) for c in cells]
    param = cfg["sweep"]["param"] or "none"
    write_summary(summarize(records), out_dir / f"summary_{param.replace('.', '-')}.csv")
    write_records(records, out_dir / "runs.csv")
    return records
