"""Command-line entry point: ``vlcsee {validate,train,sweep,plot,oracle}``."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .config import BASELINE_KINDS, ConfigError, load_config

OUT_ENV = "VLCSEE_OUT"
EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vlcsee", description="IRS-assisted VLC secrecy energy efficiency experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, cfg=True):
        if cfg:
            sp.add_argument("config", help="TOML experiment file")
        sp.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
        return sp

    common(sub.add_parser("validate", help="check a config and print every problem"))
    for name, help_ in (("train", "run one training"), ("sweep", "run the configured sweep")):
        sp = common(sub.add_parser(name, help=help_))
        sp.add_argument("--seed", type=int, help="seed (sweep: replaces the seed list)")
        sp.add_argument("--steps", type=int, help="total environment steps")
        sp.add_argument("--baseline", choices=BASELINE_KINDS,
                        help="trainer or baseline to run (sweep: replaces the kinds list)")
        sp.add_argument("--sdma", action="store_true", help="drop the common stream")
        sp.add_argument("--no-irs", action="store_true", help="disable IRS reflection")
    sp = sub.add_parser("plot", help="emit plot CSV/SVG from a results directory")
    sp.add_argument("dir")
    sp = common(sub.add_parser("oracle", help="exhaustive alignment search on a tiny instance"))
    sp.add_argument("--seed", type=int, default=0, help="seed for the fixed random decision")
    return p


def _apply_overrides(cfg, args):
    if getattr(args, "steps", None) is not None:
        cfg.set("trainer.total_steps", args.steps)
    if getattr(args, "sdma", False):
        cfg.set("baselines.sdma", True)
    if getattr(args, "no_irs", False):
        cfg.set("baselines.irs_off", True)
    if getattr(args, "baseline", None):
        cfg.set("baselines.kinds", [args.baseline])
    if getattr(args, "seed", None) is not None and args.command == "sweep":
        cfg.set("experiment.seeds", [args.seed])
    return cfg.validate()


def _out_dir(cfg, args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or cfg["experiment"]["output_dir"])


def _oracle(cfg, seed: int) -> int:
    from .env import VlcEnv
    from .rates import exhaustive_alignment_oracle

    env = VlcEnv(cfg.channels(), cfg.power_limits())
    rng = np.random.default_rng(seed)
    dec = env.decode(np.concatenate([env.warm_start_action()[:env.layout.action.align.start],
                                     rng.uniform(-1, 1, env.act_dim - env.layout.action.align.start)]))
    res = exhaustive_alignment_oracle(env.channels, dec.decision, env.limits)
    print(f"configurations: {res.n_configs}")
    print(f"feasible: {res.feasible}")
    print(f"best SEE: {res.best_see!r}")
    print("best alignment (rows = IRS elements, columns = LED-LU pairs):")
    print(res.best.q.astype(int))
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "plot":
        from .plots import MissingInputError, emit_plot_data

        try:
            for path in emit_plot_data(args.dir):
                print(path)
        except MissingInputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        return EXIT_OK

    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"invalid config {args.config}:", file=sys.stderr)
        for p in exc.problems:
            print(f"  - {p}", file=sys.stderr)
        return EXIT_INVALID

    try:
        if args.command == "validate":
            print(f"ok (config hash {cfg.config_hash()})")
            return EXIT_OK
        if args.command == "oracle":
            from .rates import InstanceTooLarge

            try:
                return _oracle(cfg, args.seed)
            except InstanceTooLarge as exc:
                print(f"error: {exc}; shrink irs.n_elements, scene.leds or scene.n_lus", file=sys.stderr)
                return EXIT_INVALID
        from .harness import run_one, run_sweep

        out = _out_dir(cfg, args)
        if args.command == "train":
            seed = args.seed if args.seed is not None else int(cfg["experiment"]["seeds"][0])
            rec = run_one(cfg, cfg["baselines"]["kinds"][0], seed, out, checkpoint=True)
            if rec.status != "ok":
                print(f"run failed: {rec.error}", file=sys.stderr)
                return EXIT_RUNTIME
            print(f"{rec.curve_path}: final avg reward {rec.final_avg_reward:.6g}, final SEE {rec.final_see:.6g}")
            return EXIT_OK
        records = run_sweep(cfg, out)
        failed = [r for r in records if r.status != "ok"]
        print(f"{len(records) - len(failed)} runs ok, {len(failed)} failed; results in {out}")
        for r in failed:
            print(f"  failed {r.kind} seed={r.seed} {r.sweep_param}={r.sweep_value}: {r.error}", file=sys.stderr)
        return EXIT_RUNTIME if failed else EXIT_OK
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
