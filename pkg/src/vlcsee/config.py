"""Experiment configuration: TOML load/dump, defaults, validation and scene construction."""
from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from .geometry import ChannelSet, OpticalParams, Scene, build_channel_set
from .ppo import TrainerConfig
from .rates import PowerLimits


class ConfigError(ValueError):
    """Parse or validation failure; ``problems`` lists every issue found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


DEFAULT_LEDS = [[1.5, 2.0, 3.0], [3.0, 2.0, 3.0], [4.5, 2.0, 3.0],
                [1.5, 4.0, 3.0], [3.0, 4.0, 3.0], [4.5, 4.0, 3.0]]
BASELINE_KINDS = ("ds_ppo", "ppo", "eps_greedy", "mrt_only")
SWEEPABLE = ("irs.n_elements", "scene.n_lus", "power.p_max", "power.qos", "trainer.lr")

# section -> {key: default}; every key a config file may set
DEFAULTS = {
    "scene": {
        "room": [6.0, 6.0, 3.0],
        "leds": DEFAULT_LEDS,
        "n_lus": 2,
        "placement_seed": 0,
        "min_separation": 0.5,
        "lus": [],  # explicit positions override seeded placement
        "eve": [],
    },
    "irs": {
        "n_elements": 16,
        "pitch": 0.25,
        "center": [0.0, 3.0, 1.5],
        "elements": [],  # explicit positions override the grid
    },
    "optics": {
        "g_of": 1.0,
        "kappa": 1.5,
        "psi_fov_deg": 75.0,
        "omega_half_deg": 60.0,
        "area_pd": 1e-4,
        "rho": 0.9,
    },
    "power": {
        "p_max": 20.0,
        "p_circuit": 2.0,
        "u_led": 2.0,
        "i_min": 0.0,
        "i_max": 5.0,
        "qos": 2.0,
        "noise_lu": 1e-13,
        "noise_eve": 1e-13,
    },
    "env": {"episode_length": 2048},
    "trainer": {
        "lr_actor": 2.5e-4,
        "lr_critic": 2.5e-4,
        "epochs_on": 10,
        "epochs_off": 3,
        "batch_on": 2048,
        "batch_off": 256,
        "buffer_size": 40960,
        "gamma": 0.0,
        "clip": 0.2,
        "total_steps": 200_000,
        "decay_steps": 0,  # 0 -> total_steps
        "update_interval": 1000,
        "hidden": [256, 256],
        "normalize_advantages": True,
        "init_log_std": math.log(0.5),
        "warm_start": True,
    },
    "baselines": {"kinds": ["ds_ppo"], "sdma": False, "irs_off": False, "eps": 0.1, "logit_range": 3.0},
    "sweep": {"param": "", "values": []},
    "experiment": {"seeds": [0], "output_dir": "runs", "workers": 1, "smoothing_window": 100},
}

# keys that do not change any number a run produces
_NON_RESULT_KEYS = {("experiment", "output_dir"), ("experiment", "workers")}


@dataclass
class ExperimentConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def __getitem__(self, section) -> dict:
        return self.data[section]

    def __eq__(self, other):
        return isinstance(other, ExperimentConfig) and self.data == other.data

    def copy(self) -> "ExperimentConfig":
        return ExperimentConfig(copy.deepcopy(self.data))

    def set(self, dotted: str, value):
        """Assign ``section.key``; ``trainer.lr`` sets both learning rates."""
        section, _, key = dotted.partition(".")
        if dotted == "trainer.lr":
            self.data["trainer"]["lr_actor"] = self.data["trainer"]["lr_critic"] = float(value)
            return
        if section not in self.data or key not in self.data[section]:
            raise ConfigError([f"unknown parameter '{dotted}'"])
        self.data[section][key] = value

    # -- derived objects ------------------------------------------------------------
    def optical_params(self) -> OpticalParams:
        o = self.data["optics"]
        return OpticalParams(g_of=o["g_of"], kappa=o["kappa"], psi_fov=math.radians(o["psi_fov_deg"]),
                             omega_half=math.radians(o["omega_half_deg"]), area_pd=o["area_pd"], rho=o["rho"])

    def n_lus(self) -> int:
        lus = self.data["scene"]["lus"]
        return len(lus) if lus else int(self.data["scene"]["n_lus"])

    def power_limits(self, n_lus: int | None = None) -> PowerLimits:
        p = self.data["power"]
        K = self.n_lus() if n_lus is None else n_lus
        return PowerLimits(p_max=p["p_max"], p_circuit=p["p_circuit"], u_led=p["u_led"], i_min=p["i_min"],
                           i_max=p["i_max"], qos=_per_lu(p["qos"], K), noise_lu=_per_lu(p["noise_lu"], K),
                           noise_eve=p["noise_eve"])

    def scene(self) -> Scene:
        s, irs = self.data["scene"], self.data["irs"]
        room = tuple(float(x) for x in s["room"])
        elements = np.asarray(irs["elements"], dtype=float) if irs["elements"] else irs_grid(
            irs["n_elements"], irs["pitch"], irs["center"])
        if s["lus"]:
            lus = np.asarray(s["lus"], dtype=float)
            eve = np.asarray(s["eve"], dtype=float)
        else:
            pts = place_on_floor(s["n_lus"] + 1, room, s["min_separation"], s["placement_seed"])
            lus, eve = pts[:-1], pts[-1]
            if s["eve"]:
                eve = np.asarray(s["eve"], dtype=float)
        return Scene(leds=np.asarray(s["leds"], dtype=float), irs_elements=elements, lus=lus, eve=eve, room=room)

    def channels(self) -> ChannelSet:
        return build_channel_set(self.scene(), self.optical_params())

    def trainer_config(self) -> TrainerConfig:
        t = dict(self.data["trainer"])
        t["decay_steps"] = t["decay_steps"] or None
        return TrainerConfig(**t)

    def config_hash(self) -> str:
        clean = {s: {k: v for k, v in sec.items() if (s, k) not in _NON_RESULT_KEYS} for s, sec in self.data.items()}
        blob = json.dumps(clean, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def validate(self) -> "ExperimentConfig":
        problems = validation_problems(self)
        if problems:
            raise ConfigError(problems)
        return self


def _per_lu(value, K):
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    return np.full(K, arr[0]) if arr.size == 1 else arr


def irs_grid(n: int, pitch: float, center) -> np.ndarray:
    """Near-square rows x cols grid on the x=0 wall, rows along z and columns along y."""
    n = int(n)
    if n < 1:
        raise ConfigError(["irs.n_elements must be >= 1"])
    rows = max(r for r in range(1, int(math.isqrt(n)) + 1) if n % r == 0)
    cols = n // rows
    cx, cy, cz = center
    ys = cy + pitch * (np.arange(cols) - (cols - 1) / 2)
    zs = cz + pitch * (np.arange(rows) - (rows - 1) / 2)
    return np.array([[cx, y, z] for z in zs for y in ys])


def place_on_floor(count: int, room, min_sep: float, seed: int, max_tries: int = 10_000) -> np.ndarray:
    """Uniform floor points at least ``min_sep`` from the walls and from each other."""
    rng = np.random.default_rng(seed)
    lo, hi = min_sep, np.array(room[:2]) - min_sep
    if np.any(hi <= lo):
        raise ConfigError([f"room {room} too small for wall separation {min_sep}"])
    pts = []
    for _ in range(max_tries):
        p = rng.uniform(lo, hi)
        if all(np.hypot(*(p - q)) >= min_sep for q in pts):
            pts.append(p)
            if len(pts) == count:
                return np.column_stack([np.array(pts), np.zeros(count)])
    raise ConfigError([f"could not place {count} receivers with separation {min_sep}"])


def validation_problems(cfg: ExperimentConfig) -> list[str]:
    d = cfg.data
    problems = []
    K = cfg.n_lus()
    if K < 1:
        problems.append("scene: need K >= 1 LUs")
    if len(d["scene"]["leds"]) < 1:
        problems.append("scene.leds: need at least one LED")
    if int(d["irs"]["n_elements"]) < 1 and not d["irs"]["elements"]:
        problems.append("irs.n_elements must be >= 1")
    if d["scene"]["lus"] and not d["scene"]["eve"]:
        problems.append("scene.eve is required when scene.lus is given")
    for name in ("qos", "noise_lu"):
        arr = np.atleast_1d(np.asarray(d["power"][name], dtype=float))
        if arr.size not in (1, max(K, 1)):
            problems.append(f"power.{name} must be a scalar or have one entry per LU")
    if int(d["env"]["episode_length"]) < 1:
        problems.append("env.episode_length must be >= 1")
    for k in d["baselines"]["kinds"]:
        if k not in BASELINE_KINDS:
            problems.append(f"baselines.kinds: unknown kind '{k}' (choose from {', '.join(BASELINE_KINDS)})")
    if not d["baselines"]["kinds"]:
        problems.append("baselines.kinds must be nonempty")
    if not 0 <= d["baselines"]["eps"] <= 1:
        problems.append("baselines.eps must lie in [0, 1]")
    if not d["experiment"]["seeds"]:
        problems.append("experiment.seeds must be nonempty")
    if int(d["experiment"]["workers"]) < 1:
        problems.append("experiment.workers must be >= 1")
    if int(d["experiment"]["smoothing_window"]) < 1:
        problems.append("experiment.smoothing_window must be >= 1")
    param, values = d["sweep"]["param"], d["sweep"]["values"]
    if param and param not in SWEEPABLE:
        problems.append(f"sweep.param '{param}' not sweepable (choose from {', '.join(SWEEPABLE)})")
    if param and not values:
        problems.append("sweep.values must be nonempty when sweep.param is set")
    if values and not param:
        problems.append("sweep.values given without sweep.param")
    problems += [f"trainer: {p}" for p in cfg.trainer_config().problems()]
    # with K < 1 the per-LU arrays would be empty and hide bad values
    for label, build in (("optics", cfg.optical_params), ("power", lambda: cfg.power_limits(max(K, 1)))):
        try:
            build()
        except ValueError as exc:
            problems.append(f"{label}: {exc}")
    if not problems:
        try:
            cfg.scene()
        except ValueError as exc:
            problems.append(f"scene: {exc}")
    if param in SWEEPABLE and not problems:
        for v in values:
            trial = cfg.copy()
            trial.set(param, v)
            trial.data["sweep"] = {"param": "", "values": []}
            problems += [f"sweep value {param}={v}: {p}" for p in validation_problems(trial)]
    return problems


def _merge(raw: dict) -> tuple[dict, list[str]]:
    data = copy.deepcopy(DEFAULTS)
    problems = []
    for section, body in raw.items():
        if section not in DEFAULTS:
            problems.append(f"unknown section [{section}]")
            continue
        if not isinstance(body, dict):
            problems.append(f"[{section}] must be a table")
            continue
        for key, value in body.items():
            if key not in DEFAULTS[section]:
                problems.append(f"unknown key '{section}.{key}'")
                continue
            default = DEFAULTS[section][key]
            if isinstance(default, bool) != isinstance(value, bool) or (
                    isinstance(default, (int, float)) and not isinstance(value, (int, float, list))):
                problems.append(f"{section}.{key}: expected {type(default).__name__}, got {type(value).__name__}")
                continue
            if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            data[section][key] = value
    return data, problems


def loads_config(text: str) -> ExperimentConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"parse error: {exc}"]) from exc
    data, problems = _merge(raw)
    cfg = ExperimentConfig(data)
    try:
        problems += validation_problems(cfg)
    except (TypeError, ValueError) as exc:
        problems.append(f"malformed value: {exc}")
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    return loads_config(path.read_text())


def dumps_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(cfg.data)


def default_config() -> ExperimentConfig:
    return ExperimentConfig()

