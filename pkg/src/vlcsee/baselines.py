"""Reference policies and ablation modes sharing the trainer's log schema."""
from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass

import numpy as np

from .env import VlcEnv
from .ppo import TrainerConfig, TrainingLog, _step_stats, summarize_window, train


def apply_ablation(env: VlcEnv, *, sdma=None, irs_off=None, mrt_only=None) -> VlcEnv:
    """Copy of ``env`` with the given mode flags replaced (``None`` keeps the current value)."""
    pick = lambda new, old: old if new is None else bool(new)  # noqa: E731
    return VlcEnv(env.channels, env.limits, episode_length=env.episode_length,
                  mrt_only=pick(mrt_only, env.mrt_only), sdma=pick(sdma, env.sdma),
                  irs_off=pick(irs_off, env.irs_off))


def run_ppo_baseline(env, config: TrainerConfig, seed: int = 0, **kw) -> TrainingLog:
    """On-policy PPO: the same trainer with the replay phase switched off."""
    return train(env, dataclasses.replace(config, epochs_off=0), seed, kind="ppo", **kw)


def run_mrt_only(env: VlcEnv, config: TrainerConfig, seed: int = 0, **kw) -> TrainingLog:
    return train(apply_ablation(env, mrt_only=True), config, seed, kind="mrt_only", **kw)


@dataclass
class EpsGreedyResult:
    best_reward: float
    best_action: np.ndarray
    trace: np.ndarray  # running best after each step
    log: TrainingLog


def run_eps_greedy(env, steps: int, seed: int = 0, *, eps: float = 0.1, logit_range: float = 3.0,
                   log_interval: int = 1000) -> EpsGreedyResult:
    """Random search: explore a uniform logit vector with probability ``eps``
    (always on the first step), otherwise replay the best action found so far."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    K = getattr(getattr(env, "channels", None), "K", 0)
    log = TrainingLog(config={"eps": eps, "logit_range": logit_range, "total_steps": steps}, kind="eps_greedy")
    best_r, best_a = -math.inf, None
    trace = np.empty(steps)
    window = []
    env.reset()
    for t in range(steps):
        if best_a is None or rng.random() < eps:
            action = rng.uniform(-logit_range, logit_range, env.act_dim)
        else:
            action = best_a
        out = env.step(action)
        if out.done:
            env.reset()
        if out.reward > best_r:
            best_r, best_a = out.reward, action.copy()
        trace[t] = best_r
        if "gates" in out.info:
            window.append(_step_stats(out.info, out.reward))
        else:
            window.append({"reward": out.reward, "see": out.reward, "rates": None, "eve_c": 0.0, "eve_p": None,
                           "p_total": 0.0, "viol": [0, 0, 0, 0], "decode_error": False})
        if (t + 1) % log_interval == 0 or t + 1 == steps:
            row = summarize_window(window, K, t + 1)
            row.update(best_reward=best_r, actor_loss=0.0, critic_loss=0.0, lr=0.0, policy_std=0.0)
            log.rows.append(row)
            window = []
    log.wall_clock = time.perf_counter() - t0
    return EpsGreedyResult(best_r, best_a, trace, log)
