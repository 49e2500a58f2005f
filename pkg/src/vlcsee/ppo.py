"""Dual-sampling PPO: on-policy recent-window updates plus uniform replay updates."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import kernels
from .nn import AdamState, AgentState, GaussianPolicy, ValueNet, adam_step


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainerConfig:
    lr_actor: float = 2.5e-4
    lr_critic: float = 2.5e-4
    epochs_on: int = 10
    epochs_off: int = 3
    batch_on: int = 2048
    batch_off: int = 256
    buffer_size: int = 40960
    gamma: float = 0.0
    clip: float = 0.2
    # desk-scale horizon; the full-length runs used 1.5e7
    total_steps: int = 200_000
    decay_steps: int | None = None  # None -> total_steps
    update_interval: int = 1000
    hidden: tuple = (256, 256)
    normalize_advantages: bool = True
    init_log_std: float = math.log(0.5)
    warm_start: bool = True

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)

    def problems(self) -> list[str]:
        out = []
        if not 0 < self.clip < 1:
            out.append("clip must lie in (0, 1)")
        if not 0 <= self.gamma <= 1:
            out.append("gamma must lie in [0, 1]")
        if self.batch_on > self.buffer_size or self.batch_off > self.buffer_size:
            out.append("batch sizes must not exceed buffer_size")
        for name in ("batch_on", "batch_off", "buffer_size", "update_interval", "total_steps"):
            if getattr(self, name) < 1:
                out.append(f"{name} must be >= 1")
        for name in ("epochs_on", "epochs_off"):
            if getattr(self, name) < 0:
                out.append(f"{name} must be >= 0")
        if self.lr_actor <= 0 or self.lr_critic <= 0:
            out.append("learning rates must be > 0")
        if self.decay_steps is not None and self.decay_steps <= 0:
            out.append("decay_steps must be > 0")
        return out

    def validate(self):
        p = self.problems()
        if p:
            raise ValueError("; ".join(p))
        return self

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def learning_rate(lr0: float, t: int, decay_steps: int) -> float:
    return lr0 * 10.0 ** (-t / decay_steps)


# --- advantage estimators ----------------------------------------------------

def td_errors(rewards, values, next_values, gamma, dones=None):
    rewards, values, next_values = (np.asarray(x, dtype=float) for x in (rewards, values, next_values))
    if not rewards.shape == values.shape == next_values.shape:
        raise ValueError("rewards, values and next_values must have equal length")
    nv = next_values if dones is None else np.where(np.asarray(dones, dtype=bool), 0.0, next_values)
    return rewards + gamma * nv - values


def gae(delta, gamma, dones=None):
    """Backward recursion A_t = delta_t + gamma * A_{t+1}, with A_{T-1} = delta_{T-1}."""
    delta = np.asarray(delta, dtype=float)
    if delta.size == 0:
        raise ValueError("empty TD-error sequence")
    return kernels.gae(delta, gamma, dones)


def traditional_advantage(rewards, values, next_values):
    return np.asarray(rewards, dtype=float) + np.asarray(next_values, dtype=float) - np.asarray(values, dtype=float)


def clip_surrogate(ratio, advantage, epsilon) -> float:
    ratio = np.asarray(ratio, dtype=float)
    advantage = np.asarray(advantage, dtype=float)
    return float(np.mean(np.minimum(ratio * advantage, np.clip(ratio, 1 - epsilon, 1 + epsilon) * advantage)))


# --- experience pool -----------------------------------------------------------

class ExperiencePool:
    """FIFO ring buffer of transitions with chronological indexing."""

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self.size = 0
        self.cursor = 0
        self.total_added = 0
        self._arrays = None

    def _alloc(self, obs_dim, act_dim):
        c = self.capacity
        self._arrays = {
            "state": np.zeros((c, obs_dim)),
            "next_state": np.zeros((c, obs_dim)),
            "action": np.zeros((c, act_dim)),
            "logp": np.zeros(c),
            "reward": np.zeros(c),
            "done": np.zeros(c, dtype=np.uint8),
            "value": np.zeros(c),
            "next_value": np.zeros(c),
            "step": np.zeros(c, dtype=np.int64),
        }

    def __len__(self):
        return self.size

    def __getitem__(self, name) -> np.ndarray:
        return self._arrays[name]

    def add(self, state, action, logp, reward, next_state, done, value, next_value):
        vals = (state, action, logp, reward, next_state, done, value, next_value)
        if not all(np.all(np.isfinite(np.asarray(x, dtype=float))) for x in vals):
            raise TrainingError("non-finite transition")
        if self._arrays is None:
            self._alloc(len(state), len(action))
        i = self.cursor
        a = self._arrays
        a["state"][i] = state
        a["next_state"][i] = next_state
        a["action"][i] = action
        a["logp"][i] = logp
        a["reward"][i] = reward
        a["done"][i] = done
        a["value"][i] = value
        a["next_value"][i] = next_value
        a["step"][i] = self.total_added
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.total_added += 1

    def chronological(self) -> np.ndarray:
        if self.size < self.capacity:
            return np.arange(self.size)
        return (np.arange(self.capacity) + self.cursor) % self.capacity

    def recent(self, n: int) -> np.ndarray:
        if n > self.size:
            raise ValueError(f"requested {n} recent transitions, pool holds {self.size}")
        return self.chronological()[self.size - n:]

    def sample(self, n: int, rng) -> np.ndarray:
        return rng.choice(self.size, size=min(n, self.size), replace=False)

    def advantages(self, gamma: float, value_fn=None, needed=None) -> tuple[np.ndarray, np.ndarray]:
        """GAE over the pool in insertion order; returns (adv, targets) indexed like the pool.

        With ``value_fn`` the state values are re-estimated for every stored
        transition instead of using the values recorded at collection time.
        When ``gamma`` is 0 each advantage stands alone, so only the slots in
        ``needed`` (if given) are filled.
        """
        idx = self.chronological()
        if gamma == 0 and needed is not None:
            idx = np.unique(needed)
        a = self._arrays
        done = a["done"][idx]
        if value_fn is None:
            values, next_values = a["value"][idx], a["next_value"][idx]
        else:
            values = value_fn(a["state"][idx])
            # with gamma = 0 successor values carry zero weight
            next_values = value_fn(a["next_state"][idx]) * (1 - done) if gamma > 0 else np.zeros(len(idx))
        delta = td_errors(a["reward"][idx], values, next_values, gamma, done)
        adv = np.zeros(self.capacity)
        tgt = np.zeros(self.capacity)
        adv[idx] = gae(delta, gamma, done)
        tgt[idx] = adv[idx] + values
        return adv, tgt


# --- updates ----------------------------------------------------------------------

def _normalize(adv):
    std = adv.std()
    return (adv - adv.mean()) / (std if std > 1e-8 else 1.0)


def actor_loss_and_grads(policy: GaussianPolicy, obs, actions, logp_old, adv, clip):
    """Negated clipped surrogate and its exact parameter gradients."""
    logp, tape = policy.logp_forward(obs, actions)
    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1 - clip, 1 + clip)
    loss = -float(np.mean(np.minimum(ratio * adv, clipped * adv)))
    active = ratio * adv <= clipped * adv
    w = np.where(active, -adv * ratio, 0.0) / len(adv)
    return loss, policy.logp_backward(tape, w), ratio


def critic_loss_and_grads(value: ValueNet, obs, targets):
    v, cache = value.forward(obs)
    err = v - targets
    loss = float(np.mean(err**2))
    grads = value.net.backward(cache, (2.0 * err / len(err))[:, None])
    return loss, grads


def update_actor(policy, adam: AdamState, obs, actions, logp_old, adv, clip, lr) -> float:
    loss, grads, ratio = actor_loss_and_grads(policy, obs, actions, logp_old, adv, clip)
    if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
        raise TrainingError(f"non-finite actor loss {loss}; ratio range [{ratio.min():.3g}, {ratio.max():.3g}]")
    adam_step(policy.params, grads, adam, lr)
    policy.touch()
    return loss


def update_critic(value, adam: AdamState, obs, targets, lr) -> float:
    loss, grads = critic_loss_and_grads(value, obs, targets)
    if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
        raise TrainingError(f"non-finite critic loss {loss}")
    adam_step(value.params, grads, adam, lr)
    value.touch()
    return loss


# --- training loop ------------------------------------------------------------------

@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    kind: str = "ds_ppo"
    agent: AgentState | None = None
    wall_clock: float = 0.0


def _identity(x):
    return x


def make_agent(env, config: TrainerConfig, seed: int) -> AgentState:
    init_ss, act_ss = np.random.SeedSequence(seed).spawn(2)
    init_rng = np.random.default_rng(init_ss)
    features = getattr(env, "features", _identity)
    obs_dim = len(features(np.zeros(env.obs_dim)))
    policy = GaussianPolicy(obs_dim, env.act_dim, config.hidden, init_rng, config.init_log_std)
    value = ValueNet(obs_dim, config.hidden, init_rng)
    if config.warm_start and hasattr(env, "warm_start_action"):
        policy.net.params[-1][:] = env.warm_start_action()
    return AgentState(policy, value, AdamState.for_params(policy.params), AdamState.for_params(value.params),
                      np.random.default_rng(act_ss))


def _step_stats(info, reward):
    """Per-step quantities that feed the per-update log row."""
    rep = info.get("report")
    g = info["gates"]
    return {
        "reward": reward,
        "see": rep.see if rep is not None else 0.0,
        "rates": rep.r_total_per_lu if rep is not None else None,
        "eve_c": rep.r_eve_common if rep is not None else 0.0,
        "eve_p": rep.r_eve_private if rep is not None else None,
        "p_total": rep.p_total if rep is not None else 0.0,
        "viol": [1 - g.get(k, 0) for k in ("power", "common", "qos", "linear")],
        "decode_error": info.get("decode_error") is not None,
    }


def summarize_window(window: list, K: int, step: int) -> dict:
    rew = np.array([w["reward"] for w in window])
    row = {"step": step, "avg_reward": float(rew.mean()), "see": float(np.mean([w["see"] for w in window]))}
    rates = [w["rates"] for w in window if w["rates"] is not None]
    eve_p = [w["eve_p"] for w in window if w["eve_p"] is not None]
    for k in range(K):
        row[f"rate_lu{k + 1}"] = float(np.mean([r[k] for r in rates])) if rates else 0.0
    row["eve_common"] = float(np.mean([w["eve_c"] for w in window]))
    for k in range(K):
        row[f"eve_private{k + 1}"] = float(np.mean([e[k] for e in eve_p])) if eve_p else 0.0
    row["p_total"] = float(np.mean([w["p_total"] for w in window]))
    viol = np.sum([w["viol"] for w in window], axis=0)
    for name, count in zip(("power", "common", "qos", "linear"), viol):
        row[f"viol_{name}"] = int(count)
    row["viol_decode"] = int(sum(w["decode_error"] for w in window))
    return row


def train(env, config: TrainerConfig, seed: int = 0, *, agent: AgentState | None = None, on_step=None,
          on_update=None, checkpoint_path=None, kind="ds_ppo") -> TrainingLog:
    """Collect one transition per step; every ``update_interval`` steps run the
    on-policy phase (most recent ``batch_on`` transitions, ``epochs_on``
    full-batch steps) and then the off-policy phase (``batch_off`` uniform
    draws from the pool, ``epochs_off`` steps).
    """
    config.validate()
    t_start = time.perf_counter()
    agent = agent or make_agent(env, config, seed)
    policy, value, rng = agent.policy, agent.value, agent.rng
    features = getattr(env, "features", _identity)
    decay = config.decay_steps or config.total_steps
    K = getattr(getattr(env, "channels", None), "K", 0)
    pool = ExperiencePool(config.buffer_size)
    log = TrainingLog(config=config.as_dict(), kind=kind, agent=agent)
    window = []
    best = -math.inf
    actor_loss = critic_loss = 0.0

    state = env.reset()
    feat = features(state)
    v_cur = float(value(feat))
    try:
        for t in range(config.total_steps):
            action, logp = policy.sample(feat, rng)
            out = env.step(action)
            next_feat = features(out.state)
            v_next = 0.0 if out.done else float(value(next_feat))
            pool.add(feat, action, float(logp), out.reward, next_feat, out.done, v_cur, v_next)
            if on_step is not None:
                on_step(t, action, out)
            best = max(best, out.reward)
            if "gates" in out.info:
                window.append(_step_stats(out.info, out.reward))
            else:
                window.append({"reward": out.reward, "see": out.reward, "rates": None, "eve_c": 0.0,
                               "eve_p": None, "p_total": 0.0, "viol": [0, 0, 0, 0], "decode_error": False})
            if out.done:
                state = env.reset()
                feat = features(state)
                v_cur = float(value(feat))
            else:
                feat, v_cur = next_feat, v_next

            if (t + 1) % config.update_interval == 0 and len(pool) >= config.batch_on:
                lr_a = learning_rate(config.lr_actor, t + 1, decay)
                lr_c = learning_rate(config.lr_critic, t + 1, decay)
                phases = [(pool.recent(config.batch_on), config.epochs_on)]
                if config.epochs_off > 0:
                    phases.append((pool.sample(config.batch_off, rng), config.epochs_off))
                adv_all, tgt_all = pool.advantages(config.gamma, value, np.concatenate([i for i, _ in phases]))
                for idx, epochs in phases:
                    obs, act, lp_old = pool["state"][idx], pool["action"][idx], pool["logp"][idx]
                    adv = adv_all[idx]
                    if config.normalize_advantages:
                        adv = _normalize(adv)
                    tgt = tgt_all[idx]
                    for _ in range(epochs):
                        actor_loss = update_actor(policy, agent.adam_actor, obs, act, lp_old, adv, config.clip, lr_a)
                        critic_loss = update_critic(value, agent.adam_critic, obs, tgt, lr_c)
                # the next transition's value must come from the updated critic
                v_cur = float(value(feat))
                row = summarize_window(window, K, t + 1)
                row.update(best_reward=best, actor_loss=actor_loss, critic_loss=critic_loss, lr=lr_a,
                           policy_std=float(np.mean(policy.std)))
                log.rows.append(row)
                window = []
                if on_update is not None:
                    on_update(row)
    except Exception:
        if checkpoint_path is not None:
            with open(checkpoint_path, "wb") as fh:
                fh.write(agent.to_bytes())
        raise
    log.wall_clock = time.perf_counter() - t_start
    if checkpoint_path is not None:
        with open(checkpoint_path, "wb") as fh:
            fh.write(agent.to_bytes())
    return log


class QuadraticBanditEnv:
    """Stateless toy task: reward = -||a - target||^2 with a constant observation."""

    def __init__(self, target=(0.7, -0.4), episode_length=64):
        self.target = np.asarray(target, dtype=float)
        self.episode_length = int(episode_length)
        self.obs_dim = 1
        self.act_dim = len(self.target)
        self._t = 0

    def reset(self):
        self._t = 0
        return np.ones(1)

    def reward(self, action) -> float:
        return -float(np.sum((np.asarray(action, dtype=float) - self.target) ** 2))

    def step(self, action):
        from .env import StepOutcome

        self._t += 1
        return StepOutcome(np.ones(1), self.reward(action), self._t >= self.episode_length, {})

    def evaluate(self, action):
        return self.reward(action), {}


def toy_config(**overrides) -> TrainerConfig:
    """Small-batch settings sized for the toy task."""
    base = dict(lr_actor=3e-2, lr_critic=3e-2, batch_on=128, batch_off=64, buffer_size=1024,
                update_interval=128, total_steps=128 * 50, hidden=(16, 16), warm_start=False)
    base.update(overrides)
    return TrainerConfig(**base)
