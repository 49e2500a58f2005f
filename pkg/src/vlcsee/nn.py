"""Small numpy MLPs with exact backprop, Adam, and a diagonal Gaussian policy.

Networks are input -> tanh -> tanh -> linear.  Batches are row-major
(B x features); single vectors are promoted to a batch of one.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class StaleCacheError(RuntimeError):
    """backward() called with a cache from before the last parameter update."""


def orthogonal(rng, n_in, n_out, gain=1.0) -> np.ndarray:
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


class MLP:
    def __init__(self, sizes, rng=None, hidden_gain=1.0, out_gain=1.0, params=None):
        self.sizes = tuple(int(s) for s in sizes)
        if params is not None:
            self.params = [np.array(p, dtype=float) for p in params]
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            self.params = []
            n_layers = len(self.sizes) - 1
            for i in range(n_layers):
                gain = out_gain if i == n_layers - 1 else hidden_gain
                self.params.append(orthogonal(rng, self.sizes[i], self.sizes[i + 1], gain))
                self.params.append(np.zeros(self.sizes[i + 1]))
        self._check()
        self.version = 0

    def _check(self):
        for i in range(len(self.sizes) - 1):
            w, b = self.params[2 * i], self.params[2 * i + 1]
            if w.shape != (self.sizes[i], self.sizes[i + 1]) or b.shape != (self.sizes[i + 1],):
                raise ValueError(f"layer {i}: shapes {w.shape}, {b.shape} do not chain {self.sizes}")

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {x.shape[1]} != {self.sizes[0]}")
        acts = [x]
        h = x
        n_layers = len(self.sizes) - 1
        for i in range(n_layers):
            z = h @ self.params[2 * i] + self.params[2 * i + 1]
            h = np.tanh(z) if i < n_layers - 1 else z
            acts.append(h)
        cache = {"acts": acts, "version": self.version, "single": single}
        return (h[0] if single else h), cache

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(self, cache, grad_out):
        """Parameter gradients of sum(grad_out * output)."""
        if cache["version"] != self.version:
            raise StaleCacheError("parameters changed since this forward pass")
        g = np.asarray(grad_out, dtype=float)
        if cache["single"]:
            g = g[None, :]
        acts = cache["acts"]
        n_layers = len(self.sizes) - 1
        grads = [None] * len(self.params)
        for i in range(n_layers - 1, -1, -1):
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = (g @ self.params[2 * i].T) * (1.0 - acts[i] ** 2)
        return grads

    def input_grad(self, cache, grad_out):
        g = np.asarray(grad_out, dtype=float)
        if cache["single"]:
            g = g[None, :]
        acts = cache["acts"]
        for i in range(len(self.sizes) - 2, -1, -1):
            g = g @ self.params[2 * i].T
            if i > 0:
                g = g * (1.0 - acts[i] ** 2)
        return g[0] if cache["single"] else g

    def touch(self):
        """Mark parameters as modified (invalidates outstanding caches)."""
        self.version += 1


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **kw) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(params, grads, state: AdamState, lr: float):
    """In-place bias-corrected Adam descent step; returns ``params``."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


def gaussian_logprob(mean, log_std, action):
    """Sum over the last axis of the diagonal Gaussian log-density."""
    log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    z = (np.asarray(action) - mean) / np.exp(log_std)
    return np.sum(-0.5 * z * z - log_std - HALF_LOG_2PI, axis=-1)


class GaussianPolicy:
    """Mean from an MLP, state-independent learnable log-std."""

    def __init__(self, obs_dim, act_dim, hidden=(256, 256), rng=None, init_log_std=math.log(0.5),
                 out_gain=0.01):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.net = MLP((obs_dim, *hidden, act_dim), rng, out_gain=out_gain)
        self.log_std = np.full(act_dim, float(init_log_std))

    @property
    def params(self):
        return self.net.params + [self.log_std]

    @property
    def std(self):
        return np.exp(np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX))

    def touch(self):
        self.net.touch()
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)

    def mean(self, obs):
        return self.net(obs)

    def sample(self, obs, rng):
        mu = self.net(obs)
        a = mu + self.std * rng.standard_normal(mu.shape)
        return a, gaussian_logprob(mu, self.log_std, a)

    def log_prob(self, obs, actions):
        return gaussian_logprob(self.net(obs), self.log_std, actions)

    def entropy(self) -> float:
        return float(np.sum(np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX) + 0.5 + HALF_LOG_2PI))

    def logp_forward(self, obs, actions):
        mu, cache = self.net.forward(obs)
        ls = np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)
        sigma = np.exp(ls)
        z = (np.asarray(actions, dtype=float) - mu) / sigma
        logp = np.sum(-0.5 * z * z - ls - HALF_LOG_2PI, axis=-1)
        return logp, (cache, z, sigma)

    def logp_backward(self, tape, grad_logp):
        """Gradients of sum(grad_logp * logp) w.r.t. [mean-net params..., log_std]."""
        cache, z, sigma = tape
        w = np.asarray(grad_logp, dtype=float)[..., None]
        d_mu = w * z / sigma
        d_ls = np.sum(w * (z * z - 1.0), axis=tuple(range(z.ndim - 1)))
        # clamp is flat outside its range
        d_ls = np.where((self.log_std > LOG_STD_MIN) & (self.log_std < LOG_STD_MAX), d_ls, 0.0)
        return self.net.backward(cache, d_mu) + [d_ls]

    def logprob_and_grads(self, obs, actions, grad_logp):
        logp, tape = self.logp_forward(obs, actions)
        return logp, self.logp_backward(tape, grad_logp)


class ValueNet:
    def __init__(self, obs_dim, hidden=(256, 256), rng=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.net = MLP((obs_dim, *hidden, 1), rng, out_gain=1.0)

    @property
    def params(self):
        return self.net.params

    def touch(self):
        self.net.touch()

    def __call__(self, obs):
        out = self.net(obs)
        return out[..., 0]

    def forward(self, obs):
        out, cache = self.net.forward(obs)
        return out[..., 0], cache


# --- checkpoint blob -------------------------------------------------------
#
# All integers little-endian.
#   magic      8 bytes   b"VLCSEE\x00\x01"
#   version    u32       CHECKPOINT_VERSION
#   count      u32       number of records
#   record:    name_len u16, name (utf-8), kind u8
#     kind 0 (array):  ndim u8, shape ndim x u64, data float64 LE row-major
#     kind 1 (json):   length u64, utf-8 JSON text
# Record names: "actor/<i>" (mean-net params in layer order, W then b),
# "actor/log_std", "critic/<i>", "adam_actor/m/<i>", "adam_actor/v/<i>",
# "adam_critic/...", "meta" (json: sizes, adam step counters/betas/eps) and
# "rng" (json: numpy bit-generator state).

CHECKPOINT_MAGIC = b"VLCSEE\x00\x01"
CHECKPOINT_VERSION = 1


def _write_record(buf: bytearray, name: str, value):
    nb = name.encode()
    buf += struct.pack("<H", len(nb)) + nb
    if isinstance(value, np.ndarray):
        arr = np.ascontiguousarray(value, dtype="<f8")
        buf += struct.pack("<BB", 0, arr.ndim)
        buf += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        buf += arr.tobytes(order="C")
    else:
        text = json.dumps(value, sort_keys=True).encode()
        buf += struct.pack("<BQ", 1, len(text)) + text


def dumps_checkpoint(records: dict) -> bytes:
    buf = bytearray(CHECKPOINT_MAGIC)
    buf += struct.pack("<II", CHECKPOINT_VERSION, len(records))
    for name, value in records.items():
        _write_record(buf, name, value)
    return bytes(buf)


def loads_checkpoint(blob: bytes) -> dict:
    if blob[:8] != CHECKPOINT_MAGIC:
        raise ValueError("not a vlcsee checkpoint")
    version, count = struct.unpack_from("<II", blob, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    pos = 16
    out = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos:pos + n].decode()
        pos += n
        (kind,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        if kind == 0:
            (ndim,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}Q", blob, pos)
            pos += 8 * ndim
            size = int(np.prod(shape)) if ndim else 1
            out[name] = np.frombuffer(blob, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
            pos += 8 * size
        elif kind == 1:
            (length,) = struct.unpack_from("<Q", blob, pos)
            pos += 8
            out[name] = json.loads(blob[pos:pos + length].decode())
            pos += length
        else:
            raise ValueError(f"unknown record kind {kind} for {name!r}")
    return out


@dataclass
class AgentState:
    """Everything needed to resume training: both nets, both optimisers, RNG."""

    policy: GaussianPolicy
    value: ValueNet
    adam_actor: AdamState
    adam_critic: AdamState
    rng: np.random.Generator
    extra: dict = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        rec = {}
        for i, p in enumerate(self.policy.net.params):
            rec[f"actor/{i}"] = p
        rec["actor/log_std"] = self.policy.log_std
        for i, p in enumerate(self.value.net.params):
            rec[f"critic/{i}"] = p
        for tag, st in (("adam_actor", self.adam_actor), ("adam_critic", self.adam_critic)):
            for i, (m, v) in enumerate(zip(st.m, st.v)):
                rec[f"{tag}/m/{i}"] = m
                rec[f"{tag}/v/{i}"] = v
        rec["meta"] = {
            "actor_sizes": list(self.policy.net.sizes),
            "critic_sizes": list(self.value.net.sizes),
            "adam": {tag: [st.t, st.beta1, st.beta2, st.eps]
                     for tag, st in (("adam_actor", self.adam_actor), ("adam_critic", self.adam_critic))},
            "extra": self.extra,
        }
        rec["rng"] = self.rng.bit_generator.state
        return dumps_checkpoint(rec)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "AgentState":
        rec = loads_checkpoint(blob)
        meta = rec["meta"]
        a_sizes, c_sizes = meta["actor_sizes"], meta["critic_sizes"]
        n_a, n_c = 2 * (len(a_sizes) - 1), 2 * (len(c_sizes) - 1)
        policy = GaussianPolicy.__new__(GaussianPolicy)
        policy.net = MLP(a_sizes, params=[rec[f"actor/{i}"] for i in range(n_a)])
        policy.log_std = rec["actor/log_std"]
        value = ValueNet.__new__(ValueNet)
        value.net = MLP(c_sizes, params=[rec[f"critic/{i}"] for i in range(n_c)])
        states = {}
        for tag, n in (("adam_actor", n_a + 1), ("adam_critic", n_c)):
            t, b1, b2, eps = meta["adam"][tag]
            states[tag] = AdamState([rec[f"{tag}/m/{i}"] for i in range(n)], [rec[f"{tag}/v/{i}"] for i in range(n)],
                                    t, b1, b2, eps)
        rng = np.random.default_rng()
        rng.bit_generator.state = rec["rng"]
        return cls(policy, value, states["adam_actor"], states["adam_critic"], rng, meta.get("extra", {}))
