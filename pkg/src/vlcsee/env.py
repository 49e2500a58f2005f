"""The resource-allocation MDP: action decoding, state layout and gated reward.

Action layout (length NLK + 2K + L + 1)::

    [ beam logits (K+1) | DC logits (L) | alignment logits (N*L*K) | common-rate logits (K) ]

Beam logit 0 drives the common stream, logit k the k-th private stream.
Alignment logits are row-major over an N x LK matrix whose column
``k + l*K`` (0-based) is the LED l -> LU k pair.

State layout (length NLK + 5K + L + 3)::

    [ previous action squashed to [0,1] (NLK+2K+L+1) | LU common SINR (K) |
      LU private SINR (K) | Eve common SINR (1) | Eve private SINR (K) | previous reward (1) ]

Every SINR is stored as (e/2pi) * SINR, the exact quantity inside log2(1 + .).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import AlignmentState, ChannelSet, effective_channel, project_alignment
from .rates import PowerLimits, RateReport, RsmaDecision, evaluate, feasibility

GATES = ("power", "common", "qos", "linear")
ZF_RCOND = 1e-12


class RankDeficientError(np.linalg.LinAlgError):
    """Effective channel too ill-conditioned for zero forcing."""


@dataclass(frozen=True)
class ActionLayout:
    N: int
    L: int
    K: int

    @property
    def dim(self) -> int:
        return self.N * self.L * self.K + 2 * self.K + self.L + 1

    @property
    def beam(self) -> slice:
        return slice(0, self.K + 1)

    @property
    def dc(self) -> slice:
        s = self.K + 1
        return slice(s, s + self.L)

    @property
    def align(self) -> slice:
        s = self.K + 1 + self.L
        return slice(s, s + self.N * self.L * self.K)

    @property
    def com(self) -> slice:
        s = self.K + 1 + self.L + self.N * self.L * self.K
        return slice(s, s + self.K)


@dataclass(frozen=True)
class StateLayout:
    N: int
    L: int
    K: int

    @property
    def action(self) -> ActionLayout:
        return ActionLayout(self.N, self.L, self.K)

    @property
    def dim(self) -> int:
        return self.action.dim + 3 * self.K + 1 + 1

    def blocks(self) -> dict[str, slice]:
        a = self.action.dim
        K = self.K
        return {
            "action": slice(0, a),
            "sinr_common": slice(a, a + K),
            "sinr_private": slice(a + K, a + 2 * K),
            "sinr_eve_common": slice(a + 2 * K, a + 2 * K + 1),
            "sinr_eve_private": slice(a + 2 * K + 1, a + 3 * K + 1),
            "reward": slice(a + 3 * K + 1, a + 3 * K + 2),
        }

    @property
    def sinr(self) -> slice:
        a = self.action.dim
        return slice(a, a + 3 * self.K + 1)


def squash(x):
    return 0.5 * (np.tanh(x) + 1.0)


def build_state(prev_action_squashed, sinrs, prev_reward, layout: StateLayout) -> np.ndarray:
    """Concatenate (action block, SINR block, reward) in the documented order.

    ``sinrs`` is (lu_common[K], lu_private[K], eve_common, eve_private[K]).
    """
    g_c, g_p, ge_c, ge_p = sinrs
    parts = [np.asarray(prev_action_squashed, dtype=float).ravel(), np.asarray(g_c, dtype=float).ravel(),
             np.asarray(g_p, dtype=float).ravel(), np.atleast_1d(np.asarray(ge_c, dtype=float)).ravel(),
             np.asarray(ge_p, dtype=float).ravel(), np.atleast_1d(float(prev_reward))]
    expected = (layout.action.dim, layout.K, layout.K, 1, layout.K, 1)
    got = tuple(len(p) for p in parts)
    if got != expected:
        raise ValueError(f"state block lengths {got} != {expected}")
    return np.concatenate(parts)


def split_state(state, layout: StateLayout) -> dict[str, np.ndarray]:
    state = np.asarray(state)
    if state.shape != (layout.dim,):
        raise ValueError(f"state length {state.shape} != ({layout.dim},)")
    return {name: state[s] for name, s in layout.blocks().items()}


def mrt_direction(h_eff) -> np.ndarray:
    s = h_eff.sum(axis=0)
    n = np.linalg.norm(s)
    if n == 0.0:
        raise RankDeficientError("all LU channels vanish; MRT direction undefined")
    return s / n


def zf_directions(h_eff) -> np.ndarray:
    """Columns of H^T (H H^T)^-1 jointly normalised by the Frobenius norm, as K x L rows."""
    gram = h_eff @ h_eff.T
    eig = np.linalg.eigvalsh(gram)
    if eig[-1] <= 0.0 or eig[0] < ZF_RCOND * eig[-1]:
        raise RankDeficientError(f"HH^T eigenvalue ratio {eig[0] / eig[-1] if eig[-1] > 0 else 0.0:.3e}")
    pinv = h_eff.T @ np.linalg.inv(gram)  # L x K
    return (pinv / np.linalg.norm(pinv)).T


def mrt_private_directions(h_eff) -> np.ndarray:
    norms = np.linalg.norm(h_eff, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise RankDeficientError("an LU channel vanishes; MRT direction undefined")
    return h_eff / norms


@dataclass
class Decoded:
    decision: RsmaDecision
    alignment: AlignmentState
    q_relaxed: np.ndarray
    beam_magnitude: np.ndarray  # decoded ||v_i|| scalars before direction scaling
    h_eff: np.ndarray
    r_common_min: float


def decode_action(raw, ch: ChannelSet, lim: PowerLimits, *, mrt_only=False, sdma=False,
                  irs_off=False) -> Decoded:
    """Map raw network outputs to a decision that meets the simple constraints by construction."""
    layout = ActionLayout(ch.N, ch.L, ch.K)
    raw = np.asarray(raw, dtype=float)
    if raw.shape != (layout.dim,):
        raise ValueError(f"raw action length {raw.shape} != ({layout.dim},)")
    N, L, K = ch.N, ch.L, ch.K

    q_relaxed = squash(raw[layout.align]).reshape(N, L * K)
    if irs_off:
        alignment = AlignmentState.empty(N, L, K)
    else:
        alignment = AlignmentState(project_alignment(q_relaxed), L, K)
    h = effective_channel(ch, alignment)

    mag = np.sqrt(lim.p_max) * squash(raw[layout.beam])
    directions = np.empty((K + 1, L))
    directions[0] = mrt_direction(h)
    directions[1:] = mrt_private_directions(h) if mrt_only else zf_directions(h)
    if sdma:
        mag[0] = 0.0
    v = mag[:, None] * directions

    dc = lim.i_max * squash(raw[layout.dc])
    d = RsmaDecision(v, dc, np.zeros(K))
    rep = evaluate(h, ch.h_los_eve, d, lim)
    r_min = float(np.min(rep.r_common))
    if not sdma:
        d.c = r_min * squash(raw[layout.com])
    return Decoded(d, alignment, q_relaxed, mag, h, r_min)


def gates(verdicts: dict[str, bool]) -> dict[str, int]:
    return {g: int(verdicts[g]) for g in GATES}


def reward(report: RateReport, verdicts: dict[str, bool]) -> float:
    r = report.see
    for g in GATES:
        r *= 1.0 if verdicts[g] else 0.0
    return r


@dataclass
class StepOutcome:
    state: np.ndarray
    reward: float
    done: bool
    info: dict


class VlcEnv:
    """Static-channel environment; the state only echoes the last action and its SINRs."""

    def __init__(self, channels: ChannelSet, limits: PowerLimits, *, episode_length=2048,
                 mrt_only=False, sdma=False, irs_off=False):
        if len(limits.qos) != channels.K or len(limits.noise_lu) != channels.K:
            raise ValueError("per-LU limits must have length K")
        self.channels = channels
        self.limits = limits
        self.episode_length = int(episode_length)
        self.mrt_only = mrt_only
        self.sdma = sdma
        self.irs_off = irs_off
        self.layout = StateLayout(channels.N, channels.L, channels.K)
        self._sinrs = None
        self._t = 0
        self.reset()

    @property
    def obs_dim(self) -> int:
        return self.layout.dim

    @property
    def act_dim(self) -> int:
        return self.layout.action.dim

    def features(self, state) -> np.ndarray:
        """Network input: the state with its SINR block compressed by log1p."""
        x = np.array(state, dtype=float, copy=True)
        s = self.layout.sinr
        x[..., s] = np.log1p(x[..., s])
        return x

    def warm_start_action(self, grid=np.linspace(-3.0, 1.0, 9), com_grid=(-2.0, -1.0, 0.0)) -> np.ndarray:
        """Best action on a coarse grid of block-uniform logits (alignment logits 0).

        Zero logits draw ~P_max of beam power plus half-range DC current and
        fail the power gate, so training starts from this point instead.
        """
        lay = self.layout.action
        best_r, best = -1.0, np.zeros(self.act_dim)
        for b in grid:
            for dc in grid:
                for c in com_grid:
                    a = np.zeros(self.act_dim)
                    a[lay.beam] = b
                    a[lay.dc] = dc
                    a[lay.com] = c
                    r, _ = self.evaluate(a)
                    if r > best_r:
                        best_r, best = r, a
        return best

    def reset(self) -> np.ndarray:
        K = self.channels.K
        self._sinrs = (np.zeros(K), np.zeros(K), 0.0, np.zeros(K))
        self._t = 0
        self.state = np.zeros(self.obs_dim)
        return self.state

    def decode(self, raw) -> Decoded:
        return decode_action(raw, self.channels, self.limits, mrt_only=self.mrt_only, sdma=self.sdma,
                             irs_off=self.irs_off)

    def evaluate(self, raw) -> tuple[float, dict]:
        """Reward and diagnostics for ``raw`` without advancing the episode."""
        try:
            dec = self.decode(raw)
        except RankDeficientError as exc:
            return 0.0, {"decode_error": str(exc), "gates": dict.fromkeys(GATES, 0)}
        rep = evaluate(dec.h_eff, self.channels.h_los_eve, dec.decision, self.limits)
        verdicts = feasibility(dec.decision, rep, self.limits, dec.alignment)
        return reward(rep, verdicts), {"decode_error": None, "report": rep, "verdicts": verdicts,
                                       "gates": gates(verdicts), "decoded": dec}

    def step(self, raw) -> StepOutcome:
        r, info = self.evaluate(raw)
        if info["decode_error"] is None:
            rep = info["report"]
            self._sinrs = (rep.sinr_common, rep.sinr_private, rep.sinr_eve_common, rep.sinr_eve_private)
        self.state = build_state(squash(np.asarray(raw, dtype=float)), self._sinrs, r, self.layout)
        self._t += 1
        done = self._t >= self.episode_length
        return StepOutcome(self.state, r, done, info)
