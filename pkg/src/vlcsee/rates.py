"""Power, RSMA rates, secrecy rate, SEE and the constraint checks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import AlignmentState, ChannelSet, effective_channel


@dataclass
class PowerLimits:
    p_max: float = 20.0
    p_circuit: float = 2.0
    u_led: float = 2.0
    i_min: float = 0.0
    i_max: float = 5.0
    qos: np.ndarray = field(default_factory=lambda: np.full(2, 2.0))
    noise_lu: np.ndarray = field(default_factory=lambda: np.full(2, 1e-13))
    noise_eve: float = 1e-13

    def __post_init__(self):
        self.qos = np.atleast_1d(np.asarray(self.qos, dtype=float))
        self.noise_lu = np.atleast_1d(np.asarray(self.noise_lu, dtype=float))
        problems = []
        if not self.p_max > 0:
            problems.append("p_max must be > 0")
        if self.i_min > self.i_max:
            problems.append("i_min must not exceed i_max")
        if np.any(self.qos < 0):
            problems.append("qos thresholds must be >= 0")
        if np.any(self.noise_lu <= 0) or not self.noise_eve > 0:
            problems.append("noise powers must be > 0")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class RsmaDecision:
    """Row 0 of ``v`` is the common beamformer, rows 1..K the private ones."""

    v: np.ndarray  # (K+1) x L, amperes
    dc_bias: np.ndarray  # L, amperes
    c: np.ndarray  # K, bit/s/Hz

    def __post_init__(self):
        self.v = np.atleast_2d(np.asarray(self.v, dtype=float))
        self.dc_bias = np.atleast_1d(np.asarray(self.dc_bias, dtype=float))
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))

    @classmethod
    def zeros(cls, K, L) -> "RsmaDecision":
        return cls(np.zeros((K + 1, L)), np.zeros(L), np.zeros(K))


@dataclass
class RateReport:
    r_common: np.ndarray
    r_private: np.ndarray
    r_eve_common: float
    r_eve_private: np.ndarray
    r_total_per_lu: np.ndarray
    secrecy_total: float
    see: float
    p_total: float
    # (e/2pi) * SINR, i.e. the argument added to 1 inside each log2
    sinr_common: np.ndarray = None
    sinr_private: np.ndarray = None
    sinr_eve_common: float = 0.0
    sinr_eve_private: np.ndarray = None


def total_power(d: RsmaDecision, lim: PowerLimits) -> float:
    return float(np.sum(d.v**2) + lim.u_led * np.sum(d.dc_bias) + lim.p_circuit)


def linear_region_margin(d: RsmaDecision, lim: PowerLimits) -> np.ndarray:
    """Per-LED slack of the no-clipping constraint; negative means violated."""
    delta = np.minimum(d.dc_bias - lim.i_min, lim.i_max - d.dc_bias)
    return delta - np.abs(d.v).sum(axis=0)


def lu_rates(h_eff, d: RsmaDecision, lim: PowerLimits):
    g_c, g_p, _, _ = kernels.sinr_terms(h_eff, np.zeros(h_eff.shape[1]), d.v, lim.noise_lu, lim.noise_eve)
    return np.log2(1.0 + g_c), np.log2(1.0 + g_p)


def eve_rates(h_eve, d: RsmaDecision, lim: PowerLimits):
    K = d.v.shape[0] - 1
    dummy = np.zeros((K, d.v.shape[1]))
    _, _, ge_c, ge_p = kernels.sinr_terms(dummy, h_eve, d.v, lim.noise_lu, lim.noise_eve)
    return float(np.log2(1.0 + ge_c)), np.log2(1.0 + ge_p)


def secrecy_and_see(r_common, r_private, r_eve_common, r_eve_private, c, p_total) -> RateReport:
    c = np.asarray(c, dtype=float)
    secrecy = max(float(np.sum(c)) - r_eve_common, 0.0) + float(np.sum(np.maximum(r_private - r_eve_private, 0.0)))
    return RateReport(
        r_common=np.asarray(r_common),
        r_private=np.asarray(r_private),
        r_eve_common=float(r_eve_common),
        r_eve_private=np.asarray(r_eve_private),
        r_total_per_lu=c + r_private,
        secrecy_total=secrecy,
        see=secrecy / p_total,
        p_total=float(p_total),
    )


def evaluate(h_eff, h_eve, d: RsmaDecision, lim: PowerLimits) -> RateReport:
    """Every rate plus SEE in one kernel call."""
    g_c, g_p, ge_c, ge_p = kernels.sinr_terms(h_eff, h_eve, d.v, lim.noise_lu, lim.noise_eve)
    rep = secrecy_and_see(np.log2(1.0 + g_c), np.log2(1.0 + g_p), float(np.log2(1.0 + ge_c)),
                          np.log2(1.0 + ge_p), d.c, total_power(d, lim))
    rep.sinr_common, rep.sinr_private = g_c, g_p
    rep.sinr_eve_common, rep.sinr_eve_private = float(ge_c), ge_p
    return rep


CONSTRAINTS = ("qos", "common", "power", "linear", "alignment", "c_nonneg", "delta_nonneg")


def feasibility(d: RsmaDecision, rates: RateReport, lim: PowerLimits,
                alignment: AlignmentState | None = None) -> dict[str, bool]:
    """Verdict per constraint of the original problem, keyed by ``CONSTRAINTS``."""
    delta = np.minimum(d.dc_bias - lim.i_min, lim.i_max - d.dc_bias)
    return {
        "qos": bool(np.all(rates.r_total_per_lu >= lim.qos)),
        "common": bool(np.sum(d.c) <= np.min(rates.r_common)),
        "power": bool(rates.p_total <= lim.p_max),
        "linear": bool(np.all(linear_region_margin(d, lim) >= 0)),
        "alignment": True if alignment is None else alignment.is_valid(),
        "c_nonneg": bool(np.all(d.c >= 0)),
        "delta_nonneg": bool(np.all(delta >= 0)),
    }


class InstanceTooLarge(ValueError):
    pass


@dataclass
class OracleResult:
    best_see: float
    best: AlignmentState
    feasible: bool
    see: np.ndarray  # every configuration, itertools.product order
    feasible_mask: np.ndarray
    n_configs: int


ORACLE_LIMIT = 10**6


def config_to_alignment(index: int, N: int, L: int, K: int) -> AlignmentState:
    base = L * K + 1
    q = np.zeros((N, L * K))
    for n in range(N - 1, -1, -1):
        index, p = divmod(index, base)
        if p:
            q[n, p - 1] = 1.0
    return AlignmentState(q, L, K)


def exhaustive_alignment_oracle(ch: ChannelSet, d: RsmaDecision, lim: PowerLimits) -> OracleResult:
    """Best SEE over every binary alignment for a fixed decision (tiny instances only).

    Feasibility covers every constraint; power and linear-region verdicts do
    not depend on the alignment so they are evaluated once.  When nothing is
    feasible the best infeasible configuration is returned with
    ``feasible=False``.
    """
    n_cfg = (ch.L * ch.K + 1) ** ch.N
    if n_cfg > ORACLE_LIMIT:
        raise InstanceTooLarge(f"{n_cfg} alignments exceed the oracle limit of {ORACLE_LIMIT}")
    p_total = total_power(d, lim)
    see, _, totals, common_ok = kernels.enumerate_alignments(
        ch.h_los_lu, ch.g_nlos, ch.h_los_eve, d.v, d.c, lim.noise_lu, lim.noise_eve, p_total)
    static_ok = (p_total <= lim.p_max and np.all(linear_region_margin(d, lim) >= 0) and np.all(d.c >= 0))
    mask = common_ok & np.all(totals >= lim.qos, axis=1) & bool(static_ok)
    feasible = bool(mask.any())
    pool = np.where(mask, see, -np.inf) if feasible else see
    idx = int(np.argmax(pool))
    return OracleResult(float(see[idx]), config_to_alignment(idx, ch.N, ch.L, ch.K), feasible, see, mask, n_cfg)


def see_for_alignment(ch: ChannelSet, d: RsmaDecision, lim: PowerLimits, alignment: AlignmentState) -> float:
    return evaluate(effective_channel(ch, alignment), ch.h_los_eve, d, lim).see
