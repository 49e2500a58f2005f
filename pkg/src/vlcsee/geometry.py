"""Optical channel gains and IRS alignment bookkeeping.

Positions are metres in a room frame with z pointing up.  LEDs face down,
receivers face up, and IRS elements face into the room along their wall's
inward normal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

DOWN = (0.0, 0.0, -1.0)
UP = (0.0, 0.0, 1.0)


class GeometryError(ValueError):
    """Raised for coincident points or malformed scenes."""


@dataclass(frozen=True)
class OpticalParams:
    g_of: float = 1.0
    kappa: float = 1.5
    psi_fov: float = math.radians(75.0)
    omega_half: float = math.radians(60.0)
    area_pd: float = 1e-4
    rho: float = 0.9

    def __post_init__(self):
        problems = []
        if not self.area_pd > 0:
            problems.append("area_pd must be > 0")
        if not 0 < self.psi_fov <= math.pi / 2:
            problems.append("psi_fov must lie in (0, pi/2]")
        if not 0 < self.omega_half < math.pi / 2:
            problems.append("omega_half must lie in (0, pi/2)")
        if not 0 <= self.rho <= 1:
            problems.append("rho must lie in [0, 1]")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def m(self) -> float:
        return lambertian_order(self.omega_half)


def _as_points(points, name) -> np.ndarray:
    arr = np.asarray(points, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(arr)):
        raise GeometryError(f"{name}: non-finite coordinate")
    return arr


@dataclass
class Scene:
    """Positions of every emitter/receiver plus their facing directions."""

    leds: np.ndarray
    irs_elements: np.ndarray
    lus: np.ndarray
    eve: np.ndarray
    irs_normals: np.ndarray | None = None
    room: tuple[float, float, float] = (6.0, 6.0, 3.0)
    led_normal: tuple[float, float, float] = DOWN
    rx_normal: tuple[float, float, float] = UP

    def __post_init__(self):
        self.leds = _as_points(self.leds, "leds")
        self.irs_elements = _as_points(self.irs_elements, "irs_elements")
        self.lus = _as_points(self.lus, "lus")
        self.eve = _as_points(self.eve, "eve")[0]
        if self.irs_normals is None:
            self.irs_normals = np.array([wall_normal(p, self.room) for p in self.irs_elements]).reshape(-1, 3)
        else:
            self.irs_normals = _as_points(self.irs_normals, "irs_normals")
        if len(self.leds) < 1 or len(self.lus) < 1:
            raise GeometryError("need at least one LED and one LU")
        if self.irs_normals.shape != self.irs_elements.shape:
            raise GeometryError("one normal per IRS element required")
        for name, nrm in (("led_normal", self.led_normal), ("rx_normal", self.rx_normal)):
            if abs(np.linalg.norm(nrm) - 1.0) > 1e-9:
                raise GeometryError(f"{name} must be unit length")
        if len(self.irs_normals) and np.max(np.abs(np.linalg.norm(self.irs_normals, axis=1) - 1.0)) > 1e-9:
            raise GeometryError("IRS normals must be unit length")
        everything = np.vstack([self.leds, self.irs_elements, self.lus, self.eve[None, :]])
        lo = -1e-9
        hi = np.asarray(self.room) + 1e-9
        if np.any(everything < lo) or np.any(everything > hi):
            raise GeometryError(f"position outside room {self.room}")

    @property
    def L(self) -> int:
        return len(self.leds)

    @property
    def N(self) -> int:
        return len(self.irs_elements)

    @property
    def K(self) -> int:
        return len(self.lus)


def wall_normal(point, room) -> tuple[float, float, float]:
    """Inward normal of the wall nearest to ``point`` (x or y walls only)."""
    x, y, _ = point
    w, d, _ = room
    dists = {(1.0, 0.0, 0.0): x, (-1.0, 0.0, 0.0): w - x, (0.0, 1.0, 0.0): y, (0.0, -1.0, 0.0): d - y}
    return min(dists, key=dists.get)


@dataclass
class ChannelSet:
    h_los_lu: np.ndarray  # K x L
    h_los_eve: np.ndarray  # L
    g_nlos: np.ndarray  # L x N x K
    h_nlos_eve: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.h_nlos_eve is None:
            self.h_nlos_eve = np.zeros_like(self.h_los_eve)

    @property
    def K(self) -> int:
        return self.h_los_lu.shape[0]

    @property
    def L(self) -> int:
        return self.h_los_lu.shape[1]

    @property
    def N(self) -> int:
        return self.g_nlos.shape[1]


@dataclass
class AlignmentState:
    """Binary IRS assignment in merged form ``q`` (N x LK).

    Column ``k + l*K`` (0-based) marks the element reflecting LED ``l`` to
    LU ``k``; ``a`` (N x K) and ``b`` (N x L) are the factored views.
    """

    q: np.ndarray
    L: int
    K: int

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim != 2 or self.q.shape[1] != self.L * self.K:
            raise ValueError(f"q must be N x {self.L * self.K}, got {self.q.shape}")

    @classmethod
    def empty(cls, N, L, K) -> "AlignmentState":
        return cls(np.zeros((N, L * K)), L, K)

    @classmethod
    def from_factors(cls, a, b) -> "AlignmentState":
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        N, K = a.shape
        L = b.shape[1]
        q = np.zeros((N, L * K))
        for l in range(L):
            for k in range(K):
                q[:, k + l * K] = a[:, k] * b[:, l]
        return cls(q, L, K)

    @property
    def a(self) -> np.ndarray:
        return self.q.reshape(-1, self.L, self.K).sum(axis=1)

    @property
    def b(self) -> np.ndarray:
        return self.q.reshape(-1, self.L, self.K).sum(axis=2)

    def is_valid(self) -> bool:
        q = self.q
        binary = np.all((q == 0) | (q == 1))
        return bool(binary and np.all(q.sum(axis=1) <= 1) and np.all(self.a.sum(axis=1) <= 1)
                    and np.all(self.b.sum(axis=1) <= 1))


def lambertian_order(omega_half: float) -> float:
    c = math.cos(omega_half)
    if not (0.0 < omega_half < math.pi / 2 and 0.0 < c < 1.0):
        raise ValueError(f"half-intensity angle {omega_half} rad outside (0, pi/2)")
    m = -1.0 / math.log2(c)
    # cos(60 deg) is 0.5000000000000001 in binary; snap the canonical case
    if abs(m - round(m)) < 1e-12:
        m = float(round(m))
    return m


def concentrator_gain(psi: float, params: OpticalParams) -> float:
    if 0.0 <= psi <= params.psi_fov:
        return params.kappa**2 / math.sin(params.psi_fov) ** 2
    return 0.0


def _angles(tx, tx_normal, rx, rx_normal):
    d_vec = np.asarray(rx, dtype=float) - np.asarray(tx, dtype=float)
    d = float(np.linalg.norm(d_vec))
    if d == 0.0:
        raise GeometryError("coincident transmitter and receiver")
    cos_phi = float(np.dot(d_vec, tx_normal)) / d
    cos_psi = float(np.dot(-d_vec, rx_normal)) / d
    return d, cos_phi, cos_psi


def _gain(path_len, cos_phi, cos_psi, params: OpticalParams, scale=1.0) -> float:
    if cos_phi <= 0.0 or cos_psi <= 0.0:
        return 0.0
    psi = math.acos(min(1.0, cos_psi))
    f = concentrator_gain(psi, params)
    if f == 0.0:
        return 0.0
    m = params.m
    return (scale * (m + 1.0) * params.area_pd / (2.0 * math.pi * path_len**2)
            * cos_phi**m * cos_psi * params.g_of * f)


def los_gain(tx, rx, params: OpticalParams, tx_normal=DOWN, rx_normal=UP) -> float:
    d, cos_phi, cos_psi = _angles(tx, tx_normal, rx, rx_normal)
    return _gain(d, cos_phi, cos_psi, params)


def nlos_element_gain(led, element, lu, params: OpticalParams, element_normal=(1.0, 0.0, 0.0),
                      led_normal=DOWN, lu_normal=UP) -> float:
    """Specular LED -> element -> LU gain over the combined path length."""
    d1, cos_phi, _ = _angles(led, led_normal, element, element_normal)
    d2, _, cos_psi = _angles(element, element_normal, lu, lu_normal)
    n = np.asarray(element_normal, dtype=float)
    e = np.asarray(element, dtype=float)
    # both ends must sit in front of the mirror
    if np.dot(np.asarray(led) - e, n) <= 0 or np.dot(np.asarray(lu) - e, n) <= 0:
        return 0.0
    return _gain(d1 + d2, cos_phi, cos_psi, params, scale=params.rho)


def build_channel_set(scene: Scene, params: OpticalParams) -> ChannelSet:
    L, N, K = scene.L, scene.N, scene.K
    h_lu = np.zeros((K, L))
    h_eve = np.zeros(L)
    g = np.zeros((L, N, K))
    for l, led in enumerate(scene.leds):
        for k, lu in enumerate(scene.lus):
            try:
                h_lu[k, l] = los_gain(led, lu, params, scene.led_normal, scene.rx_normal)
            except GeometryError as exc:
                raise GeometryError(f"LoS (led={l}, lu={k}): {exc}") from exc
        try:
            h_eve[l] = los_gain(led, scene.eve, params, scene.led_normal, scene.rx_normal)
        except GeometryError as exc:
            raise GeometryError(f"LoS (led={l}, eve): {exc}") from exc
        for n, (elem, nrm) in enumerate(zip(scene.irs_elements, scene.irs_normals)):
            for k, lu in enumerate(scene.lus):
                try:
                    g[l, n, k] = nlos_element_gain(led, elem, lu, params, nrm, scene.led_normal, scene.rx_normal)
                except GeometryError as exc:
                    raise GeometryError(f"NLoS (led={l}, element={n}, lu={k}): {exc}") from exc
    return ChannelSet(h_lu, h_eve, g, np.zeros(L))


def effective_channel(ch: ChannelSet, alignment: AlignmentState) -> np.ndarray:
    """K x L channel: LoS plus every aligned element's reflected gain."""
    q = alignment.q
    if q.shape != (ch.N, ch.L * ch.K):
        raise ValueError(f"alignment shape {q.shape} does not match channel (N={ch.N}, LK={ch.L * ch.K})")
    return kernels.effective_channel(ch.h_los_lu, ch.g_nlos, q)


def project_alignment(q_tilde) -> np.ndarray:
    """Minimum-distance projection of each relaxed row onto {0, e_1, ..., e_LK}.

    Ties go to the zero row, then to the lowest column.
    """
    q_tilde = np.asarray(q_tilde, dtype=float)
    if q_tilde.ndim != 2:
        raise ValueError("q_tilde must be a 2-D array")
    return kernels.project_rows(q_tilde)


def pair_indices(p_bar: int, L: int, K: int) -> tuple[int, int]:
    """1-based merged column -> 1-based (LED, LU) pair."""
    if not 1 <= p_bar <= L * K:
        raise IndexError(f"merged index {p_bar} outside [1, {L * K}]")
    return (p_bar - 1) // K + 1, (p_bar - 1) % K + 1


def merged_index(l: int, k: int, K: int) -> int:
    return k + (l - 1) * K
