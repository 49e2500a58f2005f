"""Compiled and numpy kernels must agree on random inputs."""
import numpy as np
import pytest

from vlcsee import _pykernels, kernels

_ck = pytest.importorskip("vlcsee._ckernels")


def _inputs(rng, N=4, L=3, K=2):
    h = rng.uniform(1e-6, 1e-5, (K, L))
    g = rng.uniform(0, 2e-6, (L, N, K))
    he = rng.uniform(1e-6, 1e-5, L)
    v = rng.normal(size=(K + 1, L))
    return h, g, he, v


def test_backend_selection():
    assert kernels.BACKEND in ("python", "cython")


def test_effective_channel_parity(rng):
    for _ in range(50):
        h, g, _, _ = _inputs(rng)
        q = np.zeros((4, 6))
        for n in range(4):
            p = rng.integers(0, 7)
            if p:
                q[n, p - 1] = 1.0
        a = _pykernels.effective_channel(h, g, q)
        b = _ck.effective_channel(h, g, q)
        np.testing.assert_allclose(a, b, rtol=1e-14, atol=0)


def test_project_rows_parity(rng):
    for _ in range(100):
        qt = rng.random((5, 7))
        np.testing.assert_array_equal(_pykernels.project_rows(qt), _ck.project_rows(qt))
    ties = np.array([[0.7, 0.7, 0.1], [0.5, 0.5, 0.5], [0.2, 0.9, 0.9]])
    np.testing.assert_array_equal(_pykernels.project_rows(ties), _ck.project_rows(ties))
    empty = np.zeros((3, 0))
    assert _ck.project_rows(empty).shape == (3, 0)


def test_sinr_terms_parity(rng):
    for K in (1, 2, 3):
        for _ in range(50):
            h, _, he, v = _inputs(rng, K=K)
            noise = np.full(K, 1e-13)
            a = _pykernels.sinr_terms(h, he, v, noise, 1e-13)
            b = _ck.sinr_terms(h, he, v, noise, 1e-13)
            for x, y in zip(a, b):
                np.testing.assert_allclose(x, y, rtol=1e-12, atol=0)


def test_gae_parity(rng):
    for gamma in (0.0, 0.5, 0.99):
        d = rng.normal(size=300)
        dones = (rng.random(300) < 0.05).astype(np.uint8)
        np.testing.assert_allclose(_pykernels.gae(d, gamma, dones), _ck.gae(d, gamma, dones), rtol=1e-13, atol=1e-13)


def test_enumerate_parity(rng):
    h, g, he, v = _inputs(rng, N=3, L=2, K=2)
    v *= 0.3
    c = np.array([0.1, 0.05])
    noise = np.full(2, 1e-13)
    a = _pykernels.enumerate_alignments(h, g, he, v, c, noise, 1e-13, 12.0)
    b = _ck.enumerate_alignments(h, g, he, v, c, noise, 1e-13, 12.0)
    assert len(a[0]) == 125
    for x, y in zip(a[:3], b[:3]):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-300)
    np.testing.assert_array_equal(a[3], b[3])
