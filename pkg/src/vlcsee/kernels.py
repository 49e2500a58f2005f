"""Kernel dispatch: compiled extension when importable, numpy fallback otherwise.

Set ``VLCSEE_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("VLCSEE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def effective_channel(h_los, g_nlos, q):
    return _impl.effective_channel(_c(h_los), _c(g_nlos), _c(q))


def project_rows(q_tilde):
    return _impl.project_rows(_c(q_tilde))


def sinr_terms(h_eff, h_eve, v, noise_lu, noise_eve):
    return _impl.sinr_terms(_c(h_eff), _c(h_eve), _c(v), _c(noise_lu), float(noise_eve))


def gae(delta, gamma, dones=None):
    delta = _c(delta)
    if dones is None:
        dones = np.zeros(len(delta), dtype=np.uint8)
    return _impl.gae(delta, float(gamma), np.ascontiguousarray(dones, dtype=np.uint8))


def enumerate_alignments(h_los, g_nlos, h_eve, v, c, noise_lu, noise_eve, p_total):
    return _impl.enumerate_alignments(_c(h_los), _c(g_nlos), _c(h_eve), _c(v), _c(c), _c(noise_lu),
                                      float(noise_eve), float(p_total))
