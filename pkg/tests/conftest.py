import numpy as np
import pytest

from vlcsee import _pykernels, kernels

try:
    from vlcsee import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = ["python"] + (["cython"] if _ckernels is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every kernel call through one backend for the duration of a test."""
    impl = _pykernels if request.param == "python" else _ckernels
    monkeypatch.setattr(kernels, "_impl", impl)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_channels(rng, N=3, L=2, K=2):
    from vlcsee.geometry import ChannelSet

    return ChannelSet(h_los_lu=rng.uniform(1e-6, 1e-5, (K, L)), h_los_eve=rng.uniform(1e-6, 1e-5, L),
                      g_nlos=rng.uniform(0, 2e-6, (L, N, K)), h_nlos_eve=np.zeros(L))


TINY_TOML = """\
[irs]
n_elements = 4

[trainer]
total_steps = 96
update_interval = 32
batch_on = 32
batch_off = 16
buffer_size = 96
epochs_on = 2
epochs_off = 1
hidden = [16, 16]

[env]
episode_length = 64

[experiment]
smoothing_window = 2
"""


def tiny_config(**overrides):
    """A seconds-scale experiment on the default room for harness and CLI tests."""
    from vlcsee.config import loads_config

    cfg = loads_config(TINY_TOML)
    for k, v in overrides.items():
        cfg.set(k, v)
    return cfg.validate()
