"""Shared fixtures: presets and small helper channels used across modules."""

import numpy as np
import pytest

from uwacr.chanmodel import DiscreteChannel
from uwacr.config import default_config, smoke_config


@pytest.fixture(scope="session")
def smoke_cfg():
    return smoke_config()


@pytest.fixture(scope="session")
def default_cfg():
    return default_config()


@pytest.fixture(scope="session")
def ofdm64(smoke_cfg):
    """64-point grid, n_cp=16, 5 RBs of 10 subcarriers."""
    return smoke_cfg.ofdm


def two_tap_channel(ofdm, second_gain=0.5):
    """Channel whose memory fills the cyclic prefix exactly: taps at delay 0
    and delay n_cp. Leaves zero CP slack, so every nonzero sample gap breaks
    orthogonality."""
    h = np.zeros(ofdm.n_cp + 1, dtype=np.complex128)
    h[0] = 1.0
    h[-1] = second_gain
    return DiscreteChannel(h, ofdm.sample_period)


def identity_channel(ofdm):
    return DiscreteChannel(np.array([1.0 + 0.0j]), ofdm.sample_period)
