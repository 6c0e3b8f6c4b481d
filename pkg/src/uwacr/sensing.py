"""Receiver-side observables: spectrum snapshots and beacon-derived CQI.

The agent never sees channels or interferer identities, only (a) a DFT
snapshot of whatever is on the water during a listening window, truncated to
the band of interest and split into real/imaginary columns, and (b) per-RB
channel quality estimated from the sink's known pilot beacon. Both are
distorted by asynchronous interference; that distortion is the interesting
part of the problem, so nothing here tries to remove it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import BeaconSpec
from .phy import OfdmParams, ReceivedSymbol, unitary_dft

__all__ = [
    "SensingConfig",
    "Observation",
    "observe_spectrum",
    "rb_spectrum_rows",
    "beacon_cqi",
    "energy_detect",
    "spectrum_csv_rows",
]

_WINDOWS = {
    "rect": lambda n: np.ones(n),
    "hann": np.hanning,
    "hamming": np.hamming,
}


@dataclass(frozen=True)
class SensingConfig:
    """Spectrum snapshot shape: kept bin count, taper, and dwell length."""

    n_sens: int = 128
    window: str = "rect"
    sensing_symbols: int = 1
    beacon_symbols: int = 1

    def __post_init__(self):
        if self.n_sens < 1:
            raise ValueError("n_sens must be >= 1")
        if self.window not in _WINDOWS:
            raise ValueError(f"unknown window {self.window!r}")
        if self.sensing_symbols < 1:
            raise ValueError("sensing_symbols must be >= 1")
        if self.beacon_symbols < 1:
            raise ValueError("beacon_symbols must be >= 1")

    def validate_against(self, ofdm: OfdmParams) -> None:
        if self.n_sens > ofdm.n_fft:
            raise ValueError(f"n_sens {self.n_sens} exceeds n_fft {ofdm.n_fft}")
        lo = -(self.n_sens // 2)
        hi = lo + self.n_sens
        for bins in ofdm.rb_bins_shifted:
            if bins.min() < lo or bins.max() >= hi:
                raise ValueError("sensing band does not cover the occupied RBs")


@dataclass
class Observation:
    """What the decision maker sees: per-RB CQI, the spectrum matrix, and
    (when the front end provides it) per-RB energy of the listening window.

    The CQI comes from a pilot exchange and is blind to interference arriving
    at the sensor, so a band carrying a neighbor reads as unusually strong.
    The listening-window energy is the complementary view: it contains no
    pilot and lights up exactly where neighbors transmit.
    """

    cqi: np.ndarray        # (n_rb,) linear SNR estimates
    spectrum: np.ndarray   # (n_sens, 2) real/imaginary columns
    band_energy: np.ndarray | None = None  # (n_rb,) listening-window energy

    def __post_init__(self):
        self.cqi = np.asarray(self.cqi, dtype=float)
        self.spectrum = np.asarray(self.spectrum, dtype=float)
        if self.cqi.ndim != 1:
            raise ValueError("cqi must be a vector")
        if self.spectrum.ndim != 2 or self.spectrum.shape[1] != 2:
            raise ValueError("spectrum must be (n_sens, 2)")
        if np.any(self.cqi < 0):
            raise ValueError("negative CQI")
        if self.band_energy is not None:
            self.band_energy = np.asarray(self.band_energy, dtype=float)
            if self.band_energy.shape != self.cqi.shape:
                raise ValueError("band_energy must match cqi in shape")
            if np.any(self.band_energy < 0):
                raise ValueError("negative band energy")


def observe_spectrum(samples: np.ndarray, cfg: SensingConfig, ofdm: OfdmParams) -> np.ndarray:
    """DFT snapshot of a listening window.

    Takes sensing_symbols consecutive n_fft windows, applies the taper,
    averages the unitary DFTs coherently, reorders DC-centered, and keeps the
    n_sens bins around the occupied band's center. Output is (n_sens, 2)
    with real and imaginary parts as columns.
    """
    cfg.validate_against(ofdm)
    samples = np.asarray(samples, dtype=np.complex128)
    needed = ofdm.n_fft * cfg.sensing_symbols
    if samples.size < needed:
        raise ValueError(f"need at least {needed} samples, got {samples.size}")
    taper = _WINDOWS[cfg.window](ofdm.n_fft)
    segs = samples[:needed].reshape(cfg.sensing_symbols, ofdm.n_fft) * taper
    spec = unitary_dft(segs, axis=-1).mean(axis=0)
    shifted = np.fft.fftshift(spec)
    center = ofdm.n_fft // 2
    lo = center - cfg.n_sens // 2
    kept = shifted[lo : lo + cfg.n_sens]
    return np.stack([kept.real, kept.imag], axis=1)


def rb_spectrum_rows(cfg: SensingConfig, ofdm: OfdmParams) -> list:
    """Row indices of each RB's bins inside the spectrum matrix."""
    cfg.validate_against(ofdm)
    offset = cfg.n_sens // 2
    return [bins + offset for bins in ofdm.rb_bins_shifted]


def beacon_cqi(
    received: ReceivedSymbol | np.ndarray,
    beacon: BeaconSpec,
    sigma2: float,
    ofdm: OfdmParams,
    data_power: float = 1.0,
) -> np.ndarray:
    """Per-RB CQI estimated from one received beacon symbol.

    Pilot-aided least squares per bin (D_hat = Y/p), then the same
    interference-blind mean SNR the oracle's CQI defines. Whatever corrupts
    the beacon (noise, asynchronous neighbors) lands in D_hat and inflates
    the estimate; that bias is deliberate, not a defect.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    covered = np.zeros(ofdm.n_fft, dtype=bool)
    covered[beacon.bins] = True
    if not all(covered[bins].all() for bins in ofdm.rb_bins):
        raise ValueError("beacon does not cover every RB")
    y = received.total if isinstance(received, ReceivedSymbol) else np.asarray(received)
    spec = unitary_dft(y)
    out = np.empty(ofdm.n_rb)
    for r, bins in enumerate(ofdm.rb_bins):
        d_hat = spec[bins] / beacon.pilots[bins]
        out[r] = float(np.mean(data_power * np.abs(d_hat) ** 2 / sigma2))
    return out


def energy_detect(spectrum: np.ndarray, cfg: SensingConfig, ofdm: OfdmParams) -> np.ndarray:
    """Per-RB mean energy of the spectrum matrix rows (re^2 + im^2)."""
    spectrum = np.asarray(spectrum, dtype=float)
    power = spectrum[:, 0] ** 2 + spectrum[:, 1] ** 2
    return np.asarray([float(np.mean(power[rows])) for rows in rb_spectrum_rows(cfg, ofdm)])


def spectrum_csv_rows(spectrum: np.ndarray, cfg: SensingConfig) -> list:
    """Spectrum matrix as (shifted_bin, re, im) tuples for CSV export."""
    lo = -(cfg.n_sens // 2)
    return [(lo + i, float(spectrum[i, 0]), float(spectrum[i, 1])) for i in range(cfg.n_sens)]
