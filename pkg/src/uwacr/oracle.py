"""Exact post-equalization performance oracles.

Everything here is second-moment arithmetic, not simulation: with Gaussian
payloads the interference hitting a victim window is a zero-mean Gaussian
vector whose covariance is a finite sum of windowed-convolution quadratic
forms, so per-subcarrier SINR has a closed form. A Monte-Carlo estimator over
the time-domain synthesis path is kept alongside as the independent
cross-check; it shares no arithmetic with the covariance route.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chanmodel import DiscreteChannel
from .phy import (
    CirculantOperator,
    DataSymbol,
    OfdmParams,
    ReceivedSymbol,
    build_circulant,
    fft_convolve,
    overlapping_symbol_range,
    segment_matrix,
    unitary_dft,
)

__all__ = [
    "SingularChannelError",
    "SinrReport",
    "GroundTruth",
    "BeaconSpec",
    "default_beacon",
    "equalize",
    "interference_covariance_diag",
    "sinr_report",
    "subcarrier_sinr",
    "packet_rate",
    "compute_cqi",
    "ground_truth",
    "monte_carlo_sinr",
]

DIAG_FLOOR = 1e-9


class SingularChannelError(ValueError):
    """Channel frequency response vanishes on a bin that must be equalized."""


@dataclass
class SinrReport:
    """Per-symbol, per-subcarrier post-equalization SINR for one packet."""

    alloc: np.ndarray
    sinr: np.ndarray  # shape (symbols_per_packet, len(alloc)), linear scale

    def __post_init__(self):
        self.alloc = np.asarray(self.alloc, dtype=int)
        self.sinr = np.atleast_2d(np.asarray(self.sinr, dtype=float))
        if self.sinr.shape[1] != self.alloc.size:
            raise ValueError("SINR column count must match the allocation")
        if np.any(self.sinr < 0):
            raise ValueError("negative SINR")

    @property
    def rate(self) -> float:
        """Mean spectral efficiency over all stored entries, bits/s/Hz."""
        return float(np.mean(np.log2(1.0 + self.sinr)))


def packet_rate(report: SinrReport) -> float:
    return report.rate


@dataclass
class GroundTruth:
    """Omniscient per-RB availability and achievable rate snapshot."""

    v_rb: np.ndarray    # 1 where the RB is free of interferers
    v_rate: np.ndarray  # achievable rate if the node transmitted there; 0 when occupied

    def __post_init__(self):
        self.v_rb = np.asarray(self.v_rb, dtype=int)
        self.v_rate = np.asarray(self.v_rate, dtype=float)
        if self.v_rb.shape != self.v_rate.shape:
            raise ValueError("shape mismatch")
        if np.any((self.v_rb != 0) & (self.v_rb != 1)):
            raise ValueError("v_rb entries must be 0/1")
        if np.any(self.v_rate < 0):
            raise ValueError("negative rate")
        if np.any((self.v_rb == 0) & (self.v_rate != 0)):
            raise ValueError("occupied RBs must report zero rate")

    @property
    def any_free(self) -> bool:
        return bool(self.v_rb.any())

    @property
    def best_rb(self) -> int:
        return int(np.argmax(self.v_rate))


@dataclass
class BeaconSpec:
    """Known full-band pilot symbol broadcast on every RB bin."""

    pilots: np.ndarray      # full n_fft vector, unit-modulus * sqrt(power) on bins
    bins: np.ndarray
    power: float = 1.0
    period_s: float = 1.0

    def __post_init__(self):
        self.pilots = np.asarray(self.pilots, dtype=np.complex128)
        self.bins = np.asarray(self.bins, dtype=int)
        if np.any(np.abs(self.pilots[self.bins]) == 0):
            raise ValueError("beacon pilots must be nonzero on their bins")

    def data_symbol(self) -> DataSymbol:
        return DataSymbol(self.pilots, self.bins, self.power)


def default_beacon(ofdm: OfdmParams, power: float = 1.0, seed: int = 7) -> BeaconSpec:
    """QPSK pilots on all RB bins, fixed known sequence."""
    rng = np.random.default_rng(seed)
    bins = ofdm.occupied_bins
    phases = rng.integers(0, 4, size=bins.size) * (np.pi / 2.0) + np.pi / 4.0
    pilots = np.zeros(ofdm.n_fft, dtype=np.complex128)
    pilots[bins] = np.sqrt(power) * np.exp(1j * phases)
    return BeaconSpec(pilots, bins, power)


def equalize(
    received: ReceivedSymbol | np.ndarray,
    circ: CirculantOperator,
    bins: np.ndarray | None = None,
    floor: float = DIAG_FLOOR,
) -> np.ndarray:
    """One-tap zero-forcing: D^-1 F y with D the channel's DFT eigenvalues.

    Checks |D| >= floor on the bins that matter (all bins when bins is None).
    """
    y = received.total if isinstance(received, ReceivedSymbol) else np.asarray(received)
    check = np.abs(circ.diag if bins is None else circ.diag[np.asarray(bins, dtype=int)])
    if np.any(check < floor):
        k = int(np.argmin(check))
        raise SingularChannelError(f"|D| = {check[k]:.3e} below floor {floor:.1e}")
    # bins outside the check may divide by ~0; their values carry no guarantee
    with np.errstate(divide="ignore", invalid="ignore"):
        return unitary_dft(y) / circ.diag


def interference_covariance_diag(
    interferers: list,
    ofdm: OfdmParams,
    window_start: int,
) -> np.ndarray:
    """Diagonal of F Sigma_J F^h: pre-equalization interference power per bin.

    For each interferer, each of its symbols m that can reach the window
    contributes T_m P T_m^h with T_m the window cut of the channel-convolved
    unit-payload segment. Payloads are independent across symbols and
    subcarriers, so the diagonals add. Interferers transmitting continuously
    make this exact for every victim symbol index (the alignment of window to
    symbol grid is invariant modulo n_sym).
    """
    total = np.zeros(ofdm.n_fft)
    for spec in interferers:
        L = len(spec.channel)
        if L - 1 > ofdm.n_cp:
            raise ValueError("interferer channel memory exceeds the cyclic prefix")
        seg = segment_matrix(ofdm, spec.alloc)                     # (n_sym, n_alloc)
        conv = fft_convolve(seg.T, spec.channel.h).T               # (n_sym + L - 1, n_alloc)
        m_lo, m_hi = overlapping_symbol_range(ofdm, L, spec.gap, window_start)
        for m in range(m_lo, m_hi + 1):
            # conv row j sits at absolute time gap + m*n_sym + j
            idx = window_start - spec.gap - m * ofdm.n_sym + np.arange(ofdm.n_fft)
            valid = (idx >= 0) & (idx < conv.shape[0])
            if not np.any(valid):
                continue
            block = np.zeros((ofdm.n_fft, spec.alloc.size), dtype=np.complex128)
            block[valid] = conv[idx[valid]]
            u = unitary_dft(block, axis=0)
            total += spec.power * np.sum(np.abs(u) ** 2, axis=1)
    return total


def sinr_report(
    victim: DiscreteChannel,
    alloc: np.ndarray,
    power: float,
    interferers: list,
    sigma2: float,
    ofdm: OfdmParams,
    n_symbols: int | None = None,
    floor: float = DIAG_FLOOR,
) -> SinrReport:
    """Closed-form per-subcarrier SINR after one-tap equalization.

    SINR_k = p |D_k|^2 / (I_k + sigma2) with I_k the interference covariance
    diagonal; the noise term is the familiar sigma2 |D_k|^-2 seen after the
    equalizer. Interferers run continuously, so rows are identical across the
    packet and the report simply tiles one row.
    """
    alloc = np.asarray(alloc, dtype=int)
    diag = np.fft.fft(victim.h, ofdm.n_fft)
    mag = np.abs(diag[alloc])
    if np.any(mag < floor):
        raise SingularChannelError("victim channel singular on an allocated bin")
    i_raw = (
        interference_covariance_diag(interferers, ofdm, ofdm.n_cp)
        if interferers
        else np.zeros(ofdm.n_fft)
    )
    with np.errstate(divide="ignore"):
        sinr = power * mag**2 / (i_raw[alloc] + sigma2)
    w = n_symbols if n_symbols is not None else ofdm.symbols_per_packet
    return SinrReport(alloc, np.tile(sinr, (w, 1)))


def subcarrier_sinr(
    k: int,
    victim: DiscreteChannel,
    power: float,
    interferers: list,
    sigma2: float,
    ofdm: OfdmParams,
) -> float:
    """Closed-form SINR on a single subcarrier."""
    report = sinr_report(victim, np.asarray([k]), power, interferers, sigma2, ofdm, n_symbols=1)
    return float(report.sinr[0, 0])


def compute_cqi(
    beacon: BeaconSpec,
    victim: DiscreteChannel,
    sigma2: float,
    ofdm: OfdmParams,
    data_power: float = 1.0,
) -> np.ndarray:
    """Interference-blind per-RB channel quality: mean of p |D_k|^2 / sigma2.

    This is the quantity a beacon-based estimator converges to in a quiet
    band; an asynchronous neighbor makes it an overestimate of what the
    channel will actually deliver. The beacon must cover every RB bin.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    covered = np.zeros(ofdm.n_fft, dtype=bool)
    covered[beacon.bins] = True
    if not all(covered[bins].all() for bins in ofdm.rb_bins):
        raise ValueError("beacon does not cover every RB")
    diag = np.fft.fft(victim.h, ofdm.n_fft)
    snr = data_power * np.abs(diag) ** 2 / sigma2
    return np.asarray([float(np.mean(snr[bins])) for bins in ofdm.rb_bins])


def ground_truth(
    occupied: np.ndarray,
    victim: DiscreteChannel,
    interferers: list,
    sigma2: float,
    ofdm: OfdmParams,
    power: float = 1.0,
    floor: float = DIAG_FLOOR,
) -> GroundTruth:
    """Availability and achievable rate for every RB under the true scene.

    occupied is a boolean mask over RBs. The interference covariance does not
    depend on which RB the victim would use, so it is computed once and read
    per-RB.
    """
    occupied = np.asarray(occupied, dtype=bool)
    if occupied.size != ofdm.n_rb:
        raise ValueError("occupancy mask length must equal n_rb")
    diag = np.fft.fft(victim.h, ofdm.n_fft)
    mag2 = np.abs(diag) ** 2
    if np.any(np.sqrt(mag2[ofdm.occupied_bins]) < floor):
        raise SingularChannelError("victim channel singular inside the occupied band")
    i_raw = (
        interference_covariance_diag(interferers, ofdm, ofdm.n_cp)
        if interferers
        else np.zeros(ofdm.n_fft)
    )
    v_rb = np.zeros(ofdm.n_rb, dtype=int)
    v_rate = np.zeros(ofdm.n_rb)
    with np.errstate(divide="ignore"):
        for r, bins in enumerate(ofdm.rb_bins):
            if occupied[r]:
                continue
            v_rb[r] = 1
            sinr = power * mag2[bins] / (i_raw[bins] + sigma2)
            v_rate[r] = float(np.mean(np.log2(1.0 + sinr)))
    return GroundTruth(v_rb, v_rate)


def monte_carlo_sinr(
    victim: DiscreteChannel,
    alloc: np.ndarray,
    power: float,
    interferers: list,
    sigma2: float,
    ofdm: OfdmParams,
    n_trials: int = 10000,
    seed: int = 0,
    chunk: int = 2048,
) -> np.ndarray:
    """Empirical per-subcarrier SINR from time-domain synthesis.

    Draws fresh payloads and noise, equalizes, and measures the residual
    error power per allocated bin. Deliberately built on the sampling path
    (full stream assembly + linear convolution), not the covariance algebra,
    so the two routes can check each other.
    """
    alloc = np.asarray(alloc, dtype=int)
    circ = build_circulant(victim, ofdm.n_fft)
    if np.any(np.abs(circ.diag[alloc]) < DIAG_FLOOR):
        raise SingularChannelError("victim channel singular on an allocated bin")
    rng = np.random.default_rng(seed)
    window_start = ofdm.n_cp
    err_acc = np.zeros(alloc.size)
    done = 0
    while done < n_trials:
        b = min(chunk, n_trials - done)
        d = np.zeros((b, ofdm.n_fft), dtype=np.complex128)
        d[:, alloc] = np.sqrt(power / 2.0) * (
            rng.standard_normal((b, alloc.size)) + 1j * rng.standard_normal((b, alloc.size))
        )
        body = np.fft.ifft(d, axis=-1) * np.sqrt(ofdm.n_fft)
        y = np.fft.ifft(np.fft.fft(body, axis=-1) * circ.diag, axis=-1)
        for spec in interferers:
            L = len(spec.channel)
            m_lo, m_hi = overlapping_symbol_range(ofdm, L, spec.gap, window_start)
            n_m = m_hi - m_lo + 1
            payload = np.sqrt(spec.power / 2.0) * (
                rng.standard_normal((b, n_m, spec.alloc.size))
                + 1j * rng.standard_normal((b, n_m, spec.alloc.size))
            )
            full = np.zeros((b, n_m, ofdm.n_fft), dtype=np.complex128)
            full[:, :, spec.alloc] = payload
            bodies = np.fft.ifft(full, axis=-1) * np.sqrt(ofdm.n_fft)
            syms = np.concatenate([bodies[:, :, ofdm.n_fft - ofdm.n_cp :], bodies], axis=2)
            stream = syms.reshape(b, n_m * ofdm.n_sym)
            conv = fft_convolve(stream, spec.channel.h)
            start = window_start - (spec.gap + m_lo * ofdm.n_sym)
            y = y + conv[:, start : start + ofdm.n_fft]
        if sigma2 > 0:
            y = y + np.sqrt(sigma2 / 2.0) * (
                rng.standard_normal((b, ofdm.n_fft)) + 1j * rng.standard_normal((b, ofdm.n_fft))
            )
        xhat = np.fft.fft(y, axis=-1) / np.sqrt(ofdm.n_fft) / circ.diag
        err = xhat[:, alloc] - d[:, alloc]
        err_acc += np.sum(np.abs(err) ** 2, axis=0)
        done += b
    return power / (err_acc / n_trials)
