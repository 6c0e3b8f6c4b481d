"""Baseband OFDM physical layer.

The node under study is symbol-aligned at its receiver, so its own channel
acts as a circulant operator once the cyclic prefix is stripped. Every other
transmitter runs on its own clock, offset by an integer sample gap, so its
contribution to the victim's FFT window is a windowed linear convolution of
its continuous symbol stream. Keeping both operators explicit is the whole
point of this module: the circulant path is diagonalized by the DFT, the
windowed path is what breaks subcarrier orthogonality.

Unitary DFT convention throughout: F x = fft(x)/sqrt(N), so F H F^h for a
circulant H is diag(fft(h, N)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .chanmodel import DiscreteChannel

__all__ = [
    "OfdmParams",
    "DataSymbol",
    "InterfererSpec",
    "ReceivedSymbol",
    "CirculantOperator",
    "WindowUnderrunError",
    "build_circulant",
    "build_windowed_toeplitz",
    "overlapping_symbol_range",
    "synthesize_stream",
    "segment_matrix",
    "interferer_window_contribution",
    "synthesize_interference_window",
    "synthesize_received",
    "random_data_symbol",
    "fft_convolve",
    "unitary_dft",
    "unitary_idft",
]


class WindowUnderrunError(ValueError):
    """Interferer stream does not cover the requested receive window."""


@dataclass(frozen=True)
class OfdmParams:
    """OFDM numerology and the resource-block map.

    Durations are in seconds; the baseband sample period is
    symbol_duration / n_fft. passband_sample_period is informational metadata
    for passband front ends and enters no computation here.
    """

    n_fft: int = 256
    symbol_duration: float = 0.128
    cp_duration: float = 0.030
    n_rb: int = 5
    subcarriers_per_rb: int = 10
    carrier_freq_hz: float = 1200.0
    passband_sample_period: float = 45.455e-6
    symbols_per_packet: int = 4

    def __post_init__(self):
        if self.n_fft < 2 or (self.n_fft & (self.n_fft - 1)) != 0:
            raise ValueError("n_fft must be a power of two >= 2")
        if self.symbol_duration <= 0 or self.cp_duration <= 0:
            raise ValueError("durations must be positive")
        if self.n_rb < 1 or self.subcarriers_per_rb < 1:
            raise ValueError("resource-block counts must be >= 1")
        if self.n_rb * self.subcarriers_per_rb > self.n_fft:
            raise ValueError("occupied band exceeds the FFT grid")
        if self.symbols_per_packet < 1:
            raise ValueError("symbols_per_packet must be >= 1")
        if self.n_cp < 1:
            raise ValueError("cyclic prefix shorter than one sample")

    @property
    def sample_period(self) -> float:
        return self.symbol_duration / self.n_fft

    @property
    def n_cp(self) -> int:
        return int(round(self.cp_duration / self.sample_period))

    @property
    def n_sym(self) -> int:
        """Samples per full OFDM symbol including the cyclic prefix."""
        return self.n_fft + self.n_cp

    @property
    def subcarrier_spacing(self) -> float:
        return 1.0 / self.symbol_duration

    @cached_property
    def rb_bins_shifted(self) -> tuple:
        """Per-RB subcarrier indices as signed (DC-centered) bin numbers."""
        total = self.n_rb * self.subcarriers_per_rb
        start = -(total // 2)
        return tuple(
            np.arange(start + r * self.subcarriers_per_rb,
                      start + (r + 1) * self.subcarriers_per_rb)
            for r in range(self.n_rb)
        )

    @cached_property
    def rb_bins(self) -> tuple:
        """Per-RB subcarrier indices in FFT ordering."""
        return tuple(b % self.n_fft for b in self.rb_bins_shifted)

    @cached_property
    def occupied_bins(self) -> np.ndarray:
        return np.concatenate(self.rb_bins)


def unitary_dft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    n = x.shape[axis]
    return np.fft.fft(x, axis=axis) / np.sqrt(n)


def unitary_idft(x: np.ndarray, axis: int = -1) -> np.ndarray:
    n = x.shape[axis]
    return np.fft.ifft(x, axis=axis) * np.sqrt(n)


def fft_convolve(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Full linear convolution along the last axis, batched over the rest."""
    n_out = x.shape[-1] + kernel.shape[-1] - 1
    n_fft = 1 << (n_out - 1).bit_length()
    spec = np.fft.fft(x, n_fft, axis=-1) * np.fft.fft(kernel, n_fft)
    return np.fft.ifft(spec, axis=-1)[..., :n_out]


@dataclass
class DataSymbol:
    """Frequency-domain payload of one OFDM symbol.

    values is the full n_fft-length vector; support outside alloc must be zero.
    power is the per-subcarrier average transmit power E|d_k|^2 on alloc.
    """

    values: np.ndarray
    alloc: np.ndarray
    power: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        self.alloc = np.asarray(self.alloc, dtype=int)
        if self.values.ndim != 1:
            raise ValueError("data symbol must be a vector")
        if self.power < 0:
            raise ValueError("power must be nonnegative")
        mask = np.zeros(self.values.size, dtype=bool)
        mask[self.alloc] = True
        if np.any(np.abs(self.values[~mask]) > 0):
            raise ValueError("data symbol carries energy outside its allocation")


def random_data_symbol(n_fft: int, alloc: np.ndarray, power: float, rng: np.random.Generator) -> DataSymbol:
    """Zero-mean circular Gaussian payload with E|d_k|^2 = power on alloc."""
    values = np.zeros(n_fft, dtype=np.complex128)
    scale = np.sqrt(power / 2.0)
    alloc = np.asarray(alloc, dtype=int)
    values[alloc] = scale * (rng.standard_normal(alloc.size) + 1j * rng.standard_normal(alloc.size))
    return DataSymbol(values, alloc, power)


@dataclass
class InterfererSpec:
    """One asynchronous transmitter as seen by a victim receiver.

    gap is the integer sample offset of the interferer's symbol grid relative
    to the victim's clock. data maps interferer symbol index m to that
    symbol's frequency values on alloc (compact, len(alloc)); missing symbols
    are silent. data=None means "draw fresh Gaussian payloads", used both by
    the synthesis path (with an rng) and by the second-moment oracle (which
    needs only alloc and power).
    """

    channel: DiscreteChannel
    gap: int
    alloc: np.ndarray
    power: float = 1.0
    data: dict | None = None
    node_id: int = -1

    def __post_init__(self):
        self.alloc = np.asarray(self.alloc, dtype=int)
        if self.alloc.ndim != 1 or self.alloc.size == 0:
            raise ValueError("interferer needs a nonempty allocation")
        if self.power < 0:
            raise ValueError("power must be nonnegative")


@dataclass
class ReceivedSymbol:
    """One CP-stripped receive window, with components kept separable."""

    desired: np.ndarray
    interference: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        n = len(self.desired)
        if len(self.interference) != n or len(self.noise) != n:
            raise ValueError("component length mismatch")

    @property
    def total(self) -> np.ndarray:
        return self.desired + self.interference + self.noise


class CirculantOperator:
    """Circular convolution by h on an n-point window; diagonal in the DFT."""

    def __init__(self, h: np.ndarray, n: int):
        h = np.asarray(h, dtype=np.complex128)
        if h.ndim != 1 or h.size == 0:
            raise ValueError("empty kernel")
        if h.size > n:
            raise ValueError(f"kernel length {h.size} exceeds window {n}")
        self.h = h
        self.n = int(n)
        self.diag = np.fft.fft(h, n)  # eigenvalues on the unitary DFT basis

    @property
    def first_column(self) -> np.ndarray:
        col = np.zeros(self.n, dtype=np.complex128)
        col[: self.h.size] = self.h
        return col

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Circular convolution along the last axis."""
        if x.shape[-1] != self.n:
            raise ValueError("operand length mismatch")
        return np.fft.ifft(np.fft.fft(x, axis=-1) * self.diag, axis=-1)

    def dense(self) -> np.ndarray:
        col = self.first_column
        return np.stack([np.roll(col, k) for k in range(self.n)], axis=1)


def build_circulant(channel: DiscreteChannel, n_fft: int) -> CirculantOperator:
    if len(channel) > n_fft:
        raise ValueError("channel memory exceeds the FFT window")
    return CirculantOperator(channel.h, n_fft)


def overlapping_symbol_range(ofdm: OfdmParams, channel_len: int, gap: int, window_start: int) -> tuple[int, int]:
    """Interferer symbol indices whose samples can reach the given window.

    The window covers absolute samples [window_start, window_start + n_fft);
    channel memory extends the reach back by channel_len - 1 samples.
    """
    lo = window_start - (channel_len - 1) - gap
    hi = window_start + ofdm.n_fft - 1 - gap
    return lo // ofdm.n_sym, hi // ofdm.n_sym


def synthesize_stream(ofdm: OfdmParams, alloc: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Contiguous time samples for symbols carrying the given payloads.

    data has shape (n_symbols, len(alloc)); each symbol is IDFT + cyclic
    prefix. Output length is n_symbols * n_sym.
    """
    data = np.atleast_2d(np.asarray(data, dtype=np.complex128))
    full = np.zeros((data.shape[0], ofdm.n_fft), dtype=np.complex128)
    full[:, np.asarray(alloc, dtype=int)] = data
    body = unitary_idft(full, axis=-1)
    sym = np.concatenate([body[:, ofdm.n_fft - ofdm.n_cp :], body], axis=1)
    return sym.reshape(-1)


def segment_matrix(ofdm: OfdmParams, alloc: np.ndarray) -> np.ndarray:
    """Unit-payload symbol segments: column j is one full symbol (CP + body)
    carrying 1 on subcarrier alloc[j]. Shape (n_sym, len(alloc))."""
    u = np.arange(ofdm.n_sym)
    body_idx = (u - ofdm.n_cp) % ofdm.n_fft
    alloc = np.asarray(alloc, dtype=int)
    return np.exp(2j * np.pi * np.outer(body_idx, alloc) / ofdm.n_fft) / np.sqrt(ofdm.n_fft)


def build_windowed_toeplitz(
    channel: DiscreteChannel,
    gap: int,
    stream: np.ndarray,
    stream_offset: int,
    window_start: int,
    n_fft: int,
) -> np.ndarray:
    """Linear-convolve a sample stream with the channel and cut one window.

    stream[i] sits at absolute victim-clock time gap + stream_offset + i. The
    returned window covers [window_start, window_start + n_fft). The stream
    must cover the window plus channel memory, else WindowUnderrunError.
    """
    L = len(channel)
    abs0 = gap + stream_offset
    if abs0 > window_start - (L - 1) or abs0 + len(stream) - 1 < window_start + n_fft - 1:
        raise WindowUnderrunError(
            f"stream [{abs0}, {abs0 + len(stream)}) cannot fill window "
            f"[{window_start - (L - 1)}, {window_start + n_fft})"
        )
    conv = np.convolve(stream, channel.h)
    start = window_start - abs0
    return conv[start : start + n_fft]


def interferer_window_contribution(
    spec: InterfererSpec,
    ofdm: OfdmParams,
    window_start: int,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Time-domain contribution of one interferer to one receive window."""
    L = len(spec.channel)
    if L - 1 > ofdm.n_cp:
        raise ValueError("interferer channel memory exceeds the cyclic prefix")
    m_lo, m_hi = overlapping_symbol_range(ofdm, L, spec.gap, window_start)
    n_alloc = spec.alloc.size
    payloads = np.zeros((m_hi - m_lo + 1, n_alloc), dtype=np.complex128)
    for i, m in enumerate(range(m_lo, m_hi + 1)):
        if spec.data is not None:
            if m in spec.data:
                payloads[i] = np.asarray(spec.data[m], dtype=np.complex128)
        else:
            if rng is None:
                raise ValueError("spec carries no data and no rng was given")
            scale = np.sqrt(spec.power / 2.0)
            payloads[i] = scale * (rng.standard_normal(n_alloc) + 1j * rng.standard_normal(n_alloc))
    stream = synthesize_stream(ofdm, spec.alloc, payloads)
    return build_windowed_toeplitz(
        spec.channel, spec.gap, stream, m_lo * ofdm.n_sym, window_start, ofdm.n_fft
    )


def synthesize_interference_window(
    interferers: list,
    sigma2: float,
    ofdm: OfdmParams,
    rng: np.random.Generator,
    window_start: int = 0,
) -> np.ndarray:
    """Aggregate interference plus noise over one n_fft window (no desired part)."""
    out = np.zeros(ofdm.n_fft, dtype=np.complex128)
    for spec in interferers:
        out += interferer_window_contribution(spec, ofdm, window_start, rng)
    if sigma2 > 0:
        out += np.sqrt(sigma2 / 2.0) * (
            rng.standard_normal(ofdm.n_fft) + 1j * rng.standard_normal(ofdm.n_fft)
        )
    return out


def synthesize_received(
    channel: DiscreteChannel,
    symbol: DataSymbol,
    interferers: list,
    sigma2: float,
    ofdm: OfdmParams,
    rng: np.random.Generator,
    symbol_index: int = 0,
) -> ReceivedSymbol:
    """One CP-stripped receive window of the victim link.

    The desired component rides the circulant operator (the victim is
    aligned and its CP covers the channel); each interferer contributes a
    windowed linear convolution of its own asynchronous stream.
    """
    if symbol.values.size != ofdm.n_fft:
        raise ValueError("data symbol length must equal n_fft")
    circ = build_circulant(channel, ofdm.n_fft)
    desired = circ.apply(unitary_idft(symbol.values))
    window_start = symbol_index * ofdm.n_sym + ofdm.n_cp
    interference = np.zeros(ofdm.n_fft, dtype=np.complex128)
    for spec in interferers:
        interference += interferer_window_contribution(spec, ofdm, window_start, rng)
    if sigma2 > 0:
        noise = np.sqrt(sigma2 / 2.0) * (
            rng.standard_normal(ofdm.n_fft) + 1j * rng.standard_normal(ofdm.n_fft)
        )
    else:
        noise = np.zeros(ofdm.n_fft, dtype=np.complex128)
    return ReceivedSymbol(desired, interference, noise)
