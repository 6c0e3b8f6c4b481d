"""Underwater acoustic channel impulse responses.

Three concerns live here: a lightweight multipath surrogate (direct path plus
randomly delayed bounce paths with spreading and absorption loss), a
reader/writer for the ASCII arrival files produced by external ray tracers,
and discretization of continuous tap lists onto a baseband sample grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AcousticParams",
    "Geometry3D",
    "ChannelImpulseResponse",
    "DiscreteChannel",
    "ArrivalFile",
    "ArrivalParseError",
    "DelayOverflowError",
    "thorp_absorption_db_per_km",
    "generate_cir",
    "parse_arrival_file",
    "parse_bellhop_arrivals",
    "serialize_arrival_file",
    "discretize",
]


class ArrivalParseError(ValueError):
    """Malformed arrival file; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DelayOverflowError(ValueError):
    """A tap delay falls outside the representable discrete grid."""


def thorp_absorption_db_per_km(freq_khz: float) -> float:
    """Thorp seawater absorption coefficient in dB/km for f in kHz."""
    f2 = freq_khz * freq_khz
    return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003


@dataclass(frozen=True)
class AcousticParams:
    """Acoustic environment knobs for the surrogate channel generator."""

    sound_speed: float = 1500.0          # m/s
    max_delay_spread: float = 0.030      # s, hard cap on last-minus-first tap delay
    path_count_model: str = "poisson"    # "poisson" | "fixed" (count of extra paths)
    path_count_param: float = 8.0
    min_interarrival: float = 0.001      # s, keeps taps on distinct sample bins
    spread_fraction_range: tuple[float, float] = (0.7, 1.0)
    spreading_exponent: float = 1.5      # power-law exponent k, P ~ d^-k
    absorption_freq_hz: float = 1200.0   # band center used for absorption loss
    bounce_loss_db: tuple[float, float] = (2.0, 8.0)

    def __post_init__(self):
        if self.sound_speed <= 0:
            raise ValueError("sound_speed must be positive")
        if self.max_delay_spread < 0:
            raise ValueError("max_delay_spread must be nonnegative")
        if self.path_count_model not in ("poisson", "fixed"):
            raise ValueError(f"unknown path_count_model {self.path_count_model!r}")
        if self.min_interarrival <= 0:
            raise ValueError("min_interarrival must be positive")
        lo, hi = self.spread_fraction_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError("spread_fraction_range must satisfy 0 < lo <= hi <= 1")


@dataclass(frozen=True)
class Geometry3D:
    """Endpoint geometry of one acoustic link inside the simulation box."""

    source_position: tuple[float, float, float]
    receiver_position: tuple[float, float, float]
    drift_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    box: tuple[float, float, float] = (1000.0, 1000.0, 200.0)

    def __post_init__(self):
        for name, pos in (("source", self.source_position), ("receiver", self.receiver_position)):
            if len(pos) != 3:
                raise ValueError(f"{name} position must have 3 coordinates")
            for coord, limit in zip(pos, self.box):
                if not (0.0 <= coord <= limit):
                    raise ValueError(f"{name} position {pos} outside box {self.box}")

    def distance(self) -> float:
        a = np.asarray(self.source_position, dtype=float)
        b = np.asarray(self.receiver_position, dtype=float)
        return float(np.linalg.norm(a - b))


@dataclass
class ChannelImpulseResponse:
    """Continuous-delay tap list for one link.

    Delays are absolute travel times in seconds (sorted, at least one tap);
    gains are complex path amplitudes. ``normalized()`` rebases delays to the
    first arrival, which is what a receiver locked to the earliest path sees.
    """

    delays: np.ndarray
    gains: np.ndarray
    link: tuple = ("src", "dst")

    def __post_init__(self):
        self.delays = np.asarray(self.delays, dtype=float)
        self.gains = np.asarray(self.gains, dtype=np.complex128)
        if self.delays.ndim != 1 or self.delays.size == 0:
            raise ValueError("CIR needs at least one tap")
        if self.delays.shape != self.gains.shape:
            raise ValueError("delays and gains must have matching shapes")
        if np.any(np.diff(self.delays) < 0):
            order = np.argsort(self.delays, kind="stable")
            self.delays = self.delays[order]
            self.gains = self.gains[order]
        if np.any(self.delays < 0):
            raise ValueError("negative tap delay")
        if not np.all(np.isfinite(self.delays)) or not np.all(np.isfinite(self.gains)):
            raise ValueError("non-finite tap")
        if self.energy() <= 0:
            raise ValueError("CIR has zero energy")

    def energy(self) -> float:
        return float(np.sum(np.abs(self.gains) ** 2))

    def delay_spread(self) -> float:
        return float(self.delays[-1] - self.delays[0])

    def normalized(self) -> "ChannelImpulseResponse":
        return ChannelImpulseResponse(self.delays - self.delays[0], self.gains.copy(), self.link)


@dataclass
class DiscreteChannel:
    """Baseband FIR taps on a uniform sample grid."""

    h: np.ndarray
    sample_period: float

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=np.complex128)
        if self.h.ndim != 1 or self.h.size == 0:
            raise ValueError("empty discrete channel")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("non-finite channel tap")
        if float(np.sum(np.abs(self.h) ** 2)) <= 0:
            raise ValueError("discrete channel has zero energy")

    def __len__(self) -> int:
        return int(self.h.size)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.h) ** 2))


def _path_amplitude(distance_m: float, params: AcousticParams) -> float:
    # spreading loss on power ~ d^-k, absorption applied in dB over the path
    alpha = thorp_absorption_db_per_km(params.absorption_freq_hz / 1000.0)
    spreading = distance_m ** (-params.spreading_exponent / 2.0)
    absorption = 10.0 ** (-alpha * (distance_m / 1000.0) / 20.0)
    return spreading * absorption


def generate_cir(geometry: Geometry3D, params: AcousticParams, seed: int) -> ChannelImpulseResponse:
    """Draw a multipath CIR for one link. Pure function of its arguments.

    The direct path arrives at d/c; extra bounce paths follow with exponential
    inter-arrival shape rescaled so the final tap lands at a spread drawn from
    spread_fraction_range * max_delay_spread. All phases are uniform random.
    """
    rng = np.random.default_rng(seed)
    d0 = geometry.distance()
    if d0 <= 0.0:
        raise ValueError("zero-distance link")
    c = params.sound_speed
    t0 = d0 / c

    if params.path_count_model == "poisson":
        n_extra = int(rng.poisson(params.path_count_param))
    else:
        n_extra = int(round(params.path_count_param))

    delays = [t0]
    amps = [_path_amplitude(d0, params)]
    if n_extra > 0 and params.max_delay_spread > 0:
        lo, hi = params.spread_fraction_range
        spread = rng.uniform(lo, hi) * params.max_delay_spread
        # cannot fit more taps than min_interarrival allows inside the spread
        n_extra = min(n_extra, int(math.floor(spread / params.min_interarrival)))
        if n_extra > 0:
            raw = rng.exponential(1.0, size=n_extra)
            slack = spread - n_extra * params.min_interarrival
            inter = params.min_interarrival + raw * (slack / raw.sum() if raw.sum() > 0 else 0.0)
            rel = np.cumsum(inter)
            rel[-1] = spread  # guard against float drift; last tap defines the spread
            for tau in rel:
                d_p = c * (t0 + tau)
                bounce = rng.uniform(*params.bounce_loss_db)
                amps.append(_path_amplitude(d_p, params) * 10.0 ** (-bounce / 20.0))
                delays.append(t0 + tau)

    phases = rng.uniform(0.0, 2.0 * np.pi, size=len(delays))
    gains = np.asarray(amps) * np.exp(1j * phases)
    return ChannelImpulseResponse(
        np.asarray(delays), gains, link=(geometry.source_position, geometry.receiver_position)
    )


def discretize(cir: ChannelImpulseResponse, sample_period: float, max_length: int) -> DiscreteChannel:
    """Round taps to nearest sample bins, summing coincident gains.

    Raises DelayOverflowError when any tap rounds to a bin >= max_length.
    Energy is conserved exactly when no two taps share a bin; callers that care
    (the surrogate generator does, via min_interarrival) keep taps separated.
    Far-field CIRs carry absolute travel times; normalize() them first.
    """
    if sample_period <= 0:
        raise ValueError("sample_period must be positive")
    if max_length < 1:
        raise ValueError("max_length must be at least 1")
    bins = np.rint(cir.delays / sample_period).astype(int)
    if np.any(bins >= max_length):
        worst = float(cir.delays[np.argmax(bins)])
        raise DelayOverflowError(
            f"tap delay {worst:.6f}s maps to bin {int(bins.max())} >= max_length {max_length}"
        )
    h = np.zeros(int(bins.max()) + 1, dtype=np.complex128)
    np.add.at(h, bins, cir.gains)
    return DiscreteChannel(h, sample_period)


# ---------------------------------------------------------------------------
# Arrival file I/O
#
# ASCII layout (one frequency, arbitrary source/receiver grids):
#   line 1: freq n_source_depths n_receiver_depths n_receiver_ranges
#   line 2: source depths (m)
#   line 3: receiver depths (m)
#   line 4: receiver ranges (m)
#   then per source depth: one line with the max arrival count, followed by,
#   for each (depth, range) receiver in row-major order, a line holding that
#   receiver's arrival count and then count rows of
#       amplitude  phase_deg  delay_s  launch_angle  arrival_angle [n_top n_bot]
# Gains reconstruct as amplitude * exp(1j * phase_deg * pi / 180).
# ---------------------------------------------------------------------------


@dataclass
class ArrivalFile:
    """Parsed arrival file: grid metadata plus one CIR per (source, receiver)."""

    frequency_hz: float
    source_depths: np.ndarray
    receiver_depths: np.ndarray
    receiver_ranges: np.ndarray
    cirs: list[ChannelImpulseResponse] = field(default_factory=list)
    angles: list[np.ndarray] = field(default_factory=list)  # (n_taps, 2) per CIR


def _floats(tokens: list[str], line_no: int, what: str) -> list[float]:
    out = []
    for tok in tokens:
        try:
            out.append(float(tok))
        except ValueError:
            raise ArrivalParseError(f"non-numeric {what} field {tok!r}", line_no) from None
    return out


class _Lines:
    def __init__(self, text: str):
        self.raw = text.splitlines()
        self.pos = 0

    def next_tokens(self, what: str) -> tuple[list[str], int]:
        while self.pos < len(self.raw):
            line_no = self.pos + 1
            tokens = self.raw[self.pos].split()
            self.pos += 1
            if tokens:
                return tokens, line_no
        raise ArrivalParseError(f"unexpected end of file while reading {what}", len(self.raw) or 1)


def parse_arrival_file(text: str) -> ArrivalFile:
    """Parse ASCII arrival data. Raises ArrivalParseError with a line number."""
    lines = _Lines(text)

    tokens, ln = lines.next_tokens("header")
    if len(tokens) != 4:
        raise ArrivalParseError(f"header needs 4 fields (freq nsd nrd nrr), got {len(tokens)}", ln)
    freq = _floats(tokens[:1], ln, "header")[0]
    try:
        nsd, nrd, nrr = (int(t) for t in tokens[1:])
    except ValueError:
        raise ArrivalParseError("header counts must be integers", ln) from None
    if min(nsd, nrd, nrr) < 1:
        raise ArrivalParseError("header counts must be >= 1", ln)

    def grid(count: int, what: str) -> np.ndarray:
        vals: list[float] = []
        while len(vals) < count:
            tokens, ln = lines.next_tokens(what)
            vals.extend(_floats(tokens, ln, what))
        if len(vals) != count:
            raise ArrivalParseError(f"expected {count} {what} values, got {len(vals)}", ln)
        return np.asarray(vals)

    src_depths = grid(nsd, "source depth")
    rcv_depths = grid(nrd, "receiver depth")
    rcv_ranges = grid(nrr, "receiver range")

    out = ArrivalFile(freq, src_depths, rcv_depths, rcv_ranges)
    for isd in range(nsd):
        tokens, ln = lines.next_tokens("max arrival count")
        if len(tokens) != 1:
            raise ArrivalParseError("expected a single max-arrival count", ln)
        for ird in range(nrd):
            for irr in range(nrr):
                tokens, ln = lines.next_tokens("arrival count")
                if len(tokens) != 1:
                    raise ArrivalParseError(
                        f"expected arrival count for receiver ({ird},{irr}), got {len(tokens)} fields", ln
                    )
                try:
                    count = int(float(tokens[0]))
                except ValueError:
                    raise ArrivalParseError(f"non-numeric arrival count {tokens[0]!r}", ln) from None
                if count < 1:
                    raise ArrivalParseError(
                        f"receiver ({ird},{irr}) declares {count} arrivals; need at least one tap", ln
                    )
                delays = np.empty(count)
                gains = np.empty(count, dtype=np.complex128)
                angles = np.empty((count, 2))
                for i in range(count):
                    tokens, ln = lines.next_tokens("arrival row")
                    if len(tokens) not in (5, 7):
                        raise ArrivalParseError(
                            f"arrival row needs 5 or 7 fields, got {len(tokens)}", ln
                        )
                    vals = _floats(tokens[:5], ln, "arrival")
                    amp, phase_deg, delay = vals[0], vals[1], vals[2]
                    if delay < 0:
                        raise ArrivalParseError(f"negative delay {delay}", ln)
                    delays[i] = delay
                    gains[i] = amp * np.exp(1j * phase_deg * np.pi / 180.0)
                    angles[i] = vals[3], vals[4]
                order = np.argsort(delays, kind="stable")
                out.cirs.append(
                    ChannelImpulseResponse(delays[order], gains[order], link=(isd, ird * nrr + irr))
                )
                out.angles.append(angles[order])
    return out


def parse_bellhop_arrivals(text: str) -> list[ChannelImpulseResponse]:
    """Convenience wrapper: parse and return just the per-receiver CIRs."""
    return parse_arrival_file(text).cirs


def serialize_arrival_file(af: ArrivalFile) -> str:
    """Write an ArrivalFile back to the ASCII layout parse_arrival_file reads.

    Numbers use repr-exact formatting so parse(serialize(parse(x))) is an
    identity on the parsed values.
    """
    nsd = len(af.source_depths)
    nrd = len(af.receiver_depths)
    nrr = len(af.receiver_ranges)
    if len(af.cirs) != nsd * nrd * nrr:
        raise ValueError("CIR count does not match the receiver grid")

    def fmt(x: float) -> str:
        return f"{x:.17g}"

    rows = [f"{fmt(af.frequency_hz)} {nsd} {nrd} {nrr}"]
    rows.append(" ".join(fmt(v) for v in af.source_depths))
    rows.append(" ".join(fmt(v) for v in af.receiver_depths))
    rows.append(" ".join(fmt(v) for v in af.receiver_ranges))
    idx = 0
    for isd in range(nsd):
        block = af.cirs[isd * nrd * nrr : (isd + 1) * nrd * nrr]
        rows.append(str(max(len(c.delays) for c in block)))
        for _ in range(nrd * nrr):
            cir = af.cirs[idx]
            ang = af.angles[idx] if idx < len(af.angles) else np.zeros((len(cir.delays), 2))
            idx += 1
            rows.append(str(len(cir.delays)))
            for i in range(len(cir.delays)):
                amp = abs(cir.gains[i])
                phase_deg = math.degrees(np.angle(cir.gains[i]))
                rows.append(
                    f"{fmt(amp)} {fmt(phase_deg)} {fmt(cir.delays[i])} {fmt(ang[i, 0])} {fmt(ang[i, 1])}"
                )
    return "\n".join(rows) + "\n"
