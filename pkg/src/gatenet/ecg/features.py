"""Per-beat feature extraction.

Each beat yields an 89-value real vector in [0, 1] and a 138-bit binary
vector. The binary vector is always derived from the real one through the
quantizers below, so the two variants agree field by field.

Peak layout around the current beat ``R0``::

    Rm3 --RR4-- Rm2 --RR3-- Rm1 --RR2-- R0 --RR1-- Rp1

Binary layout (most significant bit first inside multi-bit fields)::

    RR1 8 | RR2 8 | RR3 8 | RR4 8 | dRRp 1 | dRRm 1 | locCV 2 | ratio 2 |
    tachy 1 | M1 3 | M2 3 | M4 3 | cf1 8 | cf2 8 | delta 74
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .aami import BEAT_SYMBOLS, map_aami
from .wfdb_io import SAMPLE_RATE

BINARY_FIELDS = (
    ("RR1", 8), ("RR2", 8), ("RR3", 8), ("RR4", 8),
    ("dRRp", 1), ("dRRm", 1), ("RR_locCV", 2), ("RR_ratio", 2), ("t_b", 1),
    ("M1", 3), ("M2", 3), ("M4", 3), ("cf1", 8), ("cf2", 8), ("delta", 74),
)
BINARY_WIDTH = sum(w for _, w in BINARY_FIELDS)

REAL_FIELDS = (
    "RR1", "RR2", "RR3", "RR4", "dRRp", "dRRm", "RR_locCV", "RR_ratio", "t_b",
    "M1", "M2", "M4", "cf1", "cf2", *(f"delta{k}" for k in range(74)), "RR2_ratio",
)
REAL_WIDTH = len(REAL_FIELDS)

LOCAL_WINDOW = 500
BEAT_HALF = 90
CF2_HALF = 200
DELTA_POINTS = 75
RR_CLAMP = 2048
CF_CLAMP = 8.0
CV_THRESHOLDS = (0.5, 0.1)
RATIO_THRESHOLDS = (0.25, 0.5)
TACHY_BPM = 100.0


class LocalRrState:
    """Running mean and standard deviation of the last ``n`` RR2 values.

    RR intervals are integer sample counts; the running sum and sum of
    squares are kept as Python integers, so updates never drift from a
    recomputation over the buffer.
    """

    def __init__(self, n: int = LOCAL_WINDOW):
        self.n = n
        self.buffer: deque[int] = deque()
        self._sum = 0
        self._sumsq = 0
        self.beats_seen = 0

    def push(self, rr2) -> None:
        if float(rr2) != int(rr2):
            raise ValueError(f"RR intervals are integer sample counts, got {rr2!r}")
        rr2 = int(rr2)
        self.buffer.append(rr2)
        self._sum += rr2
        self._sumsq += rr2 * rr2
        if len(self.buffer) > self.n:
            old = self.buffer.popleft()
            self._sum -= old
            self._sumsq -= old * old
        self.beats_seen += 1

    @property
    def mean(self) -> float:
        return self._sum / len(self.buffer) if self.buffer else float("nan")

    @property
    def std(self) -> float:
        """Population standard deviation."""
        k = len(self.buffer)
        if not k:
            return float("nan")
        return float(np.sqrt((k * self._sumsq - self._sum * self._sum) / (k * k)))

    def copy(self) -> "LocalRrState":
        other = LocalRrState(self.n)
        other.buffer = deque(self.buffer)
        other._sum, other._sumsq, other.beats_seen = self._sum, self._sumsq, self.beats_seen
        return other


@dataclass(frozen=True)
class BeatContext:
    R0: int
    Rp1: int
    Rm1: int
    Rm2: int
    Rm3: int

    @property
    def rr(self) -> tuple[int, int, int, int]:
        return (self.Rp1 - self.R0, self.R0 - self.Rm1,
                self.Rm1 - self.Rm2, self.Rm2 - self.Rm3)


@dataclass
class BeatFeatures:
    binary: np.ndarray
    real: np.ndarray
    label: str
    record_id: int = -1
    sample: int = -1
    degenerate: bool = False


def cv_bits(cv_real: float) -> list[int]:
    """Local-variability bits. Direction: set when the coefficient of
    variation is below each threshold."""
    return [int(cv_real < t) for t in CV_THRESHOLDS]


def ratio_bits(ratio_real: float) -> list[int]:
    # ratio_real stores RR1/m halved.
    return [int(2.0 * ratio_real < t) for t in RATIO_THRESHOLDS]


def _uint_bits(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - k)) & 1 for k in range(width)]


def quantize(real: float, width: int) -> int:
    return min(int(np.floor(real * 2**width)), 2**width - 1)


def binary_from_real(real: np.ndarray) -> np.ndarray:
    """Quantize an 89-value real vector into the 138-bit layout."""
    r = dict(zip(REAL_FIELDS, np.asarray(real, dtype=np.float64)))
    bits: list[int] = []
    for name in ("RR1", "RR2", "RR3", "RR4"):
        bits += _uint_bits(quantize(r[name], 8), 8)
    bits += [int(r["dRRp"] >= 0.5), int(r["dRRm"] >= 0.5)]
    bits += cv_bits(r["RR_locCV"])
    bits += ratio_bits(r["RR_ratio"])
    bits += [int(r["t_b"] >= 0.5)]
    for name in ("M1", "M2", "M4"):
        bits += _uint_bits(quantize(r[name], 3), 3)
    for name in ("cf1", "cf2"):
        bits += _uint_bits(quantize(r[name], 8), 8)
    bits += [int(r[f"delta{k}"] > 0.5) for k in range(74)]
    out = np.asarray(bits, dtype=np.uint8)
    assert out.size == BINARY_WIDTH
    return out


def unpack_fields(binary: np.ndarray) -> dict[str, np.ndarray]:
    out, pos = {}, 0
    for name, width in BINARY_FIELDS:
        out[name] = np.asarray(binary[pos:pos + width], dtype=np.uint8)
        pos += width
    return out


def pack_fields(fields: dict[str, np.ndarray]) -> np.ndarray:
    parts = []
    for name, width in BINARY_FIELDS:
        f = np.asarray(fields[name], dtype=np.uint8)
        if f.shape != (width,):
            raise ValueError(f"field {name} must have {width} bits, got {f.shape}")
        parts.append(f)
    return np.concatenate(parts)


def crest_factor(window: np.ndarray) -> float:
    """Peak absolute deviation from the window mean over the RMS deviation."""
    x = np.asarray(window, dtype=np.float64)
    x = x - x.mean()
    rms = np.sqrt(np.mean(x * x))
    return float(np.max(np.abs(x)) / rms) if rms > 0 else 0.0


def morphology(beat: np.ndarray, peak: float) -> tuple[list[float], float]:
    """M1, M2, M4 (M3 is computed by callers that need it) and the beat range."""
    norm = float(beat.max() - beat.min())
    if norm == 0:
        return [0.0, 0.0, 0.0], 0.0
    ms = [abs(peak - beat[lo:hi].min()) / norm for lo, hi in ((0, 40), (65, 85), (150, 180))]
    return ms, norm


def m3(beat: np.ndarray, peak: float) -> float:
    norm = float(beat.max() - beat.min())
    return abs(peak - beat[95:105].min()) / norm if norm else 0.0


DELTA_INDEX = np.round(np.linspace(0, 2 * BEAT_HALF - 1, DELTA_POINTS)).astype(np.int64)


def delta_real(beat: np.ndarray, norm: float) -> np.ndarray:
    """Sign-of-difference encoding on a 75-point subsample of the beat,
    stored as 0.5 + diff / (2 * range) so that ``> 0.5`` marks a rise."""
    x = beat[DELTA_INDEX].astype(np.float64)
    d = np.diff(x)
    if norm == 0:
        return np.full(DELTA_POINTS - 1, 0.5)
    return np.clip(0.5 + d / (2.0 * norm), 0.0, 1.0)


def beat_context(peaks: np.ndarray, k: int) -> BeatContext | None:
    if k < 3 or k + 1 >= len(peaks):
        return None
    return BeatContext(int(peaks[k]), int(peaks[k + 1]), int(peaks[k - 1]),
                       int(peaks[k - 2]), int(peaks[k - 3]))


def beat_features(signal: np.ndarray, peaks: np.ndarray, k: int,
                  state: LocalRrState, label: str = "N", *,
                  record_id: int = -1) -> BeatFeatures | None:
    """Features of beat ``k`` in ``peaks`` (R-peak sample positions).

    Returns None for beats too close to the record edges. ``state`` holds
    RR2 values of earlier beats and is not modified.
    """
    ctx = beat_context(peaks, k)
    n = len(signal)
    if ctx is None or ctx.R0 - CF2_HALF < 0 or ctx.R0 + CF2_HALF > n:
        return None
    rr1, rr2, rr3, rr4 = ctx.rr
    if min(ctx.rr) <= 0:
        raise ValueError(f"non-increasing R-peaks around beat {k}")

    if len(state.buffer):
        m, sd = state.mean, state.std
    else:
        m, sd = float(rr2), 0.0
    cv = sd / m
    ratio = rr1 / m
    bpm = 60.0 * SAMPLE_RATE / m

    beat = np.asarray(signal[ctx.R0 - BEAT_HALF:ctx.R0 + BEAT_HALF], dtype=np.float64)
    peak = float(signal[ctx.R0])
    ms, norm = morphology(beat, peak)
    cf1 = crest_factor(beat)
    cf2 = crest_factor(signal[ctx.R0 - CF2_HALF:ctx.R0 + CF2_HALF])

    def rr_real(v):
        return min(max(v, 0), RR_CLAMP - 1) / RR_CLAMP

    real = np.concatenate([
        [rr_real(rr1), rr_real(rr2), rr_real(rr3), rr_real(rr4),
         float(rr1 > rr2), float(rr2 > rr3),
         min(cv, 1.0), min(ratio / 2.0, 1.0), float(bpm > TACHY_BPM)],
        ms,
        [min(cf1, CF_CLAMP) / CF_CLAMP, min(cf2, CF_CLAMP) / CF_CLAMP],
        delta_real(beat, norm),
        [min(rr2 / m / 2.0, 1.0)],
    ])
    return BeatFeatures(binary_from_real(real), real, label, record_id, ctx.R0, norm == 0)


def beat_peaks(record) -> tuple[np.ndarray, list[str]]:
    """R-peak positions and symbols of all beat annotations in a record."""
    keep = [i for i, sym in enumerate(record.ann_symbols) if sym in BEAT_SYMBOLS]
    return record.ann_samples[keep], [record.ann_symbols[i] for i in keep]


def extract_features(record, beat_index: int, state: LocalRrState) -> BeatFeatures | None:
    """Features of the ``beat_index``-th beat annotation of ``record``.

    The beat's RR2 is pushed onto ``state`` afterwards, also for edge beats
    that yield no features (None).
    """
    peaks, symbols = beat_peaks(record)
    feats = beat_features(record.samples, peaks, beat_index, state,
                          map_aami(symbols[beat_index]), record_id=record.record_id)
    if beat_index >= 1:
        state.push(peaks[beat_index] - peaks[beat_index - 1])
    return feats


def record_features(record, state: LocalRrState | None = None) -> list[BeatFeatures]:
    """Features of every beat in a record with usable context, in order.

    All beat classes are emitted (including Q); callers filter.
    """
    state = LocalRrState() if state is None else state
    peaks, symbols = beat_peaks(record)
    out = []
    for k in range(len(peaks)):
        feats = beat_features(record.samples, peaks, k, state, map_aami(symbols[k]),
                              record_id=record.record_id)
        if feats is not None:
            out.append(feats)
        if k >= 1:
            state.push(peaks[k] - peaks[k - 1])
    return out
