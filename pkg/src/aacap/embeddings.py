"""Per-segment embedding matrices: planning, file I/O, and a mock extractor.

An embedding matrix stacks one row per audio segment, ordered by segment
start time; segments are half-overlapped windows of a fixed duration. Real
extractors run offline and write the versioned "AACE" file format below;
the mock extractor stands in for them in tests and toy datasets.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CorruptionError, DataError, FormatError
from .features import Spectrogram

MAGIC = b"AACE"
FORMAT_VERSION = 1

DEFAULT_SEGMENT_SECONDS = 0.96

_TOL = 1e-9


@dataclass
class SegmentPlan:
    window: float  # seconds
    starts: list[float]  # strictly increasing, spaced window/2 apart

    @property
    def hop(self) -> float:
        return self.window / 2.0

    @property
    def count(self) -> int:
        return len(self.starts)


def plan_segments(duration: float, window: float = DEFAULT_SEGMENT_SECONDS) -> SegmentPlan:
    """Half-overlapped segment starts 0, w/2, w, ... that fit inside the audio."""
    if window <= 0:
        raise DataError(f"segment window must be positive, got {window}")
    if duration < window - _TOL:
        raise DataError(
            f"audio of {duration:.3f}s is shorter than one {window:.3f}s segment; "
            "pad the audio to at least the segment length")
    hop = window / 2.0
    last = int(np.floor((duration - window) / hop + _TOL))
    return SegmentPlan(window, [k * hop for k in range(last + 1)])


def save_embedding_file(path, matrix: np.ndarray):
    """Write a (T, F) matrix as magic + version/T/F (u32 LE) + float32 LE rows."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise DataError(f"embedding matrix must be 2-D with T >= 1, got {matrix.shape}")
    t, f = matrix.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", FORMAT_VERSION, t, f))
        fh.write(matrix.astype("<f4").tobytes())


def load_embedding_file(path) -> np.ndarray:
    """Read an AACE file back as a float64 (T, F) matrix."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:4] != MAGIC:
        raise FormatError(f"{path}: missing AACE magic bytes")
    version, t, f = struct.unpack("<III", data[4:16])
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    expected = 16 + 4 * t * f
    if len(data) != expected:
        raise CorruptionError(
            f"{path}: expected {expected} bytes for a {t}x{f} matrix, found {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=16)
    return values.astype(np.float64).reshape(t, f)


def mock_extract(s: Spectrogram, plan: SegmentPlan, dim: int, seed: int) -> np.ndarray:
    """Deterministic stand-in for a frozen event-tagger backbone.

    Each segment is summarised by its per-mel-band mean and variance, then
    pushed through a fixed random projection drawn from `seed`. Identical
    segments therefore produce identical rows.
    """
    frame_hop = s.frame_hop
    spectrogram_duration = s.frames * frame_hop
    last_end = plan.starts[-1] + plan.window if plan.starts else 0.0
    if last_end > spectrogram_duration + plan.window / 2.0 + _TOL:
        raise DataError(
            f"segment plan runs to {last_end:.3f}s but spectrogram covers only "
            f"{spectrogram_duration:.3f}s")
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal((2 * s.mel_bins, dim)) / np.sqrt(2 * s.mel_bins)
    rows = np.empty((plan.count, dim))
    for i, start in enumerate(plan.starts):
        lo = int(round(start / frame_hop))
        hi = max(lo + 1, min(int(round((start + plan.window) / frame_hop)), s.frames))
        lo = min(lo, s.frames - 1)
        chunk = s.values[lo:hi]
        stats = np.concatenate([chunk.mean(axis=0), chunk.var(axis=0)])
        rows[i] = stats @ projection
    return rows
