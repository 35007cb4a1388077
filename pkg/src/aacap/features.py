"""Waveform to log-mel-spectrogram front end, SpecAugment, and bucket padding.

The analysis defaults (512-sample window at 16 kHz, 160-sample hop, 64 mel
bins spanning 125-7500 Hz) give a front end compatible with common audio
event taggers; everything is configurable.
"""

import wave
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError, ShapeError

TARGET_SAMPLE_RATE = 16000

DEFAULT_WINDOW = 512
DEFAULT_HOP = 160
DEFAULT_MEL_BINS = 64
DEFAULT_FMIN = 125.0
DEFAULT_FMAX = 7500.0

LOG_OFFSET = 1e-6


@dataclass
class Waveform:
    samples: np.ndarray  # float64 in [-1, 1]
    sample_rate: int

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class Spectrogram:
    values: np.ndarray  # (frames, mel_bins) log energies
    frame_hop: float  # seconds between frame starts

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def mel_bins(self) -> int:
        return self.values.shape[1]


@dataclass
class AugmentConfig:
    max_time_mask: int = 192
    max_freq_mask: int = 48
    apply_probability: float = 0.4
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_time_mask < 0 or self.max_freq_mask < 0:
            raise ConfigError("mask lengths must be non-negative")
        if not 0.0 <= self.apply_probability <= 1.0:
            raise ConfigError(f"apply_probability {self.apply_probability} outside [0, 1]")


@dataclass
class AppliedMasks:
    """Spans actually masked by one spec_augment call (None = mask not drawn)."""

    time_span: Optional[tuple[int, int]]  # (start, length) in frames
    freq_span: Optional[tuple[int, int]]  # (start, length) in bins


def read_wav(path) -> Waveform:
    """Read single-channel 16-bit PCM WAV and resample to 16 kHz if needed."""
    try:
        with wave.open(str(path), "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            raw = wav.readframes(wav.getnframes())
    except (wave.Error, EOFError) as exc:
        raise DataError(f"{path}: not a readable WAV file ({exc})") from exc
    if channels != 1:
        raise DataError(f"{path}: expected mono audio, got {channels} channels")
    if width != 2:
        raise DataError(f"{path}: expected 16-bit samples, got {8 * width}-bit")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return resample(Waveform(samples, rate), TARGET_SAMPLE_RATE)


def write_wav(path, w: Waveform):
    """Write a waveform as mono 16-bit PCM."""
    clipped = np.clip(w.samples, -1.0, 1.0)
    pcm = (clipped * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(w.sample_rate)
        wav.writeframes(pcm.tobytes())


def resample(w: Waveform, target_rate: int) -> Waveform:
    """Linear-interpolation resampling; identity when rates already match."""
    if w.sample_rate == target_rate:
        return w
    duration = len(w.samples) / w.sample_rate
    n_out = int(round(duration * target_rate))
    t_out = np.arange(n_out) / target_rate
    t_in = np.arange(len(w.samples)) / w.sample_rate
    return Waveform(np.interp(t_out, t_in, w.samples), target_rate)


def stft_power(w: Waveform, window_size: int = DEFAULT_WINDOW,
               hop: int = DEFAULT_HOP) -> np.ndarray:
    """Hann-windowed magnitude-squared STFT, shape (frames, window_size // 2 + 1).

    frames = floor((len - window_size) / hop) + 1; no padding is applied.
    """
    if window_size <= 0 or window_size & (window_size - 1) != 0:
        raise ConfigError(f"window_size {window_size} is not a power of two")
    if hop <= 0 or hop > window_size:
        raise ConfigError(f"hop {hop} must be in 1..window_size ({window_size})")
    n = len(w.samples)
    if n < window_size:
        raise DataError(
            f"waveform of {n} samples is shorter than the {window_size}-sample window")
    n_frames = (n - window_size) // hop + 1
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(window_size) / window_size)
    power = np.empty((n_frames, window_size // 2 + 1))
    for t in range(n_frames):
        frame = w.samples[t * hop:t * hop + window_size] * window
        spectrum = np.fft.rfft(frame)
        power[t] = np.abs(spectrum) ** 2
    return power


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(mel_bins: int, fft_bins: int, sample_rate: int,
                   f_min: float, f_max: float) -> np.ndarray:
    """Triangular filters on the 2595*log10(1 + f/700) scale, shape (mel_bins, fft_bins)."""
    if mel_bins < 2:
        raise ConfigError(f"mel_bins must be >= 2, got {mel_bins}")
    if not 0 <= f_min < f_max <= sample_rate / 2:
        raise ConfigError(
            f"need 0 <= f_min < f_max <= {sample_rate / 2}, got ({f_min}, {f_max})")
    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), mel_bins + 2))
    fft_freqs = np.arange(fft_bins) * sample_rate / (2.0 * (fft_bins - 1))
    bank = np.zeros((mel_bins, fft_bins))
    for i in range(mel_bins):
        lo, center, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (fft_freqs - lo) / (center - lo)
        falling = (hi - fft_freqs) / (hi - center)
        bank[i] = np.maximum(0.0, np.minimum(rising, falling))
    return bank


def log_mel(power: np.ndarray, mel_bins: int = DEFAULT_MEL_BINS,
            f_min: float = DEFAULT_FMIN, f_max: float = DEFAULT_FMAX,
            sample_rate: int = TARGET_SAMPLE_RATE,
            frame_hop: float = DEFAULT_HOP / TARGET_SAMPLE_RATE) -> Spectrogram:
    """Apply a mel filterbank to an STFT power grid and take ln(x + 1e-6)."""
    bank = mel_filterbank(mel_bins, power.shape[1], sample_rate, f_min, f_max)
    return Spectrogram(np.log(power @ bank.T + LOG_OFFSET), frame_hop)


def wav_to_log_mel(path, mel_bins: int = DEFAULT_MEL_BINS) -> Spectrogram:
    """Full front end: read, resample, STFT, mel, log."""
    w = read_wav(path)
    return log_mel(stft_power(w), mel_bins=mel_bins)


def spec_augment(s: Spectrogram, cfg: AugmentConfig) -> Spectrogram:
    """Masked copy of s; see spec_augment_with_info for the mask policy."""
    return spec_augment_with_info(s, cfg)[0]


def spec_augment_with_info(s: Spectrogram, cfg: AugmentConfig) -> tuple[Spectrogram, AppliedMasks]:
    """Mask one time span and one frequency span, each drawn independently.

    Each mask is applied with probability cfg.apply_probability; its length is
    uniform on [0, max] (clamped to the grid) and its start uniform so that it
    fits. Masked cells are set to the spectrogram mean. Deterministic given
    cfg.rng_seed.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    values = s.values.copy()
    fill = float(s.values.mean()) if s.values.size else 0.0
    frames, bins = values.shape

    time_span = None
    if rng.random() < cfg.apply_probability:
        length = int(rng.integers(0, min(cfg.max_time_mask, frames) + 1))
        start = int(rng.integers(0, frames - length + 1))
        values[start:start + length, :] = fill
        time_span = (start, length)

    freq_span = None
    if rng.random() < cfg.apply_probability:
        length = int(rng.integers(0, min(cfg.max_freq_mask, bins) + 1))
        start = int(rng.integers(0, bins - length + 1))
        values[:, start:start + length] = fill
        freq_span = (start, length)

    return Spectrogram(values, s.frame_hop), AppliedMasks(time_span, freq_span)


def bucket_pad(batch: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad each (T_i, F) item along time to the batch max.

    Returns (padded (B, T_max, F), valid lengths (B,)). Attention and the loss
    must ignore frames at or beyond each item's valid length.
    """
    if len(batch) == 0:
        raise DataError("bucket_pad of an empty batch")
    dims = {item.shape[1] for item in batch}
    if len(dims) != 1:
        raise ShapeError(f"mixed feature dims in batch: {sorted(dims)}")
    feature_dim = dims.pop()
    lengths = np.array([item.shape[0] for item in batch], dtype=np.int64)
    t_max = int(lengths.max())
    padded = np.zeros((len(batch), t_max, feature_dim))
    for i, item in enumerate(batch):
        padded[i, :item.shape[0]] = item
    return padded, lengths
