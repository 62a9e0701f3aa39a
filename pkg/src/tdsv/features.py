"""Acoustic front-end: WAV reading, framing, STFT magnitudes and log mel energies.

Both representations share one framing scheme (Hann window, no pre-emphasis,
no dither) so that their row counts always agree with :func:`frame_count`.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass

import numpy as np

from .errors import ClipTooShortError, UnsupportedAudioError, WavFormatError

FEATURE_KINDS = ("logmel", "stft_mag", "generic")


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("audio clip must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio samples must be finite")
        if int(self.sample_rate) <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class FrameMatrix:
    """A T x D sequence of frame-level feature vectors."""

    data: np.ndarray
    frame_hop: float = 0.01
    feature_kind: str = "generic"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"frame matrix must be T x D with T, D >= 1, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("frame matrix entries must be finite")
        if self.feature_kind not in FEATURE_KINDS:
            raise ValueError(f"unknown feature kind {self.feature_kind!r}")
        object.__setattr__(self, "data", data)

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class FeatureConfig:
    window_len: float = 0.020
    hop_len: float = 0.010
    n_fft: int = 512
    n_mels: int = 64
    log_floor: float = 1e-10

    def __post_init__(self):
        if not 0 < self.hop_len <= self.window_len:
            raise ValueError("require 0 < hop_len <= window_len")
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")
        if not self.log_floor > 0:
            raise ValueError("log_floor must be > 0")

    def window_samples(self, sample_rate: int) -> int:
        return int(round(self.window_len * sample_rate))

    def hop_samples(self, sample_rate: int) -> int:
        return int(round(self.hop_len * sample_rate))

    def check(self, sample_rate: int) -> None:
        win = self.window_samples(sample_rate)
        if win < 1 or self.hop_samples(sample_rate) < 1:
            raise ValueError("window and hop must span at least one sample")
        if self.n_fft < win:
            raise ValueError(f"n_fft={self.n_fft} is shorter than the {win}-sample window")


def read_wav(path) -> AudioClip:
    """Read a 16-bit PCM mono WAV file.

    Samples are scaled to [-1, 1) by dividing by 32768.

    Raises:
      WavFormatError: the RIFF/WAVE header is missing or truncated.
      UnsupportedAudioError: the file is valid but not 16-bit PCM mono.
    """
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            raw = wf.readframes(wf.getnframes())
    except wave.Error as exc:
        if "unknown format" in str(exc):
            raise UnsupportedAudioError(f"{path}: unsupported encoding ({exc})") from exc
        raise WavFormatError(f"{path}: malformed header ({exc})") from exc
    except EOFError as exc:
        raise WavFormatError(f"{path}: truncated header") from exc

    if n_channels != 1:
        raise UnsupportedAudioError(f"{path}: unsupported channel count {n_channels}")
    if width != 2:
        raise UnsupportedAudioError(f"{path}: unsupported sample width {8 * width} bits")
    pcm = np.frombuffer(raw, dtype="<i2")
    if pcm.size == 0:
        raise WavFormatError(f"{path}: no audio frames")
    return AudioClip(pcm.astype(np.float64) / 32768.0, rate)


def write_wav(path, clip: AudioClip) -> None:
    """Write ``clip`` as 16-bit PCM mono, clipping to the representable range."""
    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(pcm.tobytes())


def frame_count(n_samples: int, cfg: FeatureConfig, sample_rate: int) -> int:
    win = cfg.window_samples(sample_rate)
    hop = cfg.hop_samples(sample_rate)
    if n_samples < win:
        raise ClipTooShortError(f"{n_samples} samples is shorter than one {win}-sample window")
    return 1 + (n_samples - win) // hop


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window of length ``n``."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _frames(clip: AudioClip, cfg: FeatureConfig) -> np.ndarray:
    cfg.check(clip.sample_rate)
    win = cfg.window_samples(clip.sample_rate)
    hop = cfg.hop_samples(clip.sample_rate)
    n = frame_count(clip.samples.size, cfg, clip.sample_rate)
    frames = np.lib.stride_tricks.sliding_window_view(clip.samples, win)[::hop][:n]
    return frames * hann_window(win)


def _spectrum(clip: AudioClip, cfg: FeatureConfig) -> np.ndarray:
    return np.fft.rfft(_frames(clip, cfg), n=cfg.n_fft, axis=1)


def stft_frames(clip: AudioClip, cfg: FeatureConfig = FeatureConfig()) -> FrameMatrix:
    """Magnitude STFT, ``n_fft // 2 + 1`` bins per frame (257 for n_fft=512)."""
    mag = np.abs(_spectrum(clip, cfg))
    return FrameMatrix(mag, frame_hop=cfg.hop_len, feature_kind="stft_mag")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int) -> np.ndarray:
    """Triangular filters on the HTK mel scale covering 0 Hz to Nyquist.

    Returns an ``(n_mels, n_fft // 2 + 1)`` matrix. Triangles peak at 1 and
    are not area-normalized.
    """
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    lo, center, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (center - lo)
    falling = (hi - freqs) / (hi - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def logmel_frames(clip: AudioClip, cfg: FeatureConfig = FeatureConfig()) -> FrameMatrix:
    """Natural-log mel filterbank energies, floored at ``cfg.log_floor``."""
    power = np.abs(_spectrum(clip, cfg)) ** 2
    fbank = mel_filterbank(clip.sample_rate, cfg.n_fft, cfg.n_mels)
    energy = power @ fbank.T
    return FrameMatrix(
        np.log(np.maximum(energy, cfg.log_floor)),
        frame_hop=cfg.hop_len,
        feature_kind="logmel",
    )


def crop_frames(fm: FrameMatrix, min_T: int, max_T: int, seed: int) -> FrameMatrix:
    """Random contiguous crop with a length drawn uniformly from [min_T, min(max_T, T)].

    Inputs shorter than ``min_T`` are first wrap-padded by repetition.
    """
    if not 1 <= min_T <= max_T:
        raise ValueError("require 1 <= min_T <= max_T")
    data = fm.data
    if data.shape[0] < min_T:
        data = data[np.arange(min_T) % data.shape[0]]
    n = data.shape[0]
    rng = np.random.default_rng(seed)
    length = int(rng.integers(min_T, min(max_T, n) + 1))
    offset = int(rng.integers(0, n - length + 1))
    return FrameMatrix(data[offset:offset + length], fm.frame_hop, fm.feature_kind)
