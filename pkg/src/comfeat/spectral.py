"""Cepstral feature extraction: MFCC and LFCC front-end plus time pooling.

The two feature families share one pipeline -- framing, Hamming window,
one-sided power spectrum, triangular filterbank, log compression, orthonormal
DCT-II -- and differ only in how the filter centers are spaced (mel warp vs
linear Hz). Frame matrices are pooled to fixed-dimension vectors by a
column-wise mean before they reach the model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .audio_io import AudioClip, NotMono

MEL_SCALE = "mel"
LINEAR_SCALE = "linear"

# Fixed dimensionality contracts for externally computed embeddings.
SOURCE_DIMS = {"trillsson": 1024, "xvector": 512}
SPECTRAL_SOURCES = ("mfcc", "lfcc")
KNOWN_SOURCES = ("mfcc", "lfcc", "trillsson", "xvector", "other")


class TooShort(ValueError):
    """Signal shorter than one analysis frame."""


class EmptyMatrix(ValueError):
    """Pooling needs at least one frame."""


@dataclass(frozen=True)
class SpectralConfig:
    """Front-end parameters. Defaults: 25 ms frames, 10 ms hop at 16 kHz,
    512-point FFT, 40 filters, 20 cepstral coefficients."""

    frame_len: int = 400
    hop: int = 160
    n_fft: int = 512
    n_filters: int = 40
    n_coeffs: int = 20
    scale: str = MEL_SCALE
    log_floor: float = 1e-10

    def __post_init__(self):
        if not (0 < self.hop <= self.frame_len <= self.n_fft):
            raise ValueError("need 0 < hop <= frame_len <= n_fft")
        if self.n_fft & (self.n_fft - 1):
            raise ValueError("n_fft must be a power of two")
        if not (0 < self.n_coeffs <= self.n_filters):
            raise ValueError("need 0 < n_coeffs <= n_filters")
        if self.scale not in (MEL_SCALE, LINEAR_SCALE):
            raise ValueError(f"unknown scale {self.scale!r}")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")


@dataclass(frozen=True)
class FeatureVector:
    """Fixed-dimension real vector tagged with the feature source that
    produced it. This is the unit that flows into the fusion model."""

    values: np.ndarray
    source: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValueError("values must be 1-D")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if self.source not in KNOWN_SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        expected = SOURCE_DIMS.get(self.source)
        if expected is not None and v.shape[0] != expected:
            raise ValueError(f"{self.source} vectors must have dim {expected}, got {v.shape[0]}")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def mel_from_hz(f):
    """Perceptual frequency warp m(f) = 1127 ln(1 + f/700)."""
    return 1127.0 * np.log1p(np.asarray(f, dtype=np.float64) / 700.0)


def hz_from_mel(m):
    return 700.0 * np.expm1(np.asarray(m, dtype=np.float64) / 1127.0)


def frame_signal(samples: np.ndarray, cfg: SpectralConfig) -> np.ndarray:
    """Slice a signal into overlapping Hamming-windowed frames.

    Returns (n_frames, frame_len) with n_frames = floor((N - frame_len)/hop) + 1.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("samples must be 1-D")
    if x.shape[0] < cfg.frame_len:
        raise TooShort(f"{x.shape[0]} samples < one {cfg.frame_len}-sample frame")
    n_frames = (x.shape[0] - cfg.frame_len) // cfg.hop + 1
    idx = np.arange(cfg.frame_len)[np.newaxis, :] + cfg.hop * np.arange(n_frames)[:, np.newaxis]
    window = np.hamming(cfg.frame_len)  # 0.54 - 0.46 cos(2 pi n / (M-1))
    return x[idx] * window


def power_spectrum(frame: np.ndarray, n_fft: int) -> np.ndarray:
    """One-sided power |X_k|^2, k = 0..n_fft/2, unnormalized.

    The frame is zero-padded to n_fft; works on a single frame or a stack.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape[-1] > n_fft:
        raise ValueError("frame longer than n_fft")
    spectrum = np.fft.rfft(frame, n=n_fft)
    return (spectrum.real ** 2 + spectrum.imag ** 2)


def filterbank_edges(cfg: SpectralConfig, sample_rate: int) -> np.ndarray:
    """The n_filters + 2 boundary frequencies in Hz, equally spaced on the
    configured scale from 0 to sample_rate/2."""
    nyquist = sample_rate / 2.0
    if cfg.scale == MEL_SCALE:
        return hz_from_mel(np.linspace(0.0, float(mel_from_hz(nyquist)), cfg.n_filters + 2))
    return np.linspace(0.0, nyquist, cfg.n_filters + 2)


def build_filterbank(cfg: SpectralConfig, sample_rate: int) -> np.ndarray:
    """Triangular filterbank, (n_filters, n_fft/2 + 1), each row peaking at 1.0.

    Triangles are evaluated at the FFT bin frequencies and then peak-
    normalized so the max is exactly 1.0 regardless of how the bin grid
    lands relative to the filter centers.
    """
    if sample_rate <= 0:
        raise ValueError("sample_rate must be positive")
    edges = filterbank_edges(cfg, sample_rate)
    bin_hz = np.arange(cfg.n_fft // 2 + 1) * (sample_rate / cfg.n_fft)

    fb = np.zeros((cfg.n_filters, bin_hz.shape[0]))
    for i in range(cfg.n_filters):
        lo, center, hi = edges[i], edges[i + 1], edges[i + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        row = np.maximum(0.0, np.minimum(rising, falling))
        peak = row.max()
        if peak <= 0.0:
            raise ValueError(
                f"filter {i} covers no FFT bin; n_filters too large for n_fft={cfg.n_fft}"
            )
        fb[i] = row / peak
    return fb


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix (n, n); the inverse transform is its
    transpose."""
    k = np.arange(n)[:, np.newaxis]
    m = np.arange(n)[np.newaxis, :]
    mat = np.sqrt(2.0 / n) * np.cos(np.pi * (2 * m + 1) * k / (2 * n))
    mat[0] /= np.sqrt(2.0)
    return mat


def cepstral_features(clip: AudioClip, cfg: SpectralConfig) -> np.ndarray:
    """Frame-level cepstra for a mono clip: (n_frames, n_coeffs).

    Per frame: power spectrum -> filterbank energies -> ln(max(E, floor))
    -> orthonormal DCT-II, keeping the first n_coeffs coefficients (c0
    included).
    """
    if clip.n_channels != 1:
        raise NotMono("cepstral_features needs a mono clip")
    frames = frame_signal(clip.channels[0], cfg)
    power = power_spectrum(frames, cfg.n_fft)
    fb = build_filterbank(cfg, clip.sample_rate)
    # einsum (no BLAS dispatch) keeps the accumulation order identical for
    # every frame, so identical frames yield bit-identical coefficients
    energies = np.einsum("fb,cb->fc", power, fb)
    log_energies = np.log(np.maximum(energies, cfg.log_floor))
    dct = dct_matrix(cfg.n_filters)[: cfg.n_coeffs]
    return np.einsum("fc,kc->fk", log_energies, dct)


def mfcc(clip: AudioClip, cfg: SpectralConfig | None = None) -> np.ndarray:
    cfg = SpectralConfig() if cfg is None else cfg
    return cepstral_features(clip, replace(cfg, scale=MEL_SCALE))


def lfcc(clip: AudioClip, cfg: SpectralConfig | None = None) -> np.ndarray:
    cfg = SpectralConfig() if cfg is None else cfg
    return cepstral_features(clip, replace(cfg, scale=LINEAR_SCALE))


def temporal_mean_pool(matrix: np.ndarray, source: str) -> FeatureVector:
    """Column-wise mean over frames -> one FeatureVector."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1:
        raise EmptyMatrix("need a (frames, coeffs) matrix with at least one frame")
    return FeatureVector(values=m.mean(axis=0), source=source)
