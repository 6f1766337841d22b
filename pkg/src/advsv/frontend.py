"""Acoustic front end: STFT, Mel filterbank, log-Mel features, MFCCs.

The default configuration is 64 ms frames with a 4 ms hop at 8 kHz
(512/32 samples), a 512-point FFT, and 65 Mel channels. Feature
normalization is fit on the training split only; perturbation budgets
elsewhere in the toolkit are expressed in normalized-feature units.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable

import numpy as np
import scipy.fft

from .audio_io import Waveform
from .errors import ConfigError, ContractError, FormatError, InputTooShortError, ShapeError, ValidationError

STD_FLOOR = 1e-6


class FeatureKind(Enum):
    LOG_MEL = "log_mel"
    MFCC = "mfcc"


@dataclass(frozen=True)
class FrontendConfig:
    frame_length_samples: int = 512
    hop_samples: int = 32
    fft_size: int = 512
    num_mel_channels: int = 65
    num_mfcc: int = 20
    mel_fmin_hz: float = 0.0
    mel_fmax_hz: float = 4000.0
    log_floor: float = 1e-10
    feature_kind: FeatureKind = FeatureKind.LOG_MEL
    sample_rate_hz: int = 8000

    def __post_init__(self):
        if not (0 < self.hop_samples <= self.frame_length_samples <= self.fft_size):
            raise ConfigError(
                "need 0 < hop_samples <= frame_length_samples <= fft_size, got "
                f"{self.hop_samples}/{self.frame_length_samples}/{self.fft_size}"
            )
        if not (0 < self.num_mfcc <= self.num_mel_channels):
            raise ConfigError("need 0 < num_mfcc <= num_mel_channels")
        if self.log_floor <= 0:
            raise ConfigError("log_floor must be positive")
        if not (0 <= self.mel_fmin_hz < self.mel_fmax_hz):
            raise ConfigError("need 0 <= mel_fmin_hz < mel_fmax_hz")
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")

    @property
    def num_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def feature_dim(self) -> int:
        return self.num_mel_channels if self.feature_kind is FeatureKind.LOG_MEL else self.num_mfcc


@dataclass(frozen=True)
class Spectrogram:
    """Magnitude/phase of the one-sided STFT, both shaped (frames, bins)."""

    magnitude: np.ndarray
    phase: np.ndarray
    config: FrontendConfig

    def __post_init__(self):
        if self.magnitude.shape != self.phase.shape:
            raise ShapeError("magnitude and phase shapes differ")
        if self.magnitude.shape[1] != self.config.num_bins:
            raise ShapeError(
                f"expected {self.config.num_bins} bins, got {self.magnitude.shape[1]}"
            )


@dataclass(frozen=True)
class FeatureSequence:
    """T x d matrix of acoustic feature vectors; the network input."""

    frames: np.ndarray
    kind: FeatureKind
    normalized: bool = False
    normalizer_hash: str | None = None

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        object.__setattr__(self, "frames", frames)
        if frames.ndim != 2:
            raise ShapeError(f"features must be 2-D (frames x dims), got shape {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise ValidationError("features contain non-finite entries")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def with_frames(self, frames: np.ndarray) -> "FeatureSequence":
        return replace(self, frames=frames)


def hamming_periodic(n: int) -> np.ndarray:
    """Periodic Hamming window 0.54 - 0.46*cos(2*pi*k/n); clean COLA at small hops."""
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / n)


def stft(w: Waveform, cfg: FrontendConfig) -> Spectrogram:
    """Short-time Fourier transform with a periodic Hamming window.

    Frame t covers samples [t*hop, t*hop + frame_length); the number of
    frames is 1 + floor((len - frame_length)/hop).
    """
    n = len(w.samples)
    if n < cfg.frame_length_samples:
        raise InputTooShortError(
            f"signal of {n} samples is shorter than one frame ({cfg.frame_length_samples})"
        )
    frames = np.lib.stride_tricks.sliding_window_view(w.samples, cfg.frame_length_samples)
    frames = frames[:: cfg.hop_samples]
    windowed = frames * hamming_periodic(cfg.frame_length_samples)
    spectrum = np.fft.rfft(windowed, n=cfg.fft_size, axis=1)
    return Spectrogram(np.abs(spectrum), np.angle(spectrum), cfg)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class FilterbankMatrix:
    """Triangular Mel filterbank, shape (num_mel, num_bins)."""

    weights: np.ndarray
    center_frequencies_hz: np.ndarray

    @property
    def num_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def num_bins(self) -> int:
        return self.weights.shape[1]


def mel_filterbank(cfg: FrontendConfig) -> FilterbankMatrix:
    """Build triangular filters with centers equally spaced on the Mel scale.

    Filter m rises linearly from center m-1 to m and falls to m+1; the
    edge filters are anchored at fmin/fmax. Weights are evaluated at the
    FFT bin frequencies.
    """
    edges_hz = mel_to_hz(
        np.linspace(hz_to_mel(cfg.mel_fmin_hz), hz_to_mel(cfg.mel_fmax_hz), cfg.num_mel_channels + 2)
    )
    bin_hz = np.arange(cfg.num_bins) * cfg.sample_rate_hz / cfg.fft_size
    left, center, right = edges_hz[:-2, None], edges_hz[1:-1, None], edges_hz[2:, None]
    rising = (bin_hz - left) / (center - left)
    falling = (right - bin_hz) / (right - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.where(weights.sum(axis=1) == 0.0)[0]
    if empty.size:
        raise ConfigError(
            f"{empty.size} Mel filters have no FFT bin support (first empty: {int(empty[0])}); "
            "reduce num_mel_channels or raise fft_size"
        )
    return FilterbankMatrix(weights, edges_hz[1:-1].copy())


def log_mel(s: Spectrogram, fb: FilterbankMatrix) -> FeatureSequence:
    """Log-compressed Mel power spectrum: ln(max(fb @ |S|^2, floor)) per frame."""
    if fb.num_bins != s.magnitude.shape[1]:
        raise ShapeError(f"filterbank has {fb.num_bins} bins, spectrogram {s.magnitude.shape[1]}")
    power = s.magnitude**2
    mel_power = power @ fb.weights.T
    return FeatureSequence(np.log(np.maximum(mel_power, s.config.log_floor)), FeatureKind.LOG_MEL)


def mfcc(lm: FeatureSequence, cfg: FrontendConfig) -> FeatureSequence:
    """Orthonormal DCT-II of log-Mel frames, truncated to num_mfcc coefficients."""
    if lm.kind is not FeatureKind.LOG_MEL:
        raise ContractError(f"mfcc expects LOG_MEL input, got {lm.kind.value}")
    coeffs = scipy.fft.dct(lm.frames, type=2, norm="ortho", axis=1)
    return FeatureSequence(coeffs[:, : cfg.num_mfcc].copy(), FeatureKind.MFCC)


def mfcc_to_log_mel(coeffs: np.ndarray, num_mel: int) -> np.ndarray:
    """Inverse of the (possibly truncated) orthonormal DCT-II, for round-trip checks."""
    padded = np.zeros((coeffs.shape[0], num_mel))
    padded[:, : coeffs.shape[1]] = coeffs
    return scipy.fft.idct(padded, type=2, norm="ortho", axis=1)


@dataclass(frozen=True)
class Normalizer:
    """Per-dimension mean/std fit on the training split."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ShapeError("normalizer mean/std must be equal-length vectors")
        if np.any(self.std < STD_FLOOR):
            raise ValidationError(f"normalizer std below floor {STD_FLOOR}")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.mean.astype("<f8").tobytes())
        digest.update(self.std.astype("<f8").tobytes())
        return digest.hexdigest()


def fit_normalizer(train_features: Iterable[FeatureSequence]) -> Normalizer:
    """Pool all frames of the training utterances and fit mean/std per dimension."""
    seqs = list(train_features)
    if not seqs:
        raise ValidationError("cannot fit a normalizer on an empty collection")
    dims = {f.dim for f in seqs}
    if len(dims) > 1:
        raise ValidationError(f"feature dimensions differ across utterances: {sorted(dims)}")
    stacked = np.concatenate([f.frames for f in seqs], axis=0)
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), STD_FLOOR)
    return Normalizer(mean, std)


def apply_normalizer(n: Normalizer, f: FeatureSequence) -> FeatureSequence:
    if f.dim != n.dim:
        raise ShapeError(f"normalizer dim {n.dim} != feature dim {f.dim}")
    if f.normalized:
        raise ContractError("features are already normalized")
    return FeatureSequence(
        (f.frames - n.mean) / n.std, f.kind, normalized=True, normalizer_hash=n.fingerprint
    )


def invert_normalizer(n: Normalizer, f: FeatureSequence) -> FeatureSequence:
    if f.dim != n.dim:
        raise ShapeError(f"normalizer dim {n.dim} != feature dim {f.dim}")
    if not f.normalized:
        raise ContractError("features are not normalized; nothing to invert")
    if f.normalizer_hash is not None and f.normalizer_hash != n.fingerprint:
        raise ContractError("features were normalized by a different normalizer")
    return FeatureSequence(f.frames * n.std + n.mean, f.kind, normalized=False)


# --- binary container ------------------------------------------------------
# Layout: magic "ASVF", version u8, kind u8, flags u8 (bit0 normalized,
# bit1 normalizer hash present), T u32, d u32, optional 32-byte hash,
# then T*d little-endian float64, row-major.

FEATURE_MAGIC = b"ASVF"
_FEATURE_VERSION = 1
_KIND_CODE = {FeatureKind.LOG_MEL: 0, FeatureKind.MFCC: 1}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


def save_features(f: FeatureSequence, path) -> None:
    flags = (1 if f.normalized else 0) | (2 if f.normalizer_hash else 0)
    header = FEATURE_MAGIC + struct.pack(
        "<BBBII", _FEATURE_VERSION, _KIND_CODE[f.kind], flags, f.num_frames, f.dim
    )
    with open(path, "wb") as fh:
        fh.write(header)
        if f.normalizer_hash:
            fh.write(bytes.fromhex(f.normalizer_hash))
        fh.write(f.frames.astype("<f8").tobytes())


def load_features(path) -> FeatureSequence:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad feature container magic")
    version, kind_code, flags, t, d = struct.unpack_from("<BBBII", blob, 4)
    if version != _FEATURE_VERSION:
        raise FormatError(f"{path}: unsupported feature container version {version}")
    if kind_code not in _CODE_KIND:
        raise FormatError(f"{path}: unknown feature kind code {kind_code}")
    offset = 4 + struct.calcsize("<BBBII")
    norm_hash = None
    if flags & 2:
        norm_hash = blob[offset : offset + 32].hex()
        offset += 32
    expected = t * d * 8
    payload = blob[offset : offset + expected]
    if len(payload) != expected:
        raise FormatError(f"{path}: truncated payload ({len(payload)} of {expected} bytes)")
    frames = np.frombuffer(payload, dtype="<f8").reshape(t, d)
    return FeatureSequence(frames.copy(), _CODE_KIND[kind_code], bool(flags & 1), norm_hash)


@dataclass(frozen=True)
class FrontendPipeline:
    """A frozen feature pipeline: config + filterbank + fitted normalizer.

    Models record this pipeline's fingerprint and refuse features that
    were produced by any other pipeline.
    """

    config: FrontendConfig
    filterbank: FilterbankMatrix
    normalizer: Normalizer

    @property
    def feature_kind(self) -> FeatureKind:
        return self.config.feature_kind

    @property
    def dim(self) -> int:
        return self.config.feature_dim

    def extract_raw(self, w: Waveform) -> FeatureSequence:
        """Unnormalized features of the configured kind."""
        lm = log_mel(stft(w, self.config), self.filterbank)
        if self.config.feature_kind is FeatureKind.MFCC:
            return mfcc(lm, self.config)
        return lm

    def extract(self, w: Waveform) -> FeatureSequence:
        """Normalized features, ready for the encoder."""
        return apply_normalizer(self.normalizer, self.extract_raw(w))


def fit_pipeline(cfg: FrontendConfig, train_waveforms: Iterable[Waveform]) -> FrontendPipeline:
    """Build the filterbank and fit the normalizer over the training waveforms."""
    fb = mel_filterbank(cfg)
    raw = []
    for w in train_waveforms:
        lm = log_mel(stft(w, cfg), fb)
        raw.append(mfcc(lm, cfg) if cfg.feature_kind is FeatureKind.MFCC else lm)
    return FrontendPipeline(cfg, fb, fit_normalizer(raw))
