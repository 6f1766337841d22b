"""Invert the feature pipeline back to audio.

Log-Mel features are denormalized, mapped to a linear magnitude
spectrogram by per-frame non-negative least squares, and rendered to a
waveform with Griffin-Lim. MFCC features cannot be inverted here; MFCC
attacks are evaluated in feature space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_io import Waveform
from .errors import ConfigError, ContractError, ShapeError, UndefinedMetricError
from .frontend import (
    FeatureKind,
    FeatureSequence,
    FilterbankMatrix,
    FrontendConfig,
    FrontendPipeline,
    hamming_periodic,
    invert_normalizer,
    stft,
)

NNLS_MAX_ITERATIONS = 200
NNLS_TOLERANCE = 1e-8
_WINDOW_SUM_FLOOR = 1e-8


@dataclass(frozen=True)
class GriffinLimConfig:
    iterations: int = 100
    phase_init: str = "random"  # "random" | "zeros"
    seed: int = 0
    momentum: float = 0.0

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.phase_init not in ("random", "zeros"):
            raise ConfigError(f"unknown phase_init {self.phase_init!r}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must be in [0, 1)")


def mel_to_linear(
    f: FeatureSequence, fb: FilterbankMatrix, cfg: FrontendConfig
) -> np.ndarray:
    """Recover a non-negative magnitude spectrogram from physical log-Mel.

    Per frame, solves min ||fb @ p - m||_2 over power vectors p >= 0,
    where m is the Mel power exp(features); entries still at the log
    floor are treated as silence. The solver is accelerated projected
    gradient (FISTA with a monotone restart), all frames batched.
    Returns sqrt(p), shape (T, num_bins).
    """
    if f.kind is not FeatureKind.LOG_MEL:
        raise ContractError("mel inversion requires LOG_MEL features")
    if f.normalized:
        raise ContractError("mel inversion requires denormalized (physical) features")
    if f.dim != fb.num_channels:
        raise ShapeError(f"features have d={f.dim}, filterbank {fb.num_channels} channels")
    mel_power = np.exp(f.frames)
    mel_power[mel_power <= cfg.log_floor * (1.0 + 1e-6)] = 0.0

    weights = fb.weights  # (M, F)
    # Lipschitz constant of the gradient is sigma_max(fb)^2.
    step = 1.0 / (np.linalg.norm(weights, ord=2) ** 2)
    power = np.maximum(mel_power @ np.linalg.pinv(weights).T, 0.0)  # warm start
    lookahead = power.copy()
    momentum_t = 1.0
    previous_objective = np.inf
    for _ in range(NNLS_MAX_ITERATIONS):
        gradient = (lookahead @ weights.T - mel_power) @ weights
        updated = np.maximum(lookahead - step * gradient, 0.0)
        objective = np.linalg.norm(updated @ weights.T - mel_power)
        if objective > previous_objective:
            # restart the momentum from the last monotone iterate
            lookahead = power.copy()
            momentum_t = 1.0
            gradient = (lookahead @ weights.T - mel_power) @ weights
            updated = np.maximum(lookahead - step * gradient, 0.0)
            objective = np.linalg.norm(updated @ weights.T - mel_power)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum_t * momentum_t))
        lookahead = updated + ((momentum_t - 1.0) / t_next) * (updated - power)
        delta = np.linalg.norm(updated - power)
        power, momentum_t, previous_objective = updated, t_next, objective
        if delta <= NNLS_TOLERANCE * max(np.linalg.norm(power), 1.0):
            break
    return np.sqrt(power)


def istft(magnitude: np.ndarray, phase: np.ndarray, cfg: FrontendConfig) -> Waveform:
    """Windowed overlap-add synthesis with squared-window normalization.

    Output length is frame_length + (T-1)*hop; the least-squares synthesis
    makes istft(stft(w)) exact on the fully-overlapped interior.
    """
    if magnitude.shape != phase.shape:
        raise ShapeError("magnitude and phase shapes differ")
    if magnitude.shape[1] != cfg.num_bins:
        raise ShapeError(f"expected {cfg.num_bins} bins, got {magnitude.shape[1]}")
    t_len = magnitude.shape[0]
    frame_len, hop = cfg.frame_length_samples, cfg.hop_samples
    window = hamming_periodic(frame_len)
    frames = np.fft.irfft(magnitude * np.exp(1j * phase), n=cfg.fft_size, axis=1)[:, :frame_len]
    frames *= window
    out_len = frame_len + (t_len - 1) * hop
    signal = np.zeros(out_len)
    weight = np.zeros(out_len)
    win_sq = window * window
    for t in range(t_len):
        start = t * hop
        signal[start : start + frame_len] += frames[t]
        weight[start : start + frame_len] += win_sq
    signal /= np.maximum(weight, _WINDOW_SUM_FLOOR)
    return Waveform(signal, sample_rate_hz=cfg.sample_rate_hz)


def spectral_convergence(target_mag: np.ndarray, estimate_mag: np.ndarray) -> float:
    """Relative Frobenius error ||estimate - target|| / ||target||."""
    if target_mag.shape != estimate_mag.shape:
        raise ShapeError("spectral convergence requires equal shapes")
    denom = np.linalg.norm(target_mag)
    if denom == 0.0:
        raise UndefinedMetricError("spectral convergence undefined for a zero target")
    return float(np.linalg.norm(estimate_mag - target_mag) / denom)


@dataclass(frozen=True)
class GriffinLimResult:
    waveform: Waveform
    convergence_trace: np.ndarray  # one spectral-convergence value per iteration


def griffin_lim(
    target_mag: np.ndarray, glc: GriffinLimConfig, cfg: FrontendConfig
) -> GriffinLimResult:
    """Phase reconstruction by alternating synthesis and re-analysis.

    Each round synthesizes with the current phase, re-analyzes, records
    spectral convergence against the target, and keeps the new phase
    (with optional momentum extrapolation on the complex spectrum). The
    returned waveform is the final synthesis.
    """
    if np.any(target_mag < 0):
        raise ShapeError("target magnitude must be non-negative")
    if target_mag.shape[1] != cfg.num_bins:
        raise ShapeError(f"expected {cfg.num_bins} bins, got {target_mag.shape[1]}")
    if glc.phase_init == "zeros":
        phase = np.zeros_like(target_mag)
    else:
        rng = np.random.default_rng(glc.seed)
        phase = rng.uniform(-np.pi, np.pi, size=target_mag.shape)

    trace = np.empty(glc.iterations)
    previous = None
    waveform = None
    for k in range(glc.iterations):
        waveform = istft(target_mag, phase, cfg)
        analysis = stft(waveform, cfg)
        trace[k] = spectral_convergence(target_mag, analysis.magnitude)
        spectrum = analysis.magnitude * np.exp(1j * analysis.phase)
        if glc.momentum > 0.0 and previous is not None:
            spectrum = spectrum + glc.momentum * (spectrum - previous)
        phase = np.angle(spectrum)
        if glc.momentum > 0.0:
            previous = analysis.magnitude * np.exp(1j * analysis.phase)
    return GriffinLimResult(waveform, trace)


RECONSTRUCTION_PEAK = 0.5


def full_overlap_margin(cfg: FrontendConfig) -> int:
    """Samples at each synthesis edge without full window overlap, rounded
    up to a whole number of hops so trimming keeps the frame grid aligned."""
    margin = cfg.frame_length_samples - cfg.hop_samples
    hops = -(-margin // cfg.hop_samples)
    return hops * cfg.hop_samples


def reconstruct_utterance(
    f: FeatureSequence,
    pipeline: FrontendPipeline,
    glc: GriffinLimConfig = GriffinLimConfig(),
) -> Waveform:
    """Full inversion: denormalize, Mel-to-linear NNLS, Griffin-Lim.

    Accepts normalized or physical log-Mel. The partially-overlapped
    synthesis edges are trimmed (they carry division-by-small-window
    spikes that would dominate peak normalization); the result is then
    peak-normalized to 0.5 to leave headroom, matching the synthetic
    corpus convention.
    """
    if f.kind is not FeatureKind.LOG_MEL:
        raise ContractError("waveform reconstruction is log-Mel only; MFCC is unsupported")
    if f.normalized:
        f = invert_normalizer(pipeline.normalizer, f)
    cfg = pipeline.config
    magnitude = mel_to_linear(f, pipeline.filterbank, cfg)
    result = griffin_lim(magnitude, glc, cfg)
    samples = result.waveform.samples
    margin = full_overlap_margin(cfg)
    if len(samples) >= 2 * margin + cfg.frame_length_samples:
        samples = samples[margin : len(samples) - margin]
    peak = np.max(np.abs(samples))
    if peak > 0:
        samples = samples * (RECONSTRUCTION_PEAK / peak)
    return Waveform(samples, sample_rate_hz=cfg.sample_rate_hz)
