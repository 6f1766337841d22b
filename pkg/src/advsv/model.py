"""Reverse-mode differentiable core: LSTM encoder, cosine scoring head,
binary log-likelihood loss, trainer, and exact input gradients.

Everything is float64 numpy. Gate order throughout is (input, forget,
candidate, output); the utterance embedding is the hidden state at the
final frame. Input gradients are exact backpropagation through time,
which is what makes single-step sign attacks meaningful.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import ContractError, FormatError, TrainingFailure, ValidationError
from .frontend import FeatureKind, FeatureSequence

if TYPE_CHECKING:  # pragma: no cover
    from .verification import TrialExample

COSINE_NORM_FLOOR = 1e-12
PROB_CLAMP = 1e-7

# An utterance embedding is a plain length-H float64 vector.
Embedding = np.ndarray


@dataclass(frozen=True)
class FeatureFingerprint:
    """Provenance a model records so it can refuse mismatched features."""

    feature_kind: FeatureKind
    dim: int
    normalizer_hash: str | None = None

    @classmethod
    def of(cls, f: FeatureSequence) -> "FeatureFingerprint":
        return cls(f.kind, f.dim, f.normalizer_hash)


@dataclass
class ModelParameters:
    """All trainable weights plus the front-end fingerprint.

    w_input is (4H, d), w_recurrent is (4H, H), bias is (4H,), with the
    four gate blocks stacked in (input, forget, candidate, output) order.
    """

    w_input: np.ndarray
    w_recurrent: np.ndarray
    bias: np.ndarray
    score_scale: float
    score_bias: float
    fingerprint: FeatureFingerprint

    def __post_init__(self):
        h4, d = self.w_input.shape
        if h4 % 4 != 0 or self.w_recurrent.shape != (h4, h4 // 4) or self.bias.shape != (h4,):
            raise ValidationError("inconsistent LSTM weight shapes")
        if d != self.fingerprint.dim:
            raise ValidationError(
                f"input size {d} does not match fingerprint dim {self.fingerprint.dim}"
            )
        for arr in (self.w_input, self.w_recurrent, self.bias):
            if not np.all(np.isfinite(arr)):
                raise ValidationError("non-finite model weights")
        if not (math.isfinite(self.score_scale) and math.isfinite(self.score_bias)):
            raise ValidationError("non-finite scoring head")

    @property
    def hidden_size(self) -> int:
        return self.w_recurrent.shape[1]

    @property
    def input_size(self) -> int:
        return self.w_input.shape[1]

    def copy(self) -> "ModelParameters":
        return ModelParameters(
            self.w_input.copy(),
            self.w_recurrent.copy(),
            self.bias.copy(),
            self.score_scale,
            self.score_bias,
            self.fingerprint,
        )

    def check_features(self, f: FeatureSequence) -> None:
        if not f.normalized:
            raise ContractError("model expects normalized features")
        if f.kind is not self.fingerprint.feature_kind:
            raise ContractError(
                f"model was trained on {self.fingerprint.feature_kind.value} features, "
                f"got {f.kind.value}"
            )
        if f.dim != self.fingerprint.dim:
            raise ContractError(f"model expects d={self.fingerprint.dim}, got d={f.dim}")
        if (
            self.fingerprint.normalizer_hash is not None
            and f.normalizer_hash is not None
            and f.normalizer_hash != self.fingerprint.normalizer_hash
        ):
            raise ContractError("features were normalized by a different pipeline")


def init_parameters(
    input_size: int,
    hidden_size: int,
    fingerprint: FeatureFingerprint,
    seed: int = 0,
) -> ModelParameters:
    """Seeded init: uniform +-1/sqrt(H) weights, forget-gate bias +1, scale 5."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / math.sqrt(hidden_size)
    w_input = rng.uniform(-bound, bound, size=(4 * hidden_size, input_size))
    w_recurrent = rng.uniform(-bound, bound, size=(4 * hidden_size, hidden_size))
    bias = np.zeros(4 * hidden_size)
    bias[hidden_size : 2 * hidden_size] = 1.0  # forget gate starts open
    return ModelParameters(w_input, w_recurrent, bias, 5.0, 0.0, fingerprint)


@dataclass
class ComputationTape:
    """Per-frame activations retained for exact backpropagation through time."""

    x: np.ndarray  # (T, d) input frames
    gate_i: np.ndarray
    gate_f: np.ndarray
    gate_g: np.ndarray
    gate_o: np.ndarray
    cell: np.ndarray
    tanh_cell: np.ndarray
    hidden: np.ndarray  # (T, H)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split on sign to stay overflow-free for large |z|.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _lstm_forward(params: ModelParameters, x: np.ndarray) -> tuple[Embedding, ComputationTape]:
    t_len, _ = x.shape
    h_size = params.hidden_size
    zx = x @ params.w_input.T + params.bias  # input projection for all frames at once
    w_rec_t = params.w_recurrent.T

    gi = np.empty((t_len, h_size))
    gf = np.empty((t_len, h_size))
    gg = np.empty((t_len, h_size))
    go = np.empty((t_len, h_size))
    cs = np.empty((t_len, h_size))
    tcs = np.empty((t_len, h_size))
    hs = np.empty((t_len, h_size))

    h = np.zeros(h_size)
    c = np.zeros(h_size)
    for t in range(t_len):
        z = zx[t] + h @ w_rec_t
        i = _sigmoid(z[:h_size])
        f = _sigmoid(z[h_size : 2 * h_size])
        g = np.tanh(z[2 * h_size : 3 * h_size])
        o = _sigmoid(z[3 * h_size :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        gi[t] = i
        gf[t] = f
        gg[t] = g
        go[t] = o
        cs[t] = c
        tcs[t] = tc
        hs[t] = h
    return hs[-1].copy(), ComputationTape(x, gi, gf, gg, go, cs, tcs, hs)


def embed_utterance(
    params: ModelParameters, x: FeatureSequence
) -> tuple[Embedding, ComputationTape]:
    """Run the LSTM over the frames; the embedding is the final hidden state."""
    params.check_features(x)
    if x.num_frames == 0:
        raise ValidationError("cannot embed an empty feature sequence")
    return _lstm_forward(params, x.frames)


def _lstm_backward(
    params: ModelParameters,
    tape: ComputationTape,
    d_final_hidden: np.ndarray,
    want_dx: bool,
    want_dparams: bool,
):
    """Exact BPTT from a gradient on the final hidden state.

    Returns (dx or None, (dWx, dWh, db) or None).
    """
    t_len, h_size = tape.hidden.shape
    dz_all = np.empty((t_len, 4 * h_size))
    dh = d_final_hidden.copy()
    dc = np.zeros(h_size)
    for t in range(t_len - 1, -1, -1):
        i = tape.gate_i[t]
        f = tape.gate_f[t]
        g = tape.gate_g[t]
        o = tape.gate_o[t]
        tc = tape.tanh_cell[t]
        c_prev = tape.cell[t - 1] if t > 0 else 0.0
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = dz_all[t]
        dz[:h_size] = (dc * g) * i * (1.0 - i)
        dz[h_size : 2 * h_size] = (dc * c_prev) * f * (1.0 - f)
        dz[2 * h_size : 3 * h_size] = (dc * i) * (1.0 - g * g)
        dz[3 * h_size :] = do * o * (1.0 - o)
        dh = dz @ params.w_recurrent
        dc = dc * f
    dx = dz_all @ params.w_input if want_dx else None
    dparams = None
    if want_dparams:
        h_prev = np.vstack([np.zeros((1, h_size)), tape.hidden[:-1]])
        dparams = (dz_all.T @ tape.x, dz_all.T @ h_prev, dz_all.sum(axis=0))
    return dx, dparams


def cosine_similarity(u: Embedding, v: Embedding) -> float:
    """u.v / (|u||v|) with norms floored at 1e-12, clamped into [-1, 1]."""
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    if norm_u < COSINE_NORM_FLOOR or norm_v < COSINE_NORM_FLOOR:
        warnings.warn("degenerate (near-zero) embedding in cosine similarity", RuntimeWarning)
    denom = max(norm_u, COSINE_NORM_FLOOR) * max(norm_v, COSINE_NORM_FLOOR)
    return float(np.clip(np.dot(u, v) / denom, -1.0, 1.0))


def score(params: ModelParameters, similarity: float) -> float:
    """Probability that test and enrollment share a speaker: sigmoid(w*s + b)."""
    z = params.score_scale * similarity + params.score_bias
    return float(_sigmoid(np.asarray([z]))[0])


def loss(p: float, y: int) -> float:
    """Negative log likelihood of the label; p is clamped into [1e-7, 1-1e-7]."""
    if y not in (0, 1):
        raise ValidationError(f"label must be 0 or 1, got {y}")
    p = min(max(p, PROB_CLAMP), 1.0 - PROB_CLAMP)
    return -(y * math.log(p) + (1 - y) * math.log(1.0 - p))


@dataclass
class TrialTape:
    """Everything recorded during forward_trial that backprop needs."""

    test_tape: ComputationTape
    enroll_tapes: list[ComputationTape]
    u: Embedding
    enroll_embeddings: list[Embedding]
    v: Embedding
    similarity: float
    probability: float
    raw_probability: float
    label: int

    @property
    def loss(self) -> float:
        return loss(self.probability, self.label)


def forward_trial(params: ModelParameters, trial: "TrialExample") -> tuple[float, TrialTape]:
    """Score one verification trial: embed, average enrollment, cosine, sigmoid."""
    if not trial.enrollment.utterances:
        raise ContractError("trial has an empty enrollment set")
    u, test_tape = embed_utterance(params, trial.test)
    enroll_embeddings = []
    enroll_tapes = []
    for f in trial.enrollment.utterances:
        e, tape = embed_utterance(params, f)
        enroll_embeddings.append(e)
        enroll_tapes.append(tape)
    v = np.mean(enroll_embeddings, axis=0)
    s = cosine_similarity(u, v)
    p_raw = score(params, s)
    p = min(max(p_raw, PROB_CLAMP), 1.0 - PROB_CLAMP)
    tape = TrialTape(
        test_tape, enroll_tapes, u, enroll_embeddings, v, s, p, p_raw, trial.label
    )
    return p, tape


def _head_gradients(params: ModelParameters, tape: TrialTape):
    """Gradient of the loss through sigmoid head and cosine.

    Returns (d_loss/d_u, d_loss/d_v, d_loss/d_scale, d_loss/d_bias).
    The probability clamp zeroes the gradient outside (1e-7, 1-1e-7).
    """
    if PROB_CLAMP < tape.raw_probability < 1.0 - PROB_CLAMP:
        dz = tape.probability - tape.label
    else:
        dz = 0.0
    d_scale = dz * tape.similarity
    d_bias = dz
    ds = dz * params.score_scale

    u, v = tape.u, tape.v
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    nu = max(norm_u, COSINE_NORM_FLOOR)
    nv = max(norm_v, COSINE_NORM_FLOOR)
    dot = float(np.dot(u, v))
    du = v / (nu * nv)
    if norm_u > COSINE_NORM_FLOOR:
        du = du - (dot / (nu * nu * nu * nv)) * u
    dv = u / (nu * nv)
    if norm_v > COSINE_NORM_FLOOR:
        dv = dv - (dot / (nv * nv * nv * nu)) * v
    return ds * du, ds * dv, d_scale, d_bias


def input_gradient(
    params: ModelParameters, trial: "TrialExample", tape: TrialTape | None = None
) -> np.ndarray:
    """Exact d(loss)/d(test features), shape (T, d).

    The enrollment branch is treated as constant: perturbations target
    the test utterance only.
    """
    if tape is None:
        _, tape = forward_trial(params, trial)
    if tape.test_tape is None:
        raise ContractError("trial tape is missing the test-branch activations")
    d_u, _, _, _ = _head_gradients(params, tape)
    dx, _ = _lstm_backward(params, tape.test_tape, d_u, want_dx=True, want_dparams=False)
    return dx


@dataclass
class Gradients:
    """Loss gradients for every trainable array, in parameter layout."""

    w_input: np.ndarray
    w_recurrent: np.ndarray
    bias: np.ndarray
    score_scale: float
    score_bias: float

    @classmethod
    def zeros_like(cls, params: ModelParameters) -> "Gradients":
        return cls(
            np.zeros_like(params.w_input),
            np.zeros_like(params.w_recurrent),
            np.zeros_like(params.bias),
            0.0,
            0.0,
        )

    def add_(self, other: "Gradients", weight: float = 1.0) -> None:
        self.w_input += weight * other.w_input
        self.w_recurrent += weight * other.w_recurrent
        self.bias += weight * other.bias
        self.score_scale += weight * other.score_scale
        self.score_bias += weight * other.score_bias

    def scale_(self, factor: float) -> None:
        self.w_input *= factor
        self.w_recurrent *= factor
        self.bias *= factor
        self.score_scale *= factor
        self.score_bias *= factor

    def global_norm(self) -> float:
        total = (
            float(np.sum(self.w_input**2))
            + float(np.sum(self.w_recurrent**2))
            + float(np.sum(self.bias**2))
            + self.score_scale**2
            + self.score_bias**2
        )
        return math.sqrt(total)


def parameter_gradients(
    params: ModelParameters, trial: "TrialExample", tape: TrialTape | None = None
) -> Gradients:
    """d(loss)/d(theta) through the test branch and every enrollment branch."""
    if tape is None:
        _, tape = forward_trial(params, trial)
    d_u, d_v, d_scale, d_bias = _head_gradients(params, tape)
    grads = Gradients.zeros_like(params)
    grads.score_scale = d_scale
    grads.score_bias = d_bias
    _, (dwx, dwh, db) = _lstm_backward(
        params, tape.test_tape, d_u, want_dx=False, want_dparams=True
    )
    grads.w_input += dwx
    grads.w_recurrent += dwh
    grads.bias += db
    n = len(tape.enroll_tapes)
    d_ui = d_v / n
    for enroll_tape in tape.enroll_tapes:
        _, (dwx, dwh, db) = _lstm_backward(
            params, enroll_tape, d_ui, want_dx=False, want_dparams=True
        )
        grads.w_input += dwx
        grads.w_recurrent += dwh
        grads.bias += db
    return grads


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 8
    epochs: int = 15
    seed: int = 0
    grad_clip_norm: float = 5.0
    optimizer: str = "adam"  # "adam" | "sgd_momentum"
    hidden_size: int = 128
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size <= 0 or self.epochs < 0:
            raise ValidationError("learning_rate/batch_size must be positive, epochs >= 0")
        if self.optimizer not in ("adam", "sgd_momentum"):
            raise ValidationError(f"unknown optimizer {self.optimizer!r}")
        if self.hidden_size <= 0 or self.grad_clip_norm <= 0:
            raise ValidationError("hidden_size and grad_clip_norm must be positive")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValidationError("val_fraction must be in [0, 1)")


class _Adam:
    def __init__(self, params: ModelParameters, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = Gradients.zeros_like(params)
        self.v = Gradients.zeros_like(params)

    def step(self, params: ModelParameters, grads: Gradients) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1**self.t
        corr2 = 1.0 - b2**self.t
        for name in ("w_input", "w_recurrent", "bias", "score_scale", "score_bias"):
            g = getattr(grads, name)
            m = b1 * getattr(self.m, name) + (1 - b1) * g
            v = b2 * getattr(self.v, name) + (1 - b2) * (g * g if isinstance(g, np.ndarray) else g**2)
            setattr(self.m, name, m)
            setattr(self.v, name, v)
            update = self.lr * (m / corr1) / (np.sqrt(v / corr2) + self.eps)
            setattr(params, name, getattr(params, name) - update)


class _SgdMomentum:
    def __init__(self, params: ModelParameters, lr: float, momentum=0.9):
        self.lr, self.momentum = lr, momentum
        self.velocity = Gradients.zeros_like(params)

    def step(self, params: ModelParameters, grads: Gradients) -> None:
        for name in ("w_input", "w_recurrent", "bias", "score_scale", "score_bias"):
            vel = self.momentum * getattr(self.velocity, name) + getattr(grads, name)
            setattr(self.velocity, name, vel)
            setattr(params, name, getattr(params, name) - self.lr * vel)


def _mean_loss(params: ModelParameters, trials: Sequence["TrialExample"]) -> float:
    total = 0.0
    for trial in trials:
        p, _ = forward_trial(params, trial)
        total += loss(p, trial.label)
    return total / len(trials)


def train(
    trials: Sequence["TrialExample"],
    cfg: TrainConfig,
    init: ModelParameters | None = None,
    progress=None,
) -> ModelParameters:
    """Mini-batch training; returns the parameters with best held-out loss.

    A seeded val_fraction slice of the given trials is held out for the
    best-epoch selection; with epochs=0 the seeded initialization is
    returned unchanged. Fully deterministic given (trials, cfg).
    """
    if not trials:
        raise ValidationError("training requires a non-empty trial set")
    fingerprint = FeatureFingerprint.of(trials[0].test)
    params = init.copy() if init is not None else init_parameters(
        fingerprint.dim, cfg.hidden_size, fingerprint, seed=cfg.seed
    )
    if cfg.epochs == 0:
        return params

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(trials))
    n_val = int(round(cfg.val_fraction * len(trials)))
    n_val = min(n_val, len(trials) - 1)
    val_trials = [trials[i] for i in order[:n_val]]
    fit_trials = [trials[i] for i in order[n_val:]]

    optimizer = (
        _Adam(params, cfg.learning_rate)
        if cfg.optimizer == "adam"
        else _SgdMomentum(params, cfg.learning_rate)
    )
    best = params.copy()
    best_val = math.inf
    for epoch in range(cfg.epochs):
        perm = rng.permutation(len(fit_trials))
        for start in range(0, len(fit_trials), cfg.batch_size):
            batch = [fit_trials[i] for i in perm[start : start + cfg.batch_size]]
            grads = Gradients.zeros_like(params)
            batch_loss = 0.0
            for trial in batch:
                p, tape = forward_trial(params, trial)
                batch_loss += loss(p, trial.label)
                grads.add_(parameter_gradients(params, trial, tape))
            batch_loss /= len(batch)
            if math.isnan(batch_loss):
                raise TrainingFailure(
                    f"loss became NaN at epoch {epoch}, batch starting at {start}"
                )
            grads.scale_(1.0 / len(batch))
            norm = grads.global_norm()
            if norm > cfg.grad_clip_norm:
                grads.scale_(cfg.grad_clip_norm / norm)
            optimizer.step(params, grads)
        val_loss = _mean_loss(params, val_trials) if val_trials else _mean_loss(params, fit_trials)
        if progress is not None:
            progress(epoch, val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best = params.copy()
    return best


# --- checkpoint container ---------------------------------------------------
# Layout: magic "ASVM", version u32, kind u8, hash flag u8, 32-byte
# normalizer hash (zeros if absent), d u32, H u32, then little-endian
# float64 blocks: w_input, w_recurrent, bias, score_scale, score_bias.

MODEL_MAGIC = b"ASVM"
_MODEL_VERSION = 1
_KIND_CODE = {FeatureKind.LOG_MEL: 0, FeatureKind.MFCC: 1}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


def save_model(params: ModelParameters, path) -> None:
    fp = params.fingerprint
    hash_bytes = bytes.fromhex(fp.normalizer_hash) if fp.normalizer_hash else b"\x00" * 32
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<IBB", _MODEL_VERSION, _KIND_CODE[fp.feature_kind], 1 if fp.normalizer_hash else 0))
        fh.write(hash_bytes)
        fh.write(struct.pack("<II", fp.dim, params.hidden_size))
        fh.write(params.w_input.astype("<f8").tobytes())
        fh.write(params.w_recurrent.astype("<f8").tobytes())
        fh.write(params.bias.astype("<f8").tobytes())
        fh.write(struct.pack("<dd", params.score_scale, params.score_bias))


def load_model(path) -> ModelParameters:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MODEL_MAGIC:
        raise FormatError(f"{path}: bad model checkpoint magic")
    version, kind_code, has_hash = struct.unpack_from("<IBB", blob, 4)
    if version != _MODEL_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    offset = 4 + struct.calcsize("<IBB")
    hash_hex = blob[offset : offset + 32].hex() if has_hash else None
    offset += 32
    d, h = struct.unpack_from("<II", blob, offset)
    offset += struct.calcsize("<II")

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += count * 8
        return arr.copy()

    w_input = take((4 * h, d))
    w_recurrent = take((4 * h, h))
    bias = take((4 * h,))
    score_scale, score_bias = struct.unpack_from("<dd", blob, offset)
    fingerprint = FeatureFingerprint(_CODE_KIND[kind_code], d, hash_hex)
    return ModelParameters(w_input, w_recurrent, bias, score_scale, score_bias, fingerprint)
