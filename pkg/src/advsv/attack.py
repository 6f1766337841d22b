"""Single-step sign attacks on the verifier and transfer-attack orchestration.

The perturbation maximizes the first-order expansion of the loss under an
L-infinity budget: x_adv = x + eps * sign(d loss / dx), applied to the
test utterance only. Transfer attacks route the perturbed features through
waveform reconstruction and a second (target) feature pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio_io import Corpus, write_wav
from .errors import ContractError, ValidationError
from .frontend import FeatureKind, FeatureSequence, FrontendPipeline
from .model import ModelParameters, forward_trial, input_gradient, loss
from .reconstruction import GriffinLimConfig, reconstruct_utterance
from .verification import (
    EnrollmentCache,
    EnrollmentSet,
    Metrics,
    TrialExample,
    TrialSet,
    evaluate,
    materialize_trials,
)

DEFAULT_EPSILONS = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)

CROSS_MODEL = "cross_model"
CROSS_FEATURE = "cross_feature"


@dataclass(frozen=True)
class AttackConfig:
    """Attack strength sweep; epsilon is in normalized-feature units."""

    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    norm: str = "linf"  # tag for future norms; only L-inf is implemented

    def __post_init__(self):
        if not self.epsilons:
            raise ValidationError("epsilon sweep must be non-empty")
        if any(e < 0 for e in self.epsilons):
            raise ValidationError("epsilon must be non-negative")
        if list(self.epsilons) != sorted(self.epsilons):
            raise ValidationError("epsilon sweep must be sorted ascending")
        if self.norm != "linf":
            raise ValidationError(f"unsupported perturbation norm {self.norm!r}")


@dataclass(frozen=True)
class AdversarialTrial:
    """One attacked trial: original and perturbed test features side by side.

    perturbation holds eps * sign(gradient) exactly; adversarial.test is
    original.test + perturbation (where the sum itself may round)."""

    original: TrialExample
    adversarial: TrialExample
    perturbation: np.ndarray
    epsilon: float
    clean_probability: float
    adv_probability: float
    clean_loss: float
    adv_loss: float


def model_id(params: ModelParameters) -> str:
    fp = params.fingerprint
    tag = fp.normalizer_hash[:8] if fp.normalizer_hash else "nohash"
    return f"{fp.feature_kind.value}-d{fp.dim}-h{params.hidden_size}-{tag}"


def fgsm(params: ModelParameters, trial: TrialExample, epsilon: float) -> AdversarialTrial:
    """One gradient-sign step on the test utterance; sign(0) leaves an entry alone."""
    if epsilon < 0:
        raise ValidationError("epsilon must be non-negative")
    clean_p, tape = forward_trial(params, trial)
    gradient = input_gradient(params, trial, tape)
    perturbation = epsilon * np.sign(gradient)
    adv_test = trial.test.with_frames(trial.test.frames + perturbation)
    adv_trial = replace(trial, test=adv_test)
    adv_p, _ = forward_trial(params, adv_trial)
    return AdversarialTrial(
        original=trial,
        adversarial=adv_trial,
        perturbation=perturbation,
        epsilon=epsilon,
        clean_probability=clean_p,
        adv_probability=adv_p,
        clean_loss=loss(clean_p, trial.label),
        adv_loss=loss(adv_p, trial.label),
    )


@dataclass(frozen=True)
class AttackReport:
    """Clean vs adversarial metrics over the identical trial set."""

    clean: Metrics
    adversarial: Metrics
    epsilon: float
    source_model: str
    target_model: str
    pipeline: str  # "feature_space" | "reconstructed"
    mode: str | None = None

    @property
    def accuracy_drop(self) -> float:
        return self.clean.accuracy - self.adversarial.accuracy

    @property
    def fpr_rise(self) -> float | None:
        if self.clean.fpr is None or self.adversarial.fpr is None:
            return None
        return self.adversarial.fpr - self.clean.fpr

    def to_dict(self) -> dict:
        return {
            "clean": self.clean.to_dict(),
            "adversarial": self.adversarial.to_dict(),
            "epsilon": self.epsilon,
            "source_model": self.source_model,
            "target_model": self.target_model,
            "pipeline": self.pipeline,
            "mode": self.mode,
            "accuracy_drop": self.accuracy_drop,
            "fpr_rise": self.fpr_rise,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttackReport":
        return cls(
            clean=Metrics.from_dict(d["clean"]),
            adversarial=Metrics.from_dict(d["adversarial"]),
            epsilon=d["epsilon"],
            source_model=d["source_model"],
            target_model=d["target_model"],
            pipeline=d["pipeline"],
            mode=d.get("mode"),
        )


def white_box_attack(
    params: ModelParameters,
    trials: Sequence[TrialExample],
    epsilon: float,
    threshold: float = 0.5,
) -> AttackReport:
    """Attack every trial in feature space and compare metrics on the same set."""
    attacked = [fgsm(params, t, epsilon) for t in trials]
    cache = EnrollmentCache()
    clean = evaluate(params, [a.original for a in attacked], threshold, cache)
    adversarial = evaluate(params, [a.adversarial for a in attacked], threshold, cache)
    ident = model_id(params)
    return AttackReport(clean, adversarial, epsilon, ident, ident, "feature_space")


def epsilon_sweep(
    params: ModelParameters,
    trials: Sequence[TrialExample],
    epsilons: Sequence[float] = DEFAULT_EPSILONS,
    threshold: float = 0.5,
) -> list[AttackReport]:
    """One report per epsilon over the same trials and the same per-trial
    gradient signs (the gradient is computed once and rescaled)."""
    AttackConfig(epsilons=tuple(epsilons))  # validates the sweep
    signs = []
    for trial in trials:
        _, tape = forward_trial(params, trial)
        signs.append(np.sign(input_gradient(params, trial, tape)))
    cache = EnrollmentCache()
    clean = evaluate(params, trials, threshold, cache)
    ident = model_id(params)
    reports = []
    for eps in epsilons:
        adv_trials = [
            replace(t, test=t.test.with_frames(t.test.frames + eps * s))
            for t, s in zip(trials, signs)
        ]
        adversarial = evaluate(params, adv_trials, threshold, cache)
        reports.append(AttackReport(clean, adversarial, eps, ident, ident, "feature_space"))
    return reports


def transfer_attack(
    source: ModelParameters,
    source_pipeline: FrontendPipeline,
    target: ModelParameters,
    target_pipeline: FrontendPipeline,
    trials: TrialSet,
    corpus: Corpus,
    epsilon: float,
    mode: str = CROSS_MODEL,
    glc: GriffinLimConfig = GriffinLimConfig(),
    threshold: float = 0.5,
    save_wav_dir: str | Path | None = None,
) -> AttackReport:
    """Black-box attack through waveform reconstruction.

    Adversarial features are crafted on the source model (log-Mel space),
    rendered to audio with Griffin-Lim, then re-featurized with the
    target's pipeline. Both report columns score reconstructed audio, so
    reconstruction artifacts cancel out of the comparison; enrollment
    utterances stay untouched originals.
    """
    if mode not in (CROSS_MODEL, CROSS_FEATURE):
        raise ValidationError(f"unknown transfer mode {mode!r}")
    if source_pipeline.feature_kind is not FeatureKind.LOG_MEL:
        raise ContractError("transfer attacks craft on log-Mel features; MFCC sources are unsupported")
    out_dir = Path(save_wav_dir) if save_wav_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    needed = set()
    for rec in trials.records:
        needed.add(rec.test_utterance_id)
        needed.update(rec.enroll_utterance_ids)
    source_feats = {u: source_pipeline.extract(corpus.record(u).load()) for u in sorted(needed)}
    source_trials = materialize_trials(trials, corpus, source_feats)

    # Target features of untouched enrollment audio, shared across trials.
    target_enroll_feats: dict[str, FeatureSequence] = {}

    def target_features(utt_id: str) -> FeatureSequence:
        if utt_id not in target_enroll_feats:
            target_enroll_feats[utt_id] = target_pipeline.extract(corpus.record(utt_id).load())
        return target_enroll_feats[utt_id]

    recon_clean_feats: dict[str, FeatureSequence] = {}  # by test utterance id
    clean_column: list[TrialExample] = []
    adv_column: list[TrialExample] = []
    for rec, trial in zip(trials.records, source_trials):
        attacked = fgsm(source, trial, epsilon)
        test_id = rec.test_utterance_id
        if test_id not in recon_clean_feats:
            clean_wav = reconstruct_utterance(trial.test, source_pipeline, glc)
            if out_dir is not None:
                write_wav(out_dir / f"{test_id}.clean.wav", clean_wav)
            recon_clean_feats[test_id] = target_pipeline.extract(clean_wav)
        adv_wav = reconstruct_utterance(attacked.adversarial.test, source_pipeline, glc)
        if out_dir is not None:
            # trial id disambiguates: several trials may attack one utterance
            write_wav(out_dir / f"{test_id}.{rec.trial_id}.adv-eps{epsilon:g}.wav", adv_wav)
        enrollment = EnrollmentSet(
            rec.enroll_speaker_id,
            tuple(target_features(u) for u in rec.enroll_utterance_ids),
            rec.enroll_utterance_ids,
        )
        clean_column.append(
            TrialExample(recon_clean_feats[test_id], enrollment, rec.label, rec.trial_id)
        )
        adv_column.append(
            TrialExample(target_pipeline.extract(adv_wav), enrollment, rec.label, rec.trial_id)
        )

    cache = EnrollmentCache()
    clean_metrics = evaluate(target, clean_column, threshold, cache)
    adv_metrics = evaluate(target, adv_column, threshold, cache)
    return AttackReport(
        clean_metrics,
        adv_metrics,
        epsilon,
        model_id(source),
        model_id(target),
        "reconstructed",
        mode,
    )
