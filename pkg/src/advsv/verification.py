"""Trial construction, enrollment averaging, and clean-performance metrics.

Trials are stored by utterance id so an experiment is replayable and the
same protocol can be materialized under different feature pipelines; a
materialized TrialExample carries the actual feature matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .audio_io import Corpus
from .errors import ContractError, ProtocolError, ValidationError
from .frontend import FeatureSequence
from .model import Embedding, ModelParameters, cosine_similarity, embed_utterance, score


@dataclass(frozen=True)
class TrialProtocol:
    """How trials are drawn: n enrollment utterances, trials per speaker."""

    enrollment_size: int = 10
    trials_per_speaker: int = 10
    seed: int = 0
    split: str = "test"

    def describe(self) -> str:
        return (
            f"n={self.enrollment_size},trials_per_speaker={self.trials_per_speaker},"
            f"seed={self.seed},split={self.split}"
        )


@dataclass(frozen=True)
class TrialRecord:
    """Id-level description of one trial; label 1 means same speaker."""

    trial_id: str
    label: int
    test_utterance_id: str
    enroll_speaker_id: str
    enroll_utterance_ids: tuple[str, ...]


@dataclass(frozen=True)
class TrialSet:
    records: tuple[TrialRecord, ...]
    protocol: str

    def __len__(self) -> int:
        return len(self.records)

    @property
    def num_positive(self) -> int:
        return sum(r.label for r in self.records)


def build_trials(corpus: Corpus, protocol: TrialProtocol) -> TrialSet:
    """Draw seeded trials: one test utterance plus n distinct same-speaker
    enrollments, then swap the enrollment set of exactly half the trials
    with another speaker's to create negatives.
    """
    n = protocol.enrollment_size
    speakers = corpus.speakers(protocol.split)
    if not speakers:
        raise ProtocolError(f"corpus has no {protocol.split} speakers")
    if len(speakers) < 2:
        raise ProtocolError(
            f"negative trials need at least two {protocol.split} speakers, got {len(speakers)}"
        )
    utts_by_speaker = {s: [r.utterance_id for r in corpus.utterances_of(s)] for s in speakers}
    for s, utts in utts_by_speaker.items():
        if len(utts) < n + 1:
            raise ProtocolError(
                f"speaker {s!r} has {len(utts)} utterances; protocol needs at least {n + 1}"
            )
    rng = np.random.default_rng(protocol.seed)
    records: list[TrialRecord] = []
    for s in speakers:
        utts = utts_by_speaker[s]
        for _ in range(protocol.trials_per_speaker):
            test_idx = int(rng.integers(len(utts)))
            test_utt = utts[test_idx]
            others = [u for u in utts if u != test_utt]
            pick = rng.permutation(len(others))[:n]
            records.append(
                TrialRecord(
                    trial_id=f"trial{len(records):05d}",
                    label=1,
                    test_utterance_id=test_utt,
                    enroll_speaker_id=s,
                    enroll_utterance_ids=tuple(others[i] for i in pick),
                )
            )
    # Negative instances: replace the enrollment set of a seeded half of
    # the trials with a different speaker's enrollment.
    num_negative = len(records) // 2
    negative_positions = rng.permutation(len(records))[:num_negative]
    speaker_of_test = {r.utterance_id: r.speaker_id for r in corpus.records}
    out = list(records)
    for pos in sorted(int(i) for i in negative_positions):
        rec = out[pos]
        test_speaker = speaker_of_test[rec.test_utterance_id]
        donors = [s for s in speakers if s != test_speaker]
        donor = donors[int(rng.integers(len(donors)))]
        donor_utts = utts_by_speaker[donor]
        pick = rng.permutation(len(donor_utts))[:n]
        out[pos] = replace(
            rec,
            label=0,
            enroll_speaker_id=donor,
            enroll_utterance_ids=tuple(donor_utts[i] for i in pick),
        )
    return TrialSet(tuple(out), protocol.describe())


def save_trials(trials: TrialSet, path) -> None:
    """Text export: trial_id,label,test_utterance_id,enroll_speaker_id,enroll_ids(;-sep)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# protocol: {trials.protocol}\n")
        for r in trials.records:
            fh.write(
                f"{r.trial_id},{r.label},{r.test_utterance_id},{r.enroll_speaker_id},"
                + ";".join(r.enroll_utterance_ids)
                + "\n"
            )


def load_trials(path) -> TrialSet:
    records = []
    protocol = "unknown"
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("# protocol:"):
                protocol = line.split(":", 1)[1].strip()
                continue
            if not line or line.startswith("#"):
                continue
            trial_id, label, test_utt, enroll_spk, enroll_utts = line.split(",")
            records.append(
                TrialRecord(trial_id, int(label), test_utt, enroll_spk, tuple(enroll_utts.split(";")))
            )
    if not records:
        raise ValidationError(f"{path}: no trials")
    return TrialSet(tuple(records), protocol)


@dataclass(frozen=True)
class EnrollmentSet:
    """The n claimed-speaker utterances a trial scores against."""

    speaker_id: str
    utterances: tuple[FeatureSequence, ...]
    utterance_ids: tuple[str, ...] | None = None  # set when materialized from a corpus

    def __post_init__(self):
        if not self.utterances:
            raise ContractError("enrollment set must contain at least one utterance")
        dims = {f.dim for f in self.utterances}
        if len(dims) > 1:
            raise ValidationError("enrollment utterances have mixed feature dimensions")


@dataclass(frozen=True)
class TrialExample:
    """A materialized trial: test features, enrollment features, label."""

    test: FeatureSequence
    enrollment: EnrollmentSet
    label: int
    trial_id: str = ""

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label}")


def materialize_trials(
    trials: TrialSet,
    corpus: Corpus,
    features: Mapping[str, FeatureSequence],
) -> list[TrialExample]:
    """Bind feature matrices to an id-level TrialSet.

    Validates the two protocol invariants: labels are consistent with
    speaker identity, and a test utterance never sits in its own
    enrollment set.
    """
    speaker_of = {r.utterance_id: r.speaker_id for r in corpus.records}
    examples = []
    for rec in trials.records:
        if rec.test_utterance_id in rec.enroll_utterance_ids:
            raise ValidationError(f"{rec.trial_id}: test utterance inside its enrollment set")
        expected = int(speaker_of[rec.test_utterance_id] == rec.enroll_speaker_id)
        if expected != rec.label:
            raise ValidationError(f"{rec.trial_id}: label inconsistent with speaker identity")
        examples.append(
            TrialExample(
                test=features[rec.test_utterance_id],
                enrollment=EnrollmentSet(
                    rec.enroll_speaker_id,
                    tuple(features[u] for u in rec.enroll_utterance_ids),
                    rec.enroll_utterance_ids,
                ),
                label=rec.label,
                trial_id=rec.trial_id,
            )
        )
    return examples


class EnrollmentCache:
    """Memoizes averaged enrollment embeddings across trials sharing a set.

    Keyed by the materialized utterance ids; hand-built sets without ids
    are computed fresh each time.
    """

    def __init__(self):
        self._store: dict[tuple[str, tuple[str, ...]], Embedding] = {}

    def lookup(self, e: EnrollmentSet):
        if e.utterance_ids is None:
            return None
        return self._store.get((e.speaker_id, e.utterance_ids))

    def insert(self, e: EnrollmentSet, v: Embedding) -> None:
        if e.utterance_ids is not None:
            self._store[(e.speaker_id, e.utterance_ids)] = v


def enroll(
    params: ModelParameters, e: EnrollmentSet, cache: EnrollmentCache | None = None
) -> Embedding:
    """Average the enrollment embeddings into a single speaker model."""
    if cache is not None:
        hit = cache.lookup(e)
        if hit is not None:
            return hit
    embeddings = [embed_utterance(params, f)[0] for f in e.utterances]
    v = np.mean(embeddings, axis=0)
    if cache is not None:
        cache.insert(e, v)
    return v


def trial_probability(
    params: ModelParameters, trial: TrialExample, cache: EnrollmentCache | None = None
) -> float:
    u, _ = embed_utterance(params, trial.test)
    v = enroll(params, trial.enrollment, cache)
    return score(params, cosine_similarity(u, v))


@dataclass(frozen=True)
class Metrics:
    """Confusion counts plus the headline accuracy/FPR/FNR rates.

    fpr/fnr are None when their denominator is empty (all-positive or
    all-negative trial sets), never silently 0.
    """

    accuracy: float
    fpr: float | None
    fnr: float | None
    tp: int
    tn: int
    fp: int
    fn: int
    threshold: float

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "fpr": self.fpr,
            "fnr": self.fnr,
            "tp": self.tp,
            "tn": self.tn,
            "fp": self.fp,
            "fn": self.fn,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        return cls(**d)

    @classmethod
    def from_counts(cls, tp: int, tn: int, fp: int, fn: int, threshold: float) -> "Metrics":
        total = tp + tn + fp + fn
        return cls(
            accuracy=(tp + tn) / total,
            fpr=fp / (fp + tn) if (fp + tn) > 0 else None,
            fnr=fn / (fn + tp) if (fn + tp) > 0 else None,
            tp=tp,
            tn=tn,
            fp=fp,
            fn=fn,
            threshold=threshold,
        )


def evaluate(
    params: ModelParameters,
    trials: Sequence[TrialExample],
    threshold: float = 0.5,
    cache: EnrollmentCache | None = None,
) -> Metrics:
    """Accept when p > threshold; assemble Metrics from the confusion counts."""
    if not trials:
        raise ValidationError("cannot evaluate an empty trial set")
    if cache is None:
        cache = EnrollmentCache()
    tp = tn = fp = fn = 0
    for trial in trials:
        accept = trial_probability(params, trial, cache) > threshold
        if trial.label == 1:
            tp += accept
            fn += not accept
        else:
            fp += accept
            tn += not accept
    return Metrics.from_counts(tp, tn, fp, fn, threshold)
