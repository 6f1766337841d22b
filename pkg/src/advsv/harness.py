"""Experiment orchestration: config files, staged pipelines, reports.

An experiment is a TOML file (see README for the schema) driving
synth -> featurize -> trials -> train -> evaluate -> attack ->
reconstruct [-> transfer] -> report. Every stage writes its artifacts
under the output directory; a config hash stored there keeps stale
artifacts from mixing with a different configuration. Given a seed the
whole pipeline is deterministic, timings aside.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attack import (
    CROSS_FEATURE,
    CROSS_MODEL,
    AttackConfig,
    AttackReport,
    epsilon_sweep,
    fgsm,
    model_id,
    transfer_attack,
    white_box_attack,
)
from .audio_io import Corpus, SynthConfig, load_manifest, save_corpus, synth_corpus, write_wav
from .errors import AdvsvError, ConfigError, ValidationError
from .frontend import (
    FeatureKind,
    FeatureSequence,
    FrontendConfig,
    FrontendPipeline,
    Normalizer,
    fit_pipeline,
    load_features,
    mel_filterbank,
    save_features,
)
from .model import ModelParameters, TrainConfig, load_model, save_model, train
from .reconstruction import GriffinLimConfig, reconstruct_utterance
from .verification import (
    Metrics,
    TrialProtocol,
    TrialSet,
    build_trials,
    evaluate,
    load_trials,
    materialize_trials,
    save_trials,
)

WHITE_BOX = "white_box"
TRANSFER = "transfer"


class StageError(AdvsvError):
    """A pipeline stage failed; message carries the stage tag."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class CorpusSource:
    """Either a manifest path or a synthetic-corpus config."""

    manifest: str | None = None
    synth: SynthConfig | None = None

    def __post_init__(self):
        if (self.manifest is None) == (self.synth is None):
            raise ConfigError("corpus source needs exactly one of manifest / synth settings")


@dataclass(frozen=True)
class TransferConfig:
    """Settings for the black-box half of a transfer experiment."""

    mode: str = CROSS_FEATURE
    epsilon: float = 0.25
    corpus: CorpusSource | None = None  # None -> attack the source corpus
    frontend: FrontendConfig | None = None  # None -> same front end as source
    train: TrainConfig | None = None  # None -> same training settings

    def __post_init__(self):
        if self.mode not in (CROSS_MODEL, CROSS_FEATURE):
            raise ConfigError(f"unknown transfer mode {self.mode!r}")
        if self.epsilon < 0:
            raise ConfigError("transfer epsilon must be non-negative")


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: CorpusSource
    kind: str = WHITE_BOX
    seed: int = 0
    frontend: FrontendConfig = FrontendConfig()
    protocol: TrialProtocol = TrialProtocol()
    train: TrainConfig = TrainConfig()
    attack: AttackConfig = AttackConfig()
    griffin_lim: GriffinLimConfig = GriffinLimConfig()
    reconstruct_pairs: bool = True
    abx_pool_size: int = 50
    transfer: TransferConfig | None = None

    def __post_init__(self):
        if self.kind not in (WHITE_BOX, TRANSFER):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.kind == TRANSFER and self.transfer is None:
            raise ConfigError("transfer experiments need a [transfer] section")

    def snapshot(self) -> dict:
        """Canonical JSON-ready form; the config hash is computed over this."""

        def synth_dict(s: SynthConfig | None):
            if s is None:
                return None
            return {
                "num_speakers": s.num_speakers,
                "utterances_per_speaker": s.utterances_per_speaker,
                "utterance_duration_s": s.utterance_duration_s,
                "seed": s.seed,
                "sample_rate_hz": s.sample_rate_hz,
            }

        def corpus_dict(c: CorpusSource | None):
            if c is None:
                return None
            return {"manifest": c.manifest, "synth": synth_dict(c.synth)}

        def frontend_dict(f: FrontendConfig | None):
            if f is None:
                return None
            return {
                "frame_length_samples": f.frame_length_samples,
                "hop_samples": f.hop_samples,
                "fft_size": f.fft_size,
                "num_mel_channels": f.num_mel_channels,
                "num_mfcc": f.num_mfcc,
                "mel_fmin_hz": f.mel_fmin_hz,
                "mel_fmax_hz": f.mel_fmax_hz,
                "log_floor": f.log_floor,
                "feature_kind": f.feature_kind.value,
                "sample_rate_hz": f.sample_rate_hz,
            }

        def train_dict(t: TrainConfig | None):
            if t is None:
                return None
            return {
                "learning_rate": t.learning_rate,
                "batch_size": t.batch_size,
                "epochs": t.epochs,
                "seed": t.seed,
                "grad_clip_norm": t.grad_clip_norm,
                "optimizer": t.optimizer,
                "hidden_size": t.hidden_size,
                "val_fraction": t.val_fraction,
            }

        snap = {
            "kind": self.kind,
            "seed": self.seed,
            "corpus": corpus_dict(self.corpus),
            "frontend": frontend_dict(self.frontend),
            "protocol": {
                "enrollment_size": self.protocol.enrollment_size,
                "trials_per_speaker": self.protocol.trials_per_speaker,
            },
            "train": train_dict(self.train),
            "attack": {"epsilons": list(self.attack.epsilons), "norm": self.attack.norm},
            "griffin_lim": {
                "iterations": self.griffin_lim.iterations,
                "phase_init": self.griffin_lim.phase_init,
                "seed": self.griffin_lim.seed,
                "momentum": self.griffin_lim.momentum,
            },
            "reconstruct_pairs": self.reconstruct_pairs,
            "abx_pool_size": self.abx_pool_size,
            "transfer": None,
        }
        if self.transfer is not None:
            snap["transfer"] = {
                "mode": self.transfer.mode,
                "epsilon": self.transfer.epsilon,
                "corpus": corpus_dict(self.transfer.corpus),
                "frontend": frontend_dict(self.transfer.frontend),
                "train": train_dict(self.transfer.train),
            }
        return snap

    def config_hash(self) -> str:
        canonical = json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _load_toml(path) -> dict:
    if sys.version_info >= (3, 11):
        import tomllib as toml_reader
    else:
        import tomli as toml_reader
    with open(path, "rb") as fh:
        return toml_reader.load(fh)


def _synth_from_dict(d: dict, default_seed: int) -> SynthConfig:
    return SynthConfig(
        num_speakers=int(d.get("num_speakers", 20)),
        utterances_per_speaker=int(d.get("utterances_per_speaker", 12)),
        utterance_duration_s=float(d.get("utterance_duration_s", 2.0)),
        seed=int(d.get("seed", default_seed)),
        sample_rate_hz=int(d.get("sample_rate_hz", 8000)),
    )


def _corpus_from_dict(d: dict, default_seed: int, base: Path) -> CorpusSource:
    if "manifest" in d:
        manifest = str(d["manifest"])
        if not Path(manifest).is_absolute():
            manifest = str(base / manifest)
        return CorpusSource(manifest=manifest)
    return CorpusSource(synth=_synth_from_dict(d, default_seed))


def _frontend_from_dict(d: dict) -> FrontendConfig:
    kwargs = dict(d)
    if "feature_kind" in kwargs:
        kwargs["feature_kind"] = FeatureKind(kwargs["feature_kind"])
    return FrontendConfig(**kwargs)


def _train_from_dict(d: dict, default_seed: int) -> TrainConfig:
    kwargs = dict(d)
    kwargs.setdefault("seed", default_seed)
    return TrainConfig(**kwargs)


def load_experiment_config(path, seed_override: int | None = None) -> ExperimentConfig:
    """Parse a TOML experiment file; relative manifest paths resolve
    against the config file's directory. seed_override replaces the
    experiment seed before any derived seed defaults are computed."""
    raw = _load_toml(path)
    base = Path(path).parent
    exp = raw.get("experiment", {})
    seed = int(exp.get("seed", 0)) if seed_override is None else seed_override
    if "corpus" not in raw:
        raise ConfigError(f"{path}: missing [corpus] section")
    corpus = _corpus_from_dict(raw["corpus"], seed, base)
    frontend = _frontend_from_dict(raw.get("frontend", {}))
    proto = raw.get("protocol", {})
    protocol = TrialProtocol(
        enrollment_size=int(proto.get("enrollment_size", 10)),
        trials_per_speaker=int(proto.get("trials_per_speaker", 10)),
    )
    train_cfg = _train_from_dict(raw.get("train", {}), seed)
    attack_raw = raw.get("attack", {})
    attack_cfg = AttackConfig(
        epsilons=tuple(attack_raw.get("epsilons", list(AttackConfig().epsilons))),
        norm=attack_raw.get("norm", "linf"),
    )
    gl_raw = raw.get("reconstruction", {})
    gl = GriffinLimConfig(
        iterations=int(gl_raw.get("iterations", 100)),
        phase_init=gl_raw.get("phase_init", "random"),
        seed=int(gl_raw.get("seed", seed)),
        momentum=float(gl_raw.get("momentum", 0.0)),
    )
    transfer = None
    if "transfer" in raw:
        traw = raw["transfer"]
        transfer = TransferConfig(
            mode=traw.get("mode", CROSS_FEATURE),
            epsilon=float(traw.get("epsilon", 0.25)),
            corpus=_corpus_from_dict(traw["corpus"], seed + 1000, base) if "corpus" in traw else None,
            frontend=_frontend_from_dict(traw["frontend"]) if "frontend" in traw else None,
            train=_train_from_dict(traw["train"], seed) if "train" in traw else None,
        )
    return ExperimentConfig(
        corpus=corpus,
        kind=exp.get("kind", WHITE_BOX),
        seed=seed,
        frontend=frontend,
        protocol=protocol,
        train=train_cfg,
        attack=attack_cfg,
        griffin_lim=gl,
        reconstruct_pairs=bool(gl_raw.get("enabled", True)),
        abx_pool_size=int(exp.get("abx_pool_size", 50)),
        transfer=transfer,
    )


@dataclass
class ReportBundle:
    """Everything one experiment produced, JSON-serializable."""

    config: dict
    config_hash: str
    clean: Metrics
    attacks: list[AttackReport] = field(default_factory=list)
    transfer: AttackReport | None = None
    abx_pairs_manifest: str | None = None  # relative to the output dir
    timings: dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_timings: bool = True) -> dict:
        d = {
            "config": self.config,
            "config_hash": self.config_hash,
            "clean": self.clean.to_dict(),
            "attacks": [a.to_dict() for a in self.attacks],
            "transfer": self.transfer.to_dict() if self.transfer else None,
            "abx_pairs_manifest": self.abx_pairs_manifest,
        }
        if include_timings:
            d["timings"] = self.timings
        return d

    def comparable_dict(self) -> dict:
        """Bundle contents with timings excluded, for determinism checks."""
        return self.to_dict(include_timings=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ReportBundle":
        return cls(
            config=d["config"],
            config_hash=d["config_hash"],
            clean=Metrics.from_dict(d["clean"]),
            attacks=[AttackReport.from_dict(a) for a in d["attacks"]],
            transfer=AttackReport.from_dict(d["transfer"]) if d.get("transfer") else None,
            abx_pairs_manifest=d.get("abx_pairs_manifest"),
            timings=d.get("timings", {}),
        )

    def best_attack(self) -> AttackReport | None:
        if not self.attacks:
            return None
        return max(self.attacks, key=lambda a: a.accuracy_drop)


class ExperimentState:
    """Lazy artifact store shared by the stages.

    Everything is materialized under out_dir; properties load from disk
    when a previous stage already produced the artifact (so CLI stages
    can run in separate processes) and compute-and-save otherwise.
    """

    # derived seeds, documented offsets from the experiment seed
    TRAIN_TRIALS_SEED_OFFSET = 1
    TEST_TRIALS_SEED_OFFSET = 2

    def __init__(self, cfg: ExperimentConfig, out_dir):
        self.cfg = cfg
        self.out = Path(out_dir)
        self.timings: dict[str, float] = {}
        self._corpus: Corpus | None = None
        self._pipeline: FrontendPipeline | None = None
        self._features: dict[str, FeatureSequence] | None = None
        self._target_state: "ExperimentState | None" = None

    # -- config hash guard ----------------------------------------------

    def ensure_out_dir(self) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        marker = self.out / "config.json"
        payload = {"config": self.cfg.snapshot(), "config_hash": self.cfg.config_hash()}
        if marker.exists():
            existing = json.loads(marker.read_text())
            if existing.get("config_hash") != payload["config_hash"]:
                raise ConfigError(
                    f"{self.out} holds artifacts for config {existing.get('config_hash', '?')[:12]}, "
                    f"current config is {payload['config_hash'][:12]}; use a fresh output directory"
                )
        else:
            marker.write_text(json.dumps(payload, indent=2, sort_keys=True))

    def _timed(self, stage: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except AdvsvError as exc:
            raise StageError(stage, exc) from exc
        self.timings[stage] = time.perf_counter() - start
        return result

    # -- corpus -----------------------------------------------------------

    @property
    def corpus_manifest(self) -> Path:
        if self.cfg.corpus.manifest is not None:
            return Path(self.cfg.corpus.manifest)
        return self.out / "corpus" / "manifest.csv"

    def stage_synth(self) -> Corpus:
        """Materialize the corpus on disk (synthetic corpora are written as WAVs)."""

        def run():
            if self.cfg.corpus.manifest is not None:
                corpus = load_manifest(self.cfg.corpus.manifest)
            else:
                manifest = self.corpus_manifest
                if not manifest.exists():
                    self.ensure_out_dir()
                    save_corpus(synth_corpus(self.cfg.corpus.synth), manifest.parent)
                # always read back from disk so in-process runs and staged
                # CLI runs see identical (quantized) audio
                corpus = load_manifest(manifest)
            self._corpus = corpus
            return corpus

        return self._timed("synth", run)

    @property
    def corpus(self) -> Corpus:
        if self._corpus is None:
            if self.cfg.corpus.manifest is None and not self.corpus_manifest.exists():
                raise ConfigError("corpus not materialized; run the synth stage first")
            self._corpus = load_manifest(self.corpus_manifest)
        return self._corpus

    # -- features ---------------------------------------------------------

    @property
    def pipeline_path(self) -> Path:
        return self.out / "pipeline.json"

    @property
    def features_dir(self) -> Path:
        return self.out / "features"

    def stage_featurize(self) -> None:
        def run():
            self.ensure_out_dir()
            corpus = self.corpus
            pipeline = fit_pipeline(
                self.cfg.frontend, (r.load() for r in corpus.subset("train"))
            )
            save_pipeline(pipeline, self.pipeline_path)
            self.features_dir.mkdir(exist_ok=True)
            feats = {}
            for rec in corpus.records:
                f = pipeline.extract(rec.load())
                save_features(f, self.features_dir / f"{rec.utterance_id}.feat")
                feats[rec.utterance_id] = f
            self._pipeline = pipeline
            self._features = feats

        return self._timed("featurize", run)

    @property
    def pipeline(self) -> FrontendPipeline:
        if self._pipeline is None:
            if not self.pipeline_path.exists():
                raise ConfigError("pipeline not fitted; run the featurize stage first")
            self._pipeline = load_pipeline(self.pipeline_path)
        return self._pipeline

    @property
    def features(self) -> dict[str, FeatureSequence]:
        if self._features is None:
            if not self.features_dir.exists():
                raise ConfigError("features not extracted; run the featurize stage first")
            self._features = {
                rec.utterance_id: load_features(self.features_dir / f"{rec.utterance_id}.feat")
                for rec in self.corpus.records
            }
        return self._features

    # -- trials -----------------------------------------------------------

    def _trials_path(self, split: str) -> Path:
        return self.out / f"trials_{split}.csv"

    def stage_trials(self) -> None:
        def run():
            self.ensure_out_dir()
            base = self.cfg.protocol
            for split, offset in (
                ("train", self.TRAIN_TRIALS_SEED_OFFSET),
                ("test", self.TEST_TRIALS_SEED_OFFSET),
            ):
                protocol = TrialProtocol(
                    base.enrollment_size,
                    base.trials_per_speaker,
                    seed=self.cfg.seed + offset,
                    split=split,
                )
                save_trials(build_trials(self.corpus, protocol), self._trials_path(split))

        return self._timed("trials", run)

    def trials(self, split: str) -> TrialSet:
        path = self._trials_path(split)
        if not path.exists():
            raise ConfigError(f"{split} trials missing; run the trials stage first")
        return load_trials(path)

    def materialized(self, split: str):
        return materialize_trials(self.trials(split), self.corpus, self.features)

    # -- model ------------------------------------------------------------

    @property
    def model_path(self) -> Path:
        return self.out / "model.bin"

    def stage_train(self) -> ModelParameters:
        def run():
            params = train(self.materialized("train"), self.cfg.train)
            save_model(params, self.model_path)
            return params

        return self._timed("train", run)

    @property
    def model(self) -> ModelParameters:
        if not self.model_path.exists():
            raise ConfigError("model not trained; run the train stage first")
        return load_model(self.model_path)

    # -- evaluate / attack --------------------------------------------------

    def stage_evaluate(self) -> Metrics:
        def run():
            metrics = evaluate(self.model, self.materialized("test"))
            (self.out / "evaluation.json").write_text(
                json.dumps(metrics.to_dict(), indent=2, sort_keys=True)
            )
            return metrics

        return self._timed("evaluate", run)

    @property
    def clean_metrics(self) -> Metrics:
        path = self.out / "evaluation.json"
        if not path.exists():
            raise ConfigError("evaluation missing; run the evaluate stage first")
        return Metrics.from_dict(json.loads(path.read_text()))

    def stage_attack(self) -> list[AttackReport]:
        def run():
            reports = epsilon_sweep(
                self.model, self.materialized("test"), self.cfg.attack.epsilons
            )
            (self.out / "attacks.json").write_text(
                json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)
            )
            return reports

        return self._timed("attack", run)

    @property
    def attack_reports(self) -> list[AttackReport]:
        path = self.out / "attacks.json"
        if not path.exists():
            raise ConfigError("attack reports missing; run the attack stage first")
        return [AttackReport.from_dict(d) for d in json.loads(path.read_text())]

    # -- reconstruction / ABX pairs -----------------------------------------

    @property
    def recon_dir(self) -> Path:
        return self.out / "recon"

    @property
    def abx_pairs_path(self) -> Path:
        return self.out / "abx_pairs.csv"

    def stage_reconstruct(self) -> None:
        """Write clean/adversarial waveform pairs for the listening test,
        at the sweep epsilon that hurt accuracy the most."""

        def run():
            if self.cfg.frontend.feature_kind is not FeatureKind.LOG_MEL:
                (self.out / "abx_skipped.txt").write_text(
                    "reconstruction skipped: front end is MFCC, inversion is log-Mel only\n"
                )
                return
            reports = self.attack_reports
            best = max(reports, key=lambda r: r.accuracy_drop)
            eps = best.epsilon
            trials = self.materialized("test")
            records = self.trials("test").records
            self.recon_dir.mkdir(exist_ok=True)
            model = self.model
            pipeline = self.pipeline
            # one pair per distinct test utterance, up to the pool size
            seen: set[str] = set()
            lines = []
            for rec, trial in zip(records, trials):
                utt = rec.test_utterance_id
                if utt in seen:
                    continue
                if len(seen) >= self.cfg.abx_pool_size:
                    break
                seen.add(utt)
                attacked = fgsm(model, trial, eps)
                clean_name = f"{utt}.clean.wav"
                adv_name = f"{utt}.adv-eps{eps:g}.wav"
                write_wav(
                    self.recon_dir / clean_name,
                    reconstruct_utterance(trial.test, pipeline, self.cfg.griffin_lim),
                )
                write_wav(
                    self.recon_dir / adv_name,
                    reconstruct_utterance(attacked.adversarial.test, pipeline, self.cfg.griffin_lim),
                )
                lines.append(f"{utt},recon/{clean_name},recon/{adv_name}")
            self.abx_pairs_path.write_text(
                "# pair_id,clean_path,adv_path (paths relative to this file)\n"
                + "\n".join(lines)
                + "\n"
            )

        return self._timed("reconstruct", run)

    # -- transfer -----------------------------------------------------------

    def target_state(self) -> "ExperimentState":
        """A nested experiment state for the transfer target system."""
        if self._target_state is not None:
            return self._target_state
        tc = self.cfg.transfer
        if tc is None:
            raise ConfigError("not a transfer experiment")
        target_cfg = ExperimentConfig(
            corpus=tc.corpus if tc.corpus is not None else self.cfg.corpus,
            kind=WHITE_BOX,
            seed=self.cfg.seed,
            frontend=tc.frontend if tc.frontend is not None else self.cfg.frontend,
            protocol=self.cfg.protocol,
            train=tc.train if tc.train is not None else self.cfg.train,
            attack=self.cfg.attack,
            griffin_lim=self.cfg.griffin_lim,
            reconstruct_pairs=False,
        )
        state = ExperimentState(target_cfg, self.out / "target")
        if target_cfg.corpus.manifest is None and self.cfg.transfer.corpus is None:
            # same corpus as the source: reuse the materialized WAVs
            state._corpus = self.corpus
        self._target_state = state
        return state

    def stage_transfer(self) -> AttackReport:
        def run():
            tc = self.cfg.transfer
            target = self.target_state()
            if tc.corpus is not None:
                target.stage_synth()
            target.stage_featurize()
            target.stage_trials()
            target.stage_train()
            report = transfer_attack(
                source=self.model,
                source_pipeline=self.pipeline,
                target=target.model,
                target_pipeline=target.pipeline,
                trials=self.trials("test"),
                corpus=self.corpus,
                epsilon=tc.epsilon,
                mode=tc.mode,
                glc=self.cfg.griffin_lim,
                save_wav_dir=self.out / "transfer_recon",
            )
            (self.out / "transfer.json").write_text(
                json.dumps(report.to_dict(), indent=2, sort_keys=True)
            )
            for stage, seconds in target.timings.items():
                self.timings[f"target.{stage}"] = seconds
            return report

        return self._timed("transfer", run)

    @property
    def transfer_report(self) -> AttackReport | None:
        path = self.out / "transfer.json"
        if not path.exists():
            return None
        return AttackReport.from_dict(json.loads(path.read_text()))

    # -- report ---------------------------------------------------------------

    def stage_report(self) -> ReportBundle:
        def run():
            bundle = ReportBundle(
                config=self.cfg.snapshot(),
                config_hash=self.cfg.config_hash(),
                clean=self.clean_metrics,
                attacks=self.attack_reports,
                transfer=self.transfer_report,
                abx_pairs_manifest="abx_pairs.csv" if self.abx_pairs_path.exists() else None,
                timings=dict(self.timings),
            )
            (self.out / "bundle.json").write_text(
                json.dumps(bundle.to_dict(), indent=2, sort_keys=True)
            )
            (self.out / "report.md").write_text(render_report(bundle, "markdown"))
            return bundle

        return self._timed("report", run)


def run_experiment(cfg: ExperimentConfig, out_dir) -> ReportBundle:
    """Execute the full stage pipeline for one experiment config."""
    if cfg.corpus.manifest is not None and not Path(cfg.corpus.manifest).exists():
        raise ValidationError(f"manifest not found: {cfg.corpus.manifest}")
    if cfg.transfer and cfg.transfer.corpus and cfg.transfer.corpus.manifest is not None:
        if not Path(cfg.transfer.corpus.manifest).exists():
            raise ValidationError(f"manifest not found: {cfg.transfer.corpus.manifest}")
    state = ExperimentState(cfg, out_dir)
    state.ensure_out_dir()
    state.stage_synth()
    state.stage_featurize()
    state.stage_trials()
    state.stage_train()
    state.stage_evaluate()
    state.stage_attack()
    if cfg.reconstruct_pairs and cfg.kind == WHITE_BOX:
        state.stage_reconstruct()
    if cfg.kind == TRANSFER:
        state.stage_transfer()
    return state.stage_report()


# --- pipeline persistence -----------------------------------------------


def save_pipeline(pipeline: FrontendPipeline, path) -> None:
    cfg = pipeline.config
    payload = {
        "frontend": {
            "frame_length_samples": cfg.frame_length_samples,
            "hop_samples": cfg.hop_samples,
            "fft_size": cfg.fft_size,
            "num_mel_channels": cfg.num_mel_channels,
            "num_mfcc": cfg.num_mfcc,
            "mel_fmin_hz": cfg.mel_fmin_hz,
            "mel_fmax_hz": cfg.mel_fmax_hz,
            "log_floor": cfg.log_floor,
            "feature_kind": cfg.feature_kind.value,
            "sample_rate_hz": cfg.sample_rate_hz,
        },
        "normalizer": {
            "mean": pipeline.normalizer.mean.tolist(),
            "std": pipeline.normalizer.std.tolist(),
        },
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))


def load_pipeline(path) -> FrontendPipeline:
    payload = json.loads(Path(path).read_text())
    fr = dict(payload["frontend"])
    fr["feature_kind"] = FeatureKind(fr["feature_kind"])
    cfg = FrontendConfig(**fr)
    normalizer = Normalizer(
        np.asarray(payload["normalizer"]["mean"], dtype=np.float64),
        np.asarray(payload["normalizer"]["std"], dtype=np.float64),
    )
    return FrontendPipeline(cfg, mel_filterbank(cfg), normalizer)


# --- report rendering -----------------------------------------------------


def _pct(x: float | None) -> str:
    return "n/a" if x is None else f"{100.0 * x:.2f}%"


def _attack_label(r: AttackReport) -> str:
    if r.pipeline == "reconstructed":
        return f"{r.mode} eps={r.epsilon:g}"
    return f"white-box eps={r.epsilon:g}"


def render_report(bundle: ReportBundle, fmt: str = "markdown") -> str:
    """Render the experiment outcome; json is lossless, markdown mirrors
    the Original test / Adversarial test / Diff table layout."""
    if fmt == "json":
        return json.dumps(bundle.to_dict(), indent=2, sort_keys=True)
    if fmt != "markdown":
        raise ValidationError(f"unknown report format {fmt!r}")
    lines = [
        "# Speaker verification attack report",
        "",
        f"- config hash: `{bundle.config_hash[:12]}`",
        f"- clean test accuracy: {_pct(bundle.clean.accuracy)} "
        f"(FPR {_pct(bundle.clean.fpr)}, FNR {_pct(bundle.clean.fnr)})",
        "",
    ]
    rows = list(bundle.attacks)
    if bundle.transfer is not None:
        rows.append(bundle.transfer)
    if not rows:
        lines += ["No attacks were run; FPR table omitted.", ""]
        return "\n".join(lines)
    lines += [
        "## Accuracy",
        "",
        "| Attack | Original test | Adversarial test | Diff |",
        "| --- | --- | --- | --- |",
    ]
    for r in rows:
        lines.append(
            f"| {_attack_label(r)} | {_pct(r.clean.accuracy)} | "
            f"{_pct(r.adversarial.accuracy)} | {_pct(r.accuracy_drop)} |"
        )
    lines += [
        "",
        "## False-positive rate",
        "",
        "| Attack | Original test | Adversarial test |",
        "| --- | --- | --- |",
    ]
    for r in rows:
        lines.append(f"| {_attack_label(r)} | {_pct(r.clean.fpr)} | {_pct(r.adversarial.fpr)} |")
    lines.append("")
    return "\n".join(lines)
