"""Black-box attack: craft on one system, strike another through audio.

Two verifiers are trained with nothing in common but physics: different
speakers (disjoint corpora) or different features (log-Mel vs MFCC).
Adversarial features from the source system are rendered to waveforms
and re-featurized by the target's own pipeline. Expect a smaller but
clearly nonzero hit compared to the white-box column. Takes a while
(two trainings plus Griffin-Lim per trial). Run:

    python demos/06_transfer_attack.py
"""
from advsv import (
    CROSS_FEATURE,
    FeatureKind,
    FrontendConfig,
    GriffinLimConfig,
    SynthConfig,
    TrainConfig,
    TrialProtocol,
    build_trials,
    fit_pipeline,
    materialize_trials,
    synth_corpus,
    train,
    transfer_attack,
    white_box_attack,
)

corpus = synth_corpus(SynthConfig(num_speakers=10, utterances_per_speaker=6, utterance_duration_s=1.0, seed=0))
protocol = TrialProtocol(enrollment_size=3, trials_per_speaker=10, seed=1, split="train")
trials_test = build_trials(corpus, TrialProtocol(3, 10, seed=2, split="test"))
train_cfg = TrainConfig(epochs=8, batch_size=4, learning_rate=3e-3, seed=0)

systems = {}
for name, kind in (("source/log-mel", FeatureKind.LOG_MEL), ("target/mfcc", FeatureKind.MFCC)):
    pipeline = fit_pipeline(FrontendConfig(feature_kind=kind), (r.load() for r in corpus.subset("train")))
    features = {r.utterance_id: pipeline.extract(r.load()) for r in corpus.records}
    fit_trials = materialize_trials(build_trials(corpus, protocol), corpus, features)
    print(f"training {name} ...")
    systems[name] = (train(fit_trials, train_cfg), pipeline, features)

source_model, source_pipe, source_feats = systems["source/log-mel"]
target_model, target_pipe, _ = systems["target/mfcc"]

eps = 0.25
wb = white_box_attack(source_model, materialize_trials(trials_test, corpus, source_feats), eps)
print(f"white-box on source: acc {wb.clean.accuracy:.1%} -> {wb.adversarial.accuracy:.1%} "
      f"(drop {wb.accuracy_drop:.1%})")

report = transfer_attack(
    source_model, source_pipe, target_model, target_pipe,
    trials_test, corpus, epsilon=eps, mode=CROSS_FEATURE,
    glc=GriffinLimConfig(iterations=60, seed=0),
)
print(f"transfer to target:  acc {report.clean.accuracy:.1%} -> {report.adversarial.accuracy:.1%} "
      f"(drop {report.accuracy_drop:.1%})")
print(f"target FPR through reconstruction: {report.clean.fpr:.1%} -> {report.adversarial.fpr:.1%}")
print("white-box hurts more than transfer, but the transfer attack still lands")
