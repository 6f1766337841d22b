"""Craft gradient-sign adversarial features against a trained verifier.

Reuses the checkpoint from demo 03 (run that first). Sweeps the attack
strength and prints the accuracy / false-positive-rate table: small
feature perturbations collapse the verifier while enrollment audio stays
untouched. Run:

    python demos/04_white_box_attack.py
"""
import numpy as np

from advsv import (
    DEFAULT_EPSILONS,
    FrontendConfig,
    SynthConfig,
    TrialProtocol,
    build_trials,
    epsilon_sweep,
    fgsm,
    fit_pipeline,
    load_model,
    materialize_trials,
    synth_corpus,
)

corpus = synth_corpus(SynthConfig(num_speakers=10, utterances_per_speaker=6, utterance_duration_s=1.0, seed=0))
pipeline = fit_pipeline(FrontendConfig(), (r.load() for r in corpus.subset("train")))
features = {r.utterance_id: pipeline.extract(r.load()) for r in corpus.records}
trials = materialize_trials(
    build_trials(corpus, TrialProtocol(enrollment_size=3, trials_per_speaker=12, seed=2, split="test")),
    corpus,
    features,
)
params = load_model("demo_out/verifier.bin")

one = fgsm(params, trials[0], epsilon=0.25)
print("single attacked trial:")
print(f"  label={one.original.label} p_clean={one.clean_probability:.3f} p_adv={one.adv_probability:.3f}")
print(f"  |perturbation|_inf = {np.max(np.abs(one.perturbation)):g} (every entry in -eps/0/+eps)")

print("\nsweep over attack strength:")
print("eps    clean acc  adv acc  drop   clean FPR  adv FPR")
for report in epsilon_sweep(params, trials, DEFAULT_EPSILONS):
    print(
        f"{report.epsilon:<6g} {report.clean.accuracy:>8.1%} {report.adversarial.accuracy:>8.1%}"
        f" {report.accuracy_drop:>6.1%}  {report.clean.fpr:>8.1%} {report.adversarial.fpr:>8.1%}"
    )
