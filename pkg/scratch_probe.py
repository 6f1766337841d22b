"""Probe saved calibration models: cluster geometry, shift-vs-eps, sweep (scratch)."""
import sys

import numpy as np

from advsv import *
from advsv.harness import load_pipeline
from advsv.model import load_model, embed_utterance, cosine_similarity
from advsv.verification import enroll, EnrollmentCache
from advsv.attack import fgsm

tag = sys.argv[1]
dur = float(sys.argv[2])
params = load_model(f"/tmp/calib_model_{tag}.bin")
pipe = load_pipeline(f"/tmp/calib_pipe_{tag}.json")
corpus = synth_corpus(SynthConfig(num_speakers=20, utterances_per_speaker=8, utterance_duration_s=dur, seed=0))
feats = {r.utterance_id: pipe.extract(r.load()) for r in corpus.records}
test_trials = materialize_trials(build_trials(corpus, TrialProtocol(4, 40, seed=2, split="test")), corpus, feats)

m = evaluate(params, test_trials)
print(f"[{tag}] clean: acc={m.accuracy:.3f} fpr={m.fpr:.3f} fnr={m.fnr:.3f} (n={m.total})")

cache = EnrollmentCache()
pos, neg = [], []
for t in test_trials:
    u, _ = embed_utterance(params, t.test)
    v = enroll(params, t.enrollment, cache)
    (pos if t.label == 1 else neg).append(cosine_similarity(u, v))
thr = -params.score_bias / params.score_scale
print(f"[{tag}] cosine: pos {np.mean(pos):.3f}+-{np.std(pos):.3f} neg {np.mean(neg):.3f}+-{np.std(neg):.3f} "
      f"| boundary s*={thr:.3f} w={params.score_scale:.2f}")

for eps in (0.15, 0.25, 0.3):
    shifts = []
    for t in test_trials[:30]:
        if t.label == 1:
            continue
        u, _ = embed_utterance(params, t.test)
        v = enroll(params, t.enrollment, cache)
        s0 = cosine_similarity(u, v)
        adv = fgsm(params, t, eps)
        u2, _ = embed_utterance(params, adv.adversarial.test)
        shifts.append(cosine_similarity(u2, v) - s0)
    print(f"[{tag}] eps={eps}: neg cosine shift {np.mean(shifts):+.3f}+-{np.std(shifts):.3f}")

reports = epsilon_sweep(params, test_trials, (0.15, 0.25, 0.3))
for r in reports:
    print(f"[{tag}] sweep eps={r.epsilon:g}: acc {r.clean.accuracy:.3f}->{r.adversarial.accuracy:.3f} "
          f"(drop {100*r.accuracy_drop:.1f}) fpr {r.clean.fpr:.3f}->{r.adversarial.fpr:.3f}")
