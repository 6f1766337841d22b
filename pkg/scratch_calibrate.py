"""Scratch calibration probe (not part of the package)."""
import sys
import time

import numpy as np

from advsv import *
from advsv.model import embed_utterance, cosine_similarity
from advsv.verification import EnrollmentCache, enroll

# args: dur epochs lr bs n_enroll hidden tps_train ups tps_test
dur = float(sys.argv[1]) if len(sys.argv) > 1 else 1.0
epochs = int(sys.argv[2]) if len(sys.argv) > 2 else 25
lr = float(sys.argv[3]) if len(sys.argv) > 3 else 3e-3
bs = int(sys.argv[4]) if len(sys.argv) > 4 else 4
n_enroll = int(sys.argv[5]) if len(sys.argv) > 5 else 4
hidden = int(sys.argv[6]) if len(sys.argv) > 6 else 128
tps_train = int(sys.argv[7]) if len(sys.argv) > 7 else 20
ups = int(sys.argv[8]) if len(sys.argv) > 8 else 8
tps_test = int(sys.argv[9]) if len(sys.argv) > 9 else 20

corpus = synth_corpus(SynthConfig(num_speakers=20, utterances_per_speaker=ups, utterance_duration_s=dur, seed=0))
cfg = FrontendConfig()
pipe = fit_pipeline(cfg, [r.load() for r in corpus.subset("train")])
feats = {r.utterance_id: pipe.extract(r.load()) for r in corpus.records}
train_set = build_trials(corpus, TrialProtocol(n_enroll, tps_train, seed=1, split="train"))
test_set = build_trials(corpus, TrialProtocol(n_enroll, tps_test, seed=2, split="test"))
train_trials = materialize_trials(train_set, corpus, feats)
test_trials = materialize_trials(test_set, corpus, feats)
print(f"dur={dur} T={next(iter(feats.values())).num_frames} train={len(train_trials)} test={len(test_trials)} "
      f"lr={lr} bs={bs} n={n_enroll} H={hidden} epochs={epochs} ups={ups}")

t0 = time.time()

def prog(epoch, vl):
    print(f"  epoch {epoch}: val loss {vl:.4f} ({time.time()-t0:.0f}s)", flush=True)

params = train(train_trials, TrainConfig(epochs=epochs, batch_size=bs, learning_rate=lr, seed=0, hidden_size=hidden), progress=prog)
print(f"train: {time.time()-t0:.0f}s")

for name, trials in (("train", train_trials), ("test", test_trials)):
    m = evaluate(params, trials)
    print(f"{name}: acc={m.accuracy:.3f} fpr={m.fpr} fnr={m.fnr}")

cache = EnrollmentCache()
pos, neg = [], []
for t in test_trials:
    u, _ = embed_utterance(params, t.test)
    v = enroll(params, t.enrollment, cache)
    (pos if t.label == 1 else neg).append(cosine_similarity(u, v))
print(f"test cosine: pos {np.mean(pos):.4f}+-{np.std(pos):.4f} | neg {np.mean(neg):.4f}+-{np.std(neg):.4f}")
print(f"head: w={params.score_scale:.3f} b={params.score_bias:.3f}")

t0 = time.time()
reports = epsilon_sweep(params, test_trials, DEFAULT_EPSILONS)
print(f"sweep: {time.time()-t0:.0f}s")
for r in reports:
    print(f"  eps={r.epsilon:g}: acc {r.clean.accuracy:.3f}->{r.adversarial.accuracy:.3f} "
          f"fpr {r.clean.fpr:.3f}->{r.adversarial.fpr:.3f}")
