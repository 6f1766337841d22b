"""Train once and save artifacts for attack diagnostics (scratch)."""
import sys
import time

from advsv import *
from advsv.harness import save_pipeline
from advsv.model import save_model

dur, epochs, lr, bs, n_enroll, hidden, tps_train, ups, tps_test = (
    float(sys.argv[1]), int(sys.argv[2]), float(sys.argv[3]), int(sys.argv[4]),
    int(sys.argv[5]), int(sys.argv[6]), int(sys.argv[7]), int(sys.argv[8]), int(sys.argv[9]),
)
tag = sys.argv[10] if len(sys.argv) > 10 else "a"

corpus = synth_corpus(SynthConfig(num_speakers=20, utterances_per_speaker=ups, utterance_duration_s=dur, seed=0))
pipe = fit_pipeline(FrontendConfig(), [r.load() for r in corpus.subset("train")])
feats = {r.utterance_id: pipe.extract(r.load()) for r in corpus.records}
train_trials = materialize_trials(build_trials(corpus, TrialProtocol(n_enroll, tps_train, seed=1, split="train")), corpus, feats)
test_trials = materialize_trials(build_trials(corpus, TrialProtocol(n_enroll, tps_test, seed=2, split="test")), corpus, feats)

t0 = time.time()
params = train(train_trials, TrainConfig(epochs=epochs, batch_size=bs, learning_rate=lr, seed=0, hidden_size=hidden),
               progress=lambda e, vl: print(f"  epoch {e}: val {vl:.4f} ({time.time()-t0:.0f}s)", flush=True))
print(f"train: {time.time()-t0:.0f}s")
m = evaluate(params, test_trials)
print(f"test: acc={m.accuracy:.3f} fpr={m.fpr} fnr={m.fnr}")
save_model(params, f"/tmp/calib_model_{tag}.bin")
save_pipeline(pipe, f"/tmp/calib_pipe_{tag}.json")
print("saved", tag)
