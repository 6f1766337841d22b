"""Train the LSTM speaker verifier on a small synthetic corpus.

The verifier embeds the test utterance and every enrollment utterance,
averages the enrollment embeddings, and squashes their cosine similarity
through a learned scale + bias into an accept probability. Takes a few
minutes on a laptop CPU. Run:

    python demos/03_train_and_evaluate.py
"""
import time

from advsv import (
    FrontendConfig,
    SynthConfig,
    TrainConfig,
    TrialProtocol,
    build_trials,
    evaluate,
    fit_pipeline,
    materialize_trials,
    save_model,
    synth_corpus,
    train,
)

corpus = synth_corpus(SynthConfig(num_speakers=10, utterances_per_speaker=6, utterance_duration_s=1.0, seed=0))
pipeline = fit_pipeline(FrontendConfig(), (r.load() for r in corpus.subset("train")))
features = {r.utterance_id: pipeline.extract(r.load()) for r in corpus.records}

train_trials = materialize_trials(
    build_trials(corpus, TrialProtocol(enrollment_size=3, trials_per_speaker=12, seed=1, split="train")),
    corpus,
    features,
)
test_trials = materialize_trials(
    build_trials(corpus, TrialProtocol(enrollment_size=3, trials_per_speaker=12, seed=2, split="test")),
    corpus,
    features,
)
print(f"{len(train_trials)} training trials, {len(test_trials)} held-out-speaker trials")

start = time.time()
params = train(
    train_trials,
    TrainConfig(epochs=8, batch_size=4, learning_rate=3e-3, seed=0),
    progress=lambda e, vl: print(f"  epoch {e}: held-out loss {vl:.4f} ({time.time()-start:.0f}s)"),
)
print(f"trained in {time.time()-start:.0f}s")

metrics = evaluate(params, test_trials)
print(f"test accuracy {metrics.accuracy:.1%}  FPR {metrics.fpr:.1%}  FNR {metrics.fnr:.1%}")
save_model(params, "demo_out/verifier.bin")
print("checkpoint -> demo_out/verifier.bin")
