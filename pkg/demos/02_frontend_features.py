"""Walk a waveform through the acoustic front end.

64 ms Hamming frames every 4 ms, 512-point FFT, a 65-channel triangular
Mel filterbank, log compression, and (optionally) the truncated DCT that
yields MFCCs. Saves a picture of each stage. Run:

    python demos/02_frontend_features.py
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from advsv import (
    FrontendConfig,
    SynthConfig,
    log_mel,
    mel_filterbank,
    mfcc,
    stft,
    synth_corpus,
)

out = Path("demo_out")
out.mkdir(exist_ok=True)

corpus = synth_corpus(SynthConfig(num_speakers=4, utterances_per_speaker=2, utterance_duration_s=1.0, seed=1))
wav = corpus.records[0].load()
cfg = FrontendConfig()

spec = stft(wav, cfg)
print(f"spectrogram: {spec.magnitude.shape[0]} frames x {spec.magnitude.shape[1]} bins")

fb = mel_filterbank(cfg)
print(f"filterbank: {fb.num_channels} channels, centers {fb.center_frequencies_hz[:4].round(1)} ... Hz")

lm = log_mel(spec, fb)
coeffs = mfcc(lm, cfg)
print(f"log-Mel {lm.frames.shape}, MFCC {coeffs.frames.shape}")

fig, axes = plt.subplots(2, 2, figsize=(11, 7), constrained_layout=True)
axes[0, 0].plot(np.arange(len(wav)) / wav.sample_rate_hz, wav.samples, lw=0.3)
axes[0, 0].set_title("waveform")
axes[0, 1].imshow(20 * np.log10(spec.magnitude + 1e-8).T, origin="lower", aspect="auto", cmap="magma")
axes[0, 1].set_title("STFT magnitude (dB)")
axes[1, 0].imshow(lm.frames.T, origin="lower", aspect="auto", cmap="magma")
axes[1, 0].set_title("log-Mel (65 ch)")
axes[1, 1].imshow(coeffs.frames.T, origin="lower", aspect="auto", cmap="magma")
axes[1, 1].set_title("MFCC (20 coeff)")
fig.savefig(out / "frontend_stages.png", dpi=110)
print(f"wrote {out / 'frontend_stages.png'}")
