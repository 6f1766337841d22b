"""Waveform I/O, corpus manifests, and a deterministic synthetic corpus.

Only 16-bit PCM mono RIFF/WAVE is supported; anything else is rejected
loudly rather than silently converted.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, FormatError, UnsupportedFormatError, ValidationError

PCM_SCALE = 32768  # int16 full scale; read divides by it, write multiplies

TRAIN = "train"
TEST = "test"


@dataclass(frozen=True)
class Waveform:
    """Discrete-time audio signal. Samples are float64 in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int = 8000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ValidationError(f"waveform must be 1-D, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("waveform contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise ValidationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def read_wav(path) -> Waveform:
    """Read a 16-bit PCM mono WAV file, scaling samples to [-1, 1)."""
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            samp_width = wf.getsampwidth()
            comp_type = wf.getcomptype()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except FileNotFoundError:
        raise
    except (wave.Error, EOFError) as exc:
        raise FormatError(f"{path}: not a readable RIFF/WAVE file ({exc})") from exc
    if comp_type != "NONE":
        raise UnsupportedFormatError(f"{path}: compressed WAV (comptype={comp_type}) not supported")
    if n_channels != 1:
        raise UnsupportedFormatError(
            f"{path}: {n_channels} channels; only mono is supported (no silent downmix)"
        )
    if samp_width != 2:
        raise UnsupportedFormatError(f"{path}: {8 * samp_width}-bit samples; only 16-bit PCM supported")
    codes = np.frombuffer(raw, dtype="<i2")
    return Waveform(codes.astype(np.float64) / PCM_SCALE, sample_rate_hz=rate)


def write_wav(path, w: Waveform) -> None:
    """Write 16-bit PCM mono; samples are clamped then rounded to int16 codes."""
    clamped = np.clip(w.samples, -1.0, 1.0 - 1.0 / PCM_SCALE)
    codes = np.rint(clamped * PCM_SCALE).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(w.sample_rate_hz)
        wf.writeframes(codes.tobytes())


@dataclass(frozen=True)
class UtteranceRecord:
    """One utterance: either a path to a WAV file or an inline waveform."""

    utterance_id: str
    speaker_id: str
    path: str | None = None
    waveform: Waveform | None = None

    def load(self) -> Waveform:
        if self.waveform is not None:
            return self.waveform
        if self.path is None:
            raise ValidationError(f"{self.utterance_id}: record has neither path nor inline waveform")
        return read_wav(self.path)


@dataclass(frozen=True)
class Corpus:
    """Immutable utterance collection with a per-speaker train/test split."""

    records: tuple[UtteranceRecord, ...]
    speaker_split: dict[str, str]  # speaker_id -> "train" | "test"

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise ValidationError("corpus has no utterances")
        seen = set()
        for rec in self.records:
            if rec.utterance_id in seen:
                raise ValidationError(f"duplicate utterance_id {rec.utterance_id!r}")
            seen.add(rec.utterance_id)
            if rec.speaker_id not in self.speaker_split:
                raise ValidationError(f"speaker {rec.speaker_id!r} has no split label")
        bad = {s for s, v in self.speaker_split.items() if v not in (TRAIN, TEST)}
        if bad:
            raise ValidationError(f"invalid split labels for speakers {sorted(bad)}")

    @property
    def train_speakers(self) -> frozenset[str]:
        return frozenset(s for s, v in self.speaker_split.items() if v == TRAIN)

    @property
    def test_speakers(self) -> frozenset[str]:
        return frozenset(s for s, v in self.speaker_split.items() if v == TEST)

    def speakers(self, split: str | None = None) -> list[str]:
        if split is None:
            return sorted(self.speaker_split)
        return sorted(s for s, v in self.speaker_split.items() if v == split)

    def utterances_of(self, speaker_id: str) -> list[UtteranceRecord]:
        return [r for r in self.records if r.speaker_id == speaker_id]

    def record(self, utterance_id: str) -> UtteranceRecord:
        for r in self.records:
            if r.utterance_id == utterance_id:
                return r
        raise ValidationError(f"unknown utterance_id {utterance_id!r}")

    def subset(self, split: str) -> list[UtteranceRecord]:
        wanted = self.train_speakers if split == TRAIN else self.test_speakers
        return [r for r in self.records if r.speaker_id in wanted]


def load_manifest(path) -> Corpus:
    """Parse a corpus manifest: `utterance_id,speaker_id,wav_path,split` per line.

    WAV paths are resolved relative to the manifest's directory. `#` starts
    a comment line. Raises ValidationError on duplicate ids, a speaker
    appearing in both splits, or an empty manifest.
    """
    base = Path(path).parent
    records = []
    speaker_split: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 comma-separated fields, got {len(parts)}")
            utt_id, spk_id, wav_path, split = parts
            if split not in (TRAIN, TEST):
                raise ValidationError(f"{path}:{lineno}: split must be train or test, got {split!r}")
            prev = speaker_split.get(spk_id)
            if prev is not None and prev != split:
                raise ValidationError(
                    f"{path}:{lineno}: speaker {spk_id!r} appears in both train and test splits"
                )
            speaker_split[spk_id] = split
            resolved = wav_path if Path(wav_path).is_absolute() else str(base / wav_path)
            records.append(UtteranceRecord(utt_id, spk_id, path=resolved))
    if not records:
        raise ValidationError(f"{path}: manifest lists no utterances")
    return Corpus(tuple(records), speaker_split)


def save_corpus(corpus: Corpus, out_dir) -> Path:
    """Write every waveform as WAV plus a manifest.csv; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.csv"
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write("# utterance_id,speaker_id,wav_path,split\n")
        for rec in corpus.records:
            wav_name = f"{rec.utterance_id}.wav"
            write_wav(out / wav_name, rec.load())
            fh.write(f"{rec.utterance_id},{rec.speaker_id},{wav_name},{corpus.speaker_split[rec.speaker_id]}\n")
    return manifest


@dataclass(frozen=True)
class SynthConfig:
    """Deterministic multi-speaker corpus generator settings."""

    num_speakers: int = 20
    utterances_per_speaker: int = 12
    utterance_duration_s: float = 2.0
    seed: int = 0
    sample_rate_hz: int = 8000

    def __post_init__(self):
        if self.num_speakers < 2:
            raise ConfigError("num_speakers must be >= 2")
        if self.utterances_per_speaker < 2:
            raise ConfigError("utterances_per_speaker must be >= 2")
        if self.utterance_duration_s <= 0:
            raise ConfigError("utterance_duration_s must be positive")
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")


# Speaker voices are source-filter signals: a glottal-like pulse train
# through three fixed formant resonators. Centers identify the speaker;
# pitch and formant bandwidths jitter per utterance.
_F1_RANGE = (250.0, 900.0)
_F2_RANGE = (950.0, 2450.0)
_F3_RANGE = (2500.0, 3800.0)
_PITCH_RANGE = (85.0, 255.0)
_BANDWIDTH_RANGE = (60.0, 120.0)
_PITCH_JITTER = 0.08
_BANDWIDTH_JITTER = (0.7, 1.4)
_NOISE_LEVEL = 0.01
_PEAK = 0.5


def _stratified(rng: np.random.Generator, lo: float, hi: float, count: int) -> np.ndarray:
    """One random value per stratum, assigned to speakers in seeded order.

    Guarantees every pair of speakers is separated in this dimension, so
    small corpora cannot draw two near-identical voices by chance.
    """
    edges = np.linspace(lo, hi, count + 1)
    values = rng.uniform(edges[:-1], edges[1:])
    return values[rng.permutation(count)]


def _spread_holdout(voices: np.ndarray, n_test: int) -> list[int]:
    """Greedy max-min selection of held-out speakers in voice space.

    At a handful of held-out speakers, a random split can hand 20% of the
    impostor trials to one near-identical pair; picking a spread-out test
    set keeps the small evaluation representative. Deterministic (ties
    break on speaker index).
    """
    spans = voices.max(axis=0) - voices.min(axis=0)
    normalized = (voices - voices.min(axis=0)) / np.where(spans > 0, spans, 1.0)
    diff = normalized[:, None, :] - normalized[None, :, :]
    distance = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(distance, np.inf)
    chosen = [int(np.argmax(distance.min(axis=1)))]
    while len(chosen) < n_test:
        to_chosen = distance[:, chosen].min(axis=1)
        to_chosen[chosen] = -np.inf
        chosen.append(int(np.argmax(to_chosen)))
    return sorted(chosen)


def _resonate(excitation: np.ndarray, centers, bandwidths, fs: int) -> np.ndarray:
    y = excitation
    for f0, bw in zip(centers, bandwidths):
        r = np.exp(-np.pi * bw / fs)
        omega = 2.0 * np.pi * f0 / fs
        y = lfilter([1.0], [1.0, -2.0 * r * np.cos(omega), r * r], y)
    return y


def synth_corpus(cfg: SynthConfig) -> Corpus:
    """Generate a synthetic corpus; a pure function of cfg.

    Each speaker gets fixed formant centers and a base pitch; each
    utterance is a jittered pulse train through those resonators plus a
    low noise floor, peak-normalized to 0.5. A quarter of the speakers
    (at least one), picked for maximal mutual spread in voice space,
    form the held-out test split.
    """
    rng = np.random.default_rng(cfg.seed)
    fs = cfg.sample_rate_hz
    n_samples = int(round(cfg.utterance_duration_s * fs))
    n_test = max(1, round(cfg.num_speakers / 4))

    pitches = _stratified(rng, *_PITCH_RANGE, cfg.num_speakers)
    formants = np.stack(
        [
            _stratified(rng, *_F1_RANGE, cfg.num_speakers),
            _stratified(rng, *_F2_RANGE, cfg.num_speakers),
            _stratified(rng, *_F3_RANGE, cfg.num_speakers),
        ],
        axis=1,
    )
    test_indices = set(_spread_holdout(np.column_stack([pitches, formants]), n_test))
    records = []
    speaker_split: dict[str, str] = {}
    for s in range(cfg.num_speakers):
        spk_id = f"spk{cfg.seed:03d}_{s:02d}"
        speaker_split[spk_id] = TEST if s in test_indices else TRAIN
        pitch = pitches[s]
        centers = formants[s]
        base_bw = rng.uniform(*_BANDWIDTH_RANGE, size=3)
        for u in range(cfg.utterances_per_speaker):
            utt_pitch = pitch * (1.0 + rng.uniform(-_PITCH_JITTER, _PITCH_JITTER))
            utt_bw = base_bw * rng.uniform(*_BANDWIDTH_JITTER, size=3)
            period = max(2, int(round(fs / utt_pitch)))
            excitation = np.zeros(n_samples)
            excitation[int(rng.integers(period)) :: period] = 1.0
            y = _resonate(excitation, centers, utt_bw, fs)
            y = y + _NOISE_LEVEL * np.max(np.abs(y)) * rng.standard_normal(n_samples)
            y *= _PEAK / np.max(np.abs(y))
            records.append(
                UtteranceRecord(
                    utterance_id=f"{spk_id}_u{u:02d}",
                    speaker_id=spk_id,
                    waveform=Waveform(y, sample_rate_hz=fs),
                )
            )
    return Corpus(tuple(records), speaker_split)
