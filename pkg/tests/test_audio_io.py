import struct
import wave

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advsv.audio_io import (
    Corpus,
    SynthConfig,
    UtteranceRecord,
    Waveform,
    load_manifest,
    read_wav,
    save_corpus,
    synth_corpus,
    write_wav,
)
from advsv.errors import ConfigError, FormatError, UnsupportedFormatError, ValidationError


def write_raw_pcm(path, codes, rate=8000, channels=1):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(struct.pack(f"<{len(codes)}h", *codes))


class TestReadWav:
    def test_scaling_single_sample(self, tmp_path):
        path = tmp_path / "one.wav"
        write_raw_pcm(path, [16384])
        w = read_wav(path)
        assert w.samples.tolist() == [0.5]
        assert w.sample_rate_hz == 8000

    def test_silent_second(self, tmp_path):
        path = tmp_path / "silence.wav"
        write_raw_pcm(path, [0] * 8000)
        w = read_wav(path)
        assert len(w) == 8000
        assert w.duration_s == 1.0
        assert np.all(w.samples == 0.0)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"RIFFgarbage-that-is-not-wave")
        with pytest.raises(FormatError):
            read_wav(path)

    def test_rejects_stereo(self, tmp_path):
        path = tmp_path / "stereo.wav"
        write_raw_pcm(path, [0, 0, 0, 0], channels=2)
        with pytest.raises(UnsupportedFormatError, match="mono"):
            read_wav(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_wav(tmp_path / "nope.wav")


class TestWriteWav:
    def test_inverse_scaling(self, tmp_path):
        path = tmp_path / "w.wav"
        write_wav(path, Waveform(np.array([0.5])))
        with wave.open(str(path), "rb") as wf:
            (code,) = struct.unpack("<h", wf.readframes(1))
        assert code == 16384

    def test_clamps_overrange(self, tmp_path):
        path = tmp_path / "clip.wav"
        write_wav(path, Waveform(np.array([2.0, -2.0])))
        with wave.open(str(path), "rb") as wf:
            codes = struct.unpack("<2h", wf.readframes(2))
        assert codes == (32767, -32768)

    def test_round_trip_quantization_bound(self, tmp_path):
        rng = np.random.default_rng(0)
        original = Waveform(rng.uniform(-1, 1, size=8000))
        path = tmp_path / "rt.wav"
        write_wav(path, original)
        again = read_wav(path)
        assert np.max(np.abs(again.samples - original.samples)) <= 1.0 / 32768

    def test_second_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        w = Waveform(rng.uniform(-1, 1, size=2000))
        p1, p2 = tmp_path / "a.wav", tmp_path / "b.wav"
        write_wav(p1, w)
        once = read_wav(p1)
        write_wav(p2, once)
        twice = read_wav(p2)
        assert np.array_equal(once.samples, twice.samples)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(min_value=-1.5, max_value=1.5, allow_nan=False), min_size=1, max_size=64))
    def test_round_trip_bound_any_signal(self, tmp_path_factory, samples):
        path = tmp_path_factory.mktemp("h") / "x.wav"
        write_wav(path, Waveform(np.array(samples)))
        back = read_wav(path)
        clamped = np.clip(samples, -1.0, 1.0 - 1.0 / 32768)
        assert np.max(np.abs(back.samples - clamped)) <= 0.5 / 32768 + 1e-12


class TestWaveform:
    def test_rejects_nan(self):
        with pytest.raises(ValidationError):
            Waveform(np.array([np.nan]))

    def test_rejects_bad_rate(self):
        with pytest.raises(ValidationError):
            Waveform(np.zeros(4), sample_rate_hz=0)


class TestManifest:
    def make(self, tmp_path, lines):
        for name in {ln.split(",")[2] for ln in lines if ln and not ln.startswith("#")}:
            write_raw_pcm(tmp_path / name, [0] * 16)
        path = tmp_path / "manifest.csv"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_basic_parse(self, tmp_path):
        path = self.make(
            tmp_path,
            [
                "# comment",
                "u1,s1,u1.wav,train",
                "u2,s1,u2.wav,train",
                "u3,s2,u3.wav,test",
                "u4,s2,u4.wav,test",
            ],
        )
        corpus = load_manifest(path)
        assert len(corpus.records) == 4
        assert corpus.train_speakers == {"s1"}
        assert corpus.test_speakers == {"s2"}
        assert corpus.record("u3").load().duration_s == pytest.approx(16 / 8000)

    def test_speaker_in_both_splits(self, tmp_path):
        path = self.make(tmp_path, ["u1,s1,u1.wav,train", "u2,s1,u2.wav,test"])
        with pytest.raises(ValidationError, match="both"):
            load_manifest(path)

    def test_duplicate_utterance_id(self, tmp_path):
        path = self.make(tmp_path, ["u1,s1,u1.wav,train", "u1,s1,u1.wav,train"])
        with pytest.raises(ValidationError, match="duplicate"):
            load_manifest(path)

    def test_empty_manifest(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# nothing here\n")
        with pytest.raises(ValidationError):
            load_manifest(path)

    def test_bad_split_label(self, tmp_path):
        path = self.make(tmp_path, ["u1,s1,u1.wav,dev"])
        with pytest.raises(ValidationError, match="split"):
            load_manifest(path)


class TestSynthCorpus:
    def test_deterministic(self):
        cfg = SynthConfig(num_speakers=4, utterances_per_speaker=2, utterance_duration_s=0.2)
        a = synth_corpus(cfg)
        b = synth_corpus(cfg)
        assert [r.utterance_id for r in a.records] == [r.utterance_id for r in b.records]
        for ra, rb in zip(a.records, b.records):
            assert np.array_equal(ra.waveform.samples, rb.waveform.samples)

    def test_counts(self):
        corpus = synth_corpus(SynthConfig(num_speakers=20, utterances_per_speaker=12, utterance_duration_s=0.1))
        assert len(corpus.records) == 240
        assert len(corpus.speakers()) == 20

    def test_split_disjoint_and_sized(self):
        corpus = synth_corpus(SynthConfig(num_speakers=20, utterances_per_speaker=3, utterance_duration_s=0.1))
        assert not (corpus.train_speakers & corpus.test_speakers)
        assert len(corpus.test_speakers) == 5

    def test_peak_normalized(self):
        corpus = synth_corpus(SynthConfig(num_speakers=2, utterances_per_speaker=2, utterance_duration_s=0.2))
        for rec in corpus.records:
            assert np.max(np.abs(rec.waveform.samples)) == pytest.approx(0.5)

    def test_seed_changes_voices(self):
        a = synth_corpus(SynthConfig(num_speakers=2, utterances_per_speaker=2, utterance_duration_s=0.1, seed=0))
        b = synth_corpus(SynthConfig(num_speakers=2, utterances_per_speaker=2, utterance_duration_s=0.1, seed=1))
        assert not np.array_equal(a.records[0].waveform.samples, b.records[0].waveform.samples)

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            SynthConfig(num_speakers=1)
        with pytest.raises(ConfigError):
            SynthConfig(utterances_per_speaker=1)

    def test_save_round_trip(self, tmp_path):
        corpus = synth_corpus(SynthConfig(num_speakers=2, utterances_per_speaker=2, utterance_duration_s=0.1))
        manifest = save_corpus(corpus, tmp_path)
        loaded = load_manifest(manifest)
        assert {r.utterance_id for r in loaded.records} == {r.utterance_id for r in corpus.records}
        original = corpus.records[0].waveform.samples
        quantized = loaded.record(corpus.records[0].utterance_id).load().samples
        assert np.max(np.abs(original - quantized)) <= 1.0 / 32768


class TestCorpusValidation:
    def test_duplicate_ids_rejected(self):
        rec = UtteranceRecord("u1", "s1", path="x.wav")
        with pytest.raises(ValidationError):
            Corpus((rec, rec), {"s1": "train"})

    def test_missing_split_rejected(self):
        rec = UtteranceRecord("u1", "s1", path="x.wav")
        with pytest.raises(ValidationError):
            Corpus((rec,), {})
