import json

import numpy as np
import pytest

from advsv.abx import (
    AbxPair,
    AbxStore,
    aggregate_statistics,
    binomial_p_value,
    build_session,
    load_pair_pool,
    record_response,
    replay_session_log,
    session_statistics,
)
from advsv.audio_io import Waveform, write_wav
from advsv.errors import ConflictError, NotFoundError, UndefinedMetricError, ValidationError


def make_pool(n=50):
    return [AbxPair(f"p{i:03d}", f"clean{i}.wav", f"adv{i}.wav") for i in range(n)]


class TestBuildSession:
    def test_deterministic(self):
        pool = make_pool()
        a = build_session(pool, 50, seed=9, session_id="s")
        b = build_session(pool, 50, seed=9, session_id="s")
        assert [(t.pair.pair_id, t.clean_is, t.x_is) for t in a.trials] == [
            (t.pair.pair_id, t.clean_is, t.x_is) for t in b.trials
        ]

    def test_pool_of_fifty_used_once_each(self):
        session = build_session(make_pool(50), 50, seed=0)
        used = [t.pair.pair_id for t in session.trials]
        assert sorted(used) == sorted(p.pair_id for p in make_pool(50))

    def test_small_pool_samples_with_replacement(self):
        session = build_session(make_pool(3), 10, seed=0)
        assert len(session.trials) == 10

    def test_empty_pool_rejected(self):
        with pytest.raises(ValidationError):
            build_session([], 10, seed=0)

    def test_x_assignment_balanced_monte_carlo(self):
        # randomizer check over 10000 seeded sessions of one trial each
        pool = make_pool(1)
        x_is_a = sum(
            build_session(pool, 1, seed=s).trials[0].x_is == "A" for s in range(10000)
        )
        assert abs(x_is_a / 10000 - 0.5) < 0.02

    def test_clean_slot_balanced_monte_carlo(self):
        pool = make_pool(1)
        clean_a = sum(
            build_session(pool, 1, seed=s).trials[0].clean_is == "A" for s in range(10000)
        )
        assert abs(clean_a / 10000 - 0.5) < 0.02

    def test_sample_paths_consistent(self):
        session = build_session(make_pool(4), 4, seed=2)
        for t in session.trials:
            assert t.sample_path("X") == t.sample_path(t.x_is)
            assert {t.sample_path("A"), t.sample_path("B")} == {
                t.pair.clean_path,
                t.pair.adv_path,
            }


class TestRecordResponse:
    def test_happy_path(self):
        session = build_session(make_pool(5), 5, seed=1)
        trial = record_response(session, "t000", "A")
        assert trial.answered
        assert session.num_answered == 1

    def test_double_answer_conflicts(self):
        session = build_session(make_pool(5), 5, seed=1)
        record_response(session, "t001", "B")
        with pytest.raises(ConflictError):
            record_response(session, "t001", "A")
        assert session.trials[1].response == "B"  # unchanged

    def test_closed_session_conflicts(self):
        session = build_session(make_pool(5), 5, seed=1)
        session.closed = True
        with pytest.raises(ConflictError):
            record_response(session, "t000", "A")

    def test_unknown_trial(self):
        session = build_session(make_pool(5), 5, seed=1)
        with pytest.raises(NotFoundError):
            record_response(session, "t999", "A")

    def test_bad_choice(self):
        session = build_session(make_pool(5), 5, seed=1)
        with pytest.raises(ValidationError):
            record_response(session, "t000", "X")


class TestStatistics:
    def test_twenty_seven_of_fifty(self):
        session = build_session(make_pool(50), 50, seed=3)
        for k, trial in enumerate(session.trials):
            correct = k < 27
            record_response(session, trial.trial_id, trial.x_is if correct else
                            ("A" if trial.x_is == "B" else "B"))
        stats = session_statistics(session)
        assert stats.num_answered == 50
        assert stats.num_correct == 27
        assert stats.proportion_correct == pytest.approx(0.54)

    def test_perfect_ten_p_value_exact(self):
        session = build_session(make_pool(10), 10, seed=4)
        for trial in session.trials:
            record_response(session, trial.trial_id, trial.x_is)
        stats = session_statistics(session)
        assert stats.proportion_correct == 1.0
        assert stats.p_value == 2 * 2.0**-10

    def test_p_value_closed_forms(self):
        assert binomial_p_value(10, 10) == 2 * 2.0**-10
        assert binomial_p_value(0, 10) == 2 * 2.0**-10
        assert binomial_p_value(5, 10) == 1.0
        # two-sided symmetry
        assert binomial_p_value(3, 10) == binomial_p_value(7, 10)

    def test_p_value_matches_scipy(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        for n, k in ((50, 27), (50, 35), (17, 4), (8, 8)):
            expected = scipy_stats.binomtest(k, n, 0.5).pvalue
            assert binomial_p_value(k, n) == pytest.approx(expected, rel=1e-12)

    def test_random_responder_monte_carlo(self):
        # a coin-flipping listener over 1000 trials stays near chance
        rng = np.random.default_rng(0)
        session = build_session(make_pool(20), 1000, seed=5)
        for trial in session.trials:
            record_response(session, trial.trial_id, "A" if rng.integers(2) else "B")
        stats = session_statistics(session)
        assert abs(stats.proportion_correct - 0.5) < 0.04
        assert stats.p_value > 0.01

    def test_random_responder_p_value_rarely_significant(self):
        # over many simulated sessions the p-value is > 0.01 at least 95% of the time
        rng = np.random.default_rng(1)
        ok = 0
        runs = 200
        for s in range(runs):
            session = build_session(make_pool(10), 50, seed=1000 + s)
            for trial in session.trials:
                record_response(session, trial.trial_id, "A" if rng.integers(2) else "B")
            ok += session_statistics(session).p_value > 0.01
        assert ok >= 0.95 * runs

    def test_always_a_responder_is_at_chance(self):
        # X is balanced, so a constant responder lands near 0.5
        session = build_session(make_pool(30), 2000, seed=6)
        for trial in session.trials:
            record_response(session, trial.trial_id, "A")
        stats = session_statistics(session)
        assert abs(stats.proportion_correct - 0.5) < 0.04

    def test_no_answers_undefined(self):
        session = build_session(make_pool(5), 5, seed=7)
        with pytest.raises(UndefinedMetricError):
            session_statistics(session)

    def test_aggregate_pooled_and_per_session(self):
        sessions = []
        for s in range(3):
            session = build_session(make_pool(10), 10, seed=s)
            for trial in session.trials:
                record_response(session, trial.trial_id, trial.x_is)
            sessions.append(session)
        agg = aggregate_statistics(sessions)
        assert agg["pooled_proportion"] == 1.0
        assert agg["per_session_mean"] == 1.0
        assert agg["num_sessions"] == 3


class TestStoreAndReplay:
    def test_log_replay_reproduces_stats(self, tmp_path):
        store = AbxStore(tmp_path / "state")
        session = store.create(make_pool(20), n_trials=20, seed=11, listener="tester")
        rng = np.random.default_rng(2)
        for trial in session.trials[:15]:
            store.record_response(session.session_id, trial.trial_id,
                                  "A" if rng.integers(2) else "B")
        store.close(session.session_id)
        live = session_statistics(session)

        replayed = replay_session_log(tmp_path / "state" / f"{session.session_id}.jsonl")
        again = session_statistics(replayed)
        assert again == live
        assert replayed.closed

    def test_store_reload_after_restart(self, tmp_path):
        state = tmp_path / "state"
        store = AbxStore(state)
        session = store.create(make_pool(5), n_trials=5, seed=1)
        store.record_response(session.session_id, "t000", "A")

        fresh = AbxStore(state)  # simulates process restart
        loaded = fresh.get(session.session_id)
        assert loaded.trials[0].response == "A"
        assert not loaded.closed

    def test_double_close_conflicts(self, tmp_path):
        store = AbxStore(tmp_path / "state")
        session = store.create(make_pool(5), n_trials=5, seed=1)
        store.close(session.session_id)
        with pytest.raises(ConflictError):
            store.close(session.session_id)

    def test_unknown_session(self, tmp_path):
        store = AbxStore(tmp_path / "state")
        with pytest.raises(NotFoundError):
            store.get("nope")


class TestPairPool:
    def test_load_validates_files(self, tmp_path):
        wav = Waveform(np.zeros(100))
        write_wav(tmp_path / "c.wav", wav)
        write_wav(tmp_path / "a.wav", wav)
        manifest = tmp_path / "pairs.csv"
        manifest.write_text("# pair_id,clean,adv\np0,c.wav,a.wav\n")
        pool = load_pair_pool(manifest)
        assert len(pool) == 1
        assert pool[0].pair_id == "p0"

    def test_missing_file_rejected(self, tmp_path):
        manifest = tmp_path / "pairs.csv"
        manifest.write_text("p0,c.wav,a.wav\n")
        with pytest.raises(ValidationError):
            load_pair_pool(manifest)

    def test_empty_pool_rejected(self, tmp_path):
        manifest = tmp_path / "pairs.csv"
        manifest.write_text("# nothing\n")
        with pytest.raises(ValidationError):
            load_pair_pool(manifest)
