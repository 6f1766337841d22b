"""ABX listening-test sessions: pair sampling, response logging, statistics.

A trial presents two samples A and B (one clean reconstruction, one
adversarial reconstruction of the same utterance) followed by X, a
seeded coin flip between them; the listener says which of A/B sounds
like X. Chance-level accuracy means the adversarial audio is
perceptually indistinguishable. Sessions persist as append-only JSONL
event logs so any result can be replayed and audited.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np

from .errors import ConflictError, NotFoundError, UndefinedMetricError, ValidationError

CHOICES = ("A", "B")


@dataclass(frozen=True)
class AbxPair:
    """One clean/adversarial waveform pair of the same utterance."""

    pair_id: str
    clean_path: str
    adv_path: str


def load_pair_pool(manifest_path) -> list[AbxPair]:
    """Read `pair_id,clean_path,adv_path` lines; paths resolve against the manifest."""
    base = Path(manifest_path).parent
    pool = []
    with open(manifest_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 3:
                raise ValidationError(f"{manifest_path}:{lineno}: expected 3 fields")
            pair_id, clean, adv = parts
            clean_p = Path(clean) if Path(clean).is_absolute() else base / clean
            adv_p = Path(adv) if Path(adv).is_absolute() else base / adv
            for p in (clean_p, adv_p):
                if not p.exists():
                    raise ValidationError(f"{manifest_path}:{lineno}: missing waveform {p}")
            pool.append(AbxPair(pair_id, str(clean_p), str(adv_p)))
    if not pool:
        raise ValidationError(f"{manifest_path}: empty pair pool")
    return pool


@dataclass
class AbxTrial:
    trial_id: str
    pair: AbxPair
    clean_is: str  # which slot holds the clean reconstruction
    x_is: str  # hidden truth; never leaves the server before close
    response: str | None = None
    response_time: float | None = None

    def sample_path(self, slot: str) -> str:
        if slot == "X":
            slot = self.x_is
        if slot == self.clean_is:
            return self.pair.clean_path
        return self.pair.adv_path

    @property
    def answered(self) -> bool:
        return self.response is not None

    @property
    def correct(self) -> bool | None:
        return None if self.response is None else self.response == self.x_is


@dataclass
class AbxSession:
    session_id: str
    trials: list[AbxTrial]
    listener: str = "anonymous"
    seed: int = 0
    closed: bool = False

    @property
    def num_answered(self) -> int:
        return sum(t.answered for t in self.trials)


def build_session(
    pool: list[AbxPair],
    n_trials: int = 50,
    seed: int = 0,
    listener: str = "anonymous",
    session_id: str | None = None,
) -> AbxSession:
    """Sample pairs (without replacement when the pool is big enough) and
    independently randomize the clean/adv -> A/B mapping and X's identity."""
    if not pool:
        raise ValidationError("pair pool is empty")
    if n_trials < 1:
        raise ValidationError("n_trials must be >= 1")
    rng = np.random.default_rng(seed)
    if len(pool) >= n_trials:
        picks = rng.permutation(len(pool))[:n_trials]
    else:
        picks = rng.integers(len(pool), size=n_trials)
    trials = []
    for k, idx in enumerate(picks):
        clean_is = CHOICES[int(rng.integers(2))]
        x_is = CHOICES[int(rng.integers(2))]
        trials.append(AbxTrial(f"t{k:03d}", pool[int(idx)], clean_is, x_is))
    return AbxSession(
        session_id=session_id or uuid.uuid4().hex,
        trials=trials,
        listener=listener,
        seed=seed,
    )


def record_response(session: AbxSession, trial_id: str, choice: str) -> AbxTrial:
    """Store one answer; append-only, so double answers and closed sessions conflict."""
    if choice not in CHOICES:
        raise ValidationError(f"choice must be A or B, got {choice!r}")
    if session.closed:
        raise ConflictError(f"session {session.session_id} is closed")
    for trial in session.trials:
        if trial.trial_id == trial_id:
            if trial.answered:
                raise ConflictError(f"trial {trial_id} was already answered")
            trial.response = choice
            trial.response_time = time.time()
            return trial
    raise NotFoundError(f"no trial {trial_id} in session {session.session_id}")


def binomial_p_value(correct: int, total: int) -> float:
    """Two-sided exact binomial p-value against chance 0.5, by direct
    summation of both tails (integer arithmetic, no approximation)."""
    if not 0 <= correct <= total or total < 1:
        raise ValidationError("need 0 <= correct <= total, total >= 1")
    # |2i - n| >= |2k - n| picks out both tails exactly.
    deviation = abs(2 * correct - total)
    tail = sum(comb(total, i) for i in range(total + 1) if abs(2 * i - total) >= deviation)
    return min(1.0, tail / 2**total)


@dataclass(frozen=True)
class AbxStats:
    num_answered: int
    num_correct: int
    proportion_correct: float
    p_value: float

    def to_dict(self) -> dict:
        return {
            "num_answered": self.num_answered,
            "num_correct": self.num_correct,
            "proportion_correct": self.proportion_correct,
            "p_value": self.p_value,
        }


def session_statistics(session: AbxSession) -> AbxStats:
    """Discrimination stats over the answered trials."""
    answered = [t for t in session.trials if t.answered]
    if not answered:
        raise UndefinedMetricError("no answered trials; statistics undefined")
    correct = sum(t.response == t.x_is for t in answered)
    return AbxStats(
        num_answered=len(answered),
        num_correct=correct,
        proportion_correct=correct / len(answered),
        p_value=binomial_p_value(correct, len(answered)),
    )


def aggregate_statistics(sessions: list[AbxSession]) -> dict:
    """Multi-listener view: pooled proportion plus the mean of per-session rates."""
    stats = [session_statistics(s) for s in sessions]
    total_answered = sum(s.num_answered for s in stats)
    total_correct = sum(s.num_correct for s in stats)
    return {
        "num_sessions": len(stats),
        "pooled_proportion": total_correct / total_answered,
        "pooled_p_value": binomial_p_value(total_correct, total_answered),
        "per_session_mean": float(np.mean([s.proportion_correct for s in stats])),
        "per_session": [s.to_dict() for s in stats],
    }


class AbxStore:
    """Disk-backed session registry; one JSONL event log per session.

    Responses are serialized per session by a lock; closed sessions are
    immutable. Replaying a log file reconstructs the session exactly.
    """

    def __init__(self, state_dir):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, AbxSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        for log in sorted(self.state_dir.glob("*.jsonl")):
            session = replay_session_log(log)
            self._sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()

    def _log_path(self, session_id: str) -> Path:
        return self.state_dir / f"{session_id}.jsonl"

    def _append(self, session_id: str, event: dict) -> None:
        with open(self._log_path(session_id), "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def create(
        self,
        pool: list[AbxPair],
        n_trials: int = 50,
        seed: int = 0,
        listener: str = "anonymous",
    ) -> AbxSession:
        session = build_session(pool, n_trials, seed, listener)
        with self._registry_lock:
            self._sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()
        self._append(
            session.session_id,
            {
                "event": "created",
                "session_id": session.session_id,
                "seed": seed,
                "listener": listener,
                "trials": [
                    {
                        "trial_id": t.trial_id,
                        "pair_id": t.pair.pair_id,
                        "clean_path": t.pair.clean_path,
                        "adv_path": t.pair.adv_path,
                        "clean_is": t.clean_is,
                        "x_is": t.x_is,
                    }
                    for t in session.trials
                ],
            },
        )
        return session

    def get(self, session_id: str) -> AbxSession:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise NotFoundError(f"unknown session {session_id}") from None

    def lock(self, session_id: str) -> threading.Lock:
        self.get(session_id)
        return self._locks[session_id]

    def record_response(self, session_id: str, trial_id: str, choice: str) -> AbxTrial:
        with self.lock(session_id):
            trial = record_response(self.get(session_id), trial_id, choice)
            self._append(
                session_id,
                {
                    "event": "response",
                    "trial_id": trial_id,
                    "choice": choice,
                    "time": trial.response_time,
                },
            )
            return trial

    def close(self, session_id: str) -> AbxSession:
        with self.lock(session_id):
            session = self.get(session_id)
            if session.closed:
                raise ConflictError(f"session {session_id} is already closed")
            session.closed = True
            self._append(session_id, {"event": "closed", "time": time.time()})
            return session

    def stats(self, session_id: str) -> AbxStats:
        return session_statistics(self.get(session_id))


def replay_session_log(path) -> AbxSession:
    """Rebuild a session purely from its event log."""
    session: AbxSession | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            event = json.loads(line)
            if event["event"] == "created":
                trials = [
                    AbxTrial(
                        trial_id=t["trial_id"],
                        pair=AbxPair(t["pair_id"], t["clean_path"], t["adv_path"]),
                        clean_is=t["clean_is"],
                        x_is=t["x_is"],
                    )
                    for t in event["trials"]
                ]
                session = AbxSession(
                    session_id=event["session_id"],
                    trials=trials,
                    listener=event.get("listener", "anonymous"),
                    seed=event.get("seed", 0),
                )
            elif event["event"] == "response":
                if session is None:
                    raise ValidationError(f"{path}: response before creation event")
                record_response(session, event["trial_id"], event["choice"])
            elif event["event"] == "closed":
                if session is None:
                    raise ValidationError(f"{path}: close before creation event")
                session.closed = True
    if session is None:
        raise ValidationError(f"{path}: no creation event")
    return session
