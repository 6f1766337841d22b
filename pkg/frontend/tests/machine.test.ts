import { describe, expect, it } from "vitest";

import type { TrialPayload } from "../src/api.js";
import {
  canAnswer,
  initialState,
  IllegalTransition,
  transition,
  type MachineState,
} from "../src/machine.js";

function payload(index = 0, total = 3): TrialPayload {
  return {
    session_id: "s",
    trial_id: `t${index}`,
    index,
    total,
    answered: false,
    a_url: "/audio/a",
    b_url: "/audio/b",
    x_url: "/audio/x",
  };
}

function answerable(): MachineState {
  let state = initialState();
  state = transition(state, { kind: "trial_loaded", trial: payload() });
  return transition(state, { kind: "x_ended" });
}

describe("state machine", () => {
  it("walks the happy path through every phase", () => {
    let state = initialState();
    expect(state.phase).toBe("loading");

    state = transition(state, { kind: "trial_loaded", trial: payload() });
    expect(state.phase).toBe("playing");
    expect(canAnswer(state)).toBe(false);

    state = transition(state, { kind: "x_ended" });
    expect(state.phase).toBe("answerable");
    expect(canAnswer(state)).toBe(true);

    state = transition(state, { kind: "choice_made" });
    expect(state.phase).toBe("submitting");
    expect(canAnswer(state)).toBe(false);

    state = transition(state, { kind: "submit_ok", answered: 1 });
    state = transition(state, { kind: "advance", index: 1 });
    expect(state.phase).toBe("loading");
    expect(state.xPlayed).toBe(false);

    state = transition(state, { kind: "trial_loaded", trial: payload(1) });
    state = transition(state, { kind: "x_ended" });
    state = transition(state, { kind: "choice_made" });
    state = transition(state, {
      kind: "stats_ready",
      stats: { num_answered: 3, num_correct: 2, proportion_correct: 2 / 3, p_value: 1 },
    });
    expect(state.phase).toBe("done");
    expect(state.stats?.num_correct).toBe(2);
  });

  it("cannot reach submitting without passing answerable", () => {
    let state = initialState();
    state = transition(state, { kind: "trial_loaded", trial: payload() });
    // still playing: choosing must be rejected
    expect(() => transition(state, { kind: "choice_made" })).toThrow(IllegalTransition);
    expect(canAnswer(state)).toBe(false);
  });

  it("requires a full X playback before answers unlock", () => {
    let state = initialState();
    state = transition(state, { kind: "trial_loaded", trial: payload() });
    expect(state.xPlayed).toBe(false);
    expect(canAnswer(state)).toBe(false);
    state = transition(state, { kind: "x_ended" });
    expect(state.xPlayed).toBe(true);
    expect(canAnswer(state)).toBe(true);
  });

  it("tolerates X replays after unlocking", () => {
    const state = answerable();
    expect(transition(state, { kind: "x_ended" })).toEqual(state);
  });

  it("resets the X gate on advance", () => {
    let state = answerable();
    state = transition(state, { kind: "choice_made" });
    state = transition(state, { kind: "submit_ok", answered: 1 });
    state = transition(state, { kind: "advance", index: 1 });
    expect(state.xPlayed).toBe(false);
    expect(canAnswer(state)).toBe(false);
  });

  it("records failures without losing the phase and recovers on retry", () => {
    let state = answerable();
    state = transition(state, { kind: "failure", message: "boom" });
    expect(state.error).toBe("boom");
    state = transition(state, { kind: "retry" });
    expect(state.phase).toBe("loading");
    expect(state.error).toBeNull();
  });

  it("only the documented five phases exist", () => {
    const seen = new Set<string>();
    let state = initialState();
    seen.add(state.phase);
    state = transition(state, { kind: "trial_loaded", trial: payload() });
    seen.add(state.phase);
    state = transition(state, { kind: "x_ended" });
    seen.add(state.phase);
    state = transition(state, { kind: "choice_made" });
    seen.add(state.phase);
    state = transition(state, {
      kind: "stats_ready",
      stats: { num_answered: 0, num_correct: 0, proportion_correct: 0, p_value: 1 },
    });
    seen.add(state.phase);
    expect([...seen].sort()).toEqual(["answerable", "done", "loading", "playing", "submitting"]);
  });
});
