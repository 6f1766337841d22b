// Session state machine. Pure transitions, no I/O: the controller feeds
// events in, the view renders the state out. The machine's job is to
// make protocol violations unrepresentable: answers are only accepted in
// the `answerable` phase, and the only way in is hearing X to the end.

import type { StatsPayload, TrialPayload } from "./api.js";

export type Phase = "loading" | "playing" | "answerable" | "submitting" | "done";

export interface MachineState {
  phase: Phase;
  index: number;
  total: number;
  answered: number;
  xPlayed: boolean;
  trial: TrialPayload | null;
  stats: StatsPayload | null;
  error: string | null;
}

export function initialState(): MachineState {
  return {
    phase: "loading",
    index: 0,
    total: 0,
    answered: 0,
    xPlayed: false,
    trial: null,
    stats: null,
    error: null,
  };
}

export type Event =
  | { kind: "trial_loaded"; trial: TrialPayload }
  | { kind: "x_ended" }
  | { kind: "choice_made" }
  | { kind: "submit_ok"; answered: number }
  | { kind: "advance"; index: number }
  | { kind: "stats_ready"; stats: StatsPayload }
  | { kind: "failure"; message: string }
  | { kind: "retry" };

export class IllegalTransition extends Error {}

export function transition(state: MachineState, event: Event): MachineState {
  switch (event.kind) {
    case "trial_loaded":
      if (state.phase !== "loading") throw new IllegalTransition(`trial_loaded in ${state.phase}`);
      return {
        ...state,
        phase: "playing",
        index: event.trial.index,
        total: event.trial.total,
        trial: event.trial,
        xPlayed: false,
        error: null,
      };
    case "x_ended":
      // replays after the first full listen are fine and change nothing
      if (state.phase === "answerable") return state;
      if (state.phase !== "playing") throw new IllegalTransition(`x_ended in ${state.phase}`);
      return { ...state, phase: "answerable", xPlayed: true };
    case "choice_made":
      if (state.phase !== "answerable") throw new IllegalTransition(`choice_made in ${state.phase}`);
      return { ...state, phase: "submitting" };
    case "submit_ok":
      if (state.phase !== "submitting") throw new IllegalTransition(`submit_ok in ${state.phase}`);
      return { ...state, answered: event.answered };
    case "advance":
      return { ...state, phase: "loading", index: event.index, trial: null, xPlayed: false };
    case "stats_ready":
      return { ...state, phase: "done", stats: event.stats };
    case "failure":
      return { ...state, error: event.message };
    case "retry":
      return { ...state, phase: "loading", error: null, trial: null, xPlayed: false };
  }
}

// The gate the UI binds the answer buttons to.
export function canAnswer(state: MachineState): boolean {
  return state.phase === "answerable" && state.xPlayed;
}
