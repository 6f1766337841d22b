// Controller wiring the state machine, the API client, and the DOM.

import { AbxApi, ApiError, type Choice } from "./api.js";
import type { SamplePlayer } from "./audio.js";
import { canAnswer, initialState, transition, type Event, type MachineState } from "./machine.js";

export interface AppElements {
  progress: HTMLElement;
  status: HTMLElement;
  samples: HTMLElement;
  chooseA: HTMLButtonElement;
  chooseB: HTMLButtonElement;
  retry: HTMLButtonElement;
  result: HTMLElement;
}

export class AbxApp {
  state: MachineState = initialState();

  constructor(
    private api: AbxApi,
    private player: SamplePlayer,
    private ui: AppElements,
    private sessionId: string,
  ) {
    ui.chooseA.addEventListener("click", () => void this.choose("A"));
    ui.chooseB.addEventListener("click", () => void this.choose("B"));
    ui.retry.addEventListener("click", () => {
      this.dispatch({ kind: "retry" });
      void this.loadTrial(this.state.index);
    });
  }

  dispatch(event: Event): void {
    this.state = transition(this.state, event);
    this.render();
  }

  async start(): Promise<void> {
    const info = await this.api.sessionInfo(this.sessionId);
    if (info.closed) {
      await this.showStats();
      return;
    }
    await this.loadTrial(0);
  }

  async loadTrial(index: number): Promise<void> {
    try {
      const trial = await this.api.fetchTrial(this.sessionId, index);
      if (trial.answered) {
        // stale or resumed session: move to the next unanswered trial
        if (index + 1 >= trial.total) {
          await this.finish();
          return;
        }
        this.dispatch({ kind: "advance", index: index + 1 });
        await this.loadTrial(index + 1);
        return;
      }
      this.dispatch({ kind: "trial_loaded", trial });
      this.player.reset();
      this.player.load("A", trial.a_url);
      this.player.load("B", trial.b_url);
      this.player.load("X", trial.x_url);
      this.player.onEnded("X", () => {
        if (this.state.phase === "playing") this.dispatch({ kind: "x_ended" });
      });
    } catch (err) {
      this.dispatch({ kind: "failure", message: describe(err) });
    }
  }

  async choose(choice: Choice): Promise<void> {
    if (!canAnswer(this.state) || this.state.trial === null) return;
    const trial = this.state.trial;
    this.dispatch({ kind: "choice_made" });
    try {
      const ack = await this.api.submitResponse(this.sessionId, trial.index, choice);
      this.dispatch({ kind: "submit_ok", answered: ack.answered });
      if (trial.index + 1 >= trial.total) {
        await this.finish();
      } else {
        this.dispatch({ kind: "advance", index: trial.index + 1 });
        await this.loadTrial(trial.index + 1);
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // double submit or stale trial: skip forward instead of stalling
        this.dispatch({ kind: "advance", index: trial.index + 1 });
        await this.loadTrial(trial.index + 1);
        return;
      }
      this.dispatch({ kind: "failure", message: describe(err) });
    }
  }

  private async finish(): Promise<void> {
    try {
      await this.api.closeSession(this.sessionId);
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 409)) {
        this.dispatch({ kind: "failure", message: describe(err) });
        return;
      }
      // already closed: stats are available either way
    }
    await this.showStats();
  }

  private async showStats(): Promise<void> {
    try {
      const stats = await this.api.stats(this.sessionId);
      this.dispatch({ kind: "stats_ready", stats });
    } catch (err) {
      this.dispatch({ kind: "failure", message: describe(err) });
    }
  }

  render(): void {
    const s = this.state;
    this.ui.progress.textContent =
      s.total > 0 ? `Trial ${Math.min(s.index + 1, s.total)} of ${s.total}` : "";
    this.ui.chooseA.disabled = !canAnswer(s);
    this.ui.chooseB.disabled = !canAnswer(s);
    this.ui.retry.hidden = s.error === null;
    if (s.error !== null) {
      this.ui.status.textContent = `Problem talking to the server (${s.error}). Try again.`;
    } else if (s.phase === "loading") {
      this.ui.status.textContent = "Loading trial...";
    } else if (s.phase === "playing") {
      this.ui.status.textContent = "Listen to A and B, then play X all the way through.";
    } else if (s.phase === "answerable") {
      this.ui.status.textContent = "Is X more similar to A or to B?";
    } else if (s.phase === "submitting") {
      this.ui.status.textContent = "Recording your answer...";
    } else if (s.phase === "done" && s.stats) {
      const pct = (100 * s.stats.proportion_correct).toFixed(1);
      this.ui.status.textContent = "Session complete. Thank you!";
      this.ui.result.textContent =
        `${s.stats.num_correct} of ${s.stats.num_answered} correct (${pct}%), ` +
        `exact binomial p = ${s.stats.p_value.toPrecision(3)} against chance.`;
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.status || "network"}: ${err.message}`;
  return String(err);
}
