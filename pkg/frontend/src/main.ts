// Entry point: create (or resume) a session and hand off to the app.

import { AbxApi } from "./api.js";
import { AbxApp, type AppElements } from "./app.js";
import { HtmlAudioPlayer } from "./audio.js";

const N_TRIALS = 50;

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id}`);
  return found as T;
}

async function boot(): Promise<void> {
  const api = new AbxApi();
  const ui: AppElements = {
    progress: element("progress"),
    status: element("status"),
    samples: element("samples"),
    chooseA: element<HTMLButtonElement>("choose-a"),
    chooseB: element<HTMLButtonElement>("choose-b"),
    retry: element<HTMLButtonElement>("retry"),
    result: element("result"),
  };

  const params = new URLSearchParams(window.location.search);
  let sessionId = params.get("session");
  if (!sessionId) {
    const listener = params.get("listener") ?? "anonymous";
    const created = await api.createSession(N_TRIALS, listener);
    sessionId = created.session_id;
    const url = new URL(window.location.href);
    url.searchParams.set("session", sessionId);
    window.history.replaceState(null, "", url);
  }

  const app = new AbxApp(api, new HtmlAudioPlayer(ui.samples), ui, sessionId);
  app.render();
  await app.start();
}

void boot();
