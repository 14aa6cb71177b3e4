// Entry point: resume the session named in the URL hash, or show the entry
// form and create a fresh one. The hash is the only client-side state.

import { ApiClient, ApiError } from "./api.js";
import { TrialScreen } from "./session.js";

export async function boot(root: HTMLElement, api: ApiClient): Promise<void> {
  const sessionId = window.location.hash.replace(/^#/, "");
  if (sessionId) {
    await enterSession(root, api, sessionId);
    return;
  }
  root.innerHTML = `
    <div id="entry">
      <h2>Start a session</h2>
      <label>Participant label
        <input id="participant-label" type="text" value="anon" />
      </label>
      <button id="start-session">Start</button>
      <p id="entry-status"></p>
    </div>`;
  root.querySelector("#start-session")?.addEventListener("click", async () => {
    const label =
      root.querySelector<HTMLInputElement>("#participant-label")?.value || "anon";
    try {
      const id = await api.createSession(label);
      window.location.hash = id;
      await enterSession(root, api, id);
    } catch (err) {
      const status = root.querySelector("#entry-status");
      if (status) {
        status.textContent = err instanceof Error ? err.message : String(err);
      }
    }
  });
}

async function enterSession(
  root: HTMLElement,
  api: ApiClient,
  sessionId: string,
): Promise<void> {
  const screen = new TrialScreen(root, api, sessionId);
  window.addEventListener("keydown", (ev) => screen.handleKey(ev));
  try {
    await screen.start();
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      root.innerHTML = `<div id="error-screen"><p>Unknown session id.</p></div>`;
      return;
    }
    throw err;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot(document.getElementById("app") as HTMLElement, new ApiClient(""));
}
