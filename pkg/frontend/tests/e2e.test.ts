// End-to-end: the real client logic and DOM driven against a real service
// process over HTTP. Completes a 30-trial session and checks the protocol
// contract at every step.

import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { TrialScreen } from "../src/session.js";

const SESSION_CONFIG = {
  categories: ["calm", "tense"],
  space: { kind: "discrete", count: 2 },
  gatekeeper: { kind: "table", rows: [[0.9, 0.1], [0.3, 0.7]] },
  chains: ["calm", "tense"],
  total_trials: 30,
  seed: 90210,
  burn_in_fraction: 0.1,
};

let server: ChildProcess;
let base: string;
let dataDir: string;

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr && typeof addr === "object") {
        const port = addr.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

async function waitForServer(url: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`${url}/sessions/probe/trial`);
      if (resp.status === 404) {
        return;
      }
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 200));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  dataDir = mkdtempSync(join(tmpdir(), "priorchain-e2e-"));
  server = spawn(
    "python3",
    ["-m", "priorchain.cli", "serve", "--data-dir", dataDir, "--port", String(port)],
    { stdio: "ignore" },
  );
  await waitForServer(base);
});

afterAll(() => {
  server?.kill();
  rmSync(dataDir, { recursive: true, force: true });
});

function nuisanceGroup(svg: string): string {
  const match = svg.match(/<g id="nuisance">.*?<\/g>/s);
  return match ? match[0] : "";
}

describe("30-trial session through the browser client", () => {
  it("completes with every protocol contract holding", async () => {
    const api = new ApiClient(base);
    const sessionId = await api.createSession("e2e", SESSION_CONFIG);

    const root = document.createElement("div");
    document.body.appendChild(root);
    const screen = new TrialScreen(root, api, sessionId);
    await screen.start();

    // opening trial of a fresh session is a categorization trial
    expect(screen.state).toBe("trial");
    expect(screen.current?.kind).toBe("category");
    expect(root.querySelector("#confidence")).not.toBeNull();

    let sawFace = false;
    let checkedDoubleSubmit = false;
    let trials = 0;
    while (screen.state === "trial" && trials < 500) {
      trials += 1;
      const current = screen.current!;
      if (current.kind === "face") {
        // both cards render server-delivered documents with identical
        // nuisance decoration
        const cards = root.querySelectorAll(".option-card");
        expect(cards).toHaveLength(2);
        const svgs = [cards[0].innerHTML, cards[1].innerHTML];
        expect(nuisanceGroup(svgs[0])).not.toBe("");
        expect(nuisanceGroup(svgs[0])).toBe(nuisanceGroup(svgs[1]));
        if (!checkedDoubleSubmit) {
          // a double-click applies exactly once
          const before = current.progress.done;
          await Promise.all([screen.select(0), screen.select(0)]);
          const after =
            screen.state === "trial"
              ? screen.current!.progress.done
              : SESSION_CONFIG.total_trials;
          expect(after).toBe(before + 1);
          checkedDoubleSubmit = true;
        } else {
          await screen.select(trials % 2);
        }
        sawFace = true;
      } else {
        // confidence is enforced before a categorization response leaves
        await screen.select(trials % 2);
        expect(root.querySelector("#status")?.textContent).toContain("confidence");
        await screen.setConfidence(1 + (trials % 7));
      }
    }

    expect(sawFace).toBe(true);
    expect(checkedDoubleSubmit).toBe(true);
    expect(screen.state).toBe("done");

    // completion screen shows exactly the prior the service reports
    const prior = await api.getPrior(sessionId);
    const bars = root.querySelectorAll<HTMLElement>(".prior-bar");
    expect(bars).toHaveLength(prior.probs.length);
    prior.probs.forEach((p, i) => {
      expect(bars[i].dataset.prob).toBe(String(p));
    });

    // the server saw exactly the configured number of human trials
    const done = await api.getTrial(sessionId);
    expect(done.status).toBe("done");
    expect(done.progress.done).toBe(SESSION_CONFIG.total_trials);
  });

  it("a reloaded client resumes the identical in-flight trial", async () => {
    const api = new ApiClient(base);
    const sessionId = await api.createSession("e2e-resume", SESSION_CONFIG);

    const root1 = document.createElement("div");
    document.body.appendChild(root1);
    const screen1 = new TrialScreen(root1, api, sessionId);
    await screen1.start();
    const token1 = screen1.current?.trial_token;

    const root2 = document.createElement("div");
    document.body.appendChild(root2);
    const screen2 = new TrialScreen(root2, api, sessionId);
    await screen2.start();
    expect(screen2.current?.trial_token).toBe(token1);
    expect(root2.querySelector("#options")?.innerHTML).toBe(
      root1.querySelector("#options")?.innerHTML,
    );
  });

  it("replayed tokens are rejected server-side after application", async () => {
    const api = new ApiClient(base);
    const sessionId = await api.createSession("e2e-token", SESSION_CONFIG);
    const trial = await api.getTrial(sessionId);
    expect(trial.status).toBe("trial");
    const token = (trial as { trial_token: string }).trial_token;
    await api.submitResponse(sessionId, token, 0, 4);
    await expect(api.submitResponse(sessionId, token, 0, 4)).rejects.toMatchObject({
      status: 409,
      code: "StaleTokenError",
    });
  });
});
