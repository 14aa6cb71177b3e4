// Trial screen controller: fetches the in-flight trial, renders the two
// option cards, collects a choice (plus confidence on categorization
// trials), and submits with single-use token discipline. The client keeps no
// state beyond the session id, so a reload resumes the identical trial.

import { ApiClient, ApiError, TrialOrDone, TrialPayload } from "./api.js";

export type ScreenState = "loading" | "trial" | "done" | "error";

export class TrialScreen {
  state: ScreenState = "loading";
  current: TrialPayload | null = null;
  selected: number | null = null;
  confidence: number | null = null;
  busy = false;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
    readonly sessionId: string,
  ) {}

  async start(): Promise<void> {
    await this.refresh();
  }

  async refresh(): Promise<void> {
    this.state = "loading";
    let payload: TrialOrDone;
    try {
      payload = await this.api.getTrial(this.sessionId);
    } catch (err) {
      this.renderError(err);
      return;
    }
    if (payload.status === "done") {
      await this.renderDone();
      return;
    }
    this.current = payload;
    this.selected = null;
    this.confidence = null;
    this.busy = false;
    this.state = "trial";
    this.renderTrial(payload);
  }

  // ------------------------------------------------------------ rendering

  private renderTrial(trial: TrialPayload): void {
    const prompt =
      trial.kind === "face"
        ? `Which one looks more <b>${escapeHtml(trial.prompt_category ?? "")}</b>?`
        : "Which word describes this image better?";
    const cards = trial.options
      .map((opt, i) => {
        const content =
          opt.kind === "stimulus"
            ? opt.svg ?? ""
            : `<span class="cat-label">${escapeHtml(opt.label ?? "")}</span>`;
        return `<button class="option-card" data-option="${i}">${content}</button>`;
      })
      .join("");
    const stimulus = trial.kind === "category"
      ? `<div id="trial-stimulus">${trial.stimulus_svg ?? ""}</div>`
      : "";
    const confidence = trial.confidence_required
      ? `<div id="confidence">
           <span class="conf-prompt">How confident are you? (1 = not at all, 7 = extremely)</span>
           ${[1, 2, 3, 4, 5, 6, 7]
             .map((c) => `<button class="conf-btn" data-conf="${c}">${c}</button>`)
             .join("")}
         </div>`
      : "";
    this.root.innerHTML = `
      <div id="progress">
        <div id="progress-fill" style="width:${progressPct(trial)}%"></div>
        <span id="progress-text">${trial.progress.done} / ${trial.progress.total}</span>
      </div>
      <p id="prompt">${prompt}</p>
      ${stimulus}
      <div id="options">${cards}</div>
      ${confidence}
      <p id="status"></p>`;
    this.root.querySelectorAll<HTMLButtonElement>(".option-card").forEach((btn) => {
      btn.addEventListener("click", () => {
        void this.select(Number(btn.dataset.option));
      });
    });
    this.root.querySelectorAll<HTMLButtonElement>(".conf-btn").forEach((btn) => {
      btn.addEventListener("click", () => {
        void this.setConfidence(Number(btn.dataset.conf));
      });
    });
  }

  private async renderDone(): Promise<void> {
    this.state = "done";
    this.current = null;
    let bars = "<p>prior unavailable</p>";
    try {
      const prior = await this.api.getPrior(this.sessionId);
      const labels = prior.labels ?? prior.probs.map((_, i) => `category ${i}`);
      bars = prior.probs
        .map(
          (p, i) => `
          <div class="prior-row">
            <span class="prior-label">${escapeHtml(labels[i])}</span>
            <div class="prior-bar" data-prob="${String(p)}"
                 style="width:${(p * 100).toFixed(1)}%"></div>
            <span class="prior-value">${(p * 100).toFixed(1)}%</span>
          </div>`,
        )
        .join("");
    } catch {
      // leave the placeholder; the session is still complete
    }
    this.root.innerHTML = `
      <div id="done-screen">
        <h2>Session complete</h2>
        <p>Thank you! Here is the belief profile recovered from your choices:</p>
        <div id="prior-bars">${bars}</div>
      </div>`;
  }

  private renderError(err: unknown): void {
    this.state = "error";
    const detail = err instanceof Error ? err.message : String(err);
    this.root.innerHTML = `
      <div id="error-screen">
        <p>Could not reach the session service.</p>
        <p class="detail">${escapeHtml(detail)}</p>
        <button id="retry">Retry</button>
      </div>`;
    this.root.querySelector("#retry")?.addEventListener("click", () => {
      void this.refresh();
    });
  }

  private setStatus(text: string): void {
    const el = this.root.querySelector("#status");
    if (el) {
      el.textContent = text;
    }
  }

  // ------------------------------------------------------------ responses

  async select(option: number): Promise<void> {
    if (this.state !== "trial" || this.busy || this.current === null) {
      return;
    }
    this.selected = option;
    this.root.querySelectorAll(".option-card").forEach((btn, i) => {
      btn.classList.toggle("selected", i === option);
    });
    await this.maybeSubmit();
  }

  async setConfidence(value: number): Promise<void> {
    if (this.state !== "trial" || this.busy || this.current === null) {
      return;
    }
    if (!this.current.confidence_required) {
      return;
    }
    this.confidence = value;
    this.root.querySelectorAll(".conf-btn").forEach((btn) => {
      btn.classList.toggle("selected", Number((btn as HTMLElement).dataset.conf) === value);
    });
    await this.maybeSubmit();
  }

  private async maybeSubmit(): Promise<void> {
    const trial = this.current;
    if (trial === null || this.selected === null) {
      return;
    }
    if (trial.confidence_required && this.confidence === null) {
      this.setStatus("pick a confidence from 1 to 7 to continue");
      return;
    }
    await this.submit();
  }

  async submit(): Promise<void> {
    const trial = this.current;
    if (trial === null || this.selected === null || this.busy) {
      return;
    }
    this.busy = true;
    this.root
      .querySelectorAll<HTMLButtonElement>("button")
      .forEach((btn) => (btn.disabled = true));
    try {
      await this.api.submitResponse(
        this.sessionId,
        trial.trial_token,
        this.selected,
        trial.confidence_required ? this.confidence ?? undefined : undefined,
      );
    } catch (err) {
      if (err instanceof ApiError && err.code === "StaleTokenError") {
        // response already applied (duplicate or lost ack): resync
        await this.refresh();
        return;
      }
      if (err instanceof ApiError && err.code === "MissingConfidenceError") {
        this.busy = false;
        this.setStatus("confidence is required on this trial");
        return;
      }
      this.renderError(err);
      return;
    }
    await this.refresh();
  }

  handleKey(event: KeyboardEvent): void {
    if (this.state !== "trial" || this.busy) {
      return;
    }
    if (event.key === "ArrowLeft") {
      void this.select(0);
    } else if (event.key === "ArrowRight") {
      void this.select(1);
    } else if (/^[1-7]$/.test(event.key) && this.current?.confidence_required) {
      void this.setConfidence(Number(event.key));
    }
  }
}

function progressPct(trial: TrialPayload): number {
  return trial.progress.total > 0
    ? Math.round((100 * trial.progress.done) / trial.progress.total)
    : 0;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}
