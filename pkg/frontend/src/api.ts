// Typed client for the session service endpoints. All chain logic lives
// server-side; this module only moves JSON.

export interface Progress {
  done: number;
  total: number;
}

export interface OptionCard {
  kind: "stimulus" | "category";
  svg?: string;
  label?: string;
}

export interface TrialPayload {
  schema: number;
  status: "trial";
  trial_token: string;
  chain_id: string;
  kind: "face" | "category";
  progress: Progress;
  confidence_required: boolean;
  options: OptionCard[];
  prompt_category?: string;
  stimulus_svg?: string;
}

export interface DonePayload {
  schema: number;
  status: "done";
  progress: Progress;
  summary: {
    participant_label: string;
    n_samples: number;
    per_chain_trials: number[];
  };
}

export type TrialOrDone = TrialPayload | DonePayload;

export interface PriorPayload {
  schema: number;
  labels: string[] | null;
  probs: number[];
  ess: number[];
  n_samples: number;
}

export interface AckPayload {
  schema: number;
  status: "ok";
  progress: Progress;
  complete: boolean;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

async function parseOrThrow<T>(resp: Response): Promise<T> {
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    throw new ApiError(resp.status, body.error ?? "HttpError", body.detail ?? resp.statusText);
  }
  return body as T;
}

export class ApiClient {
  constructor(
    private base: string = "",
    private fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  async createSession(participantLabel: string, config: object = {}): Promise<string> {
    const resp = await this.fetchFn(`${this.base}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ participant_label: participantLabel, config }),
    });
    const body = await parseOrThrow<{ session_id: string }>(resp);
    return body.session_id;
  }

  async getTrial(sessionId: string): Promise<TrialOrDone> {
    const resp = await this.fetchFn(`${this.base}/sessions/${sessionId}/trial`);
    return parseOrThrow<TrialOrDone>(resp);
  }

  async submitResponse(
    sessionId: string,
    trialToken: string,
    choice: number,
    confidence?: number,
  ): Promise<AckPayload> {
    const body: Record<string, unknown> = { trial_token: trialToken, choice };
    if (confidence !== undefined) {
      body.confidence = confidence;
    }
    const resp = await this.fetchFn(`${this.base}/sessions/${sessionId}/response`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    return parseOrThrow<AckPayload>(resp);
  }

  async getPrior(sessionId: string): Promise<PriorPayload> {
    const resp = await this.fetchFn(`${this.base}/sessions/${sessionId}/prior`);
    return parseOrThrow<PriorPayload>(resp);
  }
}
