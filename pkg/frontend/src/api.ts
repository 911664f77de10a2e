/**
 * Typed client for the scene-engine session API.
 *
 * The client holds no state beyond the base URL: every displayed number is
 * fetchable with plain GETs, so a reload can always rebuild the view.
 */

/** GET /sessions/{id} */
export interface SessionStatus {
  id: string;
  state: "idle" | "running" | "awaiting_clarification" | "done" | "error";
  instance_count: number;
  has_terrain: boolean;
  pending_clarification: PendingClarification | null;
  error: string | null;
  executed_count: number;
  failed_count: number;
}

export interface PendingClarification {
  plugin: string;
  missing: string[];
  questions: string[];
}

/** scene-json (schema scene/1) */
export interface SceneJson {
  schema: string;
  seed: number;
  metadata: Record<string, string>;
  regions: Record<string, unknown>;
  terrain: TerrainJson | null;
  instances: InstanceJson[];
}

export interface TerrainJson {
  size_x: number;
  size_y: number;
  resolution: number;
  heights: number[][];
  tags: string[];
}

export interface InstanceJson {
  id: string;
  asset_ref: string;
  transform: {
    position: [number, number, number];
    rotation: [number, number, number];
    scale: [number, number, number];
  };
  tags: string[];
  projected: boolean;
}

/** plan-json (schema plan/1) */
export interface PlanJson {
  schema: string;
  seed: number;
  actions: Array<{ kind: string } & Record<string, unknown>>;
}

/** run report */
export interface ReportJson {
  outcomes: Array<{
    index: number;
    kind: string;
    executed: boolean;
    error: string | null;
    instances_created: number;
  }>;
  executed_count: number;
  failed_count: number;
  stages: Array<Record<string, unknown>>;
  assumptions: string[];
  diagnostics: Array<Record<string, unknown>>;
  end_flag: boolean;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: unknown,
    message?: string,
  ) {
    super(message ?? `HTTP ${status}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SessionApi {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    let body: unknown = null;
    const text = await resp.text();
    if (text) {
      try {
        body = JSON.parse(text);
      } catch {
        body = text;
      }
    }
    if (!resp.ok) {
      const msg =
        body && typeof body === "object" && "error" in (body as Record<string, unknown>)
          ? String((body as Record<string, unknown>).error)
          : `HTTP ${resp.status}`;
      throw new ApiError(resp.status, body, msg);
    }
    return body as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("/health");
  }

  async createSession(): Promise<string> {
    const out = await this.request<{ id: string }>("/sessions", { method: "POST" });
    return out.id;
  }

  status(sessionId: string): Promise<SessionStatus> {
    return this.request(`/sessions/${sessionId}`);
  }

  instruct(sessionId: string, text: string): Promise<{ job: string; state: string }> {
    return this.request(`/sessions/${sessionId}/instruct`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  clarify(sessionId: string, answers: Record<string, unknown>): Promise<{ state: string }> {
    return this.request(`/sessions/${sessionId}/clarify`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ answers }),
    });
  }

  scene(sessionId: string): Promise<SceneJson> {
    return this.request(`/sessions/${sessionId}/scene`);
  }

  plan(sessionId: string): Promise<PlanJson | null> {
    return this.request<PlanJson>(`/sessions/${sessionId}/plan`).catch((e) => {
      if (e instanceof ApiError && e.status === 404) return null;
      throw e;
    });
  }

  report(sessionId: string): Promise<ReportJson | null> {
    return this.request<ReportJson>(`/sessions/${sessionId}/report`).catch((e) => {
      if (e instanceof ApiError && e.status === 404) return null;
      throw e;
    });
  }
}

/** Poll the session until it leaves running states or the timeout hits. */
export async function waitForSettled(
  api: SessionApi,
  sessionId: string,
  opts: { intervalMs?: number; timeoutMs?: number } = {},
): Promise<SessionStatus> {
  const interval = opts.intervalMs ?? 150;
  const deadline = Date.now() + (opts.timeoutMs ?? 30_000);
  for (;;) {
    const status = await api.status(sessionId);
    if (status.state !== "running") return status;
    if (Date.now() > deadline) return status;
    await new Promise((r) => setTimeout(r, interval));
  }
}
