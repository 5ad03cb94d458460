// Thin typed client for the review service. Every mutation the UI performs
// goes through here; the UI itself never touches files or derives state
// another way.

import type {
  DependencyFileView,
  DiffView,
  HunkState,
  SessionView,
  TestsView,
} from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail: string | null = null,
  ) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let code = "error";
    let message = `${response.status} ${response.statusText}`;
    let detail: string | null = null;
    try {
      const body = await response.json();
      code = body.code ?? code;
      message = body.message ?? message;
      detail = body.detail ?? null;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiRequestError(response.status, code, message, detail);
  }
  const text = await response.text();
  return (text ? JSON.parse(text) : {}) as T;
}

export class ReviewApi {
  constructor(public base: string = "") {}

  dependencies(): Promise<{ files: DependencyFileView[] }> {
    return request(this.base, "/api/dependencies");
  }

  sessions(): Promise<{ sessions: SessionView[] }> {
    return request(this.base, "/api/sessions");
  }

  startSession(source: string, target: string, options: object = {}): Promise<{ id: string }> {
    return request(this.base, "/api/sessions", {
      method: "POST",
      body: JSON.stringify({ source, target, options }),
    });
  }

  session(id: string): Promise<SessionView> {
    return request(this.base, `/api/sessions/${id}`);
  }

  diff(id: string): Promise<DiffView> {
    return request(this.base, `/api/sessions/${id}/diff`);
  }

  tests(id: string): Promise<TestsView> {
    return request(this.base, `/api/sessions/${id}/tests`);
  }

  async log(id: string): Promise<string> {
    const response = await fetch(`${this.base}/api/sessions/${id}/log`);
    if (!response.ok) throw new ApiRequestError(response.status, "error", "log unavailable");
    return response.text();
  }

  apply(
    id: string,
    scope: "hunk" | "file" | "all",
    ids: string[] = [],
  ): Promise<{ state: string; files: Record<string, Record<string, HunkState>> }> {
    return request(this.base, `/api/sessions/${id}/apply`, {
      method: "POST",
      body: JSON.stringify({ scope, ids }),
    });
  }

  close(id: string): Promise<{ state: string }> {
    return request(this.base, `/api/sessions/${id}/close`, { method: "POST" });
  }
}
