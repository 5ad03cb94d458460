// Store behavior against a scripted fetch: no real service, no file writes.

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { ReviewApi } from "../src/api.js";
import { AppStore } from "../src/state.js";

type Route = { status: number; body: unknown };

function scriptedFetch(routes: Record<string, Route>, calls: string[]) {
  return vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    const method = init?.method ?? "GET";
    const key = `${method} ${url}`;
    calls.push(key);
    const route = routes[key];
    if (!route) throw new Error(`unexpected request: ${key}`);
    return new Response(JSON.stringify(route.body), {
      status: route.status,
      headers: { "Content-Type": "application/json" },
    });
  });
}

const DEPENDENCIES = {
  files: [
    {
      path: "requirements.txt",
      kind: "requirements",
      entries: [
        { name: "requests", raw_name: "requests", version_spec: "==2.31.0", line: 1 },
        { name: "tablib", raw_name: "tablib", version_spec: null, line: 2 },
      ],
    },
  ],
};

const SESSION = {
  id: "s1",
  state: "awaiting_review",
  verdict: { status: "clean", final_round: "llmmig", regressions: [] },
  progress: {},
  created_at: "t",
  source: "requests",
  target: "httpx",
  rounds: ["00-premig", "01-llmmig"],
  preview_suppressed: false,
};

const DIFF = {
  files: [
    {
      path: "client.py",
      kind: "source",
      hunks: [
        {
          id: "client.py:0",
          header: "@@ -1,3 +1,3 @@",
          state: "pending",
          lines: [
            { tag: "del", text: "import requests" },
            { tag: "add", text: "import httpx" },
          ],
        },
      ],
    },
  ],
};

const TESTS = {
  verdict: "clean",
  pre: { passed: 4, failed: 0, errored: 0, skipped: 0 },
  post: { passed: 4, failed: 0, errored: 0, skipped: 0 },
  rounds: [],
  regressions: [],
};

describe("AppStore", () => {
  let calls: string[];

  beforeEach(() => {
    calls = [];
  });

  afterEach(() => {
    vi.unstubAllGlobals();
  });

  function makeStore(routes: Record<string, Route>) {
    vi.stubGlobal("fetch", scriptedFetch(routes, calls));
    return new AppStore(new ReviewApi("http://svc"));
  }

  it("bootstrap lists dependencies and stays on the launcher", async () => {
    const store = makeStore({
      "GET http://svc/api/dependencies": { status: 200, body: DEPENDENCIES },
      "GET http://svc/api/sessions": { status: 200, body: { sessions: [] } },
    });
    await store.bootstrap();
    expect(store.state.panel).toBe("launcher");
    expect(store.state.dependencies[0].entries.map((e) => e.raw_name)).toEqual([
      "requests",
      "tablib",
    ]);
  });

  it("blocks submission with an empty target before any request", async () => {
    const store = makeStore({});
    await store.start("requests", "   ");
    expect(store.state.error).toMatch(/target/);
    expect(calls).toEqual([]);
  });

  it("surfaces a 422 from session creation inline", async () => {
    const store = makeStore({
      "POST http://svc/api/sessions": {
        status: 422,
        body: { code: "source_not_declared", message: "'numpy' is not declared", detail: null },
      },
    });
    await store.start("numpy", "jax");
    expect(store.state.error).toMatch(/numpy/);
    expect(store.state.panel).toBe("launcher");
  });

  it("re-fetches the diff after every completed mutation", async () => {
    const store = makeStore({
      "GET http://svc/api/sessions/s1": { status: 200, body: SESSION },
      "GET http://svc/api/sessions/s1/diff": { status: 200, body: DIFF },
      "GET http://svc/api/sessions/s1/tests": { status: 200, body: TESTS },
      "GET http://svc/api/sessions/s1/log": { status: 200, body: "log" },
      "POST http://svc/api/sessions/s1/apply": {
        status: 200,
        body: { state: "applying", files: {} },
      },
    });
    store.state.session = structuredClone(SESSION) as never;
    store.state.panel = "review";
    await store.applyHunk("client.py:0");
    const applyIndex = calls.indexOf("POST http://svc/api/sessions/s1/apply");
    const refetchIndex = calls.indexOf("GET http://svc/api/sessions/s1/diff", applyIndex);
    expect(applyIndex).toBeGreaterThanOrEqual(0);
    expect(refetchIndex).toBeGreaterThan(applyIndex);
  });

  it("apply-all closes the preview automatically", async () => {
    const doneSession = { ...SESSION, state: "done" };
    const store = makeStore({
      "POST http://svc/api/sessions/s1/apply": {
        status: 200,
        body: { state: "applying", files: {} },
      },
      "POST http://svc/api/sessions/s1/close": { status: 200, body: { state: "done" } },
      "GET http://svc/api/sessions/s1": { status: 200, body: doneSession },
      "GET http://svc/api/sessions/s1/diff": { status: 200, body: DIFF },
      "GET http://svc/api/sessions/s1/tests": { status: 200, body: TESTS },
      "GET http://svc/api/sessions/s1/log": { status: 200, body: "log" },
    });
    store.state.session = structuredClone(SESSION) as never;
    store.state.panel = "review";
    await store.applyAll();
    expect(calls).toContain("POST http://svc/api/sessions/s1/close");
    expect(store.state.panel).toBe("closed");
  });

  it("a conflict on one file is recorded against that file", async () => {
    const store = makeStore({
      "POST http://svc/api/sessions/s1/apply": {
        status: 409,
        body: { code: "context_mismatch", message: "client.py: changed outside", detail: null },
      },
      "GET http://svc/api/sessions/s1": { status: 200, body: SESSION },
      "GET http://svc/api/sessions/s1/diff": { status: 200, body: DIFF },
      "GET http://svc/api/sessions/s1/tests": { status: 200, body: TESTS },
      "GET http://svc/api/sessions/s1/log": { status: 200, body: "log" },
    });
    store.state.session = structuredClone(SESSION) as never;
    store.state.panel = "review";
    await store.applyHunk("client.py:0");
    expect(store.state.fileErrors["client.py"]).toMatch(/changed outside/);
    expect(store.state.error).toBeNull();
  });

  it("regressed sessions open on the tests tab", async () => {
    const regressed = {
      ...SESSION,
      verdict: { status: "regressed", final_round: "llmmig", regressions: ["t::a"] },
    };
    const store = makeStore({
      "GET http://svc/api/sessions/s1": { status: 200, body: regressed },
      "GET http://svc/api/sessions/s1/diff": { status: 200, body: DIFF },
      "GET http://svc/api/sessions/s1/tests": { status: 200, body: TESTS },
      "GET http://svc/api/sessions/s1/log": { status: 200, body: "log" },
    });
    store.state.session = structuredClone(regressed) as never;
    store.state.panel = "running";
    await store.pollOnce();
    expect(store.state.panel).toBe("review");
    expect(store.state.tab).toBe("tests");
  });
});
