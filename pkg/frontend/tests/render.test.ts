// Rendering from state alone (jsdom), with a store stub that records calls.

import { describe, expect, it, vi } from "vitest";

import { render } from "../src/render.js";
import { initialState, type AppState, type AppStore } from "../src/state.js";

function storeStub(): AppStore {
  return {
    selectTab: vi.fn(),
    toggleFile: vi.fn(),
    toggleTestDetail: vi.fn(),
    applyHunk: vi.fn(),
    applyFile: vi.fn(),
    applyAll: vi.fn(),
    closePreview: vi.fn(),
    refreshReview: vi.fn(),
    start: vi.fn(),
  } as unknown as AppStore;
}

function mount(state: AppState, store = storeStub()) {
  const root = document.createElement("div");
  render(root, state, store);
  return root;
}

function reviewState(): AppState {
  const state = initialState();
  state.panel = "review";
  state.session = {
    id: "s1",
    state: "awaiting_review",
    verdict: { status: "clean", final_round: "llmmig", regressions: [] },
    progress: {},
    created_at: "t",
    source: "requests",
    target: "httpx",
    rounds: [],
    preview_suppressed: false,
  };
  state.diff = {
    files: [
      {
        path: "client.py",
        kind: "source",
        hunks: [
          {
            id: "client.py:0",
            header: "@@ -1 +1 @@",
            state: "pending",
            lines: [
              { tag: "del", text: "import requests" },
              { tag: "add", text: "import httpx" },
            ],
          },
          {
            id: "client.py:1",
            header: "@@ -9 +9 @@",
            state: "applied",
            lines: [{ tag: "add", text: "x = 1" }],
          },
        ],
      },
    ],
  };
  state.tests = {
    verdict: "clean",
    pre: { passed: 4, failed: 0, errored: 0, skipped: 0 },
    post: { passed: 4, failed: 0, errored: 0, skipped: 0 },
    rounds: [],
    regressions: [],
  };
  return state;
}

describe("launcher", () => {
  it("lists parsed dependencies and pre-fills the source on pick", () => {
    const state = initialState();
    state.dependencies = [
      {
        path: "requirements.txt",
        kind: "requirements",
        entries: [
          { name: "requests", raw_name: "requests", version_spec: "==2.31.0", line: 1 },
          { name: "tablib", raw_name: "tablib", version_spec: null, line: 2 },
        ],
      },
    ];
    const root = mount(state);
    const labels = [...root.querySelectorAll(".dependency")].map((b) => b.textContent);
    expect(labels).toEqual(["requests==2.31.0", "tablib"]);
    (root.querySelector('[data-library="tablib"]') as HTMLButtonElement).click();
    const source = root.querySelector('[data-testid="source-input"]') as HTMLInputElement;
    expect(source.value).toBe("tablib");
  });

  it("submit hands both fields to the store", () => {
    const state = initialState();
    const store = storeStub();
    const root = mount(state, store);
    (root.querySelector('[data-testid="source-input"]') as HTMLInputElement).value = "requests";
    (root.querySelector('[data-testid="target-input"]') as HTMLInputElement).value = "httpx";
    (root.querySelector('[data-testid="start"]') as HTMLButtonElement).click();
    expect(store.start).toHaveBeenCalledWith("requests", "httpx");
  });
});

describe("preview", () => {
  it("renders collapsible file sections with per-hunk buttons", () => {
    const root = mount(reviewState());
    const section = root.querySelector(".file-section") as HTMLDetailsElement;
    expect(section.open).toBe(true);
    expect(root.querySelectorAll(".hunk").length).toBe(2);
    expect(root.querySelector('[data-testid="apply-all"]')).toBeTruthy();
    expect(root.querySelector('[data-testid="close-preview"]')).toBeTruthy();
  });

  it("applied hunks render disabled", () => {
    const root = mount(reviewState());
    const applied = root.querySelector('[data-testid="apply-client.py:1"]') as HTMLButtonElement;
    expect(applied.disabled).toBe(true);
    expect(applied.textContent).toBe("Applied");
    const pending = root.querySelector('[data-testid="apply-client.py:0"]') as HTMLButtonElement;
    expect(pending.disabled).toBe(false);
  });

  it("colors added and removed lines differently", () => {
    const root = mount(reviewState());
    expect(root.querySelector(".line.add")?.textContent).toContain("import httpx");
    expect(root.querySelector(".line.del")?.textContent).toContain("import requests");
  });

  it("a file conflict shows an inline error with a refresh affordance", () => {
    const state = reviewState();
    state.fileErrors["client.py"] = "client.py: workspace file changed outside this review";
    const store = storeStub();
    const root = mount(state, store);
    const conflict = root.querySelector('[data-testid="file-conflict"]');
    expect(conflict?.textContent).toContain("changed outside");
    (conflict?.querySelector("button") as HTMLButtonElement).click();
    expect(store.refreshReview).toHaveBeenCalled();
  });
});

describe("tests view", () => {
  it("shows the warning banner and expandable messages when regressed", () => {
    const state = reviewState();
    state.tab = "tests";
    state.session!.verdict = {
      status: "regressed",
      final_round: "llmmig",
      regressions: ["tests.test_client::test_auth"],
    };
    state.tests = {
      verdict: "regressed",
      pre: { passed: 4, failed: 0, errored: 0, skipped: 0 },
      post: { passed: 3, failed: 1, errored: 0, skipped: 0 },
      rounds: [],
      regressions: [
        {
          id: "tests.test_client::test_auth",
          message: "boom",
          file: "tests/test_client.py",
          line: 12,
        },
      ],
    };
    state.expandedTests["tests.test_client::test_auth"] = true;
    const root = mount(state);
    expect(root.querySelector('[data-testid="regression-banner"]')).toBeTruthy();
    expect(root.querySelector(".test-message")?.textContent).toBe("boom");
    expect(root.querySelector(".copy-anchor")?.textContent).toBe("tests/test_client.py:12");
  });

  it("clean runs show equal pass counts and no banner", () => {
    const state = reviewState();
    state.tab = "tests";
    const root = mount(state);
    expect(root.querySelector('[data-testid="regression-banner"]')).toBeNull();
    const before = root.querySelector('[data-testid="summary-before"]')?.textContent;
    const after = root.querySelector('[data-testid="summary-after"]')?.textContent;
    expect(before).toContain("4");
    expect(after).toContain("4");
  });
});
