// Application state machine. Holds no business logic: every state change is
// an API call followed by a re-fetch, so the panels can always be re-derived
// from GET endpoints alone (reload-safe).

import { ApiRequestError, ReviewApi } from "./api.js";
import type {
  DependencyFileView,
  DiffView,
  SessionView,
  TestsView,
} from "./types.js";

export type Panel = "launcher" | "running" | "review" | "closed";
export type Tab = "preview" | "tests";

export interface AppState {
  panel: Panel;
  tab: Tab;
  dependencies: DependencyFileView[];
  session: SessionView | null;
  diff: DiffView | null;
  tests: TestsView | null;
  log: string;
  busy: Set<string>; // hunk/file/all ids with an in-flight request
  error: string | null;
  fileErrors: Record<string, string>;
  collapsed: Record<string, boolean>;
  expandedTests: Record<string, boolean>;
}

export function initialState(): AppState {
  return {
    panel: "launcher",
    tab: "preview",
    dependencies: [],
    session: null,
    diff: null,
    tests: null,
    log: "",
    busy: new Set(),
    error: null,
    fileErrors: {},
    collapsed: {},
    expandedTests: {},
  };
}

export class AppStore {
  state: AppState = initialState();

  constructor(
    private api: ReviewApi,
    private onChange: (state: AppState) => void = () => {},
  ) {}

  private emit() {
    this.onChange(this.state);
  }

  private fail(error: unknown) {
    this.state.error = error instanceof Error ? error.message : String(error);
    this.emit();
  }

  /** Initial load: resume the latest session if one exists, else launcher. */
  async bootstrap(): Promise<void> {
    try {
      const [deps, sessions] = await Promise.all([
        this.api.dependencies(),
        this.api.sessions(),
      ]);
      this.state.dependencies = deps.files;
      const latest = sessions.sessions.at(-1);
      if (latest && latest.state !== "done" && latest.state !== "aborted") {
        this.state.session = latest;
        await this.syncPanels();
      }
      this.emit();
    } catch (error) {
      this.fail(error);
    }
  }

  async start(source: string, target: string): Promise<void> {
    this.state.error = null;
    if (!source.trim() || !target.trim()) {
      this.state.error = "both a source and a target library are required";
      this.emit();
      return;
    }
    try {
      const { id } = await this.api.startSession(source.trim(), target.trim());
      this.state.session = await this.api.session(id);
      this.state.panel = "running";
      this.emit();
    } catch (error) {
      // 409 (already running) and 422 (unknown source) surface inline
      this.fail(error);
    }
  }

  /** One polling tick; the caller drives the 1s interval while running. */
  async pollOnce(): Promise<void> {
    const session = this.state.session;
    if (!session) return;
    try {
      this.state.session = await this.api.session(session.id);
      await this.syncPanels();
      this.emit();
    } catch (error) {
      this.fail(error);
    }
  }

  private async syncPanels(): Promise<void> {
    const session = this.state.session;
    if (!session) return;
    if (session.state === "running" || session.state === "initializing") {
      this.state.panel = "running";
      return;
    }
    if (session.state === "done" || session.state === "aborted") {
      this.state.panel = "closed";
      return;
    }
    // awaiting_review / applying
    if (this.state.panel !== "review") {
      this.state.panel = "review";
      // a regressed verdict prompts the tests view; with the preview
      // suppressed we also refuse to auto-open the diff tab
      const regressed = session.verdict?.status === "regressed";
      this.state.tab = regressed ? "tests" : "preview";
      await this.refreshReview();
    }
  }

  async refreshReview(): Promise<void> {
    const session = this.state.session;
    if (!session) return;
    const [diff, tests, log] = await Promise.all([
      this.api.diff(session.id),
      this.api.tests(session.id),
      this.api.log(session.id).catch(() => ""),
    ]);
    this.state.diff = diff;
    this.state.tests = tests;
    this.state.log = log;
    this.emit();
  }

  selectTab(tab: Tab) {
    this.state.tab = tab;
    this.emit();
  }

  toggleFile(path: string) {
    this.state.collapsed[path] = !this.state.collapsed[path];
    this.emit();
  }

  toggleTestDetail(id: string) {
    this.state.expandedTests[id] = !this.state.expandedTests[id];
    this.emit();
  }

  private async mutate(key: string, action: () => Promise<unknown>, path?: string) {
    if (this.state.busy.has(key)) return;
    this.state.busy.add(key);
    if (path) delete this.state.fileErrors[path];
    this.emit();
    try {
      await action();
      // never trust the local copy: re-fetch after every completed request
      await this.refreshReview();
      this.state.session = await this.api.session(this.state.session!.id);
    } catch (error) {
      if (error instanceof ApiRequestError && path) {
        this.state.fileErrors[path] = error.message;
        await this.refreshReview().catch(() => {});
      } else {
        this.fail(error);
      }
    } finally {
      this.state.busy.delete(key);
      this.emit();
    }
  }

  applyHunk(hunkId: string): Promise<void> {
    const path = hunkId.slice(0, hunkId.lastIndexOf(":"));
    return this.mutate(
      hunkId,
      () => this.api.apply(this.state.session!.id, "hunk", [hunkId]),
      path,
    );
  }

  applyFile(path: string): Promise<void> {
    return this.mutate(
      `file:${path}`,
      () => this.api.apply(this.state.session!.id, "file", [path]),
      path,
    );
  }

  /** Accepting the whole migration closes the preview automatically. */
  async applyAll(): Promise<void> {
    await this.mutate("all", async () => {
      await this.api.apply(this.state.session!.id, "all");
      await this.api.close(this.state.session!.id);
    });
    if (!this.state.error) {
      this.state.session = await this.api.session(this.state.session!.id);
      this.state.panel = "closed";
      this.emit();
    }
  }

  async closePreview(): Promise<void> {
    try {
      await this.api.close(this.state.session!.id);
      this.state.session = await this.api.session(this.state.session!.id);
      this.state.panel = "closed";
      this.emit();
    } catch (error) {
      this.fail(error);
    }
  }
}
