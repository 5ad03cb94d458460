// DOM builders: pure functions from state (+ store callbacks) to elements.
// Rendering replaces the panel contents wholesale; all interactivity calls
// back into the store.

import type { AppStore, AppState } from "./state.js";
import type { FileDiffView, HunkView, RegressionDetail } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  node.append(...children);
  return node;
}

export function render(root: HTMLElement, state: AppState, store: AppStore): void {
  root.replaceChildren(
    renderHeader(state),
    renderBanner(state, store),
    renderPanel(state, store),
  );
}

function renderHeader(state: AppState): HTMLElement {
  const session = state.session;
  const subtitle = session
    ? `${session.source} → ${session.target} · ${session.state}`
    : "pick a source library to begin";
  return el(
    "header",
    { class: "app-header" },
    el("h1", {}, "Library Migration Review"),
    el("p", { class: "subtitle" }, subtitle),
  );
}

function renderBanner(state: AppState, store: AppStore): HTMLElement {
  const container = el("div", { class: "banners" });
  if (state.error) {
    container.append(el("div", { class: "banner error", role: "alert" }, state.error));
  }
  const verdict = state.session?.verdict;
  if (verdict?.status === "regressed" && state.panel === "review") {
    const open = el("button", { class: "banner-action" }, "Open test results");
    open.addEventListener("click", () => store.selectTab("tests"));
    container.append(
      el(
        "div",
        { class: "banner warning", role: "alert", "data-testid": "regression-banner" },
        `${verdict.regressions.length} test(s) regressed after migration. `,
        open,
      ),
    );
  }
  return container;
}

function renderPanel(state: AppState, store: AppStore): HTMLElement {
  switch (state.panel) {
    case "launcher":
      return renderLauncher(state, store);
    case "running":
      return renderProgress(state);
    case "review":
      return renderReview(state, store);
    case "closed":
      return renderClosed(state);
  }
}

// --- launcher ----------------------------------------------------------------

function renderLauncher(state: AppState, store: AppStore): HTMLElement {
  const sourceInput = el("input", {
    name: "source",
    placeholder: "source library",
    "data-testid": "source-input",
  });
  const targetInput = el("input", {
    name: "target",
    placeholder: "target library",
    "data-testid": "target-input",
  });
  const list = el("ul", { class: "dependency-list", "data-testid": "dependency-list" });
  for (const file of state.dependencies) {
    for (const entry of file.entries) {
      const pick = el(
        "button",
        { class: "dependency", "data-library": entry.raw_name },
        `${entry.raw_name}${entry.version_spec ?? ""}`,
      );
      // picking a library pre-fills the source, like the editor hover trigger
      pick.addEventListener("click", () => {
        sourceInput.value = entry.raw_name;
        targetInput.focus();
      });
      list.append(el("li", {}, pick, el("span", { class: "muted" }, ` (${file.path})`)));
    }
  }
  const submit = el("button", { class: "primary", "data-testid": "start" }, "Migrate");
  submit.addEventListener("click", () => {
    void store.start(sourceInput.value, targetInput.value);
  });
  return el(
    "section",
    { class: "panel launcher", "data-testid": "launcher" },
    el("h2", {}, "Start a migration"),
    el("p", {}, "Declared dependencies:"),
    list,
    el("div", { class: "launch-form" }, sourceInput, targetInput, submit),
  );
}

// --- progress -----------------------------------------------------------------

function renderProgress(state: AppState): HTMLElement {
  const progress = state.session?.progress ?? {};
  const total = progress.files_total ?? 0;
  const done = progress.files_done ?? 0;
  const bar = el("progress", { "data-testid": "progress-bar" }) as HTMLProgressElement;
  if (total > 0) {
    bar.max = total;
    bar.value = done;
  }
  const label = progress.round
    ? `${progress.round}${total ? `: file ${Math.min(done + 1, total)} of ${total}` : ""}`
    : "starting";
  return el(
    "section",
    { class: "panel running", "data-testid": "running" },
    el("h2", {}, "Migration in progress"),
    bar,
    el("p", { class: "muted" }, label),
  );
}

// --- review -------------------------------------------------------------------

function renderReview(state: AppState, store: AppStore): HTMLElement {
  const tabs = el("nav", { class: "tabs" });
  for (const tab of ["preview", "tests"] as const) {
    const button = el(
      "button",
      {
        class: state.tab === tab ? "tab active" : "tab",
        "data-testid": `tab-${tab}`,
      },
      tab === "preview" ? "Migration Preview" : "Test Results",
    );
    button.addEventListener("click", () => store.selectTab(tab));
    tabs.append(button);
  }
  const body =
    state.tab === "preview" ? renderPreview(state, store) : renderTests(state, store);
  return el("section", { class: "panel review" }, tabs, body);
}

function renderPreview(state: AppState, store: AppStore): HTMLElement {
  const files = state.diff?.files ?? [];
  const container = el("div", { class: "preview", "data-testid": "preview" });
  if (!files.length) {
    container.append(el("p", { class: "muted" }, "No changes to review."));
    return container;
  }
  const applyAll = el(
    "button",
    { class: "primary", "data-testid": "apply-all" },
    "Apply entire migration",
  );
  applyAll.addEventListener("click", () => void store.applyAll());
  const close = el("button", { "data-testid": "close-preview" }, "Close Preview");
  close.addEventListener("click", () => void store.closePreview());
  if (state.busy.has("all")) applyAll.setAttribute("disabled", "");
  container.append(el("div", { class: "preview-actions" }, applyAll, close));
  for (const file of files) {
    container.append(renderFileSection(file, state, store));
  }
  return container;
}

function renderFileSection(
  file: FileDiffView,
  state: AppState,
  store: AppStore,
): HTMLElement {
  const collapsed = state.collapsed[file.path] ?? false;
  const toggle = el(
    "button",
    { class: "file-toggle", "data-testid": `toggle-${file.path}` },
    collapsed ? "▸" : "▾",
    ` ${file.path}`,
    el("span", { class: "muted" }, ` · ${file.hunks.length} hunk(s) · ${file.kind}`),
  );
  toggle.addEventListener("click", () => store.toggleFile(file.path));
  const applyFile = el(
    "button",
    { class: "apply-file", "data-testid": `apply-file-${file.path}` },
    "Apply file",
  );
  applyFile.addEventListener("click", () => void store.applyFile(file.path));
  const everyHunkDone = file.hunks.every((h) => h.state === "applied" || h.state === "rejected");
  if (everyHunkDone || state.busy.has(`file:${file.path}`)) {
    applyFile.setAttribute("disabled", "");
  }
  const section = el(
    "details",
    { class: "file-section", "data-path": file.path },
    el("summary", {}, toggle, applyFile),
  ) as HTMLDetailsElement;
  section.open = !collapsed;
  const fileError = state.fileErrors[file.path];
  if (fileError) {
    const refresh = el("button", { class: "banner-action" }, "Refresh");
    refresh.addEventListener("click", () => void store.refreshReview());
    section.append(
      el("div", { class: "banner error", "data-testid": "file-conflict" }, fileError, refresh),
    );
  }
  for (const hunk of file.hunks) {
    section.append(renderHunk(hunk, state, store));
  }
  return section;
}

function renderHunk(hunk: HunkView, state: AppState, store: AppStore): HTMLElement {
  const apply = el(
    "button",
    { class: "apply-hunk", "data-testid": `apply-${hunk.id}` },
    hunk.state === "applied" ? "Applied" : "Apply",
  );
  if (hunk.state !== "pending" || state.busy.has(hunk.id)) {
    apply.setAttribute("disabled", "");
  }
  apply.addEventListener("click", () => void store.applyHunk(hunk.id));
  const lines = el("pre", { class: "diff-lines" });
  for (const line of hunk.lines) {
    const prefix = line.tag === "add" ? "+" : line.tag === "del" ? "-" : " ";
    lines.append(el("span", { class: `line ${line.tag}` }, prefix + line.text + "\n"));
  }
  return el(
    "div",
    { class: `hunk state-${hunk.state}`, "data-hunk": hunk.id },
    el("div", { class: "hunk-header" }, el("code", {}, hunk.header), apply),
    lines,
  );
}

// --- tests ---------------------------------------------------------------------

function renderTests(state: AppState, store: AppStore): HTMLElement {
  const tests = state.tests;
  const container = el("div", { class: "tests", "data-testid": "tests" });
  if (!tests) {
    container.append(el("p", { class: "muted" }, "No test report available."));
    return container;
  }
  const table = el("table", { class: "summary" });
  table.append(
    el(
      "tr",
      {},
      el("th", {}, ""),
      el("th", {}, "passed"),
      el("th", {}, "failed"),
      el("th", {}, "errored"),
      el("th", {}, "skipped"),
    ),
  );
  const rows: [string, typeof tests.pre][] = [
    ["before", tests.pre],
    ["after", tests.post],
  ];
  for (const [label, counts] of rows) {
    table.append(
      el(
        "tr",
        { "data-testid": `summary-${label}` },
        el("td", {}, label),
        el("td", {}, String(counts?.passed ?? "–")),
        el("td", {}, String(counts?.failed ?? "–")),
        el("td", {}, String(counts?.errored ?? "–")),
        el("td", {}, String(counts?.skipped ?? "–")),
      ),
    );
  }
  container.append(el("h3", {}, "Summary"), table);

  if (tests.regressions.length) {
    const list = el("ul", { class: "regressions", "data-testid": "regressions" });
    for (const regression of tests.regressions) {
      list.append(renderRegression(regression, state, store));
    }
    container.append(el("h3", {}, "Regressions"), list);
  }

  const log = el("pre", { class: "log-pane", "data-testid": "log" }, state.log || "(empty)");
  container.append(el("h3", {}, "Migration log"), log);
  return container;
}

function renderRegression(
  regression: RegressionDetail,
  state: AppState,
  store: AppStore,
): HTMLElement {
  const expanded = state.expandedTests[regression.id] ?? false;
  const toggle = el(
    "button",
    { class: "test-toggle", "data-testid": `test-${regression.id}` },
    `${expanded ? "▾" : "▸"} ${regression.id}`,
  );
  toggle.addEventListener("click", () => store.toggleTestDetail(regression.id));
  const item = el("li", { class: "regression" }, toggle);
  if (regression.file) {
    // the anchor is copyable: path:line jumps to the test in any editor
    const anchor = `${regression.file}:${regression.line ?? 1}`;
    const copy = el("button", { class: "copy-anchor", title: "copy location" }, anchor);
    copy.addEventListener("click", () => {
      void navigator.clipboard?.writeText(anchor);
    });
    item.append(" ", copy);
  }
  if (expanded) {
    item.append(
      el("pre", { class: "test-message" }, regression.message ?? "(no message)"),
    );
  }
  return item;
}

// --- closed ---------------------------------------------------------------------

function renderClosed(state: AppState): HTMLElement {
  const verdict = state.session?.verdict?.status ?? "done";
  return el(
    "section",
    { class: "panel closed", "data-testid": "closed" },
    el("h2", {}, "Review finished"),
    el("p", {}, `Session ${state.session?.id ?? ""} is ${state.session?.state ?? "done"} (${verdict}).`),
    el("p", { class: "muted" }, "Reload the page to start another migration."),
  );
}
