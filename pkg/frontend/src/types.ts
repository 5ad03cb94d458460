// Shapes served by the review API (unknown extra fields are ignored).

export type SessionState =
  | "initializing"
  | "running"
  | "awaiting_review"
  | "applying"
  | "done"
  | "aborted";

export interface Verdict {
  status: "clean" | "regressed" | "aborted";
  final_round: string;
  regressions: string[];
}

export interface SessionView {
  id: string;
  state: SessionState;
  verdict: Verdict | null;
  progress: { round?: string; files_done?: number; files_total?: number };
  created_at: string;
  source: string;
  target: string;
  rounds: string[];
  preview_suppressed: boolean;
}

export type HunkState = "pending" | "accepted" | "rejected" | "applied";

export interface DiffLine {
  tag: "context" | "add" | "del";
  text: string;
}

export interface HunkView {
  id: string;
  header: string;
  state: HunkState;
  lines: DiffLine[];
}

export interface FileDiffView {
  path: string;
  kind: "source" | "dependency";
  hunks: HunkView[];
}

export interface DiffView {
  files: FileDiffView[];
}

export interface DependencyEntry {
  name: string;
  raw_name: string;
  version_spec: string | null;
  line: number;
}

export interface DependencyFileView {
  path: string;
  kind: string;
  entries: DependencyEntry[];
}

export interface RegressionDetail {
  id: string;
  message: string | null;
  file: string | null;
  line: number | null;
}

export interface StatusCounts {
  passed: number;
  failed: number;
  errored: number;
  skipped: number;
}

export interface TestsView {
  verdict: string | null;
  pre: StatusCounts | null;
  post: StatusCounts | null;
  rounds: { name: string; kind: string; counts: StatusCounts }[];
  regressions: RegressionDetail[];
}

export interface ApiError {
  code: string;
  message: string;
  detail: string | null;
}
