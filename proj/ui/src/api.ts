// Types and a thin client for the coding service HTTP API. The browser UI
// builds on these; the bundle itself is not part of this repository. Serve a
// built bundle with `engage serve --static-dir DIR` (mounted under /ui).

export type Frame = "gain" | "loss";
export type Appeal = "extrinsic" | "introjected" | "identified" | "intrinsic";

export interface ServiceError {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

export interface SegmentView {
  index: number;
  segment_id: string;
  text: string;
  focus: boolean;
}

export interface CodingItem {
  item_id: string;
  session_id: string;
  transcript_id: string;
  focus: number;
  segment_count: number;
  context_window: number;
  matched_keywords: string[];
  segments: SegmentView[];
  lease?: { coder: string; expires_at: number };
}

export type NextResponse = { done: true } | { done: false; item: CodingItem };

export interface Annotation {
  id: string;
  coder_id: string;
  transcript_id: string;
  start: number;
  end: number;
  decision: "message" | "not_a_message";
  frame?: Frame;
  appeal?: Appeal;
  note?: string;
  created_at: number;
}

export interface Ack {
  annotation_id: string;
  item_id: string;
  replayed: boolean;
  annotation: Annotation;
}

export interface CoderProgress {
  total: number;
  completed: number;
  leased: number;
}

export interface ProgressReport {
  session_id: string;
  status: "open" | "closed";
  items_total: number;
  items_completed: number;
  annotations: number;
  coders: Record<string, CoderProgress>;
  agreement: AgreementReport | null;
}

export interface AgreementReport {
  overall_percent: number;
  per_category: {
    category: string;
    frame: Frame;
    appeal: Appeal;
    agreements: number;
    disagreements: number;
    percent: number | null;
  }[];
  units: { agreeing: number; disagreeing: number; unmatched_a: number; unmatched_b: number };
}

export type Decision =
  | { decision: "message"; frame: Frame; appeal: Appeal }
  | { decision: "not_a_message" };

export interface Submission {
  coder: string;
  item_id: string;
  span?: { start: number; end: number };
  note?: string;
}

// Digits 1-8 pick a category in codebook order (gain row, then loss row,
// extrinsic to intrinsic); 0 marks "not a message".
const APPEALS: Appeal[] = ["extrinsic", "introjected", "identified", "intrinsic"];

export function decisionForKey(key: string): Decision | undefined {
  if (key === "0") return { decision: "not_a_message" };
  const n = Number(key);
  if (!Number.isInteger(n) || n < 1 || n > 8) return undefined;
  return { decision: "message", frame: n <= 4 ? "gain" : "loss", appeal: APPEALS[(n - 1) % 4] };
}

export class ServiceClient {
  constructor(private base: string, private token?: string) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["X-Auth-Token"] = this.token;
    const res = await fetch(this.base + path, { method, headers, body: body === undefined ? undefined : JSON.stringify(body) });
    const json = await res.json();
    if (!res.ok) throw json as ServiceError;
    return json as T;
  }

  next(session: string, coder: string) {
    return this.call<NextResponse>("GET", `/sessions/${session}/next?coder=${encodeURIComponent(coder)}`);
  }
  item(session: string, item: string, context?: number) {
    const q = context === undefined ? "" : `?context=${context}`;
    return this.call<CodingItem>("GET", `/sessions/${session}/items/${item}${q}`);
  }
  submit(session: string, submission: Submission & Decision) {
    return this.call<Ack>("POST", `/sessions/${session}/annotations`, submission);
  }
  progress(session: string) {
    return this.call<ProgressReport>("GET", `/sessions/${session}/progress`);
  }
  agreement(session: string) {
    return this.call<AgreementReport>("GET", `/sessions/${session}/agreement`);
  }
}
