/** Wire types mirroring the annotation service's JSON schemas. */

export type Protocol = "pairwise" | "discrete";

export interface QueryResponse {
  done: boolean;
  query_id?: number;
  doc_id?: string;
  tokens?: string[];
  target?: [number, number];
  proposed?: [number, number];
  protocol?: Protocol;
}

/** A served, non-terminal query with all fields present. */
export interface ActiveQuery {
  query_id: number;
  doc_id: string;
  tokens: string[];
  target: [number, number];
  proposed: [number, number];
  protocol: Protocol;
}

export type FollowupType =
  | "first_antecedent"
  | "abstain_no_antecedent"
  | "abstain_invalid_mention";

export interface FollowupPayload {
  type: FollowupType;
  span?: [number, number];
}

export interface AnswerPayload {
  query_id: number;
  doc_id: string;
  target: [number, number];
  proposed: [number, number];
  verdict: "coreferent" | "not_coreferent";
  followup?: FollowupPayload;
  initial_seconds: number;
  followup_seconds?: number;
}

export interface AnswerAck {
  accepted: boolean;
  conflicts: string[];
}

export interface ProgressResponse {
  session_id: string;
  answered: number;
  documents_remaining: number;
  ledger: {
    p: number;
    d_c: number;
    d_nc: number;
    elapsed_seconds: number;
  };
  constraints: {
    ml_classes: [number, number][][];
    cl_edges: [[number, number], [number, number]][];
    discourse_new: [number, number][];
    queried: number;
  };
}

/** The subset of the HTTP API the controller needs; injectable for tests. */
export interface AnnotationApi {
  createSession(protocol: Protocol): Promise<string>;
  nextQuery(sessionId: string): Promise<QueryResponse>;
  postAnswer(sessionId: string, payload: AnswerPayload): Promise<AnswerAck>;
  progress(sessionId: string): Promise<ProgressResponse>;
}

/** Injectable monotonic clock (milliseconds). */
export interface Clock {
  now(): number;
}
