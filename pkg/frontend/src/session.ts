/** Question flow state machine.
 *
 * One question at a time: the initial pairwise judgment is timed from render;
 * answering "No" under the discrete protocol reveals the first-occurrence
 * selector and starts the follow-up timer. All DOM concerns live elsewhere —
 * this module is pure apart from the injected API and clock, so the flow is
 * unit-testable.
 */

import {
  ActiveQuery,
  AnnotationApi,
  AnswerAck,
  AnswerPayload,
  Clock,
  FollowupPayload,
  Protocol,
  QueryResponse,
} from "./types.js";
import { TokenRange, validateFirstOccurrence } from "./selection.js";

export type Phase =
  | "idle" // no session yet
  | "loading" // fetching the next query
  | "initial" // initial question shown, Yes/No active
  | "followup" // "No" was clicked; first-occurrence selector visible
  | "done" // session exhausted
  | "error"; // fetch or submit failure; retry available

export interface FlowState {
  phase: Phase;
  query: ActiveQuery | null;
  error: string | null;
  lastAck: AnswerAck | null;
  answered: number;
}

const wallClock: Clock = { now: () => Date.now() };

function asActive(response: QueryResponse): ActiveQuery {
  if (
    response.done ||
    response.query_id === undefined ||
    response.doc_id === undefined ||
    response.tokens === undefined ||
    response.target === undefined ||
    response.proposed === undefined ||
    response.protocol === undefined
  ) {
    throw new Error("malformed query response");
  }
  return {
    query_id: response.query_id,
    doc_id: response.doc_id,
    tokens: response.tokens,
    target: response.target,
    proposed: response.proposed,
    protocol: response.protocol,
  };
}

export class QuestionFlow {
  state: FlowState = { phase: "idle", query: null, error: null, lastAck: null, answered: 0 };

  private sessionId: string | null = null;
  private initialShownAt = 0;
  private initialSeconds = 0;
  private followupShownAt = 0;
  private listeners: Array<(state: FlowState) => void> = [];

  constructor(
    private readonly api: AnnotationApi,
    private readonly clock: Clock = wallClock,
  ) {}

  get session(): string | null {
    return this.sessionId;
  }

  onChange(listener: (state: FlowState) => void): void {
    this.listeners.push(listener);
  }

  private emit(partial: Partial<FlowState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  async start(protocol: Protocol): Promise<void> {
    try {
      this.sessionId = await this.api.createSession(protocol);
    } catch (err) {
      this.emit({ phase: "error", error: String(err) });
      return;
    }
    await this.fetchNext();
  }

  async fetchNext(): Promise<void> {
    if (this.sessionId === null) throw new Error("no session");
    this.emit({ phase: "loading", error: null });
    let response: QueryResponse;
    try {
      response = await this.api.nextQuery(this.sessionId);
    } catch (err) {
      this.emit({ phase: "error", error: String(err) });
      return;
    }
    if (response.done) {
      this.emit({ phase: "done", query: null });
      return;
    }
    this.initialShownAt = this.clock.now();
    this.emit({ phase: "initial", query: asActive(response) });
  }

  /** "Yes" on the initial question: submit a coreferent verdict. */
  async answerYes(): Promise<void> {
    this.requirePhase("initial");
    this.initialSeconds = (this.clock.now() - this.initialShownAt) / 1000;
    await this.submit({ verdict: "coreferent" });
  }

  /**
   * "No" on the initial question. Pairwise sessions submit immediately; the
   * discrete protocol reveals the first-occurrence selector instead.
   */
  async answerNo(): Promise<void> {
    this.requirePhase("initial");
    this.initialSeconds = (this.clock.now() - this.initialShownAt) / 1000;
    if (this.state.query!.protocol === "pairwise") {
      await this.submit({ verdict: "not_coreferent" });
      return;
    }
    this.followupShownAt = this.clock.now();
    this.emit({ phase: "followup" });
  }

  /** Submit the selected first-occurrence range; returns a validation error, if any. */
  async submitFirstOccurrence(range: TokenRange | null): Promise<string | null> {
    this.requirePhase("followup");
    const problem = validateFirstOccurrence(range, this.state.query!.target);
    if (problem !== null) return problem;
    await this.submitFollowup({
      type: "first_antecedent",
      span: [range!.start, range!.end],
    });
    return null;
  }

  async abstainNoAntecedent(): Promise<void> {
    this.requirePhase("followup");
    await this.submitFollowup({ type: "abstain_no_antecedent" });
  }

  async abstainInvalidMention(): Promise<void> {
    this.requirePhase("followup");
    await this.submitFollowup({ type: "abstain_invalid_mention" });
  }

  private async submitFollowup(followup: FollowupPayload): Promise<void> {
    const followupSeconds = (this.clock.now() - this.followupShownAt) / 1000;
    await this.submit({
      verdict: "not_coreferent",
      followup,
      followup_seconds: followupSeconds,
    });
  }

  private async submit(
    fields: Pick<AnswerPayload, "verdict"> & Partial<AnswerPayload>,
  ): Promise<void> {
    const query = this.state.query!;
    const payload: AnswerPayload = {
      query_id: query.query_id,
      doc_id: query.doc_id,
      target: query.target,
      proposed: query.proposed,
      initial_seconds: this.initialSeconds,
      ...fields,
    };
    let ack: AnswerAck;
    try {
      ack = await this.api.postAnswer(this.sessionId!, payload);
    } catch (err) {
      this.emit({ phase: "error", error: String(err) });
      return;
    }
    if (!ack.accepted) {
      // Conflicting answer: surface the diagnostics and refetch; the server
      // kept the question outstanding.
      this.emit({ lastAck: ack });
      await this.fetchNext();
      return;
    }
    this.emit({ lastAck: ack, answered: this.state.answered + 1 });
    await this.fetchNext();
  }

  private requirePhase(phase: Phase): void {
    if (this.state.phase !== phase) {
      throw new Error(`expected phase ${phase}, in ${this.state.phase}`);
    }
  }
}
