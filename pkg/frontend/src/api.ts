/** fetch-based client for the annotation service. */

import {
  AnnotationApi,
  AnswerAck,
  AnswerPayload,
  ProgressResponse,
  Protocol,
  QueryResponse,
} from "./types.js";

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    const body = await response.text();
    throw new Error(`HTTP ${response.status}: ${body}`);
  }
  return (await response.json()) as T;
}

export class HttpAnnotationApi implements AnnotationApi {
  constructor(private readonly baseUrl: string = "") {}

  async createSession(protocol: Protocol): Promise<string> {
    const response = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ protocol }),
    });
    const body = await asJson<{ session_id: string }>(response);
    return body.session_id;
  }

  async nextQuery(sessionId: string): Promise<QueryResponse> {
    return asJson(await fetch(`${this.baseUrl}/sessions/${sessionId}/next`));
  }

  async postAnswer(sessionId: string, payload: AnswerPayload): Promise<AnswerAck> {
    const response = await fetch(`${this.baseUrl}/sessions/${sessionId}/answer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
    return asJson(response);
  }

  async progress(sessionId: string): Promise<ProgressResponse> {
    return asJson(await fetch(`${this.baseUrl}/sessions/${sessionId}/progress`));
  }
}
