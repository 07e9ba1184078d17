/** Thin client over the engine's HTTP API, the only way the UI touches
 * session state. */

import type {
  AttacksDoc,
  FramingDoc,
  HiddenDoc,
  ReportDoc,
  SessionSummary,
  SolutionsDoc,
  WhatIfResponse,
} from "./types.js";

export class EngineError extends Error {
  constructor(
    public status: number,
    public body: { code?: string; stage?: string | null; message?: string; refs?: string[]; diagnostics?: unknown },
  ) {
    super(body.message ?? `engine error (${status})`);
  }
}

export class ApiClient {
  constructor(public base: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await fetch(`${this.base}${path}`, init);
    const payload = await response.json();
    if (!response.ok) {
      throw new EngineError(response.status, payload);
    }
    return payload as T;
  }

  listSessions(): Promise<SessionSummary[]> {
    return this.request("GET", "/api/sessions");
  }

  createSession(kb: unknown, model: unknown): Promise<{ id: string; session: string }> {
    return this.request("POST", "/api/sessions", { kb, model });
  }

  getFraming(id: string): Promise<FramingDoc> {
    return this.request("GET", `/api/sessions/${id}/framing`);
  }

  putFraming(id: string, payload: unknown): Promise<FramingDoc> {
    return this.request("PUT", `/api/sessions/${id}/framing`, payload);
  }

  assess(id: string, options: { max_depth?: number; max_paths?: number } = {}): Promise<AttacksDoc> {
    return this.request("POST", `/api/sessions/${id}/assess`, options);
  }

  getAttacks(id: string): Promise<{ attacks: AttacksDoc; report: ReportDoc }> {
    return this.request("GET", `/api/sessions/${id}/attacks`);
  }

  mitigate(id: string, options: Record<string, unknown> = {}): Promise<SolutionsDoc> {
    return this.request("POST", `/api/sessions/${id}/mitigate`, options);
  }

  getSolutions(id: string): Promise<SolutionsDoc> {
    return this.request("GET", `/api/sessions/${id}/solutions`);
  }

  whatIf(id: string, sequences: Record<string, string[]>): Promise<WhatIfResponse> {
    return this.request("POST", `/api/sessions/${id}/whatif`, { sequences });
  }

  hide(id: string, options: { solution?: string; gamma?: number; solution_doc?: unknown } = {}): Promise<HiddenDoc> {
    return this.request("POST", `/api/sessions/${id}/hide`, options);
  }

  getPlan(id: string, solution: string): Promise<{ solution: string; plan_hash: string; directives: unknown[] }> {
    return this.request("GET", `/api/sessions/${id}/plan/${solution}`);
  }
}
