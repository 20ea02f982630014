/** Typed client for the annotation service API. */
import type { ClassifyResponse, MaskInfo, MaskRle, SeedRun, SeedsOut,
              SessionCreated, SessionMeta, SessionParams } from "./types.js";

export class ApiError extends Error {
  constructor(public readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (typeof body.detail === "string") return body.detail;
    return JSON.stringify(body.detail ?? body);
  } catch {
    return response.statusText || `HTTP ${response.status}`;
  }
}

export class AnnotationApi {
  constructor(private readonly base: string = "") {}

  private async request<T>(method: string, path: string, body?: BodyInit,
                           contentType?: string): Promise<T> {
    const headers: Record<string, string> = {};
    if (contentType) headers["Content-Type"] = contentType;
    const response = await fetch(this.base + path, { method, body, headers });
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    if (response.status === 204) return undefined as T;
    return response.json() as Promise<T>;
  }

  private json<T>(method: string, path: string, payload: unknown): Promise<T> {
    return this.request<T>(method, path, JSON.stringify(payload), "application/json");
  }

  createSession(image: ArrayBuffer | Uint8Array): Promise<SessionCreated> {
    // copy into a fresh ArrayBuffer: views (Node Buffers in particular) may
    // sit at an offset inside a larger pool
    const body = image instanceof Uint8Array
      ? new Uint8Array(image).buffer
      : image;
    return this.request<SessionCreated>("POST", "/api/sessions", body,
                                        "application/octet-stream");
  }

  getSession(sessionId: string): Promise<SessionMeta> {
    return this.request<SessionMeta>("GET", `/api/sessions/${sessionId}`);
  }

  sendSeeds(sessionId: string, runs: SeedRun[],
            mode: "replace" | "merge" = "replace"): Promise<SeedsOut> {
    return this.json<SeedsOut>("POST", `/api/sessions/${sessionId}/seeds`,
                               { mode, runs });
  }

  setParams(sessionId: string, params: Partial<SessionParams>): Promise<SessionMeta> {
    return this.json<SessionMeta>("PUT", `/api/sessions/${sessionId}/params`, params);
  }

  segment(sessionId: string, expectedRevision?: number): Promise<MaskInfo> {
    return this.json<MaskInfo>("POST", `/api/sessions/${sessionId}/segment`,
                               { expected_revision: expectedRevision ?? null });
  }

  maskRle(sessionId: string): Promise<MaskRle> {
    return this.request<MaskRle>("GET", `/api/sessions/${sessionId}/mask.rle`);
  }

  async maskPng(sessionId: string): Promise<Uint8Array> {
    const response = await fetch(`${this.base}/api/sessions/${sessionId}/mask.png`);
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return new Uint8Array(await response.arrayBuffer());
  }

  classify(sessionId: string, model: string): Promise<ClassifyResponse> {
    return this.json<ClassifyResponse>("POST", `/api/sessions/${sessionId}/classify`,
                                       { model });
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request<void>("DELETE", `/api/sessions/${sessionId}`);
  }

  async models(): Promise<string[]> {
    const body = await this.request<{ models: string[] }>("GET", "/api/models");
    return body.models;
  }
}
