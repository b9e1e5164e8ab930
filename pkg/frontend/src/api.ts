/** Typed client for the annotation service HTTP API. */

import { SubmissionBody } from "./draft.js";

export interface SessionInfo {
  session_id: string;
  dataset_id: string;
  method_order: string[];
  task_count: number;
}

export interface TaskDoc {
  task_id: string;
  image_id: string;
  method: "singular" | "cc";
  position: number;
  total: number;
  width: number;
  height: number;
  image_url: string;
}

export interface NextTaskResponse {
  done: boolean;
  task: TaskDoc | null;
}

export interface SurveyScores {
  mental_demand: number;
  physical_demand: number;
  temporal_demand: number;
  performance: number;
  effort: number;
  frustration: number;
}

/** A non-2xx response, decoded from the service's error body. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async createSession(
    annotatorId: string,
    datasetId: string,
    imagesPerMethod?: number,
  ): Promise<SessionInfo> {
    const body: Record<string, unknown> = {
      annotator_id: annotatorId,
      dataset_id: datasetId,
    };
    if (imagesPerMethod !== undefined) {
      body.images_per_method = imagesPerMethod;
    }
    return this.post("/api/sessions", body);
  }

  async nextTask(sessionId: string): Promise<NextTaskResponse> {
    return this.get(`/api/sessions/${encodeURIComponent(sessionId)}/tasks/next`);
  }

  imageUrl(task: TaskDoc): string {
    return this.baseUrl + task.image_url;
  }

  async submitAnnotation(body: SubmissionBody): Promise<{ record_id: number }> {
    return this.post("/api/annotations", body);
  }

  async submitSurvey(
    sessionId: string,
    method: "singular" | "cc",
    scores: SurveyScores,
  ): Promise<{ record_id: number }> {
    return this.post("/api/surveys", {
      session_id: sessionId,
      method,
      scores,
    });
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path);
    return this.decode(response);
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return this.decode(response);
  }

  private async decode<T>(response: Response): Promise<T> {
    if (response.ok) {
      return (await response.json()) as T;
    }
    let code = "error";
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (body && typeof body.error === "string") code = body.error;
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, code, detail);
  }
}
