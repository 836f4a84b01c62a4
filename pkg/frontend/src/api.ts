/**
 * Typed client for the annotation service's JSON API.
 *
 * Every mutation the UI performs goes through this class; the fetch
 * implementation is injectable so tests can script server behavior.
 */

import type { RLEMask, Stroke, SuperpixelData } from "./raster.js";

export interface FrameInfo {
  frame_id: string;
  width: number;
  height: number;
}

export interface AnnotationData {
  frame_id: string;
  superpixel_ref: string;
  selected: number[];
  erased: RLEMask;
  author: string;
  timestamp: string;
}

export interface AnnotationPut {
  superpixel_ref: string;
  selected: number[];
  erased?: RLEMask;
  strokes?: Stroke[];
  author?: string;
}

export interface LossRow {
  iteration: number;
  mismatch: number | null;
  penalty_lo: number | null;
  penalty_hi: number | null;
  total: number | null;
}

export interface Job {
  id: string;
  kind: string;
  status: "queued" | "running" | "done" | "failed";
  progress: number;
  result_ref: string | null;
  error: string | null;
  loss_history?: LossRow[];
  theta?: Record<string, number>;
}

export interface LearnPair {
  init_frame: string;
  target_frame: string;
  k: number;
}

export interface LearnRequest {
  pairs: LearnPair[];
  bounds?: Record<string, [number, number]>;
  lambda1?: number;
  lambda2?: number;
  learning_rate?: number;
  iterations?: number;
  dt: number;
  gradient_mode?: "central_fd" | "adjoint";
  seed?: number;
  interface_width?: number;
}

export interface SimulateRequest {
  theta?: Record<string, number>;
  params_path?: string;
  init: { pfs?: string; frame_id?: string };
  dt: number;
  n_steps: number;
  snapshot_every: number;
  interface_width?: number;
}

export interface PredictRequest {
  theta?: Record<string, number>;
  params_path?: string;
  frame_id: string;
  dt: number;
  step_list: number[];
  threshold?: number;
  interface_width?: number;
}

export class ApiError extends Error {
  status: number;
  field?: string;

  constructor(status: number, message: string, field?: string) {
    super(message);
    this.status = status;
    this.field = field;
  }
}

type FetchFn = (url: string, init?: RequestInit) => Promise<Response>;

async function errorFrom(resp: Response): Promise<ApiError> {
  let message = `HTTP ${resp.status}`;
  let field: string | undefined;
  try {
    const body = await resp.json();
    if (typeof body.error === "string") message = body.error;
    else if (typeof body.detail === "string") message = body.detail;
    if (typeof body.field === "string") field = body.field;
  } catch {
    // non-JSON error body: keep the status line
  }
  return new ApiError(resp.status, message, field);
}

export class ApiClient {
  base: string;
  private fetchFn: FetchFn;

  constructor(base: string, fetchFn?: FetchFn) {
    this.base = base.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(this.base + path, init);
    if (!resp.ok) throw await errorFrom(resp);
    return (await resp.json()) as T;
  }

  listFrames(): Promise<FrameInfo[]> {
    return this.request("GET", "/api/frames");
  }

  frameUrl(frameId: string): string {
    return `${this.base}/api/frames/${encodeURIComponent(frameId)}.png`;
  }

  resultFrameUrl(jobId: string, k: number): string {
    return `${this.base}/api/results/${encodeURIComponent(jobId)}/frame/${k}.png`;
  }

  getSuperpixels(frameId: string): Promise<SuperpixelData> {
    return this.request("GET", `/api/frames/${encodeURIComponent(frameId)}/superpixels`);
  }

  segment(frameId: string, k: number, m?: number, maxIter?: number): Promise<SuperpixelData> {
    const body: Record<string, number> = { k };
    if (m !== undefined) body.m = m;
    if (maxIter !== undefined) body.max_iter = maxIter;
    return this.request("POST", `/api/frames/${encodeURIComponent(frameId)}/superpixels`, body);
  }

  getAnnotation(frameId: string): Promise<AnnotationData> {
    return this.request("GET", `/api/frames/${encodeURIComponent(frameId)}/annotation`);
  }

  putAnnotation(frameId: string, body: AnnotationPut): Promise<AnnotationData> {
    return this.request("PUT", `/api/frames/${encodeURIComponent(frameId)}/annotation`, body);
  }

  async postLearn(req: LearnRequest): Promise<string> {
    const r = await this.request<{ job_id: string }>("POST", "/api/jobs/learn", req);
    return r.job_id;
  }

  async postSimulate(req: SimulateRequest): Promise<string> {
    const r = await this.request<{ job_id: string }>("POST", "/api/jobs/simulate", req);
    return r.job_id;
  }

  async postPredict(req: PredictRequest): Promise<string> {
    const r = await this.request<{ job_id: string }>("POST", "/api/jobs/predict", req);
    return r.job_id;
  }

  getJob(jobId: string): Promise<Job> {
    return this.request("GET", `/api/jobs/${encodeURIComponent(jobId)}`);
  }
}
