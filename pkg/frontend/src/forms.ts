/**
 * Form-value parsing and request construction for the job panels.
 *
 * Pure functions from raw input strings to API request bodies; all field
 * validation that the UI can do locally happens here so the panels stay
 * thin DOM wiring.
 */

import type { LearnPair, LearnRequest, PredictRequest, SimulateRequest } from "./api.js";

export const PARAM_NAMES = [
  "M_v", "M_i", "L",
  "kappa_v", "kappa_i", "kappa_eta",
  "A_v", "A_i", "B_v", "B_i",
  "cv_eq", "ci_eq", "R", "P",
] as const;

export type ParamName = (typeof PARAM_NAMES)[number];

export function parseNumber(raw: string, field: string): number {
  const v = Number(raw.trim());
  if (raw.trim() === "" || !Number.isFinite(v)) {
    throw new Error(`${field} must be a number, got ${JSON.stringify(raw)}`);
  }
  return v;
}

/** "3, 10,20" -> [3, 10, 20]; must be non-negative and strictly increasing. */
export function parseStepList(raw: string): number[] {
  const parts = raw.split(",").map((s) => s.trim()).filter((s) => s !== "");
  if (parts.length === 0) throw new Error("step list is empty");
  const steps = parts.map((p) => {
    const v = Number(p);
    if (!Number.isInteger(v) || v < 0) throw new Error(`bad step ${JSON.stringify(p)}`);
    return v;
  });
  for (let i = 1; i < steps.length; i++) {
    if (steps[i] <= steps[i - 1]) throw new Error("steps must be strictly increasing");
  }
  return steps;
}

/** Per-parameter (min, max) strings -> bounds dict; blank rows are unbounded. */
export function parseBounds(rows: Record<string, { lo: string; hi: string }>): Record<string, [number, number]> {
  const bounds: Record<string, [number, number]> = {};
  for (const name of PARAM_NAMES) {
    const row = rows[name];
    if (!row) continue;
    const lo = row.lo.trim();
    const hi = row.hi.trim();
    if (lo === "" && hi === "") continue;
    if (lo === "" || hi === "") throw new Error(`${name}: give both min and max or neither`);
    const b: [number, number] = [parseNumber(lo, `${name} min`), parseNumber(hi, `${name} max`)];
    if (!(b[0] < b[1])) throw new Error(`${name}: min must be < max`);
    bounds[name] = b;
  }
  return bounds;
}

export function parseTheta(rows: Record<string, string>): Record<string, number> {
  const theta: Record<string, number> = {};
  for (const name of PARAM_NAMES) {
    theta[name] = parseNumber(rows[name] ?? "", name);
  }
  return theta;
}

export interface LearnFormValues {
  pairs: LearnPair[];
  bounds: Record<string, { lo: string; hi: string }>;
  lambda1: string;
  lambda2: string;
  learningRate: string;
  iterations: string;
  dt: string;
  gradientMode: "central_fd" | "adjoint";
  seed: string;
}

export function buildLearnRequest(v: LearnFormValues): LearnRequest {
  if (v.pairs.length === 0) throw new Error("add at least one frame pair");
  for (const p of v.pairs) {
    if (!Number.isInteger(p.k) || p.k < 1) throw new Error("pair step count k must be >= 1");
  }
  const req: LearnRequest = {
    pairs: v.pairs,
    dt: parseNumber(v.dt, "dt"),
    lambda1: parseNumber(v.lambda1, "lambda1"),
    lambda2: parseNumber(v.lambda2, "lambda2"),
    learning_rate: parseNumber(v.learningRate, "learning rate"),
    iterations: parseNumber(v.iterations, "iterations"),
    gradient_mode: v.gradientMode,
    seed: parseNumber(v.seed, "seed"),
  };
  if (!Number.isInteger(req.iterations) || (req.iterations as number) < 0) {
    throw new Error("iterations must be a non-negative integer");
  }
  const bounds = parseBounds(v.bounds);
  if (Object.keys(bounds).length > 0) req.bounds = bounds;
  return req;
}

export interface SimulateFormValues {
  theta: Record<string, string>;
  frameId: string;
  dt: string;
  nSteps: string;
  snapshotEvery: string;
}

export function buildSimulateRequest(v: SimulateFormValues): SimulateRequest {
  if (!v.frameId) throw new Error("pick an annotated frame first");
  const req: SimulateRequest = {
    theta: parseTheta(v.theta),
    init: { frame_id: v.frameId },
    dt: parseNumber(v.dt, "dt"),
    n_steps: parseNumber(v.nSteps, "steps"),
    snapshot_every: parseNumber(v.snapshotEvery, "snapshot every"),
  };
  if (!Number.isInteger(req.n_steps) || req.n_steps < 1) throw new Error("steps must be >= 1");
  if (!Number.isInteger(req.snapshot_every) || req.snapshot_every < 1) {
    throw new Error("snapshot every must be >= 1");
  }
  return req;
}

export interface PredictFormValues {
  theta: Record<string, string>;
  frameId: string;
  dt: string;
  steps: string;
  threshold: string;
}

export function buildPredictRequest(v: PredictFormValues): PredictRequest {
  if (!v.frameId) throw new Error("pick an annotated frame first");
  return {
    theta: parseTheta(v.theta),
    frame_id: v.frameId,
    dt: parseNumber(v.dt, "dt"),
    step_list: parseStepList(v.steps),
    threshold: parseNumber(v.threshold, "threshold"),
  };
}

/** Snapshots a simulate job will produce: one at step 0, then every k-th. */
export function snapshotCount(nSteps: number, snapshotEvery: number): number {
  return Math.floor(nSteps / snapshotEvery) + 1;
}
