/**
 * Single-page annotation and job-control app.
 *
 * Layout: a frame browser on the left, the annotation canvas in the middle
 * (superpixel boundaries, selected-superpixel tint, eraser preview), and
 * the learn / simulate / predict panels on the right. All server state goes
 * through ApiClient; browser facilities (fetch, timers, confirm, image
 * loading) are injectable so the whole flow runs under a scripted DOM test.
 */

import type { AnnotationData, FrameInfo, Job, LossRow } from "./api.js";
import { ApiClient, ApiError } from "./api.js";
import {
  buildLearnRequest,
  buildPredictRequest,
  buildSimulateRequest,
  PARAM_NAMES,
  snapshotCount,
} from "./forms.js";
import { JobPoller } from "./jobs.js";
import { drawLossPlot } from "./lossplot.js";
import type { LearnPair } from "./api.js";
import type { SuperpixelData } from "./raster.js";
import { boundaryMask, decodeMask, masksEqual } from "./raster.js";
import { AnnotationState } from "./state.js";

export interface AppOptions {
  fetchFn?: (url: string, init?: RequestInit) => Promise<Response>;
  confirmFn?: (message: string) => boolean;
  alertFn?: (message: string) => void;
  loadImage?: (url: string) => Promise<CanvasImageSource | null>;
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
  clearTimeoutFn?: (handle: unknown) => void;
  pollIntervalMs?: number;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

function defaultLoadImage(url: string): Promise<CanvasImageSource | null> {
  return new Promise((resolve) => {
    const img = new Image();
    img.crossOrigin = "anonymous";
    img.onload = () => resolve(img);
    img.onerror = () => resolve(null);
    img.src = url;
  });
}

function context2d(canvas: HTMLCanvasElement): CanvasRenderingContext2D | null {
  try {
    return canvas.getContext("2d");
  } catch {
    return null; // jsdom without a canvas implementation
  }
}

export class App {
  api: ApiClient;
  root: HTMLElement;
  confirmFn: (message: string) => boolean;
  alertFn: (message: string) => void;
  loadImage: (url: string) => Promise<CanvasImageSource | null>;
  private timerOpts: Pick<AppOptions, "setTimeoutFn" | "clearTimeoutFn">;
  pollIntervalMs: number;

  frames: FrameInfo[] = [];
  currentFrame: string | null = null;
  sp: SuperpixelData | null = null;
  annState: AnnotationState | null = null;
  mode: "select" | "erase" = "select";
  brushRadius = 3; // px at image scale, zoom-independent
  zoom = 4;
  lastLearnJob: Job | null = null;
  activePoller: JobPoller | null = null;

  canvas!: HTMLCanvasElement;
  private frameImage: CanvasImageSource | null = null;
  private frameListEl!: HTMLElement;
  private dirtyEl!: HTMLElement;
  private statusEl!: HTMLElement;
  private radiusInput!: HTMLInputElement;
  private kInput!: HTMLInputElement;
  private mInput!: HTMLInputElement;
  private spIterInput!: HTMLInputElement;
  private modeButtons: Record<string, HTMLButtonElement> = {};
  private dragging = false;

  learnInputs: Record<string, HTMLInputElement> = {};
  boundsInputs: Record<string, { lo: HTMLInputElement; hi: HTMLInputElement }> = {};
  learnPairs: LearnPair[] = [];
  private pairListEl!: HTMLElement;
  private pairInit!: HTMLSelectElement;
  private pairTarget!: HTMLSelectElement;
  private pairK!: HTMLInputElement;
  learnProgressEl!: HTMLProgressElement;
  learnStatusEl!: HTMLElement;
  lossCanvas!: HTMLCanvasElement;
  thetaTableEl!: HTMLElement;
  lastLossHistory: LossRow[] = [];

  simInputs: Record<string, HTMLInputElement> = {};
  simThetaInputs: Record<string, HTMLInputElement> = {};
  simProgressEl!: HTMLProgressElement;
  simStatusEl!: HTMLElement;
  private simScrub!: HTMLInputElement;
  private simFrameImg!: HTMLImageElement;
  simJobId: string | null = null;
  simFrames = 0;

  predInputs: Record<string, HTMLInputElement> = {};
  predThetaInputs: Record<string, HTMLInputElement> = {};
  predStatusEl!: HTMLElement;
  private predStripEl!: HTMLElement;

  constructor(root: HTMLElement, apiBase: string, opts: AppOptions = {}) {
    this.root = root;
    this.api = new ApiClient(apiBase, opts.fetchFn);
    this.confirmFn = opts.confirmFn ?? ((m) => (typeof confirm === "function" ? confirm(m) : true));
    this.alertFn = opts.alertFn ?? ((m) => (typeof alert === "function" ? alert(m) : undefined));
    this.loadImage = opts.loadImage ?? defaultLoadImage;
    this.timerOpts = { setTimeoutFn: opts.setTimeoutFn, clearTimeoutFn: opts.clearTimeoutFn };
    this.pollIntervalMs = opts.pollIntervalMs ?? 1000;
    this.buildShell();
  }

  async init(): Promise<void> {
    this.frames = await this.api.listFrames();
    this.renderFrameList();
    this.refreshPairSelectors();
  }

  // ---- layout ----------------------------------------------------------

  private buildShell(): void {
    this.root.textContent = "";
    const bar = el("div", { class: "topbar" });
    bar.appendChild(el("strong", {}, "nanovoid annotator"));
    this.statusEl = el("span", { class: "status", id: "status" });
    bar.appendChild(this.statusEl);
    this.root.appendChild(bar);

    const main = el("div", { class: "columns" });
    this.root.appendChild(main);

    const left = el("div", { class: "col frames-col" });
    left.appendChild(el("h3", {}, "Frames"));
    this.frameListEl = el("div", { id: "frame-list" });
    left.appendChild(this.frameListEl);
    main.appendChild(left);

    const center = el("div", { class: "col canvas-col" });
    center.appendChild(this.buildToolbar());
    this.canvas = el("canvas", { id: "annot-canvas" });
    this.canvas.addEventListener("click", (e) => this.onCanvasClick(e as MouseEvent));
    this.canvas.addEventListener("mousedown", (e) => this.onCanvasDown(e as MouseEvent));
    this.canvas.addEventListener("mousemove", (e) => this.onCanvasMove(e as MouseEvent));
    this.canvas.addEventListener("mouseup", () => this.onCanvasUp());
    this.canvas.addEventListener("mouseleave", () => this.onCanvasUp());
    center.appendChild(this.canvas);
    main.appendChild(center);

    const right = el("div", { class: "col panels-col" });
    right.appendChild(this.buildLearnPanel());
    right.appendChild(this.buildSimulatePanel());
    right.appendChild(this.buildPredictPanel());
    main.appendChild(right);
  }

  private buildToolbar(): HTMLElement {
    const bar = el("div", { class: "toolbar" });

    for (const mode of ["select", "erase"] as const) {
      const b = el("button", { id: `mode-${mode}` }, mode);
      b.addEventListener("click", () => this.setMode(mode));
      this.modeButtons[mode] = b;
      bar.appendChild(b);
    }
    this.modeButtons.select.classList.add("active");

    bar.appendChild(el("label", {}, "radius"));
    this.radiusInput = el("input", { id: "brush-radius", type: "range", min: "1", max: "20", step: "1", value: "3" });
    this.radiusInput.addEventListener("input", () => {
      this.brushRadius = Number(this.radiusInput.value);
    });
    bar.appendChild(this.radiusInput);

    bar.appendChild(el("label", {}, "k"));
    this.kInput = el("input", { id: "sp-k", type: "number", value: "40" });
    bar.appendChild(this.kInput);
    bar.appendChild(el("label", {}, "m"));
    this.mInput = el("input", { id: "sp-m", type: "number", value: "20" });
    bar.appendChild(this.mInput);
    bar.appendChild(el("label", {}, "iters"));
    this.spIterInput = el("input", { id: "sp-iters", type: "number", value: "10" });
    bar.appendChild(this.spIterInput);

    const seg = el("button", { id: "segment-btn" }, "segment");
    seg.addEventListener("click", () => void this.resegment());
    bar.appendChild(seg);

    const save = el("button", { id: "save-btn" }, "save");
    save.addEventListener("click", () => void this.save());
    bar.appendChild(save);

    const reload = el("button", { id: "reload-btn" }, "reload");
    reload.addEventListener("click", () => void this.loadFrame(this.currentFrame ?? ""));
    bar.appendChild(reload);

    this.dirtyEl = el("span", { id: "dirty-indicator", class: "clean" }, "saved");
    bar.appendChild(this.dirtyEl);
    return bar;
  }

  // ---- frame browsing --------------------------------------------------

  private renderFrameList(): void {
    this.frameListEl.textContent = "";
    for (const f of this.frames) {
      const b = el("button", { class: "frame-btn", "data-frame": f.frame_id },
        `${f.frame_id} (${f.width}x${f.height})`);
      b.addEventListener("click", () => void this.loadFrame(f.frame_id));
      this.frameListEl.appendChild(b);
    }
  }

  async loadFrame(frameId: string): Promise<void> {
    if (!frameId) return;
    if (this.annState?.dirty() &&
        !this.confirmFn("Unsaved annotation changes will be lost. Discard them?")) {
      return;
    }
    this.currentFrame = frameId;
    this.sp = null;
    this.annState = null;
    this.frameImage = await this.loadImage(this.api.frameUrl(frameId));
    try {
      this.sp = await this.api.getSuperpixels(frameId);
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 404)) throw err;
      this.setStatus(`${frameId}: not segmented yet`);
    }
    if (this.sp) {
      let saved: AnnotationData | undefined;
      try {
        saved = await this.api.getAnnotation(frameId);
      } catch (err) {
        if (!(err instanceof ApiError && err.status === 404)) throw err;
      }
      if (saved && saved.superpixel_ref !== this.sp.hash) {
        this.setStatus("stored annotation references an older segmentation; starting clean");
        saved = undefined;
      }
      this.annState = new AnnotationState(this.sp, saved);
      this.canvas.width = this.sp.width;
      this.canvas.height = this.sp.height;
      this.canvas.style.width = `${this.sp.width * this.zoom}px`;
      this.canvas.style.height = `${this.sp.height * this.zoom}px`;
    }
    this.render();
    this.updateDirty();
  }

  async resegment(): Promise<void> {
    if (!this.currentFrame) {
      this.alertFn("pick a frame first");
      return;
    }
    if (this.annState?.dirty() &&
        !this.confirmFn("Re-segmenting discards unsaved changes. Continue?")) {
      return;
    }
    try {
      this.sp = await this.api.segment(this.currentFrame, Number(this.kInput.value),
        Number(this.mInput.value), Number(this.spIterInput.value));
    } catch (err) {
      this.alertFn(err instanceof Error ? err.message : String(err));
      return;
    }
    this.annState = new AnnotationState(this.sp);
    this.canvas.width = this.sp.width;
    this.canvas.height = this.sp.height;
    this.setStatus(`segmented into ${this.sp.n_labels} superpixels`);
    this.render();
    this.updateDirty();
  }

  // ---- annotation editing ----------------------------------------------

  setMode(mode: "select" | "erase"): void {
    this.mode = mode;
    for (const [name, b] of Object.entries(this.modeButtons)) {
      b.classList.toggle("active", name === mode);
    }
  }

  /** Canvas event position in image pixel coordinates. */
  private canvasPoint(e: MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    const sx = rect.width > 0 ? this.canvas.width / rect.width : 1;
    const sy = rect.height > 0 ? this.canvas.height / rect.height : 1;
    return [(e.clientX - rect.left) * sx, (e.clientY - rect.top) * sy];
  }

  private onCanvasClick(e: MouseEvent): void {
    if (this.mode !== "select" || !this.annState) return;
    const [x, y] = this.canvasPoint(e);
    const label = this.annState.toggleAt(x, y);
    if (label !== null) {
      this.setStatus(`superpixel ${label} ${this.annState.selected.has(label) ? "selected" : "unselected"}`);
    }
    this.render();
    this.updateDirty();
  }

  private onCanvasDown(e: MouseEvent): void {
    if (this.mode !== "erase" || !this.annState) return;
    this.dragging = true;
    const [x, y] = this.canvasPoint(e);
    // integer grid coordinates are pixel centers on the server
    this.annState.beginStroke(x - 0.5, y - 0.5, this.brushRadius);
    this.render();
  }

  private onCanvasMove(e: MouseEvent): void {
    if (!this.dragging || !this.annState) return;
    const [x, y] = this.canvasPoint(e);
    this.annState.extendStroke(x - 0.5, y - 0.5);
    this.render();
  }

  private onCanvasUp(): void {
    if (!this.dragging) return;
    this.dragging = false;
    this.annState?.endStroke();
    this.render();
    this.updateDirty();
  }

  // ---- persistence -----------------------------------------------------

  async save(): Promise<void> {
    if (!this.annState || !this.sp || !this.currentFrame) {
      this.alertFn("nothing to save: segment the frame first");
      return;
    }
    const body = { superpixel_ref: this.sp.hash ?? "", ...this.annState.putBody() };
    const preview = this.annState.erasedRaster();
    try {
      const resp = await this.api.putAnnotation(this.currentFrame, body);
      if (!masksEqual(decodeMask(resp.erased), preview)) {
        // the invariant the preview relies on; a mismatch means the client
        // rasterizer no longer matches the server rule
        console.warn("eraser raster divergence between client preview and server response");
        this.setStatus("saved, but the server erased a different region than previewed");
      } else {
        this.setStatus(`saved annotation for ${this.currentFrame}`);
      }
      this.annState.snapshotSaved(resp);
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        if (this.confirmFn("The superpixel map changed on the server. Re-segment this frame now? " +
            "(your selection will be cleared)")) {
          await this.resegmentAfterConflict();
        }
      } else {
        this.alertFn(err instanceof Error ? err.message : String(err));
      }
    }
    this.render();
    this.updateDirty();
  }

  private async resegmentAfterConflict(): Promise<void> {
    if (!this.currentFrame) return;
    // adopt whatever map the server has now rather than recomputing one
    this.sp = await this.api.getSuperpixels(this.currentFrame);
    this.annState = new AnnotationState(this.sp);
    this.setStatus("reloaded the server's segmentation; annotation cleared");
  }

  updateDirty(): void {
    const dirty = this.annState?.dirty() ?? false;
    this.dirtyEl.textContent = dirty ? "unsaved changes" : "saved";
    this.dirtyEl.classList.toggle("dirty", dirty);
    this.dirtyEl.classList.toggle("clean", !dirty);
  }

  setStatus(msg: string): void {
    this.statusEl.textContent = msg;
  }

  // ---- canvas rendering --------------------------------------------------

  render(): void {
    const ctx = context2d(this.canvas);
    if (!ctx || !this.sp || !this.annState) return;
    const { width, height } = this.sp;
    ctx.clearRect(0, 0, width, height);
    if (this.frameImage) ctx.drawImage(this.frameImage, 0, 0);

    const overlay = document.createElement("canvas");
    overlay.width = width;
    overlay.height = height;
    const octx = context2d(overlay);
    if (!octx) return;
    const img = octx.createImageData(width, height);
    const bounds = boundaryMask(this.annState.labels, width, height);
    const erased = this.annState.erasedRaster();
    const composed = this.annState.composed();
    for (let i = 0; i < width * height; i++) {
      const o = i * 4;
      if (composed[i]) {
        img.data[o] = 255; img.data[o + 1] = 220; img.data[o + 2] = 0; img.data[o + 3] = 90;
      }
      if (erased[i]) {
        img.data[o] = 220; img.data[o + 1] = 40; img.data[o + 2] = 40; img.data[o + 3] = 70;
      }
      if (bounds[i]) {
        img.data[o] = 0; img.data[o + 1] = 180; img.data[o + 2] = 255; img.data[o + 3] = 160;
      }
    }
    octx.putImageData(img, 0, 0);
    ctx.drawImage(overlay, 0, 0);
  }

  // ---- learn panel -----------------------------------------------------

  private labeledInput(parent: HTMLElement, store: Record<string, HTMLInputElement>,
                       key: string, label: string, value: string, idPrefix: string): void {
    const row = el("div", { class: "form-row" });
    row.appendChild(el("label", {}, label));
    const input = el("input", { id: `${idPrefix}-${key}`, value });
    store[key] = input;
    row.appendChild(input);
    parent.appendChild(row);
  }

  private buildLearnPanel(): HTMLElement {
    const panel = el("details", { class: "panel", id: "learn-panel" });
    panel.appendChild(el("summary", {}, "Learn"));

    const pairBox = el("div", { class: "pairs" });
    pairBox.appendChild(el("label", {}, "pairs (init, target, steps)"));
    this.pairInit = el("select", { id: "pair-init" });
    this.pairTarget = el("select", { id: "pair-target" });
    this.pairK = el("input", { id: "pair-k", type: "number", value: "1" });
    const add = el("button", { id: "pair-add" }, "add pair");
    add.addEventListener("click", () => {
      this.learnPairs.push({
        init_frame: this.pairInit.value,
        target_frame: this.pairTarget.value,
        k: Number(this.pairK.value),
      });
      this.renderPairList();
    });
    for (const node of [this.pairInit, this.pairTarget, this.pairK, add]) pairBox.appendChild(node);
    this.pairListEl = el("ul", { id: "pair-list" });
    pairBox.appendChild(this.pairListEl);
    panel.appendChild(pairBox);

    const boundsBox = el("div", { class: "bounds" });
    boundsBox.appendChild(el("label", {}, "parameter bounds (blank = unbounded)"));
    for (const name of PARAM_NAMES) {
      const row = el("div", { class: "form-row" });
      row.appendChild(el("label", {}, name));
      const lo = el("input", { id: `bound-${name}-lo`, placeholder: "min" });
      const hi = el("input", { id: `bound-${name}-hi`, placeholder: "max" });
      this.boundsInputs[name] = { lo, hi };
      row.appendChild(lo);
      row.appendChild(hi);
      boundsBox.appendChild(row);
    }
    panel.appendChild(boundsBox);

    this.labeledInput(panel, this.learnInputs, "dt", "dt", "0.01", "learn");
    this.labeledInput(panel, this.learnInputs, "lambda1", "lambda1", "1000", "learn");
    this.labeledInput(panel, this.learnInputs, "lambda2", "lambda2", "1000", "learn");
    this.labeledInput(panel, this.learnInputs, "lr", "learning rate", "0.05", "learn");
    this.labeledInput(panel, this.learnInputs, "iters", "iterations", "100", "learn");
    this.labeledInput(panel, this.learnInputs, "grad", "gradient mode", "adjoint", "learn");
    this.labeledInput(panel, this.learnInputs, "seed", "seed", "0", "learn");

    const run = el("button", { id: "learn-run" }, "start learning");
    run.addEventListener("click", () => void this.submitLearn());
    panel.appendChild(run);

    this.learnProgressEl = el("progress", { id: "learn-progress", max: "1", value: "0" });
    panel.appendChild(this.learnProgressEl);
    this.learnStatusEl = el("span", { id: "learn-status" });
    panel.appendChild(this.learnStatusEl);

    this.lossCanvas = el("canvas", { id: "loss-plot", width: "360", height: "200" });
    panel.appendChild(this.lossCanvas);
    this.thetaTableEl = el("div", { id: "theta-table" });
    panel.appendChild(this.thetaTableEl);
    return panel;
  }

  refreshPairSelectors(): void {
    for (const sel of [this.pairInit, this.pairTarget]) {
      sel.textContent = "";
      for (const f of this.frames) {
        sel.appendChild(el("option", { value: f.frame_id }, f.frame_id));
      }
    }
  }

  private renderPairList(): void {
    this.pairListEl.textContent = "";
    this.learnPairs.forEach((p, idx) => {
      const li = el("li", {}, `${p.init_frame} -> ${p.target_frame} (k=${p.k}) `);
      const rm = el("button", { class: "pair-rm" }, "x");
      rm.addEventListener("click", () => {
        this.learnPairs.splice(idx, 1);
        this.renderPairList();
      });
      li.appendChild(rm);
      this.pairListEl.appendChild(li);
    });
  }

  async submitLearn(): Promise<void> {
    let jobId: string;
    try {
      const grad = this.learnInputs.grad.value === "central_fd" ? "central_fd" : "adjoint";
      const req = buildLearnRequest({
        pairs: this.learnPairs,
        bounds: Object.fromEntries(Object.entries(this.boundsInputs).map(
          ([name, pair]) => [name, { lo: pair.lo.value, hi: pair.hi.value }])),
        lambda1: this.learnInputs.lambda1.value,
        lambda2: this.learnInputs.lambda2.value,
        learningRate: this.learnInputs.lr.value,
        iterations: this.learnInputs.iters.value,
        dt: this.learnInputs.dt.value,
        gradientMode: grad,
        seed: this.learnInputs.seed.value,
      });
      jobId = await this.api.postLearn(req);
    } catch (err) {
      this.alertFn(err instanceof Error ? err.message : String(err));
      return;
    }
    this.learnStatusEl.textContent = `job ${jobId} submitted`;
    this.watchLearnJob(jobId);
  }

  watchLearnJob(jobId: string): void {
    this.activePoller?.stop();
    this.activePoller = new JobPoller(this.api, jobId, {
      intervalMs: this.pollIntervalMs,
      ...this.timerOpts,
      onUpdate: (job) => {
        this.learnProgressEl.value = job.progress;
        this.learnStatusEl.textContent = `${job.status} ${(job.progress * 100).toFixed(0)}%`;
        if (job.loss_history && job.loss_history.length > 0) {
          this.lastLossHistory = job.loss_history;
          const ctx = context2d(this.lossCanvas);
          if (ctx) drawLossPlot(ctx, job.loss_history, this.lossCanvas.width, this.lossCanvas.height);
        }
      },
      onDone: (job) => {
        this.lastLearnJob = job;
        this.learnStatusEl.textContent = `done: ${job.result_ref}`;
        this.renderTheta(job.theta ?? null);
      },
      onFailed: (job) => {
        this.learnStatusEl.textContent = `failed: ${job.error}`;
      },
      onError: (err) => {
        this.learnStatusEl.textContent = `poll error: ${err instanceof Error ? err.message : err}`;
      },
    });
    this.activePoller.start();
  }

  private renderTheta(theta: Record<string, number> | null): void {
    this.thetaTableEl.textContent = "";
    if (!theta) return;
    const table = el("table", { class: "theta" });
    for (const name of PARAM_NAMES) {
      const tr = el("tr");
      tr.appendChild(el("td", {}, name));
      tr.appendChild(el("td", {}, String(theta[name])));
      table.appendChild(tr);
    }
    this.thetaTableEl.appendChild(table);
  }

  // ---- simulate panel ----------------------------------------------------

  private buildSimulatePanel(): HTMLElement {
    const panel = el("details", { class: "panel", id: "simulate-panel" });
    panel.appendChild(el("summary", {}, "Simulate"));

    const prefill = el("button", { id: "sim-prefill" }, "prefill from last learn job");
    prefill.addEventListener("click", () => this.prefillSimulate());
    panel.appendChild(prefill);

    for (const name of PARAM_NAMES) {
      this.labeledInput(panel, this.simThetaInputs, name, name, "", "sim-theta");
    }
    this.labeledInput(panel, this.simInputs, "dt", "dt", "0.01", "sim");
    this.labeledInput(panel, this.simInputs, "steps", "steps", "100", "sim");
    this.labeledInput(panel, this.simInputs, "every", "snapshot every", "10", "sim");

    const run = el("button", { id: "sim-run" }, "simulate from current frame");
    run.addEventListener("click", () => void this.submitSimulate());
    panel.appendChild(run);

    this.simProgressEl = el("progress", { id: "sim-progress", max: "1", value: "0" });
    panel.appendChild(this.simProgressEl);
    this.simStatusEl = el("span", { id: "sim-status" });
    panel.appendChild(this.simStatusEl);

    this.simScrub = el("input", { id: "sim-scrub", type: "range", min: "0", max: "0", value: "0" });
    this.simScrub.addEventListener("input", () => this.showSimFrame(Number(this.simScrub.value)));
    panel.appendChild(this.simScrub);
    this.simFrameImg = el("img", { id: "sim-frame", alt: "simulation frame" });
    panel.appendChild(this.simFrameImg);
    return panel;
  }

  prefillSimulate(): void {
    const theta = this.lastLearnJob?.theta;
    if (!theta) {
      this.alertFn("no finished learn job to prefill from");
      return;
    }
    for (const name of PARAM_NAMES) {
      if (name in theta) this.simThetaInputs[name].value = String(theta[name]);
    }
  }

  async submitSimulate(): Promise<void> {
    let jobId: string;
    let req;
    try {
      req = buildSimulateRequest({
        theta: Object.fromEntries(PARAM_NAMES.map((n) => [n, this.simThetaInputs[n].value])),
        frameId: this.currentFrame ?? "",
        dt: this.simInputs.dt.value,
        nSteps: this.simInputs.steps.value,
        snapshotEvery: this.simInputs.every.value,
      });
      jobId = await this.api.postSimulate(req);
    } catch (err) {
      this.alertFn(err instanceof Error ? err.message : String(err));
      return;
    }
    this.simJobId = jobId;
    this.simFrames = snapshotCount(req.n_steps, req.snapshot_every);
    this.simStatusEl.textContent = `job ${jobId} submitted`;
    this.activePoller?.stop();
    this.activePoller = new JobPoller(this.api, jobId, {
      intervalMs: this.pollIntervalMs,
      ...this.timerOpts,
      onUpdate: (job) => {
        this.simProgressEl.value = job.progress;
        this.simStatusEl.textContent = `${job.status} ${(job.progress * 100).toFixed(0)}%`;
      },
      onDone: () => {
        this.simStatusEl.textContent = `done: ${this.simFrames} frames`;
        this.simScrub.max = String(this.simFrames - 1);
        this.showSimFrame(0);
      },
      onFailed: (job) => {
        this.simStatusEl.textContent = `failed: ${job.error}`;
      },
    });
    this.activePoller.start();
  }

  showSimFrame(k: number): void {
    if (!this.simJobId) return;
    this.simFrameImg.src = this.api.resultFrameUrl(this.simJobId, k);
    this.simStatusEl.textContent = `frame ${k} / ${this.simFrames - 1}`;
  }

  // ---- predict panel -----------------------------------------------------

  private buildPredictPanel(): HTMLElement {
    const panel = el("details", { class: "panel", id: "predict-panel" });
    panel.appendChild(el("summary", {}, "Predict"));

    const prefill = el("button", { id: "pred-prefill" }, "use last learned parameters");
    prefill.addEventListener("click", () => {
      const theta = this.lastLearnJob?.theta;
      if (!theta) {
        this.alertFn("no finished learn job to prefill from");
        return;
      }
      for (const name of PARAM_NAMES) {
        if (name in theta) this.predThetaInputs[name].value = String(theta[name]);
      }
    });
    panel.appendChild(prefill);

    for (const name of PARAM_NAMES) {
      this.labeledInput(panel, this.predThetaInputs, name, name, "", "pred-theta");
    }
    this.labeledInput(panel, this.predInputs, "dt", "dt", "0.01", "pred");
    this.labeledInput(panel, this.predInputs, "steps", "steps (csv)", "10,20,30", "pred");
    this.labeledInput(panel, this.predInputs, "threshold", "threshold", "0.5", "pred");

    const run = el("button", { id: "pred-run" }, "predict from current frame");
    run.addEventListener("click", () => void this.submitPredict());
    panel.appendChild(run);

    this.predStatusEl = el("span", { id: "pred-status" });
    panel.appendChild(this.predStatusEl);
    this.predStripEl = el("div", { id: "pred-strip" });
    panel.appendChild(this.predStripEl);
    return panel;
  }

  async submitPredict(): Promise<void> {
    let jobId: string;
    let steps: number[];
    try {
      const req = buildPredictRequest({
        theta: Object.fromEntries(PARAM_NAMES.map((n) => [n, this.predThetaInputs[n].value])),
        frameId: this.currentFrame ?? "",
        dt: this.predInputs.dt.value,
        steps: this.predInputs.steps.value,
        threshold: this.predInputs.threshold.value,
      });
      steps = req.step_list;
      jobId = await this.api.postPredict(req);
    } catch (err) {
      this.alertFn(err instanceof Error ? err.message : String(err));
      return;
    }
    this.predStatusEl.textContent = `job ${jobId} submitted`;
    this.activePoller?.stop();
    this.activePoller = new JobPoller(this.api, jobId, {
      intervalMs: this.pollIntervalMs,
      ...this.timerOpts,
      onUpdate: (job) => {
        this.predStatusEl.textContent = `${job.status} ${(job.progress * 100).toFixed(0)}%`;
      },
      onDone: () => {
        this.predStatusEl.textContent = "done";
        this.predStripEl.textContent = "";
        steps.forEach((step, k) => {
          const fig = el("figure", { class: "pred-frame" });
          const img = el("img", { src: this.api.resultFrameUrl(jobId, k), alt: `step ${step}` });
          fig.appendChild(img);
          fig.appendChild(el("figcaption", {}, `step ${step}`));
          this.predStripEl.appendChild(fig);
        });
      },
      onFailed: (job) => {
        this.predStatusEl.textContent = `failed: ${job.error}`;
      },
    });
    this.activePoller.start();
  }
}
