/**
 * Scripted end-to-end UI flows against a faked server and DOM.
 *
 * The annotation round trip is the secondary acceptance flow: toggle three
 * superpixels, draw one eraser stroke, save, reload, and require the
 * composed mask the server hands back to equal the client preview raster
 * pixel for pixel (the server side of the exchange is pinned by fixtures
 * generated from the real Python implementation). The learn-panel flow
 * checks that a job launch renders a monotone progress bar and the
 * four-series loss plot from polled job state.
 */

import { describe, expect, it } from "vitest";
import { vi } from "vitest";
import type { AnnotationData, Job } from "../src/api.js";
import { App } from "../src/app.js";
import { layoutLossPlot } from "../src/lossplot.js";
import { decodeMask, encodeMask, masksEqual, type SuperpixelData } from "../src/raster.js";
import { calls, installFakeCanvas } from "./helpers/fakecanvas.js";
import { FakeServer } from "./helpers/mockserver.js";
import historyFixture from "./fixtures/history.json";
import scenario from "./fixtures/scenario.json";

const sp = scenario.superpixels as SuperpixelData;

function buildScenarioServer() {
  const server = new FakeServer();
  const state = { stored: null as AnnotationData | null, badPut: null as string | null };
  server.route("GET", "/api/frames", () => server.json([scenario.frame]));
  server.route("GET", "/api/frames/fx/superpixels", () => server.json(sp));
  server.route("GET", "/api/frames/fx/annotation", () =>
    state.stored ? server.json(state.stored) : server.json({ error: "no annotation" }, 404));
  server.route("PUT", "/api/frames/fx/annotation", (raw) => {
    const body = raw as { superpixel_ref: string; selected: number[]; strokes?: unknown };
    if (body.superpixel_ref !== sp.hash) {
      return server.json({ error: "superpixel_ref does not match the current map" }, 409);
    }
    // the canned response below was computed by the real server code for
    // exactly the scripted input; anything else must fail loudly
    const expected = {
      selected: scenario.annotation_response.selected,
      strokes: [scenario.stroke_server],
    };
    const got = { selected: [...body.selected].sort((a, b) => a - b), strokes: body.strokes };
    if (JSON.stringify(got) !== JSON.stringify(expected)) {
      state.badPut = JSON.stringify({ got, expected });
      return server.json({ error: "unscripted annotation body" }, 500);
    }
    state.stored = scenario.annotation_response as AnnotationData;
    return server.json(state.stored);
  });
  return { server, state };
}

function makeApp(server: FakeServer, opts: { confirmResult?: boolean } = {}) {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const timers: Array<() => void> = [];
  const confirms: string[] = [];
  const alerts: string[] = [];
  const app = new App(root, "http://api.test", {
    fetchFn: server.fetchFn,
    confirmFn: (m) => {
      confirms.push(m);
      return opts.confirmResult ?? true;
    },
    alertFn: (m) => {
      alerts.push(m);
    },
    loadImage: async () => null,
    setTimeoutFn: (fn) => {
      timers.push(fn);
      return timers.length;
    },
    clearTimeoutFn: () => undefined,
  });
  return { app, root, timers, confirms, alerts };
}

function mouse(target: Element, type: string, x: number, y: number): void {
  target.dispatchEvent(new MouseEvent(type, { clientX: x, clientY: y, bubbles: true }));
}

function dirtyText(root: HTMLElement): string {
  return root.querySelector("#dirty-indicator")!.textContent ?? "";
}

describe("annotation round trip", () => {
  it("save-then-reload reproduces the client preview pixel for pixel", async () => {
    installFakeCanvas();
    const { server, state } = buildScenarioServer();
    const { app, root, alerts } = makeApp(server);
    await app.init();
    expect(root.querySelectorAll(".frame-btn").length).toBe(1);

    await app.loadFrame("fx");
    expect(app.annState).not.toBeNull();
    expect(dirtyText(root)).toBe("saved");

    // toggle three superpixels by clicking inside each
    for (const t of scenario.toggles) {
      mouse(app.canvas, "click", t.canvas_xy[0], t.canvas_xy[1]);
    }
    expect(Array.from(app.annState!.selected).sort((a, b) => a - b))
      .toEqual(scenario.toggles.map((t) => t.label).sort((a, b) => a - b));
    expect(dirtyText(root)).toBe("unsaved changes");

    // one eraser stroke with the default 3 px brush
    (root.querySelector("#mode-erase") as HTMLButtonElement).click();
    expect(app.mode).toBe("erase");
    expect(app.brushRadius).toBe(3);
    const [p0, p1] = scenario.stroke_canvas.points;
    mouse(app.canvas, "mousedown", p0[0], p0[1]);
    mouse(app.canvas, "mousemove", p1[0], p1[1]);
    mouse(app.canvas, "mouseup", p1[0], p1[1]);
    expect(app.annState!.strokes).toEqual([scenario.stroke_server]);

    const preview = app.annState!.composed();
    // the preview erased raster equals the server's rasterization, pinned
    // by the fixture, before anything is sent
    expect(encodeMask(app.annState!.erasedRaster(), sp.width, sp.height).runs)
      .toEqual(scenario.erased_runs);

    await app.save();
    expect(state.badPut).toBeNull();
    expect(alerts).toEqual([]);
    expect(state.stored).not.toBeNull();
    expect(dirtyText(root)).toBe("saved");

    // reload the frame: the app now consumes the stored annotation
    await app.loadFrame("fx");
    expect(dirtyText(root)).toBe("saved");
    const downloaded = app.annState!.composed();
    expect(masksEqual(downloaded, preview)).toBe(true);
    expect(encodeMask(downloaded, sp.width, sp.height).runs).toEqual(scenario.composed_runs);
    // and it equals the mask the server itself composed from the stored data
    expect(masksEqual(downloaded,
      decodeMask({ width: sp.width, height: sp.height, runs: scenario.composed_runs as never }),
    )).toBe(true);
  });

  it("a toggle round trip returns the indicator to saved", async () => {
    installFakeCanvas();
    const { server } = buildScenarioServer();
    const { app, root } = makeApp(server);
    await app.init();
    await app.loadFrame("fx");
    const t = scenario.toggles[0];
    mouse(app.canvas, "click", t.canvas_xy[0], t.canvas_xy[1]);
    expect(dirtyText(root)).toBe("unsaved changes");
    mouse(app.canvas, "click", t.canvas_xy[0], t.canvas_xy[1]);
    expect(dirtyText(root)).toBe("saved");
    expect(app.annState!.selected.size).toBe(0);
  });

  it("asks before discarding unsaved changes on navigation and honors no", async () => {
    installFakeCanvas();
    const { server } = buildScenarioServer();
    const { app, confirms } = makeApp(server, { confirmResult: false });
    await app.init();
    await app.loadFrame("fx");
    app.annState!.toggleLabel(1);
    app.updateDirty();
    await app.loadFrame("fx");
    expect(confirms.length).toBe(1);
    expect(confirms[0]).toMatch(/[Dd]iscard/);
    // navigation was refused: the local edit survives
    expect(app.annState!.selected.has(1)).toBe(true);
  });

  it("prompts to re-segment on a 409 stale conflict", async () => {
    installFakeCanvas();
    const { server } = buildScenarioServer();
    const { app, confirms } = makeApp(server);
    await app.init();
    await app.loadFrame("fx");
    app.annState!.toggleLabel(0);
    // forge a stale reference, as if the map changed under the client
    app.sp = { ...sp, hash: "0".repeat(64) };
    await app.save();
    expect(confirms.length).toBe(1);
    expect(confirms[0]).toMatch(/[Rr]e-segment/);
    // accepted: the app adopted the server's current map and cleared local edits
    expect(app.sp?.hash).toBe(sp.hash);
    expect(app.annState!.selected.size).toBe(0);
  });
});

describe("learn panel", () => {
  function jobSeq(): Job[] {
    const rows = historyFixture.rows as Job["loss_history"];
    const base = { id: "j1", kind: "learn", result_ref: null, error: null };
    return [
      { ...base, status: "running", progress: 1 / 3, loss_history: rows!.slice(0, 2) } as Job,
      { ...base, status: "running", progress: 2 / 3, loss_history: rows!.slice(0, 4) } as Job,
      {
        ...base, status: "done", progress: 1.0, result_ref: "jobs/j1",
        loss_history: rows, theta: historyFixture.theta,
      } as Job,
    ];
  }

  it("launches a job and renders progress and the four loss series", async () => {
    const logs = installFakeCanvas();
    const { server } = buildScenarioServer();
    const seq = jobSeq();
    let polls = 0;
    let learnBody: Record<string, unknown> | null = null;
    server.route("POST", "/api/jobs/learn", (body) => {
      learnBody = body as Record<string, unknown>;
      return server.json({ job_id: "j1" });
    });
    server.route("GET", "/api/jobs/j1", () =>
      server.json(seq[Math.min(polls++, seq.length - 1)]));

    const { app, root, timers, alerts } = makeApp(server);
    await app.init();

    // build one training pair through the panel controls
    (root.querySelector("#pair-init") as HTMLSelectElement).value = "fx";
    (root.querySelector("#pair-target") as HTMLSelectElement).value = "fx";
    (root.querySelector("#pair-k") as HTMLInputElement).value = "2";
    (root.querySelector("#pair-add") as HTMLButtonElement).click();
    expect(app.learnPairs).toEqual([{ init_frame: "fx", target_frame: "fx", k: 2 }]);

    app.learnInputs.dt.value = "0.01";
    app.learnInputs.iters.value = "6";
    app.boundsInputs.M_v.lo.value = "0.5";
    app.boundsInputs.M_v.hi.value = "1.5";

    (root.querySelector("#learn-run") as HTMLButtonElement).click();
    await vi.waitFor(() => expect(app.learnProgressEl.value).toBeCloseTo(1 / 3));
    expect(alerts).toEqual([]);
    expect(learnBody).toMatchObject({
      pairs: [{ init_frame: "fx", target_frame: "fx", k: 2 }],
      dt: 0.01,
      iterations: 6,
      bounds: { M_v: [0.5, 1.5] },
      gradient_mode: "adjoint",
    });

    const progressSeen = [app.learnProgressEl.value];
    expect(timers.length).toBe(1);
    timers.shift()!();
    await vi.waitFor(() => expect(app.learnProgressEl.value).toBeCloseTo(2 / 3));
    progressSeen.push(app.learnProgressEl.value);
    timers.shift()!();
    await vi.waitFor(() => expect(app.lastLearnJob).not.toBeNull());
    progressSeen.push(app.learnProgressEl.value);

    // monotone progress across polls
    for (let i = 1; i < progressSeen.length; i++) {
      expect(progressSeen[i]).toBeGreaterThanOrEqual(progressSeen[i - 1]);
    }
    expect(progressSeen[2]).toBe(1);

    // the plot was drawn onto the loss canvas: one stroked polyline per
    // series per poll that carried history
    const plotLog = logs.get(app.lossCanvas);
    expect(calls(plotLog, "stroke").length).toBeGreaterThanOrEqual(4);
    expect(app.lastLossHistory.length).toBe(historyFixture.rows.length);

    // the plotted total series is monotone non-increasing in value
    const layout = layoutLossPlot(app.lastLossHistory, 360, 200);
    const ys = layout.series.total.map(([, y]) => y);
    for (let i = 1; i < ys.length; i++) expect(ys[i]).toBeGreaterThanOrEqual(ys[i - 1] - 1e-9);

    // finished job: parameter table rendered, simulate panel can prefill
    expect(root.querySelectorAll("#theta-table tr").length).toBe(14);
    (root.querySelector("#sim-prefill") as HTMLButtonElement).click();
    expect(app.simThetaInputs.M_v.value)
      .toBe(String((historyFixture.theta as Record<string, number>).M_v));
  });

  it("reports failed jobs in the panel status", async () => {
    installFakeCanvas();
    const { server } = buildScenarioServer();
    server.route("POST", "/api/jobs/learn", () => server.json({ job_id: "j1" }));
    server.route("GET", "/api/jobs/j1", () => server.json({
      id: "j1", kind: "learn", status: "failed", progress: 0.1,
      result_ref: null, error: "DivergedError: boom",
    }));
    const { app, root } = makeApp(server);
    await app.init();
    (root.querySelector("#pair-init") as HTMLSelectElement).value = "fx";
    (root.querySelector("#pair-target") as HTMLSelectElement).value = "fx";
    (root.querySelector("#pair-add") as HTMLButtonElement).click();
    app.learnInputs.dt.value = "0.01";
    (root.querySelector("#learn-run") as HTMLButtonElement).click();
    await vi.waitFor(() =>
      expect(app.learnStatusEl.textContent).toContain("DivergedError"));
  });
});
