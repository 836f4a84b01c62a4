/**
 * Local annotation editing state for one frame.
 *
 * Holds the selected-label set and the eraser input, tracks the last-saved
 * server annotation, and answers "is there anything unsaved" by comparing
 * rasters rather than edit history, so a toggle round-trip or a stroke that
 * erases nothing new reads as clean.
 */

import type { AnnotationData } from "./api.js";
import type { RLEMask, Stroke, SuperpixelData } from "./raster.js";
import {
  composeMask,
  decodeLabels,
  decodeMask,
  encodeMask,
  masksEqual,
  rasterizeStrokes,
} from "./raster.js";

export class AnnotationState {
  readonly sp: SuperpixelData;
  readonly labels: Int32Array;
  selected: Set<number>;
  strokes: Stroke[];
  private baseErased: Uint8Array;
  private savedSelected: Set<number>;
  private savedErased: Uint8Array;
  private activeStroke: Stroke | null = null;

  constructor(sp: SuperpixelData, saved?: AnnotationData) {
    this.sp = sp;
    this.labels = decodeLabels(sp);
    const n = sp.width * sp.height;
    this.selected = new Set(saved ? saved.selected : []);
    this.strokes = [];
    this.baseErased = saved ? decodeMask(saved.erased) : new Uint8Array(n);
    this.savedSelected = new Set(this.selected);
    this.savedErased = this.baseErased.slice();
  }

  labelAt(x: number, y: number): number | null {
    const col = Math.floor(x);
    const row = Math.floor(y);
    if (col < 0 || col >= this.sp.width || row < 0 || row >= this.sp.height) return null;
    return this.labels[row * this.sp.width + col];
  }

  toggleAt(x: number, y: number): number | null {
    const label = this.labelAt(x, y);
    if (label === null) return null;
    this.toggleLabel(label);
    return label;
  }

  toggleLabel(label: number): void {
    if (this.selected.has(label)) this.selected.delete(label);
    else this.selected.add(label);
  }

  beginStroke(x: number, y: number, radius: number): void {
    this.activeStroke = { points: [[x, y]], radius };
    this.strokes.push(this.activeStroke);
  }

  extendStroke(x: number, y: number): void {
    if (this.activeStroke) this.activeStroke.points.push([x, y]);
  }

  endStroke(): void {
    this.activeStroke = null;
  }

  /** Erased pixels: the last-saved raster unioned with unsaved strokes. */
  erasedRaster(): Uint8Array {
    if (this.strokes.length === 0) return this.baseErased.slice();
    const out = rasterizeStrokes(this.strokes, this.sp.width, this.sp.height);
    for (let i = 0; i < out.length; i++) {
      if (this.baseErased[i]) out[i] = 1;
    }
    return out;
  }

  /** The mask this annotation currently denotes (selection minus eraser). */
  composed(): Uint8Array {
    return composeMask(this.labels, this.selected, this.erasedRaster());
  }

  /** True iff the local annotation differs from the last-saved one. */
  dirty(): boolean {
    if (this.selected.size !== this.savedSelected.size) return true;
    for (const v of this.selected) {
      if (!this.savedSelected.has(v)) return true;
    }
    return !masksEqual(this.erasedRaster(), this.savedErased);
  }

  /**
   * Body for PUT. Fresh strokes on a clean eraser base go up as strokes so
   * the server rasterizes them itself; anything else sends the merged runs.
   */
  putBody(author = ""): { selected: number[]; erased?: RLEMask; strokes?: Stroke[]; author: string } {
    const selected = Array.from(this.selected).sort((a, b) => a - b);
    const baseEmpty = this.baseErased.every((v) => v === 0);
    if (this.strokes.length > 0 && baseEmpty) {
      return { selected, strokes: this.strokes.map((s) => ({ points: s.points.slice(), radius: s.radius })), author };
    }
    const raster = this.erasedRaster();
    if (raster.every((v) => v === 0)) return { selected, author };
    return { selected, erased: encodeMask(raster, this.sp.width, this.sp.height), author };
  }

  /** Adopt a server response (PUT echo or GET) as the new saved baseline. */
  snapshotSaved(ann: AnnotationData): void {
    this.selected = new Set(ann.selected);
    this.baseErased = decodeMask(ann.erased);
    this.strokes = [];
    this.activeStroke = null;
    this.savedSelected = new Set(this.selected);
    this.savedErased = this.baseErased.slice();
  }
}
