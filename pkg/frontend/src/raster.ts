/**
 * Pixel-level mask algebra mirroring the server, bit for bit.
 *
 * The server stores masks as canonical run-length triples [row, start,
 * length] (sorted, disjoint, maximal) and rasterizes eraser strokes by the
 * rule "a pixel is covered iff its center lies within radius of the
 * polyline". Both are reproduced here in plain IEEE doubles so a client
 * preview and a server-composed mask agree pixel for pixel; the parity
 * fixtures under tests/fixtures pin that equivalence.
 */

export type Run = [number, number, number];

export interface RLEMask {
  width: number;
  height: number;
  runs: Run[];
}

export interface SuperpixelData {
  width: number;
  height: number;
  n_labels: number;
  runs: Array<[number, number, number, number]>;
  hash?: string;
}

export interface Stroke {
  points: Array<[number, number]>;
  radius: number;
}

/** Decode run-length triples into a flat 0/1 buffer, row major. */
export function decodeMask(m: RLEMask): Uint8Array {
  const buf = new Uint8Array(m.width * m.height);
  for (const [row, start, length] of m.runs) {
    buf.fill(1, row * m.width + start, row * m.width + start + length);
  }
  return buf;
}

/** Canonical run-length encoding: per-row maximal runs of set pixels. */
export function encodeMask(buf: Uint8Array, width: number, height: number): RLEMask {
  const runs: Run[] = [];
  for (let row = 0; row < height; row++) {
    const base = row * width;
    let col = 0;
    while (col < width) {
      if (buf[base + col]) {
        const start = col;
        while (col < width && buf[base + col]) col++;
        runs.push([row, start, col - start]);
      } else {
        col++;
      }
    }
  }
  return { width, height, runs };
}

/** Decode a superpixel map's labeled runs into a flat label buffer. */
export function decodeLabels(sp: SuperpixelData): Int32Array {
  const labels = new Int32Array(sp.width * sp.height).fill(-1);
  for (const [row, start, length, label] of sp.runs) {
    labels.fill(label, row * sp.width + start, row * sp.width + start + length);
  }
  return labels;
}

/**
 * Stamp capsule-shaped brush strokes into a flat 0/1 buffer.
 *
 * Must stay arithmetic-identical to the server: per segment, every pixel
 * center in the radius-padded bounding box is tested against the squared
 * distance to the segment (endpoint projection clamped to [0, 1]).
 */
export function rasterizeStrokes(strokes: Stroke[], width: number, height: number): Uint8Array {
  const covered = new Uint8Array(width * height);
  for (const stroke of strokes) {
    const pts = stroke.points;
    const radius = stroke.radius;
    if (!(radius > 0) || pts.length === 0) {
      throw new Error("stroke needs points and a positive radius");
    }
    const r2 = radius * radius;
    const nSegs = pts.length > 1 ? pts.length - 1 : 1;
    for (let s = 0; s < nSegs; s++) {
      const [ax, ay] = pts[s];
      const [bx, by] = pts.length > 1 ? pts[s + 1] : pts[s];
      const x0 = Math.max(0, Math.floor(Math.min(ax, bx) - radius));
      const x1 = Math.min(width - 1, Math.ceil(Math.max(ax, bx) + radius));
      const y0 = Math.max(0, Math.floor(Math.min(ay, by) - radius));
      const y1 = Math.min(height - 1, Math.ceil(Math.max(ay, by) + radius));
      if (x1 < x0 || y1 < y0) continue;
      const vx = bx - ax;
      const vy = by - ay;
      const segLen2 = vx * vx + vy * vy;
      for (let py = y0; py <= y1; py++) {
        for (let px = x0; px <= x1; px++) {
          let qx: number, qy: number;
          if (segLen2 === 0) {
            qx = ax;
            qy = ay;
          } else {
            let t = ((px - ax) * vx + (py - ay) * vy) / segLen2;
            if (t < 0) t = 0;
            else if (t > 1) t = 1;
            qx = ax + t * vx;
            qy = ay + t * vy;
          }
          const dx = px - qx;
          const dy = py - qy;
          if (dx * dx + dy * dy <= r2) covered[py * width + px] = 1;
        }
      }
    }
  }
  return covered;
}

/** Union of the selected superpixels minus the erased pixels. */
export function composeMask(
  labels: Int32Array,
  selected: ReadonlySet<number>,
  erased: Uint8Array,
): Uint8Array {
  const out = new Uint8Array(labels.length);
  for (let i = 0; i < labels.length; i++) {
    if (selected.has(labels[i]) && !erased[i]) out[i] = 1;
  }
  return out;
}

/** Pixels whose right or bottom neighbor carries a different label. */
export function boundaryMask(labels: Int32Array, width: number, height: number): Uint8Array {
  const edge = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = y * width + x;
      if (x + 1 < width && labels[i] !== labels[i + 1]) edge[i] = 1;
      if (y + 1 < height && labels[i] !== labels[i + width]) edge[i] = 1;
    }
  }
  return edge;
}

/** Intersection over union; two empty masks count as full agreement. */
export function iou(a: Uint8Array, b: Uint8Array): number {
  if (a.length !== b.length) throw new Error("mask sizes differ");
  let inter = 0;
  let union = 0;
  for (let i = 0; i < a.length; i++) {
    if (a[i] && b[i]) inter++;
    if (a[i] || b[i]) union++;
  }
  return union === 0 ? 1.0 : inter / union;
}

export function masksEqual(a: Uint8Array, b: Uint8Array): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) return false;
  }
  return true;
}
