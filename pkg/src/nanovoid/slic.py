"""SLIC superpixel segmentation for grayscale frames.

Localized k-means over (intensity, position) features: centers start on a
regular grid at spacing S = sqrt(N/K), are nudged to the lowest-gradient
spot in their 3x3 neighborhood, then pixels within a 2Sx2S window of each
center compete under the distance

    D = sqrt(d_g^2 + (d_xy / S)^2 m^2)

with intensity scaled to [0, 100]. A final pass dissolves components
smaller than (N/K)/4 into their left/top neighbor, so every output label
is 4-connected. Everything is deterministic: fixed scan orders, strict
inequalities on ties.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from skimage.measure import label as _cc_label

from .errors import InvalidKError, SchemaError
from .grid import Mask


@dataclass(frozen=True, eq=False)
class SuperpixelMap:
    """Label image partitioning a frame into connected superpixels."""

    width: int
    height: int
    labels: np.ndarray
    n_labels: int

    def __post_init__(self):
        lab = np.ascontiguousarray(np.asarray(self.labels, dtype=np.int64))
        object.__setattr__(self, "labels", lab)
        if lab.shape != (self.height, self.width):
            raise ValueError(f"labels shape {lab.shape} does not match "
                             f"{self.height}x{self.width}")
        if self.n_labels < 1:
            raise ValueError("n_labels must be >= 1")
        if lab.size == 0 or lab.min() < 0 or lab.max() >= self.n_labels:
            raise ValueError("labels must lie in [0, n_labels)")
        counts = np.bincount(lab.ravel(), minlength=self.n_labels)
        if (counts == 0).any():
            raise ValueError("every label value must occur at least once")

    def validate(self) -> None:
        """Full invariant check including 4-connectivity of every label."""
        comp = _cc_label(self.labels, connectivity=1, background=-1)
        n_components = int(comp.max())
        if n_components != self.n_labels:
            raise ValueError(f"{n_components} connected components for "
                             f"{self.n_labels} labels; some label is split")

    def to_json_dict(self) -> dict:
        runs = []
        lab = self.labels
        for row in range(self.height):
            line = lab[row]
            cuts = np.flatnonzero(np.diff(line)) + 1
            starts = np.concatenate(([0], cuts))
            ends = np.concatenate((cuts, [self.width]))
            for s, e in zip(starts.tolist(), ends.tolist()):
                runs.append([row, s, e - s, int(line[s])])
        return {"width": self.width, "height": self.height,
                "n_labels": self.n_labels, "runs": runs}

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, d: dict) -> "SuperpixelMap":
        if not isinstance(d, dict):
            raise SchemaError("superpixel map must be a JSON object", field="map")
        for key in ("width", "height", "n_labels", "runs"):
            if key not in d:
                raise SchemaError(f"missing key {key!r}", field=key)
        w, h, n = d["width"], d["height"], d["n_labels"]
        if not all(isinstance(v, int) and v > 0 for v in (w, h, n)):
            raise SchemaError("width, height and n_labels must be positive integers",
                              field="width")
        lab = np.full((h, w), -1, dtype=np.int64)
        if not isinstance(d["runs"], list):
            raise SchemaError("runs must be an array", field="runs")
        for i, run in enumerate(d["runs"]):
            if not (isinstance(run, list) and len(run) == 4
                    and all(isinstance(v, int) for v in run)):
                raise SchemaError(f"runs[{i}] must be [row, start, length, label]",
                                  field=f"runs[{i}]")
            row, start, length, value = run
            if not (0 <= row < h and 0 <= start and start + length <= w and length >= 1):
                raise SchemaError(f"runs[{i}] out of bounds", field=f"runs[{i}]")
            if not 0 <= value < n:
                raise SchemaError(f"runs[{i}] label out of range", field=f"runs[{i}]")
            lab[row, start:start + length] = value
        if (lab < 0).any():
            raise SchemaError("runs do not cover the image", field="runs")
        try:
            return cls(w, h, lab, n)
        except ValueError as e:
            raise SchemaError(str(e), field="runs") from e

    @classmethod
    def from_json(cls, text: str) -> "SuperpixelMap":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON: {e}", field="map") from e
        return cls.from_json_dict(d)

    def content_hash(self) -> str:
        """sha256 of the compact canonical JSON; identifies this exact map."""
        compact = json.dumps(self.to_json_dict(), separators=(",", ":"))
        return hashlib.sha256(compact.encode("ascii")).hexdigest()


def _to_gray100(image: np.ndarray) -> np.ndarray:
    a = np.asarray(image)
    if a.ndim != 2:
        raise ValueError("expected a single-channel 2-D image")
    if a.dtype == np.uint8:
        return a.astype(np.float64) * (100.0 / 255.0)
    return np.clip(a.astype(np.float64), 0.0, 1.0) * 100.0


def slic_segment(image: np.ndarray, k: int, m: float = 20.0,
                 max_iter: int = 10) -> SuperpixelMap:
    """Segment a grayscale image into about k compact superpixels."""
    gray = _to_gray100(image)
    h, w = gray.shape
    n = h * w
    if not (2 <= k <= n // 4):
        raise InvalidKError(f"k must be in [2, {n // 4}] for a {w}x{h} image, got {k}")
    if not m > 0:
        raise ValueError("compactness m must be positive")
    s = np.sqrt(n / k)

    # regular grid of centers, one per cell, then nudge off high gradients
    ny = max(1, int(round(h / s)))
    nx = max(1, int(round(w / s)))
    grad = ((np.roll(gray, -1, 0) - np.roll(gray, 1, 0)) ** 2
            + (np.roll(gray, -1, 1) - np.roll(gray, 1, 1)) ** 2)
    cy = np.empty(ny * nx)
    cx = np.empty(ny * nx)
    idx = 0
    for i in range(ny):
        for j in range(nx):
            py = min(h - 1, int((i + 0.5) * h / ny))
            px = min(w - 1, int((j + 0.5) * w / nx))
            best = (np.inf, py, px)
            for dy in (-1, 0, 1):
                for dxx in (-1, 0, 1):
                    qy, qx = py + dy, px + dxx
                    if 0 <= qy < h and 0 <= qx < w and grad[qy, qx] < best[0]:
                        best = (grad[qy, qx], qy, qx)
            cy[idx], cx[idx] = float(best[1]), float(best[2])
            idx += 1
    cg = gray[cy.astype(int), cx.astype(int)].astype(np.float64)
    n_centers = ny * nx

    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    labels = np.full((h, w), -1, dtype=np.int64)
    m_over_s2 = (m / s) ** 2

    for _ in range(max_iter):
        best_d = np.full((h, w), np.inf)
        labels.fill(-1)
        for c in range(n_centers):
            y0 = max(0, int(np.floor(cy[c] - s)))
            y1 = min(h, int(np.ceil(cy[c] + s)) + 1)
            x0 = max(0, int(np.floor(cx[c] - s)))
            x1 = min(w, int(np.ceil(cx[c] + s)) + 1)
            gw = gray[y0:y1, x0:x1]
            dg = gw - cg[c]
            dy = yy[y0:y1, x0:x1] - cy[c]
            dxx = xx[y0:y1, x0:x1] - cx[c]
            d = np.sqrt(dg * dg + (dy * dy + dxx * dxx) * m_over_s2)
            window_best = best_d[y0:y1, x0:x1]
            better = d < window_best
            window_best[better] = d[better]
            labels[y0:y1, x0:x1][better] = c

        # pixels outside every window: compete over all centers, same metric
        if (labels < 0).any():
            miss = np.nonzero(labels < 0)
            my, mx = miss[0].astype(np.float64), miss[1].astype(np.float64)
            mg = gray[miss]
            md = np.full(my.shape, np.inf)
            ml = np.zeros(my.shape, dtype=np.int64)
            for c in range(n_centers):
                dg = mg - cg[c]
                dy = my - cy[c]
                dxx = mx - cx[c]
                d = np.sqrt(dg * dg + (dy * dy + dxx * dxx) * m_over_s2)
                closer = d < md
                md[closer] = d[closer]
                ml[closer] = c
            labels[miss] = ml

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=n_centers)
        sum_y = np.bincount(flat, weights=yy.ravel(), minlength=n_centers)
        sum_x = np.bincount(flat, weights=xx.ravel(), minlength=n_centers)
        sum_g = np.bincount(flat, weights=gray.ravel(), minlength=n_centers)
        occupied = counts > 0
        cy[occupied] = sum_y[occupied] / counts[occupied]
        cx[occupied] = sum_x[occupied] / counts[occupied]
        cg[occupied] = sum_g[occupied] / counts[occupied]

    min_size = (n / k) / 4.0
    final = enforce_connectivity(labels, min_size)
    n_labels = int(final.max()) + 1
    return SuperpixelMap(w, h, final, n_labels)


def enforce_connectivity(labels: np.ndarray, min_size: float) -> np.ndarray:
    """Relabel so every component is 4-connected and none is tiny.

    Components are visited in row-major order of their first pixel. Those of
    at least min_size pixels get fresh sequential labels; smaller ones adopt
    the already-final label of the left (or top) neighbor of their first
    pixel. Output labels are compact, starting at 0.
    """
    lab = np.asarray(labels)
    h, w = lab.shape
    comp = _cc_label(lab, connectivity=1, background=-1)
    flat = comp.ravel()
    ncomp = int(comp.max())
    sizes = np.bincount(flat, minlength=ncomp + 1)
    uniq, first = np.unique(flat, return_index=True)
    order = uniq[np.argsort(first, kind="stable")]
    first_of = np.zeros(ncomp + 1, dtype=np.int64)
    first_of[uniq] = first

    # pixel lists per component, via one stable sort
    by_comp = np.argsort(flat, kind="stable")
    starts = np.searchsorted(flat[by_comp], np.arange(1, ncomp + 2))

    out = np.full(h * w, -1, dtype=np.int64)
    next_label = 0
    deferred = []
    for cid in order.tolist():
        pixels = by_comp[starts[cid - 1]:starts[cid]]
        if sizes[cid] >= min_size:
            out[pixels] = next_label
            next_label += 1
            continue
        fi = int(first_of[cid])
        r, c = divmod(fi, w)
        target = -1
        if c > 0:
            target = out[fi - 1]
        elif r > 0:
            target = out[fi - w]
        if target >= 0:
            out[pixels] = target
        else:
            # left/top neighbor not labeled yet: only happens on adoption
            # chains rooted at the origin component
            deferred.append(pixels)

    while deferred:
        progressed = False
        still = []
        for pixels in deferred:
            target = -1
            for fi in np.sort(pixels).tolist():
                r, c = divmod(fi, w)
                for nb in (fi - w if r > 0 else -1, fi - 1 if c > 0 else -1,
                           fi + 1 if c + 1 < w else -1, fi + w if r + 1 < h else -1):
                    if nb >= 0 and out[nb] >= 0:
                        target = out[nb]
                        break
                if target >= 0:
                    break
            if target >= 0:
                out[pixels] = target
                progressed = True
            else:
                still.append(pixels)
        if not progressed:
            # nothing labeled borders the queue (the whole image is small
            # fragments): seed a fresh label and keep sweeping
            out[still[0]] = next_label
            next_label += 1
            still = still[1:]
        deferred = still

    return out.reshape(h, w)


def boundaries(sp: SuperpixelMap) -> Mask:
    """Pixels whose right or bottom neighbor carries a different label."""
    lab = sp.labels
    edge = np.zeros(lab.shape, dtype=bool)
    edge[:, :-1] |= lab[:, :-1] != lab[:, 1:]
    edge[:-1, :] |= lab[:-1, :] != lab[1:, :]
    return Mask.from_array(edge)
