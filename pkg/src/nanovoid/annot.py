"""Annotations: selected superpixels plus an eraser raster, and their algebra.

An annotation references one exact SuperpixelMap by content hash, holds the
set of selected labels, and an erased Mask. Composition is set algebra:

    mask = union(pixels of selected labels) minus erased

Eraser input arrives as brush polylines (points plus radius); the server
rasterizes them once (a pixel is erased iff its center lies within radius
of the polyline) and stores only the raster, so there is no replay
ambiguity and the browser preview can reproduce the rule bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (DimensionMismatchError, LabelOutOfRangeError, SchemaError,
                     StaleAnnotationError)
from .grid import Mask
from .slic import SuperpixelMap


@dataclass(frozen=True)
class Annotation:
    """One user's void annotation of one frame."""

    frame_id: str
    superpixel_ref: str
    selected: tuple
    erased: Mask
    author: str = ""
    timestamp: str = ""

    def __post_init__(self):
        sel = tuple(sorted(set(int(v) for v in self.selected)))
        if any(v < 0 for v in sel):
            raise ValueError("selected labels must be >= 0")
        object.__setattr__(self, "selected", sel)
        if not isinstance(self.erased, Mask):
            raise ValueError("erased must be a Mask")


def compose_mask(sp: SuperpixelMap, ann: Annotation) -> Mask:
    """Union of the selected superpixels minus the erased pixels."""
    if ann.superpixel_ref != sp.content_hash():
        raise StaleAnnotationError(
            "annotation references a different superpixel map "
            f"({ann.superpixel_ref[:12]}... vs {sp.content_hash()[:12]}...)")
    if (sp.width, sp.height) != (ann.erased.width, ann.erased.height):
        raise DimensionMismatchError(
            f"erased mask is {ann.erased.width}x{ann.erased.height}, "
            f"frame is {sp.width}x{sp.height}")
    if ann.selected and ann.selected[-1] >= sp.n_labels:
        raise LabelOutOfRangeError(
            f"selected label {ann.selected[-1]} >= n_labels {sp.n_labels}")
    if not ann.selected:
        return Mask(sp.width, sp.height, ())
    chosen = np.zeros(sp.n_labels, dtype=bool)
    chosen[list(ann.selected)] = True
    picked = chosen[sp.labels]
    return Mask.from_array(picked & ~ann.erased.to_array())


def iou(a: Mask, b: Mask) -> float:
    """Intersection over union; two empty masks count as full agreement."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatchError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    aa = a.to_array()
    bb = b.to_array()
    union = int(np.count_nonzero(aa | bb))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(aa & bb)) / union


def rasterize_strokes(strokes, width: int, height: int) -> Mask:
    """Stamp capsule-shaped brush strokes into a mask.

    Each stroke is a dict {"points": [[x, y], ...], "radius": r} with
    coordinates in pixels, x along columns. A pixel (row, col) is covered
    iff the distance from (col, row) to any polyline segment is <= radius.
    A single point is a disc. The arithmetic sticks to plain IEEE doubles
    so a browser client can reproduce it exactly.
    """
    covered = np.zeros((height, width), dtype=bool)
    for si, stroke in enumerate(strokes):
        try:
            pts = [(float(p[0]), float(p[1])) for p in stroke["points"]]
            radius = float(stroke["radius"])
        except (KeyError, TypeError, IndexError, ValueError):
            raise SchemaError(f"strokes[{si}] must have points and radius",
                              field=f"strokes[{si}]")
        if radius <= 0 or not pts:
            raise SchemaError(f"strokes[{si}] needs points and a positive radius",
                              field=f"strokes[{si}]")
        r2 = radius * radius
        segments = list(zip(pts, pts[1:])) if len(pts) > 1 else [(pts[0], pts[0])]
        for (ax, ay), (bx, by) in segments:
            x0 = max(0, int(np.floor(min(ax, bx) - radius)))
            x1 = min(width - 1, int(np.ceil(max(ax, bx) + radius)))
            y0 = max(0, int(np.floor(min(ay, by) - radius)))
            y1 = min(height - 1, int(np.ceil(max(ay, by) + radius)))
            if x1 < x0 or y1 < y0:
                continue
            xs = np.arange(x0, x1 + 1, dtype=np.float64)
            ys = np.arange(y0, y1 + 1, dtype=np.float64)
            px, py = np.meshgrid(xs, ys)
            vx, vy = bx - ax, by - ay
            seg_len2 = vx * vx + vy * vy
            if seg_len2 == 0.0:
                qx, qy = ax, ay
            else:
                t = ((px - ax) * vx + (py - ay) * vy) / seg_len2
                t = np.clip(t, 0.0, 1.0)
                qx = ax + t * vx
                qy = ay + t * vy
            d2 = (px - qx) ** 2 + (py - qy) ** 2
            covered[y0:y1 + 1, x0:x1 + 1] |= d2 <= r2
    return Mask.from_array(covered)


def _mask_to_json_dict(mask: Mask) -> dict:
    return {"width": mask.width, "height": mask.height,
            "runs": [[r, s, n] for r, s, n in mask.runs]}


def _mask_from_json_dict(d, field: str) -> Mask:
    if not isinstance(d, dict):
        raise SchemaError(f"{field} must be an object", field=field)
    for key in ("width", "height", "runs"):
        if key not in d:
            raise SchemaError(f"{field} missing {key!r}", field=f"{field}.{key}")
    try:
        runs = tuple((int(r), int(s), int(n)) for r, s, n in d["runs"])
        return Mask(int(d["width"]), int(d["height"]), runs)
    except (TypeError, ValueError) as e:
        raise SchemaError(f"{field} is not a valid mask: {e}", field=f"{field}.runs")


def annotation_to_json_dict(ann: Annotation) -> dict:
    return {
        "frame_id": ann.frame_id,
        "superpixel_ref": ann.superpixel_ref,
        "selected": list(ann.selected),
        "erased": _mask_to_json_dict(ann.erased),
        "author": ann.author,
        "timestamp": ann.timestamp,
    }


def annotation_from_json_dict(d: dict, n_labels: int | None = None) -> Annotation:
    if not isinstance(d, dict):
        raise SchemaError("annotation must be a JSON object", field="annotation")
    for key in ("frame_id", "superpixel_ref", "selected", "erased"):
        if key not in d:
            raise SchemaError(f"missing key {key!r}", field=key)
    if not isinstance(d["frame_id"], str):
        raise SchemaError("frame_id must be a string", field="frame_id")
    if not isinstance(d["superpixel_ref"], str):
        raise SchemaError("superpixel_ref must be a string", field="superpixel_ref")
    sel = d["selected"]
    if not isinstance(sel, list) or any(not isinstance(v, int) or isinstance(v, bool)
                                        or v < 0 for v in sel):
        raise SchemaError("selected must be an array of non-negative integers",
                          field="selected")
    if n_labels is not None and any(v >= n_labels for v in sel):
        raise SchemaError(f"selected label out of range (n_labels={n_labels})",
                          field="selected")
    erased = _mask_from_json_dict(d["erased"], "erased")
    author = d.get("author", "")
    timestamp = d.get("timestamp", "")
    if not isinstance(author, str):
        raise SchemaError("author must be a string", field="author")
    if not isinstance(timestamp, str):
        raise SchemaError("timestamp must be a string", field="timestamp")
    return Annotation(d["frame_id"], d["superpixel_ref"], tuple(sel), erased,
                      author, timestamp)


def save_annotation(ann: Annotation, path) -> None:
    from .storage import atomic_write_text
    atomic_write_text(path, json.dumps(annotation_to_json_dict(ann), indent=2) + "\n")


def load_annotation(path, n_labels: int | None = None) -> Annotation:
    from pathlib import Path
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON: {e}", field="annotation") from e
    return annotation_from_json_dict(d, n_labels=n_labels)
