"""Periodic 2-D scalar fields, finite-difference kernels, and RLE binary masks.

All numerics run on float64 arrays with periodic (wrap-around) boundary
conditions. Reductions keep a fixed summation order so results are
bit-reproducible regardless of how callers parallelize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_SIDE = 4  # stencils need distinct neighbors in each direction


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One periodic grid of float64 samples with uniform spacing dx.

    `values` has shape (height, width), row-major.
    """

    values: np.ndarray
    dx: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, order="C", copy=True)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "dx", float(self.dx))
        if v.ndim != 2:
            raise ValueError("field values must be a 2-D array")
        h, w = v.shape
        if h < MIN_SIDE or w < MIN_SIDE:
            raise ValueError(f"grid must be at least {MIN_SIDE}x{MIN_SIDE}, got {w}x{h}")
        if not self.dx > 0.0:
            raise ValueError("dx must be positive")
        if not np.isfinite(v).all():
            raise ValueError("field values must be finite")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def same_shape(self, other: "ScalarField") -> bool:
        return self.values.shape == other.values.shape and self.dx == other.dx


def laplacian_array(v: np.ndarray, dx: float) -> np.ndarray:
    """5-point periodic Laplacian on the trailing two axes.

    The vertical and horizontal neighbor pairs are summed before being
    combined, which makes the result bitwise symmetric under grid flips
    (float addition is commutative, just not associative).
    """
    vert = np.roll(v, 1, axis=-2) + np.roll(v, -1, axis=-2)
    horiz = np.roll(v, 1, axis=-1) + np.roll(v, -1, axis=-1)
    return (vert + horiz - 4.0 * v) / (dx * dx)


def gradient_sq_array(v: np.ndarray, dx: float) -> np.ndarray:
    """|∇v|² from centered differences, periodic, trailing two axes."""
    gy = (np.roll(v, -1, axis=-2) - np.roll(v, 1, axis=-2)) / (2.0 * dx)
    gx = (np.roll(v, -1, axis=-1) - np.roll(v, 1, axis=-1)) / (2.0 * dx)
    return gx * gx + gy * gy


def laplacian(f: ScalarField) -> ScalarField:
    """Periodic 5-point Laplacian of a field; same shape and dx."""
    return ScalarField(laplacian_array(f.values, f.dx), f.dx)


def mean(f: ScalarField) -> float:
    """Arithmetic mean of the samples (fixed pairwise summation order)."""
    return float(np.mean(f.values))


@dataclass(frozen=True, eq=False)
class Mask:
    """Run-length-encoded set of foreground pixels on a width×height grid.

    Runs are (row, start, length) triples in canonical form: sorted by
    (row, start), disjoint, non-adjacent (maximal), and inside bounds.
    """

    width: int
    height: int
    runs: tuple

    def __post_init__(self):
        object.__setattr__(self, "runs", tuple((int(r), int(s), int(n)) for r, s, n in self.runs))
        if self.width < 1 or self.height < 1:
            raise ValueError("mask dimensions must be positive")
        prev_row, prev_end = -1, -1
        for row, start, length in self.runs:
            if length < 1:
                raise ValueError(f"run length must be >= 1, got {length}")
            if not (0 <= row < self.height) or not (0 <= start and start + length <= self.width):
                raise ValueError(f"run ({row},{start},{length}) out of bounds")
            if row < prev_row or (row == prev_row and start <= prev_end):
                raise ValueError("runs must be sorted, disjoint and merged (canonical form)")
            prev_row, prev_end = row, start + length  # start == prev_end means adjacent, not canonical

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Mask":
        """Canonical RLE of a boolean (height, width) array."""
        a = np.asarray(arr, dtype=bool)
        if a.ndim != 2:
            raise ValueError("mask array must be 2-D")
        h, w = a.shape
        runs = []
        pad = np.zeros((h, 1), dtype=bool)
        d = np.diff(np.concatenate([pad, a, pad], axis=1).astype(np.int8), axis=1)
        rows, starts = np.nonzero(d == 1)
        rows_e, ends = np.nonzero(d == -1)
        # starts and ends pair up within each row in order
        for r, s, e in zip(rows.tolist(), starts.tolist(), ends.tolist()):
            runs.append((r, s, e - s))
        return cls(w, h, tuple(runs))

    def to_array(self) -> np.ndarray:
        """Decode to a boolean (height, width) array."""
        a = np.zeros((self.height, self.width), dtype=bool)
        for row, start, length in self.runs:
            a[row, start : start + length] = True
        return a

    def pixel_count(self) -> int:
        return sum(n for _, _, n in self.runs)

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return (self.width, self.height, self.runs) == (other.width, other.height, other.runs)

    def __hash__(self):
        return hash((self.width, self.height, self.runs))


def threshold(f: ScalarField, t: float) -> Mask:
    """Mask of pixels where f >= t, in canonical RLE form."""
    return Mask.from_array(f.values >= t)
