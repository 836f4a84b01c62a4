"""File formats: field/state binaries, PNG images, trajectory directories.

Binary layouts (all little-endian):
  .pff  "PFF1", u32 width, u32 height, f64 dx, then width*height f64 row-major
  .pfs  "PFS1", u32 width, u32 height, f64 dx, f64 time, then three field
        payloads in order c_v, c_i, eta

Writers are byte-deterministic for identical inputs, and all writes go
through a temp-file-plus-rename so readers never observe partial files.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .energy import ModelParams
from .errors import SchemaError
from .grid import Mask, ScalarField
from .sim import PhaseState, Trajectory

PFF_MAGIC = b"PFF1"
PFS_MAGIC = b"PFS1"
_HEADER = struct.Struct("<IId")  # width, height, dx


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def dumps_canonical(obj) -> str:
    """Fixed JSON rendering: 2-space indent, insertion key order, newline."""
    return json.dumps(obj, indent=2) + "\n"


def atomic_write_json(path, obj) -> None:
    atomic_write_text(path, dumps_canonical(obj))


def _payload(values: np.ndarray) -> bytes:
    return np.ascontiguousarray(values, dtype="<f8").tobytes()


def field_to_bytes(f: ScalarField) -> bytes:
    return PFF_MAGIC + _HEADER.pack(f.width, f.height, f.dx) + _payload(f.values)


def save_field(f: ScalarField, path) -> None:
    atomic_write_bytes(path, field_to_bytes(f))


def load_field(path) -> ScalarField:
    data = Path(path).read_bytes()
    if data[:4] != PFF_MAGIC:
        raise SchemaError(f"{path}: bad magic, expected PFF1", field="magic")
    w, h, dx = _HEADER.unpack_from(data, 4)
    off = 4 + _HEADER.size
    expect = off + 8 * w * h
    if len(data) != expect:
        raise SchemaError(f"{path}: expected {expect} bytes, got {len(data)}", field="payload")
    values = np.frombuffer(data, dtype="<f8", count=w * h, offset=off).reshape(h, w)
    return ScalarField(values, dx)


def state_to_bytes(s: PhaseState) -> bytes:
    head = PFS_MAGIC + _HEADER.pack(s.c_v.width, s.c_v.height, s.dx)
    head += struct.pack("<d", s.time)
    return head + _payload(s.c_v.values) + _payload(s.c_i.values) + _payload(s.eta.values)


def save_state(s: PhaseState, path) -> None:
    atomic_write_bytes(path, state_to_bytes(s))


def load_state(path) -> PhaseState:
    data = Path(path).read_bytes()
    if data[:4] != PFS_MAGIC:
        raise SchemaError(f"{path}: bad magic, expected PFS1", field="magic")
    w, h, dx = _HEADER.unpack_from(data, 4)
    (time,) = struct.unpack_from("<d", data, 4 + _HEADER.size)
    off = 4 + _HEADER.size + 8
    n = w * h
    expect = off + 3 * 8 * n
    if len(data) != expect:
        raise SchemaError(f"{path}: expected {expect} bytes, got {len(data)}", field="payload")

    def field(k):
        v = np.frombuffer(data, dtype="<f8", count=n, offset=off + 8 * n * k).reshape(h, w)
        return ScalarField(v, dx)

    return PhaseState(field(0), field(1), field(2), time=time)


def save_gray_png(arr: np.ndarray, path) -> None:
    a = np.asarray(arr)
    if a.dtype != np.uint8 or a.ndim != 2:
        raise ValueError("grayscale PNG wants a 2-D uint8 array")
    img = Image.fromarray(a, mode="L")
    tmp = Path(path).with_name(Path(path).name + ".tmp")
    img.save(tmp, format="PNG")
    os.replace(tmp, path)


def load_gray_png(path) -> np.ndarray:
    img = Image.open(path)
    if img.mode != "L":
        img = img.convert("L")
    return np.asarray(img, dtype=np.uint8)


def save_mask_png(mask: Mask, path) -> None:
    img = Image.fromarray(mask.to_array())
    tmp = Path(path).with_name(Path(path).name + ".tmp")
    img.save(tmp, format="PNG", bits=1)
    os.replace(tmp, path)


def load_mask_png(path) -> Mask:
    img = Image.open(path)
    if img.mode not in ("1", "L"):
        img = img.convert("L")
    return Mask.from_array(np.asarray(img) > 0)


STATE_NAME = "state_%06d.pfs"
MANIFEST_NAME = "trajectory.json"


def save_trajectory(traj: Trajectory, out_dir) -> None:
    """Write snapshot .pfs files plus the trajectory.json manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for step_index, state in traj.entries:
        name = STATE_NAME % step_index
        save_state(state, out / name)
        files.append(name)
    manifest = {
        "dt": traj.dt,
        "theta": traj.theta.to_dict(),
        "steps": list(traj.step_indices),
        "files": files,
    }
    atomic_write_json(out / MANIFEST_NAME, manifest)


def load_trajectory(traj_dir) -> Trajectory:
    d = Path(traj_dir)
    try:
        manifest = json.loads((d / MANIFEST_NAME).read_text())
    except FileNotFoundError:
        raise SchemaError(f"{traj_dir}: missing {MANIFEST_NAME}", field="manifest")
    except json.JSONDecodeError as e:
        raise SchemaError(f"{traj_dir}: invalid manifest JSON: {e}", field="manifest")
    for key in ("dt", "theta", "steps", "files"):
        if key not in manifest:
            raise SchemaError(f"{traj_dir}: manifest missing {key!r}", field=key)
    theta = ModelParams.from_dict(manifest["theta"])
    steps = manifest["steps"]
    files = manifest["files"]
    if len(steps) != len(files):
        raise SchemaError(f"{traj_dir}: steps and files length mismatch", field="files")
    entries = tuple((int(i), load_state(d / name)) for i, name in zip(steps, files))
    return Trajectory(entries, float(manifest["dt"]), theta)
