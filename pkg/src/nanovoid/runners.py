"""Shared pipeline drivers used by both the CLI and the HTTP service.

Both front ends call these functions with file paths, so a service job and
its command-line twin produce byte-identical artifacts. Every writer here
is deterministic given its inputs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .annot import compose_mask, load_annotation
from .energy import ModelParams, ParamBounds
from .errors import SchemaError
from .grid import Mask
from .learn import (TrainConfig, default_init, extract_state, fit, pixel_accuracy,
                    predict_masks)
from .sim import render_frame, run, synth_two_voids
from .slic import SuperpixelMap
from .storage import (atomic_write_json, atomic_write_text, load_mask_png, load_state,
                      load_trajectory, save_gray_png, save_mask_png, save_trajectory)

# Net defect production P above the recombination balance R*cv_eq*ci_eq,
# so the default trajectory shows void growth instead of a steady state.
DEFAULT_THETA = ModelParams(
    M_v=1.0, M_i=1.0, L=2.0,
    kappa_v=2.0, kappa_i=2.0, kappa_eta=2.0,
    A_v=1.0, A_i=1.0, B_v=1.0, B_i=1.0,
    cv_eq=0.1, ci_eq=0.02, R=5.0, P=0.4,
)

DEFAULT_INTERFACE_WIDTH = 2.0

MASK_NAME = "mask_%06d.png"
FRAME_NAME = "frame_%06d.png"


def read_params(path) -> ModelParams:
    return ModelParams.from_json(Path(path).read_text())


def write_params(theta: ModelParams, path) -> None:
    atomic_write_text(path, theta.to_json())


def read_bounds(path) -> ParamBounds:
    return ParamBounds.from_json(Path(path).read_text())


def write_bounds(bounds: ParamBounds, path) -> None:
    atomic_write_text(path, bounds.to_json())


def run_synth(out_dir, seed: int, n_steps: int, snapshot_every: int,
              params_path=None, dt: float | None = None) -> None:
    """Two-void synthetic trajectory: .pfs snapshots, masks, manifest, params."""
    theta = read_params(params_path) if params_path else DEFAULT_THETA
    traj, masks = synth_two_voids(seed, theta, n_steps, snapshot_every, dt=dt)
    out = Path(out_dir)
    save_trajectory(traj, out)
    for (step_index, _), mask in zip(traj.entries, masks):
        save_mask_png(mask, out / (MASK_NAME % step_index))
    write_params(theta, out / "params.json")


def run_simulate(params_path, init_path, dt: float, n_steps: int,
                 snapshot_every: int, out_dir, progress=None) -> None:
    theta = read_params(params_path)
    state0 = load_state(init_path)
    if progress:
        progress(0.0)
    traj = run(state0, theta, dt, n_steps, snapshot_every)
    save_trajectory(traj, out_dir)
    if progress:
        progress(1.0)


def history_to_csv(history) -> str:
    lines = ["iteration,mismatch,penalty_lo,penalty_hi,total"]
    for i, r in enumerate(history):
        lines.append(f"{i},{r.mismatch!r},{r.penalty_lo!r},{r.penalty_hi!r},{r.total!r}")
    return "\n".join(lines) + "\n"


def load_pairs_file(data_dir):
    """Read pairs.json and the masks/states it references.

    Layout: {"dt", "interface_width", "dx", "pairs": [{"init", "target", "k"}]}
    where init is a mask PNG name or {"state": <pfs name>} and target a mask
    PNG name, all relative to the directory.
    """
    data = Path(data_dir)
    try:
        spec = json.loads((data / "pairs.json").read_text())
    except FileNotFoundError:
        raise SchemaError(f"{data_dir}: missing pairs.json", field="pairs")
    except json.JSONDecodeError as e:
        raise SchemaError(f"{data_dir}: invalid pairs.json: {e}", field="pairs")
    if "dt" not in spec:
        raise SchemaError("pairs.json missing 'dt'", field="dt")
    if "pairs" not in spec or not isinstance(spec["pairs"], list) or not spec["pairs"]:
        raise SchemaError("pairs.json needs a non-empty 'pairs' array", field="pairs")
    pairs = []
    for i, p in enumerate(spec["pairs"]):
        try:
            init_ref = p["init"]
            target_name = p["target"]
            k = int(p["k"])
        except (KeyError, TypeError, ValueError):
            raise SchemaError(f"pairs[{i}] must have init, target and k",
                              field=f"pairs[{i}]")
        if isinstance(init_ref, dict) and "state" in init_ref:
            init = load_state(data / init_ref["state"])
        elif isinstance(init_ref, str):
            init = load_mask_png(data / init_ref)
        else:
            raise SchemaError(f"pairs[{i}].init must be a mask name or {{'state': name}}",
                              field=f"pairs[{i}].init")
        pairs.append((init, load_mask_png(data / target_name), k))
    return (pairs, float(spec["dt"]),
            float(spec.get("interface_width", DEFAULT_INTERFACE_WIDTH)),
            float(spec.get("dx", 1.0)))


def run_learn(data_dir, out_path, bounds_path=None, lambda1: float = 1e3,
              lambda2: float = 1e3, learning_rate: float = 0.05,
              iterations: int = 100, gradient_mode: str = "adjoint",
              seed: int = 0, history_path=None, init_path=None,
              progress=None, report_cb=None):
    """Fit parameters to the pairs in a data directory; write params JSON.

    With history_path set, writes the loss table as CSV and a loss-curve
    figure next to it (same stem, .png). report_cb, when given, receives
    (iteration, total_iterations, LossReport) after every iteration.
    """
    pairs, dt, interface_width, dx = load_pairs_file(data_dir)
    bounds = read_bounds(bounds_path) if bounds_path else ParamBounds({})
    config = TrainConfig(pairs=tuple(pairs), bounds=bounds, lambda1=lambda1,
                         lambda2=lambda2, learning_rate=learning_rate,
                         iterations=iterations, dt=dt, gradient_mode=gradient_mode,
                         seed=seed, interface_width=interface_width, dx=dx)
    theta_init = read_params(init_path) if init_path else default_init(bounds)

    def on_iteration(i, n, report):
        if progress:
            progress(i / max(1, n))
        if report_cb:
            report_cb(i, n, report)

    theta_final, history = fit(config, theta_init, on_iteration=on_iteration)
    write_params(theta_final, out_path)
    if history_path is not None:
        history_path = Path(history_path)
        atomic_write_text(history_path, history_to_csv(history))
        from .report import save_history_figure
        save_history_figure(history, history_path.with_suffix(".png"))
    return theta_final, history


def run_segment(image_path, k: int, m: float, max_iter: int, out_path) -> SuperpixelMap:
    from .slic import slic_segment
    from .storage import load_gray_png
    sp = slic_segment(load_gray_png(image_path), k, m, max_iter)
    atomic_write_text(out_path, sp.to_json())
    return sp


def run_compose(superpixels_path, annotation_path, out_path) -> Mask:
    sp = SuperpixelMap.from_json(Path(superpixels_path).read_text())
    ann = load_annotation(annotation_path, n_labels=sp.n_labels)
    mask = compose_mask(sp, ann)
    save_mask_png(mask, out_path)
    return mask


def run_predict(params_path, annotation_path, superpixels_path, dt: float,
                steps, threshold_t: float, out_dir,
                interface_width: float = DEFAULT_INTERFACE_WIDTH,
                render_frames: bool = False, progress=None) -> list:
    """Forward-predict masks at the listed steps from an annotated frame."""
    theta = read_params(params_path)
    sp = SuperpixelMap.from_json(Path(superpixels_path).read_text())
    ann = load_annotation(annotation_path, n_labels=sp.n_labels)
    mask0 = compose_mask(sp, ann)
    state0 = extract_state(mask0, theta, interface_width)
    steps = [int(s) for s in steps]
    if progress:
        progress(0.0)
    masks = predict_masks(state0, theta, dt, steps, threshold_t)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for step_index, mask in zip(steps, masks):
        name = MASK_NAME % step_index
        save_mask_png(mask, out / name)
        files.append(name)
    atomic_write_json(out / "predict.json",
                      {"steps": steps, "threshold": threshold_t, "files": files})
    if render_frames:
        frames = out / "frames"
        frames.mkdir(exist_ok=True)
        for ordinal, mask in enumerate(masks):
            img = np.where(mask.to_array(), 255, 0).astype(np.uint8)
            save_gray_png(img, frames / (FRAME_NAME % ordinal))
    if progress:
        progress(1.0)
    return masks


def run_render(traj_dir, channel: str, out_dir) -> list:
    """Render every snapshot of a trajectory to 8-bit grayscale PNGs."""
    traj = load_trajectory(traj_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for ordinal, state in enumerate(traj.states):
        name = FRAME_NAME % ordinal
        save_gray_png(render_frame(state, channel), out / name)
        files.append(name)
    return files


def run_metrics(pred_dir, truth_dir):
    """Per-frame IOU and pixel accuracy for same-named mask PNGs.

    Returns (rows, mean_iou, mean_accuracy) with rows of
    (name, iou, pixel_accuracy) for files present in both directories.
    """
    from .annot import iou as iou_fn
    pred = {p.name: p for p in sorted(Path(pred_dir).glob("*.png"))}
    truth = {p.name: p for p in sorted(Path(truth_dir).glob("*.png"))}
    common = sorted(set(pred) & set(truth))
    if not common:
        raise SchemaError("no matching mask files between pred and truth", field="pred")
    rows = []
    for name in common:
        a = load_mask_png(pred[name])
        b = load_mask_png(truth[name])
        rows.append((name, iou_fn(a, b), pixel_accuracy(a, b)))
    mean_iou = sum(r[1] for r in rows) / len(rows)
    mean_acc = sum(r[2] for r in rows) / len(rows)
    return rows, mean_iou, mean_acc


def metrics_to_csv(rows, mean_iou, mean_acc) -> str:
    lines = ["frame,iou,pixel_accuracy"]
    for name, i, a in rows:
        lines.append(f"{name},{i!r},{a!r}")
    lines.append(f"mean,{mean_iou!r},{mean_acc!r}")
    return "\n".join(lines) + "\n"
