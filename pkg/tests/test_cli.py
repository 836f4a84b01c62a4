"""Command-line interface: every subcommand, exit codes, artifact layout."""

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from nanovoid.annot import Annotation, compose_mask, save_annotation
from nanovoid.cli import main
from nanovoid.energy import ModelParams, ParamBounds
from nanovoid.grid import Mask
from nanovoid.learn import default_init
from nanovoid.runners import DEFAULT_THETA, read_params, write_bounds, write_params
from nanovoid.sim import render_frame
from nanovoid.slic import SuperpixelMap
from nanovoid.storage import load_gray_png, load_mask_png, load_trajectory, save_mask_png


def disk_mask(h, w, cy, cx, r):
    yy, xx = np.mgrid[0:h, 0:w]
    return Mask.from_array((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r)


def synth_dir(tmp_path, name="traj", seed=0, steps=4, every=2):
    out = tmp_path / name
    rc = main(["synth", "--out", str(out), "--seed", str(seed),
               "--steps", str(steps), "--snapshot-every", str(every)])
    assert rc == 0
    return out


def learn_data_dir(tmp_path):
    """Tiny two-mask pair set that a few gradient steps can handle."""
    data = tmp_path / "data"
    data.mkdir()
    m1 = disk_mask(16, 16, 7, 8, 4)
    m2 = disk_mask(16, 16, 8, 8, 5)
    save_mask_png(m1, data / "m1.png")
    save_mask_png(m2, data / "m2.png")
    (data / "pairs.json").write_text(json.dumps({
        "dt": 0.002, "interface_width": 1.5, "dx": 1.0,
        "pairs": [{"init": "m1.png", "target": "m2.png", "k": 2}],
    }))
    bounds = ParamBounds({"M_v": (0.5, 1.5), "L": (0.5, 1.5)})
    write_bounds(bounds, data / "bounds.json")
    return data, bounds


class TestSynth:
    def test_writes_trajectory_masks_and_params(self, tmp_path):
        out = synth_dir(tmp_path)
        traj = load_trajectory(out)
        assert traj.step_indices == (0, 2, 4)
        for step in (0, 2, 4):
            assert (out / ("state_%06d.pfs" % step)).exists()
            assert (out / ("mask_%06d.png" % step)).exists()
        assert read_params(out / "params.json") == DEFAULT_THETA
        manifest = json.loads((out / "trajectory.json").read_text())
        assert manifest["steps"] == [0, 2, 4]

    def test_masks_match_thresholded_snapshots(self, tmp_path):
        out = synth_dir(tmp_path)
        traj = load_trajectory(out)
        from nanovoid.grid import threshold
        for step, state in traj.entries:
            assert load_mask_png(out / ("mask_%06d.png" % step)) == \
                threshold(state.eta, 0.5)

    def test_deterministic_bytes(self, tmp_path):
        a = synth_dir(tmp_path, "a", seed=3)
        b = synth_dir(tmp_path, "b", seed=3)
        c = synth_dir(tmp_path, "c", seed=4)
        name = "state_000004.pfs"
        assert (a / name).read_bytes() == (b / name).read_bytes()
        assert (a / name).read_bytes() != (c / name).read_bytes()

    def test_custom_params_file(self, tmp_path):
        theta = DEFAULT_THETA.replace(P=0.05)
        write_params(theta, tmp_path / "p.json")
        out = tmp_path / "traj"
        rc = main(["synth", "--out", str(out), "--steps", "2",
                   "--snapshot-every", "2", "--params", str(tmp_path / "p.json")])
        assert rc == 0
        assert read_params(out / "params.json") == theta


class TestSimulate:
    def test_reproduces_synth_snapshots(self, tmp_path):
        src = synth_dir(tmp_path)
        dt = json.loads((src / "trajectory.json").read_text())["dt"]
        out = tmp_path / "resim"
        rc = main(["simulate", "--params", str(src / "params.json"),
                   "--init", str(src / "state_000000.pfs"), "--dt", repr(dt),
                   "--steps", "4", "--snapshot-every", "2", "--out", str(out)])
        assert rc == 0
        for step in (2, 4):
            name = "state_%06d.pfs" % step
            assert (out / name).read_bytes() == (src / name).read_bytes()

    def test_divergence_exits_2(self, tmp_path, capsys):
        src = synth_dir(tmp_path)
        rc = main(["simulate", "--params", str(src / "params.json"),
                   "--init", str(src / "state_000000.pfs"), "--dt", "50.0",
                   "--steps", "50", "--snapshot-every", "50",
                   "--out", str(tmp_path / "boom")])
        assert rc == 2
        assert "DivergedError" in capsys.readouterr().err

    def test_missing_params_file_exits_2(self, tmp_path):
        rc = main(["simulate", "--params", str(tmp_path / "nope.json"),
                   "--init", str(tmp_path / "nope.pfs"), "--dt", "0.01",
                   "--steps", "1", "--snapshot-every", "1",
                   "--out", str(tmp_path / "out")])
        assert rc == 2


class TestLearn:
    def test_zero_iterations_returns_init(self, tmp_path):
        data, bounds = learn_data_dir(tmp_path)
        out = tmp_path / "fit.json"
        hist = tmp_path / "hist.csv"
        rc = main(["learn", "--data", str(data), "--bounds", str(data / "bounds.json"),
                   "--iters", "0", "--out", str(out), "--history", str(hist)])
        assert rc == 0
        assert read_params(out) == default_init(bounds)
        lines = hist.read_text().strip().splitlines()
        assert lines[0] == "iteration,mismatch,penalty_lo,penalty_hi,total"
        assert len(lines) == 2
        assert (tmp_path / "hist.png").exists()

    def test_descends_and_writes_history(self, tmp_path):
        data, _ = learn_data_dir(tmp_path)
        out = tmp_path / "fit.json"
        hist = tmp_path / "h.csv"
        rc = main(["learn", "--data", str(data), "--bounds", str(data / "bounds.json"),
                   "--iters", "3", "--lr", "0.05", "--out", str(out),
                   "--history", str(hist)])
        assert rc == 0
        rows = hist.read_text().strip().splitlines()[1:]
        totals = [float(r.split(",")[4]) for r in rows]
        assert len(totals) == 4
        assert all(b <= a + 1e-15 for a, b in zip(totals, totals[1:]))
        theta = read_params(out)
        assert np.all(np.isfinite(theta.as_vector()))

    def test_explicit_init_file(self, tmp_path):
        data, _ = learn_data_dir(tmp_path)
        theta0 = DEFAULT_THETA.replace(M_v=0.75)
        write_params(theta0, tmp_path / "init.json")
        out = tmp_path / "fit.json"
        rc = main(["learn", "--data", str(data), "--iters", "0",
                   "--init", str(tmp_path / "init.json"), "--out", str(out)])
        assert rc == 0
        assert read_params(out) == theta0

    def test_negative_iters_exits_1(self, tmp_path, capsys):
        data, _ = learn_data_dir(tmp_path)
        rc = main(["learn", "--data", str(data), "--iters", "-2",
                   "--out", str(tmp_path / "x.json")])
        assert rc == 1
        assert "--iters" in capsys.readouterr().err

    def test_missing_pairs_json_exits_2(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        rc = main(["learn", "--data", str(empty), "--iters", "1",
                   "--out", str(tmp_path / "x.json")])
        assert rc == 2


class TestAnnotationPipeline:
    def make_frame(self, tmp_path):
        mask = disk_mask(24, 24, 11, 12, 6)
        img = np.where(mask.to_array(), 40, 200).astype(np.uint8)
        from nanovoid.storage import save_gray_png
        save_gray_png(img, tmp_path / "frame.png")
        return mask

    def test_segment_compose_predict_step0(self, tmp_path):
        self.make_frame(tmp_path)
        sp_path = tmp_path / "sp.json"
        rc = main(["segment", "--image", str(tmp_path / "frame.png"),
                   "--k", "9", "--m", "20", "--out", str(sp_path)])
        assert rc == 0
        sp = SuperpixelMap.from_json(sp_path.read_text())
        sp.validate()

        ann = Annotation(frame_id="frame", superpixel_ref=sp.content_hash(),
                         selected=(0, 1), erased=Mask.from_array(
                             np.zeros((24, 24), dtype=bool)))
        save_annotation(ann, tmp_path / "ann.json")
        mask_path = tmp_path / "mask.png"
        rc = main(["compose", "--superpixels", str(sp_path),
                   "--annotation", str(tmp_path / "ann.json"), "--out", str(mask_path)])
        assert rc == 0
        assert load_mask_png(mask_path) == compose_mask(sp, ann)

        write_params(DEFAULT_THETA, tmp_path / "params.json")
        out = tmp_path / "pred"
        rc = main(["predict", "--params", str(tmp_path / "params.json"),
                   "--init-annotation", str(tmp_path / "ann.json"),
                   "--superpixels", str(sp_path), "--dt", "0.002",
                   "--steps", "0,2", "--threshold", "0.5", "--out", str(out)])
        assert rc == 0
        # step 0 is the thresholded reconstruction of the composed mask
        assert (out / "mask_000000.png").read_bytes() == mask_path.read_bytes()
        meta = json.loads((out / "predict.json").read_text())
        assert meta["steps"] == [0, 2]
        assert meta["files"] == ["mask_000000.png", "mask_000002.png"]

    def test_predict_bad_step_list_exits_1(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["predict", "--params", "p", "--init-annotation", "a",
                  "--superpixels", "s", "--dt", "0.01", "--steps", "5,3",
                  "--out", "o"])
        assert exc.value.code == 1

    def test_stale_annotation_exits_2(self, tmp_path):
        self.make_frame(tmp_path)
        sp_path = tmp_path / "sp.json"
        main(["segment", "--image", str(tmp_path / "frame.png"), "--k", "4",
              "--out", str(sp_path)])
        ann = Annotation(frame_id="frame", superpixel_ref="0" * 64, selected=(0,),
                         erased=Mask.from_array(np.zeros((24, 24), dtype=bool)))
        save_annotation(ann, tmp_path / "ann.json")
        rc = main(["compose", "--superpixels", str(sp_path),
                   "--annotation", str(tmp_path / "ann.json"),
                   "--out", str(tmp_path / "m.png")])
        assert rc == 2


class TestRender:
    def test_renders_every_snapshot(self, tmp_path):
        src = synth_dir(tmp_path)
        out = tmp_path / "frames"
        rc = main(["render", "--traj", str(src), "--channel", "eta",
                   "--out", str(out)])
        assert rc == 0
        traj = load_trajectory(src)
        files = sorted(out.glob("frame_*.png"))
        assert [f.name for f in files] == ["frame_%06d.png" % i
                                           for i in range(len(traj.states))]
        for f, state in zip(files, traj.states):
            np.testing.assert_array_equal(load_gray_png(f),
                                          render_frame(state, "eta"))

    def test_bad_channel_exits_1(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["render", "--traj", "x", "--channel", "rho", "--out", "y"])
        assert exc.value.code == 1


class TestMetrics:
    def test_identical_dirs_score_one(self, tmp_path, capsys):
        src = synth_dir(tmp_path)
        twin = tmp_path / "twin"
        twin.mkdir()
        for p in src.glob("mask_*.png"):
            shutil.copy(p, twin / p.name)
        fig = tmp_path / "scores.png"
        rc = main(["metrics", "--pred", str(src), "--truth", str(twin),
                   "--figures", str(fig)])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "frame,iou,pixel_accuracy"
        assert len(lines) == 3 + 2  # three frames, header, mean row
        last = lines[-1].split(",")
        assert last[0] == "mean"
        assert float(last[1]) == 1.0 and float(last[2]) == 1.0
        assert fig.exists()

    def test_no_common_files_exits_2(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.mkdir()
        b.mkdir()
        save_mask_png(disk_mask(8, 8, 4, 4, 2), a / "only_here.png")
        rc = main(["metrics", "--pred", str(a), "--truth", str(b)])
        assert rc == 2


class TestUsage:
    def test_missing_required_flag_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--steps", "2", "--snapshot-every", "1"])
        assert exc.value.code == 1

    def test_unknown_command_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["transmogrify"])
        assert exc.value.code == 1

    def test_nonpositive_dt_exits_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--params", "p", "--init", "i", "--dt", "0",
                  "--steps", "1", "--snapshot-every", "1", "--out", "o"])
        assert exc.value.code == 1

    def test_console_script_installed(self):
        exe = shutil.which("nanovoid")
        assert exe is not None
        proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
        assert "synth" in proc.stdout and "serve" in proc.stdout
