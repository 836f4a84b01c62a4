"""Binary field/state files, PNG masks, trajectory directories."""

import json
import struct

import numpy as np
import pytest

from nanovoid.energy import ModelParams
from nanovoid.errors import SchemaError
from nanovoid.grid import Mask, ScalarField
from nanovoid.sim import PhaseState, Trajectory
from nanovoid.storage import (field_to_bytes, load_field, load_gray_png, load_mask_png,
                              load_state, load_trajectory, save_field, save_gray_png,
                              save_mask_png, save_state, save_trajectory,
                              state_to_bytes)

THETA = ModelParams(M_v=1.0, M_i=1.0, L=1.0, kappa_v=2.0, kappa_i=2.0, kappa_eta=2.0,
                    A_v=1.0, A_i=1.0, B_v=1.0, B_i=1.0, cv_eq=0.1, ci_eq=0.02,
                    R=5.0, P=0.01)


def random_state(rng, h=6, w=5, dx=0.5, time=0.0):
    mk = lambda: ScalarField(rng.uniform(0, 1, (h, w)), dx)
    return PhaseState(mk(), mk(), mk(), time=time)


class TestFieldFile:
    def test_layout(self):
        v = np.arange(20, dtype=np.float64).reshape(4, 5)
        raw = field_to_bytes(ScalarField(v, 2.5))
        assert raw[:4] == b"PFF1"
        w, h = struct.unpack_from("<II", raw, 4)
        assert (w, h) == (5, 4)
        (dx,) = struct.unpack_from("<d", raw, 12)
        assert dx == 2.5
        payload = np.frombuffer(raw, dtype="<f8", offset=20).reshape(4, 5)
        np.testing.assert_array_equal(payload, v)
        assert len(raw) == 20 + 20 * 8

    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(41)
        f = ScalarField(rng.normal(size=(9, 13)), 0.125)
        p = tmp_path / "f.pff"
        save_field(f, p)
        back = load_field(p)
        assert np.array_equal(back.values, f.values)  # exact, not approx
        assert back.dx == f.dx

    def test_rejects_corrupt(self, tmp_path):
        p = tmp_path / "bad.pff"
        p.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(SchemaError):
            load_field(p)
        rng = np.random.default_rng(42)
        f = ScalarField(rng.normal(size=(4, 4)), 1.0)
        save_field(f, p)
        p.write_bytes(p.read_bytes()[:-8])  # truncated payload
        with pytest.raises(SchemaError):
            load_field(p)


class TestStateFile:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(43)
        s = random_state(rng, time=1.75)
        p = tmp_path / "s.pfs"
        save_state(s, p)
        back = load_state(p)
        assert np.array_equal(back.c_v.values, s.c_v.values)
        assert np.array_equal(back.c_i.values, s.c_i.values)
        assert np.array_equal(back.eta.values, s.eta.values)
        assert back.time == s.time and back.dx == s.dx

    def test_layout(self):
        rng = np.random.default_rng(44)
        s = random_state(rng, h=4, w=4, dx=1.0, time=3.0)
        raw = state_to_bytes(s)
        assert raw[:4] == b"PFS1"
        assert len(raw) == 4 + 4 + 4 + 8 + 8 + 3 * 16 * 8
        (t,) = struct.unpack_from("<d", raw, 20)
        assert t == 3.0


class TestPng:
    def test_gray_round_trip(self, tmp_path):
        rng = np.random.default_rng(45)
        img = rng.integers(0, 256, size=(7, 11), dtype=np.uint8)
        p = tmp_path / "g.png"
        save_gray_png(img, p)
        np.testing.assert_array_equal(load_gray_png(p), img)

    def test_mask_round_trip(self, tmp_path):
        rng = np.random.default_rng(46)
        m = Mask.from_array(rng.random((9, 6)) < 0.4)
        p = tmp_path / "m.png"
        save_mask_png(m, p)
        assert load_mask_png(p) == m


class TestTrajectoryDir:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(47)
        dt = 0.25
        entries = tuple(
            (i, random_state(rng, time=i * dt)) for i in (0, 2, 4, 7))
        traj = Trajectory(entries, dt, THETA)
        d = tmp_path / "traj"
        save_trajectory(traj, d)
        names = sorted(p.name for p in d.iterdir())
        assert names == ["state_000000.pfs", "state_000002.pfs",
                         "state_000004.pfs", "state_000007.pfs", "trajectory.json"]
        manifest = json.loads((d / "trajectory.json").read_text())
        assert manifest["steps"] == [0, 2, 4, 7]
        assert manifest["dt"] == dt
        back = load_trajectory(d)
        assert back.dt == dt and back.theta == THETA
        assert back.step_indices == (0, 2, 4, 7)
        for (i, s), (j, t) in zip(traj.entries, back.entries):
            assert i == j
            assert np.array_equal(s.eta.values, t.eta.values)
            assert s.time == t.time

    def test_rejects_bad_manifest(self, tmp_path):
        d = tmp_path / "traj"
        d.mkdir()
        (d / "trajectory.json").write_text(json.dumps({"dt": 0.1}))
        with pytest.raises(SchemaError):
            load_trajectory(d)
