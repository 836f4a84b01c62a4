"""Free-energy functional: bulk partials, chemical potentials, parameters."""

import json

import numpy as np
import pytest

from nanovoid.energy import (PARAM_NAMES, ModelParams, ParamBounds, bulk_partials,
                             chemical_potentials, total_free_energy,
                             variational_derivatives)
from nanovoid.errors import SchemaError
from nanovoid.grid import ScalarField, gradient_sq_array, laplacian_array

THETA = ModelParams(M_v=1.0, M_i=0.7, L=1.3, kappa_v=2.0, kappa_i=1.1, kappa_eta=2.4,
                    A_v=1.2, A_i=0.8, B_v=0.9, B_i=1.4, cv_eq=0.12, ci_eq=0.04,
                    R=3.0, P=0.02)


def naive_bulk(cv, ci, eta, t):
    """Scalar-at-a-time free energy density, the reference formula."""
    h = (eta - 1.0) ** 2
    j = eta**2
    f_s = t.A_v * (cv - t.cv_eq) ** 2 + t.A_i * (ci - t.ci_eq) ** 2
    f_v = t.B_v * (cv - 1.0) ** 2 + t.B_i * ci**2
    return h * f_s + j * f_v


class TestBulkPartials:
    def test_density_matches_naive(self):
        rng = np.random.default_rng(31)
        cv, ci, eta = rng.uniform(-0.5, 1.5, size=(3, 11, 13))
        f, *_ = bulk_partials(cv, ci, eta, THETA)
        want = np.zeros_like(cv)
        for i in range(cv.shape[0]):
            for j in range(cv.shape[1]):
                want[i, j] = naive_bulk(cv[i, j], ci[i, j], eta[i, j], THETA)
        np.testing.assert_allclose(f, want, rtol=1e-14, atol=0)

    def test_partials_match_finite_differences(self):
        # central differences at 1000 random points, relative 1e-6
        rng = np.random.default_rng(32)
        pts = rng.uniform(-0.5, 1.5, size=(1000, 3))
        cv, ci, eta = pts[:, 0], pts[:, 1], pts[:, 2]
        _, dcv, dci, deta = bulk_partials(cv, ci, eta, THETA)
        h = 1e-6
        for got, axis in ((dcv, 0), (dci, 1), (deta, 2)):
            hi = pts.copy()
            lo = pts.copy()
            hi[:, axis] += h
            lo[:, axis] -= h
            fd = (naive_bulk(hi[:, 0], hi[:, 1], hi[:, 2], THETA)
                  - naive_bulk(lo[:, 0], lo[:, 1], lo[:, 2], THETA)) / (2 * h)
            denom = np.maximum(np.abs(fd), 1e-8)
            assert np.max(np.abs(got - fd) / denom) < 1e-6

    def test_stationary_at_solid_well(self):
        # eta=0, cv=cv_eq, ci=ci_eq is a strict minimum of the bulk density
        f, dcv, dci, deta = bulk_partials(
            np.array(THETA.cv_eq), np.array(THETA.ci_eq), np.array(0.0), THETA)
        assert f == 0.0 and dcv == 0.0 and dci == 0.0 and deta == 0.0

    def test_stationary_at_void_well(self):
        f, dcv, dci, deta = bulk_partials(
            np.array(1.0), np.array(0.0), np.array(1.0), THETA)
        assert f == 0.0 and dcv == 0.0 and dci == 0.0 and deta == 0.0

    def test_nonnegative_density(self):
        rng = np.random.default_rng(33)
        cv, ci, eta = rng.uniform(-2, 3, size=(3, 500))
        f, *_ = bulk_partials(cv, ci, eta, THETA)
        assert np.all(f >= 0.0)


class TestChemicalPotentials:
    def test_matches_pixel_formula(self):
        rng = np.random.default_rng(34)
        cv, ci, eta = rng.uniform(0, 1, size=(3, 8, 8))
        dx = 0.7
        mu_v, mu_i, mu_eta = chemical_potentials(cv, ci, eta, THETA, dx)
        _, dcv, dci, deta = bulk_partials(cv, ci, eta, THETA)
        np.testing.assert_allclose(mu_v, dcv - THETA.kappa_v * laplacian_array(cv, dx),
                                   atol=1e-14)
        np.testing.assert_allclose(mu_i, dci - THETA.kappa_i * laplacian_array(ci, dx),
                                   atol=1e-14)
        np.testing.assert_allclose(mu_eta, deta - THETA.kappa_eta * laplacian_array(eta, dx),
                                   atol=1e-14)

    def test_variational_derivatives_wrap_fields(self):
        rng = np.random.default_rng(35)
        dx = 0.5
        fields = [ScalarField(rng.uniform(0, 1, (6, 6)), dx) for _ in range(3)]
        from nanovoid.sim import PhaseState
        state = PhaseState(*fields)
        mu_v, mu_i, mu_eta = variational_derivatives(state, THETA)
        raw = chemical_potentials(fields[0].values, fields[1].values,
                                  fields[2].values, THETA, dx)
        np.testing.assert_array_equal(mu_v.values, raw[0])
        np.testing.assert_array_equal(mu_i.values, raw[1])
        np.testing.assert_array_equal(mu_eta.values, raw[2])
        assert mu_v.dx == dx

    def test_uniform_well_state_has_zero_potentials(self):
        cv = np.full((5, 5), THETA.cv_eq)
        ci = np.full((5, 5), THETA.ci_eq)
        eta = np.zeros((5, 5))
        mu_v, mu_i, mu_eta = chemical_potentials(cv, ci, eta, THETA, 1.0)
        assert np.all(mu_v == 0.0) and np.all(mu_i == 0.0) and np.all(mu_eta == 0.0)


class TestTotalFreeEnergy:
    def test_matches_naive_quadrature(self):
        rng = np.random.default_rng(36)
        dx = 0.8
        cv = rng.uniform(0, 1, (7, 9))
        ci = rng.uniform(0, 1, (7, 9))
        eta = rng.uniform(0, 1, (7, 9))
        from nanovoid.sim import PhaseState
        state = PhaseState(ScalarField(cv, dx), ScalarField(ci, dx), ScalarField(eta, dx))
        got = total_free_energy(state, THETA)
        want = 0.0
        for i in range(7):
            for j in range(9):
                want += naive_bulk(cv[i, j], ci[i, j], eta[i, j], THETA)
        for arr, kap in ((cv, THETA.kappa_v), (ci, THETA.kappa_i), (eta, THETA.kappa_eta)):
            want += 0.5 * kap * gradient_sq_array(arr, dx).sum()
        want *= dx * dx
        assert abs(got - want) <= 1e-10 * max(1.0, abs(want))

    def test_translation_invariance(self):
        rng = np.random.default_rng(37)
        cv, ci, eta = rng.uniform(0, 1, size=(3, 8, 8))
        from nanovoid.sim import PhaseState

        def energy(shift):
            mk = lambda a: ScalarField(np.roll(a, shift, axis=(0, 1)), 1.0)
            return total_free_energy(PhaseState(mk(cv), mk(ci), mk(eta)), THETA)

        np.testing.assert_allclose(energy((0, 0)), energy((3, 5)), rtol=1e-13)

    def test_well_state_has_zero_energy(self):
        from nanovoid.sim import PhaseState
        state = PhaseState(ScalarField(np.full((6, 6), THETA.cv_eq), 1.0),
                           ScalarField(np.full((6, 6), THETA.ci_eq), 1.0),
                           ScalarField(np.zeros((6, 6)), 1.0))
        assert total_free_energy(state, THETA) == 0.0


class TestModelParams:
    def test_canonical_order_and_vector_round_trip(self):
        assert len(PARAM_NAMES) == 14
        vec = THETA.as_vector()
        assert vec.shape == (14,)
        assert ModelParams.from_vector(vec) == THETA
        for i, name in enumerate(PARAM_NAMES):
            assert vec[i] == getattr(THETA, name)

    def test_json_round_trip(self):
        text = THETA.to_json()
        assert text.endswith("\n")
        back = ModelParams.from_json(text)
        assert back == THETA
        doc = json.loads(text)
        assert list(doc) == list(PARAM_NAMES)

    def test_dict_rejects_unknown_and_missing(self):
        d = THETA.to_dict()
        d["bogus"] = 1.0
        with pytest.raises(SchemaError) as e:
            ModelParams.from_dict(d)
        assert e.value.field == "bogus"
        d = THETA.to_dict()
        del d["kappa_i"]
        with pytest.raises(SchemaError) as e:
            ModelParams.from_dict(d)
        assert e.value.field == "kappa_i"
        d = THETA.to_dict()
        d["R"] = "fast"
        with pytest.raises(SchemaError) as e:
            ModelParams.from_dict(d)
        assert e.value.field == "R"

    def test_replace(self):
        t2 = THETA.replace(P=0.5)
        assert t2.P == 0.5 and t2.R == THETA.R
        assert THETA.P == 0.02  # original untouched

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            THETA.replace(M_v=float("nan"))

    def test_physically_valid(self):
        assert THETA.physically_valid()
        assert not THETA.replace(M_v=-1.0).physically_valid()
        assert not THETA.replace(kappa_eta=-0.5).physically_valid()
        assert not THETA.replace(R=-0.1).physically_valid()
        assert not THETA.replace(cv_eq=1.2).physically_valid()
        assert THETA.replace(P=0.0).physically_valid()  # sources may be zero


class TestParamBounds:
    def test_membership_and_accessors(self):
        b = ParamBounds({"M_v": (0.5, 1.5), "R": (0.0, 10.0)})
        assert "M_v" in b and "L" not in b
        assert b.bounded_names() == ("M_v", "R")
        assert b.lo("M_v") == 0.5 and b.hi("R") == 10.0

    def test_satisfied_by(self):
        b = ParamBounds({"M_v": (0.5, 1.5)})
        assert b.satisfied_by(THETA)
        assert not b.satisfied_by(THETA.replace(M_v=2.0))
        assert b.satisfied_by(THETA.replace(M_v=1.5))  # boundary is inside

    def test_validation(self):
        with pytest.raises(SchemaError):
            ParamBounds({"nope": (0.0, 1.0)})
        with pytest.raises(SchemaError):
            ParamBounds({"M_v": (2.0, 1.0)})
        with pytest.raises(SchemaError):
            ParamBounds({"M_v": (0.0, float("inf"))})

    def test_json_round_trip(self):
        b = ParamBounds({"M_v": (0.5, 1.5), "P": (0.0, 0.1)})
        assert ParamBounds.from_json(b.to_json()) == b
        empty = ParamBounds({})
        assert ParamBounds.from_json(empty.to_json()) == empty
