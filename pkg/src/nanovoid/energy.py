"""Free-energy functional: bulk density, partial derivatives, variational derivatives.

The bulk density is a two-well form interpolated by the order parameter:

    h(eta) = (eta - 1)^2        solid-well weight, h(0) = 1, h(1) = 0
    j(eta) = eta^2              void-well weight,  j(0) = 0, j(1) = 1
    f_s = A_v (c_v - cv_eq)^2 + A_i (c_i - ci_eq)^2
    f_v = B_v (c_v - 1)^2 + B_i c_i^2
    f   = h f_s + j f_v

The variational derivative of the full functional (bulk plus square-gradient
terms) is mu_u = df/du - kappa_u lap(u).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields as dataclass_fields

import numpy as np

from .errors import SchemaError
from .grid import ScalarField, gradient_sq_array, laplacian_array

PARAM_NAMES = (
    "M_v", "M_i", "L",
    "kappa_v", "kappa_i", "kappa_eta",
    "A_v", "A_i", "B_v", "B_i",
    "cv_eq", "ci_eq", "R", "P",
)


@dataclass(frozen=True)
class ModelParams:
    """The 14 scalar model parameters.

    M_v, M_i: diffusivities of the conserved fields. L: order-parameter
    mobility. kappa_*: gradient-energy coefficients. A_*, B_*: well
    curvatures. cv_eq, ci_eq: equilibrium solid-phase concentrations.
    R: vacancy-interstitial recombination rate. P: generation rate.

    Values must be finite. Sign constraints (mobilities and curvatures
    nonnegative, equilibria in [0, 1]) hold for physical instances but are
    not enforced here: the learner visits unphysical points transiently.
    """

    M_v: float
    M_i: float
    L: float
    kappa_v: float
    kappa_i: float
    kappa_eta: float
    A_v: float
    A_i: float
    B_v: float
    B_i: float
    cv_eq: float
    ci_eq: float
    R: float
    P: float

    def __post_init__(self):
        for name in PARAM_NAMES:
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not np.isfinite(v):
                raise ValueError(f"parameter {name} must be finite, got {v}")

    def physically_valid(self) -> bool:
        nonneg = ("M_v", "M_i", "L", "kappa_v", "kappa_i", "kappa_eta",
                  "A_v", "A_i", "B_v", "B_i", "R", "P")
        if any(getattr(self, n) < 0.0 for n in nonneg):
            return False
        return 0.0 <= self.cv_eq <= 1.0 and 0.0 <= self.ci_eq <= 1.0

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=np.float64)

    @classmethod
    def from_vector(cls, vec) -> "ModelParams":
        v = np.asarray(vec, dtype=np.float64)
        if v.shape != (len(PARAM_NAMES),):
            raise ValueError(f"expected {len(PARAM_NAMES)} parameters, got shape {v.shape}")
        return cls(**{n: float(v[i]) for i, n in enumerate(PARAM_NAMES)})

    def replace(self, **kw) -> "ModelParams":
        d = self.to_dict()
        d.update(kw)
        return ModelParams(**d)

    def to_dict(self) -> dict:
        return {n: getattr(self, n) for n in PARAM_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        if not isinstance(d, dict):
            raise SchemaError("parameters must be a JSON object", field="params")
        extra = set(d) - set(PARAM_NAMES)
        if extra:
            raise SchemaError(f"unknown parameter {sorted(extra)[0]!r}", field=sorted(extra)[0])
        missing = [n for n in PARAM_NAMES if n not in d]
        if missing:
            raise SchemaError(f"missing parameter {missing[0]!r}", field=missing[0])
        vals = {}
        for n in PARAM_NAMES:
            v = d[n]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SchemaError(f"parameter {n} must be a number", field=n)
            vals[n] = float(v)
        return cls(**vals)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON: {e}", field="params") from e
        return cls.from_dict(d)


# verify the dataclass field order stays in sync with the canonical name list
assert tuple(f.name for f in dataclass_fields(ModelParams)) == PARAM_NAMES


@dataclass(frozen=True)
class ParamBounds:
    """Optional [lo, hi] box per parameter; absent name means unbounded."""

    boxes: dict

    def __post_init__(self):
        clean = {}
        for name, pair in dict(self.boxes).items():
            if name not in PARAM_NAMES:
                raise SchemaError(f"unknown parameter {name!r} in bounds", field=name)
            lo, hi = float(pair[0]), float(pair[1])
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise SchemaError(f"bounds for {name} must be finite", field=name)
            if lo > hi:
                raise SchemaError(f"bounds for {name} must satisfy lo <= hi", field=name)
            clean[name] = (lo, hi)
        object.__setattr__(self, "boxes", clean)

    def __contains__(self, name: str) -> bool:
        return name in self.boxes

    def bounded_names(self) -> tuple:
        return tuple(n for n in PARAM_NAMES if n in self.boxes)

    def lo(self, name: str) -> float:
        return self.boxes[name][0]

    def hi(self, name: str) -> float:
        return self.boxes[name][1]

    def satisfied_by(self, theta: ModelParams) -> bool:
        return all(self.lo(n) <= getattr(theta, n) <= self.hi(n) for n in self.boxes)

    def to_dict(self) -> dict:
        return {n: [self.boxes[n][0], self.boxes[n][1]] for n in PARAM_NAMES if n in self.boxes}

    @classmethod
    def from_dict(cls, d: dict) -> "ParamBounds":
        if not isinstance(d, dict):
            raise SchemaError("bounds must be a JSON object", field="bounds")
        boxes = {}
        for name, pair in d.items():
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise SchemaError(f"bounds for {name} must be a two-element array", field=name)
            boxes[name] = (pair[0], pair[1])
        return cls(boxes)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ParamBounds":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON: {e}", field="bounds") from e
        return cls.from_dict(d)


def bulk_partials(cv, ci, eta, theta: ModelParams):
    """Bulk density f and its partials (f, df_dcv, df_dci, df_deta).

    Accepts scalars or arrays of any matching shape; broadcasts elementwise.
    """
    chi = eta - 1.0
    h = chi * chi
    j = eta * eta
    dv = cv - theta.cv_eq
    di = ci - theta.ci_eq
    wv = cv - 1.0
    f_s = theta.A_v * dv * dv + theta.A_i * di * di
    f_v = theta.B_v * wv * wv + theta.B_i * ci * ci
    f = h * f_s + j * f_v
    df_dcv = 2.0 * h * theta.A_v * dv + 2.0 * j * theta.B_v * wv
    df_dci = 2.0 * h * theta.A_i * di + 2.0 * j * theta.B_i * ci
    df_deta = 2.0 * chi * f_s + 2.0 * eta * f_v
    return f, df_dcv, df_dci, df_deta


def chemical_potentials(cv: np.ndarray, ci: np.ndarray, eta: np.ndarray,
                        theta: ModelParams, dx: float):
    """mu_u = df/du - kappa_u lap(u) on raw arrays (trailing axes periodic)."""
    _, df_dcv, df_dci, df_deta = bulk_partials(cv, ci, eta, theta)
    mu_v = df_dcv - theta.kappa_v * laplacian_array(cv, dx)
    mu_i = df_dci - theta.kappa_i * laplacian_array(ci, dx)
    mu_eta = df_deta - theta.kappa_eta * laplacian_array(eta, dx)
    return mu_v, mu_i, mu_eta


def variational_derivatives(state, theta: ModelParams):
    """(mu_v, mu_i, mu_eta) as ScalarFields for a phase state."""
    dx = state.c_v.dx
    mu_v, mu_i, mu_eta = chemical_potentials(
        state.c_v.values, state.c_i.values, state.eta.values, theta, dx)
    return ScalarField(mu_v, dx), ScalarField(mu_i, dx), ScalarField(mu_eta, dx)


def total_free_energy(state, theta: ModelParams) -> float:
    """Sum over pixels of [f + sum_u (kappa_u/2) |grad u|^2] dx^2."""
    cv, ci, eta = state.c_v.values, state.c_i.values, state.eta.values
    dx = state.c_v.dx
    f, _, _, _ = bulk_partials(cv, ci, eta, theta)
    dens = (f
            + 0.5 * theta.kappa_v * gradient_sq_array(cv, dx)
            + 0.5 * theta.kappa_i * gradient_sq_array(ci, dx)
            + 0.5 * theta.kappa_eta * gradient_sq_array(eta, dx))
    return float(np.sum(dens) * dx * dx)
