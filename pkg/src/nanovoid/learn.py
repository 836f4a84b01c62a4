"""Parameter identification by gradient descent through the unrolled simulator.

The loss has three parts: per-pixel mean squared error between the simulated
order parameter after k steps and the target extracted from an annotation
mask, plus two hinge penalties keeping bounded parameters inside expert
boxes:

    total = mismatch + lambda1 sum max(0, lo - theta) + lambda2 sum max(0, theta - hi)

Two gradient modes: central finite differences over the 14 parameters (the
reference), and a hand-written reverse accumulation through the unrolled
steps that must agree with it to 1e-3 relative.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import distance_transform_edt

from .energy import PARAM_NAMES, ModelParams, ParamBounds
from .errors import AbortedError, DimensionMismatchError, DivergedError, GradientUnavailable
from .grid import Mask, ScalarField, laplacian_array, threshold
from .sim import PhaseState, arrays_diverged, step_arrays

# default choice of which 9 of the 14 parameters carry expert boxes
DEFAULT_BOUNDED = ("M_v", "M_i", "L", "kappa_v", "kappa_i", "kappa_eta", "A_v", "B_v", "R")

GRADIENT_MODES = ("central_fd", "adjoint")


@dataclass(frozen=True)
class LossReport:
    """One loss evaluation; penalty fields are already lambda-weighted."""

    mismatch: float
    penalty_lo: float
    penalty_hi: float
    total: float
    diverged: bool = False


@dataclass(frozen=True)
class TrainConfig:
    """Training problem: annotated pairs, bounds, penalty weights, optimizer knobs.

    Each pair is (init, target, k): init is a PhaseState or a Mask, target a
    Mask, k the number of simulation steps between them. interface_width and
    dx control state extraction from masks.
    """

    pairs: tuple
    bounds: ParamBounds
    lambda1: float = 1e3
    lambda2: float = 1e3
    learning_rate: float = 0.05
    iterations: int = 100
    dt: float = 0.005
    gradient_mode: str = "adjoint"
    seed: int = 0
    interface_width: float = 2.0
    dx: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if not self.pairs:
            raise ValueError("pairs must be non-empty")
        for init, target, k in self.pairs:
            if not isinstance(init, (PhaseState, Mask)):
                raise ValueError("pair init must be a PhaseState or Mask")
            if not isinstance(target, Mask):
                raise ValueError("pair target must be a Mask")
            if int(k) < 1:
                raise ValueError("pair k must be >= 1")
        if self.lambda1 < 0 or self.lambda2 < 0 or not np.isfinite(self.lambda1 + self.lambda2):
            raise ValueError("lambda1 and lambda2 must be finite and >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.gradient_mode not in GRADIENT_MODES:
            raise ValueError(f"gradient_mode must be one of {GRADIENT_MODES}")
        if not self.interface_width > 0:
            raise ValueError("interface_width must be positive")
        if not self.dx > 0:
            raise ValueError("dx must be positive")


@functools.lru_cache(maxsize=256)
def _eta_from_mask(mask: Mask, interface_width: float, dx: float) -> np.ndarray:
    """tanh profile of the signed distance to the mask boundary (read-only).

    Distances are Euclidean with periodic wrap (computed on a 3x3 tiling),
    offset half a pixel so the zero level sits between pixel centers. An
    all-empty mask maps to eta = 0, all-full to eta = 1.
    """
    a = mask.to_array()
    if not a.any():
        eta = np.zeros(a.shape, dtype=np.float64)
    elif a.all():
        eta = np.ones(a.shape, dtype=np.float64)
    else:
        h, w = a.shape
        tiled = np.tile(a, (3, 3))
        d_in = distance_transform_edt(tiled)[h:2 * h, w:2 * w]
        d_out = distance_transform_edt(~tiled)[h:2 * h, w:2 * w]
        d = np.where(a, d_in - 0.5, -(d_out - 0.5)) * dx
        eta = 0.5 * (1.0 + np.tanh(d / interface_width))
    eta.setflags(write=False)
    return eta


def extract_state(mask: Mask, theta: ModelParams, interface_width: float,
                  dx: float = 1.0) -> PhaseState:
    """Deterministic phase state for an annotation mask.

    eta is the tanh distance profile; the concentrations interpolate
    between solid equilibrium and void values: c_v = cv_eq + (1 - cv_eq) eta,
    c_i = ci_eq (1 - eta). Time is 0.
    """
    if not interface_width > 0:
        raise ValueError("interface_width must be positive")
    eta = _eta_from_mask(mask, float(interface_width), float(dx))
    cv = theta.cv_eq + (1.0 - theta.cv_eq) * eta
    ci = theta.ci_eq * (1.0 - eta)
    return PhaseState(ScalarField(cv, dx), ScalarField(ci, dx),
                      ScalarField(eta.copy(), dx), time=0.0)


class _Group:
    """Pairs sharing (k, shape, dx), stacked along a batch axis."""

    __slots__ = ("k", "dx", "eta0", "cv0_fixed", "ci0_fixed", "from_mask", "eta_t", "count")

    def __init__(self, k, dx, eta0, cv0_fixed, ci0_fixed, from_mask, eta_t):
        self.k = k
        self.dx = dx
        self.eta0 = eta0              # (B,H,W)
        self.cv0_fixed = cv0_fixed    # (B,H,W), zeros on mask-init rows
        self.ci0_fixed = ci0_fixed
        self.from_mask = from_mask    # (B,1,1) float: 1.0 for mask inits
        self.eta_t = eta_t
        self.count = eta0.shape[0]

    def initial_fields(self, theta: ModelParams):
        flag = self.from_mask
        cv = flag * (theta.cv_eq + (1.0 - theta.cv_eq) * self.eta0) + (1.0 - flag) * self.cv0_fixed
        ci = flag * (theta.ci_eq * (1.0 - self.eta0)) + (1.0 - flag) * self.ci0_fixed
        return cv, ci, self.eta0


def _prepare(config: TrainConfig) -> list:
    by_key = {}
    for init, target, k in config.pairs:
        k = int(k)
        if isinstance(init, Mask):
            eta0 = _eta_from_mask(init, config.interface_width, config.dx)
            cv0 = None
            dx = config.dx
            shape = eta0.shape
        else:
            eta0 = init.eta.values
            cv0 = (init.c_v.values, init.c_i.values)
            dx = init.dx
            shape = eta0.shape
        eta_t = _eta_from_mask(target, config.interface_width, dx)
        if eta_t.shape != shape:
            raise DimensionMismatchError(
                f"pair target shape {eta_t.shape} differs from init shape {shape}")
        by_key.setdefault((k, shape, dx), []).append((eta0, cv0, eta_t))

    groups = []
    for (k, shape, dx), rows in sorted(by_key.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
        b = len(rows)
        eta0 = np.stack([r[0] for r in rows])
        zeros = np.zeros(shape, dtype=np.float64)
        cv0 = np.stack([zeros if r[1] is None else r[1][0] for r in rows])
        ci0 = np.stack([zeros if r[1] is None else r[1][1] for r in rows])
        flag = np.array([1.0 if r[1] is None else 0.0 for r in rows]).reshape(b, 1, 1)
        eta_t = np.stack([r[2] for r in rows])
        groups.append(_Group(k, dx, eta0, cv0, ci0, flag, eta_t))
    return groups


def _penalty_terms(theta: ModelParams, config: TrainConfig):
    lo_sum = 0.0
    hi_sum = 0.0
    for name in config.bounds.bounded_names():
        v = getattr(theta, name)
        lo_sum += max(0.0, config.bounds.lo(name) - v)
        hi_sum += max(0.0, v - config.bounds.hi(name))
    return config.lambda1 * lo_sum, config.lambda2 * hi_sum


def _forward_group(group: _Group, theta: ModelParams, dt: float, record: bool):
    cv, ci, eta = group.initial_fields(theta)
    states = [(cv, ci, eta)] if record else None
    for _ in range(group.k):
        cv, ci, eta = step_arrays(cv, ci, eta, theta, dt, group.dx)
        if arrays_diverged(cv, ci, eta):
            return None, states
        if record:
            states.append((cv, ci, eta))
    return (cv, ci, eta), states


def loss(theta: ModelParams, config: TrainConfig, _groups=None) -> LossReport:
    """Evaluate the full loss; divergence yields an infinite-total report."""
    groups = _prepare(config) if _groups is None else _groups
    total_pairs = sum(g.count for g in groups)
    p_lo, p_hi = _penalty_terms(theta, config)
    sq_sum = 0.0
    for g in groups:
        final, _ = _forward_group(g, theta, config.dt, record=False)
        if final is None:
            return LossReport(math.inf, p_lo, p_hi, math.inf, diverged=True)
        diff = final[2] - g.eta_t
        # one mean per pair, summed, then normalized by the pair count
        sq_sum += float(np.sum(np.mean(diff * diff, axis=(-2, -1))))
    mismatch = sq_sum / total_pairs
    return LossReport(mismatch, p_lo, p_hi, mismatch + p_lo + p_hi, diverged=False)


def _penalty_grad(theta: ModelParams, config: TrainConfig) -> np.ndarray:
    g = np.zeros(len(PARAM_NAMES))
    for idx, name in enumerate(PARAM_NAMES):
        if name in config.bounds:
            v = getattr(theta, name)
            if v < config.bounds.lo(name):
                g[idx] -= config.lambda1
            if v > config.bounds.hi(name):
                g[idx] += config.lambda2
    return g


def _grad_central_fd(theta: ModelParams, config: TrainConfig, groups) -> np.ndarray:
    base = theta.as_vector()
    g = np.zeros(len(PARAM_NAMES))
    for idx, name in enumerate(PARAM_NAMES):
        h = max(1e-6, 1e-6 * abs(base[idx]))
        hi_v = base.copy()
        hi_v[idx] += h
        lo_v = base.copy()
        lo_v[idx] -= h
        r_hi = loss(ModelParams.from_vector(hi_v), config, _groups=groups)
        r_lo = loss(ModelParams.from_vector(lo_v), config, _groups=groups)
        if r_hi.diverged or r_lo.diverged:
            raise GradientUnavailable(
                f"loss diverged while perturbing {name}", component=name)
        g[idx] = (r_hi.total - r_lo.total) / (2.0 * h)
    return g


def _grad_adjoint_group(group: _Group, theta: ModelParams, dt: float,
                        total_pairs: int) -> np.ndarray:
    """Reverse accumulation of d(mismatch)/d(theta) for one batched group."""
    final, states = _forward_group(group, theta, dt, record=True)
    if final is None:
        raise GradientUnavailable("forward simulation diverged during adjoint pass")
    dx = group.dx
    n_px = group.eta0.shape[-2] * group.eta0.shape[-1]
    scale = 2.0 / (n_px * total_pairs)

    g_cv = np.zeros_like(group.eta0)
    g_ci = np.zeros_like(group.eta0)
    g_eta = scale * (final[2] - group.eta_t)

    acc = {name: 0.0 for name in PARAM_NAMES}
    for t in range(group.k - 1, -1, -1):
        cv, ci, eta = states[t]
        chi = eta - 1.0
        h2 = chi * chi
        j2 = eta * eta
        dv = cv - theta.cv_eq
        di = ci - theta.ci_eq
        wv = cv - 1.0
        f_s = theta.A_v * dv * dv + theta.A_i * di * di
        f_w = theta.B_v * wv * wv + theta.B_i * ci * ci

        lap_cv = laplacian_array(cv, dx)
        lap_ci = laplacian_array(ci, dx)
        lap_eta = laplacian_array(eta, dx)
        mu_v = (2.0 * h2 * theta.A_v * dv + 2.0 * j2 * theta.B_v * wv) - theta.kappa_v * lap_cv
        mu_i = (2.0 * h2 * theta.A_i * di + 2.0 * j2 * theta.B_i * ci) - theta.kappa_i * lap_ci
        mu_e = (2.0 * chi * f_s + 2.0 * eta * f_w) - theta.kappa_eta * lap_eta

        g_sum = g_cv + g_ci
        acc["M_v"] += dt * float(np.sum(g_cv * laplacian_array(mu_v, dx)))
        acc["M_i"] += dt * float(np.sum(g_ci * laplacian_array(mu_i, dx)))
        acc["L"] -= dt * float(np.sum(g_eta * mu_e))
        acc["R"] -= dt * float(np.sum(g_sum * cv * ci))
        acc["P"] += dt * float(np.sum(g_sum))

        # adjoints of the three potentials
        gmu_v = dt * theta.M_v * laplacian_array(g_cv, dx)
        gmu_i = dt * theta.M_i * laplacian_array(g_ci, dx)
        gmu_e = -dt * theta.L * g_eta

        acc["kappa_v"] -= float(np.sum(gmu_v * lap_cv))
        acc["kappa_i"] -= float(np.sum(gmu_i * lap_ci))
        acc["kappa_eta"] -= float(np.sum(gmu_e * lap_eta))
        acc["A_v"] += float(np.sum(gmu_v * 2.0 * h2 * dv + gmu_e * 2.0 * chi * dv * dv))
        acc["A_i"] += float(np.sum(gmu_i * 2.0 * h2 * di + gmu_e * 2.0 * chi * di * di))
        acc["B_v"] += float(np.sum(gmu_v * 2.0 * j2 * wv + gmu_e * 2.0 * eta * wv * wv))
        acc["B_i"] += float(np.sum(gmu_i * 2.0 * j2 * ci + gmu_e * 2.0 * eta * ci * ci))
        acc["cv_eq"] += float(np.sum(gmu_v * (-2.0 * h2 * theta.A_v)
                                     + gmu_e * (-4.0 * chi * theta.A_v * dv)))
        acc["ci_eq"] += float(np.sum(gmu_i * (-2.0 * h2 * theta.A_i)
                                     + gmu_e * (-4.0 * chi * theta.A_i * di)))

        # bulk Hessian entries (d2f/du du'), the cv-ci cross term is zero
        h_vv = 2.0 * h2 * theta.A_v + 2.0 * j2 * theta.B_v
        h_ii = 2.0 * h2 * theta.A_i + 2.0 * j2 * theta.B_i
        h_ve = 4.0 * chi * theta.A_v * dv + 4.0 * eta * theta.B_v * wv
        h_ie = 4.0 * chi * theta.A_i * di + 4.0 * eta * theta.B_i * ci
        h_ee = 2.0 * f_s + 2.0 * f_w

        recomb_v = dt * theta.R * ci * g_sum
        recomb_i = dt * theta.R * cv * g_sum

        g_cv_new = (g_cv + h_vv * gmu_v + h_ve * gmu_e
                    - theta.kappa_v * laplacian_array(gmu_v, dx) - recomb_v)
        g_ci_new = (g_ci + h_ii * gmu_i + h_ie * gmu_e
                    - theta.kappa_i * laplacian_array(gmu_i, dx) - recomb_i)
        g_eta_new = (g_eta + h_ve * gmu_v + h_ie * gmu_i + h_ee * gmu_e
                     - theta.kappa_eta * laplacian_array(gmu_e, dx))
        g_cv, g_ci, g_eta = g_cv_new, g_ci_new, g_eta_new

    # initial extraction: cv0 = cv_eq + (1 - cv_eq) eta0, ci0 = ci_eq (1 - eta0)
    one_m_eta0 = group.from_mask * (1.0 - group.eta0)
    acc["cv_eq"] += float(np.sum(g_cv * one_m_eta0))
    acc["ci_eq"] += float(np.sum(g_ci * one_m_eta0))

    return np.array([acc[name] for name in PARAM_NAMES])


def grad(theta: ModelParams, config: TrainConfig, _groups=None) -> np.ndarray:
    """d(total)/d(theta) as a vector in canonical parameter order."""
    groups = _prepare(config) if _groups is None else _groups
    if config.gradient_mode == "central_fd":
        return _grad_central_fd(theta, config, groups)
    total_pairs = sum(g.count for g in groups)
    g = _penalty_grad(theta, config)
    for group in groups:
        g = g + _grad_adjoint_group(group, theta, config.dt, total_pairs)
    return g


_DESCENT_EPS = 1e-12  # normalization floor, keeps direction finite at g = 0
_MAX_BACKTRACKS = 30
_MAX_LR_HALVINGS = 6
_ABORT_STREAK = 10


def fit(config: TrainConfig, theta_init: ModelParams, on_iteration=None):
    """Minimize the loss; returns (theta_final, history of LossReports).

    Each iteration takes a per-parameter normalized gradient step
    (g / sqrt(g^2 + eps^2), a memoryless RMS scaling) with backtracking so
    the total never increases. Fully deterministic. history has
    iterations + 1 entries, the first being the loss at theta_init.
    on_iteration(i, n, report) is called after each iteration; it must not
    mutate anything the optimizer reads.
    """
    groups = _prepare(config)
    theta = theta_init
    report = loss(theta, config, _groups=groups)
    if report.diverged:
        raise ValueError("loss diverges at theta_init")
    history = [report]

    base_lr = config.learning_rate
    alpha_prev = base_lr
    halvings = 0
    diverged_streak = 0

    for iteration in range(1, config.iterations + 1):
        try:
            g = grad(theta, config, _groups=groups)
        except GradientUnavailable:
            g = None

        accepted = False
        all_diverged = True
        if g is not None:
            direction = g / np.sqrt(g * g + _DESCENT_EPS * _DESCENT_EPS)
            alpha = min(base_lr, 2.0 * alpha_prev)
            vec = theta.as_vector()
            for _bt in range(_MAX_BACKTRACKS):
                candidate = ModelParams.from_vector(vec - alpha * direction)
                cand_report = loss(candidate, config, _groups=groups)
                if not cand_report.diverged:
                    all_diverged = False
                    if cand_report.total <= report.total:
                        theta, report = candidate, cand_report
                        alpha_prev = alpha
                        accepted = True
                        break
                alpha *= 0.5

        if accepted:
            diverged_streak = 0
        else:
            if g is None or all_diverged:
                diverged_streak += 1
                if halvings < _MAX_LR_HALVINGS:
                    base_lr *= 0.5
                    halvings += 1
                if diverged_streak >= _ABORT_STREAK:
                    raise AbortedError(
                        f"loss diverged for {diverged_streak} consecutive iterations "
                        f"after {halvings} learning-rate halvings")
            else:
                diverged_streak = 0
        history.append(report)
        if on_iteration is not None:
            on_iteration(iteration, config.iterations, report)
        if not accepted and g is not None and not all_diverged:
            # full backtracking sweep found no acceptable step without any
            # divergence: theta, the rate state and the deterministic
            # gradient are all unchanged, so every further iteration would
            # replay this one exactly; emit the remaining reports directly
            for rest in range(iteration + 1, config.iterations + 1):
                history.append(report)
                if on_iteration is not None:
                    on_iteration(rest, config.iterations, report)
            break

    return theta, history


def predict_masks(state0: PhaseState, theta: ModelParams, dt: float,
                  step_list, threshold_t: float = 0.5) -> list:
    """Thresholded eta masks at the listed step indices of one forward run."""
    steps = [int(s) for s in step_list]
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise ValueError("step_list must be strictly increasing")
    if steps and steps[0] < 0:
        raise ValueError("step indices must be >= 0")
    dx = state0.dx
    cv, ci, eta = state0.c_v.values, state0.c_i.values, state0.eta.values
    masks = []
    current = 0
    for target in steps:
        while current < target:
            cv, ci, eta = step_arrays(cv, ci, eta, theta, dt, dx)
            current += 1
            if arrays_diverged(cv, ci, eta):
                raise DivergedError(f"simulation diverged at step {current}", step=current)
        masks.append(threshold(ScalarField(eta, dx), threshold_t))
    return masks


def pixel_accuracy(a: Mask, b: Mask) -> float:
    """Fraction of pixels whose membership agrees."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatchError(
            f"mask dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}")
    return float(np.mean(a.to_array() == b.to_array()))


def box_bounds(theta: ModelParams, frac: float = 0.5,
               names=DEFAULT_BOUNDED) -> ParamBounds:
    """Boxes of width +-frac around the given parameter values."""
    boxes = {}
    for name in names:
        v = getattr(theta, name)
        lo, hi = v - frac * abs(v), v + frac * abs(v)
        boxes[name] = (lo, hi)
    return ParamBounds(boxes)


def default_init(bounds: ParamBounds) -> ModelParams:
    """Box midpoints for bounded parameters, 1.0 for unbounded ones."""
    vals = {}
    for name in PARAM_NAMES:
        if name in bounds:
            vals[name] = 0.5 * (bounds.lo(name) + bounds.hi(name))
        else:
            vals[name] = 1.0
    return ModelParams(**vals)
