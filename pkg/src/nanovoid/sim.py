"""Forward-Euler integration of the coupled phase-field equations.

c_v and c_i follow conserved (Cahn-Hilliard) dynamics with recombination
and generation source terms; eta follows non-conserved (Allen-Cahn)
dynamics:

    dc_v/dt = M_v lap(mu_v) - R c_v c_i + P
    dc_i/dt = M_i lap(mu_i) - R c_v c_i + P
    deta/dt = -L mu_eta

Mobilities are constant scalars, so div(M grad mu) reduces to M lap(mu).
Setting R = P = 0 recovers the textbook equations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import ModelParams, chemical_potentials
from .errors import DivergedError
from .grid import ScalarField, laplacian_array, threshold

DIVERGENCE_LIMIT = 10.0  # far outside the physical [0, 1] band
DT_CAP = 0.1


@dataclass(frozen=True)
class PhaseState:
    """The three coupled fields at one instant, on a shared grid."""

    c_v: ScalarField
    c_i: ScalarField
    eta: ScalarField
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "time", float(self.time))
        if not (self.c_v.same_shape(self.c_i) and self.c_v.same_shape(self.eta)):
            raise ValueError("c_v, c_i and eta must share shape and dx")

    @property
    def dx(self) -> float:
        return self.c_v.dx

    @property
    def shape(self) -> tuple:
        return self.c_v.values.shape


@dataclass(frozen=True)
class Trajectory:
    """Snapshots of a single run: (step index, state) pairs plus dt and theta."""

    entries: tuple
    dt: float
    theta: ModelParams

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "dt", float(self.dt))
        prev = -1
        for step_index, state in self.entries:
            if step_index <= prev:
                raise ValueError("snapshot step indices must be strictly increasing")
            if state.time != step_index * self.dt:
                raise ValueError("snapshot time must equal step index times dt")
            prev = step_index

    @property
    def step_indices(self) -> tuple:
        return tuple(i for i, _ in self.entries)

    @property
    def states(self) -> tuple:
        return tuple(s for _, s in self.entries)

    def final_state(self) -> PhaseState:
        return self.entries[-1][1]


def _amax(a: np.ndarray) -> float:
    return float(np.max(np.abs(a)))


def arrays_diverged(*arrays) -> bool:
    """True if any array holds a non-finite value or one with |v| > 10."""
    for a in arrays:
        m = _amax(a)
        if not np.isfinite(m) or m > DIVERGENCE_LIMIT:
            return True
    return False


def step_arrays(cv: np.ndarray, ci: np.ndarray, eta: np.ndarray,
                theta: ModelParams, dt: float, dx: float):
    """One explicit Euler step on raw arrays; no divergence check."""
    mu_v, mu_i, mu_eta = chemical_potentials(cv, ci, eta, theta, dx)
    recomb = theta.R * (cv * ci)
    cv2 = cv + dt * (theta.M_v * laplacian_array(mu_v, dx) - recomb + theta.P)
    ci2 = ci + dt * (theta.M_i * laplacian_array(mu_i, dx) - recomb + theta.P)
    eta2 = eta - dt * theta.L * mu_eta
    return cv2, ci2, eta2


def step(state: PhaseState, theta: ModelParams, dt: float) -> PhaseState:
    """Advance one time step; raises DivergedError on blow-up."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    dx = state.dx
    cv2, ci2, eta2 = step_arrays(
        state.c_v.values, state.c_i.values, state.eta.values, theta, dt, dx)
    if arrays_diverged(cv2, ci2, eta2):
        raise DivergedError(f"field value left [-{DIVERGENCE_LIMIT}, {DIVERGENCE_LIMIT}] "
                            f"or became non-finite (dt={dt} too large?)")
    return PhaseState(ScalarField(cv2, dx), ScalarField(ci2, dx), ScalarField(eta2, dx),
                      time=state.time + dt)


def stable_dt(theta: ModelParams, dx: float, dt_cap: float = DT_CAP) -> float:
    """Explicit-Euler stability bound for the stiffest linearized modes.

    Fourth-order (conserved) terms bound dt by dx^4 / (32 max(M kappa));
    second-order (order parameter) by dx^2 / (8 L kappa_eta).
    """
    if not dx > 0.0:
        raise ValueError("dx must be positive")
    eps = 1e-12
    fourth = max(theta.M_v * theta.kappa_v, theta.M_i * theta.kappa_i, eps)
    second = max(theta.L * theta.kappa_eta, eps)
    return min(dx ** 4 / (32.0 * fourth), dx ** 2 / (8.0 * second), dt_cap)


def run(state0: PhaseState, theta: ModelParams, dt: float,
        n_steps: int, snapshot_every: int) -> Trajectory:
    """Integrate n_steps, snapshotting at steps 0, snapshot_every, ..., n_steps.

    Snapshot times are set to step_index * dt exactly (no accumulated
    rounding), keeping the trajectory invariant independent of n_steps.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if snapshot_every < 1:
        raise ValueError("snapshot_every must be >= 1")
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    dx = state0.dx
    cv = state0.c_v.values
    ci = state0.c_i.values
    eta = state0.eta.values

    def snap(i, cv, ci, eta):
        return (i, PhaseState(ScalarField(cv, dx), ScalarField(ci, dx),
                              ScalarField(eta, dx), time=i * dt))

    entries = [snap(0, cv, ci, eta)]
    for i in range(1, n_steps + 1):
        cv, ci, eta = step_arrays(cv, ci, eta, theta, dt, dx)
        if arrays_diverged(cv, ci, eta):
            raise DivergedError(f"simulation diverged at step {i}", step=i)
        if i % snapshot_every == 0 or i == n_steps:
            entries.append(snap(i, cv, ci, eta))
    return Trajectory(tuple(entries), dt, theta)


def render_frame(state: PhaseState, channel: str,
                 lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Map one field linearly from [lo, hi] to 8-bit gray, round half up."""
    fields = {"cv": state.c_v, "ci": state.c_i, "eta": state.eta}
    if channel not in fields:
        raise ValueError(f"channel must be one of {sorted(fields)}, got {channel!r}")
    if not hi > lo:
        raise ValueError("hi must exceed lo")
    t = (fields[channel].values - lo) / (hi - lo)
    return np.clip(np.floor(t * 255.0 + 0.5), 0.0, 255.0).astype(np.uint8)


def two_void_state(seed: int, theta: ModelParams, side: int = 128, dx: float = 1.0,
                   radii: tuple = (10.0, 16.0), interface_width: float | None = None) -> PhaseState:
    """Initial condition: two circular voids of distinct radii, seeded centers.

    eta carries a tanh profile of the signed distance to each disk (positive
    inside), c_v = cv_eq + (1 - cv_eq) eta, c_i = ci_eq (1 - eta).
    """
    w = 2.0 * dx if interface_width is None else float(interface_width)
    rng = np.random.default_rng(seed)
    r1, r2 = float(radii[0]), float(radii[1])
    margin = max(r1, r2) + 4.0 * w
    lo, hi = margin, side - margin
    if not hi > lo:
        raise ValueError("grid too small for the requested void radii")
    c1 = rng.uniform(lo, hi, size=2)
    for _ in range(1000):
        c2 = rng.uniform(lo, hi, size=2)
        dy = abs(c1[0] - c2[0])
        dxx = abs(c1[1] - c2[1])
        dy = min(dy, side - dy)
        dxx = min(dxx, side - dxx)
        if np.hypot(dy, dxx) >= r1 + r2 + 8.0 * w:
            break
    else:
        raise ValueError("could not place two separated voids")

    yy, xx = np.meshgrid(np.arange(side, dtype=np.float64),
                         np.arange(side, dtype=np.float64), indexing="ij")

    def signed_dist(center, r):
        # periodic minimal-image distance to the disk boundary
        dy = np.abs(yy - center[0])
        dxs = np.abs(xx - center[1])
        dy = np.minimum(dy, side - dy)
        dxs = np.minimum(dxs, side - dxs)
        return r - np.hypot(dy, dxs)

    d = np.maximum(signed_dist(c1, r1), signed_dist(c2, r2)) * dx
    eta = 0.5 * (1.0 + np.tanh(d / w))
    cv = theta.cv_eq + (1.0 - theta.cv_eq) * eta
    ci = theta.ci_eq * (1.0 - eta)
    return PhaseState(ScalarField(cv, dx), ScalarField(ci, dx), ScalarField(eta, dx), time=0.0)


def synth_two_voids(seed: int, theta_star: ModelParams, n_steps: int,
                    snapshot_every: int, dt: float | None = None,
                    side: int = 128, dx: float = 1.0,
                    radii: tuple = (10.0, 16.0),
                    interface_width: float | None = None):
    """Synthesize a two-void trajectory plus per-snapshot masks.

    dt defaults to half the stability bound. Masks are threshold(eta, 0.5)
    at each snapshot. Deterministic for a given seed.
    """
    if not theta_star.physically_valid():
        raise ValueError("synthesis requires physically valid parameters")
    state0 = two_void_state(seed, theta_star, side=side, dx=dx, radii=radii,
                            interface_width=interface_width)
    if dt is None:
        dt = 0.5 * stable_dt(theta_star, dx)
    traj = run(state0, theta_star, dt, n_steps, snapshot_every)
    masks = [threshold(s.eta, 0.5) for s in traj.states]
    return traj, masks
