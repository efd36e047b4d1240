"""Time integration of the constrained model.

The state (eta, phi0, phi1) is advanced with classical RK4.  Each stage
evaluates dt(eta) from the divergence-form continuity equation and recovers
(dt phi0, dt phi1) from the coupled elliptic system with data
f1 = -F1, f2 = F2, f3 = 0, so the compatibility constraint is transported
rather than enforced; periodic reprojection through the initial-data solve
keeps its discrete drift at the solver-tolerance level.

The potential phi0 is defined up to a constant on a periodic domain; run()
re-centers it to zero mean after every step (pure gauge, nothing measurable
depends on it).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, DepthTooSmallError, NonConvergenceError
from .operators import (
    CG_MAX_ITER_DEFAULT,
    CG_TOL_DEFAULT,
    DepthCoefs,
    EllipticRhs,
    IkState,
    coef_a,
    constraint_residual,
    energy,
    f1_nonlinear,
    f2_forcing,
    solve_elliptic_pair,
    solve_initial_data,
    surface_potential,
    _dp,
    _dx,
)
from .spectral import RealField, integrate

__all__ = [
    "IkDerivative",
    "SimConfig",
    "Diagnostics",
    "IkRunResult",
    "eta_rhs",
    "time_derivatives",
    "rk4_step",
    "reproject",
    "run",
]

BLOWUP_GUARD = 1e6
CFL_FACTOR = 0.5


@dataclass
class IkDerivative:
    """Time derivatives of the state; phi0_t + d^2 H^2 phi1_t = -F1 holds by
    construction of the elliptic solve."""

    eta_t: RealField
    phi0_t: RealField
    phi1_t: RealField


@dataclass
class SimConfig:
    """Run controls, shared by both time steppers."""

    t_end: float
    dt: float
    reproject_every: int = 0          # 0 = never
    cg_tol: float = CG_TOL_DEFAULT
    record_every: int = 20
    cfl_factor: float = CFL_FACTOR
    store_trajectory: bool = False

    def __post_init__(self):
        if self.dt <= 0.0 or self.t_end <= 0.0:
            raise ValueError("dt and t_end must be positive")
        if self.reproject_every < 0 or self.record_every < 1:
            raise ValueError("bad cadence settings")

    def check_cfl(self, spacing: float) -> None:
        limit = self.cfl_factor * spacing
        if self.dt > limit:
            raise ValueError(
                f"dt={self.dt:.3g} violates the CFL guard {limit:.3g} "
                f"(cfl_factor * spacing at unit wave speed)"
            )


@dataclass
class Diagnostics:
    """Per-record time series of the conserved/monitored quantities."""

    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    constraint_max: list = field(default_factory=list)
    min_depth: list = field(default_factory=list)
    min_a: list = field(default_factory=list)
    aborted: str | None = None


@dataclass
class IkRunResult:
    final: IkState
    diagnostics: Diagnostics
    trajectory: list | None = None    # [(t, IkState)] at the record cadence


def _eta_rhs_v(grid, delta, dc: DepthCoefs, phi0v, phi1v) -> np.ndarray:
    flux = _dp(grid, dc.H, _dx(grid, phi0v)) \
        + (delta * delta / 3.0) * _dp(grid, dc.H3, _dx(grid, phi1v))
    return -_dx(grid, flux)


def eta_rhs(s: IkState) -> RealField:
    """dt eta = -div(H grad phi0 + (1/3) d^2 H^3 grad phi1), dealiased."""
    return RealField(s.grid, _eta_rhs_v(s.grid, s.delta, s.depth(), s.phi0.values, s.phi1.values))


def time_derivatives(
    s: IkState,
    cg_tol: float = CG_TOL_DEFAULT,
    max_iter: int = CG_MAX_ITER_DEFAULT,
    warm: IkDerivative | None = None,
) -> IkDerivative:
    """Full state derivative: continuity for eta, elliptic solve for the pair."""
    grid = s.grid
    dc = s.depth()
    eta_t = RealField(grid, _eta_rhs_v(grid, s.delta, dc, s.phi0.values, s.phi1.values))
    f1 = -f1_nonlinear(s)
    f2 = f2_forcing(s, eta_t)
    f3 = RealField(grid, np.zeros(grid.n_points))
    guess = warm.phi1_t.values if warm is not None else None
    phi0_t, phi1_t = solve_elliptic_pair(s.delta, dc, EllipticRhs(f1, f2, f3),
                                         cg_tol, max_iter, psi1_guess=guess)
    return IkDerivative(eta_t, phi0_t, phi1_t)


def _state_add(s: IkState, d: IkDerivative, h: float) -> IkState:
    return IkState(
        RealField(s.grid, s.eta.values + h * d.eta_t.values),
        RealField(s.grid, s.phi0.values + h * d.phi0_t.values),
        RealField(s.grid, s.phi1.values + h * d.phi1_t.values),
        s.delta,
        s.h_min,
    )


def _max_norm(s: IkState) -> float:
    return max(
        float(np.abs(s.eta.values).max()),
        float(np.abs(s.phi0.values).max()),
        float(np.abs(s.phi1.values).max()),
    )


def _rk4_stages(s, dt, cg_tol, time, guard, warm):
    k1 = time_derivatives(s, cg_tol, warm=warm)
    k2 = time_derivatives(_state_add(s, k1, 0.5 * dt), cg_tol, warm=k1)
    k3 = time_derivatives(_state_add(s, k2, 0.5 * dt), cg_tol, warm=k2)
    k4 = time_derivatives(_state_add(s, k3, dt), cg_tol, warm=k3)
    c = dt / 6.0
    out = IkState(
        RealField(s.grid, s.eta.values + c * (k1.eta_t.values + 2 * k2.eta_t.values
                                              + 2 * k3.eta_t.values + k4.eta_t.values)),
        RealField(s.grid, s.phi0.values + c * (k1.phi0_t.values + 2 * k2.phi0_t.values
                                               + 2 * k3.phi0_t.values + k4.phi0_t.values)),
        RealField(s.grid, s.phi1.values + c * (k1.phi1_t.values + 2 * k2.phi1_t.values
                                               + 2 * k3.phi1_t.values + k4.phi1_t.values)),
        s.delta,
        s.h_min,
    )
    m = _max_norm(out)
    if m > guard:
        raise BlowUpError(time + dt, m, guard)
    return out, k4


def rk4_step(
    s: IkState,
    dt: float,
    cg_tol: float = CG_TOL_DEFAULT,
    time: float = 0.0,
    guard: float = BLOWUP_GUARD,
) -> IkState:
    """One classical 4-stage explicit step; caller is responsible for the CFL guard."""
    out, _ = _rk4_stages(s, dt, cg_tol, time, guard, warm=None)
    return out


def reproject(s: IkState, cg_tol: float = CG_TOL_DEFAULT) -> IkState:
    """Restore the constraint: re-split phi0 + d^2 H^2 phi1 through the
    initial-data solve, leaving eta and the reconstructed potential unchanged."""
    phi = surface_potential(s)
    phi0, phi1 = solve_initial_data(s.eta, phi, s.delta, s.h_min, cg_tol)
    return IkState(s.eta.copy(), phi0, phi1, s.delta, s.h_min)


def _record(diag: Diagnostics, t: float, s: IkState, cg_tol: float) -> None:
    d = time_derivatives(s, cg_tol)
    a = coef_a(s, d.phi1_t)
    diag.times.append(t)
    diag.mass.append(integrate(s.eta))
    diag.energy.append(energy(s))
    diag.constraint_max.append(float(np.abs(constraint_residual(s).values).max()))
    diag.min_depth.append(float(1.0 + s.eta.values.min()))
    diag.min_a.append(float(a.values.min()))


def _recenter(s: IkState) -> IkState:
    s.phi0.values -= s.phi0.values.mean()
    return s


def run(initial: IkState, cfg: SimConfig) -> IkRunResult:
    """Step to t_end recording diagnostics; aborts cleanly on blow-up,
    depth collapse or elliptic non-convergence, keeping the partial record."""
    cfg.check_cfl(initial.grid.spacing)
    n_steps = int(round(cfg.t_end / cfg.dt))
    if abs(n_steps * cfg.dt - cfg.t_end) > 1e-9 * max(1.0, cfg.t_end):
        raise ValueError("t_end must be an integer number of steps")

    diag = Diagnostics()
    traj = [] if cfg.store_trajectory else None
    s = _recenter(IkState(initial.eta.copy(), initial.phi0.copy(),
                          initial.phi1.copy(), initial.delta, initial.h_min))
    t = 0.0
    _record(diag, t, s, cfg.cg_tol)
    if traj is not None:
        traj.append((t, s))

    warm = None
    try:
        for step in range(1, n_steps + 1):
            s, warm = _rk4_stages(s, cfg.dt, cfg.cg_tol, t, BLOWUP_GUARD, warm)
            s = _recenter(s)
            t = step * cfg.dt
            if cfg.reproject_every and step % cfg.reproject_every == 0:
                s = reproject(s, cfg.cg_tol)
            if step % cfg.record_every == 0 or step == n_steps:
                _record(diag, t, s, cfg.cg_tol)
                if traj is not None:
                    traj.append((t, s))
    except (BlowUpError, NonConvergenceError, DepthTooSmallError) as exc:
        diag.aborted = str(exc)

    return IkRunResult(s, diag, traj)
