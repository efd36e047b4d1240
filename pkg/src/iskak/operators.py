"""Coefficient fields, second-order operators and energies of the two-coefficient
wave model, and the elliptic solve that pins down the potential pair.

The depth-weighted operators

    L11 psi = -div(H grad psi)
    L12 psi = -div((1/3) H^3 grad psi)
    L22 psi = -d^2 div((1/5) H^5 grad psi) + (4/3) H^3 psi

are discretely self-adjoint (spectral derivative + diagonal coefficient
products), so the reduced operator

    L1 psi = d^2 (H^2 L11 - L12)(H^2 psi) + (L22 - d^2 H^2 L12) psi

is symmetric positive definite and the coupled system

    psi0 + d^2 H^2 psi1 = f1
    H^2 (L11 psi0 + d^2 L12 psi1) = L12 psi0 + L22 psi1 + f2 + div f3

is solved by eliminating psi0 and running conjugate gradients on L1 with the
flat-state symbol (8/15) d^2 k^2 + 4/3 as preconditioner.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DepthTooSmallError, NonConvergenceError
from .spectral import PeriodicGrid, RealField, dealiased_product, deriv, integrate

__all__ = [
    "H_MIN_DEFAULT",
    "CG_TOL_DEFAULT",
    "CG_MAX_ITER_DEFAULT",
    "DepthCoefs",
    "IkState",
    "EllipticRhs",
    "op_l11",
    "op_l12",
    "op_l22",
    "op_l1",
    "constraint_residual",
    "surface_velocity",
    "surface_potential",
    "f1_nonlinear",
    "f2_forcing",
    "coef_a",
    "energy",
    "linearized_energy_E1",
    "solve_elliptic_pair",
    "solve_initial_data",
    "ik_state_from_surface",
]

H_MIN_DEFAULT = 0.1
CG_TOL_DEFAULT = 1e-12
CG_MAX_ITER_DEFAULT = 500


# ---------------------------------------------------------------------------
# raw-array spectral kernels (hot path)

def _dx(grid: PeriodicGrid, v: np.ndarray) -> np.ndarray:
    vh = np.fft.rfft(v)
    vh *= 1j * grid.wavenumbers_half
    vh[-1] = 0.0
    return np.fft.irfft(vh, n=grid.n_points)


def _dx_rows(grid: PeriodicGrid, rows: np.ndarray) -> np.ndarray:
    """First derivative of several stacked fields in one transform pair."""
    h = np.fft.rfft(rows, axis=-1)
    h *= 1j * grid.wavenumbers_half
    h[..., -1] = 0.0
    return np.fft.irfft(h, n=grid.n_points, axis=-1)


def _dealias_rows(grid: PeriodicGrid, rows: np.ndarray) -> np.ndarray:
    h = np.fft.rfft(rows, axis=-1)
    h[..., ~grid.dealias_keep] = 0.0
    return np.fft.irfft(h, n=grid.n_points, axis=-1)


def _lap(grid: PeriodicGrid, v: np.ndarray) -> np.ndarray:
    vh = np.fft.rfft(v)
    vh *= -grid.wavenumbers_half**2
    return np.fft.irfft(vh, n=grid.n_points)


def _dealias(grid: PeriodicGrid, v: np.ndarray) -> np.ndarray:
    vh = np.fft.rfft(v)
    vh[~grid.dealias_keep] = 0.0
    return np.fft.irfft(vh, n=grid.n_points)


def _dp(grid: PeriodicGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """2/3-rule product on raw values."""
    return _dealias(grid, _dealias(grid, a) * _dealias(grid, b))


# ---------------------------------------------------------------------------
# coefficient fields and state types

@dataclass(frozen=True)
class DepthCoefs:
    """Total depth H = 1 + eta and the powers the operators consume."""

    grid: PeriodicGrid
    H: np.ndarray = field(repr=False)
    H2: np.ndarray = field(repr=False)
    H3: np.ndarray = field(repr=False)
    H4: np.ndarray = field(repr=False)
    H5: np.ndarray = field(repr=False)
    H7: np.ndarray = field(repr=False)
    grad_eta: np.ndarray = field(repr=False)

    @classmethod
    def from_eta(cls, eta: RealField, h_min: float = H_MIN_DEFAULT) -> "DepthCoefs":
        h = 1.0 + eta.values
        hmin = float(h.min())
        if hmin < h_min:
            raise DepthTooSmallError(hmin, h_min)
        h2 = h * h
        h3 = h2 * h
        h4 = h2 * h2
        h5 = h4 * h
        return cls(eta.grid, h, h2, h3, h4, h5, h5 * h2, _dx(eta.grid, eta.values))


@dataclass
class IkState:
    """Phase point (eta, phi0, phi1) of the model at shallowness delta.

    Direct construction only checks depth and finiteness; states produced by
    the initial-data solve or by reprojection satisfy the compatibility
    constraint, mid-step states may violate it at the discretization level.
    """

    eta: RealField
    phi0: RealField
    phi1: RealField
    delta: float
    h_min: float = H_MIN_DEFAULT

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.phi0.grid != self.eta.grid or self.phi1.grid != self.eta.grid:
            raise ValueError("state fields live on different grids")
        for f in (self.eta, self.phi0, self.phi1):
            f.check_finite()
        if float(1.0 + self.eta.values.min()) < self.h_min:
            raise DepthTooSmallError(float(1.0 + self.eta.values.min()), self.h_min)

    @property
    def grid(self) -> PeriodicGrid:
        return self.eta.grid

    def depth(self) -> DepthCoefs:
        return DepthCoefs.from_eta(self.eta, self.h_min)


@dataclass
class EllipticRhs:
    """Right-hand data (f1, f2, f3) of the coupled elliptic system."""

    f1: RealField
    f2: RealField
    f3: RealField

    @classmethod
    def from_f1(cls, f1: RealField) -> "EllipticRhs":
        zero = RealField(f1.grid, np.zeros(f1.grid.n_points))
        return cls(f1, zero, zero.copy())


# ---------------------------------------------------------------------------
# the L operators

def _l11_v(grid: PeriodicGrid, H: np.ndarray, v: np.ndarray) -> np.ndarray:
    return -_dx(grid, H * _dx(grid, v))


def _l12_v(grid: PeriodicGrid, H3: np.ndarray, v: np.ndarray) -> np.ndarray:
    return -_dx(grid, H3 * _dx(grid, v)) / 3.0


def _l22_v(grid: PeriodicGrid, delta: float, dc: DepthCoefs, v: np.ndarray) -> np.ndarray:
    return -(delta * delta) * _dx(grid, dc.H5 * _dx(grid, v)) / 5.0 + (4.0 / 3.0) * dc.H3 * v


def _l1_v(grid: PeriodicGrid, delta: float, dc: DepthCoefs, v: np.ndarray) -> np.ndarray:
    d2 = delta * delta
    dg, dv = _dx_rows(grid, np.stack((dc.H2 * v, v)))
    fluxes = _dx_rows(grid, np.stack((dc.H * dg, dc.H3 * dg, dc.H5 * dv, dc.H3 * dv)))
    l11_g = -fluxes[0]
    l12_g = -fluxes[1] / 3.0
    l22_v = -d2 * fluxes[2] / 5.0 + (4.0 / 3.0) * dc.H3 * v
    l12_v = -fluxes[3] / 3.0
    return d2 * (dc.H2 * l11_g - l12_g) + l22_v - d2 * dc.H2 * l12_v


def op_l11(coefs: DepthCoefs, psi: RealField) -> RealField:
    return RealField(psi.grid, _l11_v(psi.grid, coefs.H, psi.values))


def op_l12(coefs: DepthCoefs, psi: RealField) -> RealField:
    return RealField(psi.grid, _l12_v(psi.grid, coefs.H3, psi.values))


def op_l22(delta: float, coefs: DepthCoefs, psi: RealField) -> RealField:
    return RealField(psi.grid, _l22_v(psi.grid, delta, coefs, psi.values))


def op_l1(delta: float, coefs: DepthCoefs, psi: RealField) -> RealField:
    return RealField(psi.grid, _l1_v(psi.grid, delta, coefs, psi.values))


# ---------------------------------------------------------------------------
# pointwise fields of the model

def constraint_residual(s: IkState) -> RealField:
    """(2/3) lap phi0 + (2/15) d^2 H^2 lap phi1 + (4/3) phi1."""
    grid = s.grid
    dc = s.depth()
    res = (
        (2.0 / 3.0) * _lap(grid, s.phi0.values)
        + (2.0 / 15.0) * s.delta**2 * dc.H2 * _lap(grid, s.phi1.values)
        + (4.0 / 3.0) * s.phi1.values
    )
    return RealField(grid, res)


def surface_velocity(s: IkState) -> RealField:
    """Horizontal fluid velocity at the surface: grad phi0 + d^2 H^2 grad phi1."""
    grid = s.grid
    dc = s.depth()
    return RealField(grid, _dx(grid, s.phi0.values) + s.delta**2 * dc.H2 * _dx(grid, s.phi1.values))


def surface_potential(s: IkState) -> RealField:
    """Trace of the velocity potential at the surface: phi0 + d^2 H^2 phi1."""
    dc = s.depth()
    return RealField(s.grid, s.phi0.values + s.delta**2 * dc.H2 * s.phi1.values)


def _f1_v(grid: PeriodicGrid, delta: float, dc: DepthCoefs, s: IkState) -> np.ndarray:
    # pairwise 2/3-rule chains, batched: truncate factors, multiply, truncate
    d2 = delta * delta
    u0, u1 = _dx_rows(grid, np.stack((s.phi0.values, s.phi1.values)))
    u0, u1, p1, h2, h4 = _dealias_rows(grid, np.stack((u0, u1, s.phi1.values, dc.H2, dc.H4)))
    q00, q01, q11, qpp = _dealias_rows(grid, np.stack((u0 * u0, u0 * u1, u1 * u1, p1 * p1)))
    c01, c11, cpp = _dealias_rows(grid, np.stack((h2 * q01, h4 * q11, h2 * qpp)))
    return s.eta.values + 0.5 * q00 + d2 * c01 + 0.5 * d2 * d2 * c11 + 2.0 * d2 * cpp


def f1_nonlinear(s: IkState) -> RealField:
    """Bernoulli-type source of the potential equation, products dealiased."""
    return RealField(s.grid, _f1_v(s.grid, s.delta, s.depth(), s))


def f2_forcing(s: IkState, eta_t: RealField) -> RealField:
    """(4/15) d^2 H^4 (dt eta) lap phi1 for the time-derivative elliptic solve."""
    grid = s.grid
    dc = s.depth()
    v = (4.0 / 15.0) * s.delta**2 * _dp(grid, dc.H4, _dp(grid, eta_t.values, _lap(grid, s.phi1.values)))
    return RealField(grid, v)


def coef_a(s: IkState, phi1_t: RealField) -> RealField:
    """Sign-condition coefficient; the model analogue of the Rayleigh-Taylor check."""
    grid = s.grid
    dc = s.depth()
    d2 = s.delta**2
    u0 = _dx(grid, s.phi0.values)
    u1 = _dx(grid, s.phi1.values)
    p1 = s.phi1.values
    v = (
        1.0
        + 2.0 * d2 * _dp(grid, dc.H, phi1_t.values)
        + 2.0 * d2 * _dp(grid, dc.H, _dp(grid, u0, u1))
        + 2.0 * d2 * d2 * _dp(grid, dc.H3, _dp(grid, u1, u1))
        + 4.0 * d2 * _dp(grid, dc.H, _dp(grid, p1, p1))
    )
    return RealField(grid, v)


# ---------------------------------------------------------------------------
# energies

def _kinetic_density(grid, delta, H, H3, H5, phi0v, phi1v) -> np.ndarray:
    """Vertical integral of the squared scaled gradient of the potential ansatz."""
    d2 = delta * delta
    u0 = _dx(grid, phi0v)
    u1 = _dx(grid, phi1v)
    return (
        H * u0 * u0
        + (2.0 / 3.0) * d2 * H3 * u0 * u1
        + (1.0 / 5.0) * d2 * d2 * H5 * u1 * u1
        + (4.0 / 3.0) * d2 * H3 * phi1v * phi1v
    )


def energy(s: IkState) -> float:
    """Physical energy: (1/2)||eta||^2 plus half the kinetic quadratic form."""
    grid = s.grid
    dc = s.depth()
    dens = s.eta.values**2 + _kinetic_density(grid, s.delta, dc.H, dc.H3, dc.H5,
                                              s.phi0.values, s.phi1.values)
    return 0.5 * float(grid.spacing * dens.sum())


def _flat_quadratic(grid, delta, etav, phi0v, phi1v) -> float:
    one = np.ones(grid.n_points)
    dens = etav**2 + _kinetic_density(grid, delta, one, one, one, phi0v, phi1v)
    return 0.5 * float(grid.spacing * dens.sum())


def linearized_energy_E1(s: IkState) -> float:
    """Flat-state quadratic form plus (2/5) d^2 times the same form on the
    x-derivative of the state; conserved by the rest-state linearization."""
    grid = s.grid
    e0 = _flat_quadratic(grid, s.delta, s.eta.values, s.phi0.values, s.phi1.values)
    e1 = _flat_quadratic(grid, s.delta, _dx(grid, s.eta.values),
                         _dx(grid, s.phi0.values), _dx(grid, s.phi1.values))
    return e0 + 0.4 * s.delta**2 * e1


# ---------------------------------------------------------------------------
# elliptic solver

@lru_cache(maxsize=32)
def _flat_precond_symbol(grid: PeriodicGrid, delta: float) -> np.ndarray:
    k = grid.wavenumbers_half
    return 1.0 / ((8.0 / 15.0) * delta * delta * k * k + 4.0 / 3.0)


def _apply_precond(grid: PeriodicGrid, sym: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.fft.irfft(sym * np.fft.rfft(v), n=grid.n_points)


def _pcg(grid, apply_op, precond_sym, b, tol, max_iter, what, x0=None):
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = x0.copy()
        r = b - apply_op(x)
    z = _apply_precond(grid, precond_sym, r)
    p = z.copy()
    rz = float(np.dot(r, z))
    res = bnorm
    for _ in range(max_iter):
        ap = apply_op(p)
        alpha = rz / float(np.dot(p, ap))
        x += alpha * p
        r -= alpha * ap
        res = float(np.linalg.norm(r))
        if res <= tol * bnorm:
            return x
        z = _apply_precond(grid, precond_sym, r)
        rz_new = float(np.dot(r, z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NonConvergenceError(what, max_iter, res / bnorm, tol)


def solve_elliptic_pair(
    delta: float,
    coefs: DepthCoefs,
    rhs: EllipticRhs,
    cg_tol: float = CG_TOL_DEFAULT,
    max_iter: int = CG_MAX_ITER_DEFAULT,
    psi1_guess: np.ndarray | None = None,
) -> tuple[RealField, RealField]:
    """Solve the coupled (psi0, psi1) system; returns both components.

    psi0 is reconstructed from the elimination identity psi0 = f1 - d^2 H^2 psi1,
    so the first equation holds to rounding by construction.  psi1_guess warm
    starts the CG iteration (same tolerance, fewer iterations).
    """
    grid = coefs.grid
    d2 = delta * delta
    f1v, f2v, f3v = rhs.f1.values, rhs.f2.values, rhs.f3.values
    df1 = _dx(grid, f1v)
    b = (
        -_dx(grid, (2.0 / 3.0) * coefs.H3 * df1 + f3v)
        + 2.0 * coefs.H2 * coefs.grad_eta * df1
        - f2v
    )
    psi1v = _pcg(
        grid,
        lambda v: _l1_v(grid, delta, coefs, v),
        _flat_precond_symbol(grid, delta),
        b,
        cg_tol,
        max_iter,
        "elliptic pair solve",
        x0=psi1_guess,
    )
    psi0v = f1v - d2 * coefs.H2 * psi1v
    return RealField(grid, psi0v), RealField(grid, psi1v)


def solve_initial_data(
    eta0: RealField,
    phi: RealField,
    delta: float,
    h_min: float = H_MIN_DEFAULT,
    cg_tol: float = CG_TOL_DEFAULT,
    max_iter: int = CG_MAX_ITER_DEFAULT,
) -> tuple[RealField, RealField]:
    """Split a surface potential into the constrained pair (phi0, phi1)."""
    coefs = DepthCoefs.from_eta(eta0, h_min)
    return solve_elliptic_pair(delta, coefs, EllipticRhs.from_f1(phi), cg_tol, max_iter)


def ik_state_from_surface(
    eta0: RealField,
    phi: RealField,
    delta: float,
    h_min: float = H_MIN_DEFAULT,
    cg_tol: float = CG_TOL_DEFAULT,
) -> IkState:
    phi0, phi1 = solve_initial_data(eta0, phi, delta, h_min, cg_tol)
    return IkState(eta0.copy(), phi0, phi1, delta, h_min)
