"""Full water-wave side: Dirichlet-to-Neumann map and surface evolution.

The exact map solves the flattened Laplace problem on the strip -1 <= z <= 0,

    H^{-1} dzz P + d^2 div_X (P_coef grad_X P) = 0,   P(x,0) = phi,  dz P(x,-1) = 0,

by Fourier collocation in x and Chebyshev-Lobatto collocation in z, with the
flat-bottom operator (dzz + d^2 dxx) inverted per Fourier mode as the
preconditioner of a GMRES iteration.  The flux is then the vertical average
of the horizontal velocity and

    Lambda phi = -div(H Vbar),

a divergence form that conserves mass to rounding.  The shallow-water series
backend applies Lambda^(0) + d^2 Lambda^(1) + d^4 Lambda^(2) truncated at a
chosen order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .errors import BlowUpError, DepthTooSmallError, NonConvergenceError, SingularSystemError
from .ik_solver import BLOWUP_GUARD, Diagnostics, SimConfig
from .operators import H_MIN_DEFAULT, _dealias, _dealias_rows, _dp, _dx, _dx_rows, _lap
from .spectral import PeriodicGrid, RealField, integrate

__all__ = [
    "WwState",
    "SigmaSolution",
    "DtnBackend",
    "WwRunResult",
    "lambda0",
    "lambda1",
    "lambda2",
    "dtn_series",
    "dtn_exact",
    "solve_strip",
    "zcs_rhs",
    "ww_run",
    "hamiltonian",
]

DTN_TOL_DEFAULT = 1e-12
DTN_MAX_ITER = 120


def _gmres(apply_op, b, tol, max_iter, x0=None):
    """Full GMRES with Givens rotations; returns (x, relative residual).

    Used on the left-preconditioned strip system, which is O(1) conditioned,
    so a few dozen iterations reach rounding without restarts.
    """
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0
    if x0 is None:
        x = np.zeros_like(b)
        r = b.copy()
    else:
        x = x0.copy()
        r = b - apply_op(x)
    beta = float(np.linalg.norm(r))
    if beta <= tol * bnorm:
        return x, beta / bnorm
    basis = [r / beta]
    hess = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = beta
    k_done = 0
    for k in range(max_iter):
        v = apply_op(basis[k])
        for i in range(k + 1):
            hess[i, k] = float(np.dot(basis[i], v))
            v -= hess[i, k] * basis[i]
        hess[k + 1, k] = float(np.linalg.norm(v))
        if hess[k + 1, k] > 0.0:
            basis.append(v / hess[k + 1, k])
        else:
            basis.append(v)
        for i in range(k):
            t = cs[i] * hess[i, k] + sn[i] * hess[i + 1, k]
            hess[i + 1, k] = -sn[i] * hess[i, k] + cs[i] * hess[i + 1, k]
            hess[i, k] = t
        denom = float(np.hypot(hess[k, k], hess[k + 1, k]))
        cs[k] = hess[k, k] / denom
        sn[k] = hess[k + 1, k] / denom
        hess[k, k] = denom
        hess[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        k_done = k + 1
        if abs(g[k + 1]) <= tol * bnorm:
            break
    y = np.linalg.solve(hess[:k_done, :k_done], g[:k_done])
    for i in range(k_done):
        x += y[i] * basis[i]
    return x, abs(g[k_done]) / bnorm


@dataclass
class WwState:
    """Surface elevation and surface-trace potential at shallowness delta."""

    eta: RealField
    phi: RealField
    delta: float
    h_min: float = H_MIN_DEFAULT

    def __post_init__(self):
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.phi.grid != self.eta.grid:
            raise ValueError("state fields live on different grids")
        self.eta.check_finite()
        self.phi.check_finite()
        if float(1.0 + self.eta.values.min()) < self.h_min:
            raise DepthTooSmallError(float(1.0 + self.eta.values.min()), self.h_min)

    @property
    def grid(self) -> PeriodicGrid:
        return self.eta.grid


# ---------------------------------------------------------------------------
# shallow-water expansion of the map
#
# Coefficient products are 2/3-truncated: the expansion terms chain up to
# three Laplacians, which amplify the rounding tail of an input by k^6, so
# the products must live inside the resolved band.  The truncation sandwich
# keeps each term exactly self-adjoint.

def lambda0(eta: RealField, psi: RealField) -> RealField:
    grid = psi.grid
    h = 1.0 + eta.values
    return RealField(grid, -_dx(grid, _dp(grid, h, _dx(grid, psi.values))))


def lambda1(eta: RealField, psi: RealField) -> RealField:
    grid = psi.grid
    h3 = (1.0 + eta.values) ** 3
    return RealField(grid, -_lap(grid, _dp(grid, h3, _lap(grid, psi.values))) / 3.0)


def lambda2(eta: RealField, psi: RealField) -> RealField:
    grid = psi.grid
    h = 1.0 + eta.values
    h2, h3 = h * h, h * h * h
    lp = _lap(grid, psi.values)
    grad_eta_sq = _dx(grid, eta.values) ** 2
    term = (
        -_lap(grid, _dp(grid, h3, _lap(grid, _dp(grid, h2, lp)))) / 15.0
        - _lap(grid, _dp(grid, h2, _lap(grid, _dp(grid, h3, lp)))) / 15.0
        + _lap(grid, _dp(grid, grad_eta_sq, _dp(grid, h3, lp))) / 5.0
    )
    return RealField(grid, term)


def dtn_series(eta: RealField, phi: RealField, delta: float, order: int) -> RealField:
    """Sum of the expansion terms through delta^(2*order)."""
    if order not in (0, 1, 2):
        raise ValueError(f"series order must be 0, 1 or 2, got {order}")
    out = lambda0(eta, phi)
    if order >= 1:
        out = out + delta**2 * lambda1(eta, phi)
    if order >= 2:
        out = out + delta**4 * lambda2(eta, phi)
    return out


# ---------------------------------------------------------------------------
# exact map: Chebyshev-Lobatto strip solve

def _cheb_lobatto(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes xi_j = cos(j pi / n) on [-1, 1] and the differentiation matrix."""
    j = np.arange(n + 1)
    xi = np.cos(np.pi * j / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dx = xi[:, None] - xi[None, :] + np.eye(n + 1)
    d = np.outer(c, 1.0 / c) / dx
    d -= np.diag(d.sum(axis=1))
    return xi, d


def _clenshaw_curtis_weights(xi: np.ndarray) -> np.ndarray:
    """Quadrature weights exact for polynomials of degree n on the given nodes."""
    n = len(xi) - 1
    vand = np.polynomial.chebyshev.chebvander(xi, n)  # (n+1, n+1): T_m(xi_j)
    m = np.arange(n + 1)
    moments = np.where(m % 2 == 0, 2.0 / (1.0 - m**2 + (m % 2)), 0.0)
    moments[m % 2 == 1] = 0.0
    return np.linalg.solve(vand.T.copy(), moments)


@dataclass
class SigmaSolution:
    """Potential on the flattened strip: values at (z-node, x-node) and the
    Chebyshev x Fourier coefficient array."""

    values: np.ndarray
    n_x: int
    n_z: int
    grid: PeriodicGrid
    dz_matrix: np.ndarray = field(repr=False)

    @property
    def coeffs(self) -> np.ndarray:
        """(x-mode, z-Chebyshev-mode) coefficient array of the solution."""
        fh = np.fft.rfft(self.values, axis=1) / self.n_x
        cheb = scipy.fft.dct(fh, type=1, axis=0) / self.n_z
        cheb[0, :] *= 0.5
        cheb[-1, :] *= 0.5
        return cheb.T

    def surface_values(self) -> np.ndarray:
        return self.values[0, :].copy()

    def bottom_neumann_residual(self) -> float:
        return float(np.abs((self.dz_matrix @ self.values)[-1, :]).max())


class _StripWorkspace:
    """Cached geometry, differentiation and flat-mode inverses for one
    (grid, n_z, delta) combination."""

    def __init__(self, grid: PeriodicGrid, n_z: int, delta: float):
        if n_z < 8:
            raise ValueError(f"n_z must be >= 8, got {n_z}")
        self.grid = grid
        self.n_z = n_z
        self.delta = delta
        xi, d_xi = _cheb_lobatto(n_z)
        self.z = (xi - 1.0) / 2.0            # z in [-1, 0], row 0 = surface
        self.dz = 2.0 * d_xi
        self.dzz = self.dz @ self.dz
        self.zp1 = self.z + 1.0
        self.wq = _clenshaw_curtis_weights(xi) / 2.0
        k = grid.wavenumbers_half
        eye = np.eye(n_z + 1)
        inv = np.empty((len(k), n_z + 1, n_z + 1))
        for i, kk in enumerate(k):
            m = self.dzz - (delta * kk) ** 2 * eye
            m[0, :] = eye[0]                 # surface Dirichlet row
            m[-1, :] = self.dz[-1, :]        # bottom Neumann row
            try:
                inv[i] = np.linalg.inv(m)
            except np.linalg.LinAlgError as exc:
                raise SingularSystemError(f"flat strip mode k={kk}: {exc}") from exc
        self.mode_inverses = inv
        self.last_solution: np.ndarray | None = None

    # x-derivative of stacked z-rows
    def _ddx(self, rows: np.ndarray) -> np.ndarray:
        return _dx_rows(self.grid, rows)

    def _precondition(self, rows: np.ndarray) -> np.ndarray:
        rh = np.fft.rfft(rows, axis=1)
        sol = np.einsum("kij,jk->ik", self.mode_inverses, rh)
        return np.fft.irfft(sol, n=self.grid.n_points, axis=1)

    def _apply(self, w: np.ndarray, h, eta_x, d2) -> np.ndarray:
        """Depth-scaled transformed Laplacian with BC rows substituted."""
        wz = self.dz @ w
        wx = self._ddx(w)
        zp1 = self.zp1[:, None]
        p = h * wx - zp1 * eta_x * wz
        q = -zp1 * eta_x * wx + zp1**2 * (eta_x**2 / h) * wz
        out = self.dzz @ w + d2 * h * (self._ddx(p) + self.dz @ q)
        out[0, :] = w[0, :]
        out[-1, :] = wz[-1, :]
        return out

    def solve(self, eta: RealField, phi: RealField, tol: float,
              h_min: float, warm_start: bool) -> SigmaSolution:
        grid = self.grid
        h = 1.0 + eta.values
        if float(h.min()) < h_min:
            raise DepthTooSmallError(float(h.min()), h_min)
        eta_x = _dx(grid, eta.values)
        d2 = self.delta**2
        n_rows = self.n_z + 1

        # lifting by the z-independent surface data; residual is z-independent too
        phi_x = _dx(grid, phi.values)
        lift_res = d2 * h * (_dx(grid, h * phi_x) - eta_x * phi_x)
        b = np.broadcast_to(-lift_res, (n_rows, grid.n_points)).copy()
        b[0, :] = 0.0
        b[-1, :] = 0.0

        shape = (n_rows, grid.n_points)

        # iterate on the left-preconditioned system: the flat inverse is O(1)
        # conditioned, so the residual tracks the solution error rather than
        # the n_z^4-scaled collocation rows
        def apply_pa(v):
            return self._precondition(self._apply(v.reshape(shape), h, eta_x, d2)).ravel()

        b_p = self._precondition(b).ravel()
        x0 = None
        if warm_start and self.last_solution is not None:
            x0 = self.last_solution.ravel()
        bnorm_p = float(np.linalg.norm(b_p))
        if bnorm_p == 0.0:
            w = np.zeros(shape)
        else:
            # a restart rebuilds Arnoldi orthogonality if a long solve stagnates
            sol = x0
            res_p = np.inf
            for _ in range(3):
                sol, _ = _gmres(apply_pa, b_p, tol, DTN_MAX_ITER, x0=sol)
                res_p = float(np.linalg.norm(apply_pa(sol) - b_p))
                if np.isfinite(res_p) and res_p <= tol * bnorm_p:
                    break
            if not np.isfinite(res_p) or res_p > tol * bnorm_p:
                raise NonConvergenceError("strip potential solve", DTN_MAX_ITER,
                                          res_p / bnorm_p, tol)
            w = sol.reshape(shape)
        if warm_start:
            self.last_solution = w
        values = w + phi.values[None, :]
        return SigmaSolution(values, grid.n_points, self.n_z, grid, self.dz)

    def flux_divergence(self, eta: RealField, phi: RealField, sol: SigmaSolution) -> RealField:
        """Lambda phi = -div(H Vbar) with Vbar the vertical average of the
        horizontal velocity, integrated by Clenshaw-Curtis quadrature."""
        grid = self.grid
        h = 1.0 + eta.values
        eta_x = _dx(grid, eta.values)
        w = sol.values
        wz = self.dz @ w
        wx = self._ddx(w)
        integrand = wx - self.zp1[:, None] * (eta_x / h) * wz
        vbar = self.wq @ integrand
        return RealField(grid, -_dx(grid, h * vbar))


@dataclass
class DtnBackend:
    """Either the exact strip solve (kind='exact', resolution n_z) or the
    truncated shallow-water expansion (kind='series', order K)."""

    kind: str
    n_z: int = 16
    order: int = 2
    tol: float = DTN_TOL_DEFAULT
    warm_start: bool = False

    def __post_init__(self):
        if self.kind not in ("exact", "series"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "exact" and self.n_z < 8:
            raise ValueError("exact backend needs n_z >= 8")
        if self.kind == "series" and self.order not in (0, 1, 2):
            raise ValueError("series backend order must be 0, 1 or 2")
        self._workspaces: dict = {}

    @classmethod
    def exact(cls, n_z: int = 16, tol: float = DTN_TOL_DEFAULT,
              warm_start: bool = False) -> "DtnBackend":
        return cls("exact", n_z=n_z, tol=tol, warm_start=warm_start)

    @classmethod
    def series(cls, order: int) -> "DtnBackend":
        return cls("series", order=order)

    def label(self) -> str:
        return f"exact:{self.n_z}" if self.kind == "exact" else f"series:{self.order}"

    def _workspace(self, grid: PeriodicGrid, delta: float) -> _StripWorkspace:
        key = (grid, self.n_z, delta)
        ws = self._workspaces.get(key)
        if ws is None:
            ws = _StripWorkspace(grid, self.n_z, delta)
            self._workspaces[key] = ws
        return ws

    def apply(self, eta: RealField, phi: RealField, delta: float,
              h_min: float = H_MIN_DEFAULT) -> RealField:
        if self.kind == "series":
            return dtn_series(eta, phi, delta, self.order)
        ws = self._workspace(phi.grid, delta)
        sol = ws.solve(eta, phi, self.tol, h_min, self.warm_start)
        return ws.flux_divergence(eta, phi, sol)


def solve_strip(eta: RealField, phi: RealField, delta: float, n_z: int,
                tol: float = DTN_TOL_DEFAULT, h_min: float = H_MIN_DEFAULT) -> SigmaSolution:
    """Flattened-strip potential for given surface data (fresh workspace)."""
    ws = _StripWorkspace(phi.grid, n_z, delta)
    return ws.solve(eta, phi, tol, h_min, warm_start=False)


def dtn_exact(eta: RealField, phi: RealField, delta: float, n_z: int = 16,
              tol: float = DTN_TOL_DEFAULT, h_min: float = H_MIN_DEFAULT) -> RealField:
    """Exact Dirichlet-to-Neumann value through the strip solve (one-shot)."""
    ws = _StripWorkspace(phi.grid, n_z, delta)
    sol = ws.solve(eta, phi, tol, h_min, warm_start=False)
    return ws.flux_divergence(eta, phi, sol)


# ---------------------------------------------------------------------------
# surface evolution

def zcs_rhs(s: WwState, backend: DtnBackend) -> tuple[RealField, RealField]:
    """Right side of the surface system: (dt eta, dt phi)."""
    grid = s.grid
    d2 = s.delta**2
    lam = backend.apply(s.eta, s.phi, s.delta, s.h_min)
    eta_x, phi_x = _dx_rows(grid, np.stack((s.eta.values, s.phi.values)))
    etx, phx, lamt = _dealias_rows(grid, np.stack((eta_x, phi_x, lam.values)))
    sq_phx, cross = _dealias_rows(grid, np.stack((phx * phx, etx * phx)))
    num = lamt + cross
    num2 = _dealias_rows(grid, np.stack((num * num,)))[0]
    denom = 1.0 + d2 * eta_x * eta_x
    phi_t = -s.eta.values - 0.5 * sq_phx + 0.5 * d2 * num2 / denom
    return lam, RealField(grid, phi_t)


def hamiltonian(s: WwState, backend: DtnBackend) -> float:
    """Surrogate energy (1/2) integral(phi * Lambda phi + eta^2)."""
    lam = backend.apply(s.eta, s.phi, s.delta, s.h_min)
    dens = s.phi.values * lam.values + s.eta.values**2
    return 0.5 * float(s.grid.spacing * dens.sum())


@dataclass
class WwRunResult:
    final: WwState
    diagnostics: Diagnostics
    trajectory: list | None = None


def _ww_add(s: WwState, de: np.ndarray, dp: np.ndarray, h: float) -> WwState:
    return WwState(
        RealField(s.grid, s.eta.values + h * de),
        RealField(s.grid, s.phi.values + h * dp),
        s.delta,
        s.h_min,
    )


def ww_run(initial: WwState, cfg: SimConfig, backend: DtnBackend) -> WwRunResult:
    """RK4 evolution of the surface system, mirroring the model stepper:
    same scheme, same CFL policy, mass and surrogate-energy diagnostics."""
    cfg.check_cfl(initial.grid.spacing)
    n_steps = int(round(cfg.t_end / cfg.dt))
    if abs(n_steps * cfg.dt - cfg.t_end) > 1e-9 * max(1.0, cfg.t_end):
        raise ValueError("t_end must be an integer number of steps")

    diag = Diagnostics()
    traj = [] if cfg.store_trajectory else None
    s = WwState(initial.eta.copy(), initial.phi.copy(), initial.delta, initial.h_min)
    s.phi.values -= s.phi.values.mean()

    def record(t, state):
        diag.times.append(t)
        diag.mass.append(integrate(state.eta))
        diag.energy.append(hamiltonian(state, backend))
        diag.min_depth.append(float(1.0 + state.eta.values.min()))
        if traj is not None:
            traj.append((t, state))

    t = 0.0
    record(t, s)
    try:
        for step in range(1, n_steps + 1):
            k1e, k1p = zcs_rhs(s, backend)
            s2 = _ww_add(s, k1e.values, k1p.values, 0.5 * cfg.dt)
            k2e, k2p = zcs_rhs(s2, backend)
            s3 = _ww_add(s, k2e.values, k2p.values, 0.5 * cfg.dt)
            k3e, k3p = zcs_rhs(s3, backend)
            s4 = _ww_add(s, k3e.values, k3p.values, cfg.dt)
            k4e, k4p = zcs_rhs(s4, backend)
            c = cfg.dt / 6.0
            s = WwState(
                RealField(s.grid, s.eta.values + c * (k1e.values + 2 * k2e.values
                                                      + 2 * k3e.values + k4e.values)),
                RealField(s.grid, s.phi.values + c * (k1p.values + 2 * k2p.values
                                                      + 2 * k3p.values + k4p.values)),
                s.delta,
                s.h_min,
            )
            s.phi.values -= s.phi.values.mean()
            m = max(float(np.abs(s.eta.values).max()), float(np.abs(s.phi.values).max()))
            if m > BLOWUP_GUARD:
                raise BlowUpError(t + cfg.dt, m, BLOWUP_GUARD)
            t = step * cfg.dt
            if step % cfg.record_every == 0 or step == n_steps:
                record(t, s)
    except (BlowUpError, NonConvergenceError, DepthTooSmallError) as exc:
        diag.aborted = str(exc)

    return WwRunResult(s, diag, traj)
