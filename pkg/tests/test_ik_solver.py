import numpy as np
import pytest

from iskak.errors import BlowUpError
from iskak.ik_solver import (
    SimConfig,
    eta_rhs,
    reproject,
    rk4_step,
    run,
    time_derivatives,
)
from iskak.operators import (
    IkState,
    constraint_residual,
    ik_state_from_surface,
    surface_potential,
)
from iskak.spectral import RealField, field_from_function, integrate, l2_norm

from conftest import random_band_limited, zeros


def rest_state(grid, delta=0.3):
    return IkState(zeros(grid), zeros(grid), zeros(grid), delta)


def cosine_state(grid, amplitude, delta, cg_tol=1e-12):
    eta0 = field_from_function(grid, lambda x: amplitude * np.cos(x))
    return ik_state_from_surface(eta0, zeros(grid), delta, cg_tol=cg_tol)


class TestEtaRhs:
    def test_rest(self, grid64):
        assert np.abs(eta_rhs(rest_state(grid64)).values).max() == 0.0

    def test_flat_laplacian(self, grid64):
        s = IkState(zeros(grid64), field_from_function(grid64, np.cos), zeros(grid64), 0.3)
        assert np.abs(eta_rhs(s).values - np.cos(grid64.nodes)).max() <= 1e-12

    def test_divergence_form_zero_mean(self, grid64):
        rng = np.random.default_rng(1)
        s = IkState(random_band_limited(rng, grid64, 4, 0.2),
                    random_band_limited(rng, grid64),
                    random_band_limited(rng, grid64), 0.4)
        assert abs(integrate(eta_rhs(s))) <= 1e-13


class TestTimeDerivatives:
    def test_rest_fixed_point(self, grid64):
        d = time_derivatives(rest_state(grid64))
        for f in (d.eta_t, d.phi0_t, d.phi1_t):
            assert np.abs(f.values).max() == 0.0

    def test_elevation_only_linearization(self, grid64):
        # small elevation: dt(eta) = 0 and the pair solve sees f1 = -eta, so
        # phi0_t tracks the flat-depth single-mode answer to O(eps^2)
        eps, delta = 1e-6, 0.4
        eta = field_from_function(grid64, lambda x: eps * np.cos(x))
        s = IkState(eta, zeros(grid64), zeros(grid64), delta)
        d = time_derivatives(s)
        assert np.abs(d.eta_t.values).max() == 0.0
        denom = 1.0 + 0.4 * delta**2
        expected = -eps * (1.0 - delta**2 / 10.0) / denom * np.cos(grid64.nodes)
        assert np.abs(d.phi0_t.values - expected).max() <= 1e-10

    def test_reconstruction_identity(self, grid64):
        from iskak.operators import f1_nonlinear
        rng = np.random.default_rng(2)
        s = IkState(random_band_limited(rng, grid64, 4, 0.15),
                    random_band_limited(rng, grid64, 5, 0.3),
                    random_band_limited(rng, grid64, 5, 0.3), 0.35)
        d = time_derivatives(s)
        h2 = (1.0 + s.eta.values) ** 2
        lhs = d.phi0_t.values + s.delta**2 * h2 * d.phi1_t.values
        assert np.abs(lhs + f1_nonlinear(s).values).max() <= 1e-8


class TestRk4Step:
    def test_rest_is_fixed_point(self, grid64):
        s = rest_state(grid64)
        out = rk4_step(s, 1e-2)
        for a, b in ((out.eta, s.eta), (out.phi0, s.phi0), (out.phi1, s.phi1)):
            assert np.abs(a.values - b.values).max() == 0.0

    def test_local_order_oracle(self):
        # one step vs two half steps isolates the O(dt^5) local error; the
        # state needs a nonzero potential, otherwise t=0 is a time-reflection
        # point where the odd-order coefficient vanishes
        from iskak.spectral import PeriodicGrid
        grid = PeriodicGrid(256)
        eta0 = field_from_function(grid, lambda x: 0.1 * np.cos(4 * x))
        phi0 = field_from_function(grid, lambda x: 0.1 * np.sin(4 * x) + 0.05 * np.cos(3 * x))
        s = ik_state_from_surface(eta0, phi0, 0.5, cg_tol=1e-13)
        errs = []
        for dt in (8e-3, 4e-3):
            one = rk4_step(s, dt, cg_tol=1e-13)
            two = rk4_step(rk4_step(s, dt / 2, cg_tol=1e-13), dt / 2, cg_tol=1e-13)
            errs.append(np.abs(one.eta.values - two.eta.values).max())
        assert errs[0] / errs[1] == pytest.approx(32.0, rel=0.2)

    def test_forward_backward_returns(self):
        # a step reversed with -dt recovers the state to (at worst) the local
        # truncation level
        from iskak.spectral import PeriodicGrid
        grid = PeriodicGrid(256)
        eta0 = field_from_function(grid, lambda x: 0.1 * np.cos(4 * x))
        phi0 = field_from_function(grid, lambda x: 0.1 * np.sin(4 * x))
        s = ik_state_from_surface(eta0, phi0, 0.5, cg_tol=1e-13)
        dt = 4e-3
        back = rk4_step(rk4_step(s, dt, cg_tol=1e-13), -dt, cg_tol=1e-13)
        err = max(np.abs(back.eta.values - s.eta.values).max(),
                  np.abs(back.phi0.values - s.phi0.values).max())
        assert err <= 10.0 * dt**5

    def test_mass_exact_per_step(self, grid128):
        s = cosine_state(grid128, 0.1, 0.2)
        out = rk4_step(s, 1e-3)
        assert abs(integrate(out.eta) - integrate(s.eta)) <= 1e-12

    def test_blowup_guard(self, grid64):
        s = rest_state(grid64)
        huge = IkState(s.eta, RealField(grid64, np.full(64, 2.0)), s.phi1, 0.3)
        with pytest.raises(BlowUpError):
            rk4_step(huge, 1e-3, guard=1.0)


class TestReproject:
    def test_rest_unchanged(self, grid64):
        out = reproject(rest_state(grid64))
        assert np.abs(out.phi0.values).max() <= 1e-14
        assert np.abs(out.phi1.values).max() <= 1e-14

    def test_already_consistent_state_unchanged(self, grid128):
        s = cosine_state(grid128, 0.1, 0.3)
        out = reproject(s)
        assert np.abs(out.phi0.values - s.phi0.values).max() <= 1e-9
        assert np.abs(out.phi1.values - s.phi1.values).max() <= 1e-9

    def test_restores_perturbed_constraint(self, grid128):
        s = cosine_state(grid128, 0.1, 0.3)
        bad = IkState(s.eta.copy(), s.phi0.copy(),
                      RealField(grid128, s.phi1.values + 0.5 * np.cos(grid128.nodes)),
                      s.delta)
        assert np.abs(constraint_residual(bad).values).max() > 0.1
        fixed = reproject(bad)
        assert np.abs(constraint_residual(fixed).values).max() <= 1e-8

    def test_surface_potential_preserved(self, grid128):
        s = cosine_state(grid128, 0.1, 0.3)
        bad = IkState(s.eta.copy(), s.phi0.copy(),
                      RealField(grid128, s.phi1.values + 0.5 * np.cos(grid128.nodes)),
                      s.delta)
        phi_before = surface_potential(bad)
        fixed = reproject(bad)
        assert np.abs(surface_potential(fixed).values - phi_before.values).max() <= 1e-10


class TestRun:
    def test_rest_run_flat_diagnostics(self, grid64):
        res = run(rest_state(grid64), SimConfig(t_end=0.5, dt=2e-3, record_every=50))
        assert res.diagnostics.aborted is None
        assert max(res.diagnostics.constraint_max) <= 1e-13
        assert np.abs(np.diff(res.diagnostics.energy)).max() <= 1e-14
        assert np.abs(np.diff(res.diagnostics.mass)).max() <= 1e-14

    def test_mass_and_energy_conservation(self, grid128):
        s = cosine_state(grid128, 0.1, 0.2)
        res = run(s, SimConfig(t_end=1.0, dt=1e-3, record_every=100))
        assert res.diagnostics.aborted is None
        mass = np.asarray(res.diagnostics.mass)
        assert np.abs(mass - mass[0]).max() <= 1e-11
        e = np.asarray(res.diagnostics.energy)
        assert np.abs(e - e[0]).max() / e[0] <= 1e-7

    def test_sign_conditions_along_run(self, grid128):
        s = cosine_state(grid128, 0.1, 0.2)
        res = run(s, SimConfig(t_end=1.0, dt=1e-3, record_every=100))
        assert min(res.diagnostics.min_depth) >= 0.5
        assert min(res.diagnostics.min_a) >= 0.5

    def test_constraint_drift_and_reprojection(self, grid128):
        s = cosine_state(grid128, 0.1, 0.2)
        free = run(s, SimConfig(t_end=0.5, dt=1e-3, record_every=100))
        assert max(free.diagnostics.constraint_max) <= 1e-10
        proj = run(s, SimConfig(t_end=0.5, dt=1e-3, record_every=100, reproject_every=10))
        assert max(proj.diagnostics.constraint_max) <= 1e-8

    def test_trajectory_recording(self, grid64):
        s = cosine_state(grid64, 0.05, 0.3)
        res = run(s, SimConfig(t_end=0.1, dt=2e-3, record_every=10, store_trajectory=True))
        assert res.trajectory is not None
        times = [t for t, _ in res.trajectory]
        assert times[0] == 0.0
        assert times[-1] == pytest.approx(0.1)
        assert len(times) == len(res.diagnostics.times)

    def test_cfl_guard(self, grid64):
        s = rest_state(grid64)
        with pytest.raises(ValueError):
            run(s, SimConfig(t_end=1.0, dt=0.2))

    def test_abort_keeps_partial_diagnostics(self, grid64):
        # legal at t=0 but the strong flow drives the trough below the floor
        eta = field_from_function(grid64, lambda x: 0.4 * np.cos(x) - 0.45)
        s = IkState(eta, field_from_function(grid64, lambda x: 5.0 * np.sin(x)),
                    zeros(grid64), 1.0, h_min=0.1)
        res = run(s, SimConfig(t_end=2.0, dt=2e-2, record_every=1))
        assert res.diagnostics.aborted is not None
        assert len(res.diagnostics.times) >= 1


def test_energy_drift_order(grid128):
    # classical fourth-order stepping: halving dt divides the drift by ~16
    # (measured on a run whose drift is well above rounding)
    from iskak.spectral import PeriodicGrid
    grid = PeriodicGrid(256)
    eta0 = field_from_function(grid, lambda x: 0.1 * np.cos(4 * x))
    s = ik_state_from_surface(eta0, zeros(grid), 0.5, cg_tol=1e-13)
    drifts = {}
    for dt in (1e-3, 5e-4):
        res = run(s, SimConfig(t_end=1.0, dt=dt, record_every=10**9, cg_tol=1e-13))
        e = res.diagnostics.energy
        drifts[dt] = abs(e[-1] - e[0]) / e[0]
    assert drifts[1e-3] / drifts[5e-4] == pytest.approx(16.0, abs=4.0)
