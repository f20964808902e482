"""Flow solver oracles: Biot-Savart inversion, advection, IMEX and RK4 steps."""

import numpy as np
import pytest

from cslab.flow import (
    CFLError,
    FlowState,
    SolverConfig,
    biot_savart,
    cfl_timestep,
    flow_state,
    make_initial_data,
    nonlinear_term,
    run,
    step_euler,
    step_ns,
)
from cslab.spectral import (
    field_from_coeffs,
    l2_norm,
    linf_norm,
    make_grid,
    to_physical,
    to_spectral,
)


def bump(y, a):
    s = np.asarray(y) / a
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def smooth_random_field(grid, seed, kmax=6, mmax=16):
    """Band-limited random field built from Chebyshev-profile cosines."""
    rng = np.random.default_rng(seed)
    theta = np.arccos(np.clip(grid.y_nodes, -1.0, 1.0))
    values = np.zeros((grid.Nx, grid.Ny + 1))
    for k in range(kmax + 1):
        for m in range(mmax + 1):
            amp = rng.normal() / (1.0 + k * k + m * m)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            values += amp * np.cos(k * grid.x_nodes[:, None] + phase) * np.cos(m * theta)[None, :]
    return to_spectral(values, grid)


class TestBiotSavart:
    def test_zero(self):
        grid = make_grid(16, 32)
        w = to_spectral(np.zeros(grid.shape), grid)
        psi, u1, u2 = biot_savart(w)
        assert l2_norm(psi) == 0.0
        assert l2_norm(u1) == 0.0
        assert l2_norm(u2) == 0.0

    def test_analytic_eigenfunction(self):
        # -Lap(sin(pi(y+1)) cos x) = (1 + pi^2) sin(pi(y+1)) cos x
        grid = make_grid(32, 96)
        X = grid.x_nodes[:, None]
        Y = grid.y_nodes[None, :]
        w_vals = 2.0 * np.sin(np.pi * (Y + 1.0)) * np.cos(X)
        w = to_spectral(np.broadcast_to(w_vals, grid.shape).copy(), grid)
        psi, u1, u2 = biot_savart(w)
        fac = 1.0 / (np.pi**2 + 1.0)
        psi_exact = fac * 2.0 * np.sin(np.pi * (Y + 1.0)) * np.cos(X)
        u1_exact = -fac * 2.0 * np.pi * np.cos(np.pi * (Y + 1.0)) * np.cos(X)
        u2_exact = -fac * 2.0 * np.sin(np.pi * (Y + 1.0)) * np.sin(X)
        assert np.max(np.abs(to_physical(psi) - psi_exact)) < 1e-10
        assert np.max(np.abs(to_physical(u1) - u1_exact)) < 1e-9
        assert np.max(np.abs(to_physical(u2) - u2_exact)) < 1e-10

    def test_residual_random(self):
        grid = make_grid(32, 128)
        for seed in range(5):
            w = smooth_random_field(grid, seed)
            psi, _, _ = biot_savart(w)
            # interior rows of (d_yy - k^2) psi_k must equal -w_k
            from cslab.flow import _laplacian

            res = _laplacian(grid, psi.coeffs) + w.coeffs
            interior = np.max(np.abs(res[:, 1:-1]))
            assert interior <= 1e-9 * linf_norm(w)

    def test_wall_rows(self):
        grid = make_grid(16, 48)
        w = smooth_random_field(grid, 3, kmax=4, mmax=10)
        psi, _, u2 = biot_savart(w)
        assert np.max(np.abs(psi.coeffs[:, (0, -1)])) < 1e-13
        assert np.max(np.abs(u2.coeffs[:, (0, -1)])) < 1e-12


class TestNonlinearTerm:
    def test_manufactured(self):
        # psi = 0.1 sin(pi(y+1)) (cos x + 0.3 sin 2x), everything in closed form
        grid = make_grid(32, 96)
        X = grid.x_nodes[:, None]
        Y = grid.y_nodes[None, :]
        P = np.sin(np.pi * (Y + 1.0))
        Pp = np.pi * np.cos(np.pi * (Y + 1.0))
        Q = np.cos(X) + 0.3 * np.sin(2.0 * X)
        Qp = -np.sin(X) + 0.6 * np.cos(2.0 * X)
        c1 = 1.0 + np.pi**2
        c2 = 1.2 + 0.3 * np.pi**2
        w_vals = 0.1 * P * (c1 * np.cos(X) + c2 * np.sin(2.0 * X))
        wx_vals = 0.1 * P * (-c1 * np.sin(X) + 2.0 * c2 * np.cos(2.0 * X))
        wy_vals = 0.1 * Pp * (c1 * np.cos(X) + c2 * np.sin(2.0 * X))
        u1_vals = -0.1 * Pp * Q
        u2_vals = 0.1 * P * Qp
        expected = (Y + u1_vals) * wx_vals + u2_vals * wy_vals

        def f(vals):
            return to_spectral(np.broadcast_to(vals, grid.shape).copy(), grid)

        state = FlowState(
            t=0.0, omega=f(w_vals), psi=f(0.1 * P * Q), u1=f(u1_vals), u2=f(u2_vals),
            nu=0.1, eps=1.0,
        )
        got = to_physical(nonlinear_term(state))
        assert np.max(np.abs(got - expected)) < 1e-9

    def test_x_independent_vorticity(self):
        grid = make_grid(16, 64)
        prof = np.sin(np.pi * (grid.y_nodes + 1.0) / 2.0)
        w = to_spectral(np.broadcast_to(prof, grid.shape).copy(), grid)
        state = flow_state(w, 0.0, 1e-3, 1.0)
        assert l2_norm(nonlinear_term(state)) < 1e-14

    def test_zero(self):
        grid = make_grid(16, 32)
        state = flow_state(to_spectral(np.zeros(grid.shape), grid), 0.0, 1e-3, 0.0)
        assert l2_norm(nonlinear_term(state)) == 0.0


class TestViscousStepping:
    def test_zero_fixed_point(self):
        grid = make_grid(16, 32)
        state = flow_state(to_spectral(np.zeros(grid.shape), grid), 0.0, 1e-2, 0.0)
        new = step_ns(state, 0.01)
        assert l2_norm(new.omega) == 0.0
        assert new.t == pytest.approx(0.01)

    def test_heat_decay_rate(self):
        # pure k=0 data: advection drops out, CN integrates the heat equation
        nu = 0.1
        grid = make_grid(8, 128)
        prof = np.sin(np.pi * (grid.y_nodes + 1.0) / 2.0)
        w0 = to_spectral(np.broadcast_to(prof, grid.shape).copy(), grid)
        cfg = SolverConfig(nu=nu, t_end=5.0, Nx=8, Ny=128, dt=0.005, scheme="imex-cnab2")
        traj = run(cfg, grid=grid, omega0=w0)
        t, q = traj.enstrophy_series()
        slope = np.polyfit(t, np.log(q), 1)[0]
        rate = -0.5 * slope
        exact = nu * (np.pi / 2.0) ** 2
        assert abs(rate / exact - 1.0) < 1e-6

    def test_monotone_enstrophy_and_identity(self):
        # The identity defect is dominated by the Chebyshev tail of the
        # Gevrey bump (first step, before dissipation smooths it); it needs
        # the reference wall resolution to sit under 1e-8 relative.
        cfg = SolverConfig(nu=1e-3, t_end=0.5, Nx=32, Ny=256, dt=0.01, eps=0.01, seed=7)
        traj = run(cfg)
        q = [traj.q0] + [r.enstrophy for r in traj.records]
        diffs = np.diff(q)
        assert np.all(diffs <= 1e-10)
        worst = max(abs(r.residual) for r in traj.records)
        assert worst <= 1e-8 * traj.q0

    def test_walls_stay_zero(self):
        cfg = SolverConfig(nu=1e-3, t_end=0.2, Nx=32, Ny=96, dt=0.01, eps=0.05)
        traj = run(cfg)
        w = traj.final.omega.coeffs
        assert np.max(np.abs(w[:, (0, -1)])) < 1e-12
        assert np.max(np.abs(traj.final.psi.coeffs[:, (0, -1)])) < 1e-12
        assert np.max(np.abs(traj.final.u2.coeffs[:, (0, -1)])) < 1e-12


class TestInviscidStepping:
    def test_passive_transport_oracle(self):
        # At eps ~ 1e-8 the velocity feedback is negligible and the single
        # mode follows free shear transport: w_k(t, y) = w_k(0, y) e^{-ikty}.
        grid = make_grid(16, 128)
        X = grid.x_nodes[:, None]
        prof = bump(grid.y_nodes, 0.2)
        vals = np.cos(X) * prof[None, :]
        w0 = to_spectral(np.broadcast_to(vals, grid.shape).copy(), grid)
        scale = 1e-8 / l2_norm(w0)
        w0 = field_from_coeffs(grid, scale * w0.coeffs)
        t_end = 2.0
        cfg = SolverConfig(nu=0.0, t_end=t_end, Nx=16, Ny=128, dt=0.02, scheme="rk4")
        traj = run(cfg, grid=grid, omega0=w0)
        got = traj.final.omega.mode(1)
        exact = w0.mode(1) * np.exp(-1j * t_end * grid.y_nodes)
        err = np.linalg.norm(got - exact) / np.linalg.norm(exact)
        assert err < 1e-5

    def test_enstrophy_conservation(self):
        cfg = SolverConfig(nu=0.0, t_end=1.0, Nx=64, Ny=256, dt=0.01, eps=0.01, scheme="rk4")
        traj = run(cfg)
        t, q = traj.enstrophy_series()
        drift = np.max(np.abs(q - q[0]))
        assert drift <= 1e-8 * q[0]

    def test_zero_fixed_point(self):
        grid = make_grid(16, 32)
        state = flow_state(to_spectral(np.zeros(grid.shape), grid), 0.0, 0.0, 0.0)
        new = step_euler(state, 0.01)
        assert l2_norm(new.omega) == 0.0


class TestInitialData:
    def test_support(self):
        grid = make_grid(32, 128)
        w = make_initial_data(grid, eps=0.01, a=0.2, modes=(1,))
        vals = to_physical(w)
        outside = np.abs(grid.y_nodes) > 0.2
        assert np.max(np.abs(vals[:, outside])) < 1e-13

    def test_normalization(self):
        grid = make_grid(32, 128)
        for modes in [(1,), (1, 2), (1, 2, 3)]:
            w = make_initial_data(grid, eps=0.01, a=0.2, modes=modes, seed=4)
            assert l2_norm(w) == pytest.approx(0.01, rel=1e-10)

    def test_no_mean_mode(self):
        grid = make_grid(32, 128)
        w = make_initial_data(grid, eps=0.01, a=0.2, modes=(1, 2))
        assert np.max(np.abs(w.mode(0))) < 1e-15

    def test_rejects_wide_support(self):
        grid = make_grid(16, 32)
        with pytest.raises(ValueError, match="half-width"):
            make_initial_data(grid, eps=0.01, a=0.25)

    def test_rejects_mode_outside_band(self):
        grid = make_grid(16, 32)
        with pytest.raises(ValueError, match="band"):
            make_initial_data(grid, eps=0.01, a=0.2, modes=(6,))

    def test_eps_zero(self):
        grid = make_grid(16, 32)
        w = make_initial_data(grid, eps=0.0, a=0.2)
        assert l2_norm(w) == 0.0

    def test_seeded_phases_reproducible(self):
        grid = make_grid(16, 64)
        a = make_initial_data(grid, eps=0.01, a=0.2, seed=11)
        b = make_initial_data(grid, eps=0.01, a=0.2, seed=11)
        assert np.array_equal(a.coeffs, b.coeffs)


class TestRunDriver:
    def test_t_end_zero(self):
        cfg = SolverConfig(nu=1e-3, t_end=0.0, Nx=16, Ny=32, dt=0.01, eps=0.01)
        traj = run(cfg)
        assert len(traj.states) == 1
        assert traj.states[0].t == 0.0

    def test_determinism(self):
        cfg = SolverConfig(nu=1e-3, t_end=0.3, Nx=32, Ny=96, dt=0.01, eps=0.02, seed=5)
        a = run(cfg)
        b = run(cfg)
        assert np.array_equal(a.final.omega.coeffs, b.final.omega.coeffs)

    def test_sample_times(self):
        cfg = SolverConfig(
            nu=1e-3, t_end=1.0, Nx=16, Ny=48, dt=0.05, eps=0.01,
            sample_times=(0.52, 1.0),
        )
        traj = run(cfg)
        assert len(traj.states) == 3
        assert traj.states[1].t == pytest.approx(0.55, abs=1e-12)
        assert traj.states[2].t == pytest.approx(1.0, abs=1e-12)
        assert traj.states[2] is traj.final

    def test_cfl_rejects_large_dt(self):
        cfg = SolverConfig(nu=1e-3, t_end=1.0, Nx=64, Ny=64, dt=0.2, eps=0.01)
        with pytest.raises(CFLError, match="stability bound"):
            run(cfg)

    def test_cfl_timestep_scales(self):
        grid = make_grid(32, 64)
        w = make_initial_data(grid, eps=0.01, a=0.2)
        state = flow_state(w, 0.0, 1e-3, 0.01)
        dt_half = cfl_timestep(state, cfl_safety=0.25)
        dt_full = cfl_timestep(state, cfl_safety=0.5)
        assert dt_half == pytest.approx(0.5 * dt_full)

    def test_richardson_second_order(self):
        base = dict(nu=0.01, t_end=0.5, Nx=16, Ny=48, eps=0.05, seed=2)
        ref = run(SolverConfig(dt=0.0025, **base)).final.omega.coeffs
        errs = []
        for dt in (0.02, 0.01):
            final = run(SolverConfig(dt=dt, **base)).final.omega.coeffs
            errs.append(np.linalg.norm(final - ref))
        ratio = errs[0] / errs[1]
        assert 3.0 < ratio < 5.2

    def test_scheme_consistency_checks(self):
        with pytest.raises(ValueError, match="RK4"):
            run(SolverConfig(nu=1e-3, t_end=0.1, Nx=16, Ny=32, scheme="rk4"))
        with pytest.raises(ValueError, match="IMEX"):
            run(SolverConfig(nu=0.0, t_end=0.1, Nx=16, Ny=32, scheme="imex-cnab2"))
