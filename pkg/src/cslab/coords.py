"""Shear-adapted moving coordinates for the channel flow.

The perturbation tilts the background shear, so diagnostics that expect
oscillation in ``x - t y`` lose accuracy once the mean profile deforms.  This
module co-integrates the corrected coordinate ``z = x - t v(t, y)`` alongside a
flow run.  The profile ``v`` is reconstructed from an auxiliary field ``D``
with ``v = y + D / t``, and the associated corrector fields are

* ``G = dv/dt - nu v_yy``, the forcing seen by the coordinate frame,
* ``H = v_y - 1`` and ``Hbar = dG/dy``, the shear corrections.

The singular ``2/t`` damping in the G and Hbar equations is absorbed by
evolving ``t^2 G`` and ``t^2 Hbar``, whose equations are plain heat equations
with right-hand side ``-t * source``.  All fields are x-averages, so every
solve here is one-dimensional in y.

Everything downstream (vector fields along the frame, sheared profiles,
commutation residuals) lives here too, since it all needs the same
``CoordState``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import lu_factor, lu_solve

from .flow import FlowState
from .spectral import (
    Grid,
    SpectralField,
    ddx,
    ddy,
    diff_ops,
    field_from_coeffs,
    product,
)


class CoordinateDegeneracyError(RuntimeError):
    """Raised when v_y drops to 1/2 or below and the frame stops being usable."""


class CoordSources(NamedTuple):
    """x-averaged source columns driving the coordinate fields."""

    P0u1: np.ndarray
    S_G: np.ndarray
    S_Hbar: np.ndarray


@dataclass(frozen=True)
class CoordState:
    """Coordinate frame at one instant; all arrays are real y-columns."""

    grid: Grid
    t: float
    v: np.ndarray
    v_y: np.ndarray
    H: np.ndarray
    Hbar: np.ndarray
    G: np.ndarray
    D_aux: np.ndarray

    def require_nondegenerate(self) -> None:
        m = float(np.min(self.v_y))
        if m <= 0.5:
            raise CoordinateDegeneracyError(
                f"min v_y = {m:.4f} <= 1/2 at t = {self.t:.4f}"
            )


def identity_coord_state(grid: Grid, t: float) -> CoordState:
    """The untilted frame v = y."""
    if t <= 0.0:
        raise ValueError("coordinate frame requires t > 0")
    y = grid.y_nodes
    z = np.zeros_like(y)
    return CoordState(
        grid=grid, t=t, v=y.copy(), v_y=np.ones_like(y),
        H=z.copy(), Hbar=z.copy(), G=z.copy(), D_aux=z.copy(),
    )


def coord_sources(state: FlowState) -> CoordSources:
    """Extract (P0 u1, (u_neq . grad u1)_0, (u_neq . grad omega)_0).

    The fluctuation u_neq drops the k = 0 row of u1; u2 has no mean to begin
    with.  Products go through the dealiased physical-space path and only the
    k = 0 row of the result is kept.
    """
    grid = state.grid
    u1neq = field_from_coeffs(grid, state.u1.coeffs.copy(), real=state.u1.real)
    u1neq.coeffs[0, :] = 0.0
    s_g = np.real(
        product(u1neq, ddx(state.u1)).coeffs[0, :]
        + product(state.u2, ddy(state.u1)).coeffs[0, :]
    )
    s_hb = np.real(
        product(u1neq, ddx(state.omega)).coeffs[0, :]
        + product(state.u2, ddy(state.omega)).coeffs[0, :]
    )
    p0u1 = np.real(state.u1.coeffs[0, :])
    return CoordSources(P0u1=p0u1, S_G=s_g, S_Hbar=s_hb)


class _HeatSolvers:
    """Prefactored 1-D Crank-Nicolson matrices for one (nu, dt) pair."""

    def __init__(self, grid: Grid, nu: float, dt: float):
        ops = diff_ops(grid)
        n = grid.Ny + 1
        a = 0.5 * nu * dt
        self.explicit = np.eye(n) + a * ops.D2
        if nu > 0.0:
            self.lu_dir = lu_factor(ops.dirichlet_bordered(np.eye(n) - a * ops.D2))
            self.lu_neu = lu_factor(ops.neumann_bordered(np.eye(n) - a * ops.D2))
        else:
            self.lu_dir = None
            self.lu_neu = None

    def step(self, f: np.ndarray, integrated_rhs: np.ndarray, bc: str) -> np.ndarray:
        rhs = self.explicit @ f + integrated_rhs
        if self.lu_dir is None:
            return rhs
        rhs = rhs.copy()
        rhs[0] = 0.0
        rhs[-1] = 0.0
        lu = self.lu_dir if bc == "dirichlet" else self.lu_neu
        return lu_solve(lu, rhs)


_SOLVER_CACHE: dict[tuple[int, int, float, float], _HeatSolvers] = {}


def _heat_solvers(grid: Grid, nu: float, dt: float) -> _HeatSolvers:
    key = (grid.Nx, grid.Ny, float(nu), float(dt))
    sol = _SOLVER_CACHE.get(key)
    if sol is None:
        sol = _HeatSolvers(grid, nu, dt)
        _SOLVER_CACHE[key] = sol
    return sol


def initial_coord_state(grid: Grid, t0: float, sources: CoordSources) -> CoordState:
    """Activation data at t0: D = H = 0 with G seeded from the reconstruction.

    Starting G at zero leaves a permanent offset between the evolved field and
    (P0u1 - (v - y)) / t, because their difference obeys a pure heat equation.
    Seeding G = P0u1 / t0 (the reconstruction with D = 0) removes the offset;
    Hbar = dG/dy keeps the two y-derivative fields identified from the start.
    """
    if t0 <= 0.0:
        raise ValueError("activation time must be positive")
    ops = diff_ops(grid)
    y = grid.y_nodes
    g0 = sources.P0u1 / t0
    hbar0 = ops.D1 @ g0
    z = np.zeros_like(y)
    return CoordState(
        grid=grid, t=t0, v=y.copy(), v_y=np.ones_like(y),
        H=z.copy(), Hbar=hbar0, G=g0, D_aux=z.copy(),
    )


def evolve_coords(
    coord: CoordState,
    sources_old: CoordSources,
    sources_new: CoordSources,
    nu: float,
    dt: float,
) -> CoordState:
    """One Crank-Nicolson step of (t^2 Hbar, t^2 G, D) from coord.t.

    Sources are trapezoid-averaged between the two endpoint states of the
    accompanying flow step.  After the linear solves, v, v_y and H are
    re-derived from D so the kinematic relations hold exactly:
    v = y + D/t, H = dD/dy / t, v_y = 1 + H.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if coord.t <= 0.0:
        raise ValueError("coordinate frame requires t > 0")
    grid = coord.grid
    ops = diff_ops(grid)
    sol = _heat_solvers(grid, nu, dt)
    t_old = coord.t
    t_new = t_old + dt

    y_h = t_old**2 * coord.Hbar
    y_g = t_old**2 * coord.G
    rhs_h = -0.5 * dt * (t_old * sources_old.S_Hbar + t_new * sources_new.S_Hbar)
    rhs_g = -0.5 * dt * (t_old * sources_old.S_G + t_new * sources_new.S_G)
    rhs_d = 0.5 * dt * (sources_old.P0u1 + sources_new.P0u1)

    y_h_new = sol.step(y_h, rhs_h, "dirichlet")
    y_g_new = sol.step(y_g, rhs_g, "neumann")
    d_new = sol.step(coord.D_aux, rhs_d, "neumann")

    h_new = (ops.D1 @ d_new) / t_new
    out = CoordState(
        grid=grid,
        t=t_new,
        v=grid.y_nodes + d_new / t_new,
        v_y=1.0 + h_new,
        H=h_new,
        Hbar=y_h_new / t_new**2,
        G=y_g_new / t_new**2,
        D_aux=d_new,
    )
    out.require_nondegenerate()
    return out


class CoordEvolver:
    """Flow-run observer that carries the coordinate frame along.

    Inactive until the first step time at or past t_activate; the frame is
    then seeded via initial_coord_state and advanced once per flow step.
    Snapshots of the frame are collected at the requested sample times.
    """

    def __init__(
        self,
        grid: Grid,
        nu: float,
        t_activate: float = 0.1,
        sample_times: Sequence[float] = (),
    ):
        if t_activate <= 0.0:
            raise ValueError("activation time must be positive")
        self.grid = grid
        self.nu = float(nu)
        self.t_activate = float(t_activate)
        self.state: CoordState | None = None
        self.history: list[CoordState] = []
        self._samples = sorted(float(s) for s in sample_times)
        self._ptr = 0
        self._prev_sources: CoordSources | None = None
        self._prev_t: float | None = None

    def __call__(self, flow: FlowState, record) -> None:
        t = flow.t
        if self.state is None:
            if t + 1e-9 >= self.t_activate:
                src = coord_sources(flow)
                self.state = initial_coord_state(self.grid, t, src)
                self._prev_sources = src
                self._prev_t = t
                self._collect(t)
            return
        src = coord_sources(flow)
        dt = t - self._prev_t
        self.state = evolve_coords(self.state, self._prev_sources, src, self.nu, dt)
        self._prev_sources = src
        self._prev_t = t
        self._collect(t)

    def _collect(self, t: float) -> None:
        while self._ptr < len(self._samples) and t >= self._samples[self._ptr] - 1e-9:
            self.history.append(self.state)
            self._ptr += 1


def reconstructed_G(coord: CoordState, p0u1: np.ndarray) -> np.ndarray:
    """(P0u1 - (v - y)) / t, the algebraic route to G."""
    return (p0u1 - (coord.v - coord.grid.y_nodes)) / coord.t


def hbar_cross_check(coord: CoordState, p0u1: np.ndarray) -> np.ndarray:
    """(d(P0u1)/dy - H) / t, the mean-shear route to Hbar.

    Since t G = P0u1 - (v - y), differentiating in y gives t Hbar =
    d(P0u1)/dy - H, so this should track the evolved Hbar.  With this
    module's orientation (omega = -Lap psi, u = (-psi_y, psi_x)) the
    derivative d(P0u1)/dy equals +P0 omega.
    """
    ops = diff_ops(coord.grid)
    return (ops.D1 @ p0u1 - coord.H) / coord.t


def dbar_v(f: SpectralField, coord: CoordState) -> SpectralField:
    """(1/v_y) d/dy, the y-derivative along the tilted frame."""
    ops = diff_ops(f.grid)
    c = (f.coeffs @ ops.D1.T) / coord.v_y[None, :]
    return field_from_coeffs(f.grid, c, real=f.real)


def gamma_apply(f: SpectralField, coord: CoordState) -> SpectralField:
    """The adapted gradient (1/v_y) d/dy + t d/dx."""
    ops = diff_ops(f.grid)
    c = (f.coeffs @ ops.D1.T) / coord.v_y[None, :]
    c = c + 1j * coord.t * f.grid.k_modes[:, None] * f.coeffs
    return field_from_coeffs(f.grid, c, real=f.real)


def gamma_apply_k(col: np.ndarray, k: int, coord: CoordState) -> np.ndarray:
    """Single-mode version: (1/v_y) d/dy + i k t on one y-column."""
    ops = diff_ops(coord.grid)
    return (ops.D1 @ col) / coord.v_y + 1j * k * coord.t * col


@dataclass(frozen=True)
class ProfileField:
    """Sheared profiles f_k(v) = omega_k(y(v)) e^{i k t v} on a uniform v-grid.

    The grid spans pad_factor times the physical v-range so that compactly
    cut-off profiles can be Fourier-analyzed in v without wraparound.
    """

    t: float
    k_modes: np.ndarray
    v_grid: np.ndarray
    values: np.ndarray

    @property
    def dv(self) -> float:
        return float(self.v_grid[1] - self.v_grid[0])


def _barycentric_matrix(nodes: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Interpolation matrix from Chebyshev-Lobatto nodes to arbitrary points."""
    n = nodes.size - 1
    w = np.ones(n + 1)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    diff = pts[:, None] - nodes[None, :]
    hit = np.isclose(diff, 0.0, atol=1e-14)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = w[None, :] / diff
    rows_hit = hit.any(axis=1)
    m[rows_hit] = 0.0
    m[hit] = 1.0
    denom = m.sum(axis=1)
    return m / denom[:, None]


def profile_transform(
    omega: SpectralField,
    coord: CoordState,
    n_v: int = 1024,
    pad_factor: float = 4.0,
) -> ProfileField:
    """Resample each Fourier mode of omega along v and strip the shear phase.

    y(v) comes from a monotone (PCHIP) inversion of the profile; omega_k is
    evaluated there by barycentric interpolation on the Chebyshev nodes, and
    the factor e^{i k t v} removes the bulk oscillation so the result varies
    on the perturbation scale.  Points outside the physical v-range are zero.
    """
    grid = omega.grid
    v = coord.v
    if not np.all(np.diff(v) < 0.0):
        raise ValueError("profile v is not monotone on the node set")
    if pad_factor < 1.0:
        raise ValueError("pad_factor must be at least 1")
    v_asc = v[::-1]
    y_asc = grid.y_nodes[::-1]
    inv = PchipInterpolator(v_asc, y_asc)

    lo, hi = v_asc[0], v_asc[-1]
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo) * pad_factor
    v_grid = center - half + (2.0 * half / n_v) * np.arange(n_v)
    inside = (v_grid >= lo) & (v_grid <= hi)

    values = np.zeros((grid.Nx, n_v), dtype=np.complex128)
    if np.any(inside):
        y_pts = inv(v_grid[inside])
        interp = _barycentric_matrix(grid.y_nodes, y_pts)
        sampled = omega.coeffs @ interp.T
        phase = np.exp(
            1j * coord.t * grid.k_modes[:, None] * v_grid[None, inside]
        )
        values[:, inside] = sampled * phase
    return ProfileField(
        t=coord.t, k_modes=grid.k_modes.copy(), v_grid=v_grid, values=values
    )


def _transport_op(
    f_coeffs: np.ndarray, grid: Grid, p0u1: np.ndarray, nu: float
) -> np.ndarray:
    """(y + P0u1) d/dx - nu Lap, applied to coefficient arrays."""
    ops = diff_ops(grid)
    shear = grid.y_nodes + p0u1
    adv = 1j * grid.k_modes[:, None] * (shear[None, :] * f_coeffs)
    lap = f_coeffs @ ops.D2.T - (grid.k_modes**2)[:, None] * f_coeffs
    return adv - nu * lap


def gamma_commutation_residual(
    states: Sequence[FlowState],
    coords: Sequence[CoordState],
    nu: float,
    wall_buffer: int = 3,
) -> float:
    """Relative size of [Gamma_t, L] omega minus its closed-form value.

    L = d/dt + (y + P0u1) d/dx - nu Lap; the closed form is
    (dbar_v G) Gamma_t omega - 2 nu v_yy dbar_v^2 omega, with both prefix
    derivatives acting on the coefficient fields only.  Time derivatives use
    centered differences over three equispaced samples, so the residual decays
    at second order in the sample spacing.  The norm drops wall_buffer nodes
    at each wall, where the bordered rows do not satisfy the bulk equations.
    """
    if len(states) != 3 or len(coords) != 3:
        raise ValueError("need exactly three equispaced samples")
    t_m, t_0, t_p = (s.t for s in states)
    delta = t_p - t_0
    if abs((t_0 - t_m) - delta) > 1e-8 * max(delta, 1.0):
        raise ValueError("samples are not equispaced in time")
    for s, c in zip(states, coords):
        if abs(s.t - c.t) > 1e-8:
            raise ValueError("flow and coordinate samples are misaligned")
    grid = states[0].grid
    ops = diff_ops(grid)
    p0u1 = np.real(states[1].u1.coeffs[0, :])

    # Gamma_t (L omega): centered d/dt of omega, then transport, then Gamma.
    dw_dt = (states[2].omega.coeffs - states[0].omega.coeffs) / (2.0 * delta)
    l_omega = dw_dt + _transport_op(states[1].omega.coeffs, grid, p0u1, nu)
    lhs_a = gamma_apply(
        field_from_coeffs(grid, l_omega, real=False), coords[1]
    ).coeffs

    # L (Gamma_t omega): Gamma at each sample with its own frame.
    g_m = gamma_apply(states[0].omega, coords[0]).coeffs
    g_0 = gamma_apply(states[1].omega, coords[1]).coeffs
    g_p = gamma_apply(states[2].omega, coords[2]).coeffs
    lhs_b = (g_p - g_m) / (2.0 * delta) + _transport_op(g_0, grid, p0u1, nu)

    coord = coords[1]
    dbar_g = (ops.D1 @ coord.G) / coord.v_y
    v_yy = ops.D1 @ coord.v_y
    d2_omega = dbar_v(dbar_v(states[1].omega, coord), coord).coeffs
    rhs = dbar_g[None, :] * g_0 - 2.0 * nu * (v_yy[None, :] * d2_omega)

    resid = (lhs_a - lhs_b) - rhs
    sl = slice(wall_buffer, grid.Ny + 1 - wall_buffer)
    w = grid.cc_weights[sl]

    def _norm(c: np.ndarray) -> float:
        return float(np.sqrt(2.0 * np.pi * np.sum(w * np.sum(np.abs(c[:, sl]) ** 2, axis=0))))

    denom = _norm(g_0)
    if denom == 0.0:
        return _norm(resid)
    return _norm(resid) / denom
