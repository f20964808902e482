"""Perturbation flow around plane Couette in the channel T x [-1, 1].

Evolves the perturbation vorticity w of u = (y, 0) + u',

    dt w + y dx w + u'.grad w = nu Lap w,      w(x, +-1) = 0,

with the perturbation velocity recovered from w through the stream
function: -Lap psi = w, psi(x, +-1) = 0, u' = (-dy psi, dx psi).

Viscous runs use IMEX time stepping: Crank-Nicolson on nu*Lap with
prefactored per-mode bordered solves, Adams-Bashforth 2 on advection with
a self-starting RK2 (predict/correct) first step.  Inviscid runs use
classical RK4.  The step size is fixed for a whole run, so trajectories
are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .spectral import (
    Grid,
    HelmholtzFamily,
    SpectralField,
    ddx,
    ddy,
    dealias,
    diff_ops,
    field_from_coeffs,
    l2_norm,
    linf_norm,
    make_grid,
    product,
    to_spectral,
)


class CFLError(RuntimeError):
    """Requested step size exceeds the advective stability bound."""


class BlowupError(RuntimeError):
    """Non-finite values appeared during time integration."""


# ---------------------------------------------------------------------------
# state and elliptic inversion


@dataclass(frozen=True)
class FlowState:
    """Vorticity plus derived stream function and velocity at one time."""

    t: float
    omega: SpectralField
    psi: SpectralField
    u1: SpectralField
    u2: SpectralField
    nu: float
    eps: float

    @property
    def grid(self) -> Grid:
        return self.omega.grid


_POISSON_CACHE: dict[tuple[int, int], HelmholtzFamily] = {}


def poisson_family(grid: Grid) -> HelmholtzFamily:
    """Prefactored (D2 - k^2) solves with homogeneous Dirichlet rows."""
    key = (grid.Nx, grid.Ny)
    fam = _POISSON_CACHE.get(key)
    if fam is None:
        fam = HelmholtzFamily(grid, 0.0, 1.0, grid.k_modes, "dirichlet")
        _POISSON_CACHE[key] = fam
    return fam


def _solve_rows(fam: HelmholtzFamily, grid: Grid, rhs: np.ndarray, real: bool) -> np.ndarray:
    """Per-mode bordered solves; real fields reuse conjugate pairs."""
    out = np.empty_like(rhs)
    if real:
        half = grid.Nx // 2
        for i in range(half + 1):
            out[i] = fam.solve(int(grid.k_modes[i]), rhs[i])
        for i in range(1, half):
            out[grid.Nx - i] = np.conj(out[i])
    else:
        for i, k in enumerate(grid.k_modes):
            out[i] = fam.solve(int(k), rhs[i])
    return out


def biot_savart(omega: SpectralField) -> tuple[SpectralField, SpectralField, SpectralField]:
    """Invert -Lap psi = w with psi(+-1) = 0; return (psi, u1, u2)."""
    grid = omega.grid
    fam = poisson_family(grid)
    psi_c = _solve_rows(fam, grid, -omega.coeffs, omega.real)
    ops = diff_ops(grid)
    psi = field_from_coeffs(grid, psi_c, real=omega.real)
    u1 = field_from_coeffs(grid, -(psi_c @ ops.D1.T), real=omega.real)
    u2 = ddx(psi)
    return psi, u1, u2


def flow_state(omega: SpectralField, t: float, nu: float, eps: float) -> FlowState:
    psi, u1, u2 = biot_savart(omega)
    return FlowState(t=float(t), omega=omega, psi=psi, u1=u1, u2=u2, nu=float(nu), eps=float(eps))


def nonlinear_term(state: FlowState) -> SpectralField:
    """Advection term y dx w + u1 dx w + u2 dy w, dealiased."""
    grid = state.grid
    wx = ddx(state.omega)
    wy = ddy(state.omega)
    # Couette part: multiply nodal values by y, exact per x-mode.
    total = grid.y_nodes[None, :] * wx.coeffs
    total = total + product(state.u1, wx).coeffs
    total = total + product(state.u2, wy).coeffs
    return dealias(field_from_coeffs(grid, total, real=state.omega.real))


# ---------------------------------------------------------------------------
# step size control


def _cfl_bound(state: FlowState) -> float:
    """Raw advective stability bound for the current velocity field."""
    grid = state.grid
    dx = 2.0 * np.pi / grid.Nx
    dy_min = float(np.min(np.abs(np.diff(grid.y_nodes))))
    speed_x = 1.0 + float(np.max(np.abs(grid.y_nodes))) + linf_norm(state.u1)
    speed_y = max(linf_norm(state.u2), 1e-12)
    return min(dx / speed_x, dy_min / speed_y)


def cfl_timestep(state: FlowState, cfl_safety: float = 0.5, dt_cap: float = 0.05) -> float:
    """Fixed step chosen from the initial state; capped for long runs."""
    if not 0.0 < cfl_safety <= 1.0:
        raise ValueError("cfl_safety must lie in (0, 1]")
    return cfl_safety * min(_cfl_bound(state), dt_cap)


# ---------------------------------------------------------------------------
# inner products for the energy budget


def _inner(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    """Real L2 pairing 2*pi*sum_k int a_k conj(b_k) w(y) dy."""
    return float(2.0 * np.pi * np.sum(grid.cc_weights[None, :] * (a * b.conj()).real))


def _grad_sq(grid: Grid, c: np.ndarray) -> float:
    """||grad f||^2 from coefficients: x part by Parseval, y part via D1."""
    ops = diff_ops(grid)
    w = grid.cc_weights[None, :]
    k2 = grid.k_modes.astype(float) ** 2
    part_x = np.sum(k2[:, None] * w * np.abs(c) ** 2)
    part_y = np.sum(w * np.abs(c @ ops.D1.T) ** 2)
    return float(2.0 * np.pi * (part_x + part_y))


def _laplacian(grid: Grid, c: np.ndarray) -> np.ndarray:
    ops = diff_ops(grid)
    k2 = grid.k_modes.astype(float) ** 2
    return c @ ops.D2.T - k2[:, None] * c


@dataclass(frozen=True)
class StepRecord:
    """Per-step energy bookkeeping.

    residual is the discrete energy identity defect
        Q(new) - Q(old) + 2 nu dt ||grad w_mid||^2 + 2 dt <N*, w_mid>
    for the IMEX scheme; for RK4 it reduces to the conservation drift
    measured against the (skew to quadrature error) transform term.
    """

    t: float
    enstrophy: float
    residual: float
    dissipation: float
    transport: float


# ---------------------------------------------------------------------------
# steppers


_CN_CACHE: dict[tuple[int, int, float, float], HelmholtzFamily] = {}


def _cn_family(grid: Grid, nu: float, dt: float) -> HelmholtzFamily:
    key = (grid.Nx, grid.Ny, float(nu), float(dt))
    fam = _CN_CACHE.get(key)
    if fam is None:
        fam = HelmholtzFamily(grid, 1.0, -0.5 * nu * dt, grid.k_modes, "dirichlet")
        _CN_CACHE[key] = fam
    return fam


class NavierStokesStepper:
    """IMEX-CNAB2 with one self-starting RK2 step; nu > 0 only."""

    def __init__(self, grid: Grid, nu: float, dt: float):
        if nu <= 0.0:
            raise ValueError("NavierStokesStepper requires nu > 0")
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.grid = grid
        self.nu = float(nu)
        self.dt = float(dt)
        self.family = _cn_family(grid, nu, dt)
        self._n_prev: np.ndarray | None = None

    def _solve(self, rhs: np.ndarray, real: bool) -> np.ndarray:
        return _solve_rows(self.family, self.grid, rhs, real)

    def step(self, state: FlowState) -> tuple[FlowState, StepRecord]:
        grid, nu, dt = self.grid, self.nu, self.dt
        real = state.omega.real
        w = state.omega.coeffs
        half_visc = 0.5 * nu * dt * _laplacian(grid, w)
        n_cur = nonlinear_term(state).coeffs

        if self._n_prev is None:
            # Startup: CNAB1 predictor, then trapezoid corrector on advection.
            pred = self._solve(w + half_visc - dt * n_cur, real)
            pred_state = flow_state(
                field_from_coeffs(grid, pred, real=real),
                state.t + dt, nu, state.eps,
            )
            n_star = 0.5 * (n_cur + nonlinear_term(pred_state).coeffs)
        else:
            n_star = 1.5 * n_cur - 0.5 * self._n_prev

        w_new = self._solve(w + half_visc - dt * n_star, real)
        self._n_prev = n_cur

        new_state = flow_state(
            field_from_coeffs(grid, w_new, real=real),
            state.t + dt, nu, state.eps,
        )
        w_mid = 0.5 * (w + w_new)
        q_old = _inner(grid, w, w)
        q_new = _inner(grid, w_new, w_new)
        diss = _grad_sq(grid, w_mid)
        skew = _inner(grid, n_star, w_mid)
        record = StepRecord(
            t=new_state.t,
            enstrophy=q_new,
            residual=q_new - q_old + 2.0 * nu * dt * diss + 2.0 * dt * skew,
            dissipation=diss,
            transport=skew,
        )
        return new_state, record


class EulerStepper:
    """Classical RK4 on the advection operator; nu = 0."""

    def __init__(self, grid: Grid, dt: float):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        self.grid = grid
        self.dt = float(dt)

    def _rhs(self, state: FlowState) -> np.ndarray:
        n = nonlinear_term(state).coeffs.copy()
        # Wall rows of the advection term vanish identically (u2 = 0 and
        # dx w = 0 there); zero them so roundoff cannot leak through walls.
        n[:, 0] = 0.0
        n[:, -1] = 0.0
        return -n

    def step(self, state: FlowState) -> tuple[FlowState, StepRecord]:
        grid, dt = self.grid, self.dt
        w = state.omega.coeffs
        real = state.omega.real

        def stage(c: np.ndarray, t: float) -> np.ndarray:
            st = flow_state(field_from_coeffs(grid, c, real=real), t, 0.0, state.eps)
            return self._rhs(st)

        k1 = self._rhs(state)
        k2 = stage(w + 0.5 * dt * k1, state.t + 0.5 * dt)
        k3 = stage(w + 0.5 * dt * k2, state.t + 0.5 * dt)
        k4 = stage(w + dt * k3, state.t + dt)
        w_new = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        new_state = flow_state(
            field_from_coeffs(grid, w_new, real=real), state.t + dt, 0.0, state.eps
        )
        q_old = _inner(grid, w, w)
        q_new = _inner(grid, w_new, w_new)
        transport = _inner(grid, -k1, w)
        record = StepRecord(
            t=new_state.t,
            enstrophy=q_new,
            residual=q_new - q_old + 2.0 * dt * transport,
            dissipation=0.0,
            transport=transport,
        )
        return new_state, record


def step_ns(state: FlowState, dt: float) -> FlowState:
    """One self-starting IMEX step (see NavierStokesStepper for runs)."""
    stepper = NavierStokesStepper(state.grid, state.nu, dt)
    new_state, _ = stepper.step(state)
    return new_state


def step_euler(state: FlowState, dt: float) -> FlowState:
    """One RK4 step of the inviscid equation."""
    stepper = EulerStepper(state.grid, dt)
    new_state, _ = stepper.step(state)
    return new_state


# ---------------------------------------------------------------------------
# initial data


def make_initial_data(
    grid: Grid,
    eps: float,
    a: float = 0.2,
    modes: Sequence[int] = (1, 2),
    amplitudes: Sequence[float] | None = None,
    phases: Sequence[float] | None = None,
    seed: int | None = None,
) -> SpectralField:
    """Interior-supported perturbation, normalized so ||w||_L2 = eps.

    w(x, y) = eps * sum_m c_m cos(m x + phi_m) * beta(y / a) with the
    Gevrey-2 bump beta(s) = exp(-1 / (1 - s^2)); supp(w) lies in
    T x (-a, a) with a < 1/4.
    """
    if not 0.0 < a < 0.25:
        raise ValueError("support half-width a must lie in (0, 1/4)")
    modes = tuple(int(m) for m in modes)
    if any(m < 1 for m in modes):
        raise ValueError("x-modes must be positive integers")
    if any(m > grid.dealias_kmax for m in modes):
        raise ValueError("x-mode beyond the dealiased band")
    if amplitudes is None:
        amplitudes = (1.0,) * len(modes)
    if phases is None:
        if seed is None:
            phases = (0.0,) * len(modes)
        else:
            rng = np.random.default_rng(seed)
            phases = tuple(rng.uniform(0.0, 2.0 * np.pi, size=len(modes)))
    if not (len(amplitudes) == len(phases) == len(modes)):
        raise ValueError("modes, amplitudes, phases must have equal length")

    s = grid.y_nodes / a
    bump = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    bump[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))

    values = np.zeros((grid.Nx, grid.Ny + 1))
    for m, c, phi in zip(modes, amplitudes, phases):
        values += c * np.cos(m * grid.x_nodes[:, None] + phi) * bump[None, :]

    field = to_spectral(values, grid)
    if eps == 0.0:
        return field_from_coeffs(grid, np.zeros_like(field.coeffs))
    norm = l2_norm(field)
    if norm == 0.0:
        raise ValueError("degenerate initial data (zero norm)")
    return field_from_coeffs(grid, (eps / norm) * field.coeffs)


# ---------------------------------------------------------------------------
# run driver


@dataclass
class SolverConfig:
    """Everything a run needs; fully determines the trajectory."""

    nu: float
    t_end: float
    Nx: int = 64
    Ny: int = 256
    dt: float | None = None
    scheme: str = "auto"  # "imex-cnab2" | "rk4" | "auto"
    cfl_safety: float = 0.5
    dt_cap: float = 0.05
    eps: float = 0.01
    support_halfwidth: float = 0.2
    modes: Sequence[int] = (1, 2)
    amplitudes: Sequence[float] | None = None
    phases: Sequence[float] | None = None
    seed: int | None = None
    sample_times: Sequence[float] = ()

    def resolved_scheme(self) -> str:
        if self.scheme == "auto":
            return "imex-cnab2" if self.nu > 0.0 else "rk4"
        return self.scheme


@dataclass
class Trajectory:
    """Snapshots at the requested sample times plus per-step records."""

    grid: Grid
    config: SolverConfig
    dt: float
    q0: float
    states: list[FlowState]
    records: list[StepRecord]

    @property
    def times(self) -> list[float]:
        return [s.t for s in self.states]

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def enstrophy_series(self) -> tuple[np.ndarray, np.ndarray]:
        t = np.array([0.0] + [r.t for r in self.records])
        q = np.array([self.q0] + [r.enstrophy for r in self.records])
        return t, q


Observer = Callable[[FlowState, StepRecord], None]


def run(
    config: SolverConfig,
    grid: Grid | None = None,
    omega0: SpectralField | None = None,
    observers: Sequence[Observer] = (),
) -> Trajectory:
    """Integrate to t_end with a fixed step; deterministic given config."""
    if config.t_end < 0.0:
        raise ValueError("t_end must be nonnegative")
    if config.nu < 0.0:
        raise ValueError("nu must be nonnegative")
    scheme = config.resolved_scheme()
    if scheme not in ("imex-cnab2", "rk4"):
        raise ValueError(f"unknown scheme {config.scheme!r}")
    if scheme == "rk4" and config.nu != 0.0:
        raise ValueError("RK4 scheme integrates the inviscid equation; set nu = 0")
    if scheme == "imex-cnab2" and config.nu == 0.0:
        raise ValueError("IMEX scheme needs nu > 0; use the RK4 scheme")

    if grid is None:
        grid = make_grid(config.Nx, config.Ny)
    if omega0 is None:
        omega0 = make_initial_data(
            grid,
            config.eps,
            a=config.support_halfwidth,
            modes=config.modes,
            amplitudes=config.amplitudes,
            phases=config.phases,
            seed=config.seed,
        )
    elif omega0.grid is not grid:
        raise ValueError("omega0 must live on the run grid")
    omega0 = dealias(omega0)

    state = flow_state(omega0, 0.0, config.nu, config.eps)
    bound = _cfl_bound(state)
    if config.dt is not None:
        dt = float(config.dt)
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        if dt > bound:
            raise CFLError(f"dt={dt:.4g} exceeds advective stability bound {bound:.4g}")
    else:
        dt = cfl_timestep(state, config.cfl_safety, config.dt_cap)

    n_steps = int(math.ceil(config.t_end / dt - 1e-9)) if config.t_end > 0.0 else 0
    sample = sorted(float(s) for s in config.sample_times)
    for s in sample:
        if s < 0.0:
            raise ValueError("sample times must be nonnegative")

    if scheme == "imex-cnab2":
        stepper: NavierStokesStepper | EulerStepper = NavierStokesStepper(grid, config.nu, dt)
    else:
        stepper = EulerStepper(grid, dt)

    q0 = _inner(grid, state.omega.coeffs, state.omega.coeffs)
    states = [state]
    records: list[StepRecord] = []
    ptr = 0
    while ptr < len(sample) and sample[ptr] <= 1e-9:
        ptr += 1  # t=0 samples are covered by the leading snapshot

    for i in range(n_steps):
        state, record = stepper.step(state)
        records.append(record)
        for obs in observers:
            obs(state, record)
        while ptr < len(sample) and state.t >= sample[ptr] - 1e-9:
            states.append(state)
            ptr += 1
        if (i + 1) % 50 == 0 or i == n_steps - 1:
            if not np.all(np.isfinite(state.omega.coeffs)):
                raise BlowupError(
                    f"non-finite vorticity at t={state.t:.6g} (step {i + 1}); "
                    f"last finite enstrophy {records[-2].enstrophy if len(records) > 1 else q0:.6g}"
                )
            if dt > _cfl_bound(state):
                raise CFLError(
                    f"dt={dt:.4g} exceeds advective stability bound "
                    f"{_cfl_bound(state):.4g} at t={state.t:.4g}"
                )

    if states[-1] is not state:
        states.append(state)
    return Trajectory(grid=grid, config=config, dt=dt, q0=q0, states=states, records=records)
