"""Diagnostic functionals over flow and coordinate states.

This module turns a solution snapshot into numbers: the Gevrey-weighted
energy/dissipation/CK ladders of the exterior vorticity, the interior
Fourier energy built on the simplified multiplier, parabolic functionals
of the coordinate fields, Sobolev and wall-trace quantities, the
interior "cloud" norms, and the stream-function shell sums.  A
FunctionalReport bundles one sample time's worth of values together with
truncation metadata.

Conventions shared by every functional here:

* all norms are squared and carry the full channel measure (2 pi from
  the x-average, Clenshaw-Curtis in y);
* the cutoffs chi_n and the wall profile q are functions of y, while the
  interior cutoff chi^I rides on the coordinate v;
* exponential weights are applied through their logarithms with the
  squared exponent clamped at 700, and any clamped point marks the
  report weight-saturated instead of overflowing.

The derivative ladder omega_{m,n} = d_x^m Gamma^n omega is built once
and shared; a Chebyshev tail diagnostic flags ladders whose output the
grid can no longer represent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .coords import CoordState, ProfileField, gamma_apply, profile_transform
from .elliptic import jell_functional, stream_decomposition
from .flow import FlowState, nonlinear_term
from .spectral import Grid, SpectralField, ddx, diff_ops, field_from_coeffs, l2_norm, to_physical
from .weights import (
    CutoffFamily,
    WeightParams,
    W_eval,
    a_mn,
    a_mn_logderiv,
    dW_dt,
    gevrey_B_low,
    multiplier_frakA_simplified,
    theta,
)

# squared-exponent clamp for e^{2W}-style factors; e^700 is still finite
_CLAMP = 700.0

# Chebyshev-tail energy fraction above which a ladder field is declared
# unrepresentable on the grid
_TAIL_LIMIT = 1e-4


@dataclass(frozen=True)
class TruncationConfig:
    """Where the infinite (m, n) sums stop.

    n_tot caps m+n for the exterior ladders and the shell sums;
    cloud_cap caps the cloud norms (the full set runs to 20, the default
    stays desk-sized).  gamma_ladder_cache shares one derivative ladder
    across all consumers of a report.
    """

    n_tot: int = 6
    cloud_cap: int = 8
    gamma_ladder_cache: bool = True

    def __post_init__(self):
        if self.n_tot < 0:
            raise ValueError("n_tot must be nonnegative")
        if not 0 <= self.cloud_cap <= 20:
            raise ValueError("cloud_cap must lie in [0, 20]")


# ---------------------------------------------------------------------------
# derivative ladder


def _cheb_tail_fraction(coeffs: np.ndarray, grid: Grid) -> float:
    """Energy fraction above the 2/3 Chebyshev band, over dealiased modes.

    Energy-weighted across modes so that roundoff-only rows (whose
    spectra are white noise) cannot trip the flag.
    """
    rows = coeffs[grid.dealias_mask]
    spec = dct(rows, type=1, axis=1)
    spec[:, 0] *= 0.5
    spec[:, -1] *= 0.5
    e = np.abs(spec) ** 2
    tot = float(e.sum())
    if tot == 0.0:
        return 0.0
    return float(e[:, grid.dealias_ymax :].sum()) / tot


@dataclass(frozen=True)
class GammaLadder:
    """Memoized table (m, n) -> d_x^m Gamma^n omega, with a resolution flag.

    under_resolved is set when any entry keeps more than _TAIL_LIMIT of
    its energy in the top third of the Chebyshev band, i.e. when the
    ladder has outrun what the grid can represent.
    """

    coord: CoordState
    n_max: int
    fields: dict
    tail_fraction: float
    under_resolved: bool

    def __getitem__(self, mn) -> SpectralField:
        return self.fields[mn]

    def __contains__(self, mn) -> bool:
        return mn in self.fields

    def items(self):
        return self.fields.items()


def omega_ladder(omega: SpectralField, coord: CoordState, n_tot: int) -> GammaLadder:
    """Build d_x^m Gamma^n omega for all m + n <= n_tot.

    Gamma = (1/v_y) d_y + t d_x commutes with d_x (its coefficients only
    depend on y), so the build order is immaterial; we go up in n first,
    then across in m.
    """
    coord.require_nondegenerate()
    if omega.grid.shape != coord.grid.shape:
        raise ValueError("field and coordinate grids disagree")
    fields = {(0, 0): omega}
    for n in range(1, n_tot + 1):
        fields[(0, n)] = gamma_apply(fields[(0, n - 1)], coord)
    for n in range(n_tot + 1):
        for m in range(1, n_tot + 1 - n):
            fields[(m, n)] = ddx(fields[(m - 1, n)])
    tail = max(_cheb_tail_fraction(f.coeffs, omega.grid) for f in fields.values())
    return GammaLadder(
        coord=coord,
        n_max=n_tot,
        fields=fields,
        tail_fraction=tail,
        under_resolved=tail > _TAIL_LIMIT,
    )


# ---------------------------------------------------------------------------
# clamped weighted norms


def _wnorm_sq(coeffs: np.ndarray, grid: Grid, logw: np.ndarray, extra=None) -> float:
    """2 pi sum_k int |f_k|^2 e^{2 logw} (extra) dy, integrand clamped.

    The whole integrand sample, field included, is assembled in log space
    and capped at e^700, so a saturated weight never drives the sum to inf
    no matter how large the ladder entries underneath it are.
    """
    expo = 2.0 * logw
    if extra is not None:
        with np.errstate(divide="ignore"):
            expo = expo + np.log(extra)
    with np.errstate(divide="ignore"):
        li = expo + 2.0 * np.log(np.abs(coeffs))
    s = np.exp(np.minimum(li, _CLAMP)) @ grid.cc_weights
    return 2.0 * math.pi * float(s.sum())


def _log_of(profile: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(profile)


def _shell_pairs(n_tot: int):
    return [(m, n) for n in range(n_tot + 1) for m in range(n_tot + 1 - n)]


# ---------------------------------------------------------------------------
# exterior vorticity ladders


_EXT_NAMES = (
    "E_gamma", "E_alpha", "E_mu",
    "D_gamma", "D_alpha", "D_mu",
    "CK_gamma_phi", "CK_alpha_phi", "CK_mu_phi",
    "CK_gamma_lambda", "CK_alpha_lambda", "CK_mu_lambda",
    "CK_gamma_W", "CK_alpha_W", "CK_mu_W",
)


def exterior_functionals(
    ladder: GammaLadder,
    params: WeightParams,
    trunc: TruncationConfig,
    cutoffs: CutoffFamily | None = None,
):
    """Theta_n^2 a_{m,n}^2-weighted sums over q^n omega_{m,n} e^W chi_{m+n}.

    Returns (values, shells, saturated): the fifteen ladder functionals,
    the per-(m+n) shell contributions of E_gamma (for the truncation
    tail estimate), and the weight clamp flag.
    """
    cutoffs = cutoffs or CutoffFamily(params)
    coord = ladder.coord
    grid = coord.grid
    t = coord.t
    y = grid.y_nodes
    nu = params.nu
    q = cutoffs.q(y)
    W = W_eval(t, y, params)
    mWt = np.maximum(-dW_dt(t, y, params), 0.0)
    phi_rate = -params.phi_dot(t) / params.phi(t)
    lam_rate = -params.lam_dot(t) / params.lam(t)
    D1 = diff_ops(grid).D1
    ik = 1j * grid.k_modes[:, None].astype(float)

    logchi = {N: W + _log_of(cutoffs.chi_n(N, y)) for N in range(trunc.n_tot + 1)}
    acc = dict.fromkeys(_EXT_NAMES, 0.0)
    shells = [0.0] * (trunc.n_tot + 1)

    for m, n in _shell_pairs(trunc.n_tot):
        g = ladder[(m, n)].coeffs * q[None, :] ** n
        gy = g @ D1.T
        gx = ik * g
        logw = logchi[m + n]
        coef = theta(n, params) ** 2 * float(a_mn(m, n, t, params)) ** 2
        base = _wnorm_sq(g, grid, logw)
        vy = _wnorm_sq(gy, grid, logw)
        vx = _wnorm_sq(gx, grid, logw)

        acc["E_gamma"] += coef * base
        acc["E_alpha"] += coef * nu * vy
        acc["E_mu"] += coef * nu * vx
        acc["D_gamma"] += coef * nu * (vx + vy)
        acc["D_alpha"] += coef * nu * nu * (
            _wnorm_sq(ik * gy, grid, logw) + _wnorm_sq(gy @ D1.T, grid, logw)
        )
        acc["D_mu"] += coef * nu * nu * (
            _wnorm_sq(ik * gx, grid, logw) + _wnorm_sq(ik * gy, grid, logw)
        )
        acc["CK_gamma_phi"] += (1 + n) * phi_rate * coef * base
        acc["CK_alpha_phi"] += (1 + n) * phi_rate * coef * nu * vy
        acc["CK_mu_phi"] += (1 + n) * phi_rate * coef * nu * vx
        acc["CK_gamma_lambda"] += (m + n) * lam_rate * coef * base
        acc["CK_alpha_lambda"] += (m + n) * lam_rate * coef * nu * vy
        acc["CK_mu_lambda"] += (m + n) * lam_rate * coef * nu * vx
        acc["CK_gamma_W"] += coef * _wnorm_sq(g, grid, logw, extra=mWt)
        acc["CK_alpha_W"] += coef * nu * _wnorm_sq(gy, grid, logw, extra=mWt)
        acc["CK_mu_W"] += coef * nu * _wnorm_sq(gx, grid, logw, extra=mWt)
        shells[m + n] += coef * base

    saturated = bool(np.any(W > 0.5 * _CLAMP))
    return acc, shells, saturated


def truncation_tail(shells) -> tuple[float, float]:
    """(shell ratio, geometric tail bound) from the last two shell values."""
    if len(shells) < 2 or shells[-2] <= 0.0:
        return 0.0, 0.0
    ratio = shells[-1] / shells[-2]
    if ratio <= 0.0:
        return ratio, 0.0
    if ratio >= 1.0:
        return ratio, math.inf
    return ratio, shells[-1] * ratio / (1.0 - ratio)


# ---------------------------------------------------------------------------
# interior energies


def e_int_low(
    omega: SpectralField,
    coord: CoordState,
    params: WeightParams,
    trunc: TruncationConfig,
    cutoffs: CutoffFamily | None = None,
) -> float:
    """sum (B^low_{m,n} ||d_x^m Gamma^n (chi^I omega)||)^2.

    The interior cutoff is applied first (as a function of v), then the
    crude low ladder rides on plain L^2 norms of the derivatives.  Since
    the ladder differentiates the cut field, the full-band cutoff
    realization is used here.
    """
    cutoffs = cutoffs or CutoffFamily(params)
    cut = field_from_coeffs(
        omega.grid, omega.coeffs * cutoffs.chi_I_smooth(coord.v)[None, :], real=omega.real
    )
    ladder = omega_ladder(cut, coord, trunc.n_tot)
    total = 0.0
    for m, n in _shell_pairs(trunc.n_tot):
        b = float(gevrey_B_low(m, n))
        total += (b * l2_norm(ladder[(m, n)])) ** 2
    return total


def e_int_simplified(
    profile: ProfileField,
    params: WeightParams,
    cutoffs: CutoffFamily | None = None,
    apply_cut: bool = True,
) -> float:
    """||frakA(t, grad)(chi^I f)||^2 by Plancherel on the (z, v) grid.

    apply_cut=False skips the interior cutoff for synthetic profiles
    built directly in spectral form.  The cut uses the full-band cutoff
    realization (the sharp one aliases on a uniform grid).  Raises when
    the v-spectrum carries more than 1e-6 of its mass in the top ten
    percent of frequencies: the multiplier would then amplify leakage,
    not signal.
    """
    cutoffs = cutoffs or CutoffFamily(params)
    vals = np.asarray(profile.values, dtype=np.complex128)
    if apply_cut:
        vals = vals * cutoffs.chi_I_smooth(profile.v_grid)[None, :]
    n_v = profile.v_grid.size
    dv = profile.dv
    eta = 2.0 * math.pi * np.fft.fftfreq(n_v, d=dv)
    hat = np.fft.fft(vals, axis=1)
    power = np.abs(hat) ** 2
    total_mass = float(power.sum())
    if total_mass == 0.0:
        return 0.0
    tail_mass = float(power[:, np.abs(eta) >= 0.9 * np.abs(eta).max()].sum())
    if tail_mass > 1e-6 * total_mass:
        raise RuntimeError(
            f"spectral leakage in the v-transform (tail mass {tail_mass / total_mass:.2e}); "
            "increase the profile resolution or padding"
        )
    total = 0.0
    for row, k in enumerate(np.asarray(profile.k_modes, dtype=int)):
        frak = multiplier_frakA_simplified(profile.t, int(k), eta, params)
        total += float((frak**2 * power[row]).sum())
    return 2.0 * math.pi * dv / n_v * total


# ---------------------------------------------------------------------------
# coordinate-field functionals


def _ring_ladder(profile: np.ndarray, coord: CoordState, q: np.ndarray, n_tot: int):
    """q^n Gamma_0^n X for the zero-frequency vector field Gamma_0 = (1/v_y) d_y."""
    D1 = diff_ops(coord.grid).D1
    raw = [np.asarray(profile, dtype=float)]
    for _ in range(n_tot):
        raw.append((D1 @ raw[-1]) / coord.v_y)
    return [q**n * raw[n] for n in range(n_tot + 1)]


def coord_functionals(
    coord: CoordState,
    params: WeightParams,
    trunc: TruncationConfig,
    cutoffs: CutoffFamily | None = None,
    K_exp: float = 1.0,
) -> dict:
    """Parabolic energy/dissipation/CK sums for Hbar, G, and H.

    Valid on the coordinate diagnostics window t >= 1.  The Hbar and H
    families carry e^{W/2} chi_n weights and nu^{i/2} per y-derivative;
    G trades localization for the enhanced time weight <t>^{4 - 2 K eps}
    on its lowest shell.
    """
    if coord.t < 1.0:
        raise ValueError("coordinate functionals are defined for t >= 1")
    cutoffs = cutoffs or CutoffFamily(params)
    grid = coord.grid
    t = coord.t
    y = grid.y_nodes
    nu = params.nu
    s = params.s
    D1 = diff_ops(grid).D1
    q = cutoffs.q(y)
    W = W_eval(t, y, params)
    mWt = np.maximum(-dW_dt(t, y, params), 0.0)
    bt = math.sqrt(1.0 + t * t)
    t_pow = bt ** (3.0 + 2.0 / s)
    g_pow = bt ** (4.0 - 2.0 * K_exp * params.eps)

    logchi = {N: _log_of(cutoffs.chi_n(N, y)) for N in range(trunc.n_tot + 2)}
    halfW = {N: 0.5 * W + logchi[N] for N in logchi}
    zero_logw = np.zeros_like(y)

    ladders = {
        name: _ring_ladder(profile, coord, q, trunc.n_tot)
        for name, profile in (("Hbar", coord.Hbar), ("G", coord.G), ("H", coord.H))
    }

    def norm1d(col, logw, extra=None):
        return _wnorm_sq(col[None, :], grid, logw, extra=extra)

    out = {}
    for field in ("Hbar", "G", "H"):
        for iota in ("gamma", "alpha"):
            for kind in ("E", "D", "CK"):
                out[f"{kind}_{field}_{iota}"] = 0.0

    for n in range(trunc.n_tot + 1):
        th2 = theta(n, params) ** 2
        a_n_sq = float(a_mn(0, n, t, params)) ** 2
        a_np1_sq = float(a_mn(0, n + 1, t, params)) ** 2
        neg_aadot_n = a_n_sq * (-a_mn_logderiv(0, n, t, params))
        neg_aadot_np1 = a_np1_sq * (-a_mn_logderiv(0, n + 1, t, params))
        shell_gain = float(n + 1) ** (2.0 * s - 2.0)

        stacks = {}
        for name in ("Hbar", "G", "H"):
            base = ladders[name][n]
            d1 = D1 @ base
            stacks[name] = (base, d1, D1 @ d1)

        for iota, i in (("gamma", 0), ("alpha", 1)):
            nui = nu ** (0.5 * i)

            hb, hb1, hb2 = stacks["Hbar"][i], stacks["Hbar"][i + 1], None
            fac = nui * shell_gain * a_np1_sq * t_pow
            out[f"E_Hbar_{iota}"] += th2 * fac * norm1d(hb, halfW[n])
            out[f"D_Hbar_{iota}"] += th2 * nu * fac * norm1d(hb1, halfW[n])
            out[f"CK_Hbar_{iota}"] += th2 * (
                fac * norm1d(hb, halfW[n], extra=mWt)
                + nui * shell_gain * neg_aadot_np1 * t_pow * norm1d(hb, halfW[n])
            )

            if n == 0:
                g0, g1 = stacks["G"][i], stacks["G"][i + 1]
                out[f"E_G_{iota}"] += th2 * g_pow * norm1d(g0, zero_logw)
                out[f"D_G_{iota}"] += th2 * nu * g_pow * norm1d(g1, zero_logw)
                ck0 = 4.0 * g_pow / t - (4.0 - 2.0 * K_exp * params.eps) * t * bt ** (
                    2.0 - 2.0 * K_exp * params.eps
                )
                out[f"CK_G_{iota}"] += th2 * max(ck0, 0.0) * norm1d(g0, zero_logw)
            else:
                gch = n - 1 + i
                gb, gb1 = stacks["G"][i], stacks["G"][i + 1]
                out[f"E_G_{iota}"] += th2 * a_n_sq * t_pow * norm1d(gb, halfW[gch])
                out[f"D_G_{iota}"] += th2 * nu * a_n_sq * t_pow * norm1d(gb1, halfW[gch])
                out[f"CK_G_{iota}"] += th2 * (
                    a_n_sq * t_pow * norm1d(gb, halfW[gch], extra=mWt)
                    + neg_aadot_n * t_pow * norm1d(gb, logchi[gch])
                )

            hh, hh1 = stacks["H"][i], stacks["H"][i + 1]
            out[f"E_H_{iota}"] += th2 * nui * a_n_sq * norm1d(hh, halfW[n])
            out[f"D_H_{iota}"] += th2 * nu * nui * a_n_sq * norm1d(hh1, halfW[n])
            out[f"CK_H_{iota}"] += th2 * nui * (
                neg_aadot_n * norm1d(hh, halfW[n])
                + a_n_sq * norm1d(hh, halfW[n], extra=mWt)
            )
    return out


# ---------------------------------------------------------------------------
# Sobolev bulk and wall traces


def _omega_time_derivative(state: FlowState) -> SpectralField:
    """d_t omega from the equation: nu Lap omega minus full advection."""
    grid = state.grid
    ops = diff_ops(grid)
    lap = state.omega.coeffs @ ops.D2.T - (grid.k_modes**2)[:, None] * state.omega.coeffs
    rhs = state.nu * lap - nonlinear_term(state).coeffs
    return field_from_coeffs(grid, rhs, real=state.omega.real)


def wall_traces(omega: SpectralField, order: int) -> np.ndarray:
    """Fourier coefficients of d_y^order omega at the walls, shape (Nx, 2).

    Column 0 is y = +1, column 1 is y = -1.
    """
    D1 = diff_ops(omega.grid).D1
    c = omega.coeffs
    for _ in range(order):
        c = c @ D1.T
    return c[:, [0, omega.grid.Ny]]


def _trace_norm_sq(rows: np.ndarray, w_wall: np.ndarray, extra=None) -> float:
    """2 pi sum_k |g_k|^2 e^{2 W(wall)} summed over both walls, clamped."""
    expo = 2.0 * w_wall
    if extra is not None:
        with np.errstate(divide="ignore"):
            expo = expo + np.log(extra)
    with np.errstate(divide="ignore"):
        li = expo[None, :] + 2.0 * np.log(np.abs(rows))
    return 2.0 * math.pi * float(np.exp(np.minimum(li, _CLAMP)).sum())


def sobolev_and_trace(
    state: FlowState,
    params: WeightParams,
    omega_t: SpectralField | None = None,
) -> dict:
    """Bulk Sobolev ladders E/D/CK_sob and the one-dimensional wall traces.

    The time-derivative traces come from d_t omega evaluated through the
    equation (computed here unless supplied).  alpha_4 is reported twice:
    directly as d_y^4 omega at the wall, and through the wall-restricted
    equation nu alpha_4 = 2(1 + d_y u1) d_x alpha_1 + (d_yy u2) alpha_1;
    their relative mismatch is the resolution gauge for the trace family.
    """
    grid = state.grid
    ops = diff_ops(grid)
    nu = state.nu
    t = state.t
    om = state.omega
    if omega_t is None:
        omega_t = _omega_time_derivative(state)

    y = grid.y_nodes
    W = W_eval(t, y, params)
    mWt = np.maximum(-dW_dt(t, y, params), 0.0)
    kk = grid.k_modes[:, None].astype(float)
    ik = 1j * kk

    dys = [om.coeffs]
    for _ in range(5):
        dys.append(dys[-1] @ ops.D1.T)

    values = {}
    values["E_sob_0"] = _wnorm_sq(dys[0], grid, W)
    d_sob = nu * (_wnorm_sq(ik * dys[0], grid, W) + _wnorm_sq(dys[1], grid, W))
    ck_sob = _wnorm_sq(dys[0], grid, W, extra=mWt)
    for n in range(1, 5):
        f, fy = dys[n - 1], dys[n]
        scale = nu ** (2 * n)
        values[f"E_sob_{n}"] = scale * (
            _wnorm_sq(ik * f, grid, W) + _wnorm_sq(fy, grid, W)
        )
        d_sob += scale * nu * (
            _wnorm_sq(kk**2 * f, grid, W)
            + 2.0 * _wnorm_sq(kk * fy, grid, W)
            + _wnorm_sq(dys[n + 1], grid, W)
        )
        ck_sob += scale * (
            _wnorm_sq(ik * f, grid, W, extra=mWt) + _wnorm_sq(fy, grid, W, extra=mWt)
        )
    values["E_sob"] = sum(values[f"E_sob_{n}"] for n in range(5))
    values["D_sob"] = d_sob
    values["CK_sob"] = ck_sob

    # wall rows: columns (y=+1, y=-1); W and -dW/dt are even in y
    walls = [0, grid.Ny]
    w_wall = W[walls]
    mwt_wall = mWt[walls]
    a1 = dys[1][:, walls]
    a1_t = (omega_t.coeffs @ ops.D1.T)[:, walls]
    a4 = dys[4][:, walls]
    a4_t = (
        omega_t.coeffs @ np.linalg.matrix_power(ops.D1, 4).T
    )[:, walls]

    values["E_trace_0"] = nu**3 * _trace_norm_sq(a1, w_wall)
    values["E_trace_1"] = nu**5 * _trace_norm_sq(ik * a1, w_wall)
    values["E_trace_2"] = nu**7 * _trace_norm_sq(kk**2 * a1, w_wall)
    values["E_trace"] = values["E_trace_0"] + values["E_trace_1"] + values["E_trace_2"]
    values["D_trace_0"] = nu**4 * _trace_norm_sq(ik * a1, w_wall)
    values["D_trace_1"] = nu**4 * _trace_norm_sq(a1_t, w_wall)
    values["D_trace_2"] = nu**6 * _trace_norm_sq(ik * a1_t, w_wall)
    values["D_trace_max_1"] = nu**6 * _trace_norm_sq(kk**2 * a1, w_wall)
    values["D_trace_max_2"] = nu**8 * _trace_norm_sq(np.abs(kk) ** 3 * a1, w_wall)
    values["D_trace_large_0"] = nu**6 * _trace_norm_sq(a4, w_wall)
    values["D_trace_large_1"] = nu**8 * _trace_norm_sq(ik * a4, w_wall)
    values["D_trace_large_2"] = nu**8 * _trace_norm_sq(a4_t, w_wall) + nu**10 * _trace_norm_sq(
        kk**2 * a4, w_wall
    )
    values["D_trace"] = (
        values["D_trace_0"]
        + values["D_trace_1"]
        + values["D_trace_2"]
        + values["D_trace_max_1"]
        + values["D_trace_max_2"]
        + values["D_trace_large_0"]
        + values["D_trace_large_1"]
        + values["D_trace_large_2"]
    )
    for i in range(3):
        rows = a1 if i == 0 else (ik * a1 if i == 1 else kk**2 * a1)
        values[f"CK_trace_{i}"] = nu ** (3 + 2 * i) * _trace_norm_sq(
            rows, w_wall, extra=mwt_wall
        )
    values["CK_trace"] = sum(values[f"CK_trace_{i}"] for i in range(3))

    # dual-route alpha_4: spectral wall value vs the wall-restricted equation
    a1_field = field_from_coeffs(grid, dys[1], real=om.real)
    a1_phys = to_physical(a1_field)[:, walls]
    a1x_phys = to_physical(field_from_coeffs(grid, ik * dys[1], real=om.real))[:, walls]
    du1 = to_physical(field_from_coeffs(grid, state.u1.coeffs @ ops.D1.T, real=True))[:, walls]
    d2u2 = to_physical(
        field_from_coeffs(grid, state.u2.coeffs @ ops.D2.T, real=True)
    )[:, walls]
    a4_direct_phys = to_physical(field_from_coeffs(grid, dys[4], real=om.real))[:, walls]
    if nu > 0.0:
        a4_formula_phys = (2.0 / nu) * (1.0 + du1) * a1x_phys + (1.0 / nu) * d2u2 * a1_phys
    else:
        a4_formula_phys = np.zeros_like(a4_direct_phys)

    dx = 2.0 * math.pi / grid.Nx
    direct_sq = float((a4_direct_phys**2).sum()) * dx
    formula_sq = float((a4_formula_phys**2).sum()) * dx
    diff_sq = float(((a4_direct_phys - a4_formula_phys) ** 2).sum()) * dx
    values["alpha4_direct_sq"] = direct_sq
    values["alpha4_formula_sq"] = formula_sq
    values["alpha4_mismatch"] = math.sqrt(diff_sq / direct_sq) if direct_sq > 0.0 else 0.0

    wall_vals = to_physical(om)[:, walls]
    values["alpha0_wall_max"] = float(np.abs(wall_vals).max())
    return values


# ---------------------------------------------------------------------------
# cloud norms


def cloud_functionals(
    ladder: GammaLadder,
    params: WeightParams,
    trunc: TruncationConfig,
    cutoffs: CutoffFamily | None = None,
) -> dict:
    """Interior-localized e^W sums with phi(t)^n shell damping."""
    if ladder.n_max < trunc.cloud_cap:
        raise ValueError("ladder too short for the requested cloud cap")
    cutoffs = cutoffs or CutoffFamily(params)
    coord = ladder.coord
    grid = coord.grid
    t = coord.t
    nu = params.nu
    D1 = diff_ops(grid).D1
    ik = 1j * grid.k_modes[:, None].astype(float)
    logw = W_eval(t, grid.y_nodes, params) + _log_of(cutoffs.chi_I(coord.v))
    mWt = np.maximum(-dW_dt(t, grid.y_nodes, params), 0.0)
    phi_t = params.phi(t)
    phi_drop = -params.phi_dot(t)

    out = {"E_cloud": 0.0, "D_cloud": 0.0, "CK_cloud_W": 0.0, "CK_cloud_phi": 0.0}
    for m, n in _shell_pairs(trunc.cloud_cap):
        f = ladder[(m, n)].coeffs
        pn2 = phi_t ** (2 * n)
        base = _wnorm_sq(f, grid, logw)
        out["E_cloud"] += pn2 * base
        out["D_cloud"] += pn2 * nu * (
            _wnorm_sq(ik * f, grid, logw) + _wnorm_sq(f @ D1.T, grid, logw)
        )
        out["CK_cloud_W"] += pn2 * _wnorm_sq(f, grid, logw, extra=mWt)
        out["CK_cloud_phi"] += pn2 * phi_drop * base
    return out


# ---------------------------------------------------------------------------
# report assembly


@dataclass(frozen=True)
class FunctionalReport:
    """One sample time's functional values plus truncation metadata.

    Every entry of values is validated finite and nonnegative on
    construction; tail_estimate may be inf when the shell sum has not
    entered its geometric regime.
    """

    t: float
    values: dict
    n_tot: int
    cloud_cap: int
    shell_ratio: float
    tail_estimate: float
    weight_saturated: bool
    under_resolved: bool

    def __post_init__(self):
        for name, val in self.values.items():
            if not math.isfinite(val) or val < 0.0:
                raise ValueError(f"functional {name} = {val!r} must be finite and >= 0")

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "n_tot": self.n_tot,
            "cloud_cap": self.cloud_cap,
            "shell_ratio": self.shell_ratio,
            "tail_estimate": self.tail_estimate,
            "weight_saturated": self.weight_saturated,
            "under_resolved": self.under_resolved,
            "values": dict(self.values),
        }


def functional_report(
    state: FlowState,
    coord: CoordState,
    params: WeightParams,
    trunc: TruncationConfig | None = None,
    cutoffs: CutoffFamily | None = None,
    decomp=None,
    profile: ProfileField | None = None,
    with_jell: bool = True,
) -> FunctionalReport:
    """Evaluate every diagnostic family on one snapshot.

    The stream-function shell sums dominate the cost; pass
    with_jell=False for dense sampling and reuse precomputed decomp or
    profile objects where the caller already has them.
    """
    trunc = trunc or TruncationConfig()
    cutoffs = cutoffs or CutoffFamily(params)

    n_build = max(trunc.n_tot, trunc.cloud_cap)
    if trunc.gamma_ladder_cache:
        shared = omega_ladder(state.omega, coord, n_build)
        ladder_ext = ladder_cloud = shared
    else:
        ladder_ext = omega_ladder(state.omega, coord, trunc.n_tot)
        ladder_cloud = omega_ladder(state.omega, coord, trunc.cloud_cap)

    ext, shells, saturated = exterior_functionals(ladder_ext, params, trunc, cutoffs)
    values = dict(ext)
    values["E_int_low"] = e_int_low(state.omega, coord, params, trunc, cutoffs)
    profile = profile or profile_transform(state.omega, coord, n_v=2048)
    values["E_int_simplified"] = e_int_simplified(profile, params, cutoffs)
    if coord.t >= 1.0:
        values.update(coord_functionals(coord, params, trunc, cutoffs))
    values.update(sobolev_and_trace(state, params))
    values.update(cloud_functionals(ladder_cloud, params, trunc, cutoffs))
    if with_jell:
        decomp = decomp or stream_decomposition(state, coord, params)
        for level in (1, 2, 3):
            values[f"Jell_{level}"] = jell_functional(decomp, params, level, trunc.n_tot)

    ratio, tail = truncation_tail(shells)
    under = ladder_ext.under_resolved or values["alpha4_mismatch"] > 0.1
    return FunctionalReport(
        t=state.t,
        values=values,
        n_tot=trunc.n_tot,
        cloud_cap=trunc.cloud_cap,
        shell_ratio=ratio,
        tail_estimate=tail,
        weight_saturated=saturated,
        under_resolved=under,
    )
