"""Interior/exterior stream-function decomposition and the J-operators.

Near the walls the stream function needs different estimates than in the
channel core, so phi = phi_I + phi_E is split by the chi_tilde1 cutoff pair:
phi_I solves a Helmholtz problem in the sheared variable v with the interior
part of the vorticity, phi_E a plain y-space problem with the near-wall part
plus a correction coupling it to phi_I.  The coupling term is linear in
phi_I, so a Picard iteration converges geometrically with rate proportional
to the frame tilt ||H||_inf.

phi_I's equation is discretized on the image grid v(y_nodes): the sheared
derivative d/dv becomes (1/v_y) d/dy on nodal samples, and (v' d/dv)^2
becomes exactly d/dy^2, so no second grid or interpolation is needed.  When
v = y the two Laplacians coincide bitwise and the correction vanishes.

Sign note: the equations here read (d^2 - k^2) phi = chi * omega + ..., i.e.
they recombine to the stream function of Delta psi = omega.  This package's
flow solver uses -Delta psi = omega, so stream_decomposition feeds -omega_k
to make phi_I + phi_E match its psi.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as iter_product

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .coords import CoordState, gamma_apply_k
from .flow import FlowState
from .spectral import Grid, diff_ops, solve_helmholtz
from .weights import CutoffFamily, WeightParams, a_mn


class EllipticContractionError(RuntimeError):
    """Picard correction stopped contracting."""


@dataclass(frozen=True)
class PicardReport:
    """Successive-iterate L2 differences of one phi_I solve."""

    iterations: int
    deltas: tuple[float, ...]
    converged: bool

    @property
    def final_delta(self) -> float:
        return self.deltas[-1] if self.deltas else 0.0

    @property
    def contraction_ratios(self) -> tuple[float, ...]:
        out = []
        for prev, cur in zip(self.deltas, self.deltas[1:]):
            if prev > 0.0:
                out.append(cur / prev)
        return tuple(out)


@dataclass(frozen=True)
class StreamDecomp:
    """Per-mode decomposition columns for k = 1 .. kmax (conjugates implied)."""

    coord: CoordState
    k_values: np.ndarray
    phi_I: np.ndarray
    phi_E: np.ndarray
    reports: tuple[PicardReport, ...]


def dbar_matrix(coord: CoordState) -> np.ndarray:
    """Dense matrix of (1/v_y) d/dy on the y nodes."""
    ops = diff_ops(coord.grid)
    return ops.D1 / coord.v_y[:, None]


def _check_contraction_regime(coord: CoordState) -> float:
    coord.require_nondegenerate()
    h_inf = float(np.max(np.abs(coord.H)))
    if h_inf > 0.2:
        raise ValueError(
            f"||H||_inf = {h_inf:.3f} outside the contraction regime (<= 0.2)"
        )
    return h_inf


def solve_phi_I(
    omega_col: np.ndarray,
    k: int,
    coord: CoordState,
    cutoffs: CutoffFamily,
    tol: float = 1e-11,
    max_iter: int = 50,
) -> tuple[np.ndarray, PicardReport]:
    """Picard-iterate the interior solve (d_v^2 - k^2) phi = chi_c (omega + corr).

    Each pass solves the constant-frame operator with the previous iterate's
    correction chi_tilde1_c (dbar_v^2 - d_y^2) phi on the right; the map is
    affine, so the iterate differences shrink geometrically at a rate set by
    the tilt.  Stops below tol in L2 or after max_iter passes.
    """
    h_inf = _check_contraction_regime(coord)
    grid = coord.grid
    ops = diff_ops(grid)
    n = grid.Ny + 1
    a_mat = dbar_matrix(coord)
    m_vv = a_mat @ a_mat
    corr_mat = m_vv - ops.D2
    chi_c = cutoffs.chi_tilde1_c(coord.v)

    lhs = m_vv - float(k) ** 2 * np.eye(n)
    lu = lu_factor(ops.dirichlet_bordered(lhs))
    base = chi_c * np.asarray(omega_col, dtype=np.complex128)

    def bordered_solve(rhs):
        b = rhs.copy()
        b[0] = 0.0
        b[-1] = 0.0
        return lu_solve(lu, b)

    w = grid.cc_weights

    def l2(col):
        return float(np.sqrt(np.sum(w * np.abs(col) ** 2)))

    phi = bordered_solve(base)
    deltas: list[float] = []
    converged = False
    for _ in range(max_iter):
        nxt = bordered_solve(base + chi_c * (corr_mat @ phi))
        delta = l2(nxt - phi)
        if deltas and delta > deltas[-1] and deltas[-1] > tol:
            raise EllipticContractionError(
                f"Picard differences grew ({deltas[-1]:.3e} -> {delta:.3e}) "
                f"with ||H||_inf = {h_inf:.3f}"
            )
        deltas.append(delta)
        phi = nxt
        if delta < tol:
            converged = True
            break
    return phi, PicardReport(
        iterations=len(deltas), deltas=tuple(deltas), converged=converged
    )


def solve_phi_E(
    omega_col: np.ndarray,
    phi_I_col: np.ndarray,
    k: int,
    coord: CoordState,
    cutoffs: CutoffFamily,
) -> np.ndarray:
    """Single Dirichlet solve (d_y^2 - k^2) phi_E = chi (omega + corr phi_I)."""
    grid = coord.grid
    ops = diff_ops(grid)
    a_mat = dbar_matrix(coord)
    corr = (a_mat @ (a_mat @ phi_I_col)) - ops.D2 @ phi_I_col
    chi1 = cutoffs.chi_tilde1(coord.v)
    rhs = chi1 * np.asarray(omega_col, dtype=np.complex128) + chi1 * corr
    return solve_helmholtz(grid, float(k) ** 2, rhs, "dirichlet")


def stream_decomposition(
    state: FlowState,
    coord: CoordState,
    params: WeightParams,
    tol: float = 1e-11,
    max_iter: int = 50,
) -> StreamDecomp:
    """Decompose every nonzero mode of the flow's vorticity.

    Feeds -omega_k so the pieces recombine to the solver's stream function
    (which satisfies -Lap psi = omega).  Real fields only: negative modes are
    conjugates and are not stored.
    """
    if not state.omega.real:
        raise ValueError("decomposition driver expects a real vorticity field")
    grid = state.grid
    cutoffs = CutoffFamily(params)
    ks = np.arange(1, grid.dealias_kmax + 1)
    phi_i = np.zeros((ks.size, grid.Ny + 1), dtype=np.complex128)
    phi_e = np.zeros_like(phi_i)
    reports = []
    for i, k in enumerate(ks):
        rhs = -state.omega.mode(int(k))
        phi_i[i], rep = solve_phi_I(rhs, int(k), coord, cutoffs, tol, max_iter)
        phi_e[i] = solve_phi_E(rhs, phi_i[i], int(k), coord, cutoffs)
        reports.append(rep)
    return StreamDecomp(
        coord=coord, k_values=ks, phi_I=phi_i, phi_E=phi_e, reports=tuple(reports)
    )


def recombination_residual(decomp: StreamDecomp, psi_coeffs: np.ndarray) -> float:
    """Worst relative L2 mismatch of phi_I + phi_E against the stream function."""
    grid = decomp.coord.grid
    w = grid.cc_weights

    def l2(col):
        return float(np.sqrt(np.sum(w * np.abs(col) ** 2)))

    worst = 0.0
    for i, k in enumerate(decomp.k_values):
        psi_k = psi_coeffs[int(k), :]
        denom = l2(psi_k)
        if denom == 0.0:
            continue
        worst = max(worst, l2(decomp.phi_I[i] + decomp.phi_E[i] - psi_k) / denom)
    return worst


def _wall_extrapolate(col: np.ndarray, grid: Grid, points: int = 4) -> tuple[complex, complex]:
    """Cubic Lagrange extrapolation of interior values to the two wall nodes."""
    y = grid.y_nodes
    idx_top = np.arange(1, 1 + points)
    idx_bot = np.arange(grid.Ny - points, grid.Ny)
    out = []
    for wall, idx in ((y[0], idx_top), (y[-1], idx_bot)):
        x = y[idx] - wall
        val = 0.0 + 0.0j
        for j in range(points):
            lj = 1.0
            for i in range(points):
                if i != j:
                    lj *= (0.0 - x[i]) / (x[j] - x[i])
            val += col[idx[j]] * lj
        out.append(val)
    return out[0], out[1]


def j_op(
    phi_col: np.ndarray,
    k: int,
    m: int,
    n: int,
    a: int,
    b: int,
    c: int,
    coord: CoordState,
    cutoffs: CutoffFamily,
) -> np.ndarray:
    """((m+n)/q)^a dbar_v^b |k|^c (chi_{m+n} |k|^m q^n Gamma_k^n phi).

    Returns zero when the indicator {a+b+c <= n or a = 0} fails.  For a > 0
    the q^n inside the group cancels the q^{-a} analytically; nodally the
    quotient is formed at interior points and extrapolated to the walls,
    where q vanishes.
    """
    if min(m, n, a, b, c) < 0:
        raise ValueError("indices must be nonnegative")
    if a + b + c > 3:
        raise ValueError("a + b + c must not exceed 3")
    zero = np.zeros_like(np.asarray(phi_col, dtype=np.complex128))
    if not (a + b + c <= n or a == 0):
        return zero
    if a > 0 and m + n == 0:
        return zero
    ladder = np.asarray(phi_col, dtype=np.complex128)
    for _ in range(n):
        ladder = gamma_apply_k(ladder, k, coord)
    return _j_from_ladder(ladder, k, m, n, a, b, c, coord, cutoffs)


def _j_from_ladder(
    ladder: np.ndarray,
    k: int,
    m: int,
    n: int,
    a: int,
    b: int,
    c: int,
    coord: CoordState,
    cutoffs: CutoffFamily,
) -> np.ndarray:
    grid = coord.grid
    qy = cutoffs.q(grid.y_nodes)
    col = cutoffs.chi_n(m + n, grid.y_nodes) * (abs(k) ** m) * qy**n * ladder
    if b > 0:
        a_mat = dbar_matrix(coord)
        for _ in range(b):
            col = a_mat @ col
    col = (abs(k) ** c) * col
    if a > 0:
        col = float(m + n) ** a * col
        out = np.empty_like(col)
        out[1:-1] = col[1:-1] / qy[1:-1] ** a
        out[0], out[-1] = _wall_extrapolate(out, grid)
        col = out
    return col


def _compositions(total: int):
    return [
        (a, b, c)
        for a, b, c in iter_product(range(total + 1), repeat=3)
        if a + b + c == total
    ]


def jell_functional(
    decomp: StreamDecomp,
    params: WeightParams,
    level: int,
    n_tot: int = 6,
) -> float:
    """Truncated sum_{k!=0, m+n<=n_tot, a+b+c=level} a_mn^2 ||J phi_E_k||^2.

    Mode norms are plain y-quadrature norms; the conjugate modes double each
    k > 0 term.  Gamma ladders are shared across the (m, a, b, c) indices for
    each (k, n).
    """
    if level not in (1, 2, 3):
        raise ValueError("level must be 1, 2, or 3")
    coord = decomp.coord
    grid = coord.grid
    cutoffs = CutoffFamily(params)
    w = grid.cc_weights
    combos = _compositions(level)
    t = coord.t
    total = 0.0
    for i, k in enumerate(decomp.k_values):
        ladders = [decomp.phi_E[i]]
        for _ in range(n_tot):
            ladders.append(gamma_apply_k(ladders[-1], int(k), coord))
        for mn in range(n_tot + 1):
            for n in range(mn + 1):
                m = mn - n
                weight = float(a_mn(m, n, t, params)) ** 2
                for a, b, c in combos:
                    if not (a + b + c <= n or a == 0):
                        continue
                    if a > 0 and mn == 0:
                        continue
                    col = _j_from_ladder(
                        ladders[n], int(k), m, n, a, b, c, coord, cutoffs
                    )
                    total += 2.0 * weight * float(np.sum(w * np.abs(col) ** 2))
    return total


def jell_sanity_ratio(
    decomp: StreamDecomp,
    params: WeightParams,
    n_tot: int = 6,
) -> float:
    """J^(1) divided by a weighted H1 norm of phi_E; bounded for any n_tot.

    The reference norm is sum_k 2 (||dbar_v phi||^2 + (1+t^2)(1+k^2) ||phi||^2),
    which dominates every level-1 J column up to cutoff and Gevrey-weight
    factors.  Used as a truncation-independence sanity check.
    """
    coord = decomp.coord
    grid = coord.grid
    w = grid.cc_weights
    a_mat = dbar_matrix(coord)
    t = coord.t
    h1 = 0.0
    for i, k in enumerate(decomp.k_values):
        phi = decomp.phi_E[i]
        h1 += 2.0 * float(
            np.sum(w * np.abs(a_mat @ phi) ** 2)
            + (1.0 + t**2) * (1.0 + float(k) ** 2) * np.sum(w * np.abs(phi) ** 2)
        )
    if h1 == 0.0:
        return 0.0
    return jell_functional(decomp, params, level=1, n_tot=n_tot) / h1
