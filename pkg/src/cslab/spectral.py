"""Spectral building blocks shared by every other module.

Discretization: Fourier collocation in x on [0, 2pi) and Chebyshev-Gauss-Lobatto
collocation in y on [-1, 1] (descending nodes, y_0 = 1). Fields are carried as
complex Fourier coefficient columns over the y nodes; products are formed
pointwise in physical space and dealiased in x by the 2/3 rule. One-dimensional
Helmholtz boundary-value problems (d_yy - k^2) are solved with dense bordered
collocation matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.linalg import lu_factor, lu_solve

__all__ = [
    "Grid",
    "SpectralField",
    "DiffOperators",
    "make_grid",
    "to_spectral",
    "to_physical",
    "field_from_physical",
    "field_from_coeffs",
    "zeros_like",
    "ddx",
    "ddy",
    "dealias",
    "product",
    "solve_helmholtz",
    "l2_norm",
    "linf_norm",
    "weighted_l2",
    "column_l2",
    "cheb_nodes",
    "cheb_D1",
    "clenshaw_curtis_weights",
]


def cheb_nodes(Ny: int) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto nodes cos(j*pi/Ny), j = 0..Ny (descending)."""
    j = np.arange(Ny + 1)
    y = np.cos(np.pi * j / Ny)
    y[0] = 1.0
    y[Ny] = -1.0
    if Ny % 2 == 0:
        y[Ny // 2] = 0.0
    return y


def cheb_D1(Ny: int) -> np.ndarray:
    """Dense first-derivative collocation matrix on the CGL nodes.

    Off-diagonal entries use the classical closed form; the diagonal is set by
    negative row sums, which improves floating-point cancellation.
    """
    y = cheb_nodes(Ny)
    c = np.ones(Ny + 1)
    c[0] = 2.0
    c[Ny] = 2.0
    c *= (-1.0) ** np.arange(Ny + 1)
    Y = np.tile(y[:, None], (1, Ny + 1))
    dY = Y - Y.T
    D = np.outer(c, 1.0 / c) / (dY + np.eye(Ny + 1))
    D -= np.diag(D.sum(axis=1))
    return D


def clenshaw_curtis_weights(Ny: int) -> np.ndarray:
    """Quadrature weights on the CGL nodes, exact for polynomials of degree Ny."""
    N = Ny
    if N == 0:
        return np.array([2.0])
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    ii = np.arange(1, N)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N**2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4.0 * k**2 - 1)
        v -= np.cos(N * theta[ii]) / (N**2 - 1)
    else:
        w[0] = w[N] = 1.0 / N**2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4.0 * k**2 - 1)
    w[ii] = 2.0 * v / N
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Collocation grid for T x [-1, 1].

    Nx is the (even) number of x points; Ny counts Chebyshev intervals, so
    there are Ny + 1 y nodes with y_nodes[0] = 1 and y_nodes[Ny] = -1.
    k order matches numpy's FFT layout except that the Nyquist mode is
    labelled +Nx/2; the 2/3-rule mask removes it anyway.
    """

    Nx: int
    Ny: int
    x_nodes: np.ndarray = field(repr=False)
    y_nodes: np.ndarray = field(repr=False)
    k_modes: np.ndarray = field(repr=False)
    dealias_kmax: int
    dealias_ymax: int
    cc_weights: np.ndarray = field(repr=False)
    dealias_mask: np.ndarray = field(repr=False)

    @property
    def dealias_cut(self) -> int:
        return self.dealias_kmax

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Nx, self.Ny + 1)


def make_grid(Nx: int, Ny: int) -> Grid:
    if Nx % 2 != 0 or Nx < 8:
        raise ValueError(f"Nx must be even and >= 8, got {Nx}")
    if Ny < 16:
        raise ValueError(f"Ny must be >= 16, got {Ny}")
    x = 2.0 * np.pi * np.arange(Nx) / Nx
    k = np.fft.fftfreq(Nx, d=1.0 / Nx).astype(int)
    k[Nx // 2] = Nx // 2  # label Nyquist +Nx/2
    kmax = Nx // 3
    mask = np.abs(k) <= kmax
    return Grid(
        Nx=Nx,
        Ny=Ny,
        x_nodes=x,
        y_nodes=cheb_nodes(Ny),
        k_modes=k,
        dealias_kmax=kmax,
        dealias_ymax=(2 * Ny) // 3,
        cc_weights=clenshaw_curtis_weights(Ny),
        dealias_mask=mask,
    )


@dataclass
class SpectralField:
    """Fourier-in-x coefficients on the y collocation nodes, shape (Nx, Ny+1).

    coeffs[ik, j] is the coefficient of e^{i k x} at y_nodes[j], with k =
    grid.k_modes[ik]. real=True asserts the represented physical field is
    real, i.e. coeff(-k) = conj(coeff(k)).
    """

    grid: Grid
    coeffs: np.ndarray
    real: bool = True

    def __post_init__(self) -> None:
        if self.coeffs.shape != self.grid.shape:
            raise ValueError(
                f"coefficient shape {self.coeffs.shape} != grid shape {self.grid.shape}"
            )
        if self.coeffs.dtype != np.complex128:
            self.coeffs = self.coeffs.astype(np.complex128)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy(), self.real)

    def mode(self, k: int) -> np.ndarray:
        """Coefficient column for wavenumber k."""
        (idx,) = np.nonzero(self.grid.k_modes == k)
        if idx.size != 1:
            raise ValueError(f"wavenumber {k} not on grid")
        return self.coeffs[idx[0]]

    def check_reality(self, tol: float = 1e-13) -> float:
        """Max relative conjugate-symmetry defect over k pairs."""
        c = self.coeffs
        n = self.grid.Nx
        defect = 0.0
        scale = max(np.abs(c).max(), 1e-300)
        for ik in range(1, n // 2):
            defect = max(defect, float(np.abs(c[ik] - np.conj(c[n - ik])).max()) / scale)
        defect = max(defect, float(np.abs(c[0].imag).max()) / scale)
        return defect


def to_spectral(values: np.ndarray, grid: Grid, real: bool = True) -> SpectralField:
    """Forward transform of a physical (Nx, Ny+1) field; DFT in x only."""
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite values in to_spectral input")
    coeffs = np.fft.fft(values, axis=0) / grid.Nx
    return SpectralField(grid, coeffs, real=real)


def to_physical(f: SpectralField) -> np.ndarray:
    vals = np.fft.ifft(f.coeffs * f.grid.Nx, axis=0)
    return vals.real if f.real else vals


def field_from_physical(grid: Grid, values: np.ndarray, real: bool = True) -> SpectralField:
    return to_spectral(np.asarray(values, dtype=float if real else complex), grid, real=real)


def field_from_coeffs(grid: Grid, coeffs: np.ndarray, real: bool = True) -> SpectralField:
    return SpectralField(grid, np.array(coeffs, dtype=np.complex128), real=real)


def zeros_like(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, np.zeros(f.grid.shape, dtype=np.complex128), f.real)


def ddx(f: SpectralField) -> SpectralField:
    ik = 1j * f.grid.k_modes[:, None]
    return SpectralField(f.grid, ik * f.coeffs, f.real)


def ddy(f: SpectralField) -> SpectralField:
    D1 = diff_ops(f.grid).D1
    return SpectralField(f.grid, f.coeffs @ D1.T, f.real)


def dealias(f: SpectralField) -> SpectralField:
    out = f.coeffs.copy()
    out[~f.grid.dealias_mask] = 0.0
    return SpectralField(f.grid, out, f.real)


def product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Pointwise physical product, then 2/3-rule dealiasing in x."""
    if a.grid is not b.grid:
        raise ValueError("product requires fields on the same grid")
    pa, pb = to_physical(a), to_physical(b)
    out = to_spectral(pa * pb, a.grid, real=a.real and b.real)
    return dealias(out)


@dataclass(frozen=True, eq=False)
class DiffOperators:
    """Dense y-differentiation matrices plus bordered boundary variants."""

    D1: np.ndarray
    D2: np.ndarray

    def dirichlet_bordered(self, A: np.ndarray) -> np.ndarray:
        """Replace first/last rows of A with identity rows (values at y=+1,-1)."""
        B = A.copy()
        B[0, :] = 0.0
        B[0, 0] = 1.0
        B[-1, :] = 0.0
        B[-1, -1] = 1.0
        return B

    def neumann_bordered(self, A: np.ndarray) -> np.ndarray:
        """Replace first/last rows of A with d/dy rows at the walls."""
        B = A.copy()
        B[0, :] = self.D1[0, :]
        B[-1, :] = self.D1[-1, :]
        return B


_OPS_CACHE: dict[int, DiffOperators] = {}


def diff_ops(grid: Grid) -> DiffOperators:
    ops = _OPS_CACHE.get(grid.Ny)
    if ops is None:
        D1 = cheb_D1(grid.Ny)
        ops = DiffOperators(D1=D1, D2=D1 @ D1)
        _OPS_CACHE[grid.Ny] = ops
    return ops


BCKind = Literal["dirichlet", "neumann"]


def solve_helmholtz(
    grid: Grid,
    k2: float,
    rhs: np.ndarray,
    bc: BCKind = "dirichlet",
    bc_values: tuple[float, float] = (0.0, 0.0),
) -> np.ndarray:
    """Solve (d_yy - k2) phi = rhs on the y nodes with wall conditions.

    bc_values are (value at y=+1, value at y=-1); for Neumann they prescribe
    d_y phi at the walls. The singular Neumann/k2=0 case is gauged by zero
    mean (Clenshaw-Curtis), after a solvability check on the data.
    """
    if k2 < 0:
        raise ValueError("k2 must be >= 0")
    rhs = np.asarray(rhs, dtype=np.complex128)
    ops = diff_ops(grid)
    n = grid.Ny + 1
    A = ops.D2 - k2 * np.eye(n)
    b = rhs.copy()
    if bc == "dirichlet":
        A = ops.dirichlet_bordered(A)
        b[0], b[-1] = bc_values
    elif bc == "neumann":
        A = ops.neumann_bordered(A)
        b[0], b[-1] = bc_values
        if k2 == 0.0:
            w = grid.cc_weights
            defect = abs(w @ rhs - (bc_values[0] - bc_values[1]))
            scale = max(np.abs(rhs).max(), abs(bc_values[0]), abs(bc_values[1]), 1e-300)
            if defect > 1e-8 * scale:
                raise ValueError(
                    f"singular Neumann system: solvability defect {defect:.3e}"
                )
            # rank-one shift pins the zero-mean gauge without touching the PDE rows
            A = A + np.outer(np.ones(n), w)
    else:
        raise ValueError(f"unknown bc kind {bc!r}")
    return np.linalg.solve(A, b)


class HelmholtzFamily:
    """Prefactored bordered solves for a fixed matrix family A_k = c0*I + c1*(D2 - k^2 I).

    Used by the time steppers, which solve the same operators every step.
    """

    def __init__(
        self,
        grid: Grid,
        c0: float,
        c1: float,
        k_values: np.ndarray,
        bc: BCKind = "dirichlet",
    ) -> None:
        self.grid = grid
        self.bc = bc
        ops = diff_ops(grid)
        n = grid.Ny + 1
        eye = np.eye(n)
        self._lu = {}
        for k in np.unique(np.abs(k_values)):
            A = c0 * eye + c1 * (ops.D2 - float(k) ** 2 * eye)
            if bc == "dirichlet":
                A = ops.dirichlet_bordered(A)
            else:
                A = ops.neumann_bordered(A)
            self._lu[int(k)] = lu_factor(A)

    def solve(self, k: int, rhs: np.ndarray, bc_values: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
        b = np.asarray(rhs, dtype=np.complex128).copy()
        b[0], b[-1] = bc_values
        return lu_solve(self._lu[abs(int(k))], b)


def _weight_column(f: SpectralField, w: np.ndarray | None) -> np.ndarray:
    if w is None:
        return f.grid.cc_weights
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("weight must be nonnegative")
    return f.grid.cc_weights * w**2


def l2_norm(f: SpectralField) -> float:
    """L2 norm over T x [-1,1]; spectral Parseval in x, Clenshaw-Curtis in y."""
    s = np.abs(f.coeffs) ** 2 @ f.grid.cc_weights
    return float(np.sqrt(2.0 * np.pi * s.sum()))


def weighted_l2(f: SpectralField, w: np.ndarray) -> float:
    """L2 norm of w*f for a real weight w(y) (1D column) or w(x,y) (2D physical)."""
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ValueError("weight must be nonnegative")
    if w.ndim == 1:
        s = (np.abs(f.coeffs) ** 2 * w**2) @ f.grid.cc_weights
        return float(np.sqrt(2.0 * np.pi * s.sum()))
    vals = to_physical(f) * w
    dx = 2.0 * np.pi / f.grid.Nx
    s = (np.abs(vals) ** 2 @ f.grid.cc_weights) * dx
    return float(np.sqrt(s.sum()))


def linf_norm(f: SpectralField) -> float:
    return float(np.abs(to_physical(f)).max())


def column_l2(col: np.ndarray, grid: Grid) -> float:
    """L2_y norm of a single coefficient column with Clenshaw-Curtis weights."""
    return float(np.sqrt(np.real(np.abs(col) ** 2 @ grid.cc_weights)))
