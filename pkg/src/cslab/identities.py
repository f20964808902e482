"""Machine checks for the exact operator algebra behind the diagnostics.

The weighted functionals lean on a stack of exact identities: commutation
rules between plain derivatives, cutoff powers and the adapted ladder
Gamma_k = (1/v_y) d/dy + i k t, a Leibniz expansion of the transport
nonlinearity into quasiproduct sums, a chain-rule (Faa di Bruno) expansion
of y-derivatives through the frame map, factorial/partition bounds, a
Gevrey multiplier embedding, and an interpolation bound for sup norms.
A transcription slip in any of them would poison every ladder diagnostic
downstream, so this module evaluates both sides of each statement and
reports residuals.

Two evaluation paths are used:

* **Exact path.**  Test fields and frames built from polynomials with
  dyadic-rational coefficients.  Every operator application (d/dy, the
  division by v_y, ladder powers, products) is carried out on
  numerator/denominator-power pairs with exact float arithmetic, and only
  the final nodal evaluation rounds.  Residuals sit at 1e-12 even for
  six-fold ladders, so the reference tolerance 1e-8 is meaningful at all
  orders.
* **Grid path.**  Arbitrary columns on the Chebyshev grid, differentiated
  through a roundoff-filtered coefficient recurrence.  Repeated spectral
  differentiation of sampled data loses roughly two digits per stacked
  layer (the coefficient bandwidth squared against the derivative growth),
  which no algorithm can recover from 16-digit samples; tolerances for
  deep ladders are therefore scaled by a per-layer condition factor and
  capped, and the scaling is recorded in the report.

``run_identity_suite`` assembles a fixed-seed corpus (random dyadic
polynomials, tilted waves e^{-ikt v} g(v), analytic bumps) and returns the
full list of reports; everything is deterministic given the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import Iterator, Mapping, Sequence

import numpy as np
from numpy.polynomial import polynomial as pol
from scipy.fft import dct
from scipy.special import gammaln

from .coords import CoordState, gamma_apply, identity_coord_state
from .spectral import (
    Grid,
    SpectralField,
    ddx,
    diff_ops,
    field_from_coeffs,
    make_grid,
    to_physical,
    to_spectral,
)
from .weights import CutoffFamily, W_eval, WeightParams

__all__ = [
    "IdentityReport",
    "PolyFrame",
    "PolyColumn",
    "TiltedWave",
    "check_commutators",
    "check_quasiproduct",
    "check_faa_di_bruno",
    "check_combinatorial",
    "check_gevrey_embedding",
    "check_sobolev_gamma",
    "run_identity_suite",
    "reports_to_json",
]

REFERENCE_NX = 64
REFERENCE_NY = 256

EQUALITY_TOL = 1e-8
#: measured roundoff amplification per stacked derivative layer on the grid
#: path at the reference resolution (bandwidth^2 / derivative growth).
LAYER_CONDITION = 100.0
CONDITION_CAP = 1e-2

_TINY = 1e-300


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of one identity check.

    ``residual`` is the max relative residual for an equality, or the max
    violation for an inequality (zero when it holds).  ``sample`` records
    what was evaluated, including corpus seeds, so a failure is
    reproducible.
    """

    name: str
    residual: float
    sample: str
    passed: bool
    tol: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.residual) or self.residual < 0.0:
            raise ValueError(f"residual must be finite and >= 0, got {self.residual}")

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "residual": self.residual,
            "sample": self.sample,
            "passed": self.passed,
            "tol": self.tol,
        }


def _report(name: str, residual: float, sample: str, tol: float) -> IdentityReport:
    return IdentityReport(
        name=name, residual=float(residual), sample=sample,
        passed=bool(residual <= tol), tol=float(tol),
    )


def reports_to_json(reports: Sequence[IdentityReport]) -> str:
    return json.dumps([r.as_dict() for r in reports], indent=2)


# ---------------------------------------------------------------------------
# filtered Chebyshev column calculus (grid path)
# ---------------------------------------------------------------------------

def _to_cheb(vals: np.ndarray) -> np.ndarray:
    n = vals.shape[-1] - 1
    a = dct(vals, type=1, axis=-1) / n
    a[..., 0] *= 0.5
    a[..., -1] *= 0.5
    return a


def _from_cheb(a: np.ndarray) -> np.ndarray:
    b = a.copy()
    b[..., 0] *= 2.0
    b[..., -1] *= 2.0
    return dct(b, type=1, axis=-1) * 0.5


def _dcheb(a: np.ndarray) -> np.ndarray:
    """Derivative in coefficient space via the descending recurrence."""
    n = a.shape[-1] - 1
    b = np.zeros_like(a)
    b[..., n - 1] = 2.0 * n * a[..., n]
    for k in range(n - 1, 0, -1):
        b[..., k - 1] = b[..., k + 1] + 2.0 * k * a[..., k]
    b[..., 0] *= 0.5
    return b


def _chebfilt(vals: np.ndarray, rel: float = 5e-16) -> np.ndarray:
    """Zero coefficients under the roundoff tail of an analytic column.

    Without the filter, dust at high wavenumbers is amplified by every
    subsequent differentiation and dominates deep ladders.
    """
    v = np.asarray(vals, dtype=complex)
    a = _to_cheb(v)
    m = np.max(np.abs(a))
    if m == 0.0:
        return v
    keep = np.nonzero(np.abs(a) >= rel * m)[0]
    cut = int(keep.max()) + 1
    if cut < a.shape[-1]:
        a[..., cut:] = 0.0
    return _from_cheb(a)


def _dy_col(col: np.ndarray) -> np.ndarray:
    return _from_cheb(_dcheb(_to_cheb(_chebfilt(col))))


class _GridFrame:
    """Nodal frame data plus the filtered operators built on it."""

    def __init__(self, coord: CoordState):
        coord.require_nondegenerate()
        self.coord = coord
        self.v_y = np.asarray(coord.v_y, dtype=float)
        self.v_yy = _dy_col(self.v_y.astype(complex)).real
        self.t = coord.t

    def db(self, col: np.ndarray) -> np.ndarray:
        return _chebfilt(_dy_col(col) / self.v_y)

    def gamma(self, col: np.ndarray, k: int) -> np.ndarray:
        return self.db(col) + 1j * k * self.t * col

    def gamma_pow(self, col: np.ndarray, k: int, n: int) -> list[np.ndarray]:
        out = [np.asarray(col, dtype=complex)]
        for _ in range(n):
            out.append(self.gamma(out[-1], k))
        return out

    def db_chain(self, col: np.ndarray, depth: int) -> list[np.ndarray]:
        out = [np.asarray(col, dtype=complex)]
        for _ in range(depth):
            out.append(self.db(out[-1]))
        return out


# ---------------------------------------------------------------------------
# dyadic rational calculus (exact path)
# ---------------------------------------------------------------------------
#
# Functions are (num, m) pairs meaning num(y) / v_y(y)^m with polynomial
# num.  For dyadic coefficients every polynomial operation below is exact
# in binary floating point; rounding enters only at nodal evaluation.

_Rat = tuple[np.ndarray, int]


def _trim(c: np.ndarray) -> np.ndarray:
    return pol.polytrim(c, tol=0.0)


@dataclass(frozen=True)
class PolyFrame:
    """A coordinate profile v(y) with dyadic polynomial coefficients."""

    v_coeffs: np.ndarray

    @property
    def vy_coeffs(self) -> np.ndarray:
        return pol.polyder(self.v_coeffs)

    @property
    def vyy_coeffs(self) -> np.ndarray:
        return pol.polyder(self.v_coeffs, 2)

    def min_vy(self, samples: int = 2001) -> float:
        yy = np.linspace(-1.0, 1.0, samples)
        return float(np.min(pol.polyval(yy, self.vy_coeffs).real))

    def coord_state(self, grid: Grid, t: float) -> CoordState:
        y = grid.y_nodes
        v = pol.polyval(y, self.v_coeffs).real
        vy = pol.polyval(y, self.vy_coeffs).real
        z = np.zeros_like(y)
        return CoordState(
            grid=grid, t=t, v=v, v_y=vy, H=vy - 1.0,
            Hbar=z.copy(), G=z.copy(), D_aux=z.copy(),
        )

    # -- rational operations bound to this frame --

    def add(self, a: _Rat, b: _Rat) -> _Rat:
        (na, ma), (nb, mb) = a, b
        m = max(ma, mb)
        vy = self.vy_coeffs.astype(complex)
        if m > ma:
            na = pol.polymul(na, pol.polypow(vy, m - ma))
        if m > mb:
            nb = pol.polymul(nb, pol.polypow(vy, m - mb))
        return _trim(pol.polyadd(na, nb)), m

    def mul(self, a: _Rat, b: _Rat) -> _Rat:
        return _trim(pol.polymul(a[0], b[0])), a[1] + b[1]

    def scale(self, c: complex, a: _Rat) -> _Rat:
        return a[0] * c, a[1]

    def dy(self, a: _Rat) -> _Rat:
        num, m = a
        vy = self.vy_coeffs.astype(complex)
        vyy = self.vyy_coeffs.astype(complex)
        out = pol.polysub(pol.polymul(pol.polyder(num), vy), m * pol.polymul(num, vyy))
        return _trim(out), m + 1

    def db(self, a: _Rat) -> _Rat:
        num, m = self.dy(a)
        return num, m + 1

    def gamma(self, a: _Rat, kt: complex) -> _Rat:
        return self.add(self.db(a), self.scale(1j * kt, a))

    def eval(self, y: np.ndarray, a: _Rat) -> np.ndarray:
        vy = pol.polyval(y, self.vy_coeffs).real
        return pol.polyval(y, a[0]) / vy ** a[1]

    @staticmethod
    def identity() -> "PolyFrame":
        return PolyFrame(v_coeffs=np.array([0.0, 1.0]))

    @staticmethod
    def cubic_default() -> "PolyFrame":
        # v = (9/8) y - (1/8) y^3: endpoint-preserving, v_y in [3/4, 9/8]
        return PolyFrame(v_coeffs=np.array([0.0, 9 / 8, 0.0, -1 / 8]))

    @staticmethod
    def random(rng: np.random.Generator, degree: int = 4,
               amplitude: float = 0.1) -> "PolyFrame":
        """Random dyadic v = y + perturbation, rejected until v_y > 0.7."""
        scale = amplitude / degree
        for _ in range(100):
            raw = rng.integers(-256, 257, size=degree)
            coeffs = np.zeros(degree + 2)
            coeffs[1] = 1.0
            coeffs[2:] = raw * (scale / 256.0)
            # snap to the dyadic lattice so polynomial arithmetic stays exact
            coeffs[2:] = np.round(coeffs[2:] * 4096.0) / 4096.0
            fr = PolyFrame(v_coeffs=coeffs)
            if fr.min_vy() > 0.7:
                return fr
        raise RuntimeError("could not draw a nondegenerate frame")


@dataclass(frozen=True)
class PolyColumn:
    """Plain polynomial test field c(y), dyadic coefficients."""

    coeffs: np.ndarray

    def values(self, y: np.ndarray) -> np.ndarray:
        return pol.polyval(y, self.coeffs.astype(complex))

    @staticmethod
    def random(rng: np.random.Generator, degree: int = 10,
               wall_zero: bool = True) -> "PolyColumn":
        raw = rng.integers(-512, 513, size=degree + 1) / 512.0
        c = raw * 0.5 ** np.arange(degree + 1)
        c = np.round(c * 4096.0) / 4096.0
        if wall_zero:
            c = pol.polymul(c, [1.0, 0.0, -1.0])
        return PolyColumn(coeffs=_trim(np.atleast_1d(c)))


@dataclass(frozen=True)
class TiltedWave:
    """Test field e^{-i k t v(y)} g(v(y)) with polynomial g.

    The ladder acts in closed form on this family:
    Gamma_k^n (e^{-ikt v} G) = e^{-ikt v} dbar^n G with dbar = (1/v_y) d/dy,
    so deep ladders never leave the exact calculus.
    """

    g_coeffs: np.ndarray

    @staticmethod
    def random(rng: np.random.Generator, degree: int = 6) -> "TiltedWave":
        raw = rng.integers(-512, 513, size=degree + 1) / 512.0
        c = np.round(raw * 0.5 ** np.arange(degree + 1) * 4096.0) / 4096.0
        return TiltedWave(g_coeffs=_trim(np.atleast_1d(c)))


def _compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """outer(inner(y)) by Horner in polynomial space; exact for dyadics."""
    out = np.atleast_1d(np.asarray(outer, dtype=complex)[-1:])
    for c in np.asarray(outer, dtype=complex)[-2::-1]:
        out = pol.polyadd(pol.polymul(out, inner), [c])
    return _trim(out)


def _rel_residual(delta: np.ndarray, *sides: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(s))) for s in sides)
    return float(np.max(np.abs(delta))) / max(scale, _TINY)


_COMMUTATOR_NAMES = (
    "dy_gamma_power",
    "dyy_gamma_power",
    "dy_q_power",
    "dyy_q_power",
    "dv_q_power",
    "dvv_q_power",
    "dvv_q",
)

#: dyadic polynomial stand-in for the interior cutoff: (1-y^2)(1+y^2/2)
DEFAULT_Q_COEFFS = np.array([1.0, 0.0, -0.5, 0.0, -0.5])


# ---------------------------------------------------------------------------
# commutator identities
# ---------------------------------------------------------------------------
#
# With h = v_y - 1 and dbar = (1/v_y) d/dy, the two ladder identities are
#
#   [d/dy,  Gamma_k^n] f = ikt sum_{l<n} C(n,l) (dbar^{n-l} h) Gamma^l f
#                          - sum_{1<=l<=n} C(n,l-1) (dbar^{n-l+1} h) Gamma^l f
#   [d2/dy2, Gamma_k^n] f = - sum_{l<n} C(n,l) (2 (dbar^{n-l-1} v_yy) dbar^2
#                          + (dbar^{n-l} v_yy) dbar) Gamma^l f
#
# and the cutoff-power identities are the Leibniz expansions of
# [d/dy, q^n], [d2/dy2, q^n], [dbar, q^n], [dbar^2, q^n] with every term
# written out so no negative power of q appears at the walls.


def _commutator_exact(frame: PolyFrame, field, n_max: int, k: int, t: float,
                      q_coeffs: np.ndarray, y: np.ndarray) -> dict[str, float]:
    kt = k * t
    vy = frame.vy_coeffs.astype(complex)
    vyy = frame.vyy_coeffs.astype(complex)
    h: _Rat = (_trim(pol.polysub(vy, [1.0])), 0)
    dbh = [h]
    for _ in range(n_max + 2):
        dbh.append(frame.db(dbh[-1]))
    dbv2 = [(vyy, 0)]
    for _ in range(n_max + 2):
        dbv2.append(frame.db(dbv2[-1]))

    tilted = isinstance(field, TiltedWave)
    if tilted:
        base = (_compose(field.g_coeffs, frame.v_coeffs.astype(complex)), 0)
        phase = np.exp(-1j * kt * pol.polyval(y, frame.v_coeffs).real)
    else:
        base = (np.asarray(field.coeffs, dtype=complex), 0)
        phase = np.ones_like(y, dtype=complex)

    # ladder states; for tilted waves Gamma^l strips to dbar^l on the
    # polynomial part, otherwise the ikt term is carried in the rationals
    lad: list[_Rat] = [base]
    for _ in range(n_max):
        lad.append(frame.db(lad[-1]) if tilted else frame.gamma(lad[-1], kt))
    lad_v = [phase * frame.eval(y, r) for r in lad]

    def dy_vals(r: _Rat) -> np.ndarray:
        d = frame.dy(r)
        if tilted:
            return phase * (-1j * kt * pol.polyval(y, vy).real * frame.eval(y, r)
                            + frame.eval(y, d))
        return frame.eval(y, d)

    def dyy_vals(r: _Rat) -> np.ndarray:
        if tilted:
            vy_r: _Rat = (vy, 0)
            a = frame.add(frame.scale(-1j * kt, frame.mul(vy_r, r)), frame.dy(r))
            return phase * (-1j * kt * pol.polyval(y, vy).real * frame.eval(y, a)
                            + frame.eval(y, frame.dy(a)))
        return frame.eval(y, frame.dy(frame.dy(r)))

    def db_vals(r: _Rat, order: int) -> np.ndarray:
        if tilted:
            # dbar(phase F) = phase (dbar F - ikt F)
            cur = r
            chain = [frame.eval(y, cur)]
            for _ in range(order):
                cur = frame.db(cur)
                chain.append(frame.eval(y, cur))
            if order == 1:
                return phase * (chain[1] - 1j * kt * chain[0])
            return phase * (chain[2] - 2j * kt * chain[1] - kt * kt * chain[0])
        cur = r
        for _ in range(order):
            cur = frame.db(cur)
        return frame.eval(y, cur)

    # ladder of the differentiated base: Gamma^n (d/dy f)
    if tilted:
        g0 = base[0]
        df: _Rat = (_trim(pol.polyadd(-1j * kt * pol.polymul(vy, g0), pol.polyder(g0))), 0)
        ddf: _Rat = (_trim(pol.polyadd(-1j * kt * pol.polymul(vy, df[0]), pol.polyder(df[0]))), 0)
        lad_df = [df]
        lad_ddf = [ddf]
        for _ in range(n_max):
            lad_df.append(frame.db(lad_df[-1]))
            lad_ddf.append(frame.db(lad_ddf[-1]))
        lad_df_v = [phase * frame.eval(y, r) for r in lad_df]
        lad_ddf_v = [phase * frame.eval(y, r) for r in lad_ddf]
    else:
        lad_df = [frame.dy(base)]
        lad_ddf = [frame.dy(frame.dy(base))]
        for _ in range(n_max):
            lad_df.append(frame.gamma(lad_df[-1], kt))
            lad_ddf.append(frame.gamma(lad_ddf[-1], kt))
        lad_df_v = [frame.eval(y, r) for r in lad_df]
        lad_ddf_v = [frame.eval(y, r) for r in lad_ddf]

    dbh_v = [frame.eval(y, r) for r in dbh]
    dbv2_v = [frame.eval(y, r) for r in dbv2]

    q_r: _Rat = (np.asarray(q_coeffs, dtype=complex), 0)
    qpow: list[_Rat] = [(np.ones(1, dtype=complex), 0)]
    for _ in range(n_max):
        qpow.append(frame.mul(qpow[-1], q_r))
    qv = pol.polyval(y, q_coeffs)
    qp = pol.polyval(y, pol.polyder(q_coeffs))
    qpp = pol.polyval(y, pol.polyder(q_coeffs, 2))
    vy_n = pol.polyval(y, vy).real
    vyy_n = pol.polyval(y, vyy).real

    out = {name: 0.0 for name in _COMMUTATOR_NAMES}
    f_v = lad_v[0]
    fy_v = dy_vals(lad[0])
    fyy_v = dyy_vals(lad[0])
    fdb1_v = db_vals(lad[0], 1)
    fdb2_v = db_vals(lad[0], 2)
    for n in range(1, n_max + 1):
        lhs = dy_vals(lad[n])
        rhs = lad_df_v[n].copy()
        for l in range(n):
            rhs += 1j * kt * comb(n, l) * dbh_v[n - l] * lad_v[l]
        for l in range(1, n + 1):
            rhs -= comb(n, l - 1) * dbh_v[n - l + 1] * lad_v[l]
        out["dy_gamma_power"] = max(out["dy_gamma_power"],
                                    _rel_residual(lhs - rhs, lhs, rhs))

        lhs2 = dyy_vals(lad[n])
        rhs2 = lad_ddf_v[n].copy()
        for l in range(n):
            rhs2 -= comb(n, l) * (2.0 * dbv2_v[n - l - 1] * db_vals(lad[l], 2)
                                  + dbv2_v[n - l] * db_vals(lad[l], 1))
        out["dyy_gamma_power"] = max(out["dyy_gamma_power"],
                                     _rel_residual(lhs2 - rhs2, lhs2, rhs2))

        # cutoff powers: the product q^n f stays inside the rational
        # calculus, so both sides are exact up to nodal rounding
        qnF = frame.mul(qpow[n], lad[0])
        qn, qn1 = qv ** n, qv ** (n - 1)
        qn2 = qv ** (n - 2) if n >= 2 else np.zeros_like(qv)

        d_qnF = dy_vals(qnF)
        lhs = d_qnF - qn * fy_v
        rhs = n * qp * qn1 * f_v
        out["dy_q_power"] = max(out["dy_q_power"],
                                _rel_residual(lhs - rhs, d_qnF, qn * fy_v + rhs))

        dd_qnF = dyy_vals(qnF)
        lhs = dd_qnF - qn * fyy_v
        rhs = (n * (n - 1) * qp ** 2 * qn2 * f_v
               + 2 * n * qp * qn1 * fy_v + n * qpp * qn1 * f_v)
        out["dyy_q_power"] = max(out["dyy_q_power"],
                                 _rel_residual(lhs - rhs, dd_qnF, qn * fyy_v + rhs))

        db_qnF = db_vals(qnF, 1)
        lhs = db_qnF - qn * fdb1_v
        rhs = n * (qp / vy_n) * qn1 * f_v
        out["dv_q_power"] = max(out["dv_q_power"],
                                _rel_residual(lhs - rhs, db_qnF, qn * fdb1_v + rhs))

        db2_qnF = db_vals(qnF, 2)
        lhs = db2_qnF - qn * fdb2_v
        rhs = (n * (n - 1) * qp ** 2 / vy_n ** 2 * qn2 * f_v
               + 2 * n * qp / vy_n ** 2 * qn1 * fy_v
               + n * qpp / vy_n ** 2 * qn1 * f_v
               - n * qp * vyy_n / vy_n ** 3 * qn1 * f_v)
        out["dvv_q_power"] = max(out["dvv_q_power"],
                                 _rel_residual(lhs - rhs, db2_qnF, qn * fdb2_v + rhs))
        if n == 1:
            out["dvv_q"] = out["dvv_q_power"]
    return out


def _commutator_grid(col: np.ndarray, coord: CoordState, n_max: int, k: int,
                     q_col: np.ndarray,
                     weight_env: np.ndarray | None) -> tuple[dict[str, float], dict[str, int]]:
    """Two-sided evaluation on the filtered grid engine.

    Returns residuals and the stacked-derivative layer count per identity,
    from which the condition-scaled tolerance is derived.
    """
    fr = _GridFrame(coord)
    t = coord.t
    kt = k * t
    y = coord.grid.y_nodes
    c0 = np.asarray(col, dtype=complex)
    h = (fr.v_y - 1.0).astype(complex)
    dbh = fr.db_chain(h, n_max + 1)
    dbv2 = fr.db_chain(fr.v_yy.astype(complex), n_max + 1)
    lad = fr.gamma_pow(c0, k, n_max)
    lad_df = fr.gamma_pow(_dy_col(c0), k, n_max)
    lad_ddf = fr.gamma_pow(_dy_col(_dy_col(c0)), k, n_max)

    qp = _dy_col(q_col.astype(complex)).real
    qpp = _dy_col(qp.astype(complex)).real

    def wres(delta: np.ndarray, *sides: np.ndarray) -> float:
        r = _rel_residual(delta, *sides)
        if weight_env is not None:
            scale = max(float(np.max(np.abs(s) * weight_env)) for s in sides)
            r = max(r, float(np.max(np.abs(delta) * weight_env)) / max(scale, _TINY))
        return r

    res = {name: 0.0 for name in _COMMUTATOR_NAMES}
    layers = {name: 2 for name in _COMMUTATOR_NAMES}
    for n in range(1, n_max + 1):
        lhs = _dy_col(lad[n])
        rhs = lad_df[n].copy()
        for l in range(n):
            rhs += 1j * kt * comb(n, l) * dbh[n - l] * lad[l]
        for l in range(1, n + 1):
            rhs -= comb(n, l - 1) * dbh[n - l + 1] * lad[l]
        if (r := wres(lhs - rhs, lhs, rhs)) > res["dy_gamma_power"]:
            res["dy_gamma_power"], layers["dy_gamma_power"] = r, n + 1

        lhs = _dy_col(_dy_col(lad[n]))
        rhs = lad_ddf[n].copy()
        for l in range(n):
            rhs -= comb(n, l) * (2.0 * dbv2[n - l - 1] * fr.db(fr.db(lad[l]))
                                 + dbv2[n - l] * fr.db(lad[l]))
        if (r := wres(lhs - rhs, lhs, rhs)) > res["dyy_gamma_power"]:
            res["dyy_gamma_power"], layers["dyy_gamma_power"] = r, n + 2

        qn, qn1 = q_col ** n, q_col ** (n - 1)
        qn2 = q_col ** (n - 2) if n >= 2 else np.zeros_like(q_col)
        f, fy = c0, _dy_col(c0)
        fyy = _dy_col(fy)
        fdb1, fdb2 = fr.db(c0), fr.db(fr.db(c0))

        lhs = _dy_col(qn * f) - qn * fy
        rhs = n * qp * qn1 * f
        if (r := wres(lhs - rhs, _dy_col(qn * f), qn * fy + rhs)) > res["dy_q_power"]:
            res["dy_q_power"], layers["dy_q_power"] = r, 2

        lhs = _dy_col(_dy_col(qn * f)) - qn * fyy
        rhs = (n * (n - 1) * qp ** 2 * qn2 * f + 2 * n * qp * qn1 * fy + n * qpp * qn1 * f)
        if (r := wres(lhs - rhs, _dy_col(_dy_col(qn * f)), qn * fyy + rhs)) > res["dyy_q_power"]:
            res["dyy_q_power"], layers["dyy_q_power"] = r, 3

        lhs = fr.db(qn * f) - qn * fdb1
        rhs = n * (qp / fr.v_y) * qn1 * f
        if (r := wres(lhs - rhs, fr.db(qn * f), qn * fdb1 + rhs)) > res["dv_q_power"]:
            res["dv_q_power"], layers["dv_q_power"] = r, 2

        lhs = fr.db(fr.db(qn * f)) - qn * fdb2
        rhs = (n * (n - 1) * qp ** 2 / fr.v_y ** 2 * qn2 * f
               + 2 * n * qp / fr.v_y ** 2 * qn1 * fy
               + n * qpp / fr.v_y ** 2 * qn1 * f
               - n * qp * fr.v_yy / fr.v_y ** 3 * qn1 * f)
        if (r := wres(lhs - rhs, fr.db(fr.db(qn * f)), qn * fdb2 + rhs)) > res["dvv_q_power"]:
            res["dvv_q_power"], layers["dvv_q_power"] = r, 3
        if n == 1:
            res["dvv_q"], layers["dvv_q"] = res["dvv_q_power"], 3
    return res, layers


def _grid_tol(layers: int) -> float:
    return min(EQUALITY_TOL * LAYER_CONDITION ** max(layers - 2, 0), CONDITION_CAP)


def check_commutators(testfield, coord, weights: WeightParams | None = None,
                      n_max: int = 6, k: int = 3,
                      q_coeffs: np.ndarray | None = None) -> list[IdentityReport]:
    """Verify the seven derivative/ladder commutation identities.

    ``testfield`` may be a :class:`PolyColumn` or :class:`TiltedWave`
    (with ``coord`` a :class:`PolyFrame` plus a time, as ``(frame, t)``),
    in which case both sides are evaluated in the exact calculus at the
    flat tolerance, or a complex column on ``coord.grid`` for the filtered
    grid engine with condition-scaled tolerances.  ``weights`` optionally
    adds an e^W-weighted residual on the grid path.
    """
    if n_max < 1 or n_max > 8:
        raise ValueError("n_max must be in 1..8")
    qc = DEFAULT_Q_COEFFS if q_coeffs is None else np.asarray(q_coeffs, dtype=float)

    if isinstance(testfield, (PolyColumn, TiltedWave)):
        frame, t = coord
        if not isinstance(frame, PolyFrame):
            raise TypeError("exact path needs a PolyFrame")
        y = make_grid(8, REFERENCE_NY).y_nodes
        res = _commutator_exact(frame, testfield, n_max, k, float(t), qc, y)
        kind = "tilted wave" if isinstance(testfield, TiltedWave) else "polynomial"
        sample = (f"exact path, {kind} field, frame deg {len(frame.v_coeffs) - 1}, "
                  f"n<= {n_max}, k={k}, t={t}")
        return [_report(name, res[name], sample, EQUALITY_TOL)
                for name in _COMMUTATOR_NAMES]

    col = np.asarray(testfield, dtype=complex)
    if not isinstance(coord, CoordState):
        raise TypeError("grid path needs a CoordState")
    if col.shape != (coord.grid.Ny + 1,):
        raise ValueError("testfield must be a single y-column on coord.grid")
    env = None
    if weights is not None:
        w = W_eval(coord.t, coord.grid.y_nodes, weights)
        env = np.exp(np.minimum(w - np.max(w), 0.0))
    q_nodes = pol.polyval(coord.grid.y_nodes, qc)
    res, layers = _commutator_grid(col, coord, n_max, k, q_nodes, env)
    sample = (f"grid path, Ny={coord.grid.Ny}, n<= {n_max}, k={k}, t={coord.t}; "
              f"tolerance scaled x{LAYER_CONDITION:g} per derivative layer")
    return [_report(name, res[name], sample, _grid_tol(layers[name]))
            for name in _COMMUTATOR_NAMES]


# ---------------------------------------------------------------------------
# quasiproduct expansion
# ---------------------------------------------------------------------------
#
# With the slashed gradient (d/dx, Gamma) the transport bracket factors as
#   perp(grad g) . grad f = v_y (Gamma g d_x f - d_x g Gamma f),
# and the ladder expansion of the slashed bracket is pure Leibniz:
#   d_x^m Gamma^n (Gamma phi d_x w - d_x phi Gamma w)
#     = sum_{(m',n') < (m,n)} C(m,m') C(n,n') [Gamma phi_{m-m',n-n'} d_x w_{m',n'}
#       - d_x phi_{m-m',n-n'} Gamma w_{m',n'}]  +  same bracket on w_{m,n}.
# Composing the two (the plain-gradient bracket expanded through the sums
# with a single v_y left on the quasilinear term) is exact only in the
# flat frame, where Gamma commutes with d/dy; the curved-frame defect is
# genuine and is reported by the flat/curved split below.

_ModeField = dict[int, _Rat]


def _mf_gamma(frame: PolyFrame, F: _ModeField, t: float) -> _ModeField:
    return {k: frame.gamma(r, k * t) for k, r in F.items()}


def _mf_ddx(F: _ModeField) -> _ModeField:
    return {k: (r[0] * (1j * k), r[1]) for k, r in F.items()}


def _mf_dy(frame: PolyFrame, F: _ModeField) -> _ModeField:
    return {k: frame.dy(r) for k, r in F.items()}


def _mf_mul(frame: PolyFrame, F: _ModeField, G: _ModeField) -> _ModeField:
    out: _ModeField = {}
    for k1, r1 in F.items():
        for k2, r2 in G.items():
            pr = frame.mul(r1, r2)
            key = k1 + k2
            out[key] = frame.add(out[key], pr) if key in out else pr
    return out


def _mf_lin(frame: PolyFrame, F: _ModeField, G: _ModeField,
            cf: complex = 1.0, cg: complex = 1.0) -> _ModeField:
    out = {k: frame.scale(cf, r) for k, r in F.items()}
    for k, r in G.items():
        rr = frame.scale(cg, r)
        out[k] = frame.add(out[k], rr) if k in out else rr
    return out


def _mf_ladder(frame: PolyFrame, F: _ModeField, m: int, n: int, t: float) -> _ModeField:
    cur = F
    for _ in range(n):
        cur = _mf_gamma(frame, cur, t)
    for _ in range(m):
        cur = _mf_ddx(cur)
    return cur


def _mf_slashed(frame: PolyFrame, F: _ModeField, G: _ModeField, t: float) -> _ModeField:
    return _mf_lin(frame,
                   _mf_mul(frame, _mf_gamma(frame, F, t), _mf_ddx(G)),
                   _mf_mul(frame, _mf_ddx(F), _mf_gamma(frame, G, t)), 1.0, -1.0)


def _mf_residual(frame: PolyFrame, A: _ModeField, B: _ModeField, y: np.ndarray) -> float:
    zero: _Rat = (np.zeros(1, dtype=complex), 0)
    delta, scale = 0.0, _TINY
    for key in set(A) | set(B):
        va = frame.eval(y, A.get(key, zero))
        vb = frame.eval(y, B.get(key, zero))
        delta = max(delta, float(np.max(np.abs(va - vb))))
        scale = max(scale, float(np.max(np.abs(va))), float(np.max(np.abs(vb))))
    return delta / scale


def _quasiproduct_expansion_residual(frame: PolyFrame, phi: _ModeField,
                                     om: _ModeField, t: float, m_max: int,
                                     n_max: int, y: np.ndarray,
                                     composite: bool) -> float:
    worst = 0.0
    for m in range(m_max + 1):
        for n in range(n_max + 1):
            src = (_mf_lin(frame, _mf_mul(frame, _mf_dy(frame, phi), _mf_ddx(om)),
                           _mf_mul(frame, _mf_ddx(phi), _mf_dy(frame, om)), 1.0, -1.0)
                   if composite else _mf_slashed(frame, phi, om, t))
            lhs = _mf_ladder(frame, src, m, n, t)
            rhs: _ModeField | None = None
            for mp in range(m + 1):
                for np_ in range(n + 1):
                    if mp + np_ >= m + n:
                        continue
                    c = comb(m, mp) * comb(n, np_)
                    pa = _mf_ladder(frame, phi, m - mp, n - np_, t)
                    ob = _mf_ladder(frame, om, mp, np_, t)
                    term = _mf_lin(frame,
                                   _mf_mul(frame, _mf_gamma(frame, pa, t), _mf_ddx(ob)),
                                   _mf_mul(frame, _mf_ddx(pa), _mf_gamma(frame, ob, t)),
                                   c, -c)
                    rhs = term if rhs is None else _mf_lin(frame, rhs, term)
            quasi = _mf_slashed(frame, phi, _mf_ladder(frame, om, m, n, t), t)
            if composite:
                vy_r: _Rat = (frame.vy_coeffs.astype(complex), 0)
                quasi = {k: frame.mul(vy_r, r) for k, r in quasi.items()}
            rhs = quasi if rhs is None else _mf_lin(frame, rhs, quasi)
            worst = max(worst, _mf_residual(frame, lhs, rhs, y))
    return worst


def _pointwise_factorization_residual(phi: SpectralField, om: SpectralField,
                                      coord: CoordState) -> float:
    grid = phi.grid
    ops = diff_ops(grid)

    def dyf(f: SpectralField) -> SpectralField:
        return field_from_coeffs(grid, f.coeffs @ ops.D1.T, real=f.real)

    py, px = to_physical(dyf(phi)), to_physical(ddx(phi))
    oy, ox = to_physical(dyf(om)), to_physical(ddx(om))
    pg, og = to_physical(gamma_apply(phi, coord)), to_physical(gamma_apply(om, coord))
    lhs = py * ox - px * oy
    rhs = coord.v_y[None, :] * (pg * ox - px * og)
    return _rel_residual(lhs - rhs, lhs, rhs)


def check_quasiproduct(phi, omega, coord, m_max: int = 3, n_max: int = 3) -> IdentityReport:
    """Verify the transport-bracket factorization and ladder expansion.

    Mode-dict inputs (``{k: poly coeffs}``) with ``coord = (PolyFrame, t)``
    run the exact expansion; SpectralField inputs with a CoordState check
    the pointwise factorization through the production operators (the
    m = n = 0 case, which is exact on the discrete grid).
    """
    if isinstance(phi, SpectralField):
        r = _pointwise_factorization_residual(phi, omega, coord)
        return _report("quasiproduct_pointwise", r,
                       f"production operators, Nx={phi.grid.Nx}, Ny={phi.grid.Ny}, "
                       f"t={coord.t}", 1e-11)
    frame, t = coord
    y = make_grid(8, REFERENCE_NY).y_nodes
    pf: _ModeField = {k: (np.asarray(c, dtype=complex), 0) for k, c in phi.items()}
    of: _ModeField = {k: (np.asarray(c, dtype=complex), 0) for k, c in omega.items()}
    flat = len(_trim(frame.vy_coeffs)) == 1
    r = _quasiproduct_expansion_residual(frame, pf, of, float(t), m_max, n_max, y,
                                         composite=flat)
    name = "quasiproduct_flat_composite" if flat else "quasiproduct_ladder"
    sample = (f"exact path, modes phi={sorted(phi)}, omega={sorted(omega)}, "
              f"(m,n)<=({m_max},{n_max}), t={t}, "
              f"{'flat frame, plain-gradient bracket' if flat else 'curved frame, slashed bracket'}")
    return _report(name, r, sample, EQUALITY_TOL)


# ---------------------------------------------------------------------------
# chain rule through the frame (Faa di Bruno)
# ---------------------------------------------------------------------------

def _partition_multiplicities(j: int) -> Iterator[tuple[int, ...]]:
    """Multiplicity tuples (m_1..m_j) with sum l m_l = j."""
    def rec(rem: int, largest: int):
        if rem == 0:
            yield ()
            return
        for l in range(min(rem, largest), 0, -1):
            for mult in range(rem // l, 0, -1):
                for rest in rec(rem - l * mult, l - 1):
                    yield ((l, mult),) + rest
    for combo in rec(j, j):
        m = [0] * j
        for l, mult in combo:
            m[l - 1] = mult
        yield tuple(m)


def check_faa_di_bruno(omega_k, coord, j_max: int = 5) -> IdentityReport:
    """Compare d^j/dy^j against the partition expansion in dbar = (1/v_y) d/dy.

    d^j f / dy^j = sum over partitions of j of
       j!/(m_1! ... m_j!) (dbar^{sum m_l} f) prod_l (d^l v / dy^l / l!)^{m_l}.
    """
    if j_max < 1 or j_max > 6:
        raise ValueError("j_max must be in 1..6")
    if isinstance(omega_k, PolyColumn):
        frame, t = coord
        y = make_grid(8, REFERENCE_NY).y_nodes
        base: _Rat = (np.asarray(omega_k.coeffs, dtype=complex), 0)
        worst = 0.0
        for j in range(1, j_max + 1):
            lhs_r = base
            for _ in range(j):
                lhs_r = frame.dy(lhs_r)
            lhs = frame.eval(y, lhs_r)
            rhs = np.zeros_like(lhs)
            for mt in _partition_multiplicities(j):
                sm = sum(mt)
                coeff = factorial(j)
                for ml in mt:
                    coeff //= factorial(ml)
                cur = base
                for _ in range(sm):
                    cur = frame.db(cur)
                term = frame.eval(y, cur) * coeff
                for l, ml in enumerate(mt, start=1):
                    if ml:
                        dv = pol.polyval(y, pol.polyder(frame.v_coeffs, l)).real
                        term = term * (dv / factorial(l)) ** ml
                rhs += term
            worst = max(worst, _rel_residual(lhs - rhs, lhs, rhs))
        return _report("faa_di_bruno", worst,
                       f"exact path, frame deg {len(frame.v_coeffs) - 1}, j<= {j_max}",
                       1e-7)

    col = np.asarray(omega_k, dtype=complex)
    if not isinstance(coord, CoordState):
        raise TypeError("grid path needs a CoordState")
    fr = _GridFrame(coord)
    y = coord.grid.y_nodes
    vder = [np.asarray(coord.v, dtype=float), fr.v_y]
    for _ in range(j_max):
        vder.append(_dy_col(vder[-1].astype(complex)).real)
    worst = 0.0
    for j in range(1, j_max + 1):
        lhs = col.copy()
        for _ in range(j):
            lhs = _dy_col(lhs)
        rhs = np.zeros_like(lhs)
        for mt in _partition_multiplicities(j):
            sm = sum(mt)
            coeff = factorial(j)
            for ml in mt:
                coeff //= factorial(ml)
            cur = col.copy()
            for _ in range(sm):
                cur = fr.db(cur)
            term = cur * coeff
            for l, ml in enumerate(mt, start=1):
                if ml:
                    term = term * (vder[l] / factorial(l)) ** ml
            rhs += term
        worst = max(worst, _rel_residual(lhs - rhs, lhs, rhs))
    tol = min(1e-7 * LAYER_CONDITION ** max(j_max - 3, 0), CONDITION_CAP)
    return _report("faa_di_bruno_grid", worst,
                   f"grid path, Ny={coord.grid.Ny}, j<= {j_max}; condition-scaled tol",
                   tol)


# ---------------------------------------------------------------------------
# factorial and partition bounds (exact integer arithmetic)
# ---------------------------------------------------------------------------

def check_combinatorial(n_max: int = 15) -> IdentityReport:
    """Exact checks of the factorial partition ratio, the multinomial
    bound, and the partition-count envelope.

    For every multiplicity tuple with sum l m_l = n:
      * prod_l (l!)^{m_l} (sum m_l)! / n!  <= 1,
      * F1 F2 <= multinomial(m+n-j+sum m; n-j, sum m-p, p, m) <= 4^{m+n}
        for every admissible (m, n, j, p),
      * the number of tuples for each j is <= C 5^j with C fixed from
        the j <= 6 prefix.
    All ratios use Fractions, so a violation of any size is detected.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    worst = Fraction(0)
    checked = 0

    counts = {}
    for n in range(1, n_max + 1):
        tuples = list(_partition_multiplicities(n))
        counts[n] = len(tuples)
        for mt in tuples:
            sm = sum(mt)
            num = Fraction(factorial(sm))
            for l, ml in enumerate(mt, start=1):
                num *= Fraction(factorial(l)) ** ml
            ratio = num / factorial(n)
            worst = max(worst, ratio - 1)
            checked += 1

    # multinomial bound over a small exhaustive range
    for m in range(0, 5):
        for n in range(1, 7):
            for j in range(1, n + 1):
                for mt in _partition_multiplicities(j):
                    sm = sum(mt)
                    prod_fact = 1
                    for l, ml in enumerate(mt, start=1):
                        prod_fact *= factorial(l) ** ml
                    f2 = Fraction(factorial(m + n - j + sm) * prod_fact,
                                  factorial(m + n))
                    worst = max(worst, f2 - 1)
                    for p in range(0, sm + 1):
                        f1 = Fraction(factorial(n),
                                      factorial(n - j) * factorial(sm - p)
                                      * factorial(p) * prod_fact)
                        multi = Fraction(
                            factorial(m + n - j + sm),
                            factorial(n - j) * factorial(sm - p)
                            * factorial(p) * factorial(m))
                        worst = max(worst, f1 * f2 - multi)
                        worst = max(worst, multi - Fraction(4) ** (m + n))
                        checked += 1

    c_prefix = max(Fraction(counts[n], 5 ** n) for n in range(1, min(6, n_max) + 1))
    for n in range(1, n_max + 1):
        worst = max(worst, Fraction(counts[n]) - c_prefix * 5 ** n)
        worst = max(worst, Fraction(counts[n]) - Fraction(n * 4 ** n))

    residual = float(max(worst, Fraction(0)))
    return _report("combinatorial_bounds", residual,
                   f"exact arithmetic, partitions n<= {n_max}, "
                   f"{checked} inequalities, C={float(c_prefix):g}", 0.0)


# ---------------------------------------------------------------------------
# Gevrey multiplier embedding
# ---------------------------------------------------------------------------

def _gevrey_single_mode_violation(samples: Sequence[tuple[float, float]],
                                  lam: float, r: float) -> float:
    """Multiplier bound on one Fourier mode, summed to convergence.

    For a lone mode the derivative sum is a scalar series whose terms
    decay factorially, so both sides are computable to full precision for
    any (lam, r); no truncation judgement is involved.
    """
    worst = 0.0
    for k, eta in samples:
        x, z = k * k, eta * eta
        a, b = max(x, z), min(x, z)
        lhs_log = 2.0 * lam * (x + z) ** (r / 2.0)
        terms = []
        best = -np.inf
        for order in range(2000):
            if a == 0.0:
                sym_log = 0.0 if order == 0 else -np.inf
            else:
                ratio = b / a
                geo = float(np.sum(ratio ** np.arange(order + 1)))
                sym_log = order * np.log(a) + np.log(geo)
            tl = ((order / r) * np.log(12.0 * lam)
                  - (2.0 / r) * gammaln(order + 1) + sym_log)
            terms.append(tl)
            best = max(best, tl)
            if order > 10 and tl < best - 60.0:
                break
        tarr = np.array(terms)
        rhs_log = float(best + np.log(np.sum(np.exp(tarr - best))))
        worst = max(worst, max(0.0, np.exp(lhs_log - rhs_log) - 1.0))
    return worst


def _mollifier_profile(s: np.ndarray, sharpness: int) -> np.ndarray:
    out = np.zeros_like(s)
    m = np.abs(s) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - s[m] ** 2) ** sharpness)
    return out


def check_gevrey_embedding(g: Mapping[int, np.ndarray] | None = None,
                           lam: float = 0.1, r: float = 0.51,
                           support: float = 0.9, sharpness: int = 5,
                           n_uniform: int = 1024,
                           order_cap: int = 80) -> IdentityReport:
    """Check the Gevrey multiplier bound against the derivative sum.

    For compactly supported g on the periodized strip,
      ||e^{lam |grad|^r} g||^2  <=  sum_{m,n} (12 lam)^{(m+n)/r}
                                    / ((m+n)!)^{2/r} ||d_x^m d_y^n g||^2,
    with both sides evaluated from the same Fourier data.  The derivative
    sum converges only while the field's Gevrey order stays below 1/r, so
    the default corpus is a sharpened mollifier bump; if the partial sums
    have not turned geometric by ``order_cap`` a RuntimeError is raised
    rather than comparing against a truncation that means nothing.

    The exact index-transfer ratio 34 r / (19 (2 + r)) at r = 4/5 is
    checked in integer arithmetic alongside.
    """
    if not (0.0 < r < 1.0):
        raise ValueError("r must be in (0, 1)")
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    length = 2.0
    yv = -1.0 + length * np.arange(n_uniform) / n_uniform
    eta = 2.0 * np.pi * np.fft.fftfreq(n_uniform, d=length / n_uniform)
    if g is None:
        prof = _mollifier_profile(yv / support, sharpness)
        half = 0.5 * np.fft.fft(prof) / n_uniform
        ghat = {1: half, -1: half.copy()}
    else:
        ghat = {int(k): np.fft.fft(np.asarray(row, dtype=complex)) / n_uniform
                for k, row in g.items()}

    lhs = 0.0
    for k, gk in ghat.items():
        mult = np.exp(2.0 * lam * (k * k + eta ** 2) ** (r / 2.0))
        lhs += float(np.sum(mult * np.abs(gk) ** 2))

    with np.errstate(divide="ignore"):
        log_eta2 = 2.0 * np.log(np.abs(eta))
    log_gsq = {k: 2.0 * np.log(np.abs(gk) + _TINY) for k, gk in ghat.items()}
    log_terms = []
    for order in range(order_cap + 1):
        acc = -np.inf
        for m in range(order + 1):
            n = order - m
            for k in ghat:
                if k == 0 and m > 0:
                    continue
                base = log_gsq[k] + (0.0 if m == 0 else 2.0 * m * np.log(abs(k)))
                li = base if n == 0 else base + n * log_eta2
                li = li[np.isfinite(li)]
                if li.size == 0:
                    continue
                mx = float(li.max())
                acc = np.logaddexp(acc, mx + np.log(np.sum(np.exp(li - mx))))
        log_terms.append((order / r) * np.log(12.0 * lam)
                         - (2.0 / r) * gammaln(order + 1) + acc)
    log_terms = np.array(log_terms)
    ratios = np.exp(np.diff(log_terms[-6:]))
    if np.any(ratios >= 0.95):
        raise RuntimeError(
            f"derivative sum not geometric by order {order_cap} "
            f"(tail ratio {ratios.max():.3f}); raise order_cap or soften the corpus")
    smax = float(log_terms.max())
    rhs = float(np.exp(smax) * np.sum(np.exp(log_terms - smax)))
    tail_allowance = float(ratios[-1] / (1.0 - ratios[-1]))
    violation = max(0.0, lhs - rhs * (1.0 + tail_allowance)) / max(rhs, _TINY)

    # index transfer, exact: 34 r~ / (19 (2 + r~)) at r~ = 4/5 exceeds 0.51
    rt = Fraction(34) * Fraction(4, 5) / (Fraction(19) * (2 + Fraction(4, 5)))
    if rt != Fraction(68, 133) or not rt > Fraction(51, 100):
        violation = max(violation, 1.0)

    margin = (np.log10(rhs) - np.log10(max(lhs, _TINY)))
    return _report("gevrey_embedding", violation,
                   f"lam={lam}, r={r}, modes {sorted(ghat)}, order<= {order_cap}, "
                   f"log10 margin {margin:.1f}, tail ratio {float(ratios[-1]):.3f}; "
                   f"index transfer 68/133 > 51/100 exact", 0.0)


# ---------------------------------------------------------------------------
# sup-norm interpolation through the ladder
# ---------------------------------------------------------------------------

def check_sobolev_gamma(f_k=None, coord: CoordState | None = None,
                        k: int = 2, seed: int = 0,
                        n_samples: int = 40) -> IdentityReport:
    """Measure ||f||_inf / (||f|| ||Gf||)^{1/2} with G = d/dy + i k t v_y.

    The phase-adapted gradient here carries v_y on the oscillatory term,
    so the kernel is exactly c e^{-i k t v}; such fields are flagged and
    skipped instead of dividing by zero.  The empirical constant is
    reported and only loosely asserted (<= 100).
    """
    if coord is None:
        grid = make_grid(8, REFERENCE_NY)
        coord = identity_coord_state(grid, 2.0)
    grid = coord.grid
    ops = diff_ops(grid)
    cc = grid.cc_weights
    y = grid.y_nodes
    kt = k * coord.t

    def ratio(col: np.ndarray) -> tuple[float, bool]:
        gcol = ops.D1 @ col + 1j * kt * coord.v_y * col
        l2f = float(np.sqrt(np.real(np.abs(col) ** 2) @ cc))
        l2g = float(np.sqrt(np.real(np.abs(gcol) ** 2) @ cc))
        if l2g <= 1e-12 * max(l2f, _TINY) * max(abs(kt), 1.0):
            return 0.0, True
        return float(np.max(np.abs(col))) / np.sqrt(l2f * l2g), False

    degenerate = 0
    if f_k is not None:
        r, dgn = ratio(np.asarray(f_k, dtype=complex))
        sample = "single field" + (", degenerate kernel flagged" if dgn else "")
        return _report("sobolev_interpolation", r, sample, 100.0)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        co = (rng.standard_normal(24) + 1j * rng.standard_normal(24))
        co *= np.exp(-0.15 * np.arange(24))
        col = np.polynomial.chebyshev.chebval(y, co) * (1.0 - y ** 2)
        r, dgn = ratio(col)
        degenerate += dgn
        worst = max(worst, r)
    dg_col = np.exp(-1j * kt * coord.v)
    _, dgn = ratio(dg_col)
    degenerate += dgn
    sample = (f"corpus of {n_samples} band-limited fields, seed={seed}, k={k}, "
              f"t={coord.t}; {degenerate} degenerate kernel field(s) flagged")
    return _report("sobolev_interpolation", worst, sample, 100.0)


# ---------------------------------------------------------------------------
# the suite
# ---------------------------------------------------------------------------

def _plateau_commutator_residual(grid: Grid, params: WeightParams) -> float:
    """[d/dy, q] f on the flat region of the production cutoff.

    q is identically one there, so with any local finite-difference
    stencil contained in the plateau the commutator vanishes bitwise; a
    global spectral derivative cannot be used because the production
    cutoff's transition band is narrower than the node spacing resolves.
    """
    y = grid.y_nodes
    q = CutoffFamily(params).q(y)
    mid = q[np.argmin(np.abs(y))]
    flat = np.abs(q - mid) < 1e-13
    f = np.exp(-2.0 * y ** 2) * (1.0 + 0.3 * np.sin(3.0 * y))
    # second-order interior stencil on the nonuniform nodes
    worst = 0.0
    idx = np.nonzero(flat)[0]
    for i in idx[2:-2]:
        if not (flat[i - 1] and flat[i + 1]):
            continue
        hm, hp = y[i] - y[i - 1], y[i + 1] - y[i]
        wl, wc, wr = -hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))
        d_qf = wl * (q[i - 1] * f[i - 1]) + wc * (q[i] * f[i]) + wr * (q[i + 1] * f[i + 1])
        d_f = wl * f[i - 1] + wc * f[i] + wr * f[i + 1]
        worst = max(worst, abs(d_qf - q[i] * d_f))
    return worst / max(float(np.max(np.abs(f))), _TINY)


def run_identity_suite(seed: int = 0, n_max: int = 6,
                       grid: Grid | None = None) -> list[IdentityReport]:
    """Run every identity check over the fixed-seed corpus."""
    rng = np.random.default_rng(seed)
    if grid is None:
        grid = make_grid(REFERENCE_NX, REFERENCE_NY)
    t = 2.0

    frames = [PolyFrame.cubic_default(), PolyFrame.random(rng, degree=4)]
    fields = [PolyColumn.random(rng, degree=10), TiltedWave.random(rng, degree=6)]

    # exact-path commutators: worst residual over the corpus, per identity
    worst = {name: (0.0, "") for name in _COMMUTATOR_NAMES}
    for frame in frames:
        for field in fields:
            for rep in check_commutators(field, (frame, t), n_max=n_max, k=3):
                if rep.residual >= worst[rep.name][0]:
                    worst[rep.name] = (rep.residual, rep.sample)
    reports = [_report(name, res, f"{smp}; corpus seed={seed}", EQUALITY_TOL)
               for name, (res, smp) in worst.items()]

    # flat-frame degeneration: with v_y = 1 the correction sums carry
    # h = v_y - 1 = 0, so both sides of the ladder commutators vanish
    flat = PolyFrame.identity()
    r_flat = max(rep.residual
                 for field in fields
                 for rep in check_commutators(field, (flat, t), n_max=n_max, k=3)
                 if rep.name in ("dy_gamma_power", "dyy_gamma_power"))
    reports.append(_report("commutator_flat_frame", r_flat,
                           "v_y = 1: ladder commutators vanish identically",
                           EQUALITY_TOL))
    y = grid.y_nodes
    bump = (np.exp(-4.0 * y ** 2) * (1.0 - y ** 2)).astype(complex)

    # grid path on a curved analytic frame, shallow ladders
    vv = y + (0.05 / np.pi) * np.sin(np.pi * y)
    vy = 1.0 + 0.05 * np.cos(np.pi * y)
    z = np.zeros_like(y)
    curved = CoordState(grid=grid, t=t, v=vv, v_y=vy, H=vy - 1.0,
                        Hbar=z.copy(), G=z.copy(), D_aux=z.copy())
    grid_reports = check_commutators(bump, curved, n_max=2, k=3)
    r_grid = max(r.residual for r in grid_reports)
    t_grid = max(r.tol for r in grid_reports)
    reports.append(_report("commutator_grid", r_grid,
                           "filtered collocation path, analytic frame, n<=2; "
                           "condition-scaled tolerance", t_grid))

    params = WeightParams(eps=0.01, nu=1e-3)
    reports.append(_report("commutator_cutoff_plateau",
                           _plateau_commutator_residual(grid, params),
                           "production cutoff, flat region, local stencil", 1e-12))

    # quasiproduct: exact ladder (curved + flat) and production pointwise
    def mode_corpus(local_rng: np.random.Generator) -> tuple[dict, dict]:
        wall = np.array([1.0, 0.0, -1.0])
        def draw(kset):
            return {kk: pol.polymul(wall,
                                    np.round(local_rng.integers(-512, 513, size=4)
                                             / 512.0 * 4096.0) / 4096.0)
                    for kk in kset}
        return draw({1, 2}), draw({-1, 0, 2})

    phi_m, om_m = mode_corpus(rng)
    reports.append(check_quasiproduct(phi_m, om_m, (frames[0], t)))
    reports.append(check_quasiproduct(phi_m, om_m, (PolyFrame.identity(), t)))

    X, Y = np.meshgrid(grid.x_nodes, grid.y_nodes, indexing="ij")
    phi_f = to_spectral(0.01 * np.cos(X) * (1 - Y ** 2) ** 2 * np.sin(np.pi * Y), grid)
    om_f = to_spectral(0.01 * (np.sin(X) + 0.5 * np.cos(2 * X))
                       * (1 - Y ** 2) * np.cos(2.0 * Y), grid)
    reports.append(check_quasiproduct(phi_f, om_f, curved))

    # chain rule: exact path on a degree-7 frame plus the grid path
    frame7 = PolyFrame.random(rng, degree=6, amplitude=0.12)
    reports.append(check_faa_di_bruno(fields[0], (frame7, t), j_max=5))
    reports.append(check_faa_di_bruno(bump, curved, j_max=3))

    reports.append(check_combinatorial(n_max=15))
    reports.append(check_gevrey_embedding(lam=0.1, r=0.51))
    reports.append(check_gevrey_embedding(lam=0.001, r=0.8))
    modes = ((1.0, 3.0 * np.pi), (2.0, 0.0), (0.0, 5.0 * np.pi), (4.0, 4.0 * np.pi))
    reports.append(_report(
        "gevrey_single_mode",
        max(_gevrey_single_mode_violation(modes, 0.2, 0.8),
            _gevrey_single_mode_violation(modes, 0.05, 0.51)),
        "scalar series on fixed modes, lam in {0.2, 0.05}, r in {0.8, 0.51}",
        1e-12))
    reports.append(check_sobolev_gamma(coord=curved, k=2, seed=seed))
    return reports
