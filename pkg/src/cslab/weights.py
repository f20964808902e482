"""Weights, Gevrey coefficient ladders, cutoffs, and Fourier multipliers.

Everything here is closed-form: the spatial localization weight W, the
wall profile q, the Gevrey shell coefficients B/a/theta, the family of
nested cutoffs built from a canonical Gevrey mollifier, and the
dispersive multiplier M.  The diagnostic functionals consume these;
nothing in this module touches field data.

Coefficients are evaluated in log space (log-gamma) so that shells up to
m+n = 200 neither overflow nor flush to zero; the direct evaluators
return extended precision for that reason.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import zeta


@dataclass(frozen=True)
class WeightParams:
    """Constants shared by all weights; validated on construction.

    K, L set the localization weight W; lambda0, r the interior Gevrey
    scale; s, sigma, c_sigma the exterior ladder and cutoff geometry;
    delta_I the enhanced-dissipation rate in the interior multiplier;
    kappa the dispersive-multiplier exponent; n_star, delta_drop the
    low-shell emphasis sequence theta.
    """

    eps: float
    nu: float
    K: float = 100.0
    L: float = 10.0
    lambda0: float = 0.1
    r: float = 0.51
    s: float = 1.2
    sigma: float = 0.1
    c_sigma: float = 0.01
    delta_I: float = 0.1
    kappa: float = 1.0
    n_star: int = 4
    delta_drop: float = 0.5

    def __post_init__(self):
        if self.eps < 0.0:
            raise ValueError("eps must be nonnegative")
        if self.nu < 0.0:
            raise ValueError("nu must be nonnegative")
        if self.K <= 0.0 or self.L <= 0.0 or self.lambda0 <= 0.0:
            raise ValueError("K, L, lambda0 must be positive")
        if not 0.5 < self.r <= 0.51:
            raise ValueError("interior index r must lie in (1/2, 51/100]")
        if not 1.0 < self.s < 1.25:
            raise ValueError("exterior index s must satisfy 4/5 < 1/s < 1")
        if not 0.0 < self.sigma < self.s - 1.0:
            raise ValueError("sigma must lie in (0, s-1)")
        if self.c_sigma <= 0.0 or self.c_sigma * zeta(1.0 + self.sigma) >= 0.125:
            raise ValueError("c_sigma must be positive with c_sigma * zeta(1+sigma) < 1/8")
        if self.delta_I <= 0.0 or self.kappa <= 0.0:
            raise ValueError("delta_I and kappa must be positive")
        if self.n_star < 0:
            raise ValueError("n_star must be nonnegative")
        if not 0.0 < self.delta_drop <= 1.0:
            raise ValueError("delta_drop must lie in (0, 1]")

    @property
    def sigma_star(self) -> float:
        return (self.s - 1.0) - self.sigma

    def lam(self, t: float) -> float:
        """Shrinking Gevrey radius lambda0 * (1 + (1+t)^(-1/100))."""
        return self.lambda0 * (1.0 + (1.0 + t) ** (-0.01))

    def lam_hat(self, t: float) -> float:
        return 2.0 * self.lam(t)

    def lam_dot(self, t: float) -> float:
        """Closed-form d/dt of lam; always negative."""
        return -0.01 * self.lambda0 * (1.0 + t) ** (-1.01)

    def phi(self, t: float) -> float:
        return (1.0 + t * t) ** (-0.5)

    def phi_dot(self, t: float) -> float:
        """Closed-form d/dt of phi; negative for t > 0."""
        return -t * (1.0 + t * t) ** (-1.5)


# ---------------------------------------------------------------------------
# localization weight W


def W_eval(t, y, params: WeightParams):
    """W(t, y) = (|y| - 1/4 - L eps arctan t)_+^2 / (K nu (1+t))."""
    if params.nu <= 0.0:
        raise ValueError("W is defined for nu > 0")
    y = np.asarray(y, dtype=float)
    p = np.maximum(np.abs(y) - 0.25 - params.L * params.eps * np.arctan(t), 0.0)
    return p * p / (params.K * params.nu * (1.0 + t))


def dW_dy(t, y, params: WeightParams):
    if params.nu <= 0.0:
        raise ValueError("W is defined for nu > 0")
    y = np.asarray(y, dtype=float)
    p = np.maximum(np.abs(y) - 0.25 - params.L * params.eps * np.arctan(t), 0.0)
    return 2.0 * p * np.sign(y) / (params.K * params.nu * (1.0 + t))


def dW_dt(t, y, params: WeightParams):
    if params.nu <= 0.0:
        raise ValueError("W is defined for nu > 0")
    y = np.asarray(y, dtype=float)
    denom = params.K * params.nu * (1.0 + t)
    p = np.maximum(np.abs(y) - 0.25 - params.L * params.eps * np.arctan(t), 0.0)
    shrink = -2.0 * p * params.L * params.eps / ((1.0 + t * t) * denom)
    return shrink - p * p / (denom * (1.0 + t))


def W_dissipativity_check(params: WeightParams, t_sample, y_sample) -> float:
    """Max over the sample of d_t W + (K nu / 8) |d_y W|^2 (should be <= 0)."""
    worst = -np.inf
    for t in np.atleast_1d(t_sample):
        val = dW_dt(t, y_sample, params) + 0.125 * params.K * params.nu * dW_dy(t, y_sample, params) ** 2
        worst = max(worst, float(np.max(val)))
    return worst


# ---------------------------------------------------------------------------
# Gevrey coefficient ladders (log-gamma arithmetic)


def log_gevrey_B(m: int, n: int, t: float, params: WeightParams) -> float:
    """log of B_{m,n}(t) = (lambda(t)^(m+n) / (m+n)!)^s."""
    N = m + n
    return params.s * (N * math.log(params.lam(t)) - math.lgamma(N + 1))


def log_gevrey_B_hat(m: int, n: int, t: float, params: WeightParams) -> float:
    N = m + n
    return params.s * (N * math.log(params.lam_hat(t)) - math.lgamma(N + 1))


def log_gevrey_B_low(m: int, n: int) -> float:
    """log of the crude low ladder (2^-(m+n) / (m+n)!)^4."""
    N = m + n
    return 4.0 * (-N * math.log(2.0) - math.lgamma(N + 1))


def log_a_mn(m: int, n: int, t: float, params: WeightParams) -> float:
    """log of a_{m,n}(t) = B_{m,n}(t) phi(t)^(1+n)."""
    return log_gevrey_B(m, n, t, params) + (1 + n) * math.log(params.phi(t))


def log_a_hat_mn(m: int, n: int, t: float, params: WeightParams) -> float:
    return log_gevrey_B_hat(m, n, t, params) + (1 + n) * math.log(params.phi(t))


def _exp_ld(x: float) -> np.longdouble:
    # 80-bit extended range keeps shells up to m+n = 200 away from 0/inf
    return np.exp(np.longdouble(x))


def gevrey_B(m: int, n: int, t: float, params: WeightParams) -> np.longdouble:
    return _exp_ld(log_gevrey_B(m, n, t, params))

def gevrey_B_hat(m: int, n: int, t: float, params: WeightParams) -> np.longdouble:
    return _exp_ld(log_gevrey_B_hat(m, n, t, params))

def gevrey_B_low(m: int, n: int) -> np.longdouble:
    return _exp_ld(log_gevrey_B_low(m, n))

def a_mn(m: int, n: int, t: float, params: WeightParams) -> np.longdouble:
    return _exp_ld(log_a_mn(m, n, t, params))

def a_hat_mn(m: int, n: int, t: float, params: WeightParams) -> np.longdouble:
    return _exp_ld(log_a_hat_mn(m, n, t, params))


def a_mn_logderiv(m: int, n: int, t: float, params: WeightParams) -> float:
    """d/dt log a_{m,n}(t) = s (m+n) lam'/lam + (1+n) phi'/phi, in closed form.

    Negative for t > 0 (both the radius and phi shrink), so -a a' > 0 in
    the CK functionals that spend the coefficient decay.
    """
    N = m + n
    return (
        params.s * N * params.lam_dot(t) / params.lam(t)
        + (1 + n) * params.phi_dot(t) / params.phi(t)
    )


def theta(n: int, params: WeightParams) -> float:
    """Low-shell emphasis: delta_drop^(n - n_star) below n_star, else 1."""
    if n >= params.n_star:
        return 1.0
    return params.delta_drop ** (n - params.n_star)


# ---------------------------------------------------------------------------
# dispersive multiplier M and the simplified interior multiplier


def multiplier_M(t: float, k: int, eta, params: WeightParams):
    """M(t,k,eta) = exp(int_0^t nu^(1/3) / (1 + (nu^(1/3)|eta - k tau|)^(1+kappa)) dtau).

    kappa = 1 has an arctan antiderivative; other kappa fall back to
    adaptive quadrature.  k = 0 returns 1 identically.
    """
    if params.nu <= 0.0:
        raise ValueError("M is defined for nu > 0")
    eta = np.asarray(eta, dtype=float)
    if k == 0 or t == 0.0:
        return np.ones_like(eta)
    nu3 = params.nu ** (1.0 / 3.0)
    if params.kappa == 1.0:
        integral = (np.arctan(nu3 * eta) - np.arctan(nu3 * (eta - k * t))) / k
        return np.exp(integral)
    out = np.empty_like(eta)
    for idx, e in np.ndenumerate(eta):
        val, err = quad(
            lambda tau: nu3 / (1.0 + (nu3 * abs(e - k * tau)) ** (1.0 + params.kappa)),
            0.0, t, epsabs=1e-12, epsrel=1e-12, limit=200,
        )
        if err > 1e-10 * max(1.0, abs(val)):
            raise RuntimeError(f"multiplier quadrature did not converge (err={err:.2e})")
        out[idx] = math.exp(val)
    return out


def multiplier_frakA_simplified(t: float, k: int, eta, params: WeightParams):
    """(A / M) with A = e^{lambda(t)(k^2+eta^2)^(r/2)}, times the
    enhanced-dissipation credit e^{delta_I nu^(1/3) t} off the zero mode."""
    eta = np.asarray(eta, dtype=float)
    A = np.exp(params.lam(t) * (k * k + eta * eta) ** (0.5 * params.r))
    out = A / multiplier_M(t, k, eta, params)
    if k != 0:
        out = out * math.exp(params.delta_I * params.nu ** (1.0 / 3.0) * t)
    return out


# ---------------------------------------------------------------------------
# mollifier and cutoffs


def _mollifier_step(z, s: float):
    """Canonical Gevrey step S: 0 for z <= 0, 1 for z >= 1, smooth between."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    lo = z <= 0.0
    hi = z >= 1.0
    mid = ~(lo | hi)
    out[lo] = 0.0
    out[hi] = 1.0
    if np.any(mid):
        p = 1.0 / (s - 1.0)
        with np.errstate(over="ignore", under="ignore"):
            a = np.exp(-z[mid] ** (-p))
            b = np.exp(-((1.0 - z[mid]) ** (-p)))
            out[mid] = a / (a + b)
    return out


class CutoffFamily:
    """The nested exterior cutoffs chi_n, the interior pair chi^I and its
    envelope, the coordinate-region pair chi~1 / 1 - chi~1, and the wall
    profile q.

    chi_n vanishes inside |z| <= x_n and equals 1 outside |z| >= y_n with
    x_1 = 3/8, x_{n+1} = x_n + c_sigma / n^(1+sigma),
    y_n = x_n + c_sigma / (100 n^(1+sigma)); chi_0 is identically 1.
    """

    # q profile geometry: flat 1 up to |y| = 99/100, pure 99(1-|y|) beyond
    # the blend window; the window sits inside {99(1-|y|) < 1} so the blend
    # stays monotone in [0, 1].
    _Q_FLAT = 0.99
    _Q_LINEAR = 0.99625

    def __init__(self, params: WeightParams):
        self.params = params

    @lru_cache(maxsize=None)
    def x_seq(self, n: int) -> float:
        if n < 1:
            raise ValueError("x_seq is defined for n >= 1")
        if n == 1:
            return 0.375
        return self.x_seq(n - 1) + self.params.c_sigma / float(n - 1) ** (1.0 + self.params.sigma)

    def y_seq(self, n: int) -> float:
        return self.x_seq(n) + self.params.c_sigma / (100.0 * float(n) ** (1.0 + self.params.sigma))

    @property
    def x_limit(self) -> float:
        """Upper bound on lim x_n; below 1/2 by the c_sigma constraint."""
        return 0.375 + self.params.c_sigma * float(zeta(1.0 + self.params.sigma))

    def _step(self, z):
        return _mollifier_step(z, self.params.s)

    def chi_n(self, n: int, z):
        z = np.asarray(z, dtype=float)
        if n == 0:
            return np.ones_like(z)
        xn = self.x_seq(n)
        wn = self.y_seq(n) - xn
        return self._step((np.abs(z) - xn) / wn)

    def chi_I(self, z):
        """1 on (-3/4, 3/4), 0 outside |z| >= 31/40."""
        return 1.0 - self._step((np.abs(np.asarray(z, dtype=float)) - 0.75) / (31.0 / 40.0 - 0.75))

    def chi_I_smooth(self, z):
        """Same plateau and support as chi_I, transition spread over the band.

        The canonical step concentrates its variation in a sliver much
        narrower than typical grid spacings, which is fine for quadrature
        weights but poison for anything that differentiates or Fourier
        transforms the cut field.  This realization (the classic
        e^{-1/x} blend, p = 1) uses the whole (3/4, 31/40) band, so grids
        that resolve the band resolve the cutoff.
        """
        return 1.0 - _mollifier_step(
            (np.abs(np.asarray(z, dtype=float)) - 0.75) / (31.0 / 40.0 - 0.75), 2.0
        )

    def chi_I_e(self, z):
        """Envelope: 1 on |z| <= 31/40, 0 outside |z| >= 33/40."""
        return 1.0 - self._step((np.abs(np.asarray(z, dtype=float)) - 31.0 / 40.0) / (33.0 / 40.0 - 31.0 / 40.0))

    def chi_tilde1(self, z):
        """1 for |z| >= 3/8 - 1/80, 0 for |z| <= 3/8 - 1/40."""
        lo = 0.375 - 0.025
        hi = 0.375 - 0.0125
        return self._step((np.abs(np.asarray(z, dtype=float)) - lo) / (hi - lo))

    def chi_tilde1_c(self, z):
        return 1.0 - self.chi_tilde1(z)

    def q(self, y):
        """Wall profile: 1 in the bulk, 99 * (distance to wall) at the walls,
        mollifier blend between."""
        y = np.asarray(y, dtype=float)
        ay = np.abs(y)
        lin = 99.0 * (1.0 - ay)
        blend = self._step((ay - self._Q_FLAT) / (self._Q_LINEAR - self._Q_FLAT))
        return (1.0 - blend) * 1.0 + blend * lin
