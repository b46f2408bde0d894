"""Scalar Gaussian special functions.

Phi is the lower-tail CDF throughout.  ``gaussian_stability`` is the
probability that two rho-correlated standard Gaussians both fall below the
a-quantile.
"""

import math
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy import integrate, special

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def std_normal_cdf(x):
    return special.ndtr(x)


def std_normal_pdf(x):
    return INV_SQRT_2PI * np.exp(-0.5 * np.asarray(x, dtype=float) ** 2)


def std_normal_quantile(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0)) or np.any(np.isnan(p)):
        raise ValueError("quantile needs p strictly inside (0,1)")
    out = special.ndtri(p)
    return float(out) if out.ndim == 0 else out


def isoperimetric_profile(s):
    """I(s) = phi(Phi^{-1}(s)), with I(0) = I(1) = 0."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 0.0) | (s > 1.0)):
        raise ValueError("isoperimetric profile is defined on [0,1]")
    inner = (s > 0.0) & (s < 1.0)
    z = special.ndtri(np.where(inner, s, 0.5))
    out = np.where(inner, INV_SQRT_2PI * np.exp(-0.5 * z * z), 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GaussianStabilityQuery:
    rho: float
    a: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0,1], got {self.rho}")
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"a must lie strictly inside (0,1), got {self.a}")


# below this, 1 - rho is treated as zero; the quadrature is accurate right up to it
_RHO_ONE = 1e-14


def gaussian_stability(q, *, epsabs=1e-13):
    """Lambda_rho(a) by adaptive Gauss-Kronrod quadrature of

        int_{-inf}^{c} Phi((c - rho z) / sqrt(1 - rho^2)) phi(z) dz,   c = Phi^{-1}(a).
    """
    if not isinstance(q, GaussianStabilityQuery):
        q = GaussianStabilityQuery(*q)
    rho, a = float(q.rho), float(q.a)
    if 1.0 - rho < _RHO_ONE:
        return a
    if rho == 0.0:
        return a * a
    c = float(special.ndtri(a))
    s = math.sqrt((1.0 - rho) * (1.0 + rho))

    def integrand(z):
        return special.ndtr((c - rho * z) / s) * INV_SQRT_2PI * math.exp(-0.5 * z * z)

    lo = min(c, 0.0) - 9.0  # phi and Phi below this are < 1e-18
    # the first factor steps from 1 to 0 across a layer of width ~s/rho at c/rho
    brk = c / rho
    w = s / rho
    cand = [brk - 10 * w, brk - w, brk, brk + w, brk + 10 * w, c - 10 * w, c - w]
    points = sorted({p for p in cand if lo < p < c}) or None
    val, _ = integrate.quad(integrand, lo, c, points=points, epsabs=epsabs, epsrel=1e-13, limit=500)
    return float(val)


def sheppard_formula(rho):
    """1/4 + arcsin(rho) / (2 pi)."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0,1], got {rho}")
    return 0.25 + math.asin(rho) / (2.0 * math.pi)


def lambda_lipschitz_bound(rho, rho_prime):
    return (rho_prime - rho) / (1.0 - rho_prime)


def lambda_lipschitz_slack(rho, rho_prime, a):
    """(rho' - rho)/(1 - rho') - |Lambda_rho'(a) - Lambda_rho(a)|."""
    if not (0.0 <= rho < rho_prime <= 1.0 - 1e-6):
        raise ValueError("need 0 <= rho < rho' <= 1 - 1e-6")
    diff = abs(
        gaussian_stability(GaussianStabilityQuery(rho_prime, a))
        - gaussian_stability(GaussianStabilityQuery(rho, a))
    )
    return lambda_lipschitz_bound(rho, rho_prime) - diff


# ------------------------------------------------------------ compiled helpers
# Acklam's rational approximation refined by one Halley step on erfc; used
# inside the simulation kernels where scipy is not callable.

_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)


@nb.njit(nogil=True, cache=True)
def ndtri_nb(p):
    if p <= 0.0:
        return -np.inf
    if p >= 1.0:
        return np.inf
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    elif p > 1.0 - plow:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    else:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    # Halley refinement; use the upper tail above the median to keep precision
    if x <= 0.0:
        e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    else:
        e = (1.0 - p) - 0.5 * math.erfc(x / math.sqrt(2.0))
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@nb.njit(nogil=True, cache=True)
def iso_profile_nb(s):
    if s <= 0.0 or s >= 1.0:
        return 0.0
    z = ndtri_nb(s)
    return INV_SQRT_2PI * math.exp(-0.5 * z * z)
