"""Monotone transport from the standard Gaussian to a one-dimensional law.

For a law nu with quantile function Q, T = Q o Phi pushes N(0,1) onto nu and
is the optimal map for quadratic cost, so W_2^2 = E|Z - T(Z)|^2.
"""

import math
from dataclasses import dataclass
from itertools import product

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy import special

from .gaussian import INV_SQRT_2PI

_GH_NODES = 200


@dataclass(frozen=True, eq=False)
class DiscreteLaw:
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if a.ndim != 1 or a.shape != w.shape or a.size == 0:
            raise ValueError("atoms and weights must be matching non-empty vectors")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(w))) or np.any(w < 0):
            raise ValueError("atoms must be finite and weights nonnegative")
        order = np.argsort(a, kind="stable")
        a, w = a[order], w[order]
        # merge ties so the quantile steps are well defined
        uniq, inv = np.unique(a, return_inverse=True)
        merged = np.bincount(inv, weights=w)
        keep = merged > 0
        object.__setattr__(self, "atoms", uniq[keep])
        object.__setattr__(self, "weights", merged[keep] / merged.sum())

    @classmethod
    def from_samples(cls, samples):
        s = np.asarray(samples, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("need a non-empty 1-D sample")
        if np.any(np.isnan(s)):
            raise ValueError("samples contain NaN")
        if np.any(np.diff(s) < 0):
            raise ValueError("samples must be sorted")
        return cls(s, np.full(s.size, 1.0 / s.size))

    def moment(self, k):
        return float(np.sum(self.weights * self.atoms**k))

    def quantile(self, u):
        """Left-continuous quantile inf{a : F(a) >= u}."""
        cum = np.cumsum(self.weights)
        idx = np.searchsorted(cum, np.asarray(u, dtype=float) - 1e-15, side="left")
        return self.atoms[np.clip(idx, 0, self.atoms.size - 1)]


@dataclass(frozen=True, eq=False)
class TransportMap:
    """T = Q o Phi; ``w2_squared`` is E|Z - T(Z)|^2 for Z ~ N(0,1)."""

    quantile: object
    w2_squared: float

    def __call__(self, z):
        return self.quantile(special.ndtr(np.asarray(z, dtype=float)))

    @property
    def w2(self):
        return math.sqrt(max(self.w2_squared, 0.0))


def _w2sq_discrete(law):
    # exact: sum over quantile steps of int_{b_{k-1}}^{b_k} (z - a_k)^2 phi(z) dz
    cum = np.concatenate([[0.0], np.cumsum(law.weights)])
    cum[-1] = 1.0
    b = special.ndtri(np.clip(cum, 0.0, 1.0))
    lo, hi = b[:-1], b[1:]
    # z phi(z) and phi(z) vanish at the infinite endpoints
    lo_f = np.where(np.isfinite(lo), lo, 0.0)
    hi_f = np.where(np.isfinite(hi), hi, 0.0)
    pdf_lo = np.where(np.isfinite(lo), INV_SQRT_2PI * np.exp(-0.5 * lo_f**2), 0.0)
    pdf_hi = np.where(np.isfinite(hi), INV_SQRT_2PI * np.exp(-0.5 * hi_f**2), 0.0)
    m0 = special.ndtr(hi) - special.ndtr(lo)
    m1 = pdf_lo - pdf_hi
    m2 = m0 + lo_f * pdf_lo - hi_f * pdf_hi
    a = law.atoms
    return float(np.sum(m2 - 2.0 * a * m1 + a * a * m0))


def _w2sq_quadrature(quantile):
    z, w = hermegauss(_GH_NODES)
    w = w / math.sqrt(2.0 * math.pi)
    with np.errstate(all="ignore"):
        t = np.asarray(quantile(special.ndtr(z)), dtype=float)
    ok = np.isfinite(t)
    return float(np.sum(w[ok] * (z[ok] - t[ok]) ** 2)), z[ok], t[ok]


def quantile_transport(nu):
    """Monotone map and squared W_2 distance from N(0,1) to ``nu``.

    ``nu`` is a sorted sample, a DiscreteLaw (exact piecewise integration) or
    a quantile function u -> Q(u) (Gauss-Hermite quadrature, nodes where Q is
    not finite are dropped).
    """
    if isinstance(nu, DiscreteLaw):
        law = nu
    elif callable(nu):
        w2sq, _, t = _w2sq_quadrature(nu)
        if np.any(np.diff(t) < -1e-12):
            raise ValueError("quantile function is not nondecreasing")
        return TransportMap(nu, w2sq)
    else:
        law = DiscreteLaw.from_samples(nu)
    return TransportMap(law.quantile, _w2sq_discrete(law))


def is_monotone(tmap, grid=None):
    z = np.linspace(-8, 8, 2001) if grid is None else np.asarray(grid)
    return bool(np.all(np.diff(tmap(z)) >= 0))


def corner_projection_law(x, theta):
    """Law of sum_i theta_i Y_i, Y_i the standardized corner given X_i = x_i.

    Y_i = (eps_i - x_i)/sqrt(1 - x_i^2) with eps_i = +1 w.p. (1 + x_i)/2;
    enumerated exactly over the 2^n corners.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(x) >= 1):
        raise ValueError("coordinates must be interior")
    n = x.size
    sd = np.sqrt(1.0 - x * x)
    eps = np.array(list(product((-1.0, 1.0), repeat=n)))
    y = (eps - x) / sd
    p = np.prod(np.where(eps > 0, 0.5 * (1 + x), 0.5 * (1 - x)), axis=1)
    return DiscreteLaw(y @ theta, p)


def lyapunov_l4(x, theta):
    """sum_i theta_i^4 E[Y_i^4] with E[Y_i^4] = (1 + 3x_i^2)/(1 - x_i^2)."""
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return float(np.sum(theta**4 * (1 + 3 * x * x) / (1 - x * x)))


def rio_ratio(x, theta):
    """W_2^2(gamma, law of theta.Y) / L_4 for a unit vector theta."""
    theta = np.asarray(theta, dtype=float)
    theta = theta / np.linalg.norm(theta)
    w2sq = quantile_transport(corner_projection_law(x, theta)).w2_squared
    return w2sq / lyapunov_l4(x, theta), w2sq
