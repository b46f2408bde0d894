"""Fourier analysis of functions on the hypercube {-1,1}^n.

Index convention: bit ``b`` of a table index is coordinate ``b+1``; a set bit
means the coordinate is +1, a clear bit means -1.  Spectra use the same bit
layout, with mask ``A`` standing for the character chi_A(x) = prod_{i in A} x_i.
Coordinates are 1-based in the public API (``influence(f, 1)`` is the first
coordinate) to match the usual x_1..x_n naming.
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

MAX_DIM = 24


class DimensionError(ValueError):
    pass


def _check_dim(n):
    if not 1 <= n <= MAX_DIM:
        raise DimensionError(f"dimension must lie in [1, {MAX_DIM}], got {n}")


def popcount(n):
    """|A| for every mask A < 2**n."""
    idx = np.arange(1 << n)
    w = np.zeros(1 << n, dtype=np.int64)
    for b in range(n):
        w += (idx >> b) & 1
    return w


def corners(n):
    """All points of {-1,1}^n in table order, shape (2**n, n)."""
    idx = np.arange(1 << n)[:, None]
    return np.where((idx >> np.arange(n)) & 1, 1.0, -1.0)


@dataclass(frozen=True, eq=False)
class BooleanFunction:
    """Truth table of f: {-1,1}^n -> [0,1]."""

    n: int
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_dim(self.n)
        t = np.array(self.table, dtype=float)
        if t.shape != (1 << self.n,):
            raise ValueError(f"table must have length 2**{self.n}, got shape {t.shape}")
        if not np.all(np.isfinite(t)) or t.min() < 0.0 or t.max() > 1.0:
            raise ValueError("table entries must lie in [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def is_boolean(self):
        return bool(np.all((self.table == 0.0) | (self.table == 1.0)))

    @property
    def mean(self):
        return float(self.table.mean())

    @property
    def variance(self):
        return float(self.table.var())

    def __call__(self, x):
        """Evaluate at corner(s) given as +-1 arrays of shape (n,) or (m, n)."""
        x = np.asarray(x)
        idx = ((x > 0).astype(np.int64) << np.arange(self.n)).sum(axis=-1)
        return self.table[idx]


@dataclass(frozen=True, eq=False)
class FourierSpectrum:
    n: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_dim(self.n)
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (1 << self.n,):
            raise ValueError(f"spectrum must have length 2**{self.n}, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __getitem__(self, subset):
        """Coefficient of a subset given as an iterable of 1-based coordinates."""
        return float(self.coeffs[subset_mask(subset)])

    @property
    def degrees(self):
        return popcount(self.n)

    def level_weights(self):
        """Fourier weight sum_{|A|=k} fhat(A)^2 for k = 0..n."""
        return np.bincount(self.degrees, weights=self.coeffs**2, minlength=self.n + 1)


def subset_mask(subset):
    mask = 0
    for i in subset:
        mask |= 1 << (int(i) - 1)
    return mask


def _butterflies(v, n, forward):
    v = v.copy()
    for b in range(n):
        blocks = v.reshape(-1, 2, 1 << b)
        lo = blocks[:, 0, :].copy()
        hi = blocks[:, 1, :]
        if forward:
            blocks[:, 0, :] = (lo + hi) * 0.5
            blocks[:, 1, :] = (hi - lo) * 0.5
        else:
            blocks[:, 0, :] = lo - hi
            blocks[:, 1, :] = lo + hi
    return v


def wht_forward(f):
    """Fourier coefficients fhat(A) = 2^-n sum_x f(x) chi_A(x), in O(n 2^n)."""
    _check_dim(f.n)
    return FourierSpectrum(f.n, _butterflies(f.table, f.n, forward=True))


def wht_inverse(s):
    """Values of sum_A fhat(A) chi_A on the corners, as a raw array.

    Returns an array rather than a BooleanFunction because a general spectrum
    (a noisy or random multilinear polynomial) need not map into [0,1].
    """
    return _butterflies(s.coeffs, s.n, forward=False)


def to_function(s):
    t = wht_inverse(s)
    return BooleanFunction(s.n, np.clip(t, 0.0, 1.0))


def _check_point(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ValueError(f"points must have {n} coordinates, got shape {x.shape}")
    if np.any(np.abs(x) > 1.0) or not np.all(np.isfinite(x)):
        raise ValueError("multilinear extension is only defined on [-1,1]^n")
    return x


def _contract(coeffs, x):
    # coefficient array (..., 2^k), contract top coordinate first
    v = coeffs
    for i in range(x.shape[-1] - 1, -1, -1):
        half = v.shape[-1] // 2
        v = v[..., :half] + x[..., i : i + 1] * v[..., half:]
    return v[..., 0]


def evaluate_multilinear(s, x):
    """sum_A fhat(A) prod_{i in A} x_i for x in [-1,1]^n (single point or rows)."""
    x = _check_point(x, s.n)
    batch = x.reshape(-1, s.n)
    out = _contract(np.broadcast_to(s.coeffs, (len(batch), 1 << s.n)), batch)
    return float(out[0]) if x.ndim == 1 else out


def gradient_multilinear(s, x):
    """Partial derivatives of the multilinear extension, shape (n,) or (m, n)."""
    x = _check_point(x, s.n)
    batch = x.reshape(-1, s.n)
    idx = np.arange(1 << s.n)
    grad = np.empty_like(batch)
    for i in range(s.n):
        sel = idx[(idx >> i) & 1 == 1]
        sub = s.coeffs[sel]  # masks containing i, reindexed over the other n-1 bits
        others = np.delete(batch, i, axis=1)
        if s.n == 1:
            grad[:, i] = sub[0]
        else:
            grad[:, i] = _contract(np.broadcast_to(sub, (len(batch), len(sub))), others)
    return grad[0] if x.ndim == 1 else grad


def noise_operator(s, rho):
    """T_rho on spectra: fhat(A) -> rho^|A| fhat(A)."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0,1], got {rho}")
    return FourierSpectrum(s.n, s.coeffs * float(rho) ** s.degrees)


def stability(s, rho):
    """Stab_rho(f) = sum_A rho^|A| fhat(A)^2."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0,1], got {rho}")
    return float(np.sum(s.coeffs**2 * float(rho) ** s.degrees))


def _check_coord(n, i):
    if not 1 <= i <= n:
        raise IndexError(f"coordinate must lie in 1..{n}, got {i}")


def influence(f, i):
    """Average of |f(x) - f(x with bit i flipped)| over the uniform cube."""
    _check_coord(f.n, i)
    b = i - 1
    blocks = f.table.reshape(-1, 2, 1 << b)
    return float(np.abs(blocks[:, 1, :] - blocks[:, 0, :]).mean())


def influences(f):
    return np.array([influence(f, i) for i in range(1, f.n + 1)])


def max_influence(f):
    return float(influences(f).max())


def influence_l2(s, i):
    """sum_{A contains i} fhat(A)^2 = E[(d_i f)^2]; a quarter of ``influence`` for 0/1 f."""
    _check_coord(s.n, i)
    idx = np.arange(1 << s.n)
    return float(np.sum(s.coeffs[(idx >> (i - 1)) & 1 == 1] ** 2))


def influences_l2(s):
    return np.array([influence_l2(s, i) for i in range(1, s.n + 1)])


def biased_parseval_gap(s, x, f=None):
    """g(x) - g(x)^2 - sum_i (1 - x_i^2) (d_i g(x))^2 at interior x.

    Pass the BooleanFunction as ``f`` to have the 0/1 requirement enforced.
    """
    if f is not None and not f.is_boolean:
        raise ValueError("biased Parseval inequality needs a 0/1-valued function")
    x = _check_point(x, s.n)
    if np.any(np.abs(x) >= 1.0):
        raise ValueError("point must lie strictly inside the cube")
    g = evaluate_multilinear(s, x)
    grad = gradient_multilinear(s, x)
    return g - g**2 - np.sum((1.0 - x**2) * grad**2, axis=-1)


def neg_entropy(p):
    """h(p) = p ln p + (1-p) ln(1-p), with h(0) = h(1) = 0."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
        out = out + np.where(p < 1, (1 - p) * np.log(np.where(p < 1, 1 - p, 1.0)), 0.0)
    return out


def mutual_information(f, rho):
    """I(X; f(N_{X,rho})) in nats via E[h(T_rho f)] - h(E f)."""
    if not f.is_boolean:
        raise ValueError("mutual information is defined for 0/1-valued functions")
    s = noise_operator(wht_forward(f), rho)
    noisy = np.clip(wht_inverse(s), 0.0, 1.0)
    return float(np.mean(neg_entropy(noisy)) - neg_entropy(f.mean))


# ---------------------------------------------------------------- constructors


def _from_predicate(n, pred):
    _check_dim(n)
    return BooleanFunction(n, pred(corners(n)).astype(float))


def make_majority(n):
    if n % 2 == 0:
        raise ValueError("majority needs an odd number of inputs")
    _check_dim(n)
    # sum of coordinates is 2|plus| - n; avoids materializing the corners
    return BooleanFunction(n, (2 * popcount(n) - n >= 0).astype(float))


def make_dictator(n, i=1):
    _check_coord(n, i)
    return _from_predicate(n, lambda x: x[:, i - 1] > 0)


def make_parity(n, subset=None):
    """0/1 parity: 1 when prod_{i in A} x_i = +1.  Default A = [n]."""
    subset = range(1, n + 1) if subset is None else subset
    cols = [int(i) - 1 for i in subset]
    for c in cols:
        _check_coord(n, c + 1)
    return _from_predicate(n, lambda x: np.prod(x[:, cols], axis=1) > 0)


def make_tribes(w, s):
    """OR of ``s`` disjoint ANDs, each over ``w`` consecutive coordinates."""
    n = w * s
    return _from_predicate(n, lambda x: (x.reshape(-1, s, w) > 0).all(axis=2).any(axis=1))


def make_constant(n, c):
    return BooleanFunction(n, np.full(1 << n, float(c)))


def majority_max_influence(n):
    """Exact MaxInf(Maj_n): probability the other n-1 votes tie."""
    if n % 2 == 0:
        raise ValueError("majority needs an odd number of inputs")
    m = n - 1
    return comb(m, m // 2) / 2.0**m


def all_boolean_tables(n):
    """Every 0/1 truth table on n <= 4 bits, shape (2**(2**n), 2**n)."""
    if n > 4:
        raise DimensionError("exhaustive enumeration is limited to n <= 4")
    size = 1 << n
    codes = np.arange(1 << size, dtype=np.int64)[:, None]
    return ((codes >> np.arange(size)) & 1).astype(float)


def subsets(n, k):
    """Masks of all k-subsets of [n]."""
    return [subset_mask([i + 1 for i in c]) for c in combinations(range(n), k)]


# ------------------------------------------------------------------------ I/O


def save_table(f, path):
    with open(path, "w") as fh:
        fh.write(f"n={f.n}\n")
        for i, v in enumerate(f.table):
            fh.write(f"{i} {float(v)!r}\n")


def load_table(path):
    """Read the ``n=<k>`` + ``index value`` text format; errors carry line numbers."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip().startswith("n="):
        raise ValueError(f"{path}:1: expected header 'n=<k>'")
    try:
        n = int(lines[0].strip()[2:])
    except ValueError:
        raise ValueError(f"{path}:1: bad dimension in header {lines[0]!r}") from None
    _check_dim(n)
    table = np.full(1 << n, np.nan)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        try:
            idx, val = int(parts[0]), float(parts[1])
            if len(parts) != 2:
                raise ValueError
        except (ValueError, IndexError):
            raise ValueError(f"{path}:{lineno}: expected 'index value', got {line!r}") from None
        if not 0 <= idx < 1 << n:
            raise ValueError(f"{path}:{lineno}: index {idx} out of range for n={n}")
        table[idx] = val
    if np.isnan(table).any():
        missing = int(np.flatnonzero(np.isnan(table))[0])
        raise ValueError(f"{path}: missing entry for index {missing}")
    return BooleanFunction(n, table)


def write_spectrum_csv(s, path):
    with open(path, "w") as fh:
        fh.write("mask,coefficient\n")
        for mask, c in enumerate(s.coeffs):
            fh.write(f"{mask},{float(c)!r}\n")


def read_spectrum_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    n = int(round(np.log2(len(data))))
    coeffs = np.zeros(1 << n)
    coeffs[data[:, 0].astype(int)] = data[:, 1]
    return FourierSpectrum(n, coeffs)
