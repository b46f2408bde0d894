"""Renormalized Brownian motion on [-1,1]^n and the martingale N_t = f(X(t)).

Each coordinate solves dX_i = sqrt((1 - X_i)(1 + X_i)) dB_i from X(0) = 0 and
is absorbed at +-1.  ``run_N_process`` tracks a multilinear function along the
paths together with its quadratic variation and a few path monitors used by
the inequality checks.
"""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _kernels, rng
from .fourier import (
    BooleanFunction,
    FourierSpectrum,
    evaluate_multilinear,
    gradient_multilinear,
    neg_entropy,
    stability,
    wht_inverse,
)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    t_max: float = 1.0
    n_paths: int = 10_000
    seed: int = 20230607
    boundary_tol: float = 1e-9
    dt_shrink: float = 0.25
    workers: int = 1
    block_size: int = 4096
    # estimates of the unspecified absolute constants, filled in by the harness
    c_mis: float | None = None
    c1: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_paths < 1:
            raise ValueError("n_paths must be at least 1")
        if not 0 < self.boundary_tol < 1e-3:
            raise ValueError("boundary_tol must lie in (0, 1e-3)")
        if not 0 < self.dt_shrink <= 1:
            raise ValueError("dt_shrink must lie in (0, 1]")
        if self.workers < 1 or self.block_size < 1:
            raise ValueError("workers and block_size must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def with_(self, **kw):
        return replace(self, **kw)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            data = json.load(fh)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return asdict(self)


def default_seed():
    return int(os.environ.get("NOISESTAB_SEED", SimConfig.seed))


@dataclass(frozen=True)
class PathState:
    t: float
    x: np.ndarray
    absorbed: np.ndarray
    qv_N: float = 0.0
    value_N: float = float("nan")

    @classmethod
    def origin(cls, n):
        return cls(0.0, np.zeros(n), np.zeros(n, dtype=bool))


def _effective_step(x, dt, tol, shrink):
    v = (1.0 - x) * (1.0 + x)
    cap = np.where(v < 0.01, (shrink * (1.0 - np.abs(x))) ** 2 / np.where(v > 0, v, 1.0), dt)
    return np.minimum(dt, cap), v


def step(state, dt, gaussian_increments, f=None, boundary_tol=1e-9, dt_shrink=0.25):
    """One Euler-Maruyama update of every free coordinate.

    Inside the boundary layer 1 - x_i^2 < 0.01 the coordinate moves by a
    shortened step chosen so its standard deviation is at most
    ``dt_shrink * (1 - |x_i|)``; the ensemble kernels repeat such sub-steps
    until the full ``dt`` is consumed.  With a spectrum ``f`` the quadratic
    variation of N is accumulated at the left endpoint.
    """
    z = np.asarray(gaussian_increments, dtype=float)
    if z.shape != state.x.shape or not np.all(np.isfinite(z)):
        raise ValueError("need one finite Gaussian increment per coordinate")
    x = state.x.copy()
    free = ~state.absorbed
    h, v = _effective_step(x, dt, boundary_tol, dt_shrink)
    qv = state.qv_N
    if f is not None:
        grad = gradient_multilinear(f, x)
        qv += float(np.sum(v * grad**2)) * dt
    x[free] = x[free] + np.sqrt(v[free] * h[free]) * z[free]
    x = np.clip(x, -1.0, 1.0)
    hit = 1.0 - np.abs(x) <= boundary_tol
    x[hit] = np.sign(x[hit])
    absorbed = state.absorbed | hit
    value = evaluate_multilinear(f, x) if f is not None else state.value_N
    return PathState(state.t + dt, x, absorbed, qv, value)


# ------------------------------------------------------------------ ensembles


def time_grid(checkpoints, dt):
    """Grid of multiples of dt merged with the checkpoint times.

    Returns (steps, checkpoint grid indices, sorted checkpoint times).
    """
    ck = np.unique(np.asarray(checkpoints, dtype=float))
    if ck.size == 0 or ck[0] < 0:
        raise ValueError("checkpoint times must be non-negative")
    t_end = ck[-1]
    base = np.arange(0.0, t_end, dt)
    grid = np.union1d(base, ck)
    # drop grid points closer than 1e-9*dt to a checkpoint
    keep = np.ones(grid.size, dtype=bool)
    near = np.abs(grid[:, None] - ck[None, :]).min(axis=1) < 1e-9 * dt
    keep[near & ~np.isin(grid, ck)] = False
    grid = grid[keep]
    idx = np.searchsorted(grid, ck)
    return np.diff(grid), idx.astype(np.int64), ck


def _blocks(n_paths, block_size):
    return [(s, min(block_size, n_paths - s)) for s in range(0, n_paths, block_size)]


def map_blocks(fn, n_paths, config):
    """Run ``fn(start, count)`` over fixed path blocks; order of results is fixed."""
    blocks = _blocks(n_paths, config.block_size)
    if config.workers == 1 or len(blocks) == 1:
        return [fn(s, c) for s, c in blocks]
    with ThreadPoolExecutor(max_workers=config.workers) as ex:
        return list(ex.map(lambda b: fn(*b), blocks))


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Checkpoint snapshots of an ensemble; arrays are indexed [path, checkpoint, ...]."""

    config: SimConfig
    n: int
    times: np.ndarray
    x: np.ndarray = field(repr=False)
    N: np.ndarray | None = field(default=None, repr=False)
    qv: np.ndarray | None = field(default=None, repr=False)
    monitors: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_paths(self):
        return self.x.shape[0]

    def at(self, t):
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-12:
            raise KeyError(f"no checkpoint at t={t}")
        return j

    def absorbed(self):
        return np.abs(self.x) == 1.0

    def max_partial(self):
        return self.monitors[..., _kernels.MON_MAX_PARTIAL]

    def summary(self):
        """Per-checkpoint statistics with standard errors."""
        rows = []
        for j, t in enumerate(self.times):
            x1 = self.x[:, j, 0]
            row = {"t": float(t), "mean_x1": mean_se(x1), "var_x1": variance_se(x1),
                   "absorbed_frac": float(self.absorbed()[:, j, :].mean())}
            if self.N is not None:
                row["mean_N"] = mean_se(self.N[:, j])
                row["mean_N2"] = mean_se(self.N[:, j] ** 2)
                row["mean_qv"] = mean_se(self.qv[:, j])
            rows.append(row)
        return rows

    def write_csv(self, path):
        """One row per (path, checkpoint): path_id,t,N,qv,max_partial,coords_absorbed."""
        ab = self.absorbed().sum(axis=2)
        with open(path, "w") as fh:
            fh.write("path_id,t,N,qv,max_partial,coords_absorbed\n")
            for p in range(self.n_paths):
                for j, t in enumerate(self.times):
                    if self.N is None:
                        nv, qv, mp = "", "", ""
                    else:
                        nv, qv, mp = repr(float(self.N[p, j])), repr(float(self.qv[p, j])), repr(
                            float(self.monitors[p, j, _kernels.MON_MAX_PARTIAL]))
                    fh.write(f"{p},{float(t)!r},{nv},{qv},{mp},{int(ab[p, j])}\n")

    def summary_json(self):
        # worker count does not affect the paths, so it is left out
        cfg = {k: v for k, v in self.config.to_dict().items() if k != "workers"}
        return json.dumps({"config": cfg, "n": self.n,
                           "checkpoints": self.summary()}, indent=2, sort_keys=True)


def mean_se(v):
    v = np.asarray(v, dtype=float)
    m = float(np.mean(v))
    se = float(np.std(v, ddof=1) / math.sqrt(v.size)) if v.size > 1 else float("nan")
    return {"value": m, "se": se}


def variance_se(v):
    """Sample variance and its large-sample standard error sqrt((m4 - s^4)/m)."""
    v = np.asarray(v, dtype=float)
    c = v - v.mean()
    s2 = float(np.mean(c**2) * v.size / max(v.size - 1, 1))
    m4 = float(np.mean(c**4))
    return {"value": s2, "se": math.sqrt(max(m4 - s2**2, 0.0) / v.size)}


def _table_of(f):
    if f is None:
        return None, 0
    if isinstance(f, BooleanFunction):
        return np.ascontiguousarray(f.table), f.n
    if isinstance(f, FourierSpectrum):
        return np.ascontiguousarray(wht_inverse(f)), f.n
    raise TypeError("expected a BooleanFunction or FourierSpectrum")


def simulate(n, checkpoint_times, config, f=None, x0=None, path0=0, tag=rng.TAG_DIFFUSION):
    """Simulate ``config.n_paths`` paths of X in dimension n and snapshot them."""
    table, nf = _table_of(f)
    if f is not None and nf != n:
        raise ValueError(f"function has dimension {nf}, simulation has {n}")
    if n * (path0 + config.n_paths) >= 2**32:
        raise ValueError("too many path streams for one seed")
    steps, ck_idx, times = time_grid(checkpoint_times, config.dt)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    if table is None:
        table = np.zeros(1 << n)
    m, k = config.n_paths, times.size
    out_x = np.empty((m, k, n))
    out_n = np.empty((m, k))
    out_qv = np.empty((m, k))
    out_mon = np.empty((m, k, _kernels.N_MON))
    k0, k1 = rng.split_seed(config.seed)

    def run(start, count):
        sl = slice(start, start + count)
        _kernels.rbm_block(path0 + start, count, n, x0, steps, ck_idx, table, f is not None,
                           config.boundary_tol, config.dt_shrink, tag, k0, k1,
                           out_x[sl], out_n[sl], out_qv[sl], out_mon[sl])

    map_blocks(run, m, config)
    if f is None:
        return PathEnsemble(config, n, times, out_x)
    return PathEnsemble(config, n, times, out_x, out_n, out_qv, out_mon)


def sample_nu(t, config):
    """Draws of X_1(t), one per path."""
    if t < 0:
        raise ValueError("t must be non-negative")
    ens = simulate(1, [t], config)
    return ens.x[:, 0, 0]


def run_N_process(f, config, checkpoint_times):
    """Track N_t = f(X(t)) and [N]_t along ``config.n_paths`` paths."""
    _, n = _table_of(f)
    return simulate(n, checkpoint_times, config, f=f)


def complete_to_corner(x, generator):
    """Draw X(infinity) given X(t) = x: coordinate i is +1 with probability (1 + x_i)/2."""
    x = np.asarray(x, dtype=float)
    u = generator.random(x.shape)
    return np.where(u < 0.5 * (1.0 + x), 1.0, -1.0)


def conditional_moment_check(x):
    """Closed-form moments of X_i(infinity) given X_i(t) = x_i, per coordinate.

    The standardized fourth moment (1 + 3x^2)/(1 - x^2) is compared with the
    bound 4/(1 - x^2); the slack is identically 3.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(x) >= 1.0):
        raise ValueError("absorbed coordinate has zero conditional variance")
    var = 1.0 - x**2
    fourth = (1.0 + 3.0 * x**2) / var
    bound = 4.0 / var
    # brute force over the two endpoints
    p = 0.5 * (1.0 + x)
    y_hi = (1.0 - x) / np.sqrt(var)
    y_lo = (-1.0 - x) / np.sqrt(var)
    fourth_direct = p * y_hi**4 + (1 - p) * y_lo**4
    return {"mean": x, "variance": var, "fourth_moment": fourth,
            "fourth_moment_direct": fourth_direct, "bound": bound, "slack": bound - fourth,
            "holds": bool(np.all(fourth <= bound + 1e-12))}


PHIS = {
    "square": lambda v: v * v,
    "entropy": neg_entropy,
    "quartic": lambda v: v**4,
}


def resolve_phi(phi):
    if callable(phi):
        return phi
    try:
        return PHIS[phi]
    except KeyError:
        raise ValueError(f"unknown phi {phi!r}; choose from {sorted(PHIS)} or pass a callable") from None


def generalized_stability(f, phi, t, config):
    """E[phi(N_t)] - phi(E f) with its standard error.

    The statistic is a sample mean, for which the jackknife standard error
    coincides with s / sqrt(m).
    """
    phi_fn = resolve_phi(phi)
    s = f if isinstance(f, FourierSpectrum) else None
    mean_f = float(s.coeffs[0]) if s is not None else f.mean
    ens = run_N_process(f, config, [t])
    vals = np.clip(ens.N[:, 0], 0.0, 1.0)
    with np.errstate(all="ignore"):
        d = np.asarray(phi_fn(vals), dtype=float) - float(phi_fn(np.float64(mean_f)))
    if not np.all(np.isfinite(d)):
        raise ValueError("phi is not finite on an attained value")
    return mean_se(d)


def stab_under_measure(f, nu_sampler, n_samples, seed=SimConfig.seed):
    """Monte-Carlo Stab_nu(f) = E[f(Y)^2] for Y with i.i.d. coordinates from nu.

    ``nu_sampler(generator, shape)`` returns values in [-1,1].
    Returns the estimate, its SE and the spectral value Stab_{Var nu}(f)
    computed with the sample's own second moment.
    """
    g = rng.generator(seed, rng.TAG_SAMPLER)
    y = np.asarray(nu_sampler(g, (n_samples, f.n)), dtype=float)
    if np.any(np.abs(y) > 1.0) or not np.all(np.isfinite(y)):
        raise ValueError("sampler produced values outside [-1,1]")
    vals = evaluate_multilinear(f, y) ** 2
    est = mean_se(vals)
    est["second_moment"] = float(np.mean(y**2))
    return est


def entropy_drift_diagnostic(config, horizon=0.2, n_points=21):
    """Slope of t -> mean H_t, H_t the binary entropy (nats) of (1 + X_1(t))/2.

    Only paths not yet absorbed enter the mean.  Ito's formula gives drift
    -1/2 for this quantity in the interior.
    """
    times = np.linspace(0.0, horizon, n_points)
    ens = simulate(1, times, config)
    x = ens.x[:, :, 0]
    h = -neg_entropy(0.5 * (1.0 + x))
    active = np.abs(x) < 1.0
    means = np.array([h[active[:, j], j].mean() for j in range(times.size)])
    slope, intercept = np.polyfit(times, means, 1)
    return {"times": times, "mean_entropy": means, "slope": float(slope),
            "intercept": float(intercept), "ito_drift": -0.5,
            "active_frac": active.mean(axis=0)}
