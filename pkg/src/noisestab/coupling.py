"""Gaussian model martingale and the shared-Brownian-path time-change coupling.

The model process solves dM = I(M) dW on [0,1].  Two martingales are coupled
by reading one Brownian path W at their quadratic-variation clocks:
M_t = W([M]_t), N_t = W([N]_t).  W is generated lazily and refined by
Brownian bridges wherever a clock needs it.
"""

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, rng
from .fourier import BooleanFunction
from .gaussian import isoperimetric_profile
from .rbm import SimConfig, map_blocks, mean_se, resolve_phi, simulate, time_grid


@dataclass(frozen=True, eq=False)
class ModelEnsemble:
    m0: float
    times: np.ndarray
    M: np.ndarray = field(repr=False)
    qv: np.ndarray = field(repr=False)

    def second_moment(self, j):
        return mean_se(self.M[:, j] ** 2)


def simulate_model_process(m0, config, checkpoint_times, path0=0):
    """Euler-Maruyama paths of dM = I(M) dW, with [M]_t = int I(M)^2 dt."""
    if not 0.0 < m0 < 1.0:
        raise ValueError("M0 must lie strictly inside (0,1)")
    steps, ck_idx, times = time_grid(checkpoint_times, config.dt)
    m = config.n_paths
    out_m = np.empty((m, times.size))
    out_qv = np.empty((m, times.size))
    k0, k1 = rng.split_seed(config.seed)

    def run(start, count):
        sl = slice(start, start + count)
        _kernels.model_block(path0 + start, count, float(m0), steps, ck_idx, config.boundary_tol,
                             rng.TAG_MODEL, k0, k1, out_m[sl], out_qv[sl])

    map_blocks(run, m, config)
    return ModelEnsemble(float(m0), times, out_m, out_qv)


class BrownianPath:
    """A Brownian path known at finitely many times, extended and refined on demand.

    New points beyond the last known time get independent Gaussian
    increments on a coarse grid; points in between are drawn from the
    Brownian bridge of their neighbours and cached, so repeated queries agree.
    Not safe for concurrent use.
    """

    def __init__(self, start, generator, coarse_dt=0.01):
        if coarse_dt <= 0:
            raise ValueError("coarse_dt must be positive")
        self._tau = [0.0]
        self._w = [float(start)]
        self._gen = generator
        self.coarse_dt = coarse_dt

    @classmethod
    def from_observations(cls, taus, values, generator, coarse_dt=0.01):
        """Path pinned at (tau_k, W_k); tau must start at 0 and be nondecreasing.

        Repeated times keep the last value.
        """
        taus = np.asarray(taus, dtype=float)
        values = np.asarray(values, dtype=float)
        if taus.size == 0 or taus[0] != 0.0 or np.any(np.diff(taus) < 0):
            raise ValueError("observation times must start at 0 and be nondecreasing")
        path = cls(values[0], generator, coarse_dt)
        # last value recorded at each distinct time
        keep = np.append(np.diff(taus) > 0, True)
        path._tau = list(map(float, taus[keep]))
        path._w = list(map(float, values[keep]))
        return path

    @property
    def grid(self):
        return np.array(self._tau)

    @property
    def values(self):
        return np.array(self._w)

    @property
    def horizon(self):
        return self._tau[-1]

    def _extend(self, tau):
        while self._tau[-1] < tau:
            h = self.coarse_dt
            self._w.append(self._w[-1] + math.sqrt(h) * self._gen.standard_normal())
            self._tau.append(self._tau[-1] + h)

    def __call__(self, tau):
        if tau < 0:
            raise ValueError("negative time")
        self._extend(tau)
        j = bisect.bisect_left(self._tau, tau)
        if self._tau[j] == tau:
            return self._w[j]
        a, b = self._tau[j - 1], self._tau[j]
        wa, wb = self._w[j - 1], self._w[j]
        lam = (tau - a) / (b - a)
        sd = math.sqrt((tau - a) * (b - tau) / (b - a))
        w = wa + lam * (wb - wa) + sd * self._gen.standard_normal()
        self._tau.insert(j, tau)
        self._w.insert(j, w)
        return w


@dataclass(frozen=True, eq=False)
class TimeChange:
    """Clock s(t): times t_k and nondecreasing values s_k = [.]_{t_k}."""

    times: np.ndarray
    qv: np.ndarray
    values: np.ndarray | None = None

    def __post_init__(self):
        if self.qv.size == 0 or self.qv[0] != 0.0:
            raise ValueError("clock must start at 0")
        if np.any(np.diff(self.qv) < 0):
            raise ValueError("clock must be nondecreasing")

    def at(self, t):
        return np.interp(t, self.times, self.qv)

    def inverse(self, tau):
        """Generalized inverse inf{t : s(t) >= tau} on the attained range, by linear interpolation."""
        tau = np.asarray(tau, dtype=float)
        if np.any(tau > self.qv[-1] + 1e-15) or np.any(tau < 0):
            raise ValueError("tau outside the attained range of the clock")
        idx = np.searchsorted(self.qv, tau, side="left")
        idx = np.clip(idx, 1, self.qv.size - 1)
        s0, s1 = self.qv[idx - 1], self.qv[idx]
        t0, t1 = self.times[idx - 1], self.times[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            lam = np.where(s1 > s0, (tau - s0) / (s1 - s0), 1.0)
        out = np.where(tau <= 0.0, 0.0, t0 + lam * (t1 - t0))
        return float(out) if out.ndim == 0 else out


def time_change_on_shared_path(path, speed, t_max, dt=1e-3, lower=0.0, upper=1.0):
    """Integrate ds/dt = speed(W(s)) by explicit Euler on a frozen path.

    The step is min(dt, 0.1/speed).  The clock stops once W(s) leaves
    (lower, upper); the reconstructed process is then held at the boundary.
    Returns a TimeChange whose ``values`` are W(s(t)) clipped to [lower, upper].
    """
    t, s = 0.0, 0.0
    w = path(0.0)
    times, qv, vals = [0.0], [0.0], [min(max(w, lower), upper)]
    stopped = not lower < w < upper
    while t < t_max - 1e-15:
        if stopped:
            t = t_max
            times.append(t)
            qv.append(s)
            vals.append(vals[-1])
            break
        v = float(speed(w))
        if not v >= 0.0:
            raise ValueError(f"speed must be nonnegative, got {v}")
        h = min(dt, t_max - t)
        if v > 0:
            h = min(h, 0.1 / v)
        s += v * h
        t += h
        w = path(s)
        if not lower < w < upper:
            stopped = True
            w = min(max(w, lower), upper)
        times.append(t)
        qv.append(s)
        vals.append(w)
    return TimeChange(np.array(times), np.array(qv), np.array(vals))


def model_speed(w):
    return isoperimetric_profile(min(max(w, 0.0), 1.0)) ** 2


def dictator_speed(w):
    w = min(max(w, 0.0), 1.0)
    return w * (1.0 - w)


def clock_traces_csv(path, tc_dictator, tc_g, brownian, n_points=200):
    """Write tau,T1,T2,W on a uniform tau grid over the range both clocks attain."""
    top = min(tc_dictator.qv[-1], tc_g.qv[-1])
    taus = np.linspace(0.0, top, n_points)
    t1 = tc_dictator.inverse(taus)
    t2 = tc_g.inverse(taus)
    with open(path, "w") as fh:
        fh.write("tau,T1,T2,W\n")
        for a, b, c in zip(taus, t1, t2):
            fh.write(f"{float(a)!r},{float(b)!r},{float(c)!r},{float(brownian(float(a)))!r}\n")


def dictator_dominance_check(g, t0, config, phis=("square", "entropy", "quartic"), n_shared=None):
    """Compare a balanced Boolean g against the dictator.

    (a) pathwise |sigma grad g|^2 <= N(1-N) + 1e-9 at every step,
    (b) on a shared Brownian path built from g's martingale, the dictator clock
        [M]_{t0} against [N]_{t0},
    (c) E phi(dictator at t0) >= E phi(g at t0) for each phi, paired on the
        shared path.
    Returns a dict of statistics; pass flags use 3 standard errors.
    """
    if not isinstance(g, BooleanFunction):
        raise TypeError("g must be a BooleanFunction")
    if g.n > 12:
        raise ValueError("n must be at most 12")
    if abs(g.mean - 0.5) > 1e-12 or not g.is_boolean:
        raise ValueError("g must be Boolean and balanced")
    # (a) along the full ensemble
    grid_end = float(t0)
    ens = simulate(g.n, [grid_end], config, f=g)
    excess = float(ens.monitors[:, -1, _kernels.MON_GRAD_EXCESS].max())
    out = {"gradient_excess_max": excess, "gradient_bound_holds": excess <= 1e-9}

    # (b), (c) on shared paths: record g's martingale on every grid point
    m = config.n_paths if n_shared is None else n_shared
    steps, _, _ = time_grid([grid_end], config.dt)
    grid = np.concatenate([[0.0], np.cumsum(steps)])
    grid[-1] = grid_end
    fine = simulate(g.n, grid, config.with_(n_paths=m), f=g)
    qv_n = fine.qv
    vals = fine.N
    diff_qv = np.empty(m)
    diffs = {name: np.empty(m) for name in phis}
    fns = {name: resolve_phi(name) for name in phis}
    for p in range(m):
        gen = rng.generator(config.seed, rng.TAG_BRIDGE, p)
        w = BrownianPath.from_observations(qv_n[p], vals[p], gen, coarse_dt=config.dt)
        tc = time_change_on_shared_path(w, dictator_speed, grid_end, config.dt)
        diff_qv[p] = tc.qv[-1] - qv_n[p, -1]
        m_end = tc.values[-1]
        n_end = min(max(vals[p, -1], 0.0), 1.0)
        for name in phis:
            diffs[name][p] = float(fns[name](np.float64(m_end))) - float(fns[name](np.float64(n_end)))
    qv_stat = mean_se(diff_qv)
    out["qv_gap"] = qv_stat
    out["qv_order_holds"] = qv_stat["value"] >= -3 * qv_stat["se"]
    out["qv_pathwise_violation_frac"] = float(np.mean(diff_qv < -10 * config.dt))
    out["phi_gaps"] = {}
    ok = True
    for name in phis:
        st = mean_se(diffs[name])
        st["holds"] = st["value"] >= -3 * st["se"]
        ok &= st["holds"]
        out["phi_gaps"][name] = st
    out["phi_order_holds"] = ok
    out["passed"] = out["gradient_bound_holds"] and out["qv_order_holds"] and ok
    return out


__all__ = [
    "BrownianPath",
    "ModelEnsemble",
    "SimConfig",
    "TimeChange",
    "clock_traces_csv",
    "dictator_dominance_check",
    "dictator_speed",
    "model_speed",
    "simulate_model_process",
    "time_change_on_shared_path",
]
