import math

import numpy as np
import pytest
from scipy import special, stats

from noisestab import fourier as F
from noisestab import rng
from noisestab.coupling import (
    BrownianPath,
    TimeChange,
    clock_traces_csv,
    dictator_dominance_check,
    dictator_speed,
    model_speed,
    simulate_model_process,
    time_change_on_shared_path,
)
from noisestab.gaussian import GaussianStabilityQuery, gaussian_stability
from noisestab.rbm import SimConfig, mean_se

LN2 = math.log(2.0)


def exact_model_sample(m0, t, size, seed=0):
    # Y = Phi^{-1}(M) solves dY = dW + Y/2 dt, so Y_t ~ N(e^{t/2} Y_0, e^t - 1)
    g = np.random.default_rng(seed)
    y = math.exp(t / 2) * special.ndtri(m0) + math.sqrt(math.expm1(t)) * g.standard_normal(size)
    return special.ndtr(y)


# ---- model process -------------------------------------------------------------------

def test_exact_sampler_oracle_matches_identity():
    m = exact_model_sample(0.3, 0.8, 400_000)
    est = mean_se(m**2)
    exact = gaussian_stability(GaussianStabilityQuery(1 - math.exp(-0.8), 0.3))
    assert abs(est["value"] - exact) <= 3 * est["se"]


@pytest.mark.parametrize("m0", [0.3, 0.5, 0.7])
def test_model_process_against_exact_sampler(m0):
    cfg = SimConfig(n_paths=20_000, dt=1e-3)
    ens = simulate_model_process(m0, cfg, [0.5, LN2])
    for j, t in enumerate(ens.times):
        sim = ens.M[:, j]
        ref = exact_model_sample(m0, t, 20_000, seed=int(1000 * m0) + j)
        assert stats.ks_2samp(sim, ref).pvalue > 1e-3
        a, b = mean_se(sim**2), mean_se(ref**2)
        assert abs(a["value"] - b["value"]) <= 3 * math.hypot(a["se"], b["se"])
        assert abs(mean_se(sim)["value"] - m0) <= 3 * mean_se(sim)["se"]


def test_model_process_identity_half():
    ens = simulate_model_process(0.5, SimConfig(n_paths=20_000, dt=1e-3), [LN2])
    est = ens.second_moment(0)
    assert abs(est["value"] - 1 / 3) <= 3 * est["se"]


def test_model_process_long_time():
    ens = simulate_model_process(0.3, SimConfig(n_paths=5000, dt=1e-2), [30.0])
    m = ens.M[:, 0]
    assert np.all((m < 1e-6) | (m > 1 - 1e-6))
    est = mean_se(np.round(m) ** 2)
    assert abs(est["value"] - 0.3) <= 3 * est["se"]


def test_model_process_rejects_boundary_start():
    with pytest.raises(ValueError):
        simulate_model_process(0.0, SimConfig(n_paths=2), [0.1])


# ---- Brownian path ------------------------------------------------------------------------

def test_queries_are_cached():
    w = BrownianPath(0.0, rng.generator(1, rng.TAG_BRIDGE), coarse_dt=0.1)
    a = [w(t) for t in (0.35, 0.05, 1.3, 0.35)]
    assert a[0] == a[3]
    assert w(0.0) == 0.0
    assert np.all(np.diff(w.grid) > 0)
    with pytest.raises(ValueError):
        w(-1.0)


def test_bridge_and_extension_statistics():
    mids, ends = [], []
    for k in range(4000):
        w = BrownianPath.from_observations([0.0, 1.0], [0.0, 0.0], rng.generator(2, rng.TAG_BRIDGE, k), coarse_dt=0.5)
        mids.append(w(0.25))
        ends.append(w(3.0))
    mids, ends = np.array(mids), np.array(ends)
    # bridge pinned at 0 on [0,1]: Var W(1/4) = (1/4)(3/4); beyond the pin: Var W(3) = 2
    se = 0.1875 * math.sqrt(2 / mids.size)
    assert abs(mids.var() - 0.1875) <= 4 * se
    assert abs(ends.var() - 2.0) <= 4 * 2.0 * math.sqrt(2 / ends.size)


def test_from_observations_validation():
    g = rng.generator(0, rng.TAG_BRIDGE)
    with pytest.raises(ValueError):
        BrownianPath.from_observations([0.1, 0.2], [0, 0], g)
    with pytest.raises(ValueError):
        BrownianPath.from_observations([0.0, 0.2, 0.1], [0, 0, 0], g)
    w = BrownianPath.from_observations([0.0, 0.1, 0.1, 0.3], [0.5, 0.6, 0.7, 0.4], g)
    assert w(0.1) == 0.7 and w.horizon == 0.3
    with pytest.raises(ValueError):
        BrownianPath(0.0, g, coarse_dt=0)


# ---- time changes ----------------------------------------------------------------------------

def test_time_change_validation_and_inverse():
    with pytest.raises(ValueError):
        TimeChange(np.array([0.0, 1.0]), np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        TimeChange(np.array([0.0, 1.0, 2.0]), np.array([0.0, 0.5, 0.4]))
    tc = TimeChange(np.array([0.0, 1.0, 2.0, 3.0]), np.array([0.0, 0.5, 0.5, 1.5]))
    assert tc.at(2.5) == pytest.approx(1.0)
    assert tc.inverse(0.25) == pytest.approx(0.5)
    assert tc.inverse(0.5) == pytest.approx(1.0)  # leftmost time the clock reaches 0.5
    assert tc.inverse(1.0) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        tc.inverse(2.0)


def test_unit_speed_reads_path_directly():
    w = BrownianPath(0.5, rng.generator(3, rng.TAG_BRIDGE), coarse_dt=0.01)
    tc = time_change_on_shared_path(w, lambda v: 1.0, 0.2, dt=0.01, lower=-np.inf, upper=np.inf)
    np.testing.assert_allclose(tc.qv, tc.times, atol=1e-12)
    np.testing.assert_allclose(tc.values, [w(s) for s in tc.qv])


def test_negative_speed_rejected():
    w = BrownianPath(0.5, rng.generator(3, rng.TAG_BRIDGE))
    with pytest.raises(ValueError):
        time_change_on_shared_path(w, lambda v: -1.0, 0.1)


def test_isoperimetric_clock_reproduces_model_law():
    t_end, m = LN2, 1000
    vals = np.empty(m)
    for p in range(m):
        w = BrownianPath(0.5, rng.generator(11, rng.TAG_BRIDGE, p), coarse_dt=1e-3)
        vals[p] = time_change_on_shared_path(w, model_speed, t_end, dt=4e-3).values[-1]
    ref = simulate_model_process(0.5, SimConfig(n_paths=20_000, dt=1e-3), [t_end]).M[:, 0]
    a, b = mean_se(vals**2), mean_se(ref**2)
    assert abs(a["value"] - b["value"]) <= 3 * math.hypot(a["se"], b["se"])


def test_dictator_clock_speed():
    assert dictator_speed(0.5) == 0.25
    assert dictator_speed(1.2) == 0.0
    assert model_speed(0.5) == pytest.approx(1 / (2 * math.pi))


def test_clock_traces_csv(tmp_path):
    w = BrownianPath(0.5, rng.generator(4, rng.TAG_BRIDGE), coarse_dt=1e-3)
    a = time_change_on_shared_path(w, dictator_speed, 0.5, dt=1e-2)
    b = time_change_on_shared_path(w, model_speed, 0.5, dt=1e-2)
    clock_traces_csv(tmp_path / "c.csv", a, b, w, n_points=20)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "tau,T1,T2,W" and len(lines) == 21
    assert "np." not in lines[1]


# ---- dictator dominance --------------------------------------------------------------------

def test_dominance_self_comparison():
    cfg = SimConfig(n_paths=500, dt=1e-3)
    r = dictator_dominance_check(F.make_dictator(2), LN2, cfg, n_shared=100)
    assert r["gradient_excess_max"] <= 1e-9
    assert abs(r["qv_gap"]["value"]) < 0.01
    for v in r["phi_gaps"].values():
        assert abs(v["value"]) < 0.02


@pytest.mark.parametrize("g,exact", [(F.make_majority(3), 0.375 - 0.3515625), (F.make_parity(2), 0.375 - 0.3125)])
def test_dominance_square_gap(g, exact):
    cfg = SimConfig(n_paths=1000, dt=1e-3)
    r = dictator_dominance_check(g, LN2, cfg, phis=("square",), n_shared=400)
    gap = r["phi_gaps"]["square"]
    assert abs(gap["value"] - exact) <= 3 * gap["se"] + 5e-3
    assert r["passed"]


def test_dominance_requires_balanced_boolean():
    with pytest.raises(ValueError):
        dictator_dominance_check(F.make_tribes(2, 2), LN2, SimConfig(n_paths=10))
    with pytest.raises(TypeError):
        dictator_dominance_check(F.wht_forward(F.make_majority(3)), LN2, SimConfig(n_paths=10))
