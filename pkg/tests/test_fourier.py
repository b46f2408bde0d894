import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from noisestab import fourier as F


# ---- independent oracles: direct sums over the corners -------------------

def brute_coeffs(f):
    c = F.corners(f.n)
    out = np.empty(1 << f.n)
    for mask in range(1 << f.n):
        chi = np.prod(np.where((mask >> np.arange(f.n)) & 1, c, 1.0), axis=1)
        out[mask] = np.mean(f.table * chi)
    return out


def brute_multilinear(f, x):
    # E f(corner) under the product measure with means x
    c = F.corners(f.n)
    w = np.prod(0.5 * (1 + c * x), axis=1)
    return float(w @ f.table)


def brute_stability(f, rho):
    c = F.corners(f.n)
    agree = (c[:, None, :] == c[None, :, :]).sum(axis=2)
    p = ((1 + rho) / 2) ** agree * ((1 - rho) / 2) ** (f.n - agree) / (1 << f.n)
    return float(f.table @ p @ f.table)


tables = st.integers(1, 6).flatmap(
    lambda n: arrays(float, 1 << n, elements=st.floats(0, 1)).map(lambda t: F.BooleanFunction(n, t)))
boolean_tables = st.integers(1, 5).flatmap(
    lambda n: arrays(float, 1 << n, elements=st.sampled_from([0.0, 1.0])).map(lambda t: F.BooleanFunction(n, t)))


# ---- spectra --------------------------------------------------------------

def test_dictator_n1_spectrum():
    np.testing.assert_allclose(F.wht_forward(F.make_dictator(1)).coeffs, [0.5, 0.5])


def test_majority3_spectrum():
    s = F.wht_forward(F.make_majority(3))
    assert s[()] == 0.5
    for i in (1, 2, 3):
        assert s[(i,)] == 0.25
    assert s[(1, 2, 3)] == -0.25
    for A in ((1, 2), (1, 3), (2, 3)):
        assert s[A] == 0.0


def test_constant_spectrum():
    s = F.wht_forward(F.make_constant(4, 0.3))
    assert s.coeffs[0] == pytest.approx(0.3)
    assert np.all(s.coeffs[1:] == 0)


@given(tables)
def test_transform_matches_direct_sums(f):
    np.testing.assert_allclose(F.wht_forward(f).coeffs, brute_coeffs(f), atol=1e-12)


@given(tables)
def test_round_trip_and_parseval(f):
    s = F.wht_forward(f)
    np.testing.assert_allclose(F.wht_inverse(s), f.table, atol=1e-12)
    assert abs(np.sum(s.coeffs**2) - np.mean(f.table**2)) <= 1e-12


def test_round_trip_random_corpus():
    g = np.random.default_rng(0)
    for k in range(1000):
        n = 1 + k % 10
        f = F.BooleanFunction(n, g.random(1 << n))
        assert np.max(np.abs(F.wht_inverse(F.wht_forward(f)) - f.table)) <= 1e-12


def test_dimension_limit():
    with pytest.raises(F.DimensionError):
        F.BooleanFunction(25, np.zeros(1))
    with pytest.raises(ValueError):
        F.BooleanFunction(2, np.zeros(3))
    with pytest.raises(ValueError):
        F.BooleanFunction(1, [0.0, 1.5])


# ---- multilinear extension ---------------------------------------------------

def test_multilinear_examples():
    d = F.wht_forward(F.make_dictator(3))
    assert F.evaluate_multilinear(d, np.zeros(3)) == pytest.approx(0.5)
    m = F.wht_forward(F.make_majority(3))
    assert F.evaluate_multilinear(m, [1, 1, -1]) == pytest.approx(1.0)
    for t in (-0.7, 0.2, 0.9):
        assert F.evaluate_multilinear(m, [t, 0, 0]) == pytest.approx(0.5 + t / 4)


@given(tables, st.data())
def test_multilinear_matches_product_measure(f, data):
    x = data.draw(arrays(float, f.n, elements=st.floats(-1, 1)))
    s = F.wht_forward(f)
    assert F.evaluate_multilinear(s, x) == pytest.approx(brute_multilinear(f, x), abs=1e-12)


@given(tables, st.data())
def test_multilinear_agrees_on_corners(f, data):
    j = data.draw(st.integers(0, (1 << f.n) - 1))
    x = F.corners(f.n)[j]
    assert F.evaluate_multilinear(F.wht_forward(f), x) == pytest.approx(f.table[j], abs=1e-12)


def test_multilinear_rejects_outside_cube():
    s = F.wht_forward(F.make_majority(3))
    with pytest.raises(ValueError):
        F.evaluate_multilinear(s, [1.1, 0, 0])
    with pytest.raises(ValueError):
        F.evaluate_multilinear(s, [0, 0])


def test_gradient_examples():
    d = F.wht_forward(F.make_dictator(4))
    for x in (np.zeros(4), np.array([0.3, -0.9, 0.5, 1.0])):
        np.testing.assert_allclose(F.gradient_multilinear(d, x), [0.5, 0, 0, 0], atol=1e-15)
    m = F.wht_forward(F.make_majority(3))
    np.testing.assert_allclose(F.gradient_multilinear(m, np.zeros(3)), [0.25] * 3)
    p = F.wht_forward(F.make_parity(2))
    for a, b in ((0.3, -0.4), (0.9, 0.1)):
        assert F.gradient_multilinear(p, [a, b])[0] == pytest.approx(b / 2)


@given(tables, st.data())
def test_gradient_is_exact_difference_quotient(f, data):
    # multilinear in each coordinate, so the secant over [-1,1] is the partial
    x = data.draw(arrays(float, f.n, elements=st.floats(-1, 1)))
    s = F.wht_forward(f)
    g = F.gradient_multilinear(s, x)
    for i in range(f.n):
        hi, lo = x.copy(), x.copy()
        hi[i], lo[i] = 1.0, -1.0
        assert g[i] == pytest.approx(0.5 * (brute_multilinear(f, hi) - brute_multilinear(f, lo)), abs=1e-12)


# ---- noise operator and stability -------------------------------------------

def test_noise_operator_examples():
    s = F.wht_forward(F.make_majority(3))
    np.testing.assert_array_equal(F.noise_operator(s, 1.0).coeffs, s.coeffs)
    z = F.noise_operator(s, 0.0).coeffs
    assert z[0] == 0.5 and np.all(z[1:] == 0)
    d = F.wht_forward(F.make_dictator(1))
    assert F.noise_operator(d, 0.5).coeffs[1] == 0.25
    with pytest.raises(ValueError):
        F.noise_operator(s, 1.5)


@pytest.mark.parametrize("rho", [0.0, 0.25, 0.5, 0.9, 1.0])
def test_stability_closed_forms(rho):
    assert F.stability(F.wht_forward(F.make_dictator(1)), rho) == pytest.approx(0.25 + rho / 4)
    assert F.stability(F.wht_forward(F.make_majority(3)), rho) == pytest.approx(0.25 + 3 * rho / 16 + rho**3 / 16)


@given(tables, st.floats(0, 1))
def test_stability_matches_pair_sum(f, rho):
    assert F.stability(F.wht_forward(f), rho) == pytest.approx(brute_stability(f, rho), abs=1e-12)


@given(tables)
def test_stability_at_one_is_second_moment(f):
    assert F.stability(F.wht_forward(f), 1.0) == pytest.approx(np.mean(f.table**2), abs=1e-12)


@given(tables, st.floats(0, 1), st.floats(0, 1))
def test_stability_monotone_in_rho(f, a, b):
    s = F.wht_forward(f)
    lo, hi = sorted((a, b))
    assert F.stability(s, lo) <= F.stability(s, hi) + 1e-14


# ---- influences --------------------------------------------------------------

def test_influence_examples():
    np.testing.assert_allclose(F.influences(F.make_majority(3)), [0.5] * 3)
    np.testing.assert_allclose(F.influences(F.make_dictator(3)), [1, 0, 0])
    np.testing.assert_allclose(F.influences_l2(F.wht_forward(F.make_majority(3))), [1 / 8] * 3)
    with pytest.raises(IndexError):
        F.influence(F.make_majority(3), 0)


@given(boolean_tables)
def test_influence_conventions_differ_by_four(f):
    # for 0/1 functions the flip probability is 4 E[(d_i f)^2]
    np.testing.assert_allclose(F.influences(f), 4 * F.influences_l2(F.wht_forward(f)), atol=1e-12)


@pytest.mark.parametrize("n", [1, 3, 5, 7, 9])
def test_majority_max_influence(n):
    assert F.majority_max_influence(n) == pytest.approx(F.max_influence(F.make_majority(n)))


# ---- constructors ----------------------------------------------------------------

def test_constructors():
    np.testing.assert_array_equal(F.make_majority(1).table, F.make_dictator(1, 1).table)
    c = F.corners(3)
    np.testing.assert_array_equal(F.make_majority(3).table, (c.sum(axis=1) > 0).astype(float))
    p = F.make_parity(2, {1, 2})
    assert p.mean == 0.5
    np.testing.assert_allclose(F.influences(p), [1, 1])
    t = F.make_tribes(2, 2)
    assert t.mean == pytest.approx(1 - (3 / 4) ** 2)
    with pytest.raises(ValueError):
        F.make_majority(4)


@pytest.mark.parametrize("n", [1, 3, 5, 7])
def test_majority_matches_corner_sign(n):
    c = F.corners(n)
    np.testing.assert_array_equal(F.make_majority(n).table, (c.sum(axis=1) > 0).astype(float))


def test_all_boolean_tables_code_convention():
    t = F.all_boolean_tables(2)
    assert t.shape == (16, 4)
    # bit j of the code is the value at corner j
    np.testing.assert_array_equal(t[0b1010], [0, 1, 0, 1])
    with pytest.raises(F.DimensionError):
        F.all_boolean_tables(5)


# ---- biased Parseval ------------------------------------------------------------

def test_biased_parseval_examples():
    d = F.make_dictator(3)
    assert F.biased_parseval_gap(F.wht_forward(d), np.zeros(3), d) == pytest.approx(0.0, abs=1e-15)
    one = F.make_constant(3, 1.0)
    assert F.biased_parseval_gap(F.wht_forward(one), [0.2, -0.5, 0.9], one) == pytest.approx(0.0, abs=1e-15)
    m = F.make_majority(3)
    assert F.biased_parseval_gap(F.wht_forward(m), np.zeros(3), m) == pytest.approx(1 / 16)
    half = F.make_constant(2, 0.5)
    with pytest.raises(ValueError):
        F.biased_parseval_gap(F.wht_forward(half), np.zeros(2), half)
    with pytest.raises(ValueError):
        F.biased_parseval_gap(F.wht_forward(m), [1.0, 0, 0], m)


@given(boolean_tables, st.data())
def test_biased_parseval_nonnegative(f, data):
    x = data.draw(arrays(float, f.n, elements=st.floats(-0.999, 0.999)))
    assert F.biased_parseval_gap(F.wht_forward(f), x, f) >= -1e-10


# ---- mutual information -----------------------------------------------------------

def test_mutual_information_examples():
    d = F.make_dictator(3)
    assert F.mutual_information(d, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert F.mutual_information(d, 1.0) == pytest.approx(math.log(2))
    hbar = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
    assert F.mutual_information(d, 0.5) == pytest.approx(math.log(2) - hbar)
    assert F.mutual_information(d, 0.5) == pytest.approx(0.1308, abs=1e-4)
    with pytest.raises(ValueError):
        F.mutual_information(d, -0.1)


@given(boolean_tables, st.floats(0, 1))
def test_mutual_information_range(f, rho):
    mi = F.mutual_information(f, rho)
    assert -1e-12 <= mi <= math.log(2) + 1e-12


# ---- file formats -------------------------------------------------------------------

def test_table_and_spectrum_io(tmp_path):
    f = F.make_tribes(2, 2)
    F.save_table(f, tmp_path / "t.txt")
    g = F.load_table(tmp_path / "t.txt")
    np.testing.assert_array_equal(f.table, g.table)
    s = F.wht_forward(f)
    F.write_spectrum_csv(s, tmp_path / "s.csv")
    np.testing.assert_array_equal(F.read_spectrum_csv(tmp_path / "s.csv").coeffs, s.coeffs)


@pytest.mark.parametrize("text,line", [
    ("m=2\n", 1), ("n=2\n0 0\n1 zz\n", 3), ("n=2\n0 0\n9 1\n", 3), ("n=1\n0 0 1\n", 2)])
def test_load_table_errors_carry_line(tmp_path, text, line):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(ValueError, match=f":{line}:"):
        F.load_table(p)


def test_load_table_missing_entry(tmp_path):
    p = tmp_path / "short.txt"
    p.write_text("n=2\n0 0\n1 1\n")
    with pytest.raises(ValueError, match="missing"):
        F.load_table(p)
