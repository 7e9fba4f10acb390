import math

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import ndtr

from blockee.blocks import (BlockConfig, eval_block_functional, nonoverlap_block_means, periodogram,
                            periodogram_values, scaled_block_sums)
from blockee.edgeworth import CumulantVector, StudentizedEEParams, ee_cdf, studentized_p1, studentized_p2
from blockee.estimators import (lag_window_variance_rows, mbb_variance, nbb_variance, sample_autocov,
                                studentized_mean)
from blockee.harness.stats import ks_distance
from blockee.resample import exact_enumeration

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@st.composite
def series_and_block(draw, min_n=2, max_n=40):
    n = draw(st.integers(min_n, max_n))
    x = draw(arrays(np.float64, n, elements=finite))
    ell = draw(st.integers(1, n))
    return x, ell


@given(series_and_block())
def test_block_geometry(data):
    x, ell = data
    cfg = BlockConfig(x.size, ell)
    assert cfg.N == x.size - ell + 1
    assert (cfg.b - 1) * ell < x.size <= cfg.b * ell


@given(series_and_block())
def test_nonoverlap_means_aggregate_to_series_mean(data):
    x, ell = data
    bv = eval_block_functional(x, ell, periodogram(1.0))
    w = nonoverlap_block_means(x, bv)
    cfg = bv.config
    # every observation sits in exactly one nonoverlapping block
    assert math.isclose(w[:, 0].sum() * math.sqrt(ell), x.sum(), rel_tol=1e-9, abs_tol=1e-7)
    assert math.isclose(w[:, 1].sum() * ell, bv.values.sum(), rel_tol=1e-9, abs_tol=1e-6)
    assert w.shape[0] == cfg.b


@given(series_and_block(), st.floats(0, math.pi))
def test_periodogram_nonnegative_and_sign_invariant(data, w):
    x, ell = data
    y = periodogram_values(x, ell, w)
    assert np.all(y >= -1e-12)
    assert np.allclose(periodogram_values(-x, ell, w), y, rtol=1e-12, atol=1e-9)


@given(series_and_block(), st.floats(-10, 10), st.floats(0.1, 10))
def test_mbb_variance_affine(data, shift, scale):
    x, ell = data
    v = mbb_variance(x, ell).value
    assert v >= 0
    assert math.isclose(mbb_variance(x + shift, ell).value, v, rel_tol=1e-6, abs_tol=1e-7)
    assert math.isclose(mbb_variance(scale * x, ell).value, scale ** 2 * v, rel_tol=1e-6, abs_tol=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.data())
def test_mbb_variance_is_exact_bootstrap_variance(ell, b, data):
    x = data.draw(arrays(np.float64, ell * b, elements=finite))
    d = exact_enumeration(x, ell, "mean")
    m = d.mean()
    var = float(np.dot(d.probs, (d.samples - m) ** 2))
    assert math.isclose(mbb_variance(x, ell).value, var, rel_tol=1e-7, abs_tol=1e-9)


@given(st.integers(1, 6), st.integers(1, 8), st.data())
def test_nbb_variance_floor_and_shift(ell, b, data):
    x = data.draw(arrays(np.float64, ell * b, elements=finite))
    v = nbb_variance(x, ell)
    n = ell * b
    assert v.value >= 1 / n
    assert math.isclose(nbb_variance(x + 3.0, ell).value, v.value, rel_tol=1e-6, abs_tol=1e-7)


@given(st.integers(1, 6), st.integers(1, 8), st.floats(-5, 5), st.data())
def test_studentized_mean_shift_invariant(ell, b, mu, data):
    x = data.draw(arrays(np.float64, ell * b, elements=st.floats(-5, 5)))
    a = studentized_mean(x, ell, mu).value
    c = studentized_mean(x + 2.0, ell, mu + 2.0).value
    assert math.isclose(a, c, rel_tol=1e-6, abs_tol=1e-6)


@given(st.integers(3, 60), st.data())
def test_lag_window_floor(n, data):
    ell = data.draw(st.integers(1, max(1, (n - 1) // 3)))
    N = n - ell + 1
    if 2 * ell > N - 1:
        return
    y = data.draw(arrays(np.float64, N, elements=finite))
    v, _ = lag_window_variance_rows(y, ell, n)
    assert v >= 1 / n


@given(series_and_block(min_n=2))
def test_autocov_lag_zero_is_population_variance(data):
    x, _ = data
    assert math.isclose(sample_autocov(x, 0), float(np.var(x)), rel_tol=1e-9, abs_tol=1e-9)


@given(series_and_block())
def test_scaled_block_sums_shape(data):
    x, ell = data
    assert scaled_block_sums(x, ell).shape == (x.size - ell + 1,)


@given(st.floats(0.2, 5), st.floats(-2, 2), st.floats(-2, 2), st.floats(10, 1e4))
def test_ee_cdf_limits_and_mass(chi2, chi3, chi4, bt):
    cum = CumulantVector((chi2, chi3, chi4))
    lo, hi = ee_cdf(np.array([-40.0, 40.0]), cum, bt, 4)
    assert abs(lo) < 1e-12 and abs(hi - 1) < 1e-12


@given(st.floats(-3, 3), st.floats(0.5, 2), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
def test_correction_polynomial_parity(y, eu2, ez3, ezv, g):
    p = StudentizedEEParams(sigma_inf_sq=1.0, weighted_gamma_sum=g, n=1000, ell=10, eu2=eu2,
                            ez_sq=1.0, ez_cubed=ez3, ez_v=ezv)
    assert math.isclose(studentized_p1(y, p), studentized_p1(-y, p), abs_tol=1e-12)
    assert math.isclose(studentized_p2(y, p), -studentized_p2(-y, p), abs_tol=1e-12)


@given(arrays(np.float64, st.integers(1, 60), elements=st.floats(-6, 6)))
def test_ks_distance_bounds(x):
    d = ks_distance(x, ndtr)
    assert 1 / (2 * x.size) - 1e-12 <= d <= 1
