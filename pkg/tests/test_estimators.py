import math

import numpy as np
import pytest
from scipy.special import ndtr

from blockee import _kernels
from blockee.blocks import BlockConfig, BlockVariables, eval_block_functional, periodogram, power
from blockee.estimators import (center_block_vars, lag_window_variance, lag_window_variance_rows,
                                mbb_moment, mbb_variance, nbb_variance, sample_autocov,
                                spectral_estimate, studentized_block_mean,
                                studentized_block_mean_rows, studentized_mean)
from blockee.harness.experiments import expected_periodogram
from blockee.harness.stats import ks_distance
from blockee.procgen import LinearProcessSpec, ValidationError, derive_truth, gen_linear, linear_paths
from blockee.resample import exact_enumeration
from blockee.rng import stream


def test_autocov_small_cases():
    assert sample_autocov([2.0] * 4, 1) == pytest.approx(-1.0, abs=1e-15)
    alt = [1.0, -1.0, 1.0, -1.0]
    assert sample_autocov(alt, 0) == 1.0
    assert sample_autocov(alt, 1) == -0.75
    with pytest.raises(ValidationError):
        sample_autocov(alt, 4)


def test_autocov_ma1_lag_one():
    x = gen_linear(LinearProcessSpec((1.0, 0.5)), 10 ** 6, 8).values
    assert abs(sample_autocov(x, 1) - 0.5) < 4 * 2.0 / 1000


def test_spectral_estimate_literal():
    alt = [1.0, -1.0, 1.0, -1.0]
    assert spectral_estimate(alt, 1, (0.0, 0.0), 0.0) == 0.0
    assert spectral_estimate(alt, 1, (1.0, 1.0), 0.0) == pytest.approx(1 / (8 * math.pi), abs=1e-15)
    with pytest.raises(ValidationError):
        spectral_estimate(alt, 1, (1.0,), 0.0)


def test_spectral_estimate_iid_mc():
    n = 10 ** 5
    x = stream(12).standard_normal(n)
    ell = math.ceil(n ** (1 / 3) - 1e-9)
    w = [1.0] + [2.0] * ell
    assert spectral_estimate(x, ell, w, 1.0) == pytest.approx(1 / (2 * math.pi), rel=0.10)


def test_center_block_vars():
    z = BlockVariables(BlockConfig(4, 2), np.zeros(3))
    c = center_block_vars(z)
    assert np.all(c.values == 0) and c.center == 0.0 and c.centered
    y = BlockVariables(BlockConfig(5, 2), np.array([1.0, 4.0, 2.0, 7.0]))
    c = center_block_vars(y, "plug-in")
    assert abs(c.values.mean()) < 1e-12 and c.center_source == "plug-in"
    with pytest.raises(ValidationError):
        center_block_vars(c)
    x = stream(1).standard_normal(100)
    c = center_block_vars(eval_block_functional(x, 4, power(2)), 1.0)
    assert c.center == 1.0


def test_mbb_moment_cases():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert mbb_moment(x, 1, 1) == pytest.approx(x.mean())
    assert mbb_moment([1.5] * 6, 2, 2) == pytest.approx(2 * 1.5 ** 2)
    assert mbb_moment(x, 2, 2) == pytest.approx(83 / 6, abs=1e-13)
    with pytest.raises(ValidationError):
        mbb_moment(x, 2, 0)


def test_mbb_variance_cases():
    assert mbb_variance([3.0] * 8, 2).value == pytest.approx(0.0, abs=1e-15)
    x = stream(2).standard_normal(9)
    assert mbb_variance(x, 1).value == pytest.approx(np.var(x) / 9, abs=1e-15)


def test_mbb_variance_equals_exact_conditional_variance():
    x = np.array([0.3, -1.2, 2.5, 0.7])
    d = exact_enumeration(x, 2, "mean")
    m = d.mean()
    var = float(np.dot(d.probs, (d.samples - m) ** 2))
    assert mbb_variance(x, 2).value == pytest.approx(var, abs=1e-14)


def test_nbb_variance_cases():
    v = nbb_variance([1.0] * 6, 2)
    assert v.truncated and v.value == pytest.approx(1 / 6)
    # nonoverlapping U values alternate between 0 and 2
    s = math.sqrt(2)
    v = nbb_variance(np.array([0.0, 0.0, s, s] * 25), 2)
    assert v.value == pytest.approx(1.0, abs=1e-12) and not v.truncated
    with pytest.raises(ValidationError):
        nbb_variance(np.arange(5.0), 2)
    # explicit opt-in: the trailing partial block is ignored
    x = stream(3).standard_normal(11)
    assert nbb_variance(x, 2, incomplete="drop").value == pytest.approx(nbb_variance(x[:10], 2).value * 10 / 10)


def test_nbb_variance_iid_median():
    n, ell = 6000, math.ceil(6000 ** (1 / 3))
    x = linear_paths(LinearProcessSpec((1.0,)), n, stream(4), 200)
    vals = [nbb_variance(r, ell, incomplete="drop").value for r in x]
    assert np.median(vals) == pytest.approx(1.0, rel=0.10)


def test_studentized_mean_cases():
    assert studentized_mean([2.0] * 6, 2, 2.0).value == 0.0
    assert studentized_mean([1.0, -1.0] * 3, 2, 0.0).value == 0.0
    st = studentized_mean(np.arange(8.0), 2, 3.0)
    assert st.value == pytest.approx(st.numerator / st.denominator)


def test_studentized_mean_iid_normality():
    n = 6000
    ell = math.ceil(n ** (1 / 3) - 1e-9)
    x = linear_paths(LinearProcessSpec((1.0,)), n, stream(5), 5000)
    t = np.array([studentized_mean(r, ell, 0.0, incomplete="drop").value for r in x])
    assert ks_distance(t, ndtr) < 0.05


def test_lag_window_constant_is_floored():
    v = lag_window_variance(BlockVariables(BlockConfig(12, 2), np.full(11, 3.0)))
    assert v.truncated and v.value == pytest.approx(1 / 12)


def test_lag_window_direct_sums():
    y = np.array([1.0, -1.0, 1.0, -1.0, 1.0])
    cfg = BlockConfig(5, 1)
    N = 5
    ybar = 0.2
    g = [sum((y[i] - ybar) * (y[i + k] - ybar) for i in range(N - k)) / N for k in range(3)]
    raw = (g[0] + 2 * (1 - 1 / N) * g[1] + 2 * (1 - 2 / N) * g[2]) * cfg.b / N
    v = lag_window_variance(BlockVariables(cfg, y))
    assert v.value == pytest.approx(max(1 / 5, raw), abs=1e-14)


def test_lag_window_requires_room():
    with pytest.raises(ValidationError):
        lag_window_variance(BlockVariables(BlockConfig(5, 2), np.ones(4)))


def test_lag_window_iid_scaling():
    # i.i.d. Y: lag-window bracket estimates Var(Y) (up to the 2ell lag noise)
    rng = stream(6)
    n, ell = 20000, 5
    N = n - ell + 1
    b = BlockConfig(n, ell).b
    vals = [lag_window_variance(BlockVariables(BlockConfig(n, ell), rng.exponential(size=N))).value
            for _ in range(50)]
    assert np.median(vals) == pytest.approx(1.0 * b / N, rel=0.15)


def test_studentized_block_mean_cases():
    cfg = BlockConfig(20, 2)
    y = np.linspace(0, 1, cfg.N)
    assert studentized_block_mean(BlockVariables(cfg, y), cfg, float(y.mean())).value == pytest.approx(0, abs=1e-12)
    st = studentized_block_mean(BlockVariables(cfg, np.full(cfg.N, 2.0)), cfg, 1.0)
    assert st.denominator == pytest.approx(1 / math.sqrt(20))
    assert math.isfinite(st.value)
    # pre-centred variables give the same statistic
    c = center_block_vars(BlockVariables(cfg, y), "plug-in")
    a = studentized_block_mean(BlockVariables(cfg, y), cfg, 0.3).value
    assert studentized_block_mean(c, cfg, 0.3).value == pytest.approx(a, abs=1e-12)


def test_studentized_block_mean_periodogram_normality():
    n, ell, w = 20000, 7, math.pi / 2
    spec = LinearProcessSpec((1.0,))
    mu = expected_periodogram(derive_truth(spec), ell, w)
    x = linear_paths(spec, n, stream(7), 3000)
    t = _kernels.studentized_periodogram_rows(x, ell, w, mu)
    assert ks_distance(t, ndtr) < 0.06


def test_kernels_match_numpy_reference():
    x = stream(8).standard_normal((4, 500))
    for ell, w in [(3, 0.9), (7, math.pi / 2)]:
        from blockee.blocks import periodogram_values
        y = periodogram_values(x, ell, w)
        assert np.allclose(_kernels.periodogram_rows(x, ell, w), y, atol=1e-12)
        v, t = lag_window_variance_rows(y, ell, 500)
        v2, t2 = _kernels.lag_window_rows(y, ell, 500)
        assert np.allclose(v, v2, rtol=1e-10, atol=0) and np.array_equal(t, t2)
        a = studentized_block_mean_rows(y, ell, 500, 0.1)
        b = _kernels.studentized_periodogram_rows(x, ell, w, 0.1)
        assert np.allclose(a, b, rtol=1e-9)


def test_studentized_block_mean_matches_row_kernel():
    x = stream(9).standard_normal(300)
    bv = eval_block_functional(x, 4, periodogram(1.0))
    st = studentized_block_mean(bv, bv.config, 0.2)
    assert st.value == pytest.approx(float(studentized_block_mean_rows(bv.values, 4, 300, 0.2)), abs=1e-12)
