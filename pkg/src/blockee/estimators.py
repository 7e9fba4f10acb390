"""Point estimators built from block variables.

The public functions take a single series (array or :class:`TimeSeries`).
The underscore-free ``*_rows`` kernels compute the same quantities along the
last axis of a 2-D batch and are what the Monte Carlo harness calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .blocks import BlockConfig, BlockVariables, as_array, scaled_block_sums
from .procgen import ValidationError


@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    method: str
    truncated: bool = False


@dataclass(frozen=True)
class StudentizedStat:
    value: float
    numerator: float
    denominator: float


def sample_autocov(series, k: int) -> float:
    """``n^-1 sum_{i=1}^{n-k} X_i X_{i+k} - Xbar^2`` (divisor n for every lag)."""
    x = as_array(series)
    n = x.shape[0]
    if not 0 <= k <= n - 1:
        raise ValidationError(f"lag {k} outside [0, {n - 1}]")
    return float(np.dot(x[: n - k], x[k:]) / n - x.mean() ** 2)


def spectral_estimate(series, ell: int, weights, lam: float) -> float:
    """Lag-window spectral estimate ``(2 pi)^-1 sum_{k=0}^{ell} w_k gamma_hat(k) cos(k lam)``.

    No factor 2 is applied to the positive lags; put it in the weights.
    """
    x = as_array(series)
    w = np.asarray(weights, dtype=float)
    if w.shape != (ell + 1,):
        raise ValidationError(f"need {ell + 1} weights, got {w.size}")
    if not -np.pi < lam < np.pi:
        raise ValidationError("lambda must lie in (-pi, pi)")
    if ell > x.shape[0] - 1:
        raise ValidationError("ell must be at most n - 1")
    g = np.array([sample_autocov(x, k) for k in range(ell + 1)])
    return float((w * g * np.cos(lam * np.arange(ell + 1))).sum() / (2 * np.pi))


def center_block_vars(blockvars: BlockVariables, mu: Union[float, str] = "plug-in") -> BlockVariables:
    """Subtract ``E Y`` (a known constant) or the sample mean (``"plug-in"``)."""
    if blockvars.centered:
        raise ValidationError("block variables are already centred")
    if isinstance(mu, str):
        if mu != "plug-in":
            raise ValidationError(f"unknown centring {mu!r}")
        c = blockvars.values.mean(axis=0)
        src = "plug-in"
    else:
        c = np.asarray(mu, dtype=float)
        src = "analytic"
    c = float(c) if np.ndim(c) == 0 else c
    return BlockVariables(blockvars.config, blockvars.values - c, True, c, src)


def _nu_power(u: np.ndarray, nu) -> np.ndarray:
    nu = np.atleast_1d(nu)
    if np.any(nu < 0) or nu.sum() == 0:
        raise ValidationError("need a multi-index with |nu| >= 1")
    if u.ndim == 1 or len(nu) == 1:
        if len(nu) != 1:
            raise ValidationError("multi-index length must match the series dimension")
        return u ** int(nu[0])
    return np.prod(u ** nu, axis=-1)


def mbb_moment(series, ell: int, nu) -> float:
    """``N^-1 sum_j U_j^nu`` over the N overlapping blocks."""
    x = as_array(series)
    BlockConfig(x.shape[0], ell)
    u = scaled_block_sums(x.T, ell).T if x.ndim == 2 else scaled_block_sums(x, ell)
    return float(_nu_power(u, nu).mean())


def mbb_variance_rows(x: np.ndarray, ell: int) -> np.ndarray:
    u = scaled_block_sums(x, ell)
    # centred form of (mu(2) - mu(1)^2) / n; never negative
    d = u - u.mean(axis=-1, keepdims=True)
    return (d * d).mean(axis=-1) / x.shape[-1]


def mbb_variance(series, ell: int) -> VarianceEstimate:
    x = as_array(series)
    BlockConfig(x.shape[0], ell)
    return VarianceEstimate(float(mbb_variance_rows(x, ell)), "mbb", False)


def nbb_variance_rows(x: np.ndarray, ell: int, incomplete: str = "error") -> tuple:
    """Truncated NBB variance along the last axis; returns ``(value, truncated)``.

    When ``ell`` does not divide ``n`` the default is to refuse;
    ``incomplete="drop"`` instead uses the ``floor(n / ell)`` complete blocks
    (the floor stays ``1/n``).
    """
    n = x.shape[-1]
    if n % ell and incomplete != "drop":
        if incomplete != "error":
            raise ValidationError(f"unknown incomplete-block policy {incomplete!r}")
        raise ValidationError(f"NBB needs ell | n (n={n}, ell={ell})")
    b = n // ell
    if b < 1:
        raise ValidationError("need at least one complete block")
    u = x[..., : b * ell].reshape(x.shape[:-1] + (b, ell)).sum(axis=-1) / math.sqrt(ell)
    raw = u.var(axis=-1)
    floor = 1.0 / n
    return np.maximum(floor, raw), raw < floor


def nbb_variance(series, ell: int, incomplete: str = "error") -> VarianceEstimate:
    x = as_array(series)
    BlockConfig(x.shape[0], ell)
    v, t = nbb_variance_rows(x, ell, incomplete)
    return VarianceEstimate(float(v), "nbb", bool(t))


def studentized_mean_rows(x: np.ndarray, ell: int, mu: float, incomplete: str = "error") -> np.ndarray:
    n = x.shape[-1]
    v, _ = nbb_variance_rows(x, ell, incomplete)
    return math.sqrt(n) * (x.mean(axis=-1) - mu) / np.sqrt(v)


def studentized_mean(series, ell: int, mu: float, incomplete: str = "error") -> StudentizedStat:
    x = as_array(series)
    n = x.shape[0]
    BlockConfig(n, ell)
    var = nbb_variance(x, ell, incomplete)
    num = math.sqrt(n) * (x.mean() - mu)
    den = math.sqrt(var.value)
    return StudentizedStat(num / den, num, den)


def lag_window_variance_rows(y: np.ndarray, ell: int, n: int) -> tuple:
    """Lag-window variance of block variables along the last axis.

    ``max{1/n, [g(0) + 2 sum_{k=1}^{2 ell} (1 - k/N) g(k)] b / N}`` where ``g`` are
    the divisor-N autocovariances of the block variables about their mean and
    ``b = ceil(n / ell)``.  Returns ``(value, truncated)``.
    """
    N = y.shape[-1]
    if 2 * ell > N - 1:
        raise ValidationError(f"lag window needs 2*ell <= N - 1 (ell={ell}, N={N})")
    b = -(-n // ell)
    d = y - y.mean(axis=-1, keepdims=True)
    acc = (d * d).sum(axis=-1)
    for k in range(1, 2 * ell + 1):
        acc += 2.0 * (1.0 - k / N) * (d[..., :-k] * d[..., k:]).sum(axis=-1)
    raw = acc / N * b / N
    floor = 1.0 / n
    return np.maximum(floor, raw), raw < floor


def lag_window_variance(blockvars: BlockVariables, config: Optional[BlockConfig] = None) -> VarianceEstimate:
    cfg = config or blockvars.config
    y = np.asarray(blockvars.values, dtype=float)
    if y.ndim != 1:
        raise ValidationError("lag-window variance is defined for scalar block variables")
    if y.shape[0] != cfg.N:
        raise ValidationError("block variables do not match the configuration")
    v, t = lag_window_variance_rows(y, cfg.ell, cfg.n)
    return VarianceEstimate(float(v), "lag_window", bool(t))


def studentized_block_mean_rows(y: np.ndarray, ell: int, n: int, true_mean: float) -> np.ndarray:
    b = -(-n // ell)
    v, _ = lag_window_variance_rows(y, ell, n)
    return math.sqrt(b) * (y.mean(axis=-1) - true_mean) / np.sqrt(v)


def studentized_block_mean(blockvars: BlockVariables, config: Optional[BlockConfig] = None,
                           true_mean: float = 0.0) -> StudentizedStat:
    """``sqrt(b) (Ybar_N - E Ybar_N) / sigma_hat`` with the lag-window ``sigma_hat``.

    ``true_mean`` is the mean of the *uncentred* block variables; if the
    variables were centred already, the recorded constant is accounted for.
    """
    cfg = config or blockvars.config
    var = lag_window_variance(blockvars, cfg)
    ybar = float(blockvars.values.mean())
    if blockvars.centered:
        ybar += float(blockvars.center)
    num = math.sqrt(cfg.b) * (ybar - true_mean)
    den = math.sqrt(var.value)
    return StudentizedStat(num / den, num, den)
