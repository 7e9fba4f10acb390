"""Moving-block, nonoverlapping-block and blocks-of-blocks bootstrap engines."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .blocks import BlockConfig, BlockVariables, as_array, block_sums
from .estimators import StudentizedStat, mbb_variance_rows, nbb_variance_rows
from .procgen import ValidationError
from .rng import NS_BOOTSTRAP, stream

ENUMERATION_CAP = 1_000_000

# statistic(resampled, original, ell) -> float; resampled may be 2-D (one row per replicate)
STATISTICS: Dict[str, Callable] = {}


def register_statistic(name: str):
    def deco(fn):
        STATISTICS[name] = fn
        return fn
    return deco


@register_statistic("mean")
def _stat_mean(xs, x, ell):
    return xs.mean(axis=-1)


@register_statistic("mbb-variance")
def _stat_mbb_variance(xs, x, ell):
    return mbb_variance_rows(xs, ell)


@register_statistic("studentized-mean")
def _stat_studentized(xs, x, ell):
    # centred at the bootstrap expectation of the resample mean
    n = x.shape[-1]
    v, _ = nbb_variance_rows(xs, ell)
    return math.sqrt(n) * (xs.mean(axis=-1) - mbb_expected_mean(x, ell)) / np.sqrt(v)


def get_statistic(name: str) -> Callable:
    try:
        return STATISTICS[name]
    except KeyError:
        raise ValidationError(f"unknown statistic {name!r}; known: {sorted(STATISTICS)}") from None


@dataclass(frozen=True)
class ResamplePlan:
    scheme: str
    block_len: int
    replicates: int
    master_seed: int
    statistic: str = "mean"

    def __post_init__(self):
        if self.scheme not in ("mbb", "nbb", "bobb"):
            raise ValidationError(f"unknown scheme {self.scheme!r}")
        if self.replicates < 1:
            raise ValidationError("need at least one replicate")


@dataclass
class BootstrapDistribution:
    samples: np.ndarray
    is_exact: bool = False
    probs: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None
    total: Optional[int] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.is_exact:
            if self.probs is None:
                self.probs = np.full(self.samples.shape, 1.0 / self.samples.size)
            if abs(math.fsum(self.probs) - 1.0) > 1e-12:
                raise ValidationError("atom probabilities must sum to one")

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        order = np.argsort(self.samples, kind="stable")
        s = self.samples[order]
        w = self.probs[order] if self.is_exact else np.full(s.size, 1.0 / s.size)
        cw = np.concatenate([[0.0], np.cumsum(w)])
        return cw[np.searchsorted(s, x, side="right")]

    def quantile(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        order = np.argsort(self.samples, kind="stable")
        s = self.samples[order]
        w = self.probs[order] if self.is_exact else np.full(s.size, 1.0 / s.size)
        cw = np.cumsum(w)
        idx = np.searchsorted(cw, q - 1e-12, side="left")
        return s[np.minimum(idx, s.size - 1)]

    def mean(self) -> float:
        if self.is_exact:
            return float(np.dot(self.probs, self.samples))
        return float(self.samples.mean())

    def collapsed(self):
        """Merge equal atoms: returns (values, probabilities)."""
        vals, inv = np.unique(self.samples, return_inverse=True)
        p = np.zeros(vals.size)
        np.add.at(p, inv, self.probs if self.is_exact else 1.0 / self.samples.size)
        return vals, p


def _check_divides(n, ell, what):
    if n % ell:
        raise ValidationError(f"{what} needs the block length to divide {n} (got {ell})")


def mbb_indices(n: int, ell: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Block start indices (0-based) for ``b = n / ell`` blocks drawn from N."""
    BlockConfig(n, ell)
    _check_divides(n, ell, "MBB")
    b, N = n // ell, n - ell + 1
    shape = (b,) if size is None else (size, b)
    return rng.integers(0, N, size=shape)


def _gather_blocks(x: np.ndarray, starts: np.ndarray, ell: int) -> np.ndarray:
    idx = starts[..., None] + np.arange(ell)
    return x[idx].reshape(starts.shape[:-1] + (-1,))


def mbb_resample(series, ell: int, rng: np.random.Generator) -> np.ndarray:
    x = as_array(series)
    return _gather_blocks(x, mbb_indices(x.shape[0], ell, rng), ell)


def nbb_resample(series, ell: int, rng: np.random.Generator) -> np.ndarray:
    x = as_array(series)
    n = x.shape[0]
    BlockConfig(n, ell)
    _check_divides(n, ell, "NBB")
    b = n // ell
    starts = rng.integers(0, b, size=b) * ell
    return _gather_blocks(x, starts, ell)


def mbb_expected_mean(series, ell: int) -> float:
    """``E_*`` of the MBB resample mean: the average of the N block means."""
    x = as_array(series)
    return float(block_sums(x, ell).mean() / ell)


def bootstrap_distribution(plan: ResamplePlan, series) -> BootstrapDistribution:
    """Monte Carlo bootstrap law; replicate ``r`` uses stream ``(seed, NS_BOOTSTRAP, r)``."""
    x = as_array(series)
    stat = get_statistic(plan.statistic)
    n, ell = x.shape[0], plan.block_len
    if plan.scheme == "bobb":
        raise ValidationError("use bobb_distribution for blocks-of-blocks plans")
    BlockConfig(n, ell)
    _check_divides(n, ell, plan.scheme.upper())
    b, N = n // ell, n - ell + 1
    hi = N if plan.scheme == "mbb" else b
    step = 1 if plan.scheme == "mbb" else ell
    starts = np.empty((plan.replicates, b), dtype=np.int64)
    for r in range(plan.replicates):
        starts[r] = stream(plan.master_seed, NS_BOOTSTRAP, r).integers(0, hi, size=b) * step
    out = np.empty(plan.replicates)
    chunk = max(1, 2_000_000 // n)
    for lo in range(0, plan.replicates, chunk):
        xs = _gather_blocks(x, starts[lo:lo + chunk], ell)
        out[lo:lo + chunk] = stat(xs, x, ell)
    return BootstrapDistribution(out)


def exact_enumeration(series, ell: int, statistic="mean") -> BootstrapDistribution:
    """Exact MBB law: all ``N^b`` equally likely block-index tuples."""
    x = as_array(series)
    n = x.shape[0]
    BlockConfig(n, ell)
    _check_divides(n, ell, "MBB")
    b, N = n // ell, n - ell + 1
    total = N ** b
    if total > ENUMERATION_CAP:
        raise ValidationError(f"enumeration of {total} resamples exceeds the cap {ENUMERATION_CAP}")
    stat = get_statistic(statistic) if isinstance(statistic, str) else statistic
    starts = np.array(list(itertools.product(range(N), repeat=b)), dtype=np.int64).reshape(total, b)
    vals = np.asarray(stat(_gather_blocks(x, starts, ell), x, ell), dtype=float)
    return BootstrapDistribution(vals, True, np.full(total, 1.0 / total),
                                 np.ones(total, dtype=np.int64), total)


# -- blocks of blocks ---------------------------------------------------------

def _y(blockvars) -> np.ndarray:
    y = blockvars.values if isinstance(blockvars, BlockVariables) else np.asarray(blockvars, dtype=float)
    if y.ndim != 1:
        raise ValidationError("BOBB is implemented for scalar block variables")
    return y


def _check_bobb(N, ell1):
    if not 1 <= ell1 <= N:
        raise ValidationError(f"BOBB block length {ell1} outside [1, {N}]")
    if N % ell1:
        raise ValidationError(f"BOBB needs ell1 | N (N={N}, ell1={ell1})")


def bobb_resample(blockvars, ell1: int, rng: np.random.Generator) -> np.ndarray:
    """Concatenate ``N / ell1`` runs of ``ell1`` consecutive block variables."""
    y = _y(blockvars)
    N = y.shape[0]
    _check_bobb(N, ell1)
    starts = rng.integers(0, N - ell1 + 1, size=N // ell1)
    return _gather_blocks(y, starts, ell1)[:N]


def bobb_expected_mean(blockvars, ell1: int) -> float:
    """``E_* Ybar*_N``: mean of the ell1-run averages over all N - ell1 + 1 starts."""
    y = _y(blockvars)
    _check_bobb(y.shape[0], ell1)
    return float(block_sums(y, ell1).mean() / ell1)


def _bobb_t(run_means: np.ndarray, expected: float, n: int) -> np.ndarray:
    b1 = run_means.shape[-1]
    ybar = run_means.mean(axis=-1)
    var = np.maximum(1.0 / n, ((run_means - ybar[..., None]) ** 2).mean(axis=-1))
    return math.sqrt(b1) * (ybar - expected) / np.sqrt(var)


def bobb_studentized(resampled, ell1: int, *, n: int, expected: float) -> StudentizedStat:
    """``T*_N = sqrt(b1) (Ybar* - E_* Ybar*) / sigma*`` for one BOBB resample."""
    y = np.asarray(resampled, dtype=float)
    N = y.shape[0]
    _check_bobb(N, ell1)
    b1 = N // ell1
    means = y.reshape(b1, ell1).mean(axis=1)
    ybar = means.mean()
    var = max(1.0 / n, float(((means - ybar) ** 2).mean()))
    num = math.sqrt(b1) * (ybar - expected)
    return StudentizedStat(num / math.sqrt(var), num, math.sqrt(var))


def bobb_distribution(blockvars, ell1: int, replicates: int, seed: int, *, n: int,
                      path: tuple = (NS_BOOTSTRAP,)) -> BootstrapDistribution:
    """Monte Carlo law of ``T*_N``; replicate ``r`` uses stream ``(seed, *path, r)``.

    A resampled run's average is the average of the chosen original run, so the
    replicates are assembled from the precomputed run averages.
    """
    y = _y(blockvars)
    N = y.shape[0]
    _check_bobb(N, ell1)
    b1, M = N // ell1, N - ell1 + 1
    run_means = block_sums(y, ell1) / ell1
    expected = float(run_means.mean())
    starts = np.empty((replicates, b1), dtype=np.int64)
    for r in range(replicates):
        starts[r] = stream(seed, *path, r).integers(0, M, size=b1)
    out = np.empty(replicates)
    chunk = max(1, 4_000_000 // b1)
    for lo in range(0, replicates, chunk):
        out[lo:lo + chunk] = _bobb_t(run_means[starts[lo:lo + chunk]], expected, n)
    return BootstrapDistribution(out)


QUANTILE_LEVELS = (0.025, 0.05, 0.5, 0.95, 0.975)
