"""Overlapping blocks, block variables and the scaled sums built from them.

Indices in docstrings are 1-based to match the usual notation; arrays are
0-based, so block ``i`` is ``x[i-1:i-1+ell]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from .procgen import TimeSeries, ValidationError


def as_array(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float)


@dataclass(frozen=True)
class BlockConfig:
    n: int
    ell: int

    def __post_init__(self):
        if not (1 <= self.ell <= self.n):
            raise ValidationError(f"block length {self.ell} outside [1, {self.n}]")

    @property
    def N(self) -> int:
        return self.n - self.ell + 1

    @property
    def b(self) -> int:
        return -(-self.n // self.ell)

    @property
    def b_tilde(self) -> Fraction:
        return Fraction(self.n, self.ell)


@dataclass(frozen=True)
class BlockFunctional:
    """A map from one block to a value in R^d1.

    Use the constructors :func:`scaled_sum_f`, :func:`power`,
    :func:`periodogram` and :func:`weighted_cosine`.
    """

    tag: str
    nu: Optional[tuple] = None
    omega: Optional[float] = None
    lam: Optional[float] = None
    weights: Optional[tuple] = None

    @property
    def output_dim(self) -> int:
        return 1


def scaled_sum_f() -> BlockFunctional:
    return BlockFunctional("scaled_sum")


def power(nu) -> BlockFunctional:
    nu = tuple(int(v) for v in np.atleast_1d(nu))
    if any(v < 0 for v in nu) or sum(nu) == 0:
        raise ValidationError("power functional needs a multi-index with |nu| >= 1")
    return BlockFunctional("power", nu=nu)


def periodogram(omega: float) -> BlockFunctional:
    if not -np.pi <= omega <= np.pi:
        raise ValidationError("frequency must lie in [-pi, pi]")
    return BlockFunctional("periodogram", omega=float(omega))


def weighted_cosine(lam: float, weights) -> BlockFunctional:
    """``Y_i = X_i * sum_{k=0}^{ell-1} w_k X_{i+k} cos(k lam)`` (weights length ell)."""
    return BlockFunctional("weighted_cosine", lam=float(lam), weights=tuple(float(w) for w in weights))


@dataclass(frozen=True)
class BlockVariables:
    config: BlockConfig
    values: np.ndarray
    centered: bool = False
    center: float = 0.0
    center_source: Optional[str] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape[0] != self.config.N:
            raise ValidationError(f"expected {self.config.N} block variables, got {v.shape[0]}")
        if not np.all(np.isfinite(self.center)):
            raise ValidationError("centring constant must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def padded(self) -> np.ndarray:
        """Values extended by zeros to length n (``Y_i = 0`` for ``i > N``)."""
        pad = [(0, self.config.n - self.config.N)] + [(0, 0)] * (self.values.ndim - 1)
        return np.pad(self.values, pad)

    def to_csv(self) -> str:
        v = self.values.reshape(self.config.N, -1)
        head = "i," + ",".join(f"y_{j + 1}" for j in range(v.shape[1]))
        lines = [head] + [f"{i + 1}," + ",".join(f"{y:.17g}" for y in row) for i, row in enumerate(v)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ScaledSum:
    s1: np.ndarray
    s2: np.ndarray


def overlapping_blocks(series, ell: int) -> Iterator[np.ndarray]:
    """Yield the N = n - ell + 1 overlapping blocks as read-only views."""
    x = as_array(series)
    BlockConfig(x.shape[0], ell)
    w = np.lib.stride_tricks.sliding_window_view(x, ell, axis=0)
    for i in range(w.shape[0]):
        yield w[i]


# -- vectorised kernels over the last axis -----------------------------------

def block_sums(x: np.ndarray, ell: int) -> np.ndarray:
    """Sliding sums of length ``ell`` along the last axis (O(n))."""
    c = np.cumsum(x, axis=-1)
    out = c[..., ell - 1:].copy()
    out[..., 1:] -= c[..., :-ell]
    return out


def scaled_block_sums(x: np.ndarray, ell: int) -> np.ndarray:
    """``U_i = (X_i + ... + X_{i+ell-1}) / sqrt(ell)`` along the last axis."""
    return block_sums(x, ell) / math.sqrt(ell)


def periodogram_values(x: np.ndarray, ell: int, omega: float) -> np.ndarray:
    """``(2 pi ell)^-1 |sum_{j=i}^{i+ell-1} X_j exp(-i j omega)|^2`` along the last axis."""
    n = x.shape[-1]
    phase = np.exp(-1j * omega * np.arange(1, n + 1))
    z = block_sums(x * phase, ell)
    return (z.real ** 2 + z.imag ** 2) / (2 * np.pi * ell)


def _weighted_cosine_values(x: np.ndarray, ell: int, lam: float, weights) -> np.ndarray:
    w = np.asarray(weights) * np.cos(lam * np.arange(ell))
    N = x.shape[-1] - ell + 1
    acc = np.zeros(x.shape[:-1] + (N,))
    for k in range(ell):
        acc += w[k] * x[..., k:k + N]
    return x[..., :N] * acc


def functional_values(x: np.ndarray, ell: int, functional: BlockFunctional) -> np.ndarray:
    """Evaluate a univariate block functional along the last axis of ``x``."""
    tag = functional.tag
    if tag == "scaled_sum":
        return scaled_block_sums(x, ell)
    if tag == "power":
        if len(functional.nu) != 1:
            raise ValidationError("multi-index length must match the series dimension")
        return scaled_block_sums(x, ell) ** functional.nu[0]
    if tag == "periodogram":
        return periodogram_values(x, ell, functional.omega)
    if tag == "weighted_cosine":
        if len(functional.weights) != ell:
            raise ValidationError("weighted_cosine needs ell weights")
        return _weighted_cosine_values(x, ell, functional.lam, functional.weights)
    raise ValidationError(f"unknown functional {tag!r}")


def eval_block_functional(series, ell: int, functional: BlockFunctional) -> BlockVariables:
    x = as_array(series)
    cfg = BlockConfig(x.shape[0], ell)
    if x.ndim == 1:
        vals = functional_values(x, ell, functional)
    elif functional.tag in ("scaled_sum", "power"):
        # multivariate: x has shape (n, d0)
        u = scaled_block_sums(x.T, ell).T  # (N, d0)
        if functional.tag == "scaled_sum":
            vals = u
        else:
            if len(functional.nu) != x.shape[1]:
                raise ValidationError("multi-index length must match the series dimension")
            vals = np.prod(u ** np.asarray(functional.nu), axis=1)
    else:
        raise ValidationError(f"{functional.tag} is defined for univariate series only")
    return BlockVariables(cfg, vals)


def nonoverlap_block_means(series, blockvars: BlockVariables, ell: Optional[int] = None) -> np.ndarray:
    """Rows ``W_k = (sqrt(ell) Xbar_k, Ybar_k)``, k = 1..b.

    Both means divide by ``ell``, including for a short final block, and the
    block variables are zero beyond index N.
    """
    x = as_array(series)
    cfg = blockvars.config
    if ell is not None and ell != cfg.ell:
        raise ValidationError("block length does not match the block variables")
    if x.shape[0] != cfg.n:
        raise ValidationError("series and block variables disagree on n")
    ell, b = cfg.ell, cfg.b
    pad = b * ell - cfg.n

    def means(v):
        v = v.reshape(cfg.n, -1)
        v = np.pad(v, [(0, pad), (0, 0)])
        return v.reshape(b, ell, -1).sum(axis=1) / ell

    xbar = means(x)
    ybar = means(blockvars.padded())
    return np.hstack([math.sqrt(ell) * xbar, ybar])


def scaled_sum(series, blockvars: BlockVariables) -> ScaledSum:
    if not blockvars.centered:
        raise ValidationError("block variables must be centred before forming S_n")
    x = as_array(series)
    cfg = blockvars.config
    if x.shape[0] != cfg.n:
        raise ValidationError("series and block variables disagree on n")
    s1 = np.atleast_1d(x.sum(axis=0)) / math.sqrt(cfg.n)
    s2 = np.atleast_1d(blockvars.values.sum(axis=0)) / math.sqrt(cfg.n * cfg.ell)
    return ScaledSum(s1, s2)
