"""Distances and tail functionals used to score Monte Carlo experiments."""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..procgen import ValidationError


def ks_distance(samples, reference_cdf: Callable) -> float:
    """Exact ``sup_x |F_R(x) - F(x)|`` for the empirical CDF of ``samples``.

    The supremum of a step function against a continuous CDF is attained at
    a jump, so only the order statistics need checking.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    R = x.size
    if R == 0:
        raise ValidationError("need at least one sample")
    F = np.asarray(reference_cdf(x), dtype=float)
    i = np.arange(1, R + 1)
    return float(max(np.max(np.abs(i / R - F)), np.max(np.abs((i - 1) / R - F))))


def ks_two_sample(a, b) -> float:
    """``sup_x |F_a(x) - F_b(x)|`` between two empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise ValidationError("need at least one sample in each set")
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def deviation_threshold(s: int, lam: float, n: int) -> float:
    return math.sqrt((s - 2) * lam * math.log(n))


def moderate_deviation_stat(samples, s: int, lam: float, n: int) -> float:
    """Average of ``(1 + |S|^{s0}) 1{|S| > sqrt((s-2) lam log n)}``, ``s0 = 2 floor(s/2)``.

    ``samples`` holds scalar draws or vectors (last axis), whose Euclidean
    norm is used.
    """
    if s < 3:
        raise ValidationError("s must be at least 3")
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    v = np.asarray(samples, dtype=float)
    norm = np.abs(v) if v.ndim <= 1 else np.linalg.norm(v, axis=-1)
    s0 = 2 * (s // 2)
    hit = norm > deviation_threshold(s, lam, n)
    return float(np.mean((1.0 + norm ** s0) * hit))


def moment_diagnostic_hs(values, s: int) -> float:
    """Sample mean of ``u^s [log(1 + u)]^{2 s^2}`` at ``u = |v|``."""
    if s < 3:
        raise ValidationError("s must be at least 3")
    u = np.abs(np.asarray(values, dtype=float))
    return float(np.mean(u ** s * np.log1p(u) ** (2 * s * s)))
