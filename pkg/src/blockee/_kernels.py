"""Compiled row kernels for the heavy Monte Carlo loops.

Each kernel reproduces a numpy reference in :mod:`blockee.blocks` or
:mod:`blockee.estimators` (agreement is asserted in the test suite); they
exist only because the BOBB experiment needs ~10^5 outer replicates at
n = 20000.
"""
from __future__ import annotations

import math

import numba
import numpy as np


@numba.njit(cache=True)
def _periodogram_rows(x, ell, omega, out):
    R, n = x.shape
    N = n - ell + 1
    c = np.cos(omega * np.arange(1, n + 1))
    s = np.sin(omega * np.arange(1, n + 1))
    scale = 1.0 / (2.0 * math.pi * ell)
    for r in range(R):
        re = 0.0
        im = 0.0
        for j in range(ell):
            re += x[r, j] * c[j]
            im += x[r, j] * s[j]
        out[r, 0] = (re * re + im * im) * scale
        for i in range(1, N):
            j0 = i - 1
            j1 = i + ell - 1
            re += x[r, j1] * c[j1] - x[r, j0] * c[j0]
            im += x[r, j1] * s[j1] - x[r, j0] * s[j0]
            out[r, i] = (re * re + im * im) * scale


def periodogram_rows(x: np.ndarray, ell: int, omega: float) -> np.ndarray:
    x = np.ascontiguousarray(np.atleast_2d(x), dtype=float)
    out = np.empty((x.shape[0], x.shape[1] - ell + 1))
    _periodogram_rows(x, ell, float(omega), out)
    return out


@numba.njit(cache=True)
def _lag_window_rows(y, ell, n, out, trunc):
    R, N = y.shape
    L = 2 * ell
    b = -(-n // ell)
    d = np.zeros(N + L)
    g = np.empty(L + 1)
    for r in range(R):
        tot = 0.0
        for i in range(N):
            tot += y[r, i]
        m = tot / N
        for i in range(N):
            d[i] = y[r, i] - m
        g[:] = 0.0
        for i in range(N):
            di = d[i]
            for k in range(L + 1):
                g[k] += di * d[i + k]
        acc = g[0]
        for k in range(1, L + 1):
            acc += 2.0 * (1.0 - k / N) * g[k]
        raw = acc / N * b / N
        trunc[r] = raw < 1.0 / n
        out[r] = raw if raw >= 1.0 / n else 1.0 / n


def lag_window_rows(y: np.ndarray, ell: int, n: int):
    y = np.ascontiguousarray(np.atleast_2d(y), dtype=float)
    if 2 * ell > y.shape[1] - 1:
        raise ValueError("lag window needs 2*ell <= N - 1")
    out = np.empty(y.shape[0])
    trunc = np.empty(y.shape[0], dtype=np.bool_)
    _lag_window_rows(y, ell, n, out, trunc)
    return out, trunc


def studentized_periodogram_rows(x: np.ndarray, ell: int, omega: float, true_mean: float) -> np.ndarray:
    """``T_N`` for periodogram block variables, one value per row of ``x``."""
    n = x.shape[-1]
    y = periodogram_rows(x, ell, omega)
    v, _ = lag_window_rows(y, ell, n)
    b = -(-n // ell)
    return math.sqrt(b) * (y.mean(axis=1) - true_mean) / np.sqrt(v)
