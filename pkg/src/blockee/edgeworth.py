"""Edgeworth expansions for scalar projections of block-variable sums.

Polynomials in the formal variable ``z = (i t)`` are stored as coefficient
arrays, ``c[k]`` multiplying ``z**k``.  Hermite polynomials use the
probabilists' convention ``He_k``, for which a density term
``c z^k exp(-sigma^2 t^2 / 2)`` in the characteristic function inverts to the
distribution-function term ``-c sigma^-k He_{k-1}(x / sigma) phi(x / sigma)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import stats
from scipy.special import ndtr

from .procgen import LinearProcessSpec, ValidationError, derive_truth, innovation_cumulant

MAX_ORDER = 6
_SQRT2PI = math.sqrt(2 * math.pi)


def _phi(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT2PI


def hermite_e(k: int, x):
    """Probabilists' Hermite polynomial ``He_k(x)`` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    if k < 0:
        raise ValueError("negative degree")
    h0, h1 = np.ones_like(x), x
    if k == 0:
        return h0
    for j in range(1, k):
        h0, h1 = h1, x * h1 - j * h0
    return h1


@dataclass(frozen=True)
class CumulantVector:
    chi: tuple  # (chi_2, ..., chi_s)
    source: str = "analytic"

    def __post_init__(self):
        chi = tuple(float(c) for c in self.chi)
        object.__setattr__(self, "chi", chi)
        if len(chi) < 2:
            raise ValidationError("need at least chi_2 and chi_3")
        if len(chi) + 1 > MAX_ORDER:
            raise ValidationError(f"cumulant orders above {MAX_ORDER} are not supported")
        if not all(math.isfinite(c) for c in chi):
            raise ValidationError("cumulants must be finite")
        if not chi[0] > 0:
            raise ValidationError("chi_2 must be positive")

    @property
    def order(self) -> int:
        return len(self.chi) + 1

    def __getitem__(self, r: int) -> float:
        """Cumulant of order ``r`` (2 <= r <= s); zero above the stored order."""
        if r < 2:
            raise IndexError(r)
        return self.chi[r - 2] if r - 2 < len(self.chi) else 0.0


def _central_moment_cumulants(x: np.ndarray, max_order: int) -> list:
    d = x - x.mean()
    m = {k: float(np.mean(d ** k)) for k in range(2, max_order + 1)}
    out = [m[2], m.get(3)]
    if max_order >= 4:
        out.append(m[4] - 3 * m[2] ** 2)
    if max_order >= 5:
        out.append(m[5] - 10 * m[3] * m[2])
    if max_order >= 6:
        out.append(m[6] - 15 * m[4] * m[2] - 10 * m[3] ** 2 + 30 * m[2] ** 3)
    return out[: max_order - 1]


def sample_cumulants(samples, max_order: int = 4, mode: str = "k-statistic") -> CumulantVector:
    """Cumulants 2..max_order of a sample.

    ``mode="k-statistic"`` gives unbiased k-statistics for orders 2-4 and the
    (biased) central-moment formulas for orders 5-6; ``mode="central-moment"``
    uses the central-moment formulas throughout.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if not 3 <= max_order <= MAX_ORDER:
        raise ValidationError(f"max_order must be in [3, {MAX_ORDER}]")
    if x.size < max_order + 1:
        raise ValidationError(f"need at least {max_order + 1} samples for order {max_order}")
    cm = _central_moment_cumulants(x, max_order)
    if mode == "central-moment":
        return CumulantVector(tuple(cm), "central-moment")
    if mode != "k-statistic":
        raise ValidationError(f"unknown mode {mode!r}")
    ks = [float(stats.kstat(x, r)) for r in range(2, min(max_order, 4) + 1)]
    return CumulantVector(tuple(ks + cm[len(ks):]), "k-statistic")


@dataclass(frozen=True)
class ExpansionPolys:
    s: int
    b_tilde: float
    polys: tuple  # polys[r-1] = coefficients of P_r in z = (i t)

    def evaluate(self, r: int, t) -> np.ndarray:
        """``P_r`` at real ``t`` (complex result)."""
        return P.polyval(1j * np.asarray(t, dtype=float), self.polys[r - 1])


def formal_expansion(cumulants: CumulantVector, b_tilde, s: Optional[int] = None) -> ExpansionPolys:
    """Coefficient-match ``exp(sum_{r=3}^s u^{r-2} bt^{(r-2)/2} chi_r z^r / r!) = 1 + sum_r u^r P_r``.

    The exponential is expanded as a power series in ``u`` truncated at
    ``u^{s-2}``; each coefficient is a polynomial in ``z``.
    """
    s = cumulants.order if s is None else int(s)
    if s < 3:
        raise ValidationError("order s must be at least 3")
    bt = float(Fraction(b_tilde)) if isinstance(b_tilde, Fraction) else float(b_tilde)
    top = s - 2
    # A[j] = coefficient of u^j in the exponent (j = 1..top), a polynomial in z
    A = [np.zeros(1)] + [
        np.concatenate([np.zeros(j + 2), [bt ** (j / 2) * cumulants[j + 2] / math.factorial(j + 2)]])
        for j in range(1, top + 1)
    ]
    # E = exp(A) via E' = A' E in u: m E_m = sum_{j=1}^{m} j A_j E_{m-j}
    E = [np.ones(1)]
    for m in range(1, top + 1):
        acc = np.zeros(1)
        for j in range(1, m + 1):
            acc = P.polyadd(acc, j * P.polymul(A[j], E[m - j]))
        E.append(acc / m)
    polys = tuple(np.trim_zeros(np.asarray(E[r], dtype=float), "b") if np.any(E[r]) else np.zeros(1)
                  for r in range(1, top + 1))
    return ExpansionPolys(s, bt, polys)


def ee_charfn(t, cumulants: CumulantVector, b_tilde, s: Optional[int] = None) -> np.ndarray:
    """Fourier transform of the order-(s-2) expansion at real ``t``."""
    ex = formal_expansion(cumulants, b_tilde, s)
    t = np.asarray(t, dtype=float)
    acc = np.ones_like(t, dtype=complex)
    for r in range(1, ex.s - 1):
        acc = acc + ex.b_tilde ** (-r / 2) * ex.evaluate(r, t)
    return np.exp(-cumulants.chi[0] * t * t / 2) * acc


def _ee_terms(cumulants, b_tilde, s):
    """Net coefficients ``c_k`` of ``z^k`` after the b_tilde weights, k >= 1."""
    ex = formal_expansion(cumulants, b_tilde, s)
    net = np.zeros(1)
    for r in range(1, ex.s - 1):
        net = P.polyadd(net, ex.b_tilde ** (-r / 2) * ex.polys[r - 1])
    return net


def ee_cdf(x, cumulants: CumulantVector, b_tilde, s: Optional[int] = None) -> np.ndarray:
    """Distribution function of the expansion, by term-wise Hermite inversion."""
    sigma = math.sqrt(cumulants.chi[0])
    z = np.asarray(x, dtype=float) / sigma
    out = ndtr(z)
    dens = _phi(z)
    for k, c in enumerate(_ee_terms(cumulants, b_tilde, s)):
        if k == 0 or c == 0:
            continue
        out = out - c * sigma ** (-k) * hermite_e(k - 1, z) * dens
    return out if np.ndim(out) else float(out)


def ee_density(x, cumulants: CumulantVector, b_tilde, s: Optional[int] = None) -> np.ndarray:
    sigma = math.sqrt(cumulants.chi[0])
    z = np.asarray(x, dtype=float) / sigma
    base = _phi(z) / sigma
    out = base.copy() if np.ndim(base) else base
    for k, c in enumerate(_ee_terms(cumulants, b_tilde, s)):
        if k == 0 or c == 0:
            continue
        out = out + c * sigma ** (-k) * hermite_e(k, z) * base
    return out


# -- Studentized sample mean --------------------------------------------------

@dataclass(frozen=True)
class StudentizedEEParams:
    """Population inputs to the first two correction polynomials.

    ``ez_cubed`` is ``E Z_n^3`` with ``Z_n = sqrt(n)(Xbar - mu)``;
    ``ez_v`` is ``E Z_n V_n`` with ``V_n = b^-1/2 sum_i (U_i^2 - E U^2)`` over
    the ``b = n / ell`` nonoverlapping blocks.
    """

    sigma_inf_sq: float
    weighted_gamma_sum: float
    n: int
    ell: int
    eu2: float
    ez_sq: float
    ez_cubed: float
    ez_v: float
    source: dict = field(default_factory=lambda: {"moments": "analytic"})

    def __post_init__(self):
        if not self.sigma_inf_sq > 0:
            raise ValidationError("sigma_inf_sq must be positive")
        if not self.eu2 > 0:
            raise ValidationError("E U^2 must be positive")


def p1_coefficient(params: StudentizedEEParams) -> float:
    """``p1(y) = A (y^2 - 1)``; returns A."""
    return params.weighted_gamma_sum / params.sigma_inf_sq * params.n ** (1 / 3) / params.ell


def p2_coefficients(params: StudentizedEEParams) -> tuple:
    """``p2(y) = B1 y + B3 (y^3 - 3 y)``; returns (B1, B3)."""
    e = params.eu2
    lz = math.sqrt(params.ell) * params.ez_v
    b1 = -lz / (2 * e ** 1.5)
    b3 = (math.sqrt(params.n) * params.ez_cubed * e ** -1.5 - 3 * e ** -2.5 * params.ez_sq * lz) / 6
    return b1, b3


def studentized_p1(y, params: StudentizedEEParams):
    return p1_coefficient(params) * (np.square(y) - 1)


def studentized_p2(y, params: StudentizedEEParams):
    if not params.eu2 > 0:
        raise ValidationError("E U^2 must be positive")
    b1, b3 = p2_coefficients(params)
    y = np.asarray(y, dtype=float)
    out = b1 * y + b3 * (y ** 3 - 3 * y)
    return out if out.ndim else float(out)


def studentized_ee_cdf(x, params: StudentizedEEParams, order: int = 2):
    """``Phi(x) + int_{-inf}^x phi(y) [n^-1/3 p1(y) + n^-1/2 p2(y)] dy`` (order 2).

    Uses ``int (y^2-1) phi = -y phi``, ``int y phi = -phi`` and
    ``int (y^3-3y) phi = -(y^2-1) phi``.
    """
    if order not in (0, 1, 2):
        raise ValidationError("only the first two correction terms are available")
    x = np.asarray(x, dtype=float)
    ph = _phi(x)
    out = ndtr(x)
    n = params.n
    if order >= 1:
        out = out - n ** (-1 / 3) * p1_coefficient(params) * x * ph
    if order >= 2:
        b1, b3 = p2_coefficients(params)
        out = out - n ** -0.5 * (b1 + b3 * (x * x - 1)) * ph
    return out if out.ndim else float(out)


def studentized_ee_density(x, params: StudentizedEEParams, order: int = 2):
    x = np.asarray(x, dtype=float)
    corr = 0.0
    if order >= 1:
        corr = corr + params.n ** (-1 / 3) * studentized_p1(x, params)
    if order >= 2:
        corr = corr + params.n ** -0.5 * studentized_p2(x, params)
    return _phi(x) * (1 + corr)


def _sum_weights(a: np.ndarray, lo: int, hi: int, length: int) -> np.ndarray:
    """Innovation weights of ``X_lo + ... + X_{hi-1}`` for a causal MA with coefficients a.

    Innovation e_t (t indexed from -J) gets index t + J in the returned array.
    """
    J = len(a) - 1
    ind = np.zeros(length + J)
    ind[lo + J: hi + J] = 1.0
    # weight of e_t = sum_i a_i 1{t + i in [lo, hi)}
    return np.convolve(ind, a[::-1], mode="full")[J: J + length + J]


def linear_studentized_params(spec: LinearProcessSpec, n: int, ell: int) -> StudentizedEEParams:
    """Exact moments for a finite moving average (third-order joint cumulants)."""
    if n % ell:
        raise ValidationError("need ell | n")
    a = np.asarray(spec.coeffs)
    truth = derive_truth(spec)
    s2 = spec.innov_variance
    k3 = innovation_cumulant(spec.innov, s2, 3)
    b = n // ell
    c_all = _sum_weights(a, 0, n, n)
    ez_sq = s2 * np.dot(c_all, c_all) / n
    ez3 = k3 * np.sum(c_all ** 3) / n ** 1.5
    c_blk = _sum_weights(a, 0, ell, n)
    eu2 = s2 * np.dot(c_blk, c_blk) / ell
    zv = 0.0
    for k in range(b):
        ck = _sum_weights(a, k * ell, (k + 1) * ell, n)
        # E[Z U_k^2] = n^-1/2 ell^-1 k3 sum_t c_all c_k^2
        zv += k3 * np.dot(c_all, ck * ck)
    ez_v = zv / (math.sqrt(n) * ell * math.sqrt(b))
    return StudentizedEEParams(truth.sigma_inf_sq, truth.weighted_gamma_sum, n, ell,
                               float(eu2), float(ez_sq), float(ez3), float(ez_v),
                               {"moments": "analytic"})


def mc_studentized_params(spec, n: int, ell: int, replicates: int, seed: int,
                          chunk: int = 2000) -> tuple:
    """Estimate the moment inputs by simulation.

    Returns ``(params, standard_errors)`` where the second item maps each
    moment name to its Monte Carlo standard error.
    """
    from .procgen import paths, truth_of
    from .rng import NS_SIDE_MC, stream

    if n % ell:
        raise ValidationError("need ell | n")
    truth = truth_of(spec)
    if truth is None:
        raise ValidationError("process has no analytic long-run variance")
    b = n // ell
    rng = stream(seed, NS_SIDE_MC, n, ell)
    zs, vs, u2 = [], [], []
    done = 0
    while done < replicates:
        m = min(chunk, replicates - done)
        x = paths(spec, n, rng, m)
        u = x.reshape(m, b, ell).sum(axis=2) / math.sqrt(ell)
        zs.append(x.sum(axis=1) / math.sqrt(n))
        u2.append(u * u)
        done += m
    z = np.concatenate(zs)
    uu = np.concatenate(u2)
    eu2 = float(uu.mean())
    v = (uu - eu2).sum(axis=1) / math.sqrt(b)
    est = {"ez_sq": z * z, "ez_cubed": z ** 3, "ez_v": z * v, "eu2": uu.mean(axis=1)}
    se = {k: float(np.std(val, ddof=1) / math.sqrt(val.size)) for k, val in est.items()}
    params = StudentizedEEParams(truth.sigma_inf_sq, truth.weighted_gamma_sum, n, ell, eu2,
                                 float(est["ez_sq"].mean()), float(est["ez_cubed"].mean()),
                                 float(est["ez_v"].mean()),
                                 {"moments": "mc", "replicates": replicates, "seed": seed})
    return params, se
