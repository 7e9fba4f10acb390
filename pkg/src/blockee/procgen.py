"""Synthetic weakly dependent processes with known second-order structure.

Two families are provided: finite moving averages (causal linear processes)
and m-dependent transforms of an i.i.d. innovation window.  Each generated
:class:`TimeSeries` carries the population quantities of the process that made
it (:class:`ProcessTruth`), so estimators can be checked against a target.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .rng import NS_SIDE_MC, stream

INNOVATIONS = ("normal", "exponential", "uniform")

# third and fourth cumulants of the unit-variance innovation
_INNOV_KAPPA3 = {"normal": 0.0, "exponential": 2.0, "uniform": 0.0}
_INNOV_KAPPA4 = {"normal": 0.0, "exponential": 6.0, "uniform": -1.2}


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


def draw_innovations(innov: str, variance: float, rng: np.random.Generator, shape) -> np.ndarray:
    """Zero-mean innovations with the given variance."""
    sd = math.sqrt(variance)
    if innov == "normal":
        e = rng.standard_normal(shape)
    elif innov == "exponential":
        e = rng.standard_exponential(shape) - 1.0
    elif innov == "uniform":
        r3 = math.sqrt(3.0)
        e = rng.uniform(-r3, r3, shape)
    else:
        raise ValidationError(f"unknown innovation distribution {innov!r}")
    if sd != 1.0:
        e *= sd
    return e


def innovation_cumulant(innov: str, variance: float, order: int) -> float:
    """Cumulant of order 2, 3 or 4 of the scaled innovation."""
    if order == 2:
        return variance
    table = {3: _INNOV_KAPPA3, 4: _INNOV_KAPPA4}[order]
    return table[innov] * variance ** (order / 2)


@dataclass(frozen=True)
class LinearProcessSpec:
    """``X_j = sum_{i=0}^{J} a_i e_{j-i}`` with i.i.d. innovations ``e``."""

    coeffs: tuple
    innov: str = "normal"
    innov_variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(a) for a in np.atleast_1d(self.coeffs)))
        if len(self.coeffs) == 0:
            raise ValidationError("need at least one coefficient")
        if not all(math.isfinite(a) for a in self.coeffs):
            raise ValidationError("coefficients must be finite")
        if sum(self.coeffs) == 0.0:
            raise ValidationError("coefficients sum to zero: degenerate long-run variance")
        if self.innov not in INNOVATIONS:
            raise ValidationError(f"innovation must be one of {INNOVATIONS}")
        if not self.innov_variance > 0:
            raise ValidationError("innovation variance must be positive")

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def to_dict(self) -> dict:
        return {"kind": "linear", "coeffs": list(self.coeffs), "innov": self.innov,
                "innov_variance": self.innov_variance}


# built-in window maps for m-dependent processes, with their means under
# zero-mean innovations (all three are exactly zero)
_H_MENU = {
    "identity": lambda w: w[..., 0],
    "sum": lambda w: w.sum(axis=-1),
    "product": lambda w: w.prod(axis=-1),
}

SIDE_MC_DRAWS = 1_000_000


@dataclass(frozen=True)
class MDependentSpec:
    """``X_i = h(e_i, ..., e_{i+m0-1}) - E h``.

    ``h`` is either a menu name (``identity``, ``sum``, ``product``) or a
    vectorised callable mapping an array of shape ``(..., m0)`` to ``(...)``.
    For callables the centring constant is estimated once from
    ``SIDE_MC_DRAWS`` windows drawn on a dedicated stream.
    """

    m0: int
    h: Union[str, Callable] = "identity"
    innov: str = "normal"
    innov_variance: float = 1.0
    side_seed: int = 0

    def __post_init__(self):
        if int(self.m0) < 1:
            raise ValidationError("m0 must be >= 1")
        if isinstance(self.h, str) and self.h not in _H_MENU:
            raise ValidationError(f"unknown window map {self.h!r}")
        if self.innov not in INNOVATIONS:
            raise ValidationError(f"innovation must be one of {INNOVATIONS}")
        if not self.innov_variance > 0:
            raise ValidationError("innovation variance must be positive")

    @property
    def hfunc(self) -> Callable:
        return _H_MENU[self.h] if isinstance(self.h, str) else self.h

    def center(self) -> float:
        if isinstance(self.h, str):
            return 0.0
        return _side_mc_mean(self)

    def to_dict(self) -> dict:
        h = self.h if isinstance(self.h, str) else getattr(self.h, "__name__", "callable")
        return {"kind": "m_dependent", "m0": self.m0, "h": h, "innov": self.innov,
                "innov_variance": self.innov_variance}


_side_cache: dict = {}


def _side_mc_mean(spec: MDependentSpec) -> float:
    key = (id(spec.h), spec.m0, spec.innov, spec.innov_variance, spec.side_seed)
    if key not in _side_cache:
        rng = stream(spec.side_seed, NS_SIDE_MC)
        w = draw_innovations(spec.innov, spec.innov_variance, rng, (SIDE_MC_DRAWS, spec.m0))
        v = np.asarray(spec.hfunc(w), dtype=float)
        # constant maps are centred exactly
        _side_cache[key] = float(v.flat[0]) if np.ptp(v) == 0 else math.fsum(v) / v.size
    return _side_cache[key]


@dataclass(frozen=True)
class ProcessTruth:
    """Population second-order structure of a stationary process.

    ``gamma_table[k]`` is the lag-k autocovariance for ``k < len(gamma_table)``;
    all higher lags are zero (every built-in process is finitely dependent).
    """

    gamma_table: tuple
    sigma_inf_sq: float
    weighted_gamma_sum: float
    transfer: Optional[tuple] = None  # moving-average coefficients, when linear
    innov_variance: float = 1.0

    def gamma(self, k) -> Union[float, np.ndarray]:
        k = np.abs(np.asarray(k))
        table = np.asarray(self.gamma_table)
        out = np.where(k < len(table), table[np.minimum(k, len(table) - 1)], 0.0)
        return float(out) if out.ndim == 0 else out

    def spectral(self, omega) -> Union[float, np.ndarray]:
        """Spectral density ``f(w) = (2 pi)^-1 sum_k gamma(k) cos(k w)``."""
        w = np.asarray(omega, dtype=float)
        if self.transfer is not None:
            a = np.asarray(self.transfer)
            j = np.arange(len(a))
            h = (a * np.exp(-1j * np.multiply.outer(w, j))).sum(axis=-1)
            out = self.innov_variance / (2 * np.pi) * np.abs(h) ** 2
        else:
            g = np.asarray(self.gamma_table)
            k = np.arange(1, len(g))
            out = (g[0] + 2 * (g[1:] * np.cos(np.multiply.outer(w, k))).sum(axis=-1)) / (2 * np.pi)
        return float(out) if np.ndim(out) == 0 else out

    def to_dict(self) -> dict:
        return {"gamma": list(self.gamma_table), "sigma_inf_sq": self.sigma_inf_sq,
                "weighted_gamma_sum": self.weighted_gamma_sum}


def derive_truth(spec: LinearProcessSpec) -> ProcessTruth:
    a = np.asarray(spec.coeffs)
    s2 = spec.innov_variance
    J = len(a) - 1
    gam = tuple(float(s2 * np.dot(a[: J + 1 - k], a[k:])) for k in range(J + 1))
    return ProcessTruth(
        gamma_table=gam,
        sigma_inf_sq=float(s2 * a.sum() ** 2),
        weighted_gamma_sum=float(sum(k * g for k, g in enumerate(gam))),
        transfer=tuple(a),
        innov_variance=s2,
    )


def m_dependent_truth(spec: MDependentSpec) -> Optional[ProcessTruth]:
    """Analytic truth for the built-in window maps; ``None`` for callables."""
    if spec.h == "identity":
        return derive_truth(LinearProcessSpec((1.0,), spec.innov, spec.innov_variance))
    if spec.h == "sum":
        return derive_truth(LinearProcessSpec((1.0,) * spec.m0, spec.innov, spec.innov_variance))
    if spec.h == "product":
        # distinct windows share at least one innovation that appears once -> uncorrelated
        g0 = spec.innov_variance ** spec.m0
        return ProcessTruth((g0,), g0, 0.0, None, spec.innov_variance)
    return None


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    truth: Optional[ProcessTruth] = None
    seed: Optional[int] = None
    spec: Optional[object] = field(default=None, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 0 or v.shape[0] < 1:
            raise ValidationError("a series needs at least one value")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.n

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def linear_paths(spec: LinearProcessSpec, n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Draw ``size`` independent stationary paths of length ``n`` (shape ``(size, n)``).

    ``J`` burn-in innovations precede each path, so every ``X_j`` is an exact
    draw from the stationary law.
    """
    a = spec.coeffs
    J = len(a) - 1
    shape = (n + J,) if size is None else (size, n + J)
    e = draw_innovations(spec.innov, spec.innov_variance, rng, shape)
    x = a[0] * e[..., J:]
    for i in range(1, J + 1):
        x += a[i] * e[..., J - i: J - i + n]
    return x


def m_dependent_paths(spec: MDependentSpec, n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    m0 = int(spec.m0)
    shape = (n + m0 - 1,) if size is None else (size, n + m0 - 1)
    e = draw_innovations(spec.innov, spec.innov_variance, rng, shape)
    w = np.lib.stride_tricks.sliding_window_view(e, m0, axis=-1)
    return np.asarray(spec.hfunc(w), dtype=float) - spec.center()


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValidationError("series length must be a positive integer")


def gen_linear(spec: LinearProcessSpec, n: int, seed: int) -> TimeSeries:
    _check_n(n)
    x = linear_paths(spec, int(n), stream(seed))
    return TimeSeries(x, derive_truth(spec), seed, spec)


def gen_m_dependent(spec: MDependentSpec, n: int, seed: int) -> TimeSeries:
    _check_n(n)
    x = m_dependent_paths(spec, int(n), stream(seed))
    return TimeSeries(x, m_dependent_truth(spec), seed, spec)


def paths(spec, n: int, rng: np.random.Generator, size=None) -> np.ndarray:
    if isinstance(spec, LinearProcessSpec):
        return linear_paths(spec, n, rng, size)
    return m_dependent_paths(spec, n, rng, size)


def truth_of(spec) -> Optional[ProcessTruth]:
    if isinstance(spec, LinearProcessSpec):
        return derive_truth(spec)
    return m_dependent_truth(spec)


def spec_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", "linear")
    if kind == "linear":
        return LinearProcessSpec(tuple(d["coeffs"]), d.get("innov", "normal"),
                                 float(d.get("innov_variance", 1.0)))
    if kind == "m_dependent":
        return MDependentSpec(int(d["m0"]), d.get("h", "identity"), d.get("innov", "normal"),
                              float(d.get("innov_variance", 1.0)))
    raise ValidationError(f"unknown process kind {kind!r}")


# -- serialisation -----------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.17g}"


def series_to_csv(series: Union[TimeSeries, Sequence[float]]) -> str:
    vals = series.values if isinstance(series, TimeSeries) else np.asarray(series, dtype=float)
    return "x\n" + "".join(_fmt(v) + "\n" for v in vals)


def series_from_csv(text: str) -> TimeSeries:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["x"]:
        raise ValidationError("CSV series must have the single header 'x'")
    return TimeSeries([float(r[0]) for r in rows[1:] if r])


def series_to_json(series: TimeSeries) -> str:
    rec = {
        "spec": series.spec.to_dict() if series.spec is not None else None,
        "seed": series.seed,
        "n": series.n,
        "values": [float(_fmt(v)) for v in series.values],
    }
    return json.dumps(rec)


def series_from_json(text: str) -> TimeSeries:
    rec = json.loads(text)
    spec = spec_from_dict(rec["spec"]) if rec.get("spec") else None
    vals = np.asarray(rec["values"], dtype=float)
    if len(vals) != rec["n"]:
        raise ValidationError("record length does not match n")
    return TimeSeries(vals, truth_of(spec) if spec is not None else None, rec.get("seed"), spec)
