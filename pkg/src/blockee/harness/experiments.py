"""Monte Carlo experiments.

Every experiment produces one row per (ladder point, seed group).  Stochastic
inputs come from seed paths recorded in the row, so any row can be recomputed
on its own with :func:`run_row`.  Namespaces:

* ``(seed, NS_OUTER, i, g)``: replicates of the statistic (ee, mdev, mbbmom)
* ``(seed, NS_OUTER, i, 0, c)``: chunk ``c`` of the shared soc outer law
* ``(seed, NS_HELDOUT, i, g)`` / ``(seed, NS_INNER, i, g)``: soc held-out
  realisation and its BOBB draws
* ``(seed, NS_PILOT)``: pilot run for the deviation scale
* ``(seed, NS_SIDE_MC, i)``: side Monte Carlo centering constants

The asymptotic results probed here give rates with unspecified constants and
``(log n)^-2`` factors, so only directions and orderings along the ladder are
summarised.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.special import ndtr

from .. import __version__
from .._kernels import lag_window_rows, periodogram_rows
from ..blocks import scaled_block_sums
from ..edgeworth import linear_studentized_params, mc_studentized_params, studentized_ee_cdf
from ..estimators import mbb_variance_rows, studentized_mean_rows
from ..procgen import LinearProcessSpec, ValidationError, paths, truth_of
from ..resample import _bobb_t
from ..rng import NS_HELDOUT, NS_INNER, NS_OUTER, NS_PILOT, NS_SIDE_MC, child_seed, stream
from .config import ExperimentConfig
from .stats import (deviation_threshold, ks_distance, ks_two_sample,
                    moderate_deviation_stat, moment_diagnostic_hs)

OP_BUDGET = 10 ** 10
CELLS = 2_000_000  # scalars per generated chunk
LIMITATION = ("rates carry unspecified constants and (log n)^-2 factors that are not separable "
              "at these sample sizes; only directions and orderings along the ladder are assessed")


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class ExperimentResult:
    kind: str
    config: dict
    config_hash: str
    code_version: str
    rows: List[dict]
    summary: dict
    metadata: dict = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)  # kept out of to_dict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "config": self.config, "config_hash": self.config_hash,
                "code_version": self.code_version, "rows": self.rows, "summary": self.summary,
                "metadata": self.metadata}

    def rows_for(self, n: int) -> List[dict]:
        return [r for r in self.rows if r["n"] == n]


def _chunk_rows(n: int) -> int:
    return max(1, CELLS // n)


def _draw_in_chunks(spec, n: int, total: int, rng: np.random.Generator, fn: Callable) -> np.ndarray:
    """Apply ``fn`` to consecutive chunks of simulated paths and stack the results."""
    out = []
    step = _chunk_rows(n)
    for lo in range(0, total, step):
        out.append(fn(paths(spec, n, rng, min(step, total - lo))))
    return np.concatenate(out, axis=0)


# -- population constants -------------------------------------------------------

def expected_power(truth, ell: int, nu: int) -> Optional[float]:
    """``E U^nu`` for the scaled block sum when it is available in closed form."""
    if nu == 1:
        return 0.0
    if nu == 2 and truth is not None:
        h = np.arange(-(ell - 1), ell)
        return float(np.sum((ell - np.abs(h)) * truth.gamma(h)) / ell)
    return None


def expected_periodogram(truth, ell: int, omega: float) -> float:
    """``E Y`` for the block periodogram: ``(2 pi ell)^-1 sum_|h|<ell (ell-|h|) gamma(h) cos(h omega)``."""
    h = np.arange(-(ell - 1), ell)
    return float(np.sum((ell - np.abs(h)) * truth.gamma(h) * np.cos(h * omega)) / (2 * math.pi * ell))


def _side_mc(cfg: ExperimentConfig, i: int, fn: Callable) -> float:
    n = cfg.n_ladder[i]
    vals = _draw_in_chunks(cfg.process_spec(), n, cfg.side_replicates,
                           stream(cfg.master_seed, NS_SIDE_MC, i), fn)
    return float(np.mean(vals))


def _power_center(cfg, i, ell) -> tuple:
    e = expected_power(truth_of(cfg.process_spec()), ell, cfg.nu)
    if e is not None:
        return e, "analytic"
    return _side_mc(cfg, i, lambda x: (scaled_block_sums(x, ell) ** cfg.nu).mean(axis=-1)), "side-mc"


# -- statistic pipelines --------------------------------------------------------

def _moment_stat(cfg, i, ell, center):
    n = cfg.n_ladder[i]
    b = -(-n // ell)
    if cfg.variant == "moment":
        return lambda x: math.sqrt(b) * ((scaled_block_sums(x, ell) ** cfg.nu).mean(axis=-1) - center)
    if cfg.variant == "variance":
        return lambda x: math.sqrt(b) * n * (mbb_variance_rows(x, ell) - center)
    raise ValidationError(f"unknown variant {cfg.variant!r}")


def _scaled_sum_stat(cfg, i, ell, center):
    n = cfg.n_ladder[i]

    def fn(x):
        s1 = x.sum(axis=-1) / math.sqrt(n)
        s2 = ((scaled_block_sums(x, ell) ** cfg.nu) - center).sum(axis=-1) / math.sqrt(n * ell)
        if cfg.component == "s1":
            return s1
        if cfg.component == "s2":
            return s2
        return np.stack([s1, s2], axis=-1)
    if cfg.component not in ("s1", "s2", "joint"):
        raise ValidationError(f"unknown component {cfg.component!r}")
    return fn


def _tail_setup(cfg: ExperimentConfig, i: int):
    """Block length, centering constant and statistic for ladder point ``i``."""
    ell = cfg.block_length(i)
    if cfg.kind == "mbbmom":
        if cfg.variant == "variance":
            n = cfg.n_ladder[i]
            if n % ell:
                raise ValidationError("the variance variant needs ell | n")
            center, how = _side_mc(cfg, i, lambda x: mbb_variance_rows(x, ell)), "side-mc"
        else:
            center, how = _power_center(cfg, i, ell)
        return ell, center, how, _moment_stat(cfg, i, ell, center)
    center, how = _power_center(cfg, i, ell)
    return ell, center, how, _scaled_sum_stat(cfg, i, ell, center)


def _deviation_scale(cfg: ExperimentConfig) -> tuple:
    """Base scale multiplied by ``lam``: largest eigenvalue of the limiting covariance."""
    if cfg.lam_base == "one":
        return 1.0, "one"
    if cfg.lam_base == "analytic":
        truth = truth_of(cfg.process_spec())
        if cfg.kind == "mdev" and cfg.component == "s1" and truth is not None:
            return truth.sigma_inf_sq, "analytic"
        raise ValidationError("analytic scale only available for the s1 component")
    if cfg.lam_base != "pilot":
        raise ValidationError(f"unknown lam_base {cfg.lam_base!r}")
    i = len(cfg.n_ladder) - 1
    n = cfg.n_ladder[i]
    ell, center, _, fn = _tail_setup(cfg, i)
    if cfg.kind == "mbbmom":
        # lambda_3(nu) is the variance of sqrt(b)(mu_hat(nu) - E U^nu), for either variant
        c, _ = _power_center(cfg, i, ell)
        fn = _moment_stat(cfg.replace(variant="moment"), i, ell, c)
    v = _draw_in_chunks(cfg.process_spec(), n, cfg.pilot_replicates,
                        stream(cfg.master_seed, NS_PILOT), fn)
    if v.ndim == 1:
        return float(np.var(v)), "pilot"
    return float(np.linalg.eigvalsh(np.cov(v.T))[-1]), "pilot"


def _hs_probe(cfg, i, ell, group):
    """Moment-stress diagnostic on the nonoverlapping block sums of one path."""
    n = cfg.n_ladder[i]
    x = paths(cfg.process_spec(), n, stream(cfg.master_seed, NS_OUTER, i, group))
    b = n // ell
    u = x[: b * ell].reshape(b, ell).sum(axis=1) / math.sqrt(ell)
    return moment_diagnostic_hs(u, cfg.s)


# -- rows -----------------------------------------------------------------------

def _base_row(cfg, i, g, ell):
    return {"n": cfg.n_ladder[i], "ell": ell, "group": g, "ks_normal": None, "ks_ee": None,
            "ks_boot": None, "md_stat": None}


def _ee_row(cfg: ExperimentConfig, i: int, g: int, ctx: dict) -> dict:
    n = cfg.n_ladder[i]
    ell = cfg.block_length(i)
    params = ctx["params"][i]
    order = cfg.s - 2
    t = _draw_in_chunks(cfg.process_spec(), n, cfg.replicates,
                        stream(cfg.master_seed, NS_OUTER, i, g),
                        lambda x: studentized_mean_rows(x, ell, 0.0, cfg.nbb_incomplete))
    row = _base_row(cfg, i, g, ell)
    row["ks_normal"] = ks_distance(t, ndtr)
    row["ks_ee"] = ks_distance(t, lambda z: studentized_ee_cdf(z, params, order))
    row["ee_better"] = row["ks_ee"] < row["ks_normal"]
    row["seed_outer"] = child_seed(cfg.master_seed, NS_OUTER, i, g)
    return row


def _tail_row(cfg: ExperimentConfig, i: int, g: int, ctx: dict) -> dict:
    n = cfg.n_ladder[i]
    ell, center, how, fn = ctx["setup"][i]
    lam = cfg.lam * ctx["scale"]
    v = _draw_in_chunks(cfg.process_spec(), n, cfg.replicates,
                        stream(cfg.master_seed, NS_OUTER, i, g), fn)
    row = _base_row(cfg, i, g, ell)
    row["md_stat"] = moderate_deviation_stat(v, cfg.s, lam, n)
    norm = np.abs(v) if v.ndim == 1 else np.linalg.norm(v, axis=-1)
    row["exceedances"] = int(np.sum(norm > deviation_threshold(cfg.s, lam, n)))
    row["threshold"] = deviation_threshold(cfg.s, lam, n)
    row["center"] = center
    row["hs_diag"] = _hs_probe(cfg, i, ell, g)
    row["seed_outer"] = child_seed(cfg.master_seed, NS_OUTER, i, g)
    return row


def _soc_outer(cfg: ExperimentConfig, i: int, ell: int, true_mean: float) -> np.ndarray:
    n = cfg.n_ladder[i]
    spec = cfg.process_spec()
    b = -(-n // ell)
    step = _chunk_rows(n)
    out = np.empty(cfg.replicates)
    for c, lo in enumerate(range(0, cfg.replicates, step)):
        m = min(step, cfg.replicates - lo)
        x = paths(spec, n, stream(cfg.master_seed, NS_OUTER, i, 0, c), m)
        y = periodogram_rows(x, ell, cfg.omega)
        v, _ = lag_window_rows(y, ell, n)
        out[lo:lo + m] = math.sqrt(b) * (y.mean(axis=1) - true_mean) / np.sqrt(v)
    return out


def _soc_row(cfg: ExperimentConfig, i: int, g: int, ctx: dict) -> dict:
    n = cfg.n_ladder[i]
    ell, ell1 = cfg.block_length(i), cfg.bobb_length(i)
    outer = ctx["outer"].get(i)
    if outer is None:
        outer = ctx["outer"][i] = _soc_outer(cfg, i, ell, ctx["true_mean"][i])
    x = paths(cfg.process_spec(), n, stream(cfg.master_seed, NS_HELDOUT, i, g))
    y = periodogram_rows(x, ell, cfg.omega)[0]
    N = y.shape[0]
    b1, M = N // ell1, N - ell1 + 1
    c = np.cumsum(np.concatenate([[0.0], y]))
    run_means = (c[ell1:] - c[:-ell1]) / ell1
    expected = float(run_means.mean())
    rng = stream(cfg.master_seed, NS_INNER, i, g)
    tb = np.empty(cfg.boot_replicates)
    step = max(1, CELLS // b1)
    for lo in range(0, cfg.boot_replicates, step):
        m = min(step, cfg.boot_replicates - lo)
        tb[lo:lo + m] = _bobb_t(run_means[rng.integers(0, M, size=(m, b1))], expected, n)
    b = -(-n // ell)
    row = _base_row(cfg, i, g, ell)
    row["ell1"] = ell1
    row["ks_normal"] = ks_distance(outer, ndtr)
    row["ks_boot"] = ks_two_sample(outer, tb)
    row["sqrt_b_ks_boot"] = math.sqrt(b) * row["ks_boot"]
    row["boot_better"] = row["ks_boot"] < row["ks_normal"]
    row["seed_outer"] = child_seed(cfg.master_seed, NS_OUTER, i, 0)
    row["seed_heldout"] = child_seed(cfg.master_seed, NS_HELDOUT, i, g)
    row["seed_inner"] = child_seed(cfg.master_seed, NS_INNER, i, g)
    return row


# -- validation, budget and context ----------------------------------------------

def _validate(cfg: ExperimentConfig) -> None:
    lad = cfg.n_ladder
    ells = [cfg.block_length(i) for i in range(len(lad))]
    if cfg.kind == "ee":
        if cfg.statistic != "studentized-mean":
            raise ValidationError("the ee experiment uses the studentized-mean pipeline")
        if cfg.s - 2 > 2:
            raise ValidationError("only expansions of order <= 2 (s <= 4) are available")
        if truth_of(cfg.process_spec()) is None:
            raise ValidationError("the ee experiment needs a process with analytic truth")
        for n, ell in zip(lad, ells):
            if n % ell and cfg.nbb_incomplete != "drop":
                raise ValidationError(f"ell={ell} must divide n={n} for the NBB variance")
    elif cfg.kind == "soc":
        if cfg.statistic != "studentized-periodogram":
            raise ValidationError("the soc experiment uses the studentized-periodogram pipeline")
        if truth_of(cfg.process_spec()) is None:
            raise ValidationError("the soc experiment needs a process with analytic truth")
        ratios = []
        for i, (n, ell) in enumerate(zip(lad, ells)):
            N = n - ell + 1
            ell1 = cfg.bobb_length(i)
            if ell1 < 1 or N % ell1:
                raise ValidationError(f"ell1={ell1} does not divide N={N} at n={n}")
            if ell1 <= ell:
                raise ValidationError("ell1 must exceed ell")
            if ell > cfg.kappa_inv * n ** 0.2:
                raise ValidationError(f"ell={ell} exceeds kappa_inv * n^(1/5) at n={n}")
            if 2 * ell > N - 1:
                raise ValidationError("lag window needs 2 ell <= N - 1")
            ratios.append(ell1 / ell)
        if any(b <= a for a, b in zip(ratios, ratios[1:])):
            raise ValidationError("ell1/ell must increase along the ladder")
    elif cfg.kind == "mdev":
        if cfg.nu < 1:
            raise ValidationError("nu must be positive")
    elif cfg.kind == "mbbmom":
        if cfg.nu < 1:
            raise ValidationError("nu must be positive")


def estimate_ops(cfg: ExperimentConfig) -> int:
    """Rough scalar-operation count (about ten operations per simulated value)."""
    G, R, B = cfg.seed_groups, cfg.replicates, cfg.boot_replicates
    total = 0
    for i, n in enumerate(cfg.n_ladder):
        if cfg.kind == "soc":
            ell = cfg.block_length(i)
            b1 = (n - ell + 1) // max(1, cfg.bobb_length(i))
            total += R * n * (2 * ell + 10) + G * (B * b1 * 4 + n * (2 * ell + 10))
        else:
            total += G * R * n * 10
            if cfg.kind in ("mdev", "mbbmom"):
                total += cfg.side_replicates * n * 10 // len(cfg.n_ladder)
    if cfg.kind in ("mdev", "mbbmom") and cfg.lam_base == "pilot":
        total += cfg.pilot_replicates * cfg.n_ladder[-1] * 10
    return int(total)


def _context(cfg: ExperimentConfig) -> dict:
    ctx: dict = {"outer": {}}
    spec = cfg.process_spec()
    truth = truth_of(spec)
    if cfg.kind == "ee":
        ctx["params"] = {}
        for i, n in enumerate(cfg.n_ladder):
            ell = cfg.block_length(i)
            # with dropped trailing observations the statistic lives on the first b*ell points
            n = (n // ell) * ell
            if cfg.moments == "analytic":
                if not isinstance(spec, LinearProcessSpec):
                    raise ValidationError("analytic moments need a linear process")
                ctx["params"][i] = linear_studentized_params(spec, n, ell)
            elif cfg.moments == "mc":
                ctx["params"][i], _ = mc_studentized_params(spec, n, ell, cfg.side_replicates,
                                                            cfg.master_seed)
            else:
                raise ValidationError(f"unknown moments source {cfg.moments!r}")
    elif cfg.kind == "soc":
        ctx["true_mean"] = {i: expected_periodogram(truth, cfg.block_length(i), cfg.omega)
                            for i in range(len(cfg.n_ladder))}
    else:
        ctx["setup"] = {i: _tail_setup(cfg, i) for i in range(len(cfg.n_ladder))}
        ctx["scale"], ctx["scale_source"] = _deviation_scale(cfg)
    return ctx


_ROWS = {"ee": _ee_row, "soc": _soc_row, "mdev": _tail_row, "mbbmom": _tail_row}


def run_row(cfg: ExperimentConfig, i: int, group: int) -> dict:
    """Recompute a single row from the configuration alone."""
    _validate(cfg)
    return _ROWS[cfg.kind](cfg, i, group, _context(cfg))


def _median(v):
    return float(np.median(v))


def _summarise(cfg: ExperimentConfig, rows: List[dict]) -> dict:
    lad = list(cfg.n_ladder)
    by_n = {n: [r for r in rows if r["n"] == n] for n in lad}
    out: dict = {"per_n": {}}
    if cfg.kind == "ee":
        for n in lad:
            out["per_n"][str(n)] = {
                "median_ks_normal": _median([r["ks_normal"] for r in by_n[n]]),
                "median_ks_ee": _median([r["ks_ee"] for r in by_n[n]]),
                "groups_ee_better": sum(r["ee_better"] for r in by_n[n])}
        out["groups_ee_better_everywhere"] = sum(
            all(r["ee_better"] for r in rows if r["group"] == g) for g in range(cfg.seed_groups))
    elif cfg.kind == "soc":
        med = []
        for n in lad:
            m = _median([r["sqrt_b_ks_boot"] for r in by_n[n]])
            med.append(m)
            out["per_n"][str(n)] = {
                "ks_normal": by_n[n][0]["ks_normal"],
                "median_ks_boot": _median([r["ks_boot"] for r in by_n[n]]),
                "median_sqrt_b_ks_boot": m,
                "groups_boot_better": sum(r["boot_better"] for r in by_n[n])}
        out["sqrt_b_ks_boot_non_increasing"] = all(b <= a for a, b in zip(med, med[1:]))
    else:
        med = []
        for n in lad:
            m = _median([r["md_stat"] for r in by_n[n]])
            med.append(m)
            out["per_n"][str(n)] = {"median_md_stat": m,
                                    "median_hs_diag": _median([r["hs_diag"] for r in by_n[n]])}
        out["md_stat_strictly_decreasing"] = all(b < a for a, b in zip(med, med[1:]))
    return out


def run_experiment(cfg: ExperimentConfig, allow_large: bool = False,
                   progress: Optional[Callable[[str], None]] = None) -> ExperimentResult:
    _validate(cfg)
    ops = estimate_ops(cfg)
    if ops > OP_BUDGET and not allow_large:
        raise BudgetExceeded(f"estimated {ops:.3g} scalar ops exceeds the budget {OP_BUDGET:.0e}; "
                             "pass --allow-large to run anyway")
    timings: Dict[str, float] = {}
    t0 = time.perf_counter()
    ctx = _context(cfg)
    timings["setup"] = time.perf_counter() - t0
    rows = []
    for i, n in enumerate(cfg.n_ladder):
        for g in range(cfg.seed_groups):
            t1 = time.perf_counter()
            rows.append(_ROWS[cfg.kind](cfg, i, g, ctx))
            timings[f"n={n},group={g}"] = time.perf_counter() - t1
            if progress:
                progress(f"{cfg.kind} n={n} group={g} done in {timings[f'n={n},group={g}']:.1f}s")
    meta = {"estimated_ops": ops, "limitation": LIMITATION,
            "block_lengths": [cfg.block_length(i) for i in range(len(cfg.n_ladder))]}
    if cfg.kind == "soc":
        truth = truth_of(cfg.process_spec())
        f = truth.spectral(cfg.omega)
        meta.update({"ell1": [cfg.bobb_length(i) for i in range(len(cfg.n_ladder))],
                     "true_block_mean": [ctx["true_mean"][i] for i in range(len(cfg.n_ladder))],
                     "spectral_density": f, "limit_variance": 2.0 / 3.0 * f * f})
    elif cfg.kind == "ee":
        meta["moments"] = cfg.moments
        meta["ee_order"] = cfg.s - 2
    else:
        meta.update({"deviation_scale": ctx["scale"], "deviation_scale_source": ctx["scale_source"],
                     "lambda": cfg.lam * ctx["scale"],
                     "center_source": [ctx["setup"][i][2] for i in range(len(cfg.n_ladder))]})
    timings["total"] = time.perf_counter() - t0
    return ExperimentResult(cfg.kind, cfg.to_dict(), cfg.digest(), __version__, rows,
                            _summarise(cfg, rows), meta, timings)
