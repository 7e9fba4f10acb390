"""Command line entry point: ``blockee <command> ...``.

Exit codes: 0 success, 2 validation error, 3 budget refusal.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np
from scipy.special import ndtr

from .. import blocks, estimators, procgen, resample
from ..edgeworth import CumulantVector, StudentizedEEParams, ee_cdf, studentized_ee_cdf
from .config import ExperimentConfig, load_config
from .experiments import BudgetExceeded, run_experiment
from .persist import write_result

EXIT_OK, EXIT_INVALID, EXIT_BUDGET = 0, 2, 3


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _read_series(path) -> np.ndarray:
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json"):
        return procgen.series_from_json(text).values
    return procgen.series_from_csv(text).values


def _process_from_args(a):
    if a.config:
        return load_config(a.config).process_spec()
    if a.process == "linear":
        return procgen.LinearProcessSpec(_floats(a.coeffs), a.innov, a.innov_variance)
    return procgen.MDependentSpec(a.m0, a.h, a.innov, a.innov_variance)


def cmd_simulate(a):
    spec = _process_from_args(a)
    ts = (procgen.gen_linear if isinstance(spec, procgen.LinearProcessSpec)
          else procgen.gen_m_dependent)(spec, a.n, a.seed)
    _emit(procgen.series_to_json(ts) if a.format == "json" else procgen.series_to_csv(ts), a.out)


def _functional(a):
    if a.functional == "periodogram":
        return blocks.periodogram(a.omega)
    if a.functional == "power":
        return blocks.power(a.nu)
    return blocks.scaled_sum_f()


def cmd_estimate(a):
    x = _read_series(a.input)
    what = a.quantity
    if what == "autocov":
        out = {"k": a.k, "value": estimators.sample_autocov(x, a.k)}
    elif what == "spectral":
        w = _floats(a.weights) if a.weights else (1.0,) * (a.ell + 1)
        out = {"value": estimators.spectral_estimate(x, a.ell, w, a.lam)}
    elif what == "mbb-moment":
        out = {"value": estimators.mbb_moment(x, a.ell, a.nu)}
    elif what in ("mbb-var", "nbb-var"):
        fn = estimators.mbb_variance if what == "mbb-var" else estimators.nbb_variance
        v = fn(x, a.ell)
        out = {"value": v.value, "truncated": v.truncated}
    else:
        bv = blocks.eval_block_functional(x, a.ell, _functional(a))
        v = estimators.lag_window_variance(bv)
        out = {"value": v.value, "truncated": v.truncated}
    out.update({"quantity": what, "ell": a.ell})
    _emit(json.dumps(out, sort_keys=True) + "\n", a.out)


def cmd_bootstrap(a):
    x = _read_series(a.input)
    if a.scheme == "bobb":
        y = blocks.eval_block_functional(x, a.ell, _functional(a)).values
        dist = resample.bobb_distribution(y, a.ell1, a.replicates, a.seed, n=x.shape[0])
    elif a.exact:
        if a.scheme != "mbb":
            raise procgen.ValidationError("exact enumeration is implemented for the MBB")
        dist = resample.exact_enumeration(x, a.ell, a.statistic)
    else:
        plan = resample.ResamplePlan(a.scheme, a.ell, a.replicates, a.seed, a.statistic)
        dist = resample.bootstrap_distribution(plan, x)
    q = dist.quantile(resample.QUANTILE_LEVELS)
    summary = {"scheme": a.scheme, "exact": dist.is_exact, "mean": dist.mean(),
               "quantiles": dict(zip(map(str, resample.QUANTILE_LEVELS), map(float, q))),
               "replicates": int(dist.samples.size)}
    _emit(json.dumps(summary, sort_keys=True) + "\n", a.out)
    if a.samples:
        vals, p = dist.collapsed()
        with open(a.samples, "w") as fh:
            fh.write("value,probability\n")
            for v, pr in zip(vals, p):
                fh.write(f"{float(v)!r},{float(pr)!r}\n")


def _grid(text):
    lo, hi, k = text.split(":")
    return np.linspace(float(lo), float(hi), int(k))


def cmd_edgeworth(a):
    """Params JSON: ``{"cumulants": [chi2, chi3, ...], "b_tilde": v, "s": 3}`` or
    ``{"studentized": {StudentizedEEParams fields}, "order": 2}``."""
    with open(a.params) as fh:
        p = json.load(fh)
    x = _grid(a.x)
    if "studentized" in p:
        params = StudentizedEEParams(**p["studentized"])
        ee = studentized_ee_cdf(x, params, int(p.get("order", 2)))
    else:
        cum = CumulantVector(tuple(p["cumulants"]))
        ee = ee_cdf(x, cum, p.get("b_tilde", 1.0), p.get("s"))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "Phi", "EE"])
    for xi, f, e in zip(x, ndtr(x), np.atleast_1d(ee)):
        w.writerow([repr(float(xi)), repr(float(f)), repr(float(e))])
    _emit(buf.getvalue(), a.out)


def cmd_experiment(a):
    over = {"master_seed": a.seed}
    cfg = load_config(a.config, **over) if a.config else ExperimentConfig(kind=a.kind, **{
        k: v for k, v in over.items() if v is not None})
    if cfg.kind != a.kind:
        raise procgen.ValidationError(f"config is for a {cfg.kind!r} experiment, not {a.kind!r}")
    res = run_experiment(cfg, allow_large=a.allow_large,
                         progress=(lambda m: print(m, file=sys.stderr)) if a.verbose else None)
    if a.out:
        write_result(res, cfg, a.out)
    print(json.dumps(res.summary, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blockee", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw a series from a process")
    s.add_argument("--config", help="take the process fields from an experiment config")
    s.add_argument("--process", choices=["linear", "m_dependent"], default="linear")
    s.add_argument("--coeffs", default="1")
    s.add_argument("--innov", choices=procgen.INNOVATIONS, default="normal")
    s.add_argument("--innov-variance", type=float, default=1.0)
    s.add_argument("--m0", type=int, default=1)
    s.add_argument("--h", default="identity")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_simulate)

    def block_args(q):
        q.add_argument("--input", required=True, help="series file (.csv or .json)")
        q.add_argument("--ell", type=int, required=True)
        q.add_argument("--functional", choices=["periodogram", "power", "scaled_sum"], default="periodogram")
        q.add_argument("--omega", type=float, default=np.pi / 2)
        q.add_argument("--nu", type=int, default=2)
        q.add_argument("--out")

    e = sub.add_parser("estimate", help="point and variance estimators")
    e.add_argument("quantity", choices=["autocov", "spectral", "mbb-moment", "mbb-var", "nbb-var", "lag-var"])
    block_args(e)
    e.add_argument("--k", type=int, default=0)
    e.add_argument("--lam", type=float, default=0.0)
    e.add_argument("--weights", help="comma separated lag weights w_0..w_ell")
    e.set_defaults(fn=cmd_estimate)

    b = sub.add_parser("bootstrap", help="bootstrap law of a statistic")
    block_args(b)
    b.add_argument("--scheme", choices=["mbb", "nbb", "bobb"], default="mbb")
    b.add_argument("--statistic", default="mean", choices=sorted(resample.STATISTICS))
    b.add_argument("--replicates", type=int, default=1000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--ell1", type=int)
    b.add_argument("--exact", action="store_true")
    b.add_argument("--samples", help="write the (collapsed) bootstrap atoms here as CSV")
    b.set_defaults(fn=cmd_bootstrap)

    g = sub.add_parser("edgeworth", help="evaluate an expansion on an x-grid, emit CSV")
    g.add_argument("--params", required=True)
    g.add_argument("--x", default="-4:4:81", help="lo:hi:points")
    g.add_argument("--out")
    g.set_defaults(fn=cmd_edgeworth)

    x = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    x.add_argument("kind", choices=["ee", "soc", "mdev", "mbbmom"])
    x.add_argument("--config")
    x.add_argument("--seed", type=int)
    x.add_argument("--out")
    x.add_argument("--allow-large", action="store_true")
    x.add_argument("--verbose", action="store_true")
    x.set_defaults(fn=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except BudgetExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (procgen.ValidationError, OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
