"""Run one experiment config and persist the result directory.

    python scripts/run_config.py scripts/configs/ee_ma1_exponential.cfg --out results/ee
"""
import argparse
import json
import sys

from blockee.harness.config import load_config
from blockee.harness.experiments import estimate_ops, run_experiment
from blockee.harness.persist import write_result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--out", required=True)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--replicates", type=int, help="override R (quick looks)")
    ap.add_argument("--allow-large", action="store_true")
    a = ap.parse_args()
    over = {k: v for k, v in {"master_seed": a.seed, "replicates": a.replicates}.items() if v is not None}
    cfg = load_config(a.config, **over)
    print(f"{cfg.kind}: ~{estimate_ops(cfg):.2e} ops", file=sys.stderr)
    res = run_experiment(cfg, allow_large=a.allow_large, progress=lambda m: print(m, file=sys.stderr))
    write_result(res, cfg, a.out)
    print(json.dumps(res.summary, indent=1, sort_keys=True))


if __name__ == "__main__":
    main()
