"""Write an experiment's artifacts to a directory.

``config.copy``  canonical config text (re-runnable with ``--config``)
``result.json``  rows, summary and metadata; deterministic for a given config
``rows.csv``     one line per row, plus its wall time
``timing.json``  wall times, kept apart so ``result.json`` stays reproducible
"""
from __future__ import annotations

import csv
import json
import os

from .config import ExperimentConfig
from .experiments import ExperimentResult


def result_json(result: ExperimentResult) -> str:
    return json.dumps(result.to_dict(), sort_keys=True, indent=1) + "\n"


def write_result(result: ExperimentResult, cfg: ExperimentConfig, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.copy"), "w") as fh:
        fh.write(cfg.to_text())
    with open(os.path.join(out_dir, "result.json"), "w") as fh:
        fh.write(result_json(result))
    keys = []
    for r in result.rows:
        keys += [k for k in r if k not in keys]
    with open(os.path.join(out_dir, "rows.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys + ["wall_time_s"])
        w.writeheader()
        for r in result.rows:
            w.writerow({**r, "wall_time_s": result.timings.get(f"n={r['n']},group={r['group']}")})
    with open(os.path.join(out_dir, "timing.json"), "w") as fh:
        json.dump(result.timings, fh, indent=1, sort_keys=True)


def read_result(out_dir: str) -> dict:
    with open(os.path.join(out_dir, "result.json")) as fh:
        return json.load(fh)
