"""Experiment configuration: a flat ``key = value`` text format.

One key per line, keys are exactly the :class:`ExperimentConfig` field names,
``#`` starts a comment, list values are comma separated::

    kind = ee
    coeffs = 1, -0.5
    innov = exponential
    n_ladder = 1000, 3375, 8000
    replicates = 5000   # outer replicates per seed group

Unknown keys are rejected.  :meth:`ExperimentConfig.to_text` writes every
field in declaration order, and that canonical text is what gets hashed.
"""
from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field
from typing import Tuple

from ..procgen import INNOVATIONS, LinearProcessSpec, MDependentSpec, ValidationError

KINDS = ("ee", "soc", "mdev", "mbbmom")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str = "ee"
    # process
    process: str = "linear"            # linear | m_dependent
    coeffs: Tuple[float, ...] = (1.0,)
    innov: str = "normal"
    innov_variance: float = 1.0
    m0: int = 1
    h: str = "identity"
    # statistic pipeline
    statistic: str = "studentized-mean"
    nu: int = 2
    nbb_incomplete: str = "error"      # ee: error | drop (use floor(n/ell) blocks when ell does not divide n)
    omega: float = math.pi / 2
    variant: str = "moment"            # mbbmom: moment | variance
    component: str = "s1"              # mdev: s1 | s2 | joint
    # ladder and block rules
    n_ladder: Tuple[int, ...] = (1000,)
    block_rule: str = "cube_root"      # cube_root | fifth_root | explicit
    block_const: float = 1.0
    block_list: Tuple[int, ...] = ()
    ell1_rule: str = "explicit"        # explicit | divisor
    ell1_list: Tuple[int, ...] = ()
    ell1_const: float = 4.0
    ell1_exponent: float = 0.05
    kappa_inv: float = 4.0             # soc: require ell <= kappa_inv * n^(1/5)
    # Monte Carlo sizes
    replicates: int = 1000
    boot_replicates: int = 1000
    seed_groups: int = 5
    pilot_replicates: int = 20000
    side_replicates: int = 100000
    # expansion / tail parameters
    s: int = 4
    lam: float = 1.5
    lam_base: str = "pilot"            # pilot | analytic | one
    moments: str = "analytic"          # analytic | mc
    master_seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}")
        lad = self.n_ladder
        if not lad or any(b <= a for a, b in zip(lad, lad[1:])):
            raise ValidationError("n_ladder must be non-empty and strictly increasing")
        if self.replicates < 1 or self.boot_replicates < 1 or self.seed_groups < 1:
            raise ValidationError("replicates, boot_replicates and seed_groups must be >= 1")
        if self.block_rule not in ("cube_root", "fifth_root", "explicit"):
            raise ValidationError(f"unknown block_rule {self.block_rule!r}")
        if self.block_rule == "explicit" and len(self.block_list) != len(lad):
            raise ValidationError("block_list must have one entry per ladder point")
        if self.ell1_rule not in ("explicit", "divisor"):
            raise ValidationError(f"unknown ell1_rule {self.ell1_rule!r}")
        if self.innov not in INNOVATIONS:
            raise ValidationError(f"unknown innovation law {self.innov!r}")
        if self.s < 3:
            raise ValidationError("s must be at least 3")
        if not self.lam > 0:
            raise ValidationError("lam must be positive")
        self.process_spec()

    # -- derived quantities ---------------------------------------------------
    def process_spec(self):
        if self.process == "linear":
            return LinearProcessSpec(tuple(self.coeffs), self.innov, self.innov_variance)
        if self.process == "m_dependent":
            return MDependentSpec(self.m0, self.h, self.innov, self.innov_variance)
        raise ValidationError(f"unknown process {self.process!r}")

    def block_length(self, i: int) -> int:
        n = self.n_ladder[i]
        if self.block_rule == "explicit":
            ell = int(self.block_list[i])
        else:
            root = 3 if self.block_rule == "cube_root" else 5
            # the tolerance keeps exact powers (n = 1000 -> 10) from rounding up
            ell = math.ceil(self.block_const * n ** (1.0 / root) - 1e-9)
        if not 1 <= ell <= n:
            raise ValidationError(f"block length {ell} invalid for n={n}")
        return ell

    def bobb_length(self, i: int) -> int:
        n = self.n_ladder[i]
        ell = self.block_length(i)
        N = n - ell + 1
        if self.ell1_rule == "explicit":
            if len(self.ell1_list) != len(self.n_ladder):
                raise ValidationError("ell1_list must have one entry per ladder point")
            return int(self.ell1_list[i])
        target = self.ell1_const * ell * n ** self.ell1_exponent
        divs = [d for d in range(ell + 1, N // 2 + 1) if N % d == 0]
        if not divs:
            raise ValidationError(f"N={N} has no divisor above ell={ell}")
        return min(divs, key=lambda d: (abs(math.log(d / target)), d))

    # -- text round trip ------------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(_fmt(x) for x in v)
            else:
                v = _fmt(v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v, tuple) else v)
                for f in dataclasses.fields(self) for v in [getattr(self, f.name)]}

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(name: str, ftype, raw: str):
    raw = raw.strip()
    try:
        if ftype in ("int", int):
            return int(raw)
        if ftype in ("float", float):
            return float(raw)
        if ftype in ("str", str):
            return raw
        if "int" in str(ftype):
            return tuple(int(p) for p in raw.split(",") if p.strip())
        return tuple(float(p) for p in raw.split(",") if p.strip())
    except ValueError:
        raise ValidationError(f"bad value for {name}: {raw!r}") from None


def parse_config(text: str, **overrides) -> ExperimentConfig:
    types = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}
    kw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {lineno}: expected key = value")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in types:
            raise ValidationError(f"line {lineno}: unknown key {key!r}")
        if key in kw:
            raise ValidationError(f"line {lineno}: duplicate key {key!r}")
        kw[key] = _convert(key, types[key], val)
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kw)


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), **overrides)
