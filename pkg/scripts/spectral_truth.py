"""Monte Carlo check of the periodogram block-mean variance against (2/3) f(w)^2."""
import argparse
import math

import numpy as np

from blockee._kernels import periodogram_rows
from blockee.procgen import LinearProcessSpec, derive_truth, linear_paths
from blockee.rng import stream


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--ell", type=int, help="default ceil(n^(1/5))")
    ap.add_argument("--omega", type=float, default=math.pi / 2)
    ap.add_argument("--coeffs", default="1,0.5")
    ap.add_argument("--replicates", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=9)
    a = ap.parse_args()
    spec = LinearProcessSpec(tuple(float(c) for c in a.coeffs.split(",")))
    ell = a.ell or math.ceil(a.n ** 0.2 - 1e-9)
    b = math.ceil(a.n / ell)
    f = float(derive_truth(spec).spectral(a.omega))
    rng = stream(a.seed)
    means = []
    for lo in range(0, a.replicates, 250):
        x = linear_paths(spec, a.n, rng, min(250, a.replicates - lo))
        means.append(periodogram_rows(x, ell, a.omega).mean(axis=1))
    means = np.concatenate(means)
    mc = b * means.var(ddof=1)
    target = 2 / 3 * f * f
    se = mc * math.sqrt(2 / (a.replicates - 1))
    print(f"n={a.n} ell={ell} b={b}  b*Var(Ybar)={mc:.5f} +- {se:.5f}  (2/3)f^2={target:.5f}  "
          f"ratio={mc / target:.3f}")


if __name__ == "__main__":
    main()
