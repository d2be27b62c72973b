"""Rescaled quantum-counter count X_k for a few initial number states.

From the number state |n> the limiting intensity law is Gamma(n+1, 1);
the script prints sample moments and a Kolmogorov-Smirnov p-value.
"""

import argparse

import numpy as np
from scipy import stats

from qconserve.simulate import FockChain, ensemble_stats


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda-t", type=float, default=0.5)
    ap.add_argument("--k", type=int, default=60)
    ap.add_argument("--numbers", type=int, nargs="+", default=[0, 1, 3])
    ap.add_argument("--n-traj", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    chain = FockChain("quantum_counter", args.lambda_t)
    print(f"{'n':>3} {'mean':>8} {'var':>8} {'KS p':>8}")
    for n in args.numbers:
        rho0 = np.zeros((n + 1, n + 1), dtype=complex)
        rho0[n, n] = 1.0
        s = ensemble_stats(chain, rho0, args.k, args.n_traj, args.seed, statistic="Xk")
        p = stats.kstest(s.values, stats.gamma(n + 1).cdf).pvalue
        print(f"{n:3d} {s.mean:8.4f} {s.var:8.4f} {p:8.3f}")


if __name__ == "__main__":
    main()
