"""Law of the cumulative photon count M_k against the initial number law.

Samples the photon-counting chain for a sweep of k and prints the total
variation distance to the number distribution of the initial state.

    python scripts/pc_convergence.py --lambda-t 0.5 --weights 0 0.5 0 0.5
"""

import argparse

import numpy as np

from qconserve.simulate import FockChain, ensemble_stats


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda-t", type=float, default=0.5)
    ap.add_argument("--weights", type=float, nargs="+", default=[0.0, 0.5, 0.0, 0.5])
    ap.add_argument("--ks", type=int, nargs="+", default=[1, 2, 5, 10, 20, 40])
    ap.add_argument("--n-traj", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    w = np.asarray(args.weights) / np.sum(args.weights)
    rho0 = np.diag(w).astype(complex)
    ref = {n: float(p) for n, p in enumerate(w) if p > 0}
    chain = FockChain("photon_counting", args.lambda_t)
    print(f"{'k':>4} {'lambda_t k':>10} {'mean M_k':>10} {'TV':>8}")
    for k in args.ks:
        s = ensemble_stats(chain, rho0, k, args.n_traj, args.seed, reference=ref)
        print(f"{k:4d} {args.lambda_t * k:10.2f} {s.mean:10.4f} {s.tv:8.4f}")


if __name__ == "__main__":
    main()
