"""Residuals of the discretized intensity observable under the quantum counter.

For each lambda_t the intensity POVM on a Gauss-Legendre grid is compared
with its composition after one quantum-counter step, on the number
states up to the cutoff.  Both preorder directions report the smallest
max-abs kernel error the linear program found.
"""

import argparse
import time

from qconserve.conservation import conservation_check
from qconserve.models import ModelParams, quantum_counter_instrument, x_povm


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambda-t", type=float, nargs="+", default=[0.1, 0.5, 0.6931471805599453, 1.0, 2.0])
    ap.add_argument("--cutoff", type=int, default=6)
    ap.add_argument("--m-max", type=int, default=30)
    ap.add_argument("--nodes", type=int, default=64)
    ap.add_argument("--tol", type=float, default=1e-5)
    args = ap.parse_args()

    print(f"{'lambda_t':>9} {'forward':>10} {'backward':>10} {'conserved':>9} {'sec':>6}")
    for lt in args.lambda_t:
        t0 = time.perf_counter()
        p = ModelParams(lt, args.cutoff, args.m_max, grid_nodes=args.nodes)
        qc = quantum_counter_instrument(lt, p.cutoff, p.m_max)
        rep = conservation_check(qc, x_povm(qc.dim - 1, p.grid()), args.tol,
                                 subspace=range(p.cutoff + 1))
        print(f"{lt:9.4f} {rep.residual_forward:10.3e} {rep.residual_backward:10.3e} "
              f"{str(rep.conserved):>9} {time.perf_counter() - t0:6.1f}")


if __name__ == "__main__":
    main()
