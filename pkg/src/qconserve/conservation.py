"""Information conservation ``I * E ~ E`` and finite shadows of the
infinite composition of an instrument.

The infinite composition is represented by its consistent family of
finite compositions ``E_n(B) = (I^{*n})_B(I)`` on ``Omega^n``; the
minimality witness builds the kernels ``nu~^n : X -> Omega^n x X`` that
realize ``I^{*n} * F`` from a conserved POVM ``F``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, ExplosionCap, NotConserved, NotEquivalent, SpaceMismatch
from .instrument import EXPLOSION_CAP, compose_povm, induced_povm
from .outcomes import MarkovKernel, marginal_kernel, power_space, product_space
from .povm import Povm, check_equivalent, find_post_processing, kernel_residual


def finite_composition(ins, n, cap=EXPLOSION_CAP):
    """POVM ``E_n`` of ``n`` successive measurements of ``ins``.

    Built as ``E_{k+1} = ins * E_k``, which equals the induced POVM of the
    ``n``-fold composed instrument without materializing its Kraus lists.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if len(ins) ** n > cap:
        raise ExplosionCap(f"{len(ins)}**{n} outcomes exceed the cap {cap}")
    e = induced_povm(ins)
    for _ in range(n - 1):
        e = compose_povm(ins, e)
    return e


def finite_compositions(ins, n, cap=EXPLOSION_CAP):
    out = [finite_composition(ins, 1, cap)]
    for _ in range(n - 1):
        if len(ins) * len(out[-1]) > cap:
            raise ExplosionCap("finite composition exceeds the cap")
        out.append(compose_povm(ins, out[-1]))
    return out


def kolmogorov_consistency(e_n, e_n1):
    """Max-abs gap between ``E_n(b)`` and ``sum_w E_{n+1}(b, w)`` over atoms ``b``."""
    if e_n.dim != e_n1.dim:
        raise DimMismatch("POVM dims differ")
    last = e_n1.space.atoms[-1]
    if not e_n1.space.is_product or product_space(e_n.space, last) != e_n1.space:
        raise SpaceMismatch("E_{n+1} must live on (outcomes of E_n) x Omega")
    d = e_n.dim
    summed = e_n1.effects.reshape(len(e_n), len(last), d, d).sum(axis=1)
    return float(np.max(np.abs(summed - e_n.effects), initial=0.0))


def consistency_table(ins, n_max, cap=EXPLOSION_CAP):
    """``[(n, residual(E_n, E_{n+1}))]`` for ``n = 1..n_max`` plus the POVMs."""
    povms = finite_compositions(ins, n_max + 1, cap)
    rows = [(n, kolmogorov_consistency(povms[n - 1], povms[n])) for n in range(1, n_max + 1)]
    return rows, povms


@dataclass
class ConservationReport:
    conserved: bool
    cert_forward: object  # I * E <= E
    cert_backward: object  # E <= I * E
    composed: Povm = field(repr=False)

    @property
    def residual_forward(self):
        return self.cert_forward.residual

    @property
    def residual_backward(self):
        return self.cert_backward.residual


def conservation_check(ins, e, tol=1e-8, subspace=None, method="auto"):
    """Decide whether ``ins`` conserves ``e`` (``ins * e`` equivalent to ``e``).

    ``subspace`` optionally lists basis indices; both POVMs are then
    compressed to that block before comparison.
    """
    if ins.dim != e.dim:
        raise DimMismatch(f"instrument dim {ins.dim} vs POVM dim {e.dim}")
    composed = compose_povm(ins, e)
    lhs, rhs = composed, e
    if subspace is not None:
        lhs, rhs = composed.compress(subspace), e.compress(subspace)
    fwd = find_post_processing(lhs, rhs, tol, method)
    bwd = find_post_processing(rhs, lhs, tol, method)
    return ConservationReport(fwd.feasible and bwd.feasible, fwd, bwd, composed)


@dataclass
class InvarianceReport:
    equivalence: object
    report1: ConservationReport
    report2: ConservationReport

    @property
    def consistent(self):
        return self.report1.conserved == self.report2.conserved


def conservation_invariance_check(ins, e1, e2, tol=1e-8, method="auto"):
    """Conservation verdicts for two equivalent POVMs; they must agree."""
    eq = check_equivalent(e1, e2, tol, method)
    if not eq.equivalent:
        raise NotEquivalent(
            f"POVMs are not equivalent (residuals {eq.cert12.residual:.3e}, {eq.cert21.residual:.3e})"
        )
    return InvarianceReport(eq, conservation_check(ins, e1, tol, method=method),
                            conservation_check(ins, e2, tol, method=method))


@dataclass
class WitnessChain:
    depth: int
    kernels: list = field(repr=False)  # nu~^k : X -> Omega^k x X
    marginals: list = field(repr=False)  # nu^k : X -> Omega^k
    residuals: list  # |sum_x nu~^k_x F(x) - I^{*k} * F|_max
    marginal_residuals: list  # |sum_x nu^k_x F(x) - E_k|_max
    tolerances: list

    @property
    def ok(self):
        return all(r <= t for r, t in zip(self.residuals, self.tolerances)) and \
            all(r <= t for r, t in zip(self.marginal_residuals, self.tolerances))


def next_witness(nu_n, nu_1, omega, n):
    """One step of the witness recursion.

    ``nu~^{n+1}_x(w^(n), w, x') = sum_{x_n} nu~^n_x(w^(n), x_n) nu~^1_{x_n}(w, x')``:
    the first-level post-processing is re-applied to the latest ``X`` outcome.
    """
    nx = len(nu_n.source)
    block = len(omega) ** n
    t = nu_n.matrix.reshape(nx, block, nx)
    nxt = np.einsum("awb,bc->awc", t, nu_1.matrix).reshape(nx, -1)
    target = product_space(power_space(omega, n), nu_1.target)
    return MarkovKernel(nu_n.source, target, nxt)


WITNESS_MAX_DEPTH = 4
WITNESS_MAX_OUTCOMES = 12


def minimality_witness(ins, f, n, tol=1e-8, cap=EXPLOSION_CAP, progress=None, method="auto",
                       max_depth=WITNESS_MAX_DEPTH, max_outcomes=WITNESS_MAX_OUTCOMES):
    """Witness kernels showing ``E_k <= F`` for ``k = 1..n`` when ``ins`` conserves ``F``.

    Level ``k`` passes when ``sum_x nu~^k_x F(x)`` matches ``I^{*k} * F`` and
    ``sum_x nu^k_x F(x)`` matches ``E_k``, both within ``k * tol``.
    ``progress(k)`` is called after each level.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if n > max_depth or len(ins) > max_outcomes:
        raise ExplosionCap(f"witness limited to depth {max_depth} and {max_outcomes} outcomes")
    if len(ins) ** n * len(f) ** 2 > cap:
        raise ExplosionCap("witness kernels exceed the cap")
    report = conservation_check(ins, f, tol, method=method)
    if not report.conserved:
        raise NotConserved(
            f"instrument does not conserve F (forward {report.residual_forward:.3e}, "
            f"backward {report.residual_backward:.3e})"
        )
    nu_1 = report.cert_forward.kernel
    omega = ins.space
    kernels, marginals, res, mres, tols = [], [], [], [], []
    target_povm = report.composed  # I^{*k} * F
    nu_k = nu_1
    e_k = induced_povm(ins)
    for k in range(1, n + 1):
        if k > 1:
            nu_k = next_witness(nu_k, nu_1, omega, k - 1)
            target_povm = compose_povm(ins, target_povm)
            e_k = compose_povm(ins, e_k)
        marg = marginal_kernel(nu_k, range(k * len(omega.atoms)))
        kernels.append(nu_k)
        marginals.append(marg)
        res.append(kernel_residual(target_povm, f, nu_k))
        mres.append(kernel_residual(e_k, f, marg))
        tols.append(k * tol)
        if progress is not None:
            progress(k)
    return WitnessChain(n, kernels, marginals, res, mres, tols)
