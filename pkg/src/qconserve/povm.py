"""POVMs on a finite outcome space and the post-processing preorder.

``E1 <= E2`` (E1 is fuzzier) when some Markov kernel ``nu`` satisfies
``E1(i) = sum_j nu[j, i] E2(j)``.  Feasibility is decided by one linear
program whose optimum is the smallest achievable max-abs residual.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import simplex
from .errors import DimMismatch, InvalidPovm, SpaceMismatch
from .operators import TOL_PSD, adjoint, hermiticity_defect, identity, max_norm, min_eigenvalue
from .outcomes import MarkovKernel, OutcomeSpace, deterministic_kernel

TOL_EQ = 1e-10
CLEAN_TOL = 1e-12
MERGE_RTOL = 1e-12


class Povm:
    """Effects ``effects[i]`` indexed by ``space.labels[i]``."""

    __slots__ = ("space", "effects")

    def __init__(self, space, effects, check=True, tol=TOL_PSD):
        if not isinstance(space, OutcomeSpace):
            space = OutcomeSpace(space)
        effects = np.array(effects, dtype=np.complex128)
        if effects.ndim != 3 or effects.shape[1] != effects.shape[2]:
            raise InvalidPovm(f"effects must have shape (n, d, d), got {effects.shape}")
        if effects.shape[0] != len(space):
            raise InvalidPovm("one effect per outcome label is required")
        effects.setflags(write=False)
        self.space = space
        self.effects = effects
        if check:
            problems = validate_povm(self, tol)
            if problems:
                raise InvalidPovm("; ".join(str(p) for p in problems))

    @property
    def dim(self):
        return self.effects.shape[1]

    def __len__(self):
        return len(self.space)

    def __getitem__(self, label):
        return self.effects[self.space.index(label)]

    def __repr__(self):
        return f"Povm({self.space!r}, dim={self.dim})"

    def effect_of(self, labels):
        """``E(B)`` for a set ``B`` of labels."""
        idx = self.space.indices(labels)
        return self.effects[idx].sum(axis=0) if idx else np.zeros((self.dim, self.dim), complex)

    def probabilities(self, rho):
        return np.einsum("ij,mji->m", rho, self.effects).real

    def relabel(self, labels):
        return Povm(OutcomeSpace(labels), self.effects, check=False)

    def permuted(self, order):
        """POVM whose i-th outcome is this POVM's ``order[i]``-th outcome."""
        order = list(order)
        return Povm(OutcomeSpace([self.space.labels[k] for k in order]), self.effects[order], check=False)

    def compress(self, indices):
        """Restrict every effect to the span of the given basis vectors.

        Compression by a projector ``P`` maps POVMs to POVMs on ``P H`` and
        commutes with post-processing.
        """
        idx = np.asarray(list(indices))
        return Povm(self.space, self.effects[:, idx][:, :, idx], check=False)


@dataclass
class Violation:
    kind: str  # "hermiticity" | "positivity" | "completeness"
    label: object
    magnitude: float

    def __str__(self):
        where = "" if self.label is None else f" at {self.label!r}"
        return f"{self.kind} violation{where}: {self.magnitude:.3e}"


def validate_povm(e, tol=TOL_PSD):
    """List of violated POVM conditions; empty iff ``e`` is a valid POVM."""
    report = []
    effects = e.effects
    d = effects.shape[1]
    offdiag = effects * (1 - np.eye(d))
    diagonal = not np.any(offdiag)
    for k, lab in enumerate(e.space.labels):
        a = effects[k]
        scale = max(1.0, max_norm(a))
        h = hermiticity_defect(a)
        if h > tol * scale:
            report.append(Violation("hermiticity", lab, h))
            continue
        if diagonal:
            lo = float(np.min(np.diag(a).real)) if d else 0.0
        else:
            lo = min_eigenvalue(a, tol)
        if lo < -tol * scale:
            report.append(Violation("positivity", lab, -lo))
    gap = float(np.max(np.abs(effects.sum(axis=0) - identity(d)))) if d else 0.0
    if gap > tol:
        report.append(Violation("completeness", None, gap))
    return report


def trivial_povm(d, label=0):
    return Povm(OutcomeSpace([label]), identity(d)[None])


def post_process(e2, nu):
    """Fuzzier POVM ``E1(i) = sum_j nu[j, i] E2(j)``."""
    if nu.source != e2.space:
        raise SpaceMismatch("kernel source must equal the POVM's outcome space")
    effects = np.einsum("ji,jab->iab", nu.matrix, e2.effects)
    return Povm(nu.target, effects, check=False)


def coarse_grain(e, f, target=None):
    """Merge outcomes by a label map ``f``; effect at ``y`` sums ``E(x)`` over ``f(x) = y``."""
    if target is None:
        seen = {}
        for x in e.space.labels:
            seen.setdefault(f(x), None)
        target = OutcomeSpace(list(seen))
    return post_process(e, deterministic_kernel(e.space, target, f))


def povm_equal(e1, e2, tol=TOL_EQ):
    return e1.space == e2.space and e1.dim == e2.dim and \
        float(np.max(np.abs(e1.effects - e2.effects), initial=0.0)) <= tol


@dataclass
class PreorderCertificate:
    """Witness (or refutation) of ``e1 <= e2``.

    ``residual`` is the LP optimum: the smallest max-abs entry error of
    ``e1 = post_process(e2, nu)`` over all kernels.  ``achieved`` is the
    error of the returned, cleaned-up kernel.
    """

    feasible: bool
    residual: float
    kernel: MarkovKernel = field(default=None, repr=False)
    achieved: float = float("nan")
    method: str = ""
    raw: np.ndarray = field(default=None, repr=False)  # best kernel even when infeasible


def _features(effects):
    """Real feature vectors: real parts of the upper triangle, imaginary
    parts of the strict upper triangle."""
    d = effects.shape[1]
    iu = np.triu_indices(d)
    ju = np.triu_indices(d, 1)
    return np.concatenate([effects[:, iu[0], iu[1]].real, effects[:, ju[0], ju[1]].imag], axis=1)


def _clean_kernel(nu, source, target):
    nu = np.where((nu < 0) & (nu >= -CLEAN_TOL), 0.0, nu)
    nu = np.clip(nu, 0.0, None)
    sums = nu.sum(axis=1, keepdims=True)
    return MarkovKernel(source, target, nu / sums)


def kernel_residual(e1, e2, nu):
    """Max-abs error of ``e1`` versus ``post_process(e2, nu)``."""
    return float(np.max(np.abs(post_process(e2, nu).effects - e1.effects), initial=0.0))


@dataclass
class ProportionalClasses:
    """Partition of outcomes into classes of mutually proportional effects.

    ``group[i]`` is the class of outcome ``i`` and ``share[i]`` the factor
    with ``E(i) = share[i] * merged(group[i])``; shares within a class add
    up to one.  Zero effects all land in one class.
    """

    group: np.ndarray
    share: np.ndarray
    merged: Povm

    @property
    def reduced(self):
        return len(self.merged) < len(self.group)


def proportional_classes(e, rtol=MERGE_RTOL):
    flat = e.effects.reshape(len(e), -1)
    tr = np.einsum("kii->k", e.effects).real
    group = np.empty(len(e), dtype=np.int64)
    reps, zero_class = [], None
    for k in range(len(e)):
        if tr[k] <= 0:
            if zero_class is None:
                zero_class = len(reps)
                reps.append(np.full(flat.shape[1], np.inf))
            group[k] = zero_class
            continue
        u = flat[k] / tr[k]
        if reps:
            gap = np.max(np.abs(np.array(reps) - u), axis=1)
            best = int(np.argmin(gap))
            if gap[best] <= rtol * max(1.0, np.max(np.abs(u))):
                group[k] = best
                continue
        group[k] = len(reps)
        reps.append(u)
    n_cls = len(reps)
    effects = np.zeros((n_cls,) + e.effects.shape[1:], dtype=np.complex128)
    np.add.at(effects, group, e.effects)
    tot = np.zeros(n_cls)
    np.add.at(tot, group, np.maximum(tr, 0.0))
    size = np.bincount(group, minlength=n_cls)
    share = np.where(tot[group] > 0, np.maximum(tr, 0.0) / np.where(tot[group] > 0, tot[group], 1.0),
                     1.0 / size[group])
    first = [int(np.nonzero(group == g)[0][0]) for g in range(n_cls)]
    merged = Povm(OutcomeSpace([e.space.labels[k] for k in first]), effects, check=False)
    return ProportionalClasses(group, share, merged)


def find_post_processing(e1, e2, tol=1e-8, method="auto", reduce=True):
    """Decide ``e1 <= e2`` by minimizing the max-abs residual over kernels.

    Variables are ``nu[j, i]`` (row-major, ``j`` over ``e2``) and a slack
    ``t``; every real feature of ``sum_j nu[j, i] E2(j) - E1(i)`` is
    bounded by ``+-t``.  Features that vanish in both POVMs are dropped.

    With ``reduce`` on, outcomes with proportional effects are merged on
    both sides first.  Merging yields an equivalent POVM, so exact
    feasibility is unchanged, and the reduced kernel lifts back to the
    original outcomes by splitting each merged column in proportion to
    the traces of its members.  The reduced program weights each merged
    target so that its optimum is exactly the max-abs error of the lifted
    kernel; it can exceed the unreduced optimum, never undercut it.
    """
    if e1.dim != e2.dim:
        raise DimMismatch(f"POVM dims differ: {e1.dim} vs {e2.dim}")
    if reduce:
        c1, c2 = proportional_classes(e1), proportional_classes(e2)
        if c1.reduced or c2.reduced:
            # a merged target's error is split by the shares of its members,
            # so bounding it by t / (largest share) bounds every lifted error by t
            smax = np.zeros(len(c1.merged))
            np.maximum.at(smax, c1.group, c1.share)
            red = _solve_preorder(c1.merged, c2.merged, tol, method, 1.0 / smax)
            lifted = red.raw[c2.group][:, c1.group] * c1.share[None, :]
            nu = _clean_kernel(lifted, e2.space, e1.space)
            return PreorderCertificate(red.feasible, red.residual, nu if red.feasible else None,
                                       kernel_residual(e1, e2, nu), red.method, nu.matrix)
    return _solve_preorder(e1, e2, tol, method)


def _solve_preorder(e1, e2, tol, method, slack_scale=None):
    n1, n2 = len(e1), len(e2)
    f1 = _features(e1.effects)
    f2 = _features(e2.effects)
    live = np.any(f1 != 0, axis=0) | np.any(f2 != 0, axis=0)
    f1, f2 = f1[:, live], f2[:, live]
    nf = f1.shape[1]
    nvar = n1 * n2 + 1
    tcol = nvar - 1

    # rows (i, f): sum_j nu[j, i] f2[j, f] - t <= f1[i, f]  and the negation
    i_idx, f_idx, j_idx = np.meshgrid(np.arange(n1), np.arange(nf), np.arange(n2), indexing="ij")
    vals = f2[j_idx, f_idx]
    nz = vals != 0
    rows = (i_idx * nf + f_idx)[nz]
    cols = (j_idx * n1 + i_idx)[nz]
    vals = vals[nz]
    m_half = n1 * nf
    tr = np.arange(m_half)
    tcoef = -np.ones(m_half) if slack_scale is None else -np.repeat(slack_scale, nf)
    A_ub = sp.coo_matrix(
        (
            np.concatenate([vals, -vals, tcoef, tcoef]),
            (
                np.concatenate([rows, rows + m_half, tr, tr + m_half]),
                np.concatenate([cols, cols, np.full(m_half, tcol), np.full(m_half, tcol)]),
            ),
        ),
        shape=(2 * m_half, nvar),
    ).tocsr()
    b_ub = np.concatenate([f1.reshape(-1), -f1.reshape(-1)])
    eq_rows = np.repeat(np.arange(n2), n1)
    A_eq = sp.coo_matrix(
        (np.ones(n1 * n2), (eq_rows, np.arange(n1 * n2))), shape=(n2, nvar)
    ).tocsr()
    b_eq = np.ones(n2)
    c = np.zeros(nvar)
    c[tcol] = 1.0
    res = simplex.solve(c, A_ub, b_ub, A_eq, b_eq, method=method)
    if res.status != "optimal":
        raise simplex.LPError(f"preorder LP ended with status {res.status}")
    residual = max(0.0, res.fun)
    nu = _clean_kernel(res.x[: n1 * n2].reshape(n2, n1), e2.space, e1.space)
    achieved = kernel_residual(e1, e2, nu)
    feasible = residual <= tol
    return PreorderCertificate(feasible, residual, nu if feasible else None, achieved, res.method,
                               nu.matrix)


def is_fuzzier(e1, e2, tol=1e-8, method="auto"):
    return find_post_processing(e1, e2, tol, method).feasible


@dataclass
class EquivalenceReport:
    equivalent: bool
    cert12: PreorderCertificate
    cert21: PreorderCertificate


def check_equivalent(e1, e2, tol=1e-8, method="auto"):
    """``e1 ~ e2``: each is a post-processing of the other."""
    c12 = find_post_processing(e1, e2, tol, method)
    c21 = find_post_processing(e2, e1, tol, method)
    return EquivalenceReport(c12.feasible and c21.feasible, c12, c21)


def random_povm(d, n, rng, rank=None):
    """Random POVM with ``n`` outcomes: ``S^{-1/2} G_k S^{-1/2}`` for random
    positive ``G_k``."""
    rank = d if rank is None else rank
    gs = []
    for _ in range(n):
        g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
        gs.append(g @ adjoint(g))
    gs = np.array(gs)
    s = gs.sum(axis=0)
    w, v = np.linalg.eigh(s)
    inv_sqrt = (v / np.sqrt(w)) @ adjoint(v)
    effects = np.einsum("ab,kbc,cd->kad", inv_sqrt, gs, inv_sqrt)
    effects = 0.5 * (effects + adjoint(effects))
    return Povm(OutcomeSpace.range(n), effects)
