"""CP instruments in Kraus form and their compositions.

An instrument maps each outcome label ``m`` to Kraus operators
``K[m, 0..r-1]``; its Heisenberg action on ``a`` for a set of labels ``B``
is ``sum_{m in B} sum_k K[m,k]^H a K[m,k]``.  Kraus lists of unequal length
are padded with zero operators, which contribute nothing.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, ExplosionCap, InvalidInstrument
from .operators import adjoint, identity
from .outcomes import OutcomeSpace, product_space
from .povm import Povm

PROB_FLOOR = 1e-14
EXPLOSION_CAP = 2_000_000
TOL_NORM = 1e-9


def _stack_kraus(kraus):
    if isinstance(kraus, np.ndarray) and kraus.ndim == 4:
        return np.asarray(kraus, dtype=np.complex128)
    groups = [np.asarray(g, dtype=np.complex128) for g in kraus]
    groups = [g[None] if g.ndim == 2 else g for g in groups]
    if not groups:
        raise InvalidInstrument("instrument needs at least one outcome")
    d = groups[0].shape[-1]
    r = max(g.shape[0] for g in groups)
    out = np.zeros((len(groups), r, d, d), dtype=np.complex128)
    for i, g in enumerate(groups):
        if g.shape[1:] != (d, d):
            raise DimMismatch("all Kraus operators must be d x d with one common d")
        out[i, : g.shape[0]] = g
    return out


class Instrument:
    """Finite-outcome CP instrument; ``kraus`` has shape ``(n, r, d, d)``."""

    __slots__ = ("space", "kraus")

    def __init__(self, space, kraus, check=True, tol=TOL_NORM):
        if not isinstance(space, OutcomeSpace):
            space = OutcomeSpace(space)
        kraus = _stack_kraus(kraus)
        if kraus.shape[0] != len(space):
            raise InvalidInstrument("one Kraus list per outcome label is required")
        if kraus.shape[2] != kraus.shape[3]:
            raise DimMismatch("Kraus operators must be square")
        kraus.setflags(write=False)
        self.space = space
        self.kraus = kraus
        if check:
            gap = self.normalization_defect()
            if gap > tol:
                raise InvalidInstrument(f"sum of K^H K differs from identity by {gap:.3e}")

    @property
    def dim(self):
        return self.kraus.shape[-1]

    def __len__(self):
        return len(self.space)

    def __repr__(self):
        return f"Instrument({self.space!r}, dim={self.dim}, kraus_rank={self.kraus.shape[1]})"

    def normalization_defect(self):
        k = self.kraus
        total = np.einsum("mkji,mkjl->il", k.conj(), k)
        return float(np.max(np.abs(total - identity(self.dim))))

    def kraus_of(self, label):
        return self.kraus[self.space.index(label)]


def _check_operand(ins, a):
    a = np.asarray(a, dtype=np.complex128)
    if a.shape[-2:] != (ins.dim, ins.dim):
        raise DimMismatch(f"operand shape {a.shape} does not match instrument dim {ins.dim}")
    return a


def heisenberg_each(ins, a):
    """Per-outcome Heisenberg images ``I_{m}(a)`` stacked along axis 0."""
    a = _check_operand(ins, a)
    k = ins.kraus
    return np.einsum("mkji,jl,mklc->mic", k.conj(), a, k, optimize=True)


def heisenberg_apply(ins, subset, a):
    """``I_B(a)`` for a set ``B`` of outcome labels."""
    a = _check_operand(ins, a)
    idx = ins.space.indices(list(subset))
    if not idx:
        return np.zeros_like(a)
    k = ins.kraus[idx]
    return np.einsum("mkji,jl,mklc->ic", k.conj(), a, k, optimize=True)


def induced_povm(ins):
    """POVM ``E(m) = I_{m}(I)`` of the outcome statistics."""
    k = ins.kraus
    return Povm(ins.space, np.einsum("mkji,mkjl->mil", k.conj(), k), check=False)


@dataclass
class Branch:
    prob: float
    post: np.ndarray  # None when prob <= PROB_FLOOR


def schrodinger_branch(ins, m, rho, prob_floor=PROB_FLOOR):
    """Outcome probability and normalized post-measurement state for label ``m``."""
    rho = _check_operand(ins, rho)
    k = ins.kraus_of(m)
    sigma = np.einsum("kab,bc,kdc->ad", k, rho, k.conj())
    prob = float(np.trace(sigma).real)
    if prob <= prob_floor:
        return Branch(max(prob, 0.0), None)
    return Branch(prob, sigma / prob)


def schrodinger_each(ins, rho):
    """Unnormalized post states ``sum_k K rho K^H`` for every outcome."""
    rho = _check_operand(ins, rho)
    k = ins.kraus
    return np.einsum("mkab,bc,mkdc->mad", k, rho, k.conj(), optimize=True)


def compose(i1, i2):
    """Successive measurement: ``i1`` first, then ``i2``.

    Outcome ``(m1, m2)`` carries Kraus products ``K2 @ K1`` so that its
    Heisenberg action is ``I1_{m1}(I2_{m2}(a))``.
    """
    if i1.dim != i2.dim:
        raise DimMismatch(f"instrument dims differ: {i1.dim} vs {i2.dim}")
    n1, r1 = i1.kraus.shape[:2]
    n2, r2 = i2.kraus.shape[:2]
    d = i1.dim
    k = np.einsum("qsab,prbc->pqrsac", i2.kraus, i1.kraus, optimize=True)
    k = k.reshape(n1 * n2, r1 * r2, d, d)
    return Instrument(product_space(i1.space, i2.space), k, check=False)


def compose_povm(ins, e):
    """POVM of measuring ``ins`` then ``e``: effect ``(m, b) = I_m(E(b))``."""
    if ins.dim != e.dim:
        raise DimMismatch(f"instrument dim {ins.dim} vs POVM dim {e.dim}")
    k = ins.kraus
    eff = np.einsum("mkji,bjl,mklc->mbic", k.conj(), e.effects, k, optimize=True)
    eff = eff.reshape(len(ins) * len(e), ins.dim, ins.dim)
    return Povm(product_space(ins.space, e.space), eff, check=False)


def n_fold(ins, n, cap=EXPLOSION_CAP):
    """``ins * ins * ... * ins`` (``n`` factors) with flat ``n``-tuple labels."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if len(ins) ** n > cap:
        raise ExplosionCap(f"{len(ins)}**{n} outcomes exceed the cap {cap}")
    out = ins
    for _ in range(n - 1):
        out = compose(out, ins)
    return out


def identity_instrument(d, label=0):
    return Instrument(OutcomeSpace([label]), identity(d)[None, None])


def unitary_instrument(u, label=0):
    u = np.asarray(u, dtype=np.complex128)
    return Instrument(OutcomeSpace([label]), u[None, None])


def projective_instrument(projectors, labels=None):
    """Lueders instrument of a projective measurement."""
    projectors = np.asarray(projectors, dtype=np.complex128)
    labels = range(len(projectors)) if labels is None else labels
    return Instrument(OutcomeSpace(labels), projectors[:, None])


def random_instrument(d, n, rng, rank=2):
    """Random instrument: a random isometry ``C^d -> C^(n r d)`` cut into blocks."""
    g = rng.normal(size=(n * rank * d, d)) + 1j * rng.normal(size=(n * rank * d, d))
    q, _ = np.linalg.qr(g)
    return Instrument(OutcomeSpace.range(n), q.reshape(n, rank, d, d))


def choi_matrix(ins, label):
    """Choi matrix ``sum_ij |i><j| (x) T(|i><j|)`` of the Schroedinger map of one outcome.

    Diagnostic for imported data; Kraus form is CP by construction.
    """
    d = ins.dim
    k = ins.kraus_of(label)
    vecs = np.einsum("kab->kba", k).reshape(k.shape[0], d * d)
    return np.einsum("ka,kb->ab", vecs, vecs.conj())
