"""Finite outcome spaces and Markov kernels between them.

A product of spaces carries its factors, and product labels are flat
tuples, so ``(A x B) x C`` and ``A x (B x C)`` are literally the same space.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidKernel, NotProductSpace, SpaceMismatch, UnknownLabel

ROW_TOL = 1e-12


def _norm_label(label):
    if isinstance(label, (list, tuple)):
        return tuple(_norm_label(x) for x in label)
    if isinstance(label, (np.integer,)):
        return int(label)
    if isinstance(label, (bool,)) or not isinstance(label, (int, str)):
        raise TypeError(f"label atoms must be int or str, got {label!r}")
    return label


class OutcomeSpace:
    """Ordered finite set of distinct labels.

    ``factors`` is empty for an atomic space and lists the component spaces
    for a product; labels of a product are flat tuples with one entry per
    factor.
    """

    __slots__ = ("labels", "factors", "_index")

    def __init__(self, labels, factors=()):
        self.labels = tuple(_norm_label(x) for x in labels)
        self.factors = tuple(factors)
        self._index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self._index) != len(self.labels):
            raise ValueError("outcome labels must be distinct")

    @classmethod
    def range(cls, n):
        return cls(range(n))

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __contains__(self, label):
        return label in self._index

    def __eq__(self, other):
        return isinstance(other, OutcomeSpace) and self.labels == other.labels

    def __hash__(self):
        return hash(self.labels)

    def __repr__(self):
        if len(self) <= 6:
            return f"OutcomeSpace({list(self.labels)!r})"
        return f"OutcomeSpace(<{len(self)} labels>)"

    @property
    def is_product(self):
        return len(self.factors) > 1

    @property
    def atoms(self):
        """Factor list, treating an atomic space as its own single factor."""
        return self.factors if self.factors else (self,)

    def index(self, label):
        try:
            return self._index[_norm_label(label)]
        except (KeyError, TypeError):
            raise UnknownLabel(label) from None

    def indices(self, labels):
        return [self.index(x) for x in labels]


def _parts(space, label):
    return label if space.factors else (label,)


def product_space(*spaces):
    """Cartesian product in lexicographic order, first factor major."""
    if not spaces:
        raise ValueError("need at least one space")
    if len(spaces) == 1:
        return spaces[0]
    s1 = spaces[0]
    for s2 in spaces[1:]:
        labels = [_parts(s1, a) + _parts(s2, b) for a in s1.labels for b in s2.labels]
        s1 = OutcomeSpace(labels, s1.atoms + s2.atoms)
    return s1


def power_space(space, n):
    return product_space(*([space] * n))


@dataclass(frozen=True, eq=False)
class MarkovKernel:
    """Row-stochastic matrix; ``matrix[i, j]`` is the probability of
    target label ``j`` given source label ``i``."""

    source: OutcomeSpace
    target: OutcomeSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (len(self.source), len(self.target)):
            raise InvalidKernel(
                f"kernel shape {m.shape} does not match spaces "
                f"({len(self.source)}, {len(self.target)})"
            )
        if np.any(m < -ROW_TOL) or not np.all(np.isfinite(m)):
            raise InvalidKernel("kernel has negative or non-finite entries")
        m = np.clip(m, 0.0, None)
        sums = m.sum(axis=1)
        bad = np.abs(sums - 1.0) > ROW_TOL
        if np.any(bad):
            i = int(np.argmax(bad))
            raise InvalidKernel(f"row {self.source.labels[i]!r} sums to {sums[i]!r}")
        m /= sums[:, None]
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def row(self, label):
        return dict(zip(self.target.labels, self.matrix[self.source.index(label)]))

    def __call__(self, source_label, target_labels):
        """Probability ``nu_source(B)`` of the set ``target_labels``."""
        row = self.matrix[self.source.index(source_label)]
        return float(sum(row[self.target.index(t)] for t in target_labels))


def identity_kernel(space):
    return MarkovKernel(space, space, np.eye(len(space)))


def deterministic_kernel(source, target, f):
    """Kernel sending each source label ``x`` to the point mass at ``f(x)``."""
    m = np.zeros((len(source), len(target)))
    for i, x in enumerate(source.labels):
        m[i, target.index(f(x))] = 1.0
    return MarkovKernel(source, target, m)


def compose_kernels(nu1, nu2):
    """Kernel ``Omega3 -> Omega1`` obtained by running ``nu2`` then ``nu1``."""
    if nu1.source != nu2.target:
        raise SpaceMismatch("nu1.source must equal nu2.target")
    return MarkovKernel(nu2.source, nu1.target, nu2.matrix @ nu1.matrix)


def extend_kernel(nu, omega1):
    """Lift ``nu: Omega3 -> Omega2`` to ``Omega1 x Omega3 -> Omega1 x Omega2``,
    carrying the first coordinate through unchanged."""
    m = np.kron(np.eye(len(omega1)), nu.matrix)
    return MarkovKernel(product_space(omega1, nu.source), product_space(omega1, nu.target), m)


def marginal_kernel(nu, keep):
    """Sum a kernel into a product space over the discarded factors.

    ``keep`` is a factor index, a sequence of factor indices, or one of
    ``"first"`` / ``"second"`` for a two-factor target.
    """
    target = nu.target
    if not target.is_product:
        raise NotProductSpace("marginal_kernel needs a product target space")
    factors = target.factors
    if keep == "first":
        keep = [0]
    elif keep == "second":
        keep = [1]
    elif isinstance(keep, (int, np.integer)):
        keep = [int(keep)]
    keep = sorted(set(int(k) for k in keep))
    if not keep or keep[0] < 0 or keep[-1] >= len(factors):
        raise ValueError(f"bad factor selection {keep!r}")
    shape = [len(f) for f in factors]
    t = nu.matrix.reshape([len(nu.source)] + shape)
    drop = tuple(1 + i for i in range(len(factors)) if i not in keep)
    t = t.sum(axis=drop) if drop else t
    kept = product_space(*[factors[i] for i in keep])
    return MarkovKernel(nu.source, kept, t.reshape(len(nu.source), len(kept)))


def random_kernel(source, target, rng, sparsity=0.0):
    m = rng.random((len(source), len(target)))
    if sparsity:
        m[rng.random(m.shape) < sparsity] = 0.0
        empty = m.sum(axis=1) == 0
        m[empty, 0] = 1.0
    return MarkovKernel(source, target, m / m.sum(axis=1, keepdims=True))
