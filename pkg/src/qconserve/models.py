"""Single-mode photodetection models on a truncated Fock space.

``lambda_t`` is the product of coupling strength and counting interval;
the models depend on the two only through ``exp(-lambda_t)``.

Photon counting removes counted photons and never raises the photon
number, so truncating at ``cutoff`` is exact.  The quantum counter adds
photons; it lives on ``cutoff + m_max + 1`` Fock levels so that states
supported on ``n <= cutoff`` evolve without truncation loss, and an
``"overflow"`` outcome absorbs the remaining normalization.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import GridDeficient, InvalidParams
from .instrument import Instrument
from .operators import TOL_PSD
from .outcomes import OutcomeSpace
from .povm import Povm

OVERFLOW = "overflow"
REST = "rest"


def _log_binom(n, m):
    return gammaln(n + 1.0) - gammaln(m + 1.0) - gammaln(n - m + 1.0)


def _check_lt(lambda_t):
    if not lambda_t > 0:
        raise InvalidParams(f"lambda_t must be positive, got {lambda_t!r}")


def p_pc(m, n, lambda_t):
    """Photon-counting count law: ``Binom(n, 1 - exp(-lambda_t))`` at ``m``."""
    _check_lt(lambda_t)
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    ok = (m >= 0) & (m <= n)
    mm = np.where(ok, m, 0.0)
    nn = np.where(ok, n, 0.0)
    log_hit = np.log(-np.expm1(-lambda_t))
    logp = _log_binom(nn, mm) + mm * log_hit - lambda_t * (nn - mm)
    out = np.where(ok, np.exp(logp), 0.0)
    return float(out) if out.ndim == 0 else out


def p_pc_k(m, n, lambda_t, k):
    """Total-count law after ``k`` photon-counting steps (interval ``k t``)."""
    if k < 1:
        raise InvalidParams("k must be >= 1")
    return p_pc(m, n, lambda_t * k)


def p_qc(m, n, lambda_t):
    """Quantum-counter count law: negative binomial
    ``C(n+m, m) (e^{lt} - 1)^m e^{-lt (n+m+1)}``."""
    _check_lt(lambda_t)
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    ok = (m >= 0) & (n >= 0)
    mm = np.where(ok, m, 0.0)
    nn = np.where(ok, n, 0.0)
    log_gain = np.log(np.expm1(lambda_t))
    logp = _log_binom(nn + mm, mm) + mm * log_gain - lambda_t * (nn + mm + 1.0)
    out = np.where(ok, np.exp(logp), 0.0)
    return float(out) if out.ndim == 0 else out


def p_qc_intensity(m, x, lambda_t):
    """Poisson law with mean ``(e^{lambda_t} - 1) x``."""
    _check_lt(lambda_t)
    m = np.asarray(m, dtype=float)
    mu = np.expm1(lambda_t) * np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        logp = np.where(mu > 0, m * np.log(np.where(mu > 0, mu, 1.0)) - mu - gammaln(m + 1.0), 0.0)
    out = np.where(mu > 0, np.exp(logp), (m == 0).astype(float))
    out = np.where(m >= 0, out, 0.0)
    return float(out) if out.ndim == 0 else out


def photon_counting_instrument(lambda_t, cutoff):
    """Kraus ``M_m = sum_n sqrt(p_pc(m | n + m)) |n><n + m|`` on levels ``0..cutoff``."""
    _check_lt(lambda_t)
    if cutoff < 0:
        raise InvalidParams("cutoff must be >= 0")
    d = cutoff + 1
    kraus = np.zeros((d, 1, d, d), dtype=np.complex128)
    for m in range(d):
        n = np.arange(d - m)
        kraus[m, 0, n, n + m] = np.sqrt(p_pc(m, n + m, lambda_t))
    return Instrument(OutcomeSpace.range(d), kraus)


def quantum_counter_instrument(lambda_t, cutoff, m_max):
    """Kraus ``M_m = sum_n sqrt(p_qc(m | n)) |n + m><n|`` for ``m <= m_max``
    plus a diagonal overflow Kraus ``(I - sum_m M_m^H M_m)^{1/2}``."""
    _check_lt(lambda_t)
    if cutoff < 0 or m_max < 0:
        raise InvalidParams("cutoff and m_max must be >= 0")
    d = cutoff + m_max + 1
    kraus = np.zeros((m_max + 2, 1, d, d), dtype=np.complex128)
    for m in range(m_max + 1):
        n = np.arange(d - m)
        kraus[m, 0, n + m, n] = np.sqrt(p_qc(m, n, lambda_t))
    captured = np.einsum("mkji,mkji->i", kraus.conj(), kraus).real
    kraus[-1, 0] = np.diag(np.sqrt(np.clip(1.0 - captured, 0.0, None)))
    space = OutcomeSpace(list(range(m_max + 1)) + [OVERFLOW])
    return Instrument(space, kraus)


def quantum_counter_dim(cutoff, m_max):
    return cutoff + m_max + 1


def number_povm(cutoff):
    d = cutoff + 1
    effects = np.zeros((d, d, d), dtype=np.complex128)
    effects[np.arange(d), np.arange(d), np.arange(d)] = 1.0
    return Povm(OutcomeSpace.range(d), effects)


def poisson_weights(x, dim):
    """Diagonal of ``F_x`` truncated to ``dim`` levels: ``e^{-x} x^n / n!``."""
    n = np.arange(dim, dtype=float)
    if x == 0:
        return (n == 0).astype(float)
    return np.exp(n * np.log(x) - x - gammaln(n + 1.0))


def poisson_effect(x, cutoff):
    if x < 0:
        raise InvalidParams("x must be >= 0")
    return np.diag(poisson_weights(x, cutoff + 1)).astype(np.complex128)


@dataclass(frozen=True)
class Grid:
    """Quadrature rule on ``(0, inf)`` used to discretize the intensity observable."""

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1 or nodes.size == 0:
            raise InvalidParams("grid needs matching 1-D nodes and weights")
        if np.any(weights <= 0) or np.any(nodes <= 0) or np.any(np.diff(nodes) <= 0):
            raise InvalidParams("grid nodes must increase in (0, inf) with positive weights")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size


def gauss_legendre_grid(n_nodes=64, x_max=40.0):
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    return Grid(0.5 * x_max * (t + 1.0), 0.5 * x_max * w)


def default_grid(cutoff, n_nodes=64):
    return gauss_legendre_grid(n_nodes, max(40.0, 5.0 * cutoff))


def x_povm(cutoff, grid=None, tol=TOL_PSD):
    """Quadrature shadow of the intensity observable on levels ``0..cutoff``.

    Outcome ``j`` has effect ``w_j F_{x_j}``; outcome ``"rest"`` collects
    ``I - sum_j w_j F_{x_j}``, which must be positive within ``tol``.
    """
    grid = default_grid(cutoff) if grid is None else grid
    d = cutoff + 1
    diag = np.array([w * poisson_weights(x, d) for x, w in zip(grid.nodes, grid.weights)])
    rest = 1.0 - diag.sum(axis=0)
    if rest.min() < -tol:
        raise GridDeficient(f"remainder effect has eigenvalue {rest.min():.3e}")
    rest = np.clip(rest, 0.0, None)
    diag = np.vstack([diag, rest])
    effects = np.zeros((diag.shape[0], d, d), dtype=np.complex128)
    effects[:, np.arange(d), np.arange(d)] = diag
    space = OutcomeSpace(list(range(len(grid))) + [REST])
    return Povm(space, effects, tol=tol)


@dataclass
class ModelParams:
    lambda_t: float
    cutoff: int
    m_max: int = 0
    grid_nodes: int = 64
    grid_x_max: float = None

    def __post_init__(self):
        problems = []
        if not (isinstance(self.lambda_t, (int, float)) and self.lambda_t > 0):
            problems.append("lambda_t must be a positive number")
        if not (isinstance(self.cutoff, int) and self.cutoff >= 0):
            problems.append("cutoff must be a nonnegative integer")
        if not (isinstance(self.m_max, int) and self.m_max >= 0):
            problems.append("m_max must be a nonnegative integer")
        if not (isinstance(self.grid_nodes, int) and self.grid_nodes >= 1):
            problems.append("grid.nodes must be a positive integer")
        if self.grid_x_max is not None and not self.grid_x_max > 0:
            problems.append("grid.x_max must be positive")
        if problems:
            raise InvalidParams("; ".join(problems))

    def grid(self):
        x_max = self.grid_x_max if self.grid_x_max is not None else max(40.0, 5.0 * self.cutoff)
        return gauss_legendre_grid(self.grid_nodes, x_max)


def embed_diag_state(weights, dim):
    """Diagonal density matrix with the given number-state weights, zero-padded."""
    w = np.zeros(dim)
    w[: len(weights)] = weights
    return np.diag(w / w.sum()).astype(np.complex128)
