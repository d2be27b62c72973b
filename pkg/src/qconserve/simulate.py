"""Monte Carlo sampling of repeated measurements.

Every trajectory owns a Philox generator keyed by a splitmix64 hash of
``(master_seed, index)``, so an ensemble is bit-identical to running its
trajectories one by one, whatever the batching.

Two samplers are provided:

* a density-matrix sampler for any finite :class:`Instrument`;
* :class:`FockChain`, an exact sampler for the photon-counting and
  quantum-counter models on the untruncated Fock space.  Their Kraus
  operators map number states to number states, so the outcome sequence
  is a Markov chain on the photon number; this reaches photon numbers far
  beyond any truncation (``exp(lambda_t k)`` grows quickly).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DeadEnd, DimMismatch, InvalidParams
from .instrument import PROB_FLOOR, induced_povm
from .models import p_pc, p_qc

RENORM_TOL = 1e-10
_MASK64 = (1 << 64) - 1


def splitmix64(z):
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def trajectory_seed(master_seed, index):
    """64-bit seed of trajectory ``index``: splitmix64 of the mixed pair."""
    return splitmix64(splitmix64(int(master_seed) & _MASK64) ^ (int(index) & _MASK64))


def make_rng(seed):
    return np.random.Generator(np.random.Philox(key=int(seed)))


@dataclass
class Trajectory:
    outcomes: list
    probs: np.ndarray
    final_state: np.ndarray = field(repr=False)


def _check_state(ins, rho0):
    rho0 = np.asarray(rho0, dtype=np.complex128)
    if rho0.shape != (ins.dim, ins.dim):
        raise DimMismatch(f"state shape {rho0.shape} does not match instrument dim {ins.dim}")
    return rho0


def _run_batch(ins, effects, rho0, uniforms, prob_floor=PROB_FLOOR):
    """Evolve a batch of trajectories; ``uniforms[i, s]`` drives step ``s`` of trajectory ``i``."""
    n, k = uniforms.shape
    states = np.broadcast_to(rho0, (n,) + rho0.shape).copy()
    choices = np.empty((n, k), dtype=np.int64)
    probs = np.empty((n, k))
    n_out = effects.shape[0]
    for s in range(k):
        p = np.einsum("nij,mji->nm", states, effects).real
        p = np.clip(p, 0.0, None)
        total = p.sum(axis=1)
        if np.any(total <= prob_floor) or np.any(np.abs(total - 1.0) > RENORM_TOL):
            bad = int(np.argmax((total <= prob_floor) | (np.abs(total - 1.0) > RENORM_TOL)))
            raise DeadEnd(f"branch probabilities sum to {total[bad]!r} at step {s}")
        p /= total[:, None]
        cdf = np.cumsum(p, axis=1)
        c = np.minimum((cdf <= uniforms[:, s, None]).sum(axis=1), n_out - 1)
        # u may exceed the rounded cdf total; fall back to the last live outcome
        dead = p[np.arange(n), c] <= prob_floor
        if np.any(dead):
            for i in np.nonzero(dead)[0]:
                c[i] = int(np.nonzero(p[i] > prob_floor)[0][-1])
        kr = ins.kraus[c]
        sigma = np.einsum("nkab,nbc,nkdc->nad", kr, states, kr.conj(), optimize=True)
        tr = np.einsum("naa->n", sigma).real
        states = sigma / tr[:, None, None]
        states = 0.5 * (states + np.conj(np.swapaxes(states, 1, 2)))
        choices[:, s] = c
        probs[:, s] = p[np.arange(n), c]
    return choices, probs, states


def sample_trajectory(ins, rho0, k, seed):
    """One trajectory of ``k`` successive measurements starting from ``rho0``.

    Outcomes are drawn by inverse CDF in label order from the branch
    probabilities of the current state.
    """
    if k < 1:
        raise InvalidParams("k must be >= 1")
    rho0 = _check_state(ins, rho0)
    u = make_rng(seed).random(k)[None]
    c, p, states = _run_batch(ins, induced_povm(ins).effects, rho0, u)
    return Trajectory([ins.space.labels[j] for j in c[0]], p[0], states[0])


@dataclass(frozen=True)
class FockChain:
    """Exact number-basis sampler for ``"photon_counting"`` or ``"quantum_counter"``."""

    kind: str
    lambda_t: float

    def __post_init__(self):
        if self.kind not in ("photon_counting", "quantum_counter"):
            raise InvalidParams(f"unknown chain kind {self.kind!r}")
        if not self.lambda_t > 0:
            raise InvalidParams("lambda_t must be positive")

    def step(self, n, rng):
        """Draw one count ``m`` from photon number ``n``; return ``(m, next n)``."""
        if self.kind == "photon_counting":
            m = int(rng.binomial(n, -np.expm1(-self.lambda_t)))
            return m, n - m
        m = int(rng.negative_binomial(n + 1, np.exp(-self.lambda_t)))
        return m, n + m

    def branch_prob(self, m, n):
        if self.kind == "photon_counting":
            return p_pc(m, n, self.lambda_t)
        return p_qc(m, n, self.lambda_t)

    def run(self, number_law, k, seed):
        """Counts ``m_1..m_k`` and the photon numbers before each step."""
        rng = make_rng(seed)
        cdf = np.cumsum(number_law)
        n = int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(cdf) - 1))
        counts = np.empty(k, dtype=np.int64)
        before = np.empty(k, dtype=np.int64)
        for s in range(k):
            before[s] = n
            counts[s], n = self.step(n, rng)
        return counts, before


def number_law(rho0):
    """Photon-number distribution ``<n|rho|n>``."""
    w = np.clip(np.real(np.diag(np.asarray(rho0))), 0.0, None)
    return w / w.sum()


@dataclass
class Ensemble:
    """Raw ensemble output, indexed ``[trajectory, step]``.

    ``choices`` holds outcome indices into ``labels`` (for a FockChain,
    ``labels`` is None and choices are the counts themselves).
    """

    labels: list
    choices: np.ndarray
    counts: np.ndarray  # numeric count per step, NaN for non-numeric labels
    probs: np.ndarray

    def label_at(self, i, s):
        c = int(self.choices[i, s])
        return c if self.labels is None else self.labels[c]


def run_ensemble(source, rho0, k, n_traj, master_seed, chunk=None):
    """Sample ``n_traj`` trajectories of length ``k`` from an Instrument or FockChain."""
    if n_traj < 1 or k < 1:
        raise InvalidParams("n_traj and k must be >= 1")
    seeds = [trajectory_seed(master_seed, i) for i in range(n_traj)]
    if isinstance(source, FockChain):
        law = number_law(rho0)
        counts = np.empty((n_traj, k), dtype=np.int64)
        before = np.empty((n_traj, k), dtype=np.int64)
        for i, s in enumerate(seeds):
            counts[i], before[i] = source.run(law, k, s)
        probs = source.branch_prob(counts.astype(float), before.astype(float))
        return Ensemble(None, counts, counts.astype(float), np.asarray(probs, dtype=float))

    ins = source
    rho0 = _check_state(ins, rho0)
    effects = induced_povm(ins).effects
    if chunk is None:
        chunk = max(1, min(n_traj, 4_000_000 // max(1, ins.dim ** 2 * ins.kraus.shape[1])))
    choices = np.empty((n_traj, k), dtype=np.int64)
    probs = np.empty((n_traj, k))
    for lo in range(0, n_traj, chunk):
        hi = min(n_traj, lo + chunk)
        u = np.array([make_rng(s).random(k) for s in seeds[lo:hi]])
        choices[lo:hi], probs[lo:hi], _ = _run_batch(ins, effects, rho0, u)
    labels = ins.space.labels
    values = np.array(
        [float(lab) if isinstance(lab, int) else np.nan for lab in labels], dtype=float
    )
    return Ensemble(labels, choices, values[choices], probs)


@dataclass
class ConvergenceStats:
    statistic: str  # "Mk" | "Xk"
    k: int
    values: np.ndarray = field(repr=False)
    mean: float
    var: float
    distribution: dict = field(repr=False)
    tv: float = None
    reference: dict = field(default=None, repr=False)
    n_invalid: int = 0


def total_variation(p, q):
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(x, 0.0) - q.get(x, 0.0)) for x in keys)


def empirical_law(values):
    vals, cnt = np.unique(values, return_counts=True)
    total = cnt.sum()
    return {(int(v) if float(v).is_integer() else float(v)): float(c / total) for v, c in zip(vals, cnt)}


def stats_from_ensemble(ens, k, statistic="Mk", lambda_t=None, reference=None):
    mk = ens.counts.sum(axis=1)
    ok = np.isfinite(mk)
    if statistic == "Mk":
        values = mk
    elif statistic == "Xk":
        if lambda_t is None:
            raise InvalidParams("Xk needs lambda_t")
        values = np.exp(-lambda_t * k) * mk
    else:
        raise InvalidParams(f"unknown statistic {statistic!r}")
    good = values[ok]
    law = empirical_law(good) if statistic == "Mk" else {}
    tv = total_variation(law, reference) if reference is not None and statistic == "Mk" else None
    return ConvergenceStats(
        statistic, k, values, float(good.mean()), float(good.var(ddof=1)) if good.size > 1 else 0.0,
        law, tv, reference, int((~ok).sum()),
    )


def ensemble_stats(source, rho0, k, n_traj, master_seed, statistic="Mk", lambda_t=None,
                   reference=None):
    """Sample an ensemble and summarize ``M_k = sum m_i`` or ``X_k = e^{-lambda_t k} M_k``."""
    if lambda_t is None and isinstance(source, FockChain):
        lambda_t = source.lambda_t
    ens = run_ensemble(source, rho0, k, n_traj, master_seed)
    return stats_from_ensemble(ens, k, statistic, lambda_t, reference)


def product_means(x, lambda_t, k):
    """Poisson means ``(e^{lambda_t} - 1) e^{lambda_t (i-1)} x`` for ``i = 1..k``."""
    return np.expm1(lambda_t) * np.exp(lambda_t * np.arange(k)) * x


def classical_product_sampler(x, lambda_t, k, seed):
    """Independent Poisson counts with escalating means, given intensity ``x``."""
    if x < 0:
        raise InvalidParams("x must be >= 0")
    return make_rng(seed).poisson(product_means(x, lambda_t, k))


def classical_xk(x, lambda_t, k, n_draws, master_seed):
    """``X_k = e^{-lambda_t k} sum_i m_i`` for ``n_draws`` independent product draws."""
    out = np.empty(n_draws)
    scale = np.exp(-lambda_t * k)
    means = product_means(x, lambda_t, k)
    for i in range(n_draws):
        out[i] = scale * make_rng(trajectory_seed(master_seed, i)).poisson(means).sum()
    return out


def xk_moments(x, lambda_t, k):
    """Exact mean and variance of ``X_k`` under the product law at intensity ``x``."""
    q = np.exp(-lambda_t * k)
    return (1.0 - q) * x, q * (1.0 - q) * x


def concentration_fraction(x, lambda_t, k, n_draws, master_seed):
    """Fraction of draws with ``|X_k - x| > exp(-lambda_t k / 4)`` and its
    Chebyshev bound ``exp(lambda_t k / 2) E|X_k - x|^2``."""
    xs = classical_xk(x, lambda_t, k, n_draws, master_seed)
    frac = float(np.mean(np.abs(xs - x) > np.exp(-lambda_t * k / 4.0)))
    mean, var = xk_moments(x, lambda_t, k)
    bound = float(np.exp(lambda_t * k / 2.0) * (var + (mean - x) ** 2))
    return frac, bound
