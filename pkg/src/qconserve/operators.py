"""Dense complex operators on a finite-dimensional Hilbert space.

Operators are plain ``numpy`` complex128 arrays of shape ``(d, d)``.  The
Hermitian eigensolver is a cyclic Jacobi iteration so that positivity
checks are reproducible bit-for-bit across platforms.
"""

import numpy as np

from .errors import DimMismatch, NotHermitian

TOL_HERM = 1e-9
TOL_PSD = 1e-9
TOL_TRACE = 1e-9

_EPS = np.finfo(float).eps


def as_operator(a):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatch(f"operator must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("operator has non-finite entries")
    return a


def identity(d):
    return np.eye(d, dtype=np.complex128)


def ket(n, d):
    v = np.zeros(d, dtype=np.complex128)
    v[n] = 1.0
    return v


def projector(n, d):
    p = np.zeros((d, d), dtype=np.complex128)
    p[n, n] = 1.0
    return p


def adjoint(a):
    return np.conj(np.swapaxes(a, -1, -2))


def max_abs_diff(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b)))


def max_norm(a):
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def hermiticity_defect(a):
    return max_abs_diff(a, adjoint(a))


def is_hermitian(a, tol=TOL_HERM):
    return hermiticity_defect(a) <= tol * max(1.0, max_norm(a))


def _jacobi_rotation(app, aqq, apq):
    """Unitary 2x2 block that zeroes the (p, q) entry of a Hermitian pair."""
    mag = abs(apq)
    phase = apq / mag
    tau = (aqq - app) / (2.0 * mag)
    t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    ph = np.conj(phase)
    return np.array([[c, s], [-s * ph, c * ph]], dtype=np.complex128)


def hermitian_eigen(a, tol_herm=TOL_HERM, max_sweeps=100):
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi sweeps.

    Returns ``(w, v)`` with ascending real eigenvalues ``w`` and unitary ``v``
    such that ``a = v @ diag(w) @ v^H``.  Pairs are visited in row-major
    order of the strict upper triangle, so results are deterministic.
    """
    a = as_operator(a)
    if not is_hermitian(a, tol_herm):
        raise NotHermitian(f"hermiticity defect {hermiticity_defect(a):.3e}")
    d = a.shape[0]
    work = 0.5 * (a + adjoint(a))
    v = identity(d)
    scale = max(max_norm(work), np.finfo(float).tiny)
    threshold = _EPS * scale
    for _ in range(max_sweeps):
        off = np.linalg.norm(work - np.diag(np.diag(work)))
        if off <= threshold:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = work[p, q]
                if abs(apq) <= 0.01 * threshold:
                    continue
                g = _jacobi_rotation(work[p, p].real, work[q, q].real, apq)
                idx = [p, q]
                work[:, idx] = work[:, idx] @ g
                work[idx, :] = adjoint(g) @ work[idx, :]
                work[p, q] = work[q, p] = 0.0
                work[p, p] = work[p, p].real
                work[q, q] = work[q, q].real
                v[:, idx] = v[:, idx] @ g
    w = np.real(np.diag(work)).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def eigvalsh(a, tol_herm=TOL_HERM):
    return hermitian_eigen(a, tol_herm)[0]


def min_eigenvalue(a, tol_herm=TOL_HERM):
    a = as_operator(a)
    if np.count_nonzero(a - np.diag(np.diag(a))) == 0:
        if np.any(np.abs(np.diag(a).imag) > tol_herm * max(1.0, max_norm(a))):
            raise NotHermitian("diagonal has imaginary entries")
        return float(np.min(np.diag(a).real))
    return float(hermitian_eigen(a, tol_herm)[0][0])


def is_psd(a, tol=TOL_PSD):
    """True iff the smallest eigenvalue is at least ``-tol * max(1, |a|_max)``."""
    return min_eigenvalue(a, tol) >= -tol * max(1.0, max_norm(a))


def psd_sqrt(a, tol=TOL_PSD):
    """Positive square root; eigenvalues in ``[-tol, 0)`` are clamped to zero."""
    a = as_operator(a)
    if np.count_nonzero(a - np.diag(np.diag(a))) == 0:
        diag = np.diag(a).real
        if diag.min(initial=0.0) < -tol * max(1.0, max_norm(a)):
            raise ValueError("operator is not positive semidefinite")
        return np.diag(np.sqrt(np.clip(diag, 0.0, None))).astype(np.complex128)
    w, v = hermitian_eigen(a, tol)
    if w[0] < -tol * max(1.0, max_norm(a)):
        raise ValueError("operator is not positive semidefinite")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ adjoint(v)


def density_state(rho, tol_herm=TOL_HERM, tol_psd=TOL_PSD, tol_trace=TOL_TRACE):
    """Validate and return a density matrix (Hermitian, PSD, unit trace)."""
    rho = as_operator(rho)
    if not is_hermitian(rho, tol_herm):
        raise NotHermitian("density matrix is not Hermitian")
    if not is_psd(rho, tol_psd):
        raise ValueError("density matrix has a negative eigenvalue")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol_trace:
        raise ValueError(f"density matrix trace {tr!r} differs from 1")
    return rho


def diag_state(weights):
    """Diagonal density matrix from (unnormalized) nonnegative weights."""
    w = np.asarray(weights, dtype=float)
    return np.diag(w / w.sum()).astype(np.complex128)


def random_hermitian(d, rng):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (g + adjoint(g))


def random_density(d, rng, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ adjoint(g)
    return rho / np.trace(rho).real
