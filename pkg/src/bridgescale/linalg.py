"""Dense Hermitian linear algebra and the Hilbert projective metric.

All functions take and return plain numpy arrays.  Hermitian inputs are
re-hermitized on entry, so callers never need to symmetrize by hand.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import EPS_PD, EPS_PSD
from .errors import NonFiniteInputError, NotPDError, NotPSDError, ValidationError


class EigenDecomposition(NamedTuple):
    """Eigenvalues in descending order and matching unitary eigenvectors (columns)."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self):
        return (self.vectors * self.values) @ self.vectors.conj().T


@dataclass(frozen=True)
class SpectralBand:
    """Closed interval ``[a, b]`` containing the spectrum of a Hermitian matrix."""

    a: float
    b: float
    trace_one: bool

    def __post_init__(self):
        if self.a > self.b:
            raise ValueError(f"empty band: a={self.a} > b={self.b}")

    def contains(self, x, slack=0.0):
        return self.a - slack <= x <= self.b + slack


def hermitian(X):
    """Return ``(X + X*)/2`` as a complex array, rejecting NaN/Inf."""
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NonFiniteInputError("matrix has non-finite entries")
    return (X + X.conj().T) / 2


def hermitian_eig(X, method="lapack"):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    ``method="lapack"`` uses ``numpy.linalg.eigh``; ``method="jacobi"`` runs
    the cyclic Jacobi sweep in :func:`jacobi_eigh`.
    """
    X = hermitian(X)
    if method == "lapack":
        w, V = np.linalg.eigh(X)
    elif method == "jacobi":
        w, V = jacobi_eigh(X)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    order = np.argsort(w, kind="stable")[::-1]
    return EigenDecomposition(w[order], V[:, order])


def jacobi_eigh(X, tol=1e-14, max_sweeps=64):
    """Cyclic Jacobi eigensolver for complex Hermitian matrices.

    Returns ``(w, V)`` with ``X = V diag(w) V*``, eigenvalues unsorted.
    Sweeps stop once the off-diagonal Frobenius mass drops below
    ``tol * ||X||_F``.
    """
    A = hermitian(X).copy()
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(A), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                r = abs(apq)
                if r <= 1e-300:
                    continue
                phase = apq / r
                app, aqq = A[p, p].real, A[q, q].real
                # real rotation on the phase-corrected pair zeroes A[p, q]
                tau = (aqq - app) / (2.0 * r)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                G = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                A[:, idx] = A[:, idx] @ G
                A[idx, :] = G.conj().T @ A[idx, :]
                A[p, q] = A[q, p] = 0.0
                V[:, idx] = V[:, idx] @ G
    return np.diag(A).real.copy(), V


def eigvalsh_desc(X):
    return np.linalg.eigvalsh(hermitian(X))[::-1]


def _apply_spectral(decomp, f):
    V = decomp.vectors
    return hermitian((V * f(decomp.values)) @ V.conj().T)


def psd_sqrt(X):
    """Principal square root of a PSD matrix.

    Eigenvalues down to ``-EPS_PSD * max(1, lambda_1)`` are clipped to zero;
    anything more negative raises :class:`NotPSDError`.
    """
    decomp = hermitian_eig(X)
    w = decomp.values
    floor = -EPS_PSD * max(1.0, w[0])
    if w[-1] < floor:
        raise NotPSDError(f"smallest eigenvalue {w[-1]:.3e} below {floor:.3e}")
    return _apply_spectral(decomp, lambda v: np.sqrt(np.clip(v, 0.0, None)))


def _pd_decomp(X, what="matrix"):
    decomp = hermitian_eig(X)
    if not decomp.values[-1] > EPS_PD:
        raise NotPDError(f"{what} is not positive definite "
                         f"(smallest eigenvalue {decomp.values[-1]:.3e})")
    return decomp


def pd_sqrt(X):
    return _apply_spectral(_pd_decomp(X), np.sqrt)


def pd_inv_sqrt(X):
    """``X^{-1/2}`` for positive definite ``X``."""
    return _apply_spectral(_pd_decomp(X), lambda v: v ** -0.5)


def pd_inv(X):
    return _apply_spectral(_pd_decomp(X), lambda v: 1.0 / v)


def hilbert_distance(X, Y):
    """Hilbert projective distance between two positive definite matrices.

    Computed as ``log(l_max/l_min)`` of ``Y^{-1/2} X Y^{-1/2}``, which has the
    same spectrum as ``X Y^{-1}`` but is Hermitian.
    """
    _pd_decomp(X, "first argument")
    R = pd_inv_sqrt(Y)
    w = np.linalg.eigvalsh(hermitian(R @ hermitian(X) @ R))
    if not w[0] > 0:
        raise NotPDError("relative spectrum is not positive")
    return max(float(np.log(w[-1]) - np.log(w[0])), 0.0)


def traceless_basis(n):
    """Frobenius-orthonormal basis of the traceless Hermitian ``n x n`` matrices.

    Ordering: real symmetric off-diagonal units, imaginary antisymmetric
    off-diagonal units, then the ``n - 1`` generalized Gell-Mann diagonals.
    """
    if n < 2:
        raise ValueError("traceless Hermitian space is trivial for n < 2")
    basis = []
    s = 1.0 / np.sqrt(2.0)
    for j in range(n):
        for k in range(j + 1, n):
            E = np.zeros((n, n), dtype=complex)
            E[j, k] = E[k, j] = s
            basis.append(E)
    for j in range(n):
        for k in range(j + 1, n):
            E = np.zeros((n, n), dtype=complex)
            E[j, k] = -1j * s
            E[k, j] = 1j * s
            basis.append(E)
    for m in range(1, n):
        d = np.zeros(n)
        d[:m] = 1.0
        d[m] = -m
        basis.append(np.diag(d / np.sqrt(m * (m + 1))).astype(complex))
    return basis


def frobenius_inner(X, Y):
    """Real part of ``tr(X Y*)``."""
    return float(np.real(np.vdot(Y, X)))


def band_of(X):
    w = eigvalsh_desc(X)
    tr = float(np.sum(w))
    return SpectralBand(float(w[-1]), float(w[0]), bool(abs(tr - 1.0) <= 1e-12))


def as_density(X, strict=True):
    """Validate and normalize a density matrix.

    Re-hermitizes and rescales to unit trace.  With ``strict=True`` the result
    must be positive definite (``lambda_n > EPS_PD``), otherwise PSD within
    the relative clipping tolerance.
    """
    X = hermitian(X)
    tr = np.trace(X).real
    if not tr > 0:
        raise ValidationError(f"density matrix needs positive trace, got {tr:.3e}")
    X = X / tr
    w = np.linalg.eigvalsh(X)
    if strict:
        if not w[0] > EPS_PD:
            raise NotPDError(f"density matrix is not positive definite "
                             f"(smallest eigenvalue {w[0]:.3e})")
    elif w[0] < -EPS_PSD * max(1.0, w[-1]):
        raise NotPSDError(f"density matrix is not PSD (smallest eigenvalue {w[0]:.3e})")
    return X


def random_unitary(n, rng):
    """Haar-distributed unitary via QR of a complex Ginibre matrix."""
    G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Qm, Rm = np.linalg.qr(G)
    d = np.diag(Rm)
    return Qm * (d / np.abs(d))


def random_density(n, rng, rank=None):
    """Wishart density ``G G*/tr(G G*)`` with complex Gaussian ``G`` of shape ``n x rank``."""
    m = n if rank is None else rank
    G = rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
    X = G @ G.conj().T
    return hermitian(X / np.trace(X).real)


def nearest_unitary(M):
    """Unitary polar factor of ``M`` (``U V*`` from the SVD)."""
    U, _, Vh = np.linalg.svd(M)
    return U @ Vh
