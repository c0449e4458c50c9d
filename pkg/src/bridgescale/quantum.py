"""Completely positive maps in Kraus form and the quantum bridge solver.

The fixed-point map is ``Phi = D_alpha o Qtilde o D_beta o Q`` on unit-trace
positive definite matrices.  A fixed point ``U`` yields Hermitian scalings
``S``, ``T`` and a unitary ``O`` such that ``R(X) = O* S Q(T X T) S O`` is a
channel with ``R(alpha) = beta``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .config import EPS_PD, SolverConfig
from .errors import (DimensionMismatchError, NoConvergenceError, NotConvergedError,
                     NotPDError, NotPositiveError, NotStochasticError, NotUnitaryError,
                     ValidationError, ZeroTraceError)
from .linalg import (as_density, hermitian, hilbert_distance, nearest_unitary, pd_inv,
                     pd_inv_sqrt, pd_sqrt, random_unitary)

CHANNEL_TOL = 1e-10
UNITARY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class KrausMap:
    """``X -> sum_i A_i X A_i*`` stored as a ``(k, n, n)`` complex array."""

    kraus: np.ndarray

    def __post_init__(self):
        K = np.asarray(self.kraus, dtype=complex)
        if K.ndim == 2:
            K = K[None]
        if K.ndim != 3 or K.shape[0] < 1 or K.shape[1] != K.shape[2]:
            raise ValidationError(f"Kraus operators must be k square matrices, got {K.shape}")
        if not np.all(np.isfinite(K)):
            raise ValidationError("Kraus operators have non-finite entries")
        K.setflags(write=False)
        object.__setattr__(self, "kraus", K)

    @property
    def n(self):
        return self.kraus.shape[1]

    @property
    def k(self):
        return self.kraus.shape[0]

    def __call__(self, X):
        return apply(self, X)

    def dual(self):
        return KrausMap(np.conj(np.transpose(self.kraus, (0, 2, 1))))

    @cached_property
    def channel_defect(self):
        """``||sum A_i* A_i - I||_F``."""
        K = self.kraus
        return float(np.linalg.norm(np.einsum("kji,kjl->il", K.conj(), K) - np.eye(self.n)))

    @cached_property
    def unital_defect(self):
        K = self.kraus
        return float(np.linalg.norm(np.einsum("kij,klj->il", K, K.conj()) - np.eye(self.n)))

    @property
    def is_channel(self):
        return self.channel_defect <= CHANNEL_TOL

    @property
    def is_unital(self):
        return self.is_channel and self.unital_defect <= CHANNEL_TOL


def _check_dim(Q, X):
    X = hermitian(X)
    if X.shape[0] != Q.n:
        raise DimensionMismatchError(f"map acts on n={Q.n}, got a {X.shape[0]}x{X.shape[0]} input")
    return X


def apply(Q, X):
    """``Q(X) = sum_i A_i X A_i*``."""
    X = _check_dim(Q, X)
    K = Q.kraus
    return hermitian(np.einsum("kij,jl,kml->im", K, X, K.conj()))


def apply_dual(Q, X):
    """``Q'(X) = sum_i A_i* X A_i``, the trace-inner-product adjoint of ``Q``."""
    X = _check_dim(Q, X)
    K = Q.kraus
    return hermitian(np.einsum("kji,jl,klm->im", K.conj(), X, K))


def tilde_Q(Q, X):
    """``Q'(X)`` rescaled to unit trace."""
    Y = apply_dual(Q, X)
    tr = np.trace(Y).real
    if not tr > EPS_PD:
        raise ZeroTraceError(f"tr Q'(X) = {tr:.3e}")
    return Y / tr


def d_alpha(alpha, X):
    """``X^{-1/2} alpha X^{-1/2} / tr(X^{-1} alpha)``."""
    R = pd_inv_sqrt(X)
    Y = hermitian(R @ hermitian(alpha) @ R)
    return Y / np.trace(Y).real


def _stages(Q, alpha, beta, X):
    V = apply(Q, X)
    try:
        R = pd_inv_sqrt(V)
    except NotPDError as exc:
        raise NotPositiveError(f"Q(X) is not positive definite: {exc}") from exc
    W = hermitian(R @ beta @ R)
    W = W / np.trace(W).real
    Z = tilde_Q(Q, W)
    U = d_alpha(alpha, Z)
    return V, W, Z, U


def phi_map(Q, alpha, beta, X):
    """One application of ``D_alpha o Qtilde o D_beta o Q``."""
    return _stages(Q, hermitian(alpha), hermitian(beta), X)[3]


@dataclass
class BridgeSolution:
    """Fixed point, scaling factors and the scaled channel.

    ``trace`` holds ``||Phi(X_m) - X_m||_F`` per iteration and
    ``hilbert_trace`` the matching Hilbert-metric steps.
    """

    U: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    residual_fixed: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)
    hilbert_trace: list = field(default_factory=list)
    S: np.ndarray = None
    T: np.ndarray = None
    O: np.ndarray = None
    R: KrausMap = None
    residual_channel: float = np.nan
    residual_bridge: float = np.nan
    unitarity_defect: float = np.nan


@dataclass
class ScaledChannel:
    S: np.ndarray
    T: np.ndarray
    O: np.ndarray
    R: KrausMap
    residual_channel: float
    residual_bridge: float
    unitarity_defect: float


def build_scaled_channel(Q, alpha, beta, U):
    """Turn an (approximate) fixed point ``U`` into the scaled channel ``R``."""
    alpha = hermitian(alpha)
    beta = hermitian(beta)
    V, W, Z, _ = _stages(Q, alpha, beta, U)
    QpW = apply_dual(Q, W)
    t = 1.0 / np.sqrt(np.trace(QpW).real)
    T = t * pd_inv_sqrt(Z)
    S = pd_sqrt(W)
    r = 1.0 / np.sqrt(np.trace(pd_inv(V) @ beta).real)
    O = r * pd_inv_sqrt(W) @ pd_inv_sqrt(V) @ pd_sqrt(beta)
    defect = float(np.linalg.norm(O @ O.conj().T - np.eye(Q.n)))
    if defect > UNITARY_TOL:
        raise NotUnitaryError(f"||O O* - I||_F = {defect:.3e}; scalings are too ill-conditioned")
    O = nearest_unitary(O)
    R = KrausMap(O.conj().T @ S @ Q.kraus @ T)
    return ScaledChannel(S, T, O, R, R.channel_defect,
                         float(np.linalg.norm(apply(R, alpha) - beta)), defect)


def _anderson_step(xs, gs, m=5):
    """Anderson (type II) mixing on flattened real iterates."""
    X = np.array(xs[-(m + 1):])
    G = np.array(gs[-(m + 1):])
    F = G - X
    if len(F) < 2:
        return G[-1]
    dF = np.diff(F, axis=0).T
    dG = np.diff(G, axis=0).T
    gamma = np.linalg.lstsq(dF, F[-1], rcond=None)[0]
    return G[-1] - dG @ gamma


def _flatten(X):
    return np.concatenate([X.real.ravel(), X.imag.ravel()])


def _unflatten(v, n):
    return v[: n * n].reshape(n, n) + 1j * v[n * n:].reshape(n, n)


def solve_fixed_point(Q, alpha, beta, cfg=None, X0=None, build=True):
    """Picard iteration on ``Phi`` followed by :func:`build_scaled_channel`.

    Stops when ``||Phi(U) - U||_F <= tol`` and the Hilbert-metric step is at
    most ``10 tol``.  The returned ``U`` is the last verified iterate, so
    ``residual_fixed`` is exact for it.
    """
    cfg = cfg or SolverConfig()
    n = Q.n
    alpha = as_density(alpha)
    beta = as_density(beta)
    if alpha.shape[0] != n or beta.shape[0] != n:
        raise DimensionMismatchError("alpha/beta dimension differs from the channel")
    X = np.eye(n, dtype=complex) / n if X0 is None else as_density(X0)
    trace, htrace, xs, gs = [], [], [], []
    for it in range(1, cfg.max_iter + 1):
        Y = _stages(Q, alpha, beta, X)[3]
        res = float(np.linalg.norm(Y - X))
        step = hilbert_distance(Y, X)
        trace.append(res)
        htrace.append(step)
        if res <= cfg.tol and step <= 10 * cfg.tol:
            sol = BridgeSolution(X, alpha, beta, res, it, True, trace, htrace)
            return complete_solution(Q, sol) if build else sol
        nxt = Y
        if cfg.anderson:
            xs.append(_flatten(X))
            gs.append(_flatten(Y))
            cand = hermitian(_unflatten(_anderson_step(xs, gs), n))
            tr = np.trace(cand).real
            if tr > 0 and np.linalg.eigvalsh(cand / tr)[0] > EPS_PD:
                nxt = cand / tr
        elif cfg.damping < 1:
            nxt = (1 - cfg.damping) * X + cfg.damping * Y
        X = hermitian(nxt)
        X = X / np.trace(X).real
        if not np.linalg.eigvalsh(X)[0] > EPS_PD:
            raise NotPDError(f"iterate {it} lost positive definiteness")
    partial = BridgeSolution(X, alpha, beta, trace[-1], cfg.max_iter, False, trace, htrace)
    raise NoConvergenceError(
        f"no convergence after {cfg.max_iter} iterations (residual {trace[-1]:.3e})", partial)


def complete_solution(Q, sol):
    sc = build_scaled_channel(Q, sol.alpha, sol.beta, sol.U)
    sol.S, sol.T, sol.O, sol.R = sc.S, sc.T, sc.O, sc.R
    sol.residual_channel = sc.residual_channel
    sol.residual_bridge = sc.residual_bridge
    sol.unitarity_defect = sc.unitarity_defect
    return sol


@dataclass
class GPCertificate:
    """Matrices solving the coupled Schrodinger-bridge system and the six residuals."""

    phi_0: np.ndarray
    phi_T: np.ndarray
    phihat_0: np.ndarray
    phihat_T: np.ndarray
    chi_0: np.ndarray
    chi_T: np.ndarray
    residual_Q_phi_T: float
    residual_Qdual_phihat_0: float
    residual_rho_0: float
    residual_rho_T: float
    residual_phi_0: float
    residual_phi_T: float

    @property
    def residuals(self):
        return {
            "residual_Q_phi_T": self.residual_Q_phi_T,
            "residual_Qdual_phihat_0": self.residual_Qdual_phihat_0,
            "residual_rho_0": self.residual_rho_0,
            "residual_rho_T": self.residual_rho_T,
            "residual_phi_0": self.residual_phi_0,
            "residual_phi_T": self.residual_phi_T,
        }


def gp_certificate(Q, rho_0, rho_T, sol):
    """Certificate for the pair ``(rho_0, rho_T)`` from a solve with
    ``alpha = rho_T`` and ``beta = rho_0``."""
    if not sol.converged or sol.S is None:
        raise NotConvergedError("certificate needs a converged solution with a scaled channel")
    rho_0 = hermitian(rho_0)
    rho_T = hermitian(rho_T)
    if (np.linalg.norm(rho_T - sol.alpha) > 1e-12 or np.linalg.norm(rho_0 - sol.beta) > 1e-12):
        raise ValidationError("solution was computed for different marginals "
                              "(expects alpha = rho_T, beta = rho_0)")
    S, T, O = sol.S, sol.T, sol.O
    Sinv = pd_inv(S)
    phi_T = hermitian(T @ rho_T @ T)
    phi_0 = hermitian(Sinv @ O @ rho_0 @ O.conj().T @ Sinv)
    phihat_0 = hermitian(S @ S)
    phihat_T = pd_inv(T @ T)
    chi_0 = pd_sqrt(rho_0) @ O.conj().T @ Sinv
    chi_T = pd_sqrt(rho_T) @ T

    def nrm(M):
        return float(np.linalg.norm(M))

    return GPCertificate(
        phi_0, phi_T, phihat_0, phihat_T, chi_0, chi_T,
        residual_Q_phi_T=nrm(apply(Q, phi_T) - phi_0),
        residual_Qdual_phihat_0=nrm(apply_dual(Q, phihat_0) - phihat_T),
        residual_rho_0=nrm(rho_0 - chi_0 @ phihat_0 @ chi_0.conj().T),
        residual_rho_T=nrm(rho_T - chi_T @ phihat_T @ chi_T.conj().T),
        residual_phi_0=nrm(phi_0 - chi_0.conj().T @ chi_0),
        residual_phi_T=nrm(phi_T - chi_T.conj().T @ chi_T),
    )


def depolarizing(n, p):
    """Kraus set for ``X -> (1-p) X + p tr(X) I/n``."""
    ops = [np.sqrt(1 - p) * np.eye(n)] if p < 1 else []
    w = np.sqrt(p / n)
    for i in range(n):
        for j in range(n):
            E = np.zeros((n, n), dtype=complex)
            E[i, j] = w
            ops.append(E)
    return KrausMap(np.array(ops))


def identity_channel(n):
    return KrausMap(np.eye(n, dtype=complex)[None])


def _mix_depolarizing(K, n, p):
    ops = [np.sqrt(1 - p) * K] if p < 1 else []
    if p > 0:
        ops.append(depolarizing(n, 1.0).kraus * np.sqrt(p))
    return KrausMap(np.concatenate(ops))


def random_channel(n, k, p=0.0, seed=0):
    """Random channel ``(1-p) Q_G + p * depolarizing(1)``.

    ``Q_G`` comes from ``k`` complex Gaussian matrices right-normalized by
    ``(sum G_i* G_i)^{-1/2}``; the depolarizing mixture guarantees
    ``lambda_n(Q(X)) >= p/n`` on densities.
    """
    if n < 1 or k < 1 or not 0 <= p <= 1:
        raise ValueError("need n >= 1, k >= 1 and 0 <= p <= 1")
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(k, n, n)) + 1j * rng.normal(size=(k, n, n))
    Kn = pd_inv_sqrt(np.einsum("kji,kjl->il", G.conj(), G))
    return _mix_depolarizing(G @ Kn, n, p)


def random_unital_channel(n, k, p=0.0, seed=0):
    """Mixture of ``k`` Haar unitaries with random weights, mixed with depolarizing."""
    if n < 1 or k < 1 or not 0 <= p <= 1:
        raise ValueError("need n >= 1, k >= 1 and 0 <= p <= 1")
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(k))
    K = np.array([np.sqrt(wi) * random_unitary(n, rng) for wi in w])
    return _mix_depolarizing(K, n, p)


def diagonal_embedding(A):
    """Kraus set ``{sqrt(a_ij) E_ij}`` of a column-stochastic matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("expected a square matrix")
    if np.any(A < 0) or np.abs(A.sum(axis=0) - 1).max() > 1e-12:
        raise NotStochasticError("matrix must be nonnegative with unit column sums")
    n = A.shape[0]
    ops = []
    for i, j in zip(*np.nonzero(A)):
        E = np.zeros((n, n), dtype=complex)
        E[i, j] = np.sqrt(A[i, j])
        ops.append(E)
    return KrausMap(np.array(ops))

