"""Classical Schrodinger bridge: diagonal scaling of nonnegative matrices.

Given ``A >= 0`` and positive probability vectors ``alpha``, ``beta``, find
``B = D(d1) A D(d2)`` with unit column sums and ``B @ alpha = beta``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx
import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, maximum_bipartite_matching

from .config import SolverConfig
from .errors import (NoConvergenceError, TargetMismatchError, ValidationError,
                     ZeroColumnError, ZeroRowError)

# Newton refinement is only attempted on a geometrically converging tail.
_NEWTON_START = 1e-3
_NEWTON_RATE = 0.9
_NEWTON_STEPS = 8
_DAMPING_FLOOR = 1.0 / 16


def prob_vector(x, name="vector", tol=1e-12):
    """Validate a strictly positive probability vector."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValidationError(f"{name} must be a nonempty 1-d vector")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.any(x <= 0):
        raise ValidationError(f"{name} must be strictly positive")
    if abs(x.sum() - 1.0) > tol:
        raise ValidationError(f"{name} sums to {x.sum()!r}, not 1")
    return x


def _square_nonneg(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)) or np.any(A < 0):
        raise ValidationError("matrix entries must be finite and nonnegative")
    return A


def _require_no_zero_col(A):
    if np.any(A.sum(axis=0) == 0):
        raise ZeroColumnError("matrix has a zero column")


def _require_no_zero_row(A):
    if np.any(A.sum(axis=1) == 0):
        raise ZeroRowError("matrix has a zero row")


@dataclass(frozen=True, eq=False)
class NonnegMatrix:
    """Nonnegative square matrix with lazily computed structure flags."""

    entries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "entries", _square_nonneg(self.entries))
        self.entries.setflags(write=False)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    @property
    def n(self):
        return self.entries.shape[0]

    @cached_property
    def strictly_positive(self):
        return bool(np.all(self.entries > 0))

    @cached_property
    def has_zero_row(self):
        return bool(np.any(self.entries.sum(axis=1) == 0))

    @cached_property
    def has_zero_col(self):
        return bool(np.any(self.entries.sum(axis=0) == 0))

    @cached_property
    def aat_irreducible(self):
        return check_aat_irreducible(self.entries)

    @cached_property
    def fully_indecomposable(self):
        return check_fully_indecomposable(self.entries)


@dataclass
class ClassicalSolution:
    """Result of :func:`solve_classical`.

    ``x_star`` is the fixed point of the composed scaling map ``N``; it is
    the diagonal of the matching quantum fixed point.  ``d1`` is the
    normalized preimage of ``beta`` under ``phi_A_alpha`` and
    ``d2 = 1/(A^T d1)``, so ``B = D(d1) A D(d2)`` and
    ``x_star = alpha * d2 / sum(alpha * d2)``.
    """

    x_star: np.ndarray
    B: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    residual_map: float
    residual_stoch: float
    residual_bridge: float
    residual_fixed: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)


def phi_A(A, x):
    """``D(x) A D(A^T x)^{-1}``: the column-stochastic rescaling of ``A`` by ``x``."""
    A = np.asarray(A, dtype=float)
    _require_no_zero_col(A)
    x = np.asarray(x, dtype=float)
    return x[:, None] * A / (A.T @ x)[None, :]


def phi_A_alpha(A, alpha, x):
    A = np.asarray(A, dtype=float)
    _require_no_zero_col(A)
    _require_no_zero_row(A)
    y = phi_A(A, x) @ np.asarray(alpha, dtype=float)
    return y / y.sum()


def jacobian_F(B, alpha):
    """``D(B alpha) - B D(alpha) B^T``, symmetric with ``F @ 1 = 0``.

    For ``B = phi_A(A, x)`` the Jacobian of ``phi_A_alpha(A, alpha, .)`` at
    ``x`` is ``F @ diag(1/x)``; in the multiplicative chart ``y -> x * y``
    around ``y = 1/n`` it is ``n F``.
    """
    B = np.asarray(B, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    F = np.diag(B @ alpha) - (B * alpha) @ B.T
    return (F + F.T) / 2


def phi_A_alpha_jacobian(A, alpha, x):
    """Euclidean Jacobian of ``x -> phi_A_alpha(A, alpha, x)`` (unnormalized map)."""
    x = np.asarray(x, dtype=float)
    return jacobian_F(phi_A(A, x), alpha) / x[None, :]


def composed_map(A, alpha, beta, x):
    """Diagonal specialization of the quantum fixed-point map."""
    v = A @ x
    w = beta / v
    w /= w.sum()
    z = A.T @ w
    z /= z.sum()
    y = alpha / z
    return y / y.sum()


def _recover(A, alpha, beta, x):
    """Scaling vectors, bridge matrix and residuals from an iterate ``x``."""
    u = beta / (A @ x)
    d1 = u / u.sum()
    return _from_d1(A, alpha, beta, d1)


def _from_d1(A, alpha, beta, d1):
    d2 = 1.0 / (A.T @ d1)
    B = d1[:, None] * A * d2[None, :]
    xs = alpha * d2
    xs = xs / xs.sum()
    resid = dict(
        residual_map=float(np.abs(phi_A_alpha(A, alpha, d1) - beta).sum()),
        residual_stoch=float(np.abs(B.sum(axis=0) - 1.0).max()),
        residual_bridge=float(np.abs(B @ alpha - beta).sum()),
    )
    return xs, B, d1, d2, resid


def _newton(A, alpha, beta, d1, tol):
    """Newton on ``phi_A_alpha(d1) = beta`` in the log chart of ``d1``.

    Returns the refined ``d1`` or ``None`` if the tail is not quadratic
    (each step must at least halve the residual and reach ``tol`` within
    the step budget).
    """
    res = np.abs(phi_A_alpha(A, alpha, d1) - beta).sum()
    for _ in range(_NEWTON_STEPS):
        if res <= tol * 1e-2:
            break
        B = phi_A(A, d1)
        F = jacobian_F(B, alpha)
        g = beta - B @ alpha
        s = np.linalg.lstsq(F, g, rcond=None)[0]
        s -= s.mean()
        cand = d1 * np.exp(s)
        cand /= cand.sum()
        if not (np.all(np.isfinite(cand)) and cand.min() > 0):
            return None
        new = np.abs(phi_A_alpha(A, alpha, cand) - beta).sum()
        if not new <= 0.5 * res:
            return None
        d1, res = cand, new
    return d1 if res <= tol else None


def solve_classical(A, alpha, beta, cfg=None):
    """Scale ``A`` to a column-stochastic ``B`` with ``B @ alpha = beta``.

    Runs the damped fixed-point iteration ``x <- (1-w) x + w N(x)`` from the
    uniform vector, then polishes with Newton steps once the iteration
    contracts geometrically.  Raises :class:`NoConvergenceError` if the
    budget runs out, which happens when ``beta`` lies on or outside the
    boundary of the reachable set.
    """
    cfg = cfg or SolverConfig()
    A = _square_nonneg(A)
    n = A.shape[0]
    _require_no_zero_col(A)
    _require_no_zero_row(A)
    alpha = prob_vector(alpha, "alpha", tol=1e-9)
    beta = prob_vector(beta, "beta", tol=1e-9)
    if alpha.size != n or beta.size != n:
        raise ValidationError("alpha and beta must match the matrix dimension")

    if n == 1:
        one = np.ones(1)
        return ClassicalSolution(one, np.ones((1, 1)), one, 1.0 / A[0], 0.0, 0.0, 0.0,
                                 0.0, 0, True, [])

    x = np.full(n, 1.0 / n)
    omega = cfg.damping
    prev = np.inf
    trace = []
    newton_ok = True
    # near-boundary iterates underflow; finiteness is checked explicitly
    with np.errstate(all="ignore"):
        for it in range(1, cfg.max_iter + 1):
            y = composed_map(A, alpha, beta, x)
            if not (np.all(np.isfinite(y)) and y.min() > 0):
                # the iterate left the open simplex: beta sits on or beyond the boundary
                break
            res = float(np.abs(y - x).sum())
            trace.append(res)
            if res <= cfg.tol:
                xs, B, d1, d2, r = _recover(A, alpha, beta, x)
                fixed = float(np.abs(composed_map(A, alpha, beta, xs) - xs).sum())
                if (fixed <= cfg.tol and r["residual_bridge"] <= cfg.tol
                        and r["residual_stoch"] <= cfg.tol):
                    return ClassicalSolution(xs, B, d1, d2, residual_fixed=fixed, iterations=it,
                                             converged=True, trace=trace, **r)
            if res > prev:
                omega = max(omega / 2, _DAMPING_FLOOR)
            if newton_ok and res <= _NEWTON_START and res <= _NEWTON_RATE * prev:
                d1 = _newton(A, alpha, beta, _recover(A, alpha, beta, x)[2], cfg.tol)
                if d1 is None:
                    newton_ok = False
                else:
                    xs, B, d1, d2, r = _from_d1(A, alpha, beta, d1)
                    fixed = float(np.abs(composed_map(A, alpha, beta, xs) - xs).sum())
                    if (fixed <= cfg.tol and r["residual_bridge"] <= cfg.tol
                            and r["residual_stoch"] <= cfg.tol):
                        trace.append(fixed)
                        return ClassicalSolution(xs, B, d1, d2, residual_fixed=fixed,
                                                 iterations=it, converged=True, trace=trace, **r)
                    newton_ok = False
            prev = res
            x = (1 - omega) * x + omega * y
            x /= x.sum()

        xs, B, d1, d2, r = _recover(A, alpha, beta, x)
    partial = ClassicalSolution(xs, B, d1, d2, residual_fixed=trace[-1] if trace else np.inf,
                                iterations=len(trace), converged=False, trace=trace, **r)
    raise NoConvergenceError(
        f"no convergence after {len(trace)} iterations "
        f"(bridge residual {r['residual_bridge']:.3e})", partial)


def check_aat_irreducible(A):
    """True iff the positivity pattern of ``A A^T`` is connected."""
    P = (np.asarray(A) > 0).astype(float)
    n = P.shape[0]
    G = (P @ P.T) > 0
    if n == 1:
        return bool(G[0, 0])
    ncomp, _ = connected_components(csr_matrix(G), directed=False)
    return ncomp == 1


def check_fully_indecomposable(A):
    """Strict Hall condition on the positivity pattern.

    Equivalent test: every submatrix obtained by deleting one row and one
    column still has a perfect matching.
    """
    P = np.asarray(A) > 0
    n = P.shape[0]
    if n == 1:
        return bool(P[0, 0])
    for i in range(n):
        rows = np.delete(P, i, axis=0)
        for j in range(n):
            sub = csr_matrix(np.delete(rows, j, axis=1).astype(np.int8))
            match = maximum_bipartite_matching(sub, perm_type="column")
            if np.any(match < 0):
                return False
    return True


def pattern_feasibility(pattern, row_targets, col_targets):
    """Is there ``C >= 0`` with exactly this positivity pattern and these margins?

    Strict positivity on the pattern is enforced through a lower bound
    ``eps = 1e-9 * min(targets)`` on every pattern cell; the remainder is a
    transportation problem decided by max-flow.
    """
    P = np.asarray(pattern) > 0
    r = np.asarray(row_targets, dtype=float)
    c = np.asarray(col_targets, dtype=float)
    if P.shape != (r.size, c.size):
        raise ValidationError("pattern shape does not match the targets")
    if np.any(r <= 0) or np.any(c <= 0):
        raise ValidationError("targets must be positive")
    total = r.sum()
    if abs(total - c.sum()) > 1e-10:
        raise TargetMismatchError(f"row sum {total!r} != column sum {c.sum()!r}")
    eps = 1e-9 * min(r.min(), c.min())
    r_rem = r - eps * P.sum(axis=1)
    c_rem = c - eps * P.sum(axis=0)
    if np.any(r_rem < 0) or np.any(c_rem < 0):
        return False

    G = nx.DiGraph()
    for i, ri in enumerate(r_rem):
        G.add_edge("s", ("r", i), capacity=float(ri))
    for j, cj in enumerate(c_rem):
        G.add_edge(("c", j), "t", capacity=float(cj))
    for i, j in zip(*np.nonzero(P)):
        G.add_edge(("r", int(i)), ("c", int(j)))  # uncapacitated
    flow, _ = nx.maximum_flow(G, "s", "t")
    need = r_rem.sum()
    # the shortfall of an infeasible instance is of order eps, so the slack
    # must sit well below eps (but above rounding in the flow sums)
    slack = max(1e-3 * eps, 64 * np.finfo(float).eps * total)
    return bool(flow >= need - slack)
