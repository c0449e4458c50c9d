"""Contraction diagnostics and uniqueness probing for the quantum bridge."""

from dataclasses import dataclass, field

import numpy as np

from .config import SolverConfig
from .errors import BandInvalidError, BridgeScaleError, NoConvergenceError, NotPositiveError, NotUnitalError
from .linalg import eigvalsh_desc, frobenius_inner, hermitian_eig, random_density, traceless_basis
from .quantum import apply, apply_dual, solve_fixed_point


@dataclass(frozen=True)
class PositivityEstimate:
    """Sampled inner estimates of ``a(Q)`` and ``b(Q)``.

    Sampling can only shrink the true range: ``a_est >= a(Q)`` and
    ``b_est <= b(Q)``.  Never certified.
    """

    a_est: float
    b_est: float
    samples: int
    certified: bool = False


def _random_unit_vectors(n, m, rng):
    U = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def _pure_extreme(Q, u, refine_steps, lowest):
    """Alternating eigenvector refinement of ``v* Q(u u*) v`` over unit ``u, v``.

    Each half-step solves one side exactly, so the value is monotone.
    """
    pick = -1 if lowest else 0
    best = None
    for _ in range(refine_steps + 1):
        d = hermitian_eig(apply(Q, np.outer(u, u.conj())))
        val = d.values[pick]
        if best is not None and (val >= best if lowest else val <= best):
            break
        best = val
        v = d.vectors[:, pick]
        u = hermitian_eig(apply_dual(Q, np.outer(v, v.conj()))).vectors[:, pick]
    return float(best)


def estimate_ab(Q, samples=64, refine_steps=10, seed=0):
    """Estimate the extreme eigenvalues of ``Q`` over pure input states."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    us = _random_unit_vectors(Q.n, samples, rng)
    a = min(_pure_extreme(Q, u, refine_steps, lowest=True) for u in us)
    b = max(_pure_extreme(Q, u, refine_steps, lowest=False) for u in us)
    return PositivityEstimate(max(a, 0.0), b, samples)


def contraction_kappa(a, b):
    """``(b - a)/(b + a)``, the Hilbert-metric contraction bound for a positive map."""
    if not a > 0:
        raise NotPositiveError(f"contraction bound needs a > 0, got {a!r}")
    if b < a:
        raise BandInvalidError(f"need a <= b, got a={a!r}, b={b!r}")
    return (b - a) / (b + a)


def birkhoff_bound(a, b):
    """``tanh(Delta/4)`` evaluated at the diameter bound ``Delta <= 2 log(b/a)``."""
    return float(np.tanh(0.5 * np.log(b / a)))


def d_alpha_bounds(a, b, alpha):
    """Spectral band ``[c, d]`` guaranteed for ``D_alpha`` on ``H(a, b, 1)``."""
    w = eigvalsh_desc(alpha)
    n = w.size
    if not (0 < a <= 1.0 / n <= b <= 1 - (n - 1) * a + 1e-15):
        raise BandInvalidError(f"(a, b) = ({a!r}, {b!r}) violates 0 < a <= 1/n <= b <= 1-(n-1)a")
    lo, hi = a * w[-1], b * w[0]
    c = lo / (lo + (n - 1) * hi)
    d = hi / (hi + (n - 1) * lo)
    return float(c), float(d)


def jacobian_P(Q):
    """Matrix of ``W -> Q'(Q(W))`` on traceless Hermitian matrices, and its spectral radius."""
    if not Q.is_unital:
        raise NotUnitalError(f"channel is not unital (defects {Q.channel_defect:.2e}, "
                             f"{Q.unital_defect:.2e})")
    basis = traceless_basis(Q.n)
    images = [apply_dual(Q, apply(Q, E)) for E in basis]
    P = np.array([[frobenius_inner(img, E) for img in images] for E in basis])
    rho = float(np.max(np.abs(np.linalg.eigvals(P))))
    return P, rho


@dataclass
class ProbeResult:
    clusters: list
    counts: list
    nonconverged: int
    starts: int
    failures: list = field(default_factory=list)

    @property
    def n_clusters(self):
        return len(self.clusters)


def _canonical_key(U):
    n = U.shape[0]
    weight = float(np.real(np.trace(U @ np.diag(np.arange(1, n + 1)))))
    entries = tuple(np.round(np.concatenate([U.real.ravel(), U.imag.ravel()]), 10))
    return (round(weight, 10), entries)


def probe_uniqueness(Q, alpha, beta, starts=8, cfg=None, seed=0):
    """Solve from ``starts`` random Wishart densities and cluster the fixed points.

    Start ``i`` draws its initial density from seed ``seed + i``; clusters
    are separated by Frobenius distance ``10 sqrt(tol)`` and returned in a
    canonical order.
    """
    cfg = cfg or SolverConfig()
    if starts < 1:
        raise ValueError("starts must be >= 1")
    radius = 10 * np.sqrt(cfg.tol)
    clusters, counts, failures = [], [], []
    for i in range(starts):
        X0 = random_density(Q.n, np.random.default_rng(seed + i))
        try:
            sol = solve_fixed_point(Q, alpha, beta, cfg, X0=X0, build=False)
        except (NoConvergenceError, BridgeScaleError) as exc:
            failures.append((i, exc.code))
            continue
        for c, rep in enumerate(clusters):
            if np.linalg.norm(sol.U - rep) <= radius:
                counts[c] += 1
                break
        else:
            clusters.append(sol.U)
            counts.append(1)
    order = sorted(range(len(clusters)), key=lambda c: _canonical_key(clusters[c]))
    return ProbeResult([clusters[c] for c in order], [counts[c] for c in order],
                       len(failures), starts, failures)
