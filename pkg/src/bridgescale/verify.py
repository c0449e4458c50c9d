"""Independent re-verification of stored solutions.

Nothing stored in a solution's residual fields is trusted; every check is
recomputed from the instance data and the solution's matrices.
"""

import numpy as np

from .classical import ClassicalSolution, composed_map
from .errors import BridgeScaleError, ValidationError
from .linalg import as_density
from .quantum import BridgeSolution, apply, phi_map


def _check(checks, name, value, limit):
    value = float(value)
    checks[name] = {"value": value, "limit": float(limit),
                    "ok": bool(np.isfinite(value) and value <= limit)}


def verify(inst, sol, tol=None):
    """Return ``{"ok": bool, "checks": {...}}`` for ``sol`` against ``inst``.

    Raises :class:`ValidationError` on shape/kind mismatches.
    """
    tol = inst.config.tol if tol is None else tol
    if inst.kind == "classical":
        if not isinstance(sol, ClassicalSolution):
            raise ValidationError("classical instance needs a classical_solution")
        checks = _verify_classical(inst, sol, tol)
    else:
        if not isinstance(sol, BridgeSolution):
            raise ValidationError("quantum instance needs a bridge_solution")
        checks = _verify_quantum(inst, sol, tol)
    return {"ok": all(c["ok"] for c in checks.values()), "tol": tol, "checks": checks}


def _verify_classical(inst, sol, tol):
    A = np.asarray(inst.payload)
    n = inst.n
    for name in ("x_star", "d1", "d2"):
        if np.shape(getattr(sol, name)) != (n,):
            raise ValidationError(f"{name} has the wrong dimension")
    if sol.B.shape != (n, n):
        raise ValidationError("B has the wrong dimension")
    alpha, beta = inst.alpha, inst.beta
    checks = {}
    B = sol.d1[:, None] * A * sol.d2[None, :]
    scale = max(1.0, float(np.abs(B).max()))
    _check(checks, "scaling_consistency", np.abs(B - sol.B).max() / scale, 1e-10)
    _check(checks, "residual_stoch", np.abs(sol.B.sum(axis=0) - 1).max(), tol)
    _check(checks, "residual_bridge", np.abs(sol.B @ alpha - beta).sum(), tol)
    _check(checks, "pattern_mismatch", float(np.sum((sol.B > 0) != (A > 0))), 0)
    _check(checks, "positive_scalings", float(np.sum(sol.d1 <= 0) + np.sum(sol.d2 <= 0)), 0)
    xs = alpha * sol.d2
    xs = xs / xs.sum()
    _check(checks, "x_star_consistency", np.abs(xs - sol.x_star).max(), 1e-10)
    _check(checks, "residual_fixed",
           np.abs(composed_map(A, alpha, beta, sol.x_star) - sol.x_star).sum(), tol)
    return checks


def _verify_quantum(inst, sol, tol):
    Q = inst.payload
    n = inst.n
    if sol.U.shape != (n, n):
        raise ValidationError("U has the wrong dimension")
    if sol.R is None:
        raise ValidationError("solution carries no scaled channel")
    for name in ("S", "T", "O"):
        if getattr(sol, name).shape != (n, n):
            raise ValidationError(f"{name} has the wrong dimension")
    if sol.R.n != n or sol.R.k != Q.k:
        raise ValidationError("scaled channel does not match the instance's Kraus shape")
    # same normalization as the solver so recomputed residuals are bit-identical
    alpha, beta = as_density(inst.alpha), as_density(inst.beta)
    checks = {}
    _check(checks, "marginals_match",
           max(np.linalg.norm(sol.alpha - alpha), np.linalg.norm(sol.beta - beta)), 1e-12)
    try:
        res_fixed = np.linalg.norm(phi_map(Q, alpha, beta, sol.U) - sol.U)
    except BridgeScaleError:
        res_fixed = np.inf
    _check(checks, "residual_fixed", res_fixed, tol)
    _check(checks, "residual_channel", sol.R.channel_defect, 100 * tol)
    _check(checks, "residual_bridge", np.linalg.norm(apply(sol.R, alpha) - beta), 100 * tol)
    O = sol.O
    _check(checks, "unitarity", np.linalg.norm(O @ O.conj().T - np.eye(n)), 100 * tol)
    rebuilt = O.conj().T @ sol.S @ Q.kraus @ sol.T
    scale = max(1.0, float(np.linalg.norm(rebuilt)))
    _check(checks, "scaling_consistency", np.linalg.norm(rebuilt - sol.R.kraus) / scale, 100 * tol)
    for name in ("S", "T"):
        M = getattr(sol, name)
        herm = np.linalg.norm(M - M.conj().T)
        lam = np.linalg.eigvalsh((M + M.conj().T) / 2)[0]
        _check(checks, f"{name}_hermitian_pd", herm if lam > 0 else np.inf, 100 * tol)
    return checks
