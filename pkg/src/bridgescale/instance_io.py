"""JSON serialization of instances, solutions and certificates.

Complex entries are ``[re, im]`` pairs, matrices dense row-major nested
lists.  Python's ``json`` emits the shortest repr of every double, so
finite values round-trip bit-exactly.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .classical import ClassicalSolution, NonnegMatrix
from .config import EPS_PD, SolverConfig
from .errors import BridgeScaleError, ParseError, ValidationError
from .quantum import BridgeSolution, GPCertificate, KrausMap

HERMITIAN_TOL = 1e-12
NORMALIZATION_TOL = 1e-9
# Sums within rounding of 1 are kept bit-exact so parse/serialize round-trips.
_ROUNDING_SLACK = 64 * np.finfo(float).eps


@dataclass
class InstanceFile:
    kind: str
    n: int
    payload: object  # NonnegMatrix (classical) or KrausMap (quantum)
    alpha: np.ndarray
    beta: np.ndarray
    config: SolverConfig = field(default_factory=SolverConfig)


def encode_complex_matrix(M):
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def decode_complex_matrix(data, name="matrix"):
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: malformed matrix ({exc})") from None
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise ValidationError(f"{name}: expected a matrix of [re, im] pairs, got shape {arr.shape}")


def encode_real(x):
    return np.asarray(x, dtype=float).tolist()


def _require_finite(arr, name):
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")


def _prob(x, name, n):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ValidationError(f"{name} must have length {n}")
    _require_finite(x, name)
    if np.any(x <= 0):
        raise ValidationError(f"{name} must be strictly positive")
    s = x.sum()
    if abs(s - 1) > NORMALIZATION_TOL:
        raise ValidationError(f"{name} sums to {s!r}, not 1")
    return x / s if abs(s - 1) > _ROUNDING_SLACK * n else x


def _density(X, name, n):
    X = decode_complex_matrix(X, name)
    if X.shape != (n, n):
        raise ValidationError(f"{name} must be {n}x{n}, got {X.shape}")
    _require_finite(X, name)
    if np.abs(X - X.conj().T).max() > HERMITIAN_TOL:
        raise ValidationError(f"{name} is not Hermitian")
    X = (X + X.conj().T) / 2
    tr = np.trace(X).real
    if abs(tr - 1) > NORMALIZATION_TOL:
        raise ValidationError(f"{name} has trace {tr!r}, not 1")
    if abs(tr - 1) > _ROUNDING_SLACK * n:
        X = X / tr
    if not np.linalg.eigvalsh(X)[0] > EPS_PD:
        raise ValidationError(f"{name} is not positive definite")
    return X


def parse_instance(text):
    """Parse and validate an instance document (``str`` or UTF-8 ``bytes``)."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"instance is not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("instance must be a JSON object")
    return instance_from_dict(doc)


def instance_from_dict(doc):
    kind = doc.get("kind")
    if kind not in ("classical", "quantum"):
        raise ValidationError(f"kind must be 'classical' or 'quantum', got {kind!r}")
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    for key in ("alpha", "beta", "A" if kind == "classical" else "kraus"):
        if key not in doc:
            raise ValidationError(f"missing key {key!r}")
    try:
        config = SolverConfig.from_dict(doc.get("config") or {})
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"config: {exc}") from None

    if kind == "classical":
        try:
            A = np.array(doc["A"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"A: malformed matrix ({exc})") from None
        if A.shape != (n, n):
            raise ValidationError(f"A must be {n}x{n}, got {A.shape}")
        try:
            payload = NonnegMatrix(A)
        except BridgeScaleError as exc:
            raise ValidationError(f"A: {exc}") from None
        if payload.has_zero_row or payload.has_zero_col:
            raise ValidationError("A has a zero row or column")
        alpha = _prob(doc["alpha"], "alpha", n)
        beta = _prob(doc["beta"], "beta", n)
    else:
        ops = doc["kraus"]
        if not isinstance(ops, list) or not ops:
            raise ValidationError("kraus must be a nonempty list of matrices")
        K = np.array([decode_complex_matrix(op, f"kraus[{i}]") for i, op in enumerate(ops)])
        if K.shape[1:] != (n, n):
            raise ValidationError(f"Kraus operators must be {n}x{n}, got {K.shape[1:]}")
        _require_finite(K, "kraus")
        payload = KrausMap(K)
        alpha = _density(doc["alpha"], "alpha", n)
        beta = _density(doc["beta"], "beta", n)
    return InstanceFile(kind, n, payload, alpha, beta, config)


def instance_to_dict(inst):
    doc = {"kind": inst.kind, "n": inst.n}
    if inst.kind == "classical":
        doc["A"] = encode_real(np.asarray(inst.payload))
        doc["alpha"] = encode_real(inst.alpha)
        doc["beta"] = encode_real(inst.beta)
    else:
        doc["kraus"] = [encode_complex_matrix(K) for K in inst.payload.kraus]
        doc["alpha"] = encode_complex_matrix(inst.alpha)
        doc["beta"] = encode_complex_matrix(inst.beta)
    doc["config"] = inst.config.to_dict()
    return doc


def dumps(doc):
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def serialize_instance(inst):
    return dumps(instance_to_dict(inst)).encode("utf-8")


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def solution_to_dict(sol):
    if isinstance(sol, ClassicalSolution):
        return {
            "kind": "classical_solution",
            "converged": bool(sol.converged),
            "iterations": int(sol.iterations),
            "x_star": encode_real(sol.x_star),
            "B": encode_real(sol.B),
            "d1": encode_real(sol.d1),
            "d2": encode_real(sol.d2),
            "residual_map": _num(sol.residual_map),
            "residual_stoch": _num(sol.residual_stoch),
            "residual_bridge": _num(sol.residual_bridge),
            "residual_fixed": _num(sol.residual_fixed),
            "trace": [float(t) for t in sol.trace],
        }
    if isinstance(sol, BridgeSolution):
        doc = {
            "kind": "bridge_solution",
            "converged": bool(sol.converged),
            "iterations": int(sol.iterations),
            "U": encode_complex_matrix(sol.U),
            "alpha": encode_complex_matrix(sol.alpha),
            "beta": encode_complex_matrix(sol.beta),
            "residual_fixed": _num(sol.residual_fixed),
            "residual_channel": _num(sol.residual_channel),
            "residual_bridge": _num(sol.residual_bridge),
            "unitarity_defect": _num(sol.unitarity_defect),
            "trace": [float(t) for t in sol.trace],
            "hilbert_trace": [float(t) for t in sol.hilbert_trace],
        }
        if sol.S is not None:
            doc["S"] = encode_complex_matrix(sol.S)
            doc["T"] = encode_complex_matrix(sol.T)
            doc["O"] = encode_complex_matrix(sol.O)
            doc["R"] = [encode_complex_matrix(K) for K in sol.R.kraus]
        return doc
    if isinstance(sol, GPCertificate):
        doc = {"kind": "gp_certificate"}
        for name in ("phi_0", "phi_T", "phihat_0", "phihat_T", "chi_0", "chi_T"):
            doc[name] = encode_complex_matrix(getattr(sol, name))
        doc.update({k: _num(v) for k, v in sol.residuals.items()})
        return doc
    raise TypeError(f"cannot serialize {type(sol).__name__}")


def serialize_solution(sol):
    return dumps(solution_to_dict(sol)).encode("utf-8")


def _mat(doc, key):
    return decode_complex_matrix(doc[key], key)


def _float(v):
    return np.nan if v is None else float(v)


def solution_from_dict(doc):
    kind = doc.get("kind")
    try:
        if kind == "classical_solution":
            return ClassicalSolution(
                x_star=np.array(doc["x_star"], dtype=float),
                B=np.array(doc["B"], dtype=float),
                d1=np.array(doc["d1"], dtype=float),
                d2=np.array(doc["d2"], dtype=float),
                residual_map=_float(doc["residual_map"]),
                residual_stoch=_float(doc["residual_stoch"]),
                residual_bridge=_float(doc["residual_bridge"]),
                residual_fixed=_float(doc["residual_fixed"]),
                iterations=int(doc["iterations"]),
                converged=bool(doc["converged"]),
                trace=list(doc.get("trace", [])),
            )
        if kind == "bridge_solution":
            sol = BridgeSolution(
                U=_mat(doc, "U"), alpha=_mat(doc, "alpha"), beta=_mat(doc, "beta"),
                residual_fixed=_float(doc["residual_fixed"]),
                iterations=int(doc["iterations"]), converged=bool(doc["converged"]),
                trace=list(doc.get("trace", [])), hilbert_trace=list(doc.get("hilbert_trace", [])),
                residual_channel=_float(doc.get("residual_channel")),
                residual_bridge=_float(doc.get("residual_bridge")),
                unitarity_defect=_float(doc.get("unitarity_defect")),
            )
            if "R" in doc:
                sol.S, sol.T, sol.O = _mat(doc, "S"), _mat(doc, "T"), _mat(doc, "O")
                sol.R = KrausMap(np.array([decode_complex_matrix(K, "R") for K in doc["R"]]))
            return sol
        if kind == "gp_certificate":
            mats = {k: _mat(doc, k) for k in
                    ("phi_0", "phi_T", "phihat_0", "phihat_T", "chi_0", "chi_T")}
            res = {k: _float(doc[k]) for k in doc if k.startswith("residual_")}
            return GPCertificate(**mats, **res)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed {kind}: {exc}") from None
    raise ValidationError(f"unknown solution kind {kind!r}")


def parse_solution(text):
    if isinstance(text, (bytes, bytearray)):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"solution is not UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("solution must be a JSON object")
    return solution_from_dict(doc)
