"""``bridgescale`` command-line front end.

Exit codes: 0 success, 1 usage error, 2 no convergence or failed
verification, 3 validation error, 4 numerical failure.  Only the result
document goes to stdout; logs go to stderr.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import errors
from .classical import NonnegMatrix, solve_classical
from .config import SolverConfig
from .diagnostics import birkhoff_bound, contraction_kappa, estimate_ab, jacobian_P, probe_uniqueness
from .instance_io import (InstanceFile, dumps, encode_complex_matrix, parse_instance,
                          parse_solution, serialize_instance, solution_to_dict)
from .linalg import as_density, hermitian, random_density
from .quantum import gp_certificate, random_channel, random_unital_channel, solve_fixed_point
from .verify import verify

log = logging.getLogger("bridgescale")

EXIT_OK, EXIT_USAGE, EXIT_NOCONV, EXIT_VALIDATION, EXIT_NUMERIC = range(5)

_NUMERIC = (errors.NotPDError, errors.NotPSDError, errors.NotUnitaryError,
            errors.ZeroTraceError, errors.NonFiniteInputError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _seed(args, fallback=0):
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("BRIDGESCALE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"BRIDGESCALE_SEED must be an integer, got {env!r}") from None
    return fallback


def _read(path):
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_instance(args):
    inst = parse_instance(_read(args.instance))
    overrides = dict(tol=getattr(args, "tol", None), max_iter=getattr(args, "max_iter", None),
                     starts=getattr(args, "starts", None))
    if getattr(args, "anderson", False):
        overrides["anderson"] = True
    overrides["seed"] = _seed(args, inst.config.seed)
    try:
        inst.config = inst.config.override(**overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return inst


def _emit(doc, fmt="json"):
    if fmt == "text":
        sys.stdout.write(_text_table(doc))
    else:
        sys.stdout.write(dumps(doc))


def _text_table(doc, prefix=""):
    lines = []
    for key, val in doc.items():
        if isinstance(val, dict):
            lines.append(_text_table(val, prefix + key + "."))
        elif isinstance(val, bool) or val is None:
            lines.append(f"{prefix}{key} {str(val).lower()}\n")
        elif isinstance(val, float):
            lines.append(f"{prefix}{key} {val:.6e}\n")
        elif isinstance(val, int):
            lines.append(f"{prefix}{key} {val}\n")
    return "".join(lines)


def _solve_quantum(inst):
    cfg = inst.config
    n = inst.n
    last = None
    for i in range(cfg.starts):
        X0 = None if i == 0 else random_density(n, np.random.default_rng(cfg.seed + i))
        try:
            return solve_fixed_point(inst.payload, inst.alpha, inst.beta, cfg, X0=X0)
        except errors.NoConvergenceError as exc:
            log.info("start %d did not converge", i)
            last = exc
    raise last


def cmd_solve(args):
    inst = _load_instance(args)
    try:
        if inst.kind == "classical":
            sol = solve_classical(np.asarray(inst.payload), inst.alpha, inst.beta, inst.config)
        else:
            sol = _solve_quantum(inst)
    except errors.NoConvergenceError as exc:
        log.error("%s", exc)
        if exc.solution is not None:
            _emit(solution_to_dict(exc.solution), args.format)
        return EXIT_NOCONV
    doc = solution_to_dict(sol)
    if args.certificate:
        if inst.kind != "quantum":
            raise UsageError("--certificate applies to quantum instances only")
        # alpha plays rho_T and beta plays rho_0
        cert = gp_certificate(inst.payload, inst.beta, inst.alpha, sol)
        doc["certificate"] = solution_to_dict(cert)
    _emit(doc, args.format)
    return EXIT_OK


def cmd_verify(args):
    inst = parse_instance(_read(args.instance))
    sol = parse_solution(_read(args.solution))
    report = verify(inst, sol, tol=args.tol)
    _emit(report, args.format)
    for name, c in report["checks"].items():
        if not c["ok"]:
            log.error("check %s failed: %.3e > %.3e", name, c["value"], c["limit"])
    return EXIT_OK if report["ok"] else EXIT_NOCONV


def cmd_gen(args):
    seed = _seed(args)
    n = args.n
    if n < 1:
        raise UsageError("--n must be >= 1")
    if not 0 <= args.positivity <= 1:
        raise UsageError("--positivity must lie in [0, 1]")
    rng = np.random.default_rng([seed, 1])
    cfg = SolverConfig(seed=seed)
    if args.kind == "classical":
        A = 0.05 + rng.random((n, n))
        if args.uniform_marginals:
            alpha = beta = np.full(n, 1.0 / n)
        else:
            alpha = rng.random(n) + 0.1
            beta = rng.random(n) + 0.1
            alpha, beta = alpha / alpha.sum(), beta / beta.sum()
        inst = InstanceFile("classical", n, NonnegMatrix(A), alpha, beta, cfg)
    else:
        k = args.k if args.k is not None else n
        if k < 1:
            raise UsageError("--k must be >= 1")
        make = random_unital_channel if args.unital else random_channel
        Q = make(n, k, args.positivity, seed=seed)
        if args.uniform_marginals:
            alpha = beta = np.eye(n, dtype=complex) / n
        elif args.near_uniform is not None:
            alpha = _near_uniform(n, args.near_uniform, rng)
            beta = _near_uniform(n, args.near_uniform, rng)
        else:
            alpha = random_density(n, rng, rank=2 * n)
            beta = random_density(n, rng, rank=2 * n)
        inst = InstanceFile("quantum", n, Q, alpha, beta, cfg)
    sys.stdout.write(serialize_instance(inst).decode("utf-8"))
    return EXIT_OK


def _near_uniform(n, radius, rng):
    """Density with ``||X - I/n||_F = radius`` in a random traceless direction."""
    G = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    W = hermitian(G)
    W -= np.trace(W).real / n * np.eye(n)
    W *= radius / np.linalg.norm(W)
    return as_density(np.eye(n) / n + W)


def cmd_diagnose(args):
    inst = _load_instance(args)
    if inst.kind != "quantum":
        raise UsageError("diagnose needs a quantum instance")
    Q = inst.payload
    est = estimate_ab(Q, samples=args.samples, refine_steps=args.refine_steps, seed=inst.config.seed)
    positive = est.a_est > 0
    kappa = contraction_kappa(est.a_est, est.b_est) if positive else 1.0
    doc = {
        "a_est": est.a_est,
        "b_est": est.b_est,
        "samples": est.samples,
        "certified": est.certified,
        "positive": positive,
        "kappa_est": kappa,
        "birkhoff_bound": birkhoff_bound(est.a_est, est.b_est) if positive else 1.0,
        "is_channel": Q.is_channel,
        "unital": Q.is_unital,
        "rho_P": jacobian_P(Q)[1] if Q.is_unital else None,
    }
    try:
        sol = solve_fixed_point(Q, inst.alpha, inst.beta, inst.config, build=False)
    except errors.NoConvergenceError as exc:
        sol = exc.solution
    except errors.NotPDError as exc:
        log.warning("fixed-point iteration failed: %s", exc)
        sol = None
    doc["converged"] = bool(sol is not None and sol.converged)
    doc["iterations"] = sol.iterations if sol is not None else 0
    doc["convergence_curve"] = [float(h) for h in sol.hilbert_trace] if sol is not None else []
    _emit(doc)
    return EXIT_OK


def cmd_probe(args):
    inst = _load_instance(args)
    if inst.kind != "quantum":
        raise UsageError("probe needs a quantum instance")
    res = probe_uniqueness(inst.payload, inst.alpha, inst.beta, starts=inst.config.starts,
                           cfg=inst.config, seed=inst.config.seed)
    _emit({
        "n_clusters": res.n_clusters,
        "counts": res.counts,
        "nonconverged": res.nonconverged,
        "starts": res.starts,
        "seed": inst.config.seed,
        "clusters": [encode_complex_matrix(U) for U in res.clusters],
    })
    return EXIT_OK


def build_parser():
    p = _Parser(prog="bridgescale", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def solver_flags(sp):
        sp.add_argument("--tol", type=float)
        sp.add_argument("--max-iter", type=int)
        sp.add_argument("--seed", type=int)

    s = sub.add_parser("solve", help="solve an instance")
    s.add_argument("instance")
    solver_flags(s)
    s.add_argument("--starts", type=int)
    s.add_argument("--anderson", action="store_true", help="Anderson mixing (quantum)")
    s.add_argument("--format", choices=("json", "text"), default="json")
    s.add_argument("--certificate", action="store_true", help="emit the dual Schrodinger-system certificate")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="recompute residuals of a stored solution")
    v.add_argument("solution")
    v.add_argument("instance")
    v.add_argument("--tol", type=float)
    v.add_argument("--format", choices=("json", "text"), default="json")
    v.set_defaults(func=cmd_verify)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--kind", choices=("classical", "quantum"), required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int)
    g.add_argument("--positivity", type=float, default=0.2)
    g.add_argument("--seed", type=int)
    g.add_argument("--unital", action="store_true")
    g.add_argument("--uniform-marginals", action="store_true")
    g.add_argument("--near-uniform", type=float, metavar="RADIUS")
    g.set_defaults(func=cmd_gen)

    d = sub.add_parser("diagnose", help="contraction diagnostics (quantum)")
    d.add_argument("instance")
    solver_flags(d)
    d.add_argument("--samples", type=int, default=256)
    d.add_argument("--refine-steps", type=int, default=20)
    d.set_defaults(func=cmd_diagnose)

    pr = sub.add_parser("probe", help="multi-start uniqueness probe (quantum)")
    pr.add_argument("instance")
    solver_flags(pr)
    pr.add_argument("--starts", type=int, default=8)
    pr.set_defaults(func=cmd_probe)
    return p


def _setup_logging(verbose):
    # own handler so diagnostics reach the current stderr even when embedded
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("bridgescale: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO if verbose else logging.WARNING)
    log.propagate = False


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        _setup_logging(args.verbose)
        return args.func(args)
    except UsageError as exc:
        print(f"bridgescale: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (errors.NoConvergenceError, errors.NotConvergedError) as exc:
        print(f"bridgescale: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except _NUMERIC as exc:
        print(f"bridgescale: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except errors.BridgeScaleError as exc:
        print(f"bridgescale: {exc.code}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        print(f"bridgescale: internal error: {exc!r}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
