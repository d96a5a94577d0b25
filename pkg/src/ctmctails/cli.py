"""Command-line front end.

stdout carries data only (JSON or CSV); diagnostics go to stderr. Exit codes:
0 success, 1 unreadable input, 2 syntax error, 3 invalid model, 4 classifier
precondition failure, 5 solver or analysis failure, 6 simulation failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import __version__
from .analysis import (
    fit_tail,
    theta_from_dist,
    verify_identity_qsd,
    verify_identity_stationary,
    verify_tail_identity,
)
from .asymptotics import compute_params, jump_structure, lemma_consistency
from .classifier import classify_qsd, classify_stationary, ergodicity_check, support_obstruction
from .errors import (
    ClassifierError,
    CTMCError,
    EmptyAbsorbingSet,
    ModelError,
    ModelSyntaxError,
    SimulationError,
    SolverError,
)
from .model import DistVector
from .parser import parse_model, parse_reactions
from .simulate import empirical_qsd, empirical_stationary, simulate_ssa
from .solver import QSD_METHODS, STATIONARY_METHODS, SolverConfig, qsd_from_theta, solve_qsd, solve_stationary

EXIT_IO, EXIT_SYNTAX, EXIT_MODEL, EXIT_CLASSIFIER, EXIT_SOLVER, EXIT_SIMULATION = 1, 2, 3, 4, 5, 6


def _load(path: str, parser: str | None):
    text = Path(path).read_text()
    kind = parser or ("rxn" if Path(path).suffix == ".rxn" else "model")
    return parse_reactions(text) if kind == "rxn" else parse_model(text)


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _dist_json(d: DistVector) -> dict:
    return {
        "kind": d.kind,
        "offset": int(d.offset),
        "step": int(d.step),
        "truncation": int(d.truncation),
        "theta": d.theta,
        "mass_defect": float(d.mass_defect),
        "states": [int(x) for x in d.states],
        "values": [float(v) for v in d.values],
        "tail": [float(t) for t in d.tail()],
        "info": {k: v for k, v in d.info.items() if isinstance(v, (int, float, str, bool, list, type(None)))},
    }


def _write_dist(args, d: DistVector) -> None:
    _emit(args, _json(_dist_json(d)) if args.format == "json" else d.to_csv())


def _cfg(args, default_N: int, methods) -> SolverConfig:
    method = args.method or methods[0]
    if method not in methods:
        raise SolverError(f"method {method!r} not available here; choose from {methods}")
    kw = {"N": args.N or default_N, "method": method}
    if args.tol is not None:
        kw["tolerance"] = args.tol
    if getattr(args, "lenient", False):
        kw["strict_theta"] = False
    return SolverConfig(**kw)


# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    model = _load(args.model, args.parser)
    params = compute_params(model)
    out = {
        "model": args.model,
        "jump_structure": jump_structure(model).to_json(),
        "params": params.to_json(),
    }
    if params.one_sided:
        out["support_obstruction"] = support_obstruction(model).to_json()
        out["lemma_consistency"] = lemma_consistency(params)
        _emit(args, _json(out))
        return 0
    out["lemma_consistency"] = lemma_consistency(params)
    if not model.absorbing:
        out["stationary"] = classify_stationary(params).to_json()
        out["ergodicity"] = ergodicity_check(params).to_json()
    theta = args.theta
    if model.absorbing and theta is None and args.solve_qsd:
        cfg = SolverConfig(N=args.N or 4000, strict_theta=False)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            theta = solve_qsd(model, cfg).theta
    if model.absorbing and theta is not None:
        out["theta"] = theta
        out["qsd"] = classify_qsd(params, theta).to_json()
    _emit(args, _json(out))
    return 0


def cmd_solve(args) -> int:
    model = _load(args.model, args.parser)
    cfg = _cfg(args, 1000, STATIONARY_METHODS)
    seeds = [float(s) for s in args.seeds.split(",")] if args.seeds else None
    _write_dist(args, solve_stationary(model, cfg, seeds=seeds))
    return 0


def cmd_qsd(args) -> int:
    model = _load(args.model, args.parser)
    cfg = _cfg(args, 4000, QSD_METHODS)
    d = qsd_from_theta(model, args.theta, cfg) if args.theta is not None else solve_qsd(model, cfg)
    _write_dist(args, d)
    return 0


def _read_dist(path: str, kind: str, theta):
    return DistVector.from_csv(Path(path).read_text(), kind=kind, theta=theta)


def cmd_verify(args) -> int:
    model = _load(args.model, args.parser)
    kind = args.kind or ("qsd" if model.absorbing else "stationary")
    d = _read_dist(args.dist, kind, args.theta)
    if args.form == "tail":
        if kind == "qsd" and d.theta is None:
            d.theta = theta_from_dist(model, d)
        rep = verify_tail_identity(model, d)
    elif kind == "qsd":
        if d.theta is None:
            d.theta = theta_from_dist(model, d)
        rep = verify_identity_qsd(model, d, form=args.form if args.form != "both" else "A_j-grouped")
    else:
        rep = verify_identity_stationary(model, d, form=args.form)
    _emit(args, _json(rep.to_json()))
    return 0


def _window(text: str | None):
    if text is None:
        return None
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise SystemExit(f"--window must look like LO:HI, got {text!r}") from None


def cmd_fit(args) -> int:
    d = _read_dist(args.dist, "stationary", None)
    fit = fit_tail(d, _window(args.window), predicted=args.predicted)
    _emit(args, _json(fit.to_json()))
    return 0


def cmd_simulate(args) -> int:
    model = _load(args.model, args.parser)
    if args.mode == "trajectory":
        tr = simulate_ssa(model, args.x0, args.t_end, args.seed)
        _emit(args, tr.to_csv())
    elif args.mode == "stationary":
        d = empirical_stationary(model, args.x0, args.t_end, args.burn_in, args.replicas, args.seed)
        _write_dist(args, d)
    else:
        d = empirical_qsd(model, args.x0, args.cycles, args.seed)
        _write_dist(args, d)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctmctails", description="Tail analysis of one-dimensional jump CTMCs")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        if model:
            p.add_argument("model", help=".model (jump DSL) or .rxn (reactions) file")
            p.add_argument("--parser", choices=("model", "rxn"), help="override extension-based parser choice")
        p.add_argument("--out", help="write output here instead of stdout")

    def solver_flags(p):
        p.add_argument("--N", type=int, help="truncation level")
        p.add_argument("--tol", type=float, help="solver tolerance")
        p.add_argument("--method", help="solver method")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("analyze", help="parameters and tail classification (JSON)")
    common(p)
    p.add_argument("--theta", type=float, help="QSD absorption rate for QSD classification")
    p.add_argument("--solve-qsd", action="store_true", help="obtain theta from a numerical QSD")
    p.add_argument("--N", type=int, help="truncation for --solve-qsd")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("solve", help="stationary distribution")
    common(p)
    solver_flags(p)
    p.add_argument("--seeds", help="comma-separated seeds for --method recursive")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("qsd", help="quasi-stationary distribution")
    common(p)
    solver_flags(p)
    p.add_argument("--theta", type=float, help="prescribe theta (downward skip-free models)")
    p.add_argument("--lenient", action="store_true", help="warn instead of failing on truncation bias in theta")
    p.set_defaults(func=cmd_qsd)

    p = sub.add_parser("verify", help="identity residuals of a distribution CSV")
    common(p)
    p.add_argument("dist", help="CSV with columns x,p(x)[,T(x)]")
    p.add_argument("--kind", choices=("stationary", "qsd"))
    p.add_argument("--theta", type=float)
    p.add_argument("--form", choices=("both", "per-omega", "A_j-grouped", "tail"), default="both")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fit", help="fit tail family to a distribution CSV")
    common(p, model=False)
    p.add_argument("dist")
    p.add_argument("--window", help="LO:HI state window")
    p.add_argument("--predicted", help="family favoured in near ties")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="Gillespie simulation")
    common(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--x0", type=int, default=0)
    p.add_argument("--t-end", type=float, default=1e3)
    p.add_argument("--burn-in", type=float, default=0.0)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--cycles", type=int, default=10_000)
    p.add_argument("--mode", choices=("trajectory", "stationary", "qsd"), default="trajectory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CTMCError as exc:
        code = _exit_code(exc)
        err = exc
    except OSError as exc:
        code, err = EXIT_IO, exc
    except ValueError as exc:
        code, err = EXIT_MODEL, exc
    print(f"ctmctails {args.command}: {type(err).__name__}: {err}", file=sys.stderr)
    return code


def _exit_code(exc: CTMCError) -> int:
    if isinstance(exc, ModelSyntaxError):
        return EXIT_SYNTAX
    if isinstance(exc, ModelError):
        return EXIT_MODEL
    if isinstance(exc, ClassifierError):
        return EXIT_CLASSIFIER
    if isinstance(exc, SimulationError):
        return EXIT_SIMULATION
    if isinstance(exc, (SolverError, EmptyAbsorbingSet)):
        return EXIT_SOLVER
    return EXIT_SOLVER

if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
