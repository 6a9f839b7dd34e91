"""Command-line interface: one-off solves, experiment sweeps, heterogeneity runs.

Exit codes: 0 success, 2 invalid flags or inconsistent inputs, 3 unreadable or
unparseable files, 4 solver failure (e.g. rank-infeasible, divergence).  On
failure a JSON line {"category": ..., "message": ...} is written to stderr.
The STLS_SEED environment variable supplies the default master seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .alm import alpha_search, reweighted_stls
from .baseline import logdet_tls, plain_tls
from .experiments import EXPERIMENTS, ExperimentSpec, run_experiment, summarize, write_records
from .heterogeneity import (
    NOISY_SOLVE_DEFAULTS,
    HeterogeneityInstance,
    solve_noiseless,
    solve_noisy,
    synthesize,
)
from .matio import MatrixParseError, read_matrix, write_matrix
from .model import (
    FixedMask,
    ProblemValidationError,
    SolverConfig,
    StlsError,
    StlsProblem,
    Toeplitz,
    Unconstrained,
)

_METHODS = ("svd", "nn", "rwnn", "logdet")


def _add_config_args(sp):
    d = SolverConfig()
    g = sp.add_argument_group("solver options", "unset flags keep the command's own defaults")
    g.add_argument("--mu-growth", type=float, default=None, help=f"penalty growth per sweep [{d.mu_growth}]")
    g.add_argument("--mu-init", type=float, default=None, help=f"initial penalty [{d.mu_init}]")
    g.add_argument("--delta", type=float, default=None, help=f"reweighting regularizer [{d.delta}]")
    g.add_argument("--max-reweights", type=int, default=None, help=f"refinement rounds [{d.max_reweights}]")
    g.add_argument("--alm-max-iters", type=int, default=None, help=f"sweep budget per solve [{d.alm_max_iters}]")
    g.add_argument("--feas-tol", type=float, default=None, help=f"relative feasibility tolerance [{d.feas_tol}]")
    g.add_argument("--rank-tol", type=float, default=None, help=f"relative rank cutoff [{d.rank_tol}]")
    g.add_argument("--bracket-factor", type=float, default=None, help=f"penalty bracket growth [{d.alpha_bracket_factor}]")
    g.add_argument("--bisect-iters", type=int, default=None, help=f"penalty bisection budget [{d.alpha_bisect_iters}]")


def _config_from(args, base=None):
    """SolverConfig from explicitly set flags overlaid on `base` (a kwargs dict).

    Returns None when nothing was set and no base applies, letting callers fall
    through to whatever default the library routine itself would use.
    """
    given = {
        name: value
        for name, value in (
            ("mu_growth", args.mu_growth),
            ("mu_init", args.mu_init),
            ("delta", args.delta),
            ("max_reweights", args.max_reweights),
            ("alm_max_iters", args.alm_max_iters),
            ("feas_tol", args.feas_tol),
            ("rank_tol", args.rank_tol),
            ("alpha_bracket_factor", args.bracket_factor),
            ("alpha_bisect_iters", args.bisect_iters),
        )
        if value is not None
    }
    if not given and base is None:
        return None
    return SolverConfig(**{**(base or {}), **given})


def _default_seed(value):
    if value is not None:
        return value
    return int(os.environ.get("STLS_SEED", "0"))


def _parse_structure(spec_text, a_bar):
    if spec_text == "none":
        return Unconstrained()
    if spec_text == "toeplitz":
        return Toeplitz()
    if spec_text.startswith("mask:"):
        mask = read_matrix(spec_text[len("mask:") :])
        if mask.shape != a_bar.shape:
            raise ProblemValidationError(
                [f"mask shape {mask.shape} does not match data shape {a_bar.shape}"]
            )
        return FixedMask.from_bool(mask != 0)
    raise ProblemValidationError([f"unknown structure {spec_text!r}"])


def _write_solution(out_dir, sol, method):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "a_hat.csv", sol.a_hat)
    write_matrix(out / "e_hat.csv", sol.e_hat)
    write_matrix(out / "null_vec.csv", sol.null_vec)
    if sol.beta is not None:
        write_matrix(out / "beta.csv", sol.beta)
    diag = {"method": method, "alpha": sol.alpha}
    for key, value in sol.diagnostics.items():
        if isinstance(value, (int, float, bool, str)) or value is None:
            diag[key] = value
    with open(out / "diagnostics.json", "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return diag


def _cmd_solve(args):
    a_bar = read_matrix(args.input)
    structure = _parse_structure(args.structure, a_bar)
    constrained = not isinstance(structure, Unconstrained)
    if args.method in ("svd", "logdet") and constrained:
        raise ProblemValidationError(
            [f"--method {args.method} supports --structure none only"]
        )
    weights = read_matrix(args.weights) if args.weights else None
    cfg = _config_from(args) or SolverConfig()
    if args.method == "svd":
        sol = plain_tls(a_bar, target_rank=args.target_rank)
    elif args.method == "logdet":
        sol = logdet_tls(a_bar)
    else:
        problem = StlsProblem(a_bar, structure, weights, args.target_rank)
        if args.method == "nn":
            _, sol = alpha_search(problem, None, cfg)
        else:
            sol, _ = reweighted_stls(problem, cfg)
    diag = _write_solution(args.out, sol, args.method)
    print(
        f"method={args.method} rank={diag.get('rank')} alpha={sol.alpha:.6g} "
        f"converged={diag.get('converged')} -> {args.out}"
    )
    return 0


def _cmd_experiment(args):
    sizes = None
    if args.sizes:
        sizes = tuple(float(tok) for tok in args.sizes.split(","))
    try:
        spec = ExperimentSpec(
            name=args.name,
            sizes=sizes,
            trials=args.trials,
            seed=_default_seed(args.seed),
            config=_config_from(args, NOISY_SOLVE_DEFAULTS if args.name == "hetero" else None),
            workers=args.workers,
            out=args.out,
        )
    except ValueError as exc:
        raise ProblemValidationError([str(exc)]) from exc
    records = run_experiment(spec)
    write_records(args.out, records)
    for row in summarize(records):
        print(
            f"{args.name} n={row['n']:g} {row['method']:>6s} {row['metric']}: "
            f"mean={row['mean']:.4f} min={row['min']:.4f} q90={row['q90']:.4f} "
            f"({row['trials']} trials)"
        )
    print(f"wrote {len(records)} records -> {args.out}")
    return 0


def _cmd_hetero(args):
    cfg = _config_from(args, NOISY_SOLVE_DEFAULTS)
    if args.s or args.x:
        if not (args.s and args.x):
            raise ProblemValidationError(["--s and --x must be given together"])
        inst = HeterogeneityInstance(
            read_matrix(args.s), read_matrix(args.x), noise_level=0.0 if args.noiseless else args.noise
        )
        noiseless = args.noiseless
    else:
        inst = synthesize(args.m, args.k, args.n, noise_level=args.noise, seed=_default_seed(args.seed))
        noiseless = args.noise == 0
    sol = solve_noiseless(inst) if noiseless else solve_noisy(inst, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "u.csv", sol.u)
    write_matrix(out / "lambda.csv", sol.lam)
    write_matrix(out / "null_vec.csv", sol.null_vec)
    if sol.x_error is not None:
        write_matrix(out / "x_error.csv", sol.x_error)
    if args.save_instance:
        write_matrix(out / "s.csv", inst.s)
        write_matrix(out / "x.csv", inst.x)
        if inst.z is not None:
            write_matrix(out / "z_true.csv", inst.z)
        if inst.u is not None:
            write_matrix(out / "u_true.csv", inst.u)
    diag = {"scale_convention": sol.scale_convention}
    for key, value in sol.diagnostics.items():
        if isinstance(value, (int, float, bool, str)) or value is None:
            diag[key] = value
    with open(out / "diagnostics.json", "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True)
        fh.write("\n")
    cos = diag.get("cosine")
    cos_text = f" cosine={cos:.6f}" if cos is not None else ""
    print(f"hetero m={inst.s.shape[0]} k={inst.s.shape[1]} n={inst.x.shape[1]}{cos_text} -> {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stls",
        description="Structured total least squares via nuclear-norm relaxation with reweighting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve one problem from matrix files")
    sp.add_argument("--input", required=True, help="data matrix (CSV or MatrixMarket)")
    sp.add_argument("--method", choices=_METHODS, default="rwnn")
    sp.add_argument(
        "--structure",
        default="none",
        help="error structure: none, toeplitz, or mask:PATH (nonzero entries of PATH mark errors fixed to 0)",
    )
    sp.add_argument("--weights", help="element-wise error weight matrix (CSV or MatrixMarket)")
    sp.add_argument("--target-rank", type=int, default=None)
    sp.add_argument("--out", default="stls_out", help="output directory")
    _add_config_args(sp)
    sp.set_defaults(func=_cmd_solve)

    sp = sub.add_parser("experiment", help="run a benchmark sweep and write records CSV")
    sp.add_argument("--name", required=True, choices=EXPERIMENTS)
    sp.add_argument("--sizes", help="comma-separated sweep values (default per experiment)")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--seed", type=int, default=None, help="master seed (default: $STLS_SEED or 0)")
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out", default="records.csv")
    _add_config_args(sp)
    sp.set_defaults(func=_cmd_experiment)

    sp = sub.add_parser("hetero", help="solve a heterogeneity instance (synthetic or from files)")
    sp.add_argument("--m", type=int, default=14)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--n", type=int, default=6)
    sp.add_argument("--noise", type=float, default=0.0, help="relative noise for synthesis")
    sp.add_argument("--seed", type=int, default=None, help="master seed (default: $STLS_SEED or 0)")
    sp.add_argument("--s", help="membership matrix file (overrides synthesis)")
    sp.add_argument("--x", help="data matrix file (overrides synthesis)")
    sp.add_argument("--noiseless", action="store_true", help="treat file input as exact")
    sp.add_argument("--save-instance", action="store_true")
    sp.add_argument("--out", default="hetero_out", help="output directory")
    _add_config_args(sp)
    sp.set_defaults(func=_cmd_hetero)
    return parser


def _fail(exc, category, code):
    json.dump({"category": category, "message": str(exc)}, sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProblemValidationError as exc:
        return _fail(exc, exc.category, 2)
    except MatrixParseError as exc:
        return _fail(exc, exc.category, 3)
    except OSError as exc:
        return _fail(exc, "io-error", 3)
    except StlsError as exc:
        return _fail(exc, exc.category, 4)


if __name__ == "__main__":
    sys.exit(main())
