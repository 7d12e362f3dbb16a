"""Command-line front end: ``gwrdt <subcommand> [options]``.

Exit status: 0 on success, 1 when a model fails validation or a
computation raises a gwrdt error, 2 on usage and config errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .distortion import resolve_distortion
from .empirical import joint_measure, measure_csv, offspring_measure, shift_defect
from .errors import ConfigError, GWError
from .experiments import ball_exponent, ldp_decay, stationarity_check, verify_aep
from .model import PRESETS, GWModel, load_model, mean_matrix, validate_model
from .output import Writer
from .ratefn import _derived_seed, d_average, i_rho, rd_summary
from .spectral import pair_matrix, perron, stationary_pair, PairMatrix
from .trees import (
    Overflow,
    enumerate_trees,
    sample_conditioned_many,
    sample_tree,
    tree_from_text,
    tree_to_text,
)

SCHEMA_HELP = """\
Model config (JSON):
  {"alphabet": ["0", "1"],
   "root_law": {"1": 1.0},
   "cap": 2,
   "kernel": {"1": [{"children": [], "p": 0.5},
                    {"children": ["1", "0"], "p": 0.5}],
              "0": [{"children": [], "p": 0.5},
                    {"children": ["0", "0"], "p": 0.5}]}}
  Every kernel row must sum to 1; offspring strings are ordered and at most cap long.
Distortion table (CSV): header mark1,mark2,value; marks written type|children, e.g. 1|10;
  an optional row *,*,value gives a default.
Built-in models: mtdna (with --alpha), uniform-binary, toy-cap1.
Built-in distortions: type-hamming, mark-hamming, zero.
"""


def parse_grid(text: str) -> list[float]:
    """``lo:hi:step`` inclusive of ``hi`` (up to rounding)."""
    try:
        lo, hi, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must be lo:hi:step, got {text!r}") from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"grid needs step > 0 and hi >= lo, got {text!r}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 12) for i in range(count)]


def parse_n_list(text: str) -> list[int]:
    try:
        out = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"n-list must be comma-separated integers, got {text!r}") from None
    if not out or any(n < 1 for n in out):
        raise argparse.ArgumentTypeError("n-list entries must be positive")
    return out


def parse_interval(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"interval must be lo:hi, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"interval needs lo < hi, got {text!r}")
    return lo, hi


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model selection")
    g.add_argument("--model", default="mtdna", help="built-in model for X (and Y unless --model-y): %(choices)s", choices=sorted(PRESETS))
    g.add_argument("--alpha", type=float, default=0.5, help="mutation rate of the mtdna preset (default 0.5)")
    g.add_argument("--config", metavar="PATH", help="JSON model config for X; overrides --model")
    g.add_argument("--model-y", choices=sorted(PRESETS), help="built-in model for Y (default: same as X)")
    g.add_argument("--alpha-y", type=float, help="alpha for a Y mtdna preset (default: --alpha)")
    g.add_argument("--config-y", metavar="PATH", help="JSON model config for Y")
    g.add_argument("--rho", default="type-hamming", metavar="NAME|PATH", help="distortion: type-hamming, mark-hamming, zero or a CSV table")
    o = p.add_argument_group("run")
    o.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    o.add_argument("--out", metavar="DIR", help="write CSV files and a JSON sidecar to DIR instead of stdout")
    o.add_argument("--tol", type=float, help="tolerance override (criticality for validate/spectral, i_rho stopping)")


def _mode(p: argparse.ArgumentParser) -> None:
    m = p.add_mutually_exclusive_group()
    m.add_argument("--exact", dest="mode", action="store_const", const="exact", help="exact enumeration (default)")
    m.add_argument("--mc", dest="mode", action="store_const", const="mc", help="Monte Carlo")
    p.set_defaults(mode="exact")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gwrdt",
        description="Rate-distortion tools for multitype Galton-Watson trees.",
        epilog=SCHEMA_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"gwrdt {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_, epilog=SCHEMA_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
        _common(p)
        return p

    add("validate", "check stochasticity, cap, criticality and irreducibility of the model(s)")
    p = add("spectral", "pair matrix A, Perron eigenvalue and eigenvector pi with marginals")
    p.add_argument("--orientation", choices=["right", "left"], default="right", help="Perron vector of the parent-pair-row matrix (default right)")
    p = add("simulate", "sample trees (conditioned on --n vertices, or unconditioned)")
    p.add_argument("--n", type=int, help="condition on exactly n vertices")
    p.add_argument("--samples", type=int, default=1, help="number of trees (default 1)")
    p.add_argument("--size-cap", type=int, default=10**6, help="overflow cap for unconditioned trees")
    p.add_argument("--max-rejects", type=int, default=10**4, help="rejection budget per accepted tree")
    p = add("enumerate", "all trees of exactly --n vertices with exact probabilities")
    p.add_argument("--n", type=int, required=True)
    p = add("measures", "empirical offspring and joint measures of a sampled (or given) tree pair")
    p.add_argument("--n", type=int, help="size of the sampled trees")
    p.add_argument("--trees", metavar="PATH", help="file with two trees in text format (x then y)")
    p = add("rdcurve", "limiting log-MGF and rate-distortion curve R(d)")
    p.add_argument("--grid", type=parse_grid, default=parse_grid("0:1:0.05"), help="distortion grid lo:hi:step")
    p.add_argument("--t-grid", type=parse_grid, default=parse_grid("-5:5:0.5"), help="t grid for Lambda samples")
    p.add_argument("--n-list", type=parse_n_list, default=[], help="sizes for the finite-n d_min trend, e.g. 1,3,5")
    p.add_argument("--order", choices=["outer-y", "outer-x"], default="outer-y", help="inner/outer roles in Lambda")
    p = add("irho", "rate function I_rho(z) of the distortion LDP")
    p.add_argument("--grid", type=parse_grid, default=parse_grid("0:1:0.125"), help="z grid lo:hi:step")
    p = add("ball", "distortion-ball exponent of one tree")
    p.add_argument("--d", type=float, required=True, help="ball radius")
    p.add_argument("--n", type=int, help="sample the centre x from P_n")
    p.add_argument("--tree", help="centre tree in text format, e.g. '3 1:2 1:0 1:0'")
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo sample size")
    _mode(p)
    p = add("verify-aep", "ball exponents versus Lambda_n*(d) and R(d) over a list of sizes")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--n-list", type=parse_n_list, default=[3, 5, 7, 9])
    p.add_argument("--trees-per-n", type=int, default=20)
    p.add_argument("--samples", type=int, default=100_000, help="Monte Carlo size where enumeration is infeasible")
    p = add("ldp-decay", "decay rate of P{rho_n(x, Y) in [lo, hi]} versus inf I_rho")
    p.add_argument("--interval", type=parse_interval, required=True, help="lo:hi")
    p.add_argument("--n-list", type=parse_n_list, default=[3, 5, 7, 9])
    p.add_argument("--samples", type=int, default=100_000)
    p = add("stationarity", "which Perron candidate the simulated joint measures approach")
    p.add_argument("--n-list", type=parse_n_list, default=[11, 25, 51])
    p.add_argument("--samples", type=int, default=200)
    return parser


def _resolve_model(preset, alpha, config) -> GWModel:
    if config:
        return load_model(config)
    if preset == "mtdna":
        return PRESETS[preset](alpha)
    return PRESETS[preset]()


def resolve(args) -> tuple[dict, GWModel, GWModel]:
    """Resolve models and build the run config that is digested into every output."""
    mx = _resolve_model(args.model, args.alpha, args.config)
    if args.config_y or args.model_y:
        my = _resolve_model(args.model_y or args.model, args.alpha_y if args.alpha_y is not None else args.alpha, args.config_y)
    elif args.alpha_y is not None and not args.config:
        my = _resolve_model(args.model, args.alpha_y, None)
    else:
        my = mx
    skip = {"out", "config", "config_y", "model", "model_y", "alpha", "alpha_y"}
    params = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    cfg = {
        "tool_version": __version__,
        "model_x": {"name": mx.name, "params": dict(mx.params), "spec": mx.to_dict()},
        "model_y": {"name": my.name, "params": dict(my.params), "spec": my.to_dict()},
        **params,
    }
    return cfg, mx, my


def _matrix_rows(pm: PairMatrix, mat, model: GWModel):
    lab = model.alphabet.label
    names = [f"{lab(a)}{lab(b)}" for a, b in pm.pairs]
    return ["row_pair", *names], [[names[i], *mat[i].tolist()] for i in range(len(names))]


def cmd_validate(args, cfg, mx, my, w: Writer) -> int:
    tol = args.tol if args.tol is not None else 1e-9
    ok = True
    rows = []
    summary = {}
    for role, m in (("x", mx), ("y", my)):
        rep = validate_model(m, tol=tol)
        ok &= rep.ok
        for line in rep.lines(m):
            key, _, val = line.partition(": ")
            rows.append([role, key.strip(), val])
        summary[role] = {
            "ok": rep.ok,
            "eigenvalue": rep.eigenvalue,
            "critical": rep.critical,
            "weakly_irreducible": rep.weakly_irreducible,
            "strongly_irreducible": rep.strongly_irreducible,
            "stochasticity": rep.stochasticity,
            "cap_violations": rep.cap_violations,
        }
        if my is mx:
            break
    w.table("validation", ["model", "check", "result"], rows)
    w.finish(summary)
    return 0 if ok else 1


def cmd_spectral(args, cfg, mx, my, w: Writer) -> int:
    pm = pair_matrix(mx, my)
    shown = PairMatrix(pm.display(), pm.n_types)
    cols, rows = _matrix_rows(pm, shown.entries, mx)
    w.table("pair_matrix", cols, rows)
    pd = perron(shown, orientation=args.orientation)
    tol = args.tol if args.tol is not None else 1e-9
    lab = mx.alphabet.label
    prow = [[f"{lab(a)}{lab(b)}", float(pd.pi[i])] for i, (a, b) in enumerate(pm.pairs)]
    w.table("perron", ["pair", "pi"], prow)
    marg = [[lab(a), float(pd.pi1[a]), float(pd.pi2[a])] for a in range(pm.n_types)]
    w.table("marginals", ["type", "pi1", "pi2"], marg)
    w.table("eigen", ["quantity", "value"], [
        ["eigenvalue", pd.eigenvalue],
        ["orientation", pd.orientation],
        ["iterations", pd.iterations],
        ["residual", pd.residual],
        ["simple", pd.unique],
        ["mean_matrix_radius_x", float(np.max(np.abs(np.linalg.eigvals(mean_matrix(mx)))))],
    ])
    critical = abs(pd.eigenvalue - 1.0) <= tol
    w.finish({"eigenvalue": pd.eigenvalue, "pi": pd.pi, "pi1": pd.pi1, "pi2": pd.pi2, "critical": critical})
    return 0


def cmd_simulate(args, cfg, mx, my, w: Writer) -> int:
    if args.n is not None:
        res = sample_conditioned_many(mx, args.n, args.samples, args.seed, max_rejects=args.max_rejects)
        body = "".join(tree_to_text(t, mx.alphabet) + "\n" for t in res.trees)
        w.text("trees", body)
        w.finish({"n": args.n, "samples": len(res.trees), "attempts": res.attempts, "acceptance_rate": res.acceptance_rate})
        return 0
    lines, overflows = [], 0
    for j in range(args.samples):
        t = sample_tree(mx, _derived_seed(args.seed, j), args.size_cap)
        if isinstance(t, Overflow):
            overflows += 1
            lines.append(f"# overflow (> {args.size_cap} vertices)\n")
        else:
            lines.append(tree_to_text(t, mx.alphabet) + "\n")
    w.text("trees", "".join(lines))
    w.finish({"samples": args.samples, "overflows": overflows})
    return 0


def cmd_enumerate(args, cfg, mx, my, w: Writer) -> int:
    wl = enumerate_trees(mx, args.n)
    tot = wl.total
    rows = [[tree_to_text(t, mx.alphabet), p, p / tot] for t, p in wl.items]
    w.table("trees", ["tree", "prob", "cond_prob"], rows)
    w.finish({"n": args.n, "count": len(wl), "total": tot})
    return 0


def cmd_measures(args, cfg, mx, my, w: Writer) -> int:
    if args.trees:
        with open(args.trees) as fh:
            lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
        if len(lines) < 2:
            raise ConfigError(f"{args.trees}: expected two trees")
        tx, ty = tree_from_text(lines[0], mx.alphabet), tree_from_text(lines[1], my.alphabet)
    elif args.n is not None:
        tx = sample_conditioned_many(mx, args.n, 1, _derived_seed(args.seed, 0)).trees[0]
        ty = sample_conditioned_many(my, args.n, 1, _derived_seed(args.seed, 1)).trees[0]
    else:
        raise ConfigError("measures needs --n or --trees")
    for name, meas, alph in (
        ("offspring_x", offspring_measure(tx), mx.alphabet),
        ("offspring_y", offspring_measure(ty), my.alphabet),
        ("joint", joint_measure(tx, ty), mx.alphabet),
    ):
        text = measure_csv(meas, alph)
        rows = [ln.split(",") for ln in text.strip().splitlines()]
        w.table(name, rows[0], rows[1:])
    sd = shift_defect(joint_measure(tx, ty), max(mx.n_types, my.n_types))
    w.table("shift_defect", ["type", "first", "second"], [
        [mx.alphabet.label(a), sd.per_type_first[a], sd.per_type_second[a]] for a in sorted(sd.per_type_first)
    ])
    w.finish({"x": tree_to_text(tx, mx.alphabet), "y": tree_to_text(ty, my.alphabet), "max_defect": sd.max_defect})
    return 0


def cmd_rdcurve(args, cfg, mx, my, rho, w: Writer) -> int:
    s = rd_summary(mx, my, rho, args.grid, args.t_grid, args.n_list, args.order)
    w.table("lambda", ["t", "lambda"], s.lambda_samples)
    w.table("rd", ["d", "R"], s.curve)
    if s.d_min_n:
        w.table("dmin_n", ["n", "d_min_n"], s.d_min_n)
    summary = {
        "d_min": s.d_min,
        "d_av": s.d_av,
        "d_min_inf_proxy": s.d_min_inf_proxy,
        "notes": s.notes,
        "units": "nats",
    }
    if s.threshold is not None:
        summary["mtdna_threshold"] = s.threshold
    w.finish(summary)
    return 0


def cmd_irho(args, cfg, mx, my, rho, w: Writer) -> int:
    tol = args.tol if args.tol is not None else 1e-12
    rows = []
    for z in args.grid:
        r = i_rho(z, mx, my, rho, tol=tol)
        res = r.residuals
        rows.append([z, r.value, res.get("shift"), res.get("distortion"), res.get("outer_iterations")])
    w.table("irho", ["z", "I_rho", "shift_residual", "distortion_residual", "outer_iterations"], rows)
    pi = stationary_pair(mx, my)
    w.finish({"d_av": d_average(pi, mx, my, rho), "units": "nats"})
    return 0


def cmd_ball(args, cfg, mx, my, rho, w: Writer) -> int:
    if args.tree:
        x = tree_from_text(args.tree, mx.alphabet)
    elif args.n is not None:
        x = sample_conditioned_many(mx, args.n, 1, _derived_seed(args.seed, 0)).trees[0]
    else:
        raise ConfigError("ball needs --tree or --n")
    be = ball_exponent(x, args.d, my, rho, args.mode, args.samples, _derived_seed(args.seed, 1))
    cols = ["n", "d", "x", "method", "q_ball", "exponent", "stderr", "censored", "lower_bound", "hits", "samples"]
    w.table("ball", cols, [[be.n, be.d, be.x_digest, be.method, be.prob, be.exponent, be.stderr, be.censored, be.lower_bound, be.hits, be.samples]])
    w.finish({"exponent": be.exponent, "censored": be.censored})
    return 0


def _report(rep, w: Writer) -> int:
    w.table("rows", rep.columns, rep.rows)
    w.finish(rep.summary)
    return 0


def run(argv: Sequence[str] | None = None, stream=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    stream = stream if stream is not None else sys.stdout
    try:
        cfg, mx, my = resolve(args)
        w = Writer(cfg, args.out, args.command.replace("-", "_"), stream)
        cmd = args.command
        if cmd == "validate":
            return cmd_validate(args, cfg, mx, my, w)
        if cmd == "spectral":
            return cmd_spectral(args, cfg, mx, my, w)
        if cmd == "simulate":
            return cmd_simulate(args, cfg, mx, my, w)
        if cmd == "enumerate":
            return cmd_enumerate(args, cfg, mx, my, w)
        if cmd == "measures":
            return cmd_measures(args, cfg, mx, my, w)
        rho = resolve_distortion(args.rho, mx, my)
        if cmd == "rdcurve":
            return cmd_rdcurve(args, cfg, mx, my, rho, w)
        if cmd == "irho":
            return cmd_irho(args, cfg, mx, my, rho, w)
        if cmd == "ball":
            return cmd_ball(args, cfg, mx, my, rho, w)
        if cmd == "verify-aep":
            return _report(verify_aep(mx, my, rho, args.d, args.n_list, args.trees_per_n, args.samples, args.seed), w)
        if cmd == "ldp-decay":
            return _report(ldp_decay(mx, my, rho, args.interval, args.n_list, args.samples, args.seed), w)
        if cmd == "stationarity":
            return _report(stationarity_check(mx, my, args.n_list, args.samples, args.seed), w)
    except ConfigError as exc:
        print(f"error: {exc}\n\n{SCHEMA_HELP}", file=sys.stderr)
        return 2
    except GWError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    parser.error(f"unknown command {args.command!r}")
    return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
