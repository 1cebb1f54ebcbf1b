"""Command-line front end: ``chaoslab {coeffs,bound,rates,simulate,verify}``.

Exit codes: 0 success, 1 failed check, 2 usage error, 3 hypothesis violation.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds, hermite, simulator, verify
from .hermite import Activation, expansion, parse_activation
from .io import FORMATS, RunManifest, format_records, svg_line_plot, write_output

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_HYPOTHESIS = 0, 1, 2, 3
DEFAULT_RATE_GRID = "1e6,1e12,1e18,1e24,1e30,1e36,1e42,1e48"
DEFAULT_MAX_BYTES = 2**32
SIM_COLUMNS = ["quantity", "q", "d", "n", "M", "R", "estimate", "stderr", "seed", "reference"]
CLOSED_FORM_KINDS = ("relu", "coefficient-table", "polynomial")


class UsageError(Exception):
    pass


def parse_grid(text: str, integer: bool = True) -> list[int]:
    """``a,b,c`` or a geometric range ``start:stop[:factor]`` (factor defaults to 2)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise UsageError(f"bad grid {text!r}; expected start:stop[:factor]")
        start, stop = bounds.parse_width(parts[0]), bounds.parse_width(parts[1])
        factor = bounds.parse_width(parts[2]) if len(parts) == 3 else 2
        if factor < 2 or stop < start:
            raise UsageError(f"bad grid {text!r}")
        out = [start]
        while out[-1] * factor <= stop:
            out.append(out[-1] * factor)
        return out
    return [bounds.parse_width(t) for t in text.split(",") if t.strip()]


def _activation(text: str) -> Activation:
    try:
        return parse_activation(text)
    except ValueError as err:
        raise UsageError(str(err)) from err


def _expansion_for(act: Activation, n_max: int, qmax: int | None) -> hermite.HermiteExpansion:
    if qmax is None:
        qmax = 200
        if act.kind in CLOSED_FORM_KINDS:
            qmax = max(qmax, bounds.hypothesis_cap(n_max) + 1)
    return expansion(act, qmax)


def _theorem(text: str) -> str:
    return {"1": "thm1", "2": "thm2", "thm1": "thm1", "thm2": "thm2"}[text]


# --- subcommands -----------------------------------------------------------------


def cmd_coeffs(args, manifest):
    act = _activation(args.activation)
    exp = expansion(act, args.qmax, relu_mode=args.relu_mode)
    gap = hermite.parseval_gap(exp)
    recs = [
        {"q": q, "J_q": float(exp.coeffs[q]), "source": exp.sources[q],
         "sigma_norm_sq": exp.sigma_norm_sq, "parseval_gap": gap}
        for q in range(exp.qmax + 1)
    ]
    write_output(format_records(recs, args.format), args.out, manifest)
    return EXIT_OK


def cmd_bound(args, manifest):
    act = _activation(args.activation)
    n = bounds.parse_width(args.n)
    theorem = _theorem(args.theorem)
    if args.q is not None:
        policy = "fixed"
    elif args.corollary1:
        policy = "corollary1"
    else:
        policy = "optimize"
    params = bounds.BoundParams(n=n, C=args.C, theorem=theorem, q_policy=policy, Q=args.q, override=args.override)
    qmax = args.qmax
    if qmax is None and args.q is not None:
        qmax = max(args.q, 1)
    if policy == "corollary1" and qmax is None:
        qmax = max(bounds.corollary1_Q(n), 1)
    if policy == "corollary1" and theorem == "thm1" and not args.override and 9 ** bounds.corollary1_Q(n) > n:
        raise bounds.HypothesisViolation(f"corollary truncation {bounds.corollary1_Q(n)} exceeds log_3 sqrt(n)")
    exp = _expansion_for(act, n, qmax)
    rep = bounds.optimize_Q(exp, params)
    recs = [
        {"activation": act.name, "n": str(n), "theorem": theorem, "Q": e.Q, "main_term": e.main_term,
         "tail_term": e.tail_term, "total": e.total, "is_star": int(e.Q == rep.Q_star)}
        for e in rep.curve
    ]
    write_output(format_records(recs, args.format), args.out, manifest)
    return EXIT_OK


def cmd_rates(args, manifest):
    grid = parse_grid(args.n_grid)
    if len(grid) < 4:
        raise UsageError(f"rate grid needs at least 4 widths, got {len(grid)}")
    theorem = _theorem(args.theorem)
    specs = []
    for name in args.activations.split(","):
        name = name.strip()
        if name.startswith("power:"):
            exp = bounds.power_law_expansion(float(name.split(":", 1)[1]), bounds.hypothesis_cap(grid[-1]) + 1)
        else:
            exp = _expansion_for(_activation(name), grid[-1], args.qmax)
        specs.append(bounds.RateSpec(name, exp, theorem, args.model))
    rows, fits = bounds.rate_table(specs, grid, C=args.C)
    cols = ["activation", "n", "Q_star", "main_term", "tail_term", "total"]
    recs = [{"activation": r.activation, "n": str(r.n), "Q_star": r.Q_star, "main_term": r.main_term,
             "tail_term": r.tail_term, "total": r.total} for r in rows]
    fit_recs = [{"activation": f.name, "model": f.model, "slope": f.slope, "intercept": f.intercept,
                 "r_squared": f.r_squared} for f in fits]
    text = format_records(recs, args.format, cols)
    fit_text = format_records(fit_recs, args.format)
    if args.out is None:
        write_output(text + ("\n" if args.format == "csv" else "") + fit_text, None, manifest)
    else:
        out = Path(args.out)
        write_output(fit_text, str(out.with_name(out.stem + ".fits" + out.suffix)), manifest)
        write_output(text, args.out, manifest)
    if args.plot:
        series = {}
        for spec, fit in zip(specs, fits):
            pts = [r for r in rows if r.activation == spec.name]
            x = bounds.rate_abscissa([r.n for r in pts], fit.model)
            series[f"{spec.name} ({fit.model})"] = (list(x), [math.log(r.total) for r in pts])
        write_output(svg_line_plot(series, "rate abscissa", "log bound"), args.plot, manifest)
    return EXIT_OK


def _sim_record(quantity, q, cfg, est, se, ref=None):
    return {"quantity": quantity, "q": "" if q is None else q, "d": cfg.d, "n": cfg.n, "M": cfg.M, "R": cfg.R,
            "estimate": est, "stderr": se, "seed": cfg.master_seed, "reference": "" if ref is None else ref}


def _weighted_slope(ns, vals, ses):
    """Weighted least-squares slope of ``log val`` on ``log n`` and its standard error."""
    x = np.log(np.asarray(ns, float))
    y = np.log(np.asarray(vals, float))
    w = (np.asarray(vals, float) / np.asarray(ses, float)) ** 2
    X = np.stack([np.ones_like(x), x], axis=1)
    cov = np.linalg.inv(X.T @ (X * w[:, None]))
    beta = cov @ (X.T @ (w * y))
    return float(beta[1]), float(math.sqrt(cov[1, 1]))


def cmd_simulate(args, manifest):
    act = _activation(args.activation)
    grid = parse_grid(args.n_grid) if args.n_grid else [bounds.parse_width(args.n)]
    work = args.R * args.M * max(grid) * 8
    if work > args.max_bytes:
        raise UsageError(
            f"refusing run: R*M*n*8 = {work:.3g} bytes exceeds the cap {args.max_bytes:.3g}; "
            "lower R, M or n, or raise --max-bytes"
        )
    qs = [args.q] if args.q is not None else [1]
    exp = expansion(act, max(200, max(qs) + 2))
    recs = []
    for n in grid:
        cfg = simulator.SimConfig(d=args.d, n=n, M=args.M, R=args.R, master_seed=args.seed, activation=act,
                                  threads=args.threads)
        if args.check == "covariance":
            u = np.linspace(-1, 1, args.M)
            pairs = simulator.pairs_with_correlations(args.d, u, simulator.stream_rng(args.seed, simulator.POINTS))
            cfg = simulator.SimConfig(d=args.d, n=n, M=2 * args.M, R=args.R, master_seed=args.seed, activation=act,
                                      threads=args.threads)
            rep = simulator.covariance_check(cfg, exp, pairs)
            for i in range(len(u)):
                recs.append(_sim_record(f"cov[u={rep.u[i]:.6f}]", None, cfg, rep.empirical[i], rep.stderr[i],
                                        rep.series[i]))
            recs.append(_sim_record("cov_max_abs_z", None, cfg, rep.max_abs_z, "", None))
        elif args.check == "gap":
            for q in qs:
                g = simulator.fourth_moment_gap_mc(cfg, q, 1.0 if args.unit_j else float(exp.coeffs[q]))
                recs.append(_sim_record("fourth_moment_gap", q, cfg, g.estimate, g.stderr, g.exact))
        elif args.check == "offdiag":
            p = args.p
            r = simulator.offdiag_cov_mc(cfg, p, qs[0], float(exp.coeffs[p]), float(exp.coeffs[qs[0]]))
            recs.append(_sim_record(f"cov_norm_sq[p={p}]", qs[0], cfg, r.estimate, r.stderr, r.exact))
        elif args.check == "second-moment":
            for q in range(0, args.qmax + 1):
                r = simulator.second_moment_mc(cfg, q, float(exp.coeffs[q]))
                recs.append(_sim_record("norm_sq_Fq", q, cfg, r.estimate, r.stderr, r.exact))
        elif args.check == "reconstruction":
            for Q in args.Q:
                r = simulator.chaos_remainder_mc(cfg, exp, Q)
                recs.append(_sim_record(f"remainder[Q={Q}]", None, cfg, r.estimate, r.stderr, r.exact))
        elif args.check == "w2":
            sample = simulator.simulate_field(cfg, "field")
            recs.append(_sim_record("w2_gaussian_proxy", None, cfg, simulator.w2_gaussian_proxy(sample, exp), "", 0.0))
    if args.check in ("gap", "offdiag") and len(grid) >= 3:
        sel = [r for r in recs if r["q"] == qs[0]]
        slope, se = _weighted_slope([r["n"] for r in sel], [r["estimate"] for r in sel], [r["stderr"] for r in sel])
        recs.append(_sim_record("loglog_slope", qs[0], cfg, slope, se, -1.0))
    write_output(format_records(recs, args.format, SIM_COLUMNS), args.out, manifest)
    return EXIT_OK


def cmd_verify(args, manifest):
    names = list(verify.SUITES) if args.all or not args.suite else args.suite
    checks = verify.run_suites(names, seed=args.seed, threads=args.threads)
    text = "".join(c.line() + "\n" for c in checks)
    write_output(text, args.out, manifest)
    return EXIT_FAIL if any(c.status == verify.FAIL for c in checks) else EXIT_OK


# --- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--format", choices=FORMATS, default="csv")
    common.add_argument("--out", default=None, help="output path (default stdout); a manifest is written beside it")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default ${simulator.THREADS_ENV} or 1)")

    p = argparse.ArgumentParser(prog="chaoslab", description="Hermite chaos tools for wide shallow Gaussian networks.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coeffs", parents=[common], help="Hermite coefficients of an activation")
    c.add_argument("--activation", required=True)
    c.add_argument("--qmax", type=int, default=20)
    c.add_argument("--relu-mode", choices=hermite.SOURCES, default="closed-form")
    c.set_defaults(func=cmd_coeffs)

    b = sub.add_parser("bound", parents=[common], help="evaluate a distance bound")
    b.add_argument("--activation", required=True)
    b.add_argument("--n", required=True, help="width, e.g. 4096, 1e6 or 10^48")
    b.add_argument("--theorem", choices=["1", "2", "thm1", "thm2"], default="1")
    g = b.add_mutually_exclusive_group()
    g.add_argument("--optimize", action="store_true", help="minimize over Q (default)")
    g.add_argument("--q", type=int, default=None, help="fixed truncation level")
    g.add_argument("--corollary1", action="store_true", help="use Q = round(log n / (3 log 3))")
    b.add_argument("--C", type=float, default=1.0)
    b.add_argument("--qmax", type=int, default=None)
    b.add_argument("--override", action="store_true", help="allow Q beyond log_3 sqrt(n)")
    b.set_defaults(func=cmd_bound)

    r = sub.add_parser("rates", parents=[common], help="optimized bounds over a width grid with fitted exponents")
    r.add_argument("--activations", default="relu,erf,tanh", help="comma list; power:ALPHA gives J_q = q^-ALPHA")
    r.add_argument("--n-grid", default=DEFAULT_RATE_GRID)
    r.add_argument("--theorem", choices=["1", "2", "thm1", "thm2"], default="1")
    r.add_argument("--model", choices=bounds.RATE_MODELS, default=None)
    r.add_argument("--C", type=float, default=1.0)
    r.add_argument("--qmax", type=int, default=None)
    r.add_argument("--plot", default=None, help="write an SVG plot to this path")
    r.set_defaults(func=cmd_rates)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo checks of the random field")
    s.add_argument("--activation", default="relu")
    s.add_argument("--d", type=int, default=3)
    s.add_argument("--n", default="64")
    s.add_argument("--n-grid", default=None, help="widths, e.g. 16:1024 (doubling) or 16,64,256")
    s.add_argument("--M", type=int, default=8)
    s.add_argument("--R", type=int, default=10_000)
    s.add_argument("--check", required=True,
                   choices=["covariance", "gap", "offdiag", "second-moment", "reconstruction", "w2"])
    s.add_argument("--q", type=int, default=None)
    s.add_argument("--p", type=int, default=2, help="second chaos order for --check offdiag")
    s.add_argument("--Q", type=int, nargs="+", default=[1, 3, 5])
    s.add_argument("--qmax", type=int, default=4)
    s.add_argument("--unit-j", action="store_true", help="use J_q = 1 for the gap check")
    s.add_argument("--max-bytes", type=float, default=DEFAULT_MAX_BYTES)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", parents=[common], help="run the self-verification suites")
    v.add_argument("--suite", action="append", choices=verify.SUITES)
    v.add_argument("--all", action="store_true")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    manifest = RunManifest(args.command, {k: v for k, v in vars(args).items() if k != "func"}, args.seed)
    try:
        return args.func(args, manifest)
    except bounds.HypothesisViolation as err:
        print(f"chaoslab: hypothesis violation: {err}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (UsageError, ValueError) as err:
        print(f"chaoslab {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
