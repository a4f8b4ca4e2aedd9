"""Command-line interface.

Subcommands:

* ``simulate`` — run replicated trajectories, writing a manifest and a long
  per-checkpoint statistics CSV (plus a final-state size-biased ECDF CSV).
* ``solve`` — solve the limit ODE for a rule and write the curve CSV.
* ``check`` — evaluate the equidistribution condition; writes a JSON report.
  Exit code 0 for PASS or INCONCLUSIVE, 3 for FAIL.
* ``scan`` — sweep the two-term family (or largest-of-k orders) and write
  one verdict row per parameter.
* ``compare`` — simulate a rule and report how close the empirical rescaled
  ECDF is to the solved limit curve.

All outputs are deterministic functions of the arguments; re-running a
command reproduces its files byte for byte.  Floating-point values are
written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys

import numpy as np

from . import __version__
from .condition_checker import check_condition, pinch_thresholds, scan_family
from .errors import PsiSplitError
from .interval_engine import backend_name
from .limit_solver import solve_f
from .psi_model import PsiSpec, max_k, spec_from_any, two_term
from .simulator import (KAKUTANI, DirectRule, SimConfig, rule_label, run)

_DIRECT_RE = re.compile(r"^direct-(max|min)(\d+)$")


def parse_rule(text: str):
    """Rule selector: kakutani, direct-max<k>/direct-min<k>, preset name,
    compact k:p pairs, or weights JSON."""
    if text == KAKUTANI:
        return KAKUTANI
    m = _DIRECT_RE.match(text)
    if m:
        return DirectRule(k=int(m.group(2)), mode=m.group(1))
    return spec_from_any(text)


def _fmt(v) -> str:
    if v is None:
        return ""
    return f"{v:.17g}"


def _out_dir(args) -> str:
    out = args.out or os.environ.get("PSISPLIT_OUTDIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _write_atomic(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_manifest(path: str, payload: dict) -> None:
    _write_atomic(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _rule_weights(rule):
    if isinstance(rule, PsiSpec):
        return {str(k): p for k, p in rule.weights.items()}
    return None


def _alpha_list(text: str | None, default):
    if text is None:
        return default
    text = text.strip()
    if not text:
        return ()
    return tuple(float(tok) for tok in text.split(","))


def _int_list(text: str | None):
    if text is None:
        return None
    return tuple(int(tok) for tok in text.strip().split(","))


# --- simulate ------------------------------------------------------------------


def _stats_csv(result) -> str:
    lines = ["replica,n,t_n,alpha,N_alpha,N_alpha_over_n,n_intervals,"
             "largest_gap,n_largest_gap"]
    for st in result.stats:
        for ci, n in enumerate(st.checkpoints):
            t_n = _fmt(st.times[ci]) if st.times is not None else ""
            common = (f"{st.replica},{n},{t_n}")
            tail = (f"{st.n_intervals[ci]},{_fmt(st.largest_gaps[ci])},"
                    f"{_fmt(st.n_intervals[ci] * st.largest_gaps[ci])}")
            if st.alphas.size:
                for j, a in enumerate(st.alphas):
                    cnt = st.counts[ci, j]
                    lines.append(f"{common},{_fmt(a)},{cnt},"
                                 f"{_fmt(cnt / n)},{tail}")
            else:
                lines.append(f"{common},,,{tail}")
    return "\n".join(lines) + "\n"


def _ecdf_csv(result) -> str:
    alphas = result.stats[0].alphas
    head = "replica,n,x,A" + "".join(f",A_{_fmt(a)}" for a in alphas)
    lines = [head]
    for st in result.stats:
        ci = len(st.checkpoints) - 1
        n = st.checkpoints[ci]
        for gi, x in enumerate(st.ecdf_grid):
            row = f"{st.replica},{n},{_fmt(x)},{_fmt(st.ecdf[ci, gi])}"
            for j in range(alphas.size):
                row += f",{_fmt(st.ecdf_by_alpha[ci, j, gi])}"
            lines.append(row)
    return "\n".join(lines) + "\n"


def _cmd_simulate(args) -> int:
    rule = parse_rule(args.rule)
    cfg = SimConfig(
        rule=rule,
        n_steps=args.steps,
        seed=args.seed,
        alphas=_alpha_list(args.alphas, (0.25, 0.5, 0.75)),
        checkpoints=_int_list(args.checkpoints),
        initial_points=(tuple(float(t) for t in args.initial_points.split(","))
                        if args.initial_points else None),
        replicas=args.replicas,
        poisson_time=args.poisson_time,
        ecdf=args.ecdf,
    )
    result = run(cfg, backend=args.backend, workers=args.workers)
    out = _out_dir(args)
    stats_path = os.path.join(out, f"{args.prefix}_stats.csv")
    _write_atomic(stats_path, _stats_csv(result))
    files = {"stats": os.path.basename(stats_path)}
    if args.ecdf:
        ecdf_path = os.path.join(out, f"{args.prefix}_ecdf.csv")
        _write_atomic(ecdf_path, _ecdf_csv(result))
        files["ecdf"] = os.path.basename(ecdf_path)
    manifest = {
        "command": "simulate",
        "version": __version__,
        "backend": backend_name(args.backend),
        "rule": cfg.rule_label(),
        "weights": _rule_weights(cfg.rule),
        "n_steps": cfg.n_steps,
        "seed": cfg.seed,
        "replicas": cfg.replicas,
        "alphas": list(cfg.alphas),
        "checkpoints": list(cfg.checkpoints),
        "initial_points": list(cfg.initial_points),
        "poisson_time": cfg.poisson_time,
        "ecdf": cfg.ecdf,
        "files": files,
    }
    _write_manifest(os.path.join(out, f"{args.prefix}_manifest.json"), manifest)
    frac = result.mean_count_fractions()[-1]
    gaps = result.mean_scaled_gaps()[-1]
    for a, f in zip(cfg.alphas, frac):
        print(f"alpha={a:g}: mean N_alpha/n = {f:.6f}")
    print(f"mean n * largest_gap = {gaps:.6f}")
    print(f"wrote {stats_path}")
    return 0


# --- solve ---------------------------------------------------------------------


def _cmd_solve(args) -> int:
    spec = spec_from_any(args.psi)
    curve = solve_f(spec, z_max=args.z_max, steps=args.steps,
                    lam_tol=args.lam_tol, backend=args.backend)
    out = _out_dir(args)
    curve_path = os.path.join(out, f"{args.prefix}_curve.csv")
    _write_atomic(curve_path, curve.to_csv_text())
    r = curve.residuals
    print(f"spec = {spec.label()}")
    print(f"lambda = {curve.lam:.12g}")
    print(f"f_infinity = {curve.f_infinity:.12g} (tail: {curve.tail_model})")
    print(f"residuals: integro={r.integro:.3g} norm={r.norm:.3g} "
          f"lambda={r.lam:.3g}")
    print(f"sup F' = {r.sup_fprime:.9g}, sup zF' = {r.sup_zfprime:.9g}")
    print(f"wrote {curve_path}")
    return 0


# --- check ---------------------------------------------------------------------


def _cmd_check(args) -> int:
    spec = spec_from_any(args.psi)
    report = check_condition(spec, z_max=args.z_max, steps=args.steps,
                             backend=args.backend)
    out = _out_dir(args)
    path = os.path.join(out, f"{args.prefix}_report.json")
    _write_manifest(path, report.to_json_dict())
    print(f"spec = {spec.label()}")
    print(f"lambda = {report.lam:.12g}")
    print(f"R_star = {report.r_star:.9g} at z = {report.argmax_z:.6g} "
          f"(R at 0+ = {report.r_zero:g})")
    print(f"delta_max = {report.delta_max:.9g}")
    for c in report.bound_checks:
        if c.applicable:
            print(f"  {c.name}: value {c.value:.9g} <= bound {c.bound:.9g}: "
                  f"{'ok' if c.holds else 'VIOLATED'}")
    for note in report.notes:
        print(f"note: {note}")
    print(f"verdict: {report.verdict}")
    print(f"wrote {path}")
    return 3 if report.verdict == "FAIL" else 0


# --- scan ----------------------------------------------------------------------


def _parse_params(text: str):
    if ":" in text:
        a, b, n = text.split(":")
        return np.linspace(float(a), float(b), int(n))
    return np.array([float(tok) for tok in text.split(",")])


def _cmd_scan(args) -> int:
    if args.family == "two-term":
        make = two_term
    elif args.family == "max-order":
        make = lambda k: max_k(int(round(k)))  # noqa: E731
    else:
        raise PsiSplitError(f"unknown family {args.family!r}")
    params = _parse_params(args.params)
    rows = scan_family(make, params, z_max=args.z_max, steps=args.steps,
                       backend=args.backend)
    out = _out_dir(args)
    path = os.path.join(out, f"{args.prefix}_scan.csv")
    lines = ["param,lambda,R_star,delta_max,verdict,error"]
    for r in rows:
        err = (r.error or "").replace(",", ";")
        lines.append(f"{_fmt(r.param)},{_fmt(r.lam)},{_fmt(r.r_star)},"
                     f"{_fmt(r.delta_max)},{r.verdict},{err}")
    _write_atomic(path, "\n".join(lines) + "\n")
    for r in rows:
        print(f"param={r.param:g}: {r.verdict}"
              + (f" ({r.error})" if r.error else f" delta_max={r.delta_max:.4f}"))
    print(f"wrote {path}")
    return 0


# --- compare -------------------------------------------------------------------


def _curve_rule(rule):
    """Choice-rule spec whose limit curve matches the given simulation rule."""
    if isinstance(rule, PsiSpec):
        return rule
    if isinstance(rule, DirectRule):
        return spec_from_any(f"{rule.mode}{rule.k}")
    raise PsiSplitError(
        "compare needs a rule with a limit curve; the largest-interval rule "
        "has none")


def _cmd_compare(args) -> int:
    rule = parse_rule(args.rule)
    spec = _curve_rule(rule)
    curve = solve_f(spec, steps=args.curve_steps, backend=args.backend)
    alphas = _alpha_list(args.alphas, (0.25, 0.5, 0.75))
    cfg = SimConfig(rule=rule, n_steps=args.steps, seed=args.seed,
                    alphas=alphas, replicas=args.replicas, ecdf=True)
    result = run(cfg, backend=args.backend, workers=args.workers)
    grid = np.asarray(cfg.ecdf_grid)
    F_grid = curve.interp(grid)
    weight = grid ** -2.0
    out = _out_dir(args)
    path = os.path.join(out, f"{args.prefix}_compare.csv")
    lines = ["replica,n,alpha,N_alpha_over_n,distance"]
    for st in result.stats:
        ci = len(st.checkpoints) - 1
        n = st.checkpoints[ci]
        for j, a in enumerate(st.alphas):
            d = np.trapezoid(weight * np.abs(st.ecdf_by_alpha[ci, j]
                                             - a * F_grid), grid)
            lines.append(f"{st.replica},{n},{_fmt(a)},"
                         f"{_fmt(st.counts[ci, j] / n)},{_fmt(d)}")
        d1 = np.trapezoid(weight * np.abs(st.ecdf[ci] - F_grid), grid)
        lines.append(f"{st.replica},{n},1,1,{_fmt(d1)}")
    _write_atomic(path, "\n".join(lines) + "\n")
    mean_d1 = float(np.mean([
        np.trapezoid(weight * np.abs(st.ecdf[-1] - F_grid), grid)
        for st in result.stats]))
    print(f"rule = {rule_label(rule)} vs curve lambda = {curve.lam:.9g}")
    print(f"mean delta-1 distance (all intervals): {mean_d1:.6f}")
    print(f"wrote {path}")
    return 0


# --- thresholds ------------------------------------------------------------------


def _cmd_thresholds(args) -> int:
    th = pinch_thresholds()
    print(f"cubic_root = {th['cubic_root']:.10f} (~ {th['cubic_root']:.2f})")
    print(f"exp_third  = {th['exp_third']:.10f}")
    return 0


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="psisplit",
        description="Simulate interval-splitting processes and verify their "
                    "limiting rescaled-length distributions.")
    p.add_argument("--version", action="version",
                   version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, prefix):
        sp.add_argument("--backend", choices=["auto", "compiled", "pure"],
                        default=None, help="computation backend")
        sp.add_argument("--out", default=None,
                        help="output directory (default $PSISPLIT_OUTDIR or .)")
        sp.add_argument("--prefix", default=prefix,
                        help="output file name prefix")

    sp = sub.add_parser("simulate", help="run replicated trajectories")
    sp.add_argument("--rule", required=True,
                    help="kakutani, direct-max<k>/direct-min<k>, preset name, "
                         "k:p pairs, or weights JSON")
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replicas", type=int, default=1)
    sp.add_argument("--alphas", default=None,
                    help="comma list of tracked points (default 0.25,0.5,0.75)")
    sp.add_argument("--checkpoints", default=None, help="comma list of steps")
    sp.add_argument("--initial-points", default=None,
                    help="comma list of starting split points")
    sp.add_argument("--poisson-time", action="store_true",
                    help="attach continuous arrival times")
    sp.add_argument("--ecdf", action="store_true",
                    help="record the rescaled size-biased ECDF")
    sp.add_argument("--workers", type=int, default=1)
    common(sp, "sim")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("solve", help="solve the limit ODE for a rule")
    sp.add_argument("--psi", required=True, help="choice-rule spec")
    sp.add_argument("--steps", type=int, default=10_000)
    sp.add_argument("--z-max", type=float, default=None)
    sp.add_argument("--lam-tol", type=float, default=1e-10)
    common(sp, "solve")
    sp.set_defaults(func=_cmd_solve)

    sp = sub.add_parser("check", help="evaluate the equidistribution condition")
    sp.add_argument("--psi", required=True, help="choice-rule spec")
    sp.add_argument("--steps", type=int, default=10_000)
    sp.add_argument("--z-max", type=float, default=None)
    common(sp, "check")
    sp.set_defaults(func=_cmd_check)

    sp = sub.add_parser("scan", help="sweep a rule family")
    sp.add_argument("--family", choices=["two-term", "max-order"],
                    default="two-term")
    sp.add_argument("--params", required=True,
                    help="comma list or start:stop:count")
    sp.add_argument("--steps", type=int, default=10_000)
    sp.add_argument("--z-max", type=float, default=None)
    common(sp, "scan")
    sp.set_defaults(func=_cmd_scan)

    sp = sub.add_parser("compare",
                        help="simulate and compare against the limit curve")
    sp.add_argument("--rule", required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--replicas", type=int, default=1)
    sp.add_argument("--alphas", default=None)
    sp.add_argument("--curve-steps", type=int, default=10_000)
    sp.add_argument("--workers", type=int, default=1)
    common(sp, "compare")
    sp.set_defaults(func=_cmd_compare)

    sp = sub.add_parser("thresholds",
                        help="print the interpolation-family thresholds")
    sp.set_defaults(func=_cmd_thresholds)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PsiSplitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
