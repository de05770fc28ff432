"""Command-line interface: check, convert, stability, bisect, verify, and
export-sdp pipelines over PDE-spec files, with paired human/JSON reports.

Exit codes: 0 on success (stability: feasible), 1 on an expected negative
(infeasible SDP, inconsistent domain, failed verification), 2 on errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from .pdemodel import (
    PDESpec,
    SpecParseError,
    check_admissible,
    check_consistent,
    parse_spec,
)
from .pialg import NDPIOperator, adjoint_nd, compose_nd, op_to_doc
from .pieconvert import InconsistentSpec, PIESystem, build_pie
from .lpi import (
    DegreeError,
    NonMonotoneFeasibility,
    StabilityCompiler,
    bisect_rate,
    replay_certificate,
)
from .sdpsolve import export_standard, solve
from .verify import (
    QuadGrid,
    apply_exact,
    apply_quadrature,
    as_polyvec,
    bc_residual,
    diff_multi,
    polyvec_fn,
)
from .poly import MatPoly, Polynomial, svar

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_ERROR = 2


def _solver_opts(args) -> dict:
    opts = {
        "tol": args.solver_tol,
        "max_iter": int(os.environ.get("PISTAB_MAX_ITER", "100")),
    }
    env_tol = os.environ.get("PISTAB_SOLVER_TOL")
    if env_tol is not None:
        opts["tol"] = float(env_tol)
    if os.environ.get("PISTAB_VERBOSE"):
        opts["verbose"] = True
    return opts


def _trim_flags(args) -> dict:
    return {
        "trim_p_multiplier_only": args.trim_p_multiplier_only,
        "trim_r_kernel_only": args.trim_r_kernel_only,
        "trim_q_drop_multiplier": args.trim_q_drop_multiplier,
        "trim_symmetric_kernels": args.trim_symmetric_kernels,
        "weighted_gram": not args.no_weighted_gram,
    }


def _read_spec(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    return parse_spec(text, name=os.path.basename(path)), digest


def _emit(report: dict, human: str, args) -> None:
    if getattr(args, "json", False):
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(human)
    out = getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _check_report(spec: PDESpec, digest: str, mode: str) -> dict:
    axes = []
    for i in range(spec.ndim):
        bc = spec.bcs[i]
        axes.append({
            "axis": i + 1,
            "order": spec.delta[i],
            "admissible": bc is None or check_admissible(bc, mode),
        })
    ok, witness = check_consistent(spec)
    report = {
        "spec": spec.name,
        "digest": digest,
        "axes": axes,
        "consistent": ok,
    }
    if witness is not None:
        report["witness"] = {
            "axes": [witness.axis_i, witness.axis_j],
            "block": list(witness.block_i),
            "Ki_block": [[str(x) for x in row] for row in witness.Ki_block],
            "Kj_block": [[str(x) for x in row] for row in witness.Kj_block],
        }
    return report


def cmd_check(args) -> int:
    spec, digest = _read_spec(args.spec)
    report = _check_report(spec, digest, args.mode)
    lines = [f"spec {spec.name} (sha256 {digest})"]
    for ax in report["axes"]:
        verdict = "admissible" if ax["admissible"] else "INADMISSIBLE"
        lines.append(f"  axis {ax['axis']} (order {ax['order']}): {verdict}")
    lines.append(
        "  domains consistent" if report["consistent"]
        else f"  domains INCONSISTENT: non-commuting K blocks "
             f"{report['witness']['Ki_block']} vs "
             f"{report['witness']['Kj_block']} "
             f"(axes {report['witness']['axes']}, "
             f"block {report['witness']['block']})"
    )
    _emit(report, "\n".join(lines), args)
    bad = not report["consistent"] or any(
        not ax["admissible"] for ax in report["axes"]
    )
    return EXIT_NEGATIVE if bad else EXIT_OK


def _op_summary(op: NDPIOperator) -> dict:
    return {
        "shape": list(op.shape),
        "cells": len(op.cells),
        "max_degree": max(
            (e for mat in op.cells.values()
             for v, e in mat.max_degrees().items()), default=0
        ),
    }


def cmd_convert(args) -> int:
    spec, digest = _read_spec(args.spec)
    pie = build_pie(spec)
    report = {
        "spec": spec.name,
        "digest": digest,
        "T": op_to_doc(pie.T),
        "A": op_to_doc(pie.A),
        "summary": {"T": _op_summary(pie.T), "A": _op_summary(pie.A)},
    }
    human = "\n".join([
        f"spec {spec.name} (sha256 {digest})",
        "== T ==", pie.T.dump(),
        "== A ==", pie.A.dump(),
    ])
    _emit(report, human, args)
    return EXIT_OK


def _compiler(pie: PIESystem, args) -> StabilityCompiler:
    return StabilityCompiler(
        pie.T, pie.A, args.degree, args.epsilon, args.degree_prime,
        **_trim_flags(args),
    )


def _sdp_sizes(comp: StabilityCompiler) -> dict:
    return {
        "rows": comp.n_rows,
        "free": comp.n_p,
        "psd_blocks": [
            p.size for p in list(comp.r_pieces) + list(comp.q_pieces)
        ],
        "d": comp.d,
        "d_prime": comp.dprime,
    }


def cmd_stability(args) -> int:
    spec, digest = _read_spec(args.spec)
    pie = build_pie(spec)
    t0 = time.time()
    comp = _compiler(pie, args)
    t_compile = time.time() - t0
    t0 = time.time()
    sol = solve(comp.problem(args.k), **_solver_opts(args))
    t_solve = time.time() - t0
    report = {
        "spec": spec.name,
        "digest": digest,
        "k": args.k,
        "epsilon": args.epsilon,
        "sizes": _sdp_sizes(comp),
        "status": sol.status,
        "feasible": sol.status == "Feasible",
        "iterations": sol.iterations,
        "residuals": {
            "primal": sol.primal_residual,
            "dual": sol.dual_residual,
            "min_eigenvalue": sol.min_eigenvalue,
        },
        "timings": {"compile_s": t_compile, "solve_s": t_solve},
    }
    if sol.status == "Feasible":
        replay = replay_certificate(comp, args.k, sol, seed=args.seed)
        report["replay"] = {
            "equality_residual": replay.equality_residual,
            "min_block_eigenvalue": replay.min_block_eigenvalue,
            "coercivity_margin": replay.coercivity_margin,
            "decay_margin": replay.decay_margin,
            "ok": replay.ok(),
        }
        report["gain"] = replay.gain
    human = (
        f"spec {spec.name}: k={args.k} eps={args.epsilon} "
        f"d={comp.d} d'={comp.dprime}\n"
        f"  SDP: {comp.n_rows} rows, blocks "
        f"{report['sizes']['psd_blocks']} + {comp.n_p} free\n"
        f"  verdict: {sol.status} after {sol.iterations} iterations "
        f"({t_solve:.1f}s)"
    )
    if "gain" in report:
        human += (
            f"\n  certificate replayed "
            f"(|Ax-b| {report['replay']['equality_residual']:.2e}, "
            f"min eig {report['replay']['min_block_eigenvalue']:.2e}); "
            f"gain M = {report['gain']:.4g}"
        )
    _emit(report, human, args)
    if sol.status == "Feasible":
        return EXIT_OK
    return EXIT_NEGATIVE if sol.status == "Infeasible" else EXIT_ERROR


def cmd_bisect(args) -> int:
    spec, digest = _read_spec(args.spec)
    pie = build_pie(spec)
    t0 = time.time()
    comp = _compiler(pie, args)
    t_compile = time.time() - t0
    k_lo, k_hi = args.k_range
    t0 = time.time()
    result = bisect_rate(
        pie.T, pie.A, args.epsilon, args.degree, k_lo, k_hi, args.tol,
        compiler=comp, solver_opts=_solver_opts(args),
        verbose=bool(os.environ.get("PISTAB_VERBOSE")),
    )
    t_bisect = time.time() - t0
    report = {
        "spec": spec.name,
        "digest": digest,
        "epsilon": args.epsilon,
        "sizes": _sdp_sizes(comp),
        "k_max": result.k_max,
        "k_infeasible": result.k_infeasible,
        "solves": len(result.history),
        "history": [[k, s] for k, s in result.history],
        "saw_inaccurate": result.inaccurate,
        "timings": {"compile_s": t_compile, "bisect_s": t_bisect},
    }
    human = (
        f"spec {spec.name}: bisection on [{k_lo}, {k_hi}] tol {args.tol} "
        f"(d={comp.d}, d'={comp.dprime}, eps={args.epsilon})\n"
        f"  k_max = {result.k_max:.6g} "
        f"(first infeasible {result.k_infeasible:.6g}), "
        f"{len(result.history)} solves in {t_bisect:.1f}s"
    )
    _emit(report, human, args)
    return EXIT_OK if np.isfinite(result.k_max) else EXIT_NEGATIVE


def cmd_verify(args) -> int:
    spec, digest = _read_spec(args.spec)
    rng = np.random.default_rng(args.seed)
    pie = build_pie(spec)
    n, ndim = spec.n, spec.ndim
    failures = []

    def random_polyvec() -> MatPoly:
        rows = []
        for _ in range(n):
            p = Polynomial.zero()
            for _ in range(4):
                mono = []
                for ax in range(1, ndim + 1):
                    e = int(rng.integers(0, 3))
                    if e:
                        mono.append((svar(ax), e))
                p = p + Polynomial(
                    {tuple(mono): Fraction(int(rng.integers(-3, 4)))}
                )
            rows.append([p])
        return MatPoly(rows)

    for trial in range(args.trials):
        v = random_polyvec()
        u = apply_exact(pie.T, v)
        if diff_multi(u, spec.delta) != as_polyvec(v):
            failures.append(f"exact-inverse trial {trial}")
        if any(not mat.is_zero() for _, _, mat in bc_residual(spec, u)):
            failures.append(f"bc-residual trial {trial}")

    grid = QuadGrid.build(pie.T.box, 8)
    adj = adjoint_nd(pie.A)
    worst = 0.0
    for _ in range(args.trials):
        u = random_polyvec()
        v = random_polyvec()
        au = apply_quadrature(pie.A, polyvec_fn(u), grid)
        atv = apply_quadrature(adj, polyvec_fn(v), grid)
        uu = grid.sample(polyvec_fn(u))
        vv = grid.sample(polyvec_fn(v))
        lhs = grid.inner(au, vv)
        rhs = grid.inner(uu, atv)
        worst = max(worst, abs(lhs - rhs) / (1.0 + abs(lhs)))
    if worst > 1e-9:
        failures.append(f"adjoint identity discrepancy {worst:.2e}")

    report = {
        "spec": spec.name,
        "digest": digest,
        "trials": args.trials,
        "adjoint_discrepancy": worst,
        "failures": failures,
        "ok": not failures,
    }
    human = (
        f"spec {spec.name}: {args.trials} randomized trials\n"
        f"  exact inverse + boundary residual: "
        f"{'ok' if not any('trial' in f for f in failures) else 'FAILED'}\n"
        f"  adjoint identity: worst discrepancy {worst:.2e}"
    )
    if failures:
        human += "\n  FAILURES: " + "; ".join(failures)
    _emit(report, human, args)
    return EXIT_OK if not failures else EXIT_NEGATIVE


def cmd_export_sdp(args) -> int:
    spec, digest = _read_spec(args.spec)
    pie = build_pie(spec)
    comp = _compiler(pie, args)
    text = export_standard(comp.problem(args.k))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({comp.n_rows} rows, sha256 "
              f"{hashlib.sha256(text.encode()).hexdigest()[:16]})")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pistab",
        description="PDE-to-PIE conversion and SDP stability certification",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, *, solver=False):
        p.add_argument("spec", help="PDE spec file")
        p.add_argument("--json", action="store_true",
                       help="print the machine-readable report")
        p.add_argument("--out", help="also write the JSON report here")
        if solver:
            p.add_argument("--degree", type=int, default=1)
            p.add_argument("--degree-prime", type=int, default=None)
            p.add_argument("--epsilon", type=float, default=0.1)
            p.add_argument("--solver-tol", type=float, default=1e-8)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--trim-p-multiplier-only", action="store_true")
            p.add_argument("--trim-r-kernel-only", action="store_true")
            p.add_argument("--trim-q-drop-multiplier", action="store_true")
            p.add_argument("--trim-symmetric-kernels", action="store_true")
            p.add_argument("--no-weighted-gram", action="store_true",
                           help="restrict positivity to the single "
                                "unweighted Gram block")

    p = sub.add_parser("check", help="admissibility and consistency")
    add_common(p)
    p.add_argument("--mode", choices=("rational", "float"),
                   default="rational")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("convert", help="emit the PIE operators")
    add_common(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stability", help="test a fixed decay rate k")
    add_common(p, solver=True)
    p.add_argument("--k", type=float, default=0.0)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("bisect", help="bisect the maximal certified rate")
    add_common(p, solver=True)
    p.add_argument("--k-range", type=float, nargs=2, default=(0.0, 20.0),
                   metavar=("LO", "HI"))
    p.add_argument("--tol", type=float, default=1e-3)
    p.set_defaults(func=cmd_bisect)

    p = sub.add_parser("verify", help="randomized exact-identity suites")
    add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-sdp", help="write the interchange file")
    add_common(p, solver=True)
    p.add_argument("--k", type=float, default=0.0)
    p.set_defaults(func=cmd_export_sdp)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InconsistentSpec as exc:
        print(f"inconsistent domains: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    except (SpecParseError, DegreeError, NonMonotoneFeasibility,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
