"""
Command-line front end for ellreg

    ellreg integrate --tau C [--order i,j,k] [--trace] [--json] EXPR
    ellreg pv --tau C --var N --fix "2=a+bi,3=c+di" [--eps list] [--contour] [--json] EXPR
    ellreg check [--suite paper|kernel|properties|all] [--tau C] [--cases N] [--json]
    ellreg constants --tau C [--json]
    ellreg expand --tau C --var N --at M --order K [--fix ...] [--json] EXPR

Exit codes: 0 success, 1 usage or parse error, 2 numerical non-convergence,
3 check failure.
"""

import argparse
import json
import re
import sys
import time
from typing import Dict, List, Optional, Sequence, TextIO

import pandas as pd

import config
from elliptic_kernel import EllipticKernelError, ModularContext, half_periods, new_context
from expr import Expr, ExprError, evaluate, laurent_expand, parse, render_expr
from laurent import LaurentError
from logger import log_error, log_info
from check_suites import SUITES, CheckResult, run_suite
from pv_oracle import (
    NonConvergence,
    PvOptions,
    PvOracleError,
    compare,
    contour_contact_check,
    pv_single_step,
)
from regint_core import RegintError, RegularizedIntegrator, integration_step, validate_assignment

EXIT_HINTS = {
    config.EXIT_OK: "ok",
    config.EXIT_USAGE: "usage",
    config.EXIT_NONCONVERGENCE: "nonconvergence",
    config.EXIT_CHECK_FAILED: "check_failed",
}

_COMPLEX_RE = re.compile(
    r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"([+-](?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)i\s*$"
)


class UsageError(Exception):
    """Bad flags or flag values"""
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_complex(text: str) -> complex:
    """
    Parse "a+bi" (sign of the imaginary part mandatory)

    Examples:
        "0+2i" -> 2j, "-0.5+0.866i", "1e-3-2i"
    """
    match = _COMPLEX_RE.match(text)
    if not match:
        raise UsageError(f"Expected a complex number like 0+1i, got '{text}'")
    return complex(float(match.group(1)), float(match.group(2)))


def parse_order(text: str) -> List[int]:
    try:
        order = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"--order expects comma-separated point indices, got '{text}'")
    if len(set(order)) != len(order):
        raise UsageError(f"--order repeats a point: {text}")
    return order


def parse_fix(text: Optional[str]) -> Dict[int, complex]:
    """'2=a+bi,3=c+di' -> {2: a+bi, 3: c+di}"""
    fixed: Dict[int, complex] = {}
    if not text:
        return fixed
    for item in text.split(","):
        if "=" not in item:
            raise UsageError(f"--fix entries look like 2=0.1+0.2i, got '{item}'")
        key, value = item.split("=", 1)
        try:
            point = int(key.strip())
        except ValueError:
            raise UsageError(f"Bad point index in --fix: '{key}'")
        fixed[point] = parse_complex(value)
    return fixed


def parse_eps(text: Optional[str]) -> Optional[tuple]:
    if not text:
        return None
    try:
        return tuple(float(part) for part in text.split(","))
    except ValueError:
        raise UsageError(f"--eps expects comma-separated radii, got '{text}'")


def pair(z: complex) -> List[float]:
    z = complex(z)
    return [z.real, z.imag]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ellreg", description="Regularized integrals on elliptic curves")
    commands = parser.add_subparsers(dest="command")
    commands.required = True

    integrate = commands.add_parser("integrate", help="Iterated regularized integral")
    integrate.add_argument("--tau", required=True)
    integrate.add_argument("--order", help="Integration order, e.g. 1,2,3")
    integrate.add_argument("--anchor", default="lowest", help="lowest, highest or a preferred point index")
    integrate.add_argument("--trace", action="store_true")
    integrate.add_argument("--json", action="store_true")
    integrate.add_argument("expr")

    pv = commands.add_parser("pv", help="Principal value oracle for one step")
    pv.add_argument("--tau", required=True)
    pv.add_argument("--var", type=int, required=True)
    pv.add_argument("--fix", default="")
    pv.add_argument("--eps", help="Comma-separated excision radii")
    pv.add_argument("--extrapolation", choices=["linear", "eps_log_eps"])
    pv.add_argument("--contour", action="store_true", help="Also run the contour formula")
    pv.add_argument("--json", action="store_true")
    pv.add_argument("expr")

    check = commands.add_parser("check", help="Run a named check suite")
    check.add_argument("--suite", default="paper", choices=list(SUITES))
    check.add_argument("--tau", help="Restrict to one tau")
    check.add_argument("--cases", type=int, default=config.PROPERTY_CASES)
    check.add_argument("--json", action="store_true")

    constants = commands.add_parser("constants", help="Modular constants at tau")
    constants.add_argument("--tau", required=True)
    constants.add_argument("--json", action="store_true")

    expand = commands.add_parser("expand", help="Laurent expansion of an integrand")
    expand.add_argument("--tau", required=True)
    expand.add_argument("--var", type=int, required=True)
    expand.add_argument("--at", type=int, required=True)
    expand.add_argument("--order", type=int, required=True)
    expand.add_argument("--fix", default="")
    expand.add_argument("--json", action="store_true")
    expand.add_argument("expr")

    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _anchor_policy(text: str):
    if text in ("lowest", "highest"):
        return text
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"--anchor expects lowest, highest or a point index, got '{text}'")


def cmd_integrate(args, report: dict, ctx: ModularContext) -> int:
    F = parse(args.expr)
    report["expr"] = render_expr(F)
    order = parse_order(args.order) if args.order else sorted(F.points)
    if sorted(order) != sorted(set(order) | F.points):
        raise UsageError(f"--order must be a permutation of the points {sorted(F.points)}")

    integrator = RegularizedIntegrator(ctx, _anchor_policy(args.anchor))
    value, steps = integrator.integrate_all(F, order)
    report["value"] = pair(value)
    if args.trace:
        report["steps"] = [
            {
                "var": step.var,
                "anchor": step.anchor,
                "result": render_expr(step.result),
                "residues": [{"at": q, "residue": render_expr(r)} for q, r in step.residues],
            }
            for step in steps
        ]
    return config.EXIT_OK


def cmd_pv(args, report: dict, ctx: ModularContext) -> int:
    F = parse(args.expr)
    report["expr"] = render_expr(F)
    fixed = parse_fix(args.fix)
    missing = F.points - set(fixed) - {args.var}
    if missing:
        raise UsageError(f"--fix must assign every point except z{args.var}; missing {sorted(missing)}")

    opts = PvOptions.from_config(eps_list=parse_eps(args.eps), extrapolation=args.extrapolation)
    engine_expr = integration_step(F, args.var, jet_cap=ctx.jet_cap).result
    engine = complex(evaluate(engine_expr, ctx, fixed))
    oracle = pv_single_step(F, args.var, fixed, ctx, opts)

    report["value"] = pair(engine)
    report["oracle"] = {
        "value": pair(oracle.value),
        "per_eps": [pair(v) for v in oracle.per_eps_values],
        "error": oracle.extrapolated_error,
    }
    verdict = compare(engine, oracle, opts.tolerance)
    checks = [CheckResult("pv_vs_engine", verdict.passed, oracle.value, engine, verdict.deviation, verdict.reason)]
    if args.contour:
        contour = contour_contact_check(F, args.var, fixed, ctx)
        contour_verdict = compare(engine, contour, 1e-6)
        checks.append(CheckResult("contour_vs_engine", contour_verdict.passed, contour, engine,
                                  contour_verdict.deviation, contour_verdict.reason))
    report["checks"] = [check_to_dict(c) for c in checks]

    if not oracle.converged:
        return config.EXIT_NONCONVERGENCE
    return config.EXIT_OK if all(c.passed for c in checks) else config.EXIT_CHECK_FAILED


def cmd_check(args, report: dict) -> int:
    taus = [parse_complex(args.tau)] if args.tau else None
    results = run_suite(args.suite, taus, args.cases)
    report["checks"] = [check_to_dict(r) for r in results]
    return config.EXIT_OK if all(r.passed for r in results) else config.EXIT_CHECK_FAILED


def cmd_constants(args, report: dict, ctx: ModularContext) -> int:
    values = {name: ctx.constants[name] for name in ("E2", "E4", "E6", "G4", "G6", "g2", "g3", "eta1", "eta1h")}
    for name, value in zip(("e1", "e2", "e3"), half_periods(ctx)):
        values[name] = value
    report["constants"] = {name: pair(v) for name, v in values.items()}
    return config.EXIT_OK


def cmd_expand(args, report: dict, ctx: ModularContext) -> int:
    F = parse(args.expr)
    report["expr"] = render_expr(F)
    if args.order > ctx.jet_cap:
        raise UsageError(f"--order {args.order} exceeds the jet cap {ctx.jet_cap} (ELLREG_JET_CAP)")
    series = laurent_expand(F, args.var, args.at, args.order, ctx.jet_cap)
    fixed = parse_fix(args.fix)
    validate_assignment(ctx, fixed)

    terms = []
    values = {}
    for k, coeff in series.terms():
        entry = {"exponent": k, "coeff": render_expr(coeff)}
        if fixed or coeff.is_constant:
            entry["value"] = pair(evaluate(coeff, ctx, fixed))
            values[entry["coeff"]] = _format_complex(entry["value"])
        terms.append(entry)

    def render(coeff: Expr) -> str:
        text = render_expr(coeff)
        return f"{text} [= {values[text]}]" if text in values else text

    report["series"] = {"terms": terms, "trunc": series.trunc_order, "lines": series.format_lines(render)}
    return config.EXIT_OK


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def check_to_dict(result: CheckResult) -> dict:
    return {
        "name": result.name,
        "pass": bool(result.passed),
        "got": pair(result.got),
        "want": pair(result.want),
        "rel_err": float(result.rel_err),
    }


def _format_complex(values: List[float]) -> str:
    return f"{complex(*values):.15g}"


def format_text(report: dict) -> str:
    """Human-readable rendering of a report"""
    lines = [f"command: {report['command']}"]
    if report.get("tau") is not None:
        lines.append(f"tau: {_format_complex(report['tau'])}")
    if report.get("expr"):
        lines.append(f"expr: {report['expr']}")
    for step in report.get("steps") or []:
        lines.append(f"after z{step['var']} (anchor z{step['anchor']}): {step['result']}")
        for residue in step.get("residues", []):
            lines.append(f"    res at z{residue['at']}: {residue['residue']}")
    if report.get("value") is not None:
        lines.append(f"value: {_format_complex(report['value'])}")
    if report.get("oracle"):
        oracle = report["oracle"]
        lines.append(f"oracle: {_format_complex(oracle['value'])} (error {oracle['error']:.3g})")
        for v in oracle["per_eps"]:
            lines.append(f"    {_format_complex(v)}")
    if report.get("constants"):
        frame = pd.DataFrame(
            [(name, _format_complex(v)) for name, v in report["constants"].items()],
            columns=["constant", "value"],
        )
        lines.append(frame.to_string(index=False))
    if report.get("series"):
        lines.extend(report["series"]["lines"])
    if report.get("checks"):
        frame = pd.DataFrame([
            {
                "check": c["name"],
                "pass": "PASS" if c["pass"] else "FAIL",
                "got": _format_complex(c["got"]),
                "want": _format_complex(c["want"]),
                "rel_err": f"{c['rel_err']:.2e}",
            }
            for c in report["checks"]
        ])
        lines.append(frame.to_string(index=False))
        passed = sum(c["pass"] for c in report["checks"])
        lines.append(f"{passed}/{len(report['checks'])} checks passed")
    if report.get("error"):
        lines.append(f"error: {report['error']['type']}: {report['error']['message']}")
    return "\n".join(lines)


def _new_report(command: Optional[str]) -> dict:
    return {
        "command": command,
        "tau": None,
        "expr": None,
        "value": None,
        "steps": [],
        "oracle": None,
        "checks": [],
        "exit_hint": None,
    }


def run(argv: Sequence[str], out: Optional[TextIO] = None) -> int:
    """
    Execute one ellreg command and write its report

    Args:
        argv: Arguments without the program name
        out: Output stream (stdout by default)

    Returns:
        Exit code
    """
    out = out or sys.stdout
    start = time.time()
    report = _new_report(argv[0] if argv else None)
    as_json = "--json" in argv

    try:
        args = build_parser().parse_args(list(argv))
        report["command"] = args.command
        ctx = None
        if getattr(args, "tau", None):
            tau = parse_complex(args.tau)
            report["tau"] = pair(tau)
            if args.command != "check":
                ctx = new_context(tau)

        if args.command == "integrate":
            code = cmd_integrate(args, report, ctx)
        elif args.command == "pv":
            code = cmd_pv(args, report, ctx)
        elif args.command == "check":
            code = cmd_check(args, report)
        elif args.command == "constants":
            code = cmd_constants(args, report, ctx)
        else:
            code = cmd_expand(args, report, ctx)
    except NonConvergence as e:
        log_error(f"Non-convergence: {e}", exc_info=True)
        report["error"] = {"type": type(e).__name__, "message": str(e)}
        code = config.EXIT_NONCONVERGENCE
    except (UsageError, ExprError, EllipticKernelError, LaurentError, RegintError, PvOracleError,
            ValueError) as e:
        log_error(f"{type(e).__name__}: {e}", exc_info=True)
        report["error"] = {"type": type(e).__name__, "message": str(e)}
        code = config.EXIT_USAGE
    except Exception as e:
        log_error(f"Unexpected error: {e}", exc_info=True)
        report["error"] = {"type": type(e).__name__, "message": str(e)}
        code = config.EXIT_USAGE

    report["exit_hint"] = EXIT_HINTS[code]
    report["timing_ms"] = round((time.time() - start) * 1000.0, 3)
    log_info(f"ellreg {report['command']}: exit {code} in {report['timing_ms']} ms")

    if as_json:
        out.write(json.dumps(report, indent=2) + "\n")
    else:
        out.write(format_text(report) + "\n")
    return code
