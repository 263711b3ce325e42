"""Command-line front end: ``dualgain <command> scenario.json``.

Exit codes: 0 success, 2 invalid scenario or arguments, 3 numerical failure,
4 a ``compare`` check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .brownian import rho_eval_brownian, solve_brownian, v_eval_brownian
from .inversion import ruin_probability, ruin_time_transform
from .lattice import mu_eval, rho_eval, solve_lattice, v_eval
from .mc import simulate_brownian_lattice, simulate_lattice, simulate_ruin
from .model import NumericalError
from .scenario import Scenario, ScenarioError, load
from .transforms import RuinTransform, generalized_ruin_lt, ruin_lt

log = logging.getLogger("dualgain")

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_COMPARE = 0, 2, 3, 4


@dataclass
class Table:
    columns: tuple
    rows: list = field(default_factory=list)
    failed: int = 0


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render_csv(table: Table, scn: Scenario, command: str) -> str:
    buf = io.StringIO()
    buf.write(f"# dualgain {__version__}\n")
    buf.write(f"# command: {command}\n")
    if scn.name:
        buf.write(f"# scenario: {scn.name}\n")
    buf.write(f"# scenario_sha256: {scn.sha256}\n")
    buf.write(f"# seed: {scn.seed}\n")
    buf.write(f"# paths: {scn.mc.paths}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# tables


def _levels_curve(levels: np.ndarray, scn: Scenario) -> np.ndarray:
    b, low = float(levels[0]), float(levels[-1])
    return scn.x_grid({"start": low + (b - low) / 100, "stop": b, "num": 100})


def ruin_lt_table(scn: Scenario) -> Table:
    params = scn.require("model")
    rt = RuinTransform.build(params, scn.series)
    s = scn.s_grid()
    lt = generalized_ruin_lt if params.mixture_p < 1 else ruin_lt
    vals = np.atleast_1d(lt(s, rt))
    return Table(("s_re", "s_im", "rho_re", "rho_im"),
                 [(si.real, si.imag, v.real, v.imag) for si, v in zip(s, vals)])


def ruin_prob_table(scn: Scenario) -> Table:
    rt = RuinTransform.build(scn.require("model"), scn.series)
    xs = scn.x_grid()
    res = ruin_probability(xs, rt, scn.inversion, detail=True)
    return Table(("x", "R", "error_estimate", "cross_value", "disagreement", "clamped"),
                 [(x, r.value, r.error_estimate, r.cross_value, r.disagreement, r.clamped) for x, r in zip(xs, res)])


def ruin_time_table(scn: Scenario) -> Table:
    rt = RuinTransform.build(scn.require("model"), scn.series)
    xs, alpha = scn.x_grid(), scn.alpha
    res = ruin_time_transform(xs, alpha, rt, scn.inversion, detail=True)
    return Table(("x", "alpha", "value", "error_estimate", "cross_value", "disagreement", "clamped"),
                 [(x, alpha, r.value, r.error_estimate, r.cross_value, r.disagreement, r.clamped)
                  for x, r in zip(xs, res)])


LONG = ("quantity", "index", "x", "value")


def exit_table(scn: Scenario) -> Table:
    lp = scn.require("lattice")
    sol = solve_lattice(lp)
    rows = [("rho_n", n, lp.level(n), sol.rho[n]) for n in range(1, lp.N + 1)]
    rows += [("mu_n", n, lp.level(n), sol.mu[n]) for n in range(lp.N + 1)]
    xs = _levels_curve(lp.levels, scn)
    rows += [("rho", None, x, v) for x, v in zip(xs, rho_eval(xs, sol))]
    rows += [("mu", None, x, v) for x, v in zip(xs, mu_eval(xs, sol))]
    return Table(LONG, rows)


def dividends_table(scn: Scenario) -> Table:
    lp = scn.require("lattice")
    sol = solve_lattice(lp)
    rows = [("v_n", n, lp.level(n), sol.v[n]) for n in range(lp.N + 1)]
    xs = _levels_curve(lp.levels, scn)
    rows += [("v", None, x, v) for x, v in zip(xs, v_eval(xs, sol))]
    return Table(LONG, rows)


def brownian_table(scn: Scenario) -> Table:
    bp = scn.require("brownian")
    sol = solve_brownian(bp, scn.brownian_control)
    lv = bp.levels
    rows = [("rho_n", n, lv[n], sol.rho[n]) for n in range(bp.N + 1)]
    rows += [("v_n", n, lv[n], sol.v[n]) for n in range(bp.N + 1)]
    xs = _levels_curve(lv, scn)
    rows += [("rho", None, x, rho_eval_brownian(float(x), sol)) for x in xs if x <= bp.b]
    rows += [("v", None, x, v_eval_brownian(float(x), sol)) for x in xs]
    return Table(LONG, rows)


def simulate_table(scn: Scenario) -> Table:
    targets = scn.outputs.get("simulate")
    if targets is None:
        targets = [t for t, sec in (("ruin", "model"), ("lattice", "lattice"), ("brownian", "brownian"))
                   if getattr(scn, sec) is not None]
    xs = scn.x_grid()
    rows = []
    for target in targets:
        for x in map(float, xs):
            log.info("simulating %s at x=%g with %d paths", target, x, scn.mc.paths)
            if target == "ruin":
                ests = [("R", simulate_ruin(scn.require("model"), x, 0.0, scn.mc))]
            elif target == "ruin_time":
                ests = [(f"E[exp(-{scn.alpha:g} tau)]", simulate_ruin(scn.require("model"), x, scn.alpha, scn.mc))]
            elif target == "lattice":
                ests = list(zip(("rho", "mu", "v"), simulate_lattice(scn.require("lattice"), x, scn.mc)))
            else:
                ests = list(zip(("rho", "v"), simulate_brownian_lattice(scn.require("brownian"), x, scn.mc)))
            rows += [(target, q, x, e.mean, e.stderr, e.n_paths, e.n_censored, e.censor_bound) for q, e in ests]
    return Table(("target", "quantity", "x", "mean", "stderr", "n_paths", "n_censored", "censor_bound"), rows)


def compare_table(scn: Scenario) -> Table:
    from .checks import COLUMNS, run_checks

    rows = run_checks(scn)
    for r in rows:
        level = logging.INFO if r.passed else logging.WARNING
        log.log(level, "%s %s x=%s error=%.3g tol=%.3g (%s) %s", r.check, r.quantity, r.x, r.error, r.tolerance,
                r.unit, "PASS" if r.passed else "FAIL")
    return Table(COLUMNS, [r.as_tuple() for r in rows], failed=sum(not r.passed for r in rows))


COMMANDS = {
    "ruin-lt": (ruin_lt_table, "Laplace transform rho(s) over the s-grid"),
    "ruin-prob": (ruin_prob_table, "ruin probability R(x) over the x-grid"),
    "ruin-time": (ruin_time_table, "E[exp(-alpha tau_x)] over the x-grid"),
    "exit": (exit_table, "lattice exit transforms rho_n, mu_n and curves"),
    "dividends": (dividends_table, "lattice dividend values v_n and the v(x) curve"),
    "brownian": (brownian_table, "jump-diffusion rho and v on the level lattice"),
    "simulate": (simulate_table, "Monte Carlo estimates"),
    "compare": (compare_table, "analytic versus reference checks; exit 4 on any failure"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualgain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dualgain {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("scenario", type=Path, help="JSON scenario file")
        p.add_argument("--out", type=Path, help="write CSV here instead of stdout")
        p.add_argument("--paths", type=int, help="override mc.paths")
        p.add_argument("-v", "--verbose", action="count", default=0, help="log progress to stderr")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        scn = load(args.scenario).with_paths(args.paths)
        table = COMMANDS[args.command][0](scn)
    except (ScenarioError, ValueError, OSError) as exc:
        print(f"dualgain: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"dualgain: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = render_csv(table, scn, args.command)
    if args.out:
        args.out.write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)
    if table.failed:
        print(f"dualgain: {table.failed} comparison(s) failed", file=sys.stderr)
        return EXIT_COMPARE
    return EXIT_OK


__all__ = ["main", "build_parser", "render_csv", "Table", "COMMANDS", "simulate_table"]
