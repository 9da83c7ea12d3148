"""Command-line front end.

    stiffstep solve --problem robertson --solver tsfo-implicit --dt 1e-2
    stiffstep converge --problem linear --dt0 1 --levels 10 --format md
    stiffstep scan-stability --nc 5000 --ny 25000 --out scan.csv

Exit codes: 0 success, 1 bad configuration, 2 a run failed (Newton
divergence or overflow). Output already computed is flushed before exit 2.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from stiffstep.errors import StiffStepError
from stiffstep.harness import SOLVERS, convergence_study, format_table, reference_solution, run_fixed, effective_dt
from stiffstep.linalg import Precision, get_precision
from stiffstep.order_conditions import A_STABLE_C_RANGE, DEFAULT_C, SchemeParams
from stiffstep.problems import PROBLEMS, get_problem
from stiffstep.stability import SCAN_TOL, STRICT_TOL, scan_a_stability
from stiffstep.tsfo import NewtonConfig

log = logging.getLogger("stiffstep")

CACHE_ENV = "STIFFSTEP_CACHE_DIR"
DEFAULT_CACHE = Path.home() / ".cache" / "stiffstep"
DEFAULT_DT = {"linear": 1.0, "robertson": 1e-2, "ozone": 0.5, "vdp": 1e-2}


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    problem: str = "linear"
    solver: str = "tsfo-implicit"
    t_end: Optional[float] = None
    dt0: Optional[float] = None
    levels: int = 5
    c_param: float = DEFAULT_C
    allow_unstable_c: bool = False
    newton_atol: float = 1e-14
    newton_rtol: float = 1e-14
    newton_maxit: int = 50
    ref_mode: str = "auto"
    out_path: Optional[str] = None
    format: str = "csv"
    cache_dir: Optional[str] = None
    precision: str = "double"

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(f"--problem: unknown problem {self.problem!r} (choose from {', '.join(PROBLEMS)})")
        if self.solver not in SOLVERS:
            raise ConfigError(f"--solver: unknown solver {self.solver!r} (choose from {', '.join(SOLVERS)})")
        if self.t_end is not None and not self.t_end > 0:
            raise ConfigError("--tend must be positive")
        if self.dt0 is not None and not self.dt0 > 0:
            raise ConfigError("--dt0/--dt must be positive")
        if self.levels < 1:
            raise ConfigError("--levels must be at least 1")
        lo, hi = A_STABLE_C_RANGE
        if not self.allow_unstable_c and not lo <= self.c_param <= hi:
            raise ConfigError(f"--c-param {self.c_param} lies outside [{lo}, {hi}]; pass --allow-unstable-c to use it")
        if not self.newton_atol > 0 or not self.newton_rtol >= 0:
            raise ConfigError("--newton-atol must be positive and --newton-rtol non-negative")
        if self.newton_maxit < 1:
            raise ConfigError("--newton-maxit must be at least 1")
        if not (self.ref_mode in ("auto", "exact", "rk4-refined") or self.ref_mode.startswith("file:")):
            raise ConfigError(f"--ref-mode: expected exact, rk4-refined or file:<path>, got {self.ref_mode!r}")
        if self.format not in ("csv", "md"):
            raise ConfigError("--format must be csv or md")
        try:
            get_precision(self.precision)
        except ValueError as exc:
            raise ConfigError(f"--precision: {exc}") from None

    @property
    def params(self) -> SchemeParams:
        if self.allow_unstable_c:
            return SchemeParams.general(self.c_param, -self.c_param)
        return SchemeParams.a_stable(self.c_param)

    @property
    def newton(self) -> NewtonConfig:
        return NewtonConfig(self.newton_atol, self.newton_rtol, self.newton_maxit)

    @property
    def resolved_cache_dir(self) -> Path:
        env = os.environ.get(CACHE_ENV)
        if env:
            return Path(env)
        return Path(self.cache_dir) if self.cache_dir else DEFAULT_CACHE


@contextlib.contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _fmt17(p: Precision, v) -> str:
    if p.is_mp:
        import mpmath

        return mpmath.nstr(v, 17, min_fixed=1, max_fixed=0, strip_zeros=False)
    if p.dtype is np.float64:
        return f"{float(v):.16e}"
    return np.format_float_scientific(v, precision=16, unique=False)


def cmd_solve(cfg: RunConfig) -> int:
    problem = get_problem(cfg.problem, cfg.precision)
    t_end = cfg.t_end or problem.default_t_end
    dt, n = effective_dt(t_end, cfg.dt0 or DEFAULT_DT[cfg.problem])
    p = problem.precision
    header = ["t"] + [f"u{i + 1}" for i in range(problem.system.dim)]
    with _output(cfg.out_path) as out:
        out.write(",".join(header) + "\n")

        def emit(i, u):
            out.write(",".join([f"{i * dt:.16e}"] + [_fmt17(p, v) for v in u]) + "\n")

        emit(0, problem.u0)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                run_fixed(problem, cfg.solver, t_end, n, cfg.params, cfg.newton, on_step=emit)
        except StiffStepError as exc:
            out.flush()
            print(f"solve failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            return 2
    return 0


def cmd_converge(cfg: RunConfig) -> int:
    problem = get_problem(cfg.problem, cfg.precision)
    t_end = cfg.t_end or problem.default_t_end
    ref = reference_solution(problem, t_end, cfg.resolved_cache_dir, mode=cfg.ref_mode)
    rows = convergence_study(problem, cfg.solver, t_end, cfg.dt0 or DEFAULT_DT[cfg.problem], cfg.levels,
                             cfg.params, cfg.newton, reference=ref)
    with _output(cfg.out_path) as out:
        out.write(format_table(rows, cfg.format))
    failed = [r for r in rows if r.failed]
    for r in failed:
        print(f"row dt={r.dt:.7E} failed: {r.failure}", file=sys.stderr)
    return 2 if failed else 0


def cmd_scan_stability(args) -> int:
    if not args.nc >= 2 or not args.ny >= 2:
        raise ConfigError("--nc and --ny must be at least 2")
    if args.cmin > args.cmax:
        raise ConfigError("--cmin must not exceed --cmax")
    if not 0 < args.ymin < args.ymax:
        raise ConfigError("--ymin and --ymax must satisfy 0 < ymin < ymax")
    if not args.tol > 0:
        raise ConfigError("--tol must be positive")
    res = scan_a_stability(args.cmin, args.cmax, args.nc, args.ymin, args.ymax, args.ny, args.tol, args.workers)
    with _output(args.out) as out:
        out.write("c,max_abs_g,valid\n")
        for c, g, v in zip(res.c_values, res.max_abs_g, res.valid_mask):
            out.write(f"{c:.10g},{g:.17g},{int(bool(v))}\n")
    info = sys.stdout if args.out not in (None, "-") else sys.stderr
    if res.valid_interval is None:
        print("warning: no valid C on this grid", file=info)
    else:
        lo, hi = res.valid_interval
        print(f"valid C interval (tol {args.tol:g}): [{lo:.6f}, {hi:.6f}]", file=info)
        strict = res.interval_at(STRICT_TOL)
        if strict is not None and args.tol != STRICT_TOL:
            print(f"valid C interval (tol {STRICT_TOL:g}): [{strict[0]:.7f}, {strict[1]:.7f}]", file=info)
        inside = lo <= DEFAULT_C <= hi
        print(f"default C={DEFAULT_C} {'inside' if inside else 'outside'} the interval", file=info)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="stiffstep", description="Two-stage fourth-order implicit integrator experiments")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def run_flags(sp):
        sp.add_argument("--problem", default="linear")
        sp.add_argument("--solver", default="tsfo-implicit")
        sp.add_argument("--tend", type=float, default=None)
        sp.add_argument("--dt0", "--dt", dest="dt0", type=float, default=None)
        sp.add_argument("--c-param", type=float, default=DEFAULT_C)
        sp.add_argument("--allow-unstable-c", action="store_true")
        sp.add_argument("--newton-atol", type=float, default=1e-14)
        sp.add_argument("--newton-rtol", type=float, default=1e-14)
        sp.add_argument("--newton-maxit", type=int, default=50)
        sp.add_argument("--precision", default="double")
        sp.add_argument("--out", default=None)

    s = sub.add_parser("solve", help="single fixed-step run, trajectory CSV")
    run_flags(s)

    c = sub.add_parser("converge", help="convergence table over dt halvings")
    run_flags(c)
    c.add_argument("--levels", type=int, default=5)
    c.add_argument("--ref-mode", default="auto")
    c.add_argument("--format", default="csv")
    c.add_argument("--cache-dir", default=None)

    sc = sub.add_parser("scan-stability", help="A-stability scan over C (D = -C)")
    sc.add_argument("--cmin", type=float, default=0.0)
    sc.add_argument("--cmax", type=float, default=0.1)
    sc.add_argument("--nc", type=int, default=5000)
    sc.add_argument("--ymin", type=float, default=1e-8)
    sc.add_argument("--ymax", type=float, default=1e4)
    sc.add_argument("--ny", type=int, default=25000)
    sc.add_argument("--tol", type=float, default=SCAN_TOL)
    sc.add_argument("--workers", type=int, default=1)
    sc.add_argument("--out", default=None)
    return ap


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(
        command=args.command,
        problem=args.problem,
        solver=args.solver,
        t_end=args.tend,
        dt0=args.dt0,
        levels=getattr(args, "levels", 1),
        c_param=args.c_param,
        allow_unstable_c=args.allow_unstable_c,
        newton_atol=args.newton_atol,
        newton_rtol=args.newton_rtol,
        newton_maxit=args.newton_maxit,
        ref_mode=getattr(args, "ref_mode", "auto"),
        out_path=args.out,
        format=getattr(args, "format", "csv"),
        cache_dir=getattr(args, "cache_dir", None),
        precision=args.precision,
    )
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "scan-stability":
            return cmd_scan_stability(args)
        cfg = config_from_args(args)
        return cmd_solve(cfg) if cfg.command == "solve" else cmd_converge(cfg)
    except ConfigError as exc:
        print(f"stiffstep: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"stiffstep: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
