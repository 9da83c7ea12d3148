"""Fixed-step convergence studies against exact or reference solutions.

A study runs one solver at ``dt0, dt0/2, ...`` (each snapped to an integer
step count by :func:`effective_dt`), measures terminal errors in the L2 and
max norms and chains observed orders between consecutive rows. Reference
solutions without a closed form come from a compensated RK4 run at
``dt = 1e-6`` and are cached on disk as small checksummed text records.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from stiffstep.baselines import integrate_fixed, rk4_compensated, step_irk4_gauss, step_rk4_explicit
from stiffstep.errors import CacheCorrupt, DomainError, StiffStepError
from stiffstep.kernels import run_rk4_reference
from stiffstep.linalg import Precision, get_precision, norm_l2, norm_linf
from stiffstep.order_conditions import SchemeParams
from stiffstep.problems import BenchmarkProblem
from stiffstep.tsfo import NewtonConfig, step_explicit_tsfo, step_implicit_tsfo

log = logging.getLogger(__name__)

DEFAULT_DT_REF = 1e-6
ORDER_SENTINEL = "***"
PROVENANCES = ("exact", "rk4_refined", "file")


@dataclass
class ConvergenceRow:
    dt: float
    n_steps: int
    error_l2: float
    error_linf: float
    order_l2: Optional[float] = None
    order_linf: Optional[float] = None
    avg_newton_iters: float = 0.0
    failure: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.failure is not None


@dataclass
class ReferenceSolution:
    problem_name: str
    t_end: float
    values: np.ndarray
    provenance: str
    dt_ref: Optional[float] = None
    n_steps: Optional[int] = None
    precision_tag: str = "double"

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance == "rk4_refined" and self.dt_ref is None:
            raise ValueError("an RK4 reference must record dt_ref")


def effective_dt(t_end: float, dt_requested: float) -> tuple[float, int]:
    """Snap a requested step to ``t_end / n`` with ``n = floor(t_end / dt)``, at least 1.

    Truncation never shrinks the step below the request, so 321.8122 with
    dt = 0.5 gives 643 steps of 0.50048554. A relative slack of 1e-9 keeps
    quotients like 10 / 0.1 = 99.99999999999999 from losing a step.
    """
    if not t_end > 0 or not dt_requested > 0:
        raise ValueError("t_end and dt must be positive")
    n = max(1, int(math.floor(t_end / dt_requested * (1 + 1e-9))))
    return t_end / n, n


def terminal_error(u_num, u_ref) -> tuple[float, float]:
    u_num, u_ref = np.asarray(u_num), np.asarray(u_ref)
    if u_num.shape != u_ref.shape:
        raise ValueError(f"shape mismatch {u_num.shape} vs {u_ref.shape}")
    d = u_num - u_ref
    return float(norm_l2(d)), float(norm_linf(d))


def convergence_order(err_coarse: float, err_fine: float, dt_ratio: float = 2.0) -> Optional[float]:
    """``ln(e_coarse / e_fine) / ln(ratio)``; None if either error is 0 or non-finite."""
    if not dt_ratio > 1:
        raise ValueError("dt_ratio must exceed 1")
    if not (math.isfinite(err_coarse) and math.isfinite(err_fine)):
        return None
    if err_coarse == 0 or err_fine == 0:
        return None
    q = err_coarse / err_fine
    if q <= 0:
        return None
    return math.log(q) / math.log(dt_ratio)


# reference cache -----------------------------------------------------------

def _cache_name(problem: str, t_end: float, dt_ref: float, tag: str) -> str:
    suffix = "" if tag == "double" else f"_{tag}"
    return f"{problem}_{t_end!r}_{dt_ref!r}{suffix}.ref"


def _digest(body: str) -> str:
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def _render(ref: ReferenceSolution, p: Precision) -> str:
    lines = [
        "# stiffstep reference solution, one component per line",
        f"# problem={ref.problem_name}",
        f"# t_end={ref.t_end!r}",
        f"# dt_ref={ref.dt_ref!r}",
        f"# n_steps={ref.n_steps}",
        f"# precision={p.tag}",
        f"# provenance={ref.provenance}",
    ]
    lines += [p.format(v) for v in ref.values]
    body = "\n".join(lines) + "\n"
    return body + f"# sha256={_digest(body)}\n"


def save_reference(ref: ReferenceSolution, path: Path, p: Precision) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(_render(ref, p))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_reference(path: Path, p: Precision | None = None) -> ReferenceSolution:
    """Read a cached record; raises CacheCorrupt if the checksum does not match.

    Plain files without a header (whitespace-separated numbers) are accepted
    too, with provenance ``file``.
    """
    text = Path(path).read_text(encoding="utf-8")
    if not text.startswith("# stiffstep reference"):
        p = p or get_precision("double")
        return ReferenceSolution(Path(path).stem, math.nan, p.array(text.split()), "file")
    body, sep, tail = text.rpartition("# sha256=")
    if not sep or tail.strip() != _digest(body):
        raise CacheCorrupt(f"checksum mismatch in {path}")
    meta, values = {}, []
    for line in body.splitlines():
        if line.startswith("# ") and "=" in line:
            k, v = line[2:].split("=", 1)
            meta[k] = v
        elif line and not line.startswith("#"):
            values.append(line)
    p = p or get_precision(meta.get("precision", "double"))
    dt_ref = None if meta.get("dt_ref") in (None, "None") else float(meta["dt_ref"])
    n = None if meta.get("n_steps") in (None, "None") else int(meta["n_steps"])
    return ReferenceSolution(
        meta.get("problem", ""), float(meta.get("t_end", "nan")), p.array(values),
        meta.get("provenance", "file"), dt_ref, n, p.tag,
    )


def _rk4_reference(problem: BenchmarkProblem, t_end: float, dt_ref: float):
    dt, n = effective_dt(t_end, dt_ref)
    sys = problem.system
    t0 = time.perf_counter()
    if problem.fast_rhs is not None:
        u, bad = run_rk4_reference(problem.fast_rhs, problem.u0, dt, n)
        if bad >= 0:
            raise DomainError("reference RK4 run overflowed", step_index=int(bad))
    else:
        p = sys.precision
        u = rk4_compensated(sys, problem.u0, p.scalar(t_end) / n, n)
    log.info("reference %s t=%g: %d RK4 steps in %.1fs", problem.name, t_end, n, time.perf_counter() - t0)
    return u, n


def reference_solution(
    problem: BenchmarkProblem,
    t_end: float | None = None,
    cache_dir: str | Path | None = None,
    dt_ref: float = DEFAULT_DT_REF,
    mode: str = "auto",
) -> ReferenceSolution:
    """Terminal reference state for a problem.

    ``mode`` is ``auto`` (exact when available, else RK4), ``exact``,
    ``rk4-refined`` or ``file:<path>``. RK4 results are cached in
    ``cache_dir`` under ``<problem>_<t_end>_<dt_ref>.ref``; a corrupt record
    is recomputed and rewritten.
    """
    t_end = problem.default_t_end if t_end is None else t_end
    p = problem.precision
    if mode.startswith("file:"):
        ref = load_reference(Path(mode[5:]), p)
        if len(ref.values) != problem.system.dim:
            raise ValueError(f"reference file has {len(ref.values)} values, expected {problem.system.dim}")
        return ref
    if mode not in ("auto", "exact", "rk4-refined"):
        raise ValueError(f"unknown reference mode {mode!r}")
    if mode == "exact" or (mode == "auto" and problem.exact is not None):
        if problem.exact is None:
            raise ValueError(f"problem {problem.name!r} has no exact solution")
        return ReferenceSolution(problem.name, t_end, problem.exact(t_end), "exact", precision_tag=p.tag)

    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / _cache_name(problem.name, t_end, dt_ref, p.tag)
        if path.exists():
            try:
                ref = load_reference(path, p)
                log.debug("reference cache hit %s", path)
                return ref
            except CacheCorrupt as exc:
                log.warning("%s; recomputing", exc)
    u, n = _rk4_reference(problem, t_end, dt_ref)
    ref = ReferenceSolution(problem.name, t_end, u, "rk4_refined", dt_ref, n, p.tag)
    if path is not None:
        save_reference(ref, path, p)
    return ref


# solvers and studies -------------------------------------------------------

SOLVERS = ("tsfo-implicit", "tsfo-explicit", "rk4-explicit", "irk4-gauss")


def make_stepper(solver_id: str, params: SchemeParams = SchemeParams(), cfg: NewtonConfig = NewtonConfig()):
    if solver_id == "tsfo-implicit":
        return lambda sys, u, dt: step_implicit_tsfo(sys, u, dt, params, cfg)
    if solver_id == "tsfo-explicit":
        return step_explicit_tsfo
    if solver_id == "rk4-explicit":
        return step_rk4_explicit
    if solver_id == "irk4-gauss":
        return lambda sys, u, dt: step_irk4_gauss(sys, u, dt, cfg)
    raise ValueError(f"unknown solver {solver_id!r}; choose from {', '.join(SOLVERS)}")


def run_fixed(problem: BenchmarkProblem, solver_id: str, t_end: float, n_steps: int,
              params: SchemeParams = SchemeParams(), cfg: NewtonConfig = NewtonConfig(),
              iterations: list | None = None, on_step: Callable | None = None):
    stepper = make_stepper(solver_id, params, cfg)
    return integrate_fixed(problem.system, problem.u0, t_end, n_steps, stepper, iterations, on_step)


def convergence_study(
    problem: BenchmarkProblem,
    solver_id: str = "tsfo-implicit",
    t_end: float | None = None,
    dt0: float = 1.0,
    levels: int = 5,
    params: SchemeParams = SchemeParams(),
    cfg: NewtonConfig = NewtonConfig(),
    reference: ReferenceSolution | None = None,
    cache_dir: str | Path | None = None,
) -> list[ConvergenceRow]:
    """Run ``levels`` halvings of ``dt0``; failed rows get infinite errors."""
    if levels < 1:
        raise ValueError("levels must be at least 1")
    t_end = problem.default_t_end if t_end is None else t_end
    if reference is None:
        reference = reference_solution(problem, t_end, cache_dir)
    rows: list[ConvergenceRow] = []
    for k in range(levels):
        dt, n = effective_dt(t_end, dt0 / 2**k)
        iters: list[int] = []
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                u = run_fixed(problem, solver_id, t_end, n, params, cfg, iters)
            e2, einf = terminal_error(u, reference.values)
            row = ConvergenceRow(dt, n, e2, einf, avg_newton_iters=float(np.mean(iters)) if iters else 0.0)
        except StiffStepError as exc:
            log.warning("row dt=%g failed: %s", dt, exc)
            row = ConvergenceRow(dt, n, math.inf, math.inf, avg_newton_iters=math.nan, failure=str(exc))
        if rows:
            prev = rows[-1]
            ratio = prev.dt / row.dt
            if ratio > 1:
                row.order_l2 = convergence_order(prev.error_l2, row.error_l2, ratio)
                row.order_linf = convergence_order(prev.error_linf, row.error_linf, ratio)
        rows.append(row)
    return rows


# table output --------------------------------------------------------------

TABLE_COLUMNS = ("dt", "error_l2", "order_l2", "error_linf", "order_linf", "avg_newton_iters")


def format_order(order: Optional[float], first: bool = False) -> str:
    if first:
        return ""
    if order is None or not math.isfinite(order) or abs(order) >= 100:
        return ORDER_SENTINEL
    return f"{order:.10f}"


def format_error(err: float) -> str:
    return f"{err:.11E}" if math.isfinite(err) else "inf"


def table_cells(rows: list[ConvergenceRow]) -> list[list[str]]:
    out = []
    for i, r in enumerate(rows):
        out.append([
            f"{r.dt:.7E}",
            format_error(r.error_l2),
            format_order(r.order_l2, i == 0),
            format_error(r.error_linf),
            format_order(r.order_linf, i == 0),
            f"{r.avg_newton_iters:.3f}" if math.isfinite(r.avg_newton_iters) else "nan",
        ])
    return out


def format_table(rows: list[ConvergenceRow], fmt: str = "csv") -> str:
    cells = table_cells(rows)
    if fmt == "csv":
        return "\n".join([",".join(TABLE_COLUMNS)] + [",".join(c) for c in cells]) + "\n"
    if fmt == "md":
        head = "| " + " | ".join(TABLE_COLUMNS) + " |"
        rule = "|" + "|".join("---" for _ in TABLE_COLUMNS) + "|"
        body = ["| " + " | ".join(c) + " |" for c in cells]
        return "\n".join([head, rule] + body) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")
