"""Regenerate the convergence tables for every benchmark as markdown.

    python3 scripts/reproduce_tables.py --out tables/ [--only linear ozone]

The van der Pol rows take several minutes; reference solutions are cached.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

from stiffstep.harness import convergence_study, format_table
from stiffstep.problems import get_problem


@dataclass(frozen=True)
class TableConfig:
    name: str
    problem: str
    t_end: float
    dt0: float
    levels: int
    solvers: tuple[str, ...] = ("tsfo-implicit", "irk4-gauss")
    precision: str = "double"


TABLES = [
    TableConfig("linear", "linear", 10.0, 1.0, 5),
    TableConfig("linear_longdouble", "linear", 10.0, 1.0, 8, precision="longdouble"),
    TableConfig("robertson", "robertson", 10.0, 1e-2, 8),
    TableConfig("ozone_t1", "ozone", 1.0, 0.5, 8),
    TableConfig("ozone_t10", "ozone", 10.0, 0.5, 8),
    TableConfig("ozone_long", "ozone", 321.8122, 0.5, 8),
    TableConfig("vdp", "vdp", 100.0, 1e-2, 7, solvers=("tsfo-implicit",)),
]


def run(cfg: TableConfig, out: Path, cache_dir: str | None) -> None:
    problem = get_problem(cfg.problem, cfg.precision)
    for solver in cfg.solvers:
        rows = convergence_study(problem, solver, cfg.t_end, cfg.dt0, cfg.levels, cache_dir=cache_dir)
        path = out / f"{cfg.name}_{solver}.md"
        path.write_text(format_table(rows, "md"))
        print(f"## {cfg.name} / {solver}\n{format_table(rows, 'md')}")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tables")
    ap.add_argument("--only", nargs="*", default=None, help="table names to run")
    ap.add_argument("--cache-dir", default=None)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for cfg in TABLES:
        if args.only is None or cfg.name in args.only:
            run(cfg, out, args.cache_dir)


if __name__ == "__main__":
    main()
