"""Experiment harness: builds instances, computes a high-accuracy reference
with SSNAL, runs the requested solvers and writes traces and summary tables."""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import io
import json
import logging
import math
import os
import threading
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .alm import SolveResult, SsnalConfig, alm_solve
from .baselines import BaselineConfig, aadmm_solve, admm_solve, lalm_solve, primal_dual_solve
from .data import (
    Scenario,
    SyntheticSpec,
    generate,
    minmax_scale,
    parse_libsvm,
    poly_expand,
    rng_for,
)
from .problem import ProblemData, lambda_from_fraction, objective_primal
from .transforms import genlasso_to_classo, stacked_identity

logger = logging.getLogger(__name__)

SOLVERS = ("ssnal", "pd", "lalm", "admm", "aadmm")

TRACE_COLUMNS = ("iter", "time_s", "obj", "gap", "eta_p", "eta_d")


class PlanError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class FileSource:
    path: str
    degree: int = 1
    scale: bool = False


@dataclasses.dataclass
class ExperimentPlan:
    scenario: Scenario
    source: Union[SyntheticSpec, FileSource]
    lambda_l_list: List[float]
    solvers: List[str] = dataclasses.field(default_factory=lambda: list(SOLVERS))
    eps: float = 1e-6
    baseline_eps: float = 1e-10
    output_dir: Optional[Path] = None
    seed: int = 0
    s: int = 30
    jobs: int = 1
    max_iter: int = 10_000

    def validate(self) -> None:
        self.scenario = Scenario.parse(self.scenario)
        if not self.solvers:
            raise PlanError("solver list is empty")
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown:
            raise PlanError(f"unknown solvers {unknown}; choose from {list(SOLVERS)}")
        if not self.lambda_l_list:
            raise PlanError("lambda_l list is empty")
        for lam in self.lambda_l_list:
            if not 0 < lam < 1:
                raise PlanError(f"lambda_l values must lie in (0, 1), got {lam}")
        if not self.eps > 0 or not self.baseline_eps > 0:
            raise PlanError("tolerances must be positive")
        if self.jobs < 1:
            raise PlanError("jobs must be at least 1")
        if self.scenario is not Scenario.SUM_ZERO and self.s < 1:
            raise PlanError("s must be positive for random_b and genlasso")
        if isinstance(self.source, FileSource):
            if not os.access(self.source.path, os.R_OK):
                raise PlanError(f"cannot read {self.source.path}")
            if self.source.degree < 1:
                raise PlanError("degree must be at least 1")


@dataclasses.dataclass
class BenchRecord:
    scenario: str
    size: str
    lambda_l: float
    solver: str
    nnz: int
    obj: float
    eta_gap: float
    runtime: float
    outer_iters: int
    inner_iters: int
    status: str


@dataclasses.dataclass
class Instance:
    """Everything but the penalty weight; ``size`` is ``m;n;s`` of the original model."""

    A: np.ndarray
    b: np.ndarray
    B: np.ndarray
    d: np.ndarray
    size: str

    def with_lambda_fraction(self, lambda_l: float) -> ProblemData:
        lam = lambda_from_fraction(self.A, self.b, lambda_l)
        return ProblemData(self.A, self.b, self.B, self.d, lam)


def build_instance(plan: ExperimentPlan) -> Instance:
    scenario = Scenario.parse(plan.scenario)
    if isinstance(plan.source, SyntheticSpec):
        spec = dataclasses.replace(plan.source, scenario=scenario, s=plan.s, seed=plan.seed)
        gen = generate(spec)
        A, b, B, d = gen.A, gen.b, gen.B, gen.d
    else:
        X, y = parse_libsvm(plan.source.path)
        if plan.source.scale:
            X = minmax_scale(X)
        A = poly_expand(X, plan.source.degree)
        b = y
        rng = rng_for(plan.seed)
        n = A.shape[1]
        if scenario is Scenario.SUM_ZERO:
            B, d = np.ones((1, n)), np.zeros(1)
        elif scenario is Scenario.RANDOM_B:
            B, d = rng.standard_normal((plan.s, n)), rng.standard_normal(plan.s)
        else:
            B, d = rng.standard_normal((plan.s, n)), np.zeros(plan.s)
    m, n = A.shape
    s = B.shape[0]
    if scenario is Scenario.GENLASSO:
        # The lambda fed to the reduction is a placeholder; the harness
        # rescales it from the reduced data for every lambda_l.
        red = genlasso_to_classo(A, b, stacked_identity(B), 1.0).reduced
        return Instance(red.A, red.b, red.B, red.d, f"{m};{n};{s}")
    return Instance(A, b, B, d, f"{m};{n};{s}")


def _baseline_runner(name: str, config: BaselineConfig) -> Callable[[ProblemData], SolveResult]:
    fn = {
        "pd": primal_dual_solve,
        "lalm": lalm_solve,
        "admm": admm_solve,
        "aadmm": aadmm_solve,
    }[name]
    return lambda data: fn(data, config)


def _runner(name: str, plan: ExperimentPlan) -> Callable[[ProblemData], SolveResult]:
    if name == "ssnal":
        config = SsnalConfig(eps=plan.eps)
        return lambda data: alm_solve(data, config)
    return _baseline_runner(name, BaselineConfig(eps=plan.eps, max_iter=plan.max_iter, seed=plan.seed))


def _trace_path(out: Path, scenario: str, size: str, lambda_l: float, solver: str) -> Path:
    tag = size.replace(";", "x")
    return out / "traces" / f"{scenario}_{tag}_l{lambda_l:g}_{solver}.csv"


def write_trace(path: Path, result: SolveResult, f_star: float) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for tr in result.traces:
            writer.writerow([tr.k, repr(tr.elapsed), repr(tr.obj_p), repr(tr.obj_p - f_star),
                             repr(tr.eta_p), repr(tr.eta_d)])


def run_plan(plan: ExperimentPlan) -> List[BenchRecord]:
    """Run every (lambda_l, solver) cell of ``plan``.

    For each ``lambda_l`` SSNAL is first run at ``baseline_eps`` and its
    objective is the reference ``f*`` for the optimality gaps. When
    ``plan.output_dir`` is set, per-cell traces and the summary
    (``summary.csv``, ``summary.json``, ``table.txt``) are written there.
    """
    plan.validate()
    inst = build_instance(plan)
    scenario = plan.scenario.value
    out = Path(plan.output_dir) if plan.output_dir is not None else None
    records: Dict[Tuple[int, int], BenchRecord] = {}
    lock = threading.Lock()

    def run_cell(li: int, lambda_l: float, si: int, solver: str, data: ProblemData, f_star: float):
        t0 = time.perf_counter()
        result = _runner(solver, plan)(data)
        runtime = time.perf_counter() - t0
        obj = objective_primal(data, result.point.x)
        rec = BenchRecord(
            scenario=scenario,
            size=inst.size,
            lambda_l=lambda_l,
            solver=solver,
            nnz=result.nnz,
            obj=obj,
            eta_gap=obj - f_star,
            runtime=runtime,
            outer_iters=result.iterations,
            inner_iters=result.total_inner,
            status=result.status.value,
        )
        if out is not None:
            write_trace(_trace_path(out, scenario, inst.size, lambda_l, solver), result, f_star)
        with lock:
            records[(li, si)] = rec
        logger.info("%s lambda_l=%g %s: obj=%.6e gap=%.2e %.2fs (%s)",
                    inst.size, lambda_l, solver, obj, rec.eta_gap, runtime, rec.status)

    cells = []
    for li, lambda_l in enumerate(plan.lambda_l_list):
        data = inst.with_lambda_fraction(lambda_l)
        reference = alm_solve(data, SsnalConfig(eps=plan.baseline_eps))
        f_star = objective_primal(data, reference.point.x)
        for si, solver in enumerate(plan.solvers):
            cells.append((li, lambda_l, si, solver, data, f_star))

    if plan.jobs == 1:
        for cell in cells:
            run_cell(*cell)
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=plan.jobs) as pool:
            for fut in [pool.submit(run_cell, *cell) for cell in cells]:
                fut.result()

    ordered = [records[key] for key in sorted(records)]
    if out is not None:
        write_summary(out, ordered)
    return ordered


def records_to_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    fields = [f.name for f in dataclasses.fields(BenchRecord)]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        row = dataclasses.asdict(rec)
        for key, val in row.items():
            if isinstance(val, (float, np.floating)):
                row[key] = repr(float(val))
        writer.writerow(row)
    return buf.getvalue()


def records_from_csv(text: str) -> List[BenchRecord]:
    casts = {f.name: f.type for f in dataclasses.fields(BenchRecord)}
    conv = {"str": str, "int": int, "float": float}
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        out.append(BenchRecord(**{k: conv[casts[k]](v) for k, v in row.items()}))
    return out


def _fmt(val: float) -> str:
    if isinstance(val, float) and math.isnan(val):
        return "-"
    return f"{val:.4e}"


def emit_table(records: Sequence[BenchRecord]) -> Tuple[str, str]:
    """Render records as a grouped text table and as CSV.

    One row per (size, lambda_l); ``nnz`` and ``obj`` come from the SSNAL
    record when present (otherwise the first solver), followed by the gap and
    runtime of every solver.
    """
    if not records:
        raise ValueError("no records to emit")
    solvers: List[str] = []
    groups: Dict[Tuple[str, float], Dict[str, BenchRecord]] = {}
    for rec in records:
        if rec.solver not in solvers:
            solvers.append(rec.solver)
        groups.setdefault((rec.size, rec.lambda_l), {})[rec.solver] = rec
    header = ["size", "lambda_l", "nnz", "obj"]
    header += [f"gap_{s}" for s in solvers] + [f"time_{s}" for s in solvers]
    rows = []
    for (size, lambda_l), by_solver in groups.items():
        lead = by_solver.get("ssnal") or next(iter(by_solver.values()))
        row = [size, f"{lambda_l:g}", str(lead.nnz), _fmt(lead.obj)]
        row += [_fmt(by_solver[s].eta_gap) if s in by_solver else "-" for s in solvers]
        row += [f"{by_solver[s].runtime:.2f}" if s in by_solver else "-" for s in solvers]
        rows.append(row)
    widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n", records_to_csv(records)


def write_summary(out: Path, records: Sequence[BenchRecord]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    text, csv_text = emit_table(records)
    (out / "table.txt").write_text(text)
    (out / "summary.csv").write_text(csv_text)
    (out / "summary.json").write_text(
        json.dumps([dataclasses.asdict(r) for r in records], indent=2) + "\n"
    )
