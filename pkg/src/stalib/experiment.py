"""Multi-seed experiments: scheduling, aggregation, rank-sum tests, export.

A plan names benchmarks, dimensions and algorithm variants. Every
(benchmark, dimension, variant) cell is run with seeds
``base_seed, base_seed + 1, ...``, so cells of the same plan are paired by
seed. Results are sorted by cell and seed before aggregation, which keeps
summaries independent of worker scheduling.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .algorithms import MODELS, VARIANTS, AlgorithmConfig, RunRecord, TerminationSpec, run
from .benchmarks import BENCHMARKS, finite_difference_gradient, grad_norm, make_benchmark, resolve_name
from .core import NondifferentiablePoint, STAError
from .operators import TransformParams

__all__ = [
    "ExperimentPlan",
    "Trial",
    "RunFailure",
    "SummaryRow",
    "ExperimentResult",
    "RankSumResult",
    "DegenerateSamples",
    "final_grad_norm",
    "run_trial",
    "run_experiment",
    "summarize",
    "wilcoxon_rank_sum",
    "rank_sum_z",
    "export_results",
    "load_summary",
    "load_records",
    "load_curve",
    "load_plan",
    "write_curve",
    "default_workers",
    "SUMMARY_HEADER",
]

SUMMARY_HEADER = (
    "benchmark", "dim", "algorithm", "objval_mean", "objval_std", "gradnorm_mean", "evals_mean", "time_mean",
)
RECORD_HEADER = (
    "benchmark", "dim", "algorithm", "seed", "fbest", "grad_norm", "grad_flag",
    "evaluations", "iterations", "termination_reason", "wall_time",
)
TIME_COLUMNS = ("time_mean", "wall_time")
FES_PER_DIM = 10_000


class DegenerateSamples(STAError):
    """Every value in both samples is identical."""


class ExperimentError(STAError, ValueError):
    pass


@dataclass(frozen=True)
class ExperimentPlan:
    """Declarative description of a batch of runs.

    ``max_fes`` left at ``None`` means ``10_000 * n`` in ``max_fes`` mode and
    no cap in ``designed`` mode, except for ``standard_sta`` which always
    gets the ``10_000 * n`` cap because its alpha schedule never lets the
    designed rule fire.
    """

    benchmarks: Tuple[str, ...] = tuple(BENCHMARKS)
    dims: Tuple[int, ...] = (20, 30, 50)
    algorithms: Tuple[str, ...] = ("esta",)
    runs: int = 30
    base_seed: int = 42
    termination: str = "designed"
    max_fes: Optional[int] = None
    max_stalls: Optional[int] = None
    se: int = 30
    epsilon: float = 1e-8
    predictive_model: str = "hybrid"
    curve_stride: int = 100
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "benchmarks", tuple(resolve_name(b) for b in self.benchmarks))
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if not self.benchmarks or not self.dims or not self.algorithms:
            raise ExperimentError("benchmarks, dims and algorithms must be non-empty")
        for a in self.algorithms:
            if a not in VARIANTS:
                raise ExperimentError(f"unknown algorithm {a!r}; choose from {VARIANTS}")
        if int(self.runs) < 1:
            raise ExperimentError("runs must be >= 1")
        if int(self.workers) < 1:
            raise ExperimentError("workers must be >= 1")
        if self.predictive_model not in MODELS:
            raise ExperimentError(f"predictive_model must be one of {MODELS}")
        if self.termination == "max_stalls" and self.max_stalls is None:
            raise ExperimentError("max_stalls termination needs max_stalls")
        for b in self.benchmarks:
            for n in self.dims:
                make_benchmark(b, n)
        # validates the remaining fields
        for a in self.algorithms:
            self.config_for(a, self.dims[0])

    def config_for(self, algorithm: str, n: int) -> AlgorithmConfig:
        cap = self.max_fes
        if cap is None and (self.termination == "max_fes" or algorithm == "standard_sta"):
            cap = FES_PER_DIM * n
        try:
            return AlgorithmConfig(
                variant=algorithm,
                se=self.se,
                params=TransformParams(),
                predictive_model=self.predictive_model,
                epsilon=self.epsilon,
                termination=TerminationSpec(self.termination, max_fes=cap, max_stalls=self.max_stalls),
                curve_stride=self.curve_stride,
            )
        except ValueError as exc:
            raise ExperimentError(str(exc)) from exc

    def seeds(self) -> List[int]:
        return [self.base_seed + i for i in range(self.runs)]

    def cells(self) -> List[Tuple[str, int, str]]:
        return [(b, n, a) for b in self.benchmarks for n in self.dims for a in self.algorithms]


@dataclass
class Trial:
    """One finished run inside an experiment."""

    benchmark: str
    dim: int
    algorithm: str
    seed: int
    fbest: float
    grad_norm: float
    grad_flag: str
    evaluations: int
    iterations: int
    termination_reason: str
    wall_time: float
    curve: List[Tuple[int, float]] = field(default_factory=list)
    # filled only when the experiment runs with detail=True
    x: Optional[List[float]] = None
    trace: Optional[List[float]] = None

    @property
    def key(self):
        return (self.benchmark, self.dim, self.algorithm, self.seed)


@dataclass
class RunFailure:
    benchmark: str
    dim: int
    algorithm: str
    seed: int
    error: str

    @property
    def key(self):
        return (self.benchmark, self.dim, self.algorithm, self.seed)


@dataclass
class SummaryRow:
    benchmark: str
    dim: int
    algorithm: str
    objval_mean: float
    objval_std: float
    gradnorm_mean: float
    evals_mean: float
    time_mean: float
    runs: int = 0
    failed: int = 0

    @property
    def complete(self) -> bool:
        return self.failed == 0


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    trials: List[Trial]
    failures: List[RunFailure]
    summaries: List[SummaryRow]


def final_grad_norm(problem, x) -> Tuple[float, str]:
    """Gradient norm at a final incumbent, with a flag describing how it was
    obtained.

    Analytic gradients are used where they exist. Within finite-difference
    reach of a kink the central difference is reported instead and flagged
    ``"kink"``. ``"none"`` means no gradient is available.
    """
    if problem.gradient is None:
        return math.nan, "none"
    near = getattr(problem, "near_kink", None)
    if near is not None and near(x):
        return float(np.linalg.norm(finite_difference_gradient(problem, x))), "kink"
    try:
        return grad_norm(problem, x), ""
    except NondifferentiablePoint:
        return float(np.linalg.norm(finite_difference_gradient(problem, x))), "kink"


def run_trial(benchmark: str, n: int, config: AlgorithmConfig, seed: int, detail: bool = False) -> Trial:
    problem = make_benchmark(benchmark, n)
    rec: RunRecord = run(problem, config, seed=seed)
    g, flag = final_grad_norm(problem, rec.x)
    return Trial(
        benchmark=problem.name,
        dim=n,
        algorithm=config.variant,
        seed=seed,
        fbest=rec.fbest,
        grad_norm=g,
        grad_flag=flag,
        evaluations=rec.evaluations,
        iterations=rec.iterations,
        termination_reason=rec.termination_reason,
        wall_time=rec.wall_time,
        curve=[(int(e), float(f)) for e, f in rec.curve],
        x=[float(v) for v in rec.x] if detail else None,
        trace=list(rec.trace) if detail else None,
    )


def _job(args):
    benchmark, n, config, seed, detail = args
    try:
        return run_trial(benchmark, n, config, seed, detail)
    except Exception as exc:  # recorded per run, never fatal for the batch
        message = "".join(traceback.format_exception_only(type(exc), exc)).strip()
        return RunFailure(benchmark, n, config.variant, seed, message)


def summarize(trials: Sequence[Trial], failures: Sequence[RunFailure] = ()) -> List[SummaryRow]:
    """One row per (benchmark, dim, algorithm), in first-seen order.

    The standard deviation uses ``ddof=1`` and is 0 for a single run.
    GradNorm means skip runs without a gradient.
    """
    groups, order = {}, []
    for t in trials:
        k = (t.benchmark, t.dim, t.algorithm)
        if k not in groups:
            groups[k] = []
            order.append(k)
        groups[k].append(t)
    failed = {}
    for f in failures:
        k = (f.benchmark, f.dim, f.algorithm)
        failed[k] = failed.get(k, 0) + 1
        if k not in groups:
            groups[k] = []
            order.append(k)
    rows = []
    for k in order:
        ts = groups[k]
        fb = np.array([t.fbest for t in ts], dtype=float)
        gn = np.array([t.grad_norm for t in ts], dtype=float)
        gn = gn[np.isfinite(gn)]
        rows.append(SummaryRow(
            benchmark=k[0],
            dim=k[1],
            algorithm=k[2],
            objval_mean=float(fb.mean()) if fb.size else math.nan,
            objval_std=float(fb.std(ddof=1)) if fb.size > 1 else (0.0 if fb.size else math.nan),
            gradnorm_mean=float(gn.mean()) if gn.size else math.nan,
            evals_mean=float(np.mean([t.evaluations for t in ts])) if ts else math.nan,
            time_mean=float(np.mean([t.wall_time for t in ts])) if ts else math.nan,
            runs=len(ts),
            failed=failed.get(k, 0),
        ))
    return rows


def run_experiment(plan: ExperimentPlan, detail: bool = False, progress=None) -> ExperimentResult:
    """Execute every seeded run of ``plan`` and aggregate the results.

    ``detail`` keeps each run's final point and per-iteration fBest trace
    on its ``Trial``. ``progress``, if given, is called with each finished
    ``Trial`` or ``RunFailure`` (in completion order).
    """
    jobs = [
        (b, n, plan.config_for(a, n), seed, detail)
        for (b, n, a) in plan.cells()
        for seed in plan.seeds()
    ]
    if plan.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            outcomes = []
            for out in pool.map(_job, jobs, chunksize=max(1, len(jobs) // (4 * plan.workers))):
                outcomes.append(out)
                if progress:
                    progress(out)
    else:
        outcomes = []
        for job in jobs:
            outcomes.append(_job(job))
            if progress:
                progress(outcomes[-1])
    rank = {cell: i for i, cell in enumerate(plan.cells())}
    sort_key = lambda r: (rank[(r.benchmark, r.dim, r.algorithm)], r.seed)
    trials = sorted((o for o in outcomes if isinstance(o, Trial)), key=sort_key)
    failures = sorted((o for o in outcomes if isinstance(o, RunFailure)), key=sort_key)
    summaries = summarize(trials, failures)
    summaries.sort(key=lambda r: rank[(r.benchmark, r.dim, r.algorithm)])
    return ExperimentResult(plan, trials, failures, summaries)


class RankSumResult(NamedTuple):
    verdict: str
    p_value: float
    statistic: float
    z: float


def rank_sum_z(sample_a, sample_b) -> Tuple[float, float, float]:
    """Rank sum ``W`` of ``sample_a``, its continuity-corrected ``|z|`` and the
    two-sided normal p-value.

    Ties get midranks and the variance is tie-corrected. Raises
    ``DegenerateSamples`` when all pooled values are equal (zero variance).
    """
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("samples must be finite")
    pooled = np.concatenate([a, b])
    if np.all(pooled == pooled[0]):
        raise DegenerateSamples("all values in both samples are identical")
    n1, n2 = a.size, b.size
    N = n1 + n2
    w = float(stats.rankdata(pooled)[:n1].sum())
    _, counts = np.unique(pooled, return_counts=True)
    tie = float(np.sum(counts**3 - counts)) / (N * (N - 1))
    var = n1 * n2 / 12.0 * ((N + 1) - tie)
    z = max(abs(w - n1 * (N + 1) / 2.0) - 0.5, 0.0) / math.sqrt(var)
    return w, z, min(1.0, 2.0 * float(stats.norm.sf(z)))


def wilcoxon_rank_sum(sample_a, sample_b, significance: float = 0.05) -> RankSumResult:
    """Two-sided Wilcoxon rank-sum test for minimisation results.

    A significant result is attributed to the sample with the smaller median
    (lower is better); equal medians fall back to the rank sum. Samples whose
    values are all identical carry no information: ``no_difference``, p = 1.
    """
    if not 0 < significance < 1:
        raise ValueError("significance must lie in (0, 1)")
    try:
        w, z, p = rank_sum_z(sample_a, sample_b)
    except DegenerateSamples:
        n1 = np.asarray(sample_a).size
        return RankSumResult("no_difference", 1.0, n1 * (n1 + np.asarray(sample_b).size + 1) / 2.0, 0.0)
    if p >= significance:
        return RankSumResult("no_difference", p, w, z)
    a, b = np.asarray(sample_a, dtype=float), np.asarray(sample_b, dtype=float)
    ma, mb = np.median(a), np.median(b)
    a_better = ma < mb if ma != mb else w < a.size * (a.size + b.size + 1) / 2.0
    return RankSumResult("a_better" if a_better else "b_better", p, w, z)


# ---------------------------------------------------------------- export


def _fmt(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else "%.2e" % x


def _exact(x) -> str:
    return repr(float(x))


def _curve_name(t) -> str:
    return f"{t.benchmark}_{t.dim}_{t.algorithm}_seed{t.seed}"


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json_float(x):
    # JSON has no NaN; null keeps the files strictly parseable
    return None if isinstance(x, float) and math.isnan(x) else x


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_curve(path, curve) -> Path:
    """Write one ``evaluations,fbest`` curve; JSON when ``path`` ends in ``.json``."""
    path = Path(path)
    if path.suffix == ".json":
        _write(path, _json_dump({"evaluations": [e for e, _ in curve], "fbest": [f for _, f in curve]}))
    else:
        _write(path, _csv_text(("evaluations", "fbest"), [[e, _exact(f)] for e, f in curve]))
    return path


def export_results(trials: Sequence[Trial], summaries: Sequence[SummaryRow], fmt: str, path,
                   failures: Sequence[RunFailure] = ()) -> List[Path]:
    """Write summary, per-run records and curves under directory ``path``.

    CSV layout::

        summary.csv   benchmark,dim,algorithm,objval_mean,objval_std,gradnorm_mean,evals_mean,time_mean
        records.csv   benchmark,dim,algorithm,seed,fbest,grad_norm,grad_flag,evaluations,
                      iterations,termination_reason,wall_time
        curves/<benchmark>_<dim>_<algorithm>_seed<seed>.csv   evaluations,fbest
        failures.csv  benchmark,dim,algorithm,seed,error (only when runs failed)

    Summary numbers use ``%.2e``; record and curve numbers are written at
    full precision. The JSON layout mirrors this with ``.json`` files, where
    every value is kept at full precision and NaN is written as ``null``.
    Returns the written paths.
    """
    if fmt not in ("csv", "json"):
        raise ValueError("fmt must be 'csv' or 'json'")
    root = Path(path)
    written = []
    if fmt == "csv":
        srows = [
            [s.benchmark, s.dim, s.algorithm, _fmt(s.objval_mean), _fmt(s.objval_std),
             _fmt(s.gradnorm_mean), _fmt(s.evals_mean), _fmt(s.time_mean)]
            for s in summaries
        ]
        _write(root / "summary.csv", _csv_text(SUMMARY_HEADER, srows))
        written.append(root / "summary.csv")
        rrows = [
            [t.benchmark, t.dim, t.algorithm, t.seed, _exact(t.fbest), _exact(t.grad_norm), t.grad_flag,
             t.evaluations, t.iterations, t.termination_reason, _exact(t.wall_time)]
            for t in trials
        ]
        _write(root / "records.csv", _csv_text(RECORD_HEADER, rrows))
        written.append(root / "records.csv")
        for t in trials:
            written.append(write_curve(root / "curves" / (_curve_name(t) + ".csv"), t.curve))
        if failures:
            frows = [[f.benchmark, f.dim, f.algorithm, f.seed, f.error] for f in failures]
            _write(root / "failures.csv", _csv_text(("benchmark", "dim", "algorithm", "seed", "error"), frows))
            written.append(root / "failures.csv")
    else:
        summ = [{k: _json_float(v) for k, v in asdict(s).items()} for s in summaries]
        _write(root / "summary.json", _json_dump(summ))
        written.append(root / "summary.json")
        recs = []
        for t in trials:
            d = {k: _json_float(v) for k, v in asdict(t).items() if k not in ("curve", "x", "trace")}
            if t.x is not None:
                d["x"] = t.x
            recs.append(d)
        _write(root / "records.json", _json_dump(recs))
        written.append(root / "records.json")
        for t in trials:
            written.append(write_curve(root / "curves" / (_curve_name(t) + ".json"), t.curve))
        if failures:
            _write(root / "failures.json", _json_dump([asdict(f) for f in failures]))
            written.append(root / "failures.json")
    return written


def _nan(v):
    return math.nan if v is None else v


def load_summary(path) -> List[SummaryRow]:
    """Read ``summary.csv`` or ``summary.json`` back into ``SummaryRow`` objects.

    CSV summaries carry only the fixed columns, so ``runs`` and ``failed``
    come back as 0.
    """
    path = Path(path)
    if path.suffix == ".json":
        names = {f.name for f in fields(SummaryRow)}
        return [SummaryRow(**{k: _nan(v) if k not in ("benchmark", "algorithm") else v
                              for k, v in row.items() if k in names})
                for row in json.loads(path.read_text())]
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SUMMARY_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            SummaryRow(r["benchmark"], int(r["dim"]), r["algorithm"],
                       *(float(r[k]) for k in SUMMARY_HEADER[3:]))
            for r in reader
        ]


def load_records(path) -> List[Trial]:
    """Read ``records.csv`` or ``records.json``; curves are not attached."""
    path = Path(path)
    if path.suffix == ".json":
        out = []
        for r in json.loads(path.read_text()):
            r = dict(r)
            r["grad_norm"] = _nan(r["grad_norm"])
            out.append(Trial(**r))
        return out
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RECORD_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        return [
            Trial(r["benchmark"], int(r["dim"]), r["algorithm"], int(r["seed"]), float(r["fbest"]),
                  float(r["grad_norm"]), r["grad_flag"], int(r["evaluations"]), int(r["iterations"]),
                  r["termination_reason"], float(r["wall_time"]))
            for r in reader
        ]


def load_curve(path) -> List[Tuple[int, float]]:
    path = Path(path)
    if path.suffix == ".json":
        d = json.loads(path.read_text())
        return list(zip(d["evaluations"], d["fbest"]))
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if next(reader) != ["evaluations", "fbest"]:
            raise ValueError(f"{path}: unexpected curve header")
        return [(int(e), float(f)) for e, f in reader]


_PLAN_KEYS = {f.name for f in fields(ExperimentPlan)}


def load_plan(path, **overrides) -> ExperimentPlan:
    """Build a plan from a JSON object whose keys are ``ExperimentPlan`` fields.

    ``"benchmarks": "all"`` selects every registered benchmark. Keyword
    ``overrides`` (ignored when ``None``) take precedence over the file.
    """
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ExperimentError(f"cannot read plan {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ExperimentError(f"{path}: plan must be a JSON object")
    unknown = set(data) - _PLAN_KEYS
    if unknown:
        raise ExperimentError(f"{path}: unknown plan keys {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    if data.get("benchmarks") == "all":
        data["benchmarks"] = tuple(BENCHMARKS)
    try:
        return ExperimentPlan(**data)
    except (TypeError, KeyError) as exc:
        raise ExperimentError(f"{path}: {exc}") from exc


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1))
