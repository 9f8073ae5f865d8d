"""State transition algorithms (STA, ESTA, EXSTA) for box-bounded global minimisation."""

from .algorithms import AlgorithmConfig, RunRecord, TerminationSpec, run
from .benchmarks import BENCHMARKS, make_benchmark
from .core import BoxBounds, Problem, RandomSource
from .estimator import ESTA, EXSTA, StandardSTA
from .experiment import ExperimentPlan, run_experiment, wilcoxon_rank_sum
from .operators import TransformParams

__version__ = "0.1.0"

__all__ = [
    "AlgorithmConfig",
    "TerminationSpec",
    "TransformParams",
    "RunRecord",
    "run",
    "BoxBounds",
    "Problem",
    "RandomSource",
    "BENCHMARKS",
    "make_benchmark",
    "StandardSTA",
    "ESTA",
    "EXSTA",
    "ExperimentPlan",
    "run_experiment",
    "wilcoxon_rank_sum",
]
