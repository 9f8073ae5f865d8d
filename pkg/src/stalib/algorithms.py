"""Optimisation loops: standard STA, ESTA and EXSTA.

The three variants share candidate evaluation, greedy replacement and the
termination logic; they differ in which operators they use and how the
transformation factors are controlled between iterations:

* ``standard_sta`` keeps beta, gamma and delta at 1 and cycles alpha
  geometrically from ``alpha_max`` down to ``alpha_min``.
* ``esta`` adapts alpha and gamma from the largest coordinate change of the
  incumbent over the last iteration.
* ``exsta`` picks every factor from a fixed grid by a one-dimensional
  search along the direction realised by the operator's best candidate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import operators as ops
from .core import (
    BestArchive,
    BudgetExhausted,
    DegenerateDirection,
    EvalBudget,
    Incumbent,
    InsufficientHistory,
    Problem,
    RandomSource,
    archive_push,
    archive_sample_pair,
    clamp_to_bounds,
    evaluate_batch,
)
from .operators import TransformParams

__all__ = [
    "VARIANTS",
    "DEFAULT_OMEGA",
    "TerminationSpec",
    "AlgorithmConfig",
    "RunState",
    "RunRecord",
    "evaluate_batch_and_update",
    "translate_after_improvement",
    "adapt_params_intuitive",
    "select_param_linesearch",
    "check_termination",
    "run_standard_sta",
    "run_esta",
    "run_exsta",
    "run",
]

VARIANTS = ("standard_sta", "esta", "exsta")
MODELS = ("first", "second", "hybrid")
TERMINATION_MODES = ("designed", "max_fes", "max_stalls")
DEFAULT_OMEGA = (2.0, 1.0) + tuple(10.0**-k for k in range(1, 9))
MACHINE_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class TerminationSpec:
    """When to stop a run.

    ``designed`` stops once an iteration makes no progress while the rotation
    factor is at most ``epsilon``. ``max_fes`` in that mode (and in
    ``max_stalls`` mode) acts as an optional safety cap.
    """

    mode: str = "designed"
    max_fes: Optional[int] = None
    max_stalls: Optional[int] = None

    def __post_init__(self):
        if self.mode not in TERMINATION_MODES:
            raise ValueError(f"termination mode must be one of {TERMINATION_MODES}, got {self.mode!r}")
        if self.mode == "max_fes" and self.max_fes is None:
            raise ValueError("max_fes mode needs max_fes")
        if self.mode == "max_stalls" and self.max_stalls is None:
            raise ValueError("max_stalls mode needs max_stalls")
        if self.max_fes is not None and int(self.max_fes) < 1:
            raise ValueError("max_fes must be positive")
        if self.max_stalls is not None and int(self.max_stalls) < 1:
            raise ValueError("max_stalls must be positive")


@dataclass(frozen=True)
class AlgorithmConfig:
    variant: str = "esta"
    se: int = 30
    params: TransformParams = field(default_factory=TransformParams)
    predictive_model: str = "hybrid"
    epsilon: float = 1e-8
    stall_eps: float = MACHINE_EPS
    omega_grid: Tuple[float, ...] = DEFAULT_OMEGA
    termination: TerminationSpec = field(default_factory=TerminationSpec)
    archive_capacity: int = 200
    allones_axis_scale: str = "box"
    curve_stride: int = 100

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.predictive_model not in MODELS:
            raise ValueError(f"predictive_model must be one of {MODELS}, got {self.predictive_model!r}")
        if int(self.se) < 1:
            raise ValueError("se must be >= 1")
        if not self.epsilon > 0 or not self.stall_eps >= 0:
            raise ValueError("epsilon must be positive and stall_eps non-negative")
        grid = tuple(float(a) for a in self.omega_grid)
        if not grid or any(a <= 0 for a in grid) or any(b >= a for a, b in zip(grid, grid[1:])):
            raise ValueError("omega_grid must be non-empty, positive and strictly decreasing")
        object.__setattr__(self, "omega_grid", grid)
        if self.allones_axis_scale not in ("box", "unit"):
            raise ValueError("allones_axis_scale must be 'box' or 'unit'")
        if int(self.archive_capacity) < 2:
            raise ValueError("archive_capacity must be >= 2")
        if int(self.curve_stride) < 1:
            raise ValueError("curve_stride must be >= 1")


@dataclass
class RunState:
    incumbent: Incumbent
    archive: BestArchive
    params: TransformParams
    budget: EvalBudget
    iteration: int = 0
    prev_fbest: float = np.inf
    stall_count: int = 0
    termination_reason: Optional[str] = None
    # incumbent before the step that last improved it; None when that step failed
    translation_anchor: Optional[np.ndarray] = None
    # best clamped candidate of the last evaluated batch
    last_batch_best: Optional[Tuple[np.ndarray, float]] = None
    curve: List[Tuple[int, float]] = field(default_factory=list)
    curve_stride: int = 100
    _next_mark: int = 0

    @property
    def fbest(self) -> float:
        return self.incumbent.value

    def _record_curve(self):
        used = self.budget.used
        if used >= self._next_mark:
            self.curve.append((used, self.incumbent.value))
            self._next_mark = (used // self.curve_stride + 1) * self.curve_stride


@dataclass
class RunRecord:
    """Outcome of one run."""

    seed: int
    variant: str
    problem: str
    dimension: int
    x: np.ndarray
    fbest: float
    evaluations: int
    iterations: int
    termination_reason: str
    curve: List[Tuple[int, float]]
    trace: List[float]
    alphas: List[float]
    grad_norm: Optional[float] = None
    grad_flag: str = ""
    wall_time: float = 0.0


def evaluate_batch_and_update(state: RunState, batch, problem: Problem) -> RunState:
    """Clamp, evaluate and greedily accept the best of ``batch``.

    Only a strict improvement replaces the incumbent; the displaced incumbent
    is pushed onto the archive. Partial batches are evaluated at the budget
    edge.
    """
    X = clamp_to_bounds(np.atleast_2d(batch), problem.bounds)
    values = evaluate_batch(problem, X, state.budget)
    i = int(np.argmin(values))
    best_x, best_f = X[i].copy(), float(values[i])
    state.last_batch_best = (best_x, best_f)
    if best_f < state.incumbent.value:
        old = state.incumbent.point
        archive_push(state.archive, old)
        state.incumbent = Incumbent(best_x, best_f)
        state.translation_anchor = old
    else:
        state.translation_anchor = None
    state._record_curve()
    return state


def _choose_order(config: AlgorithmConfig, rng: RandomSource) -> str:
    if config.predictive_model == "hybrid":
        return "first" if rng.uniform01() < 0.5 else "second"
    return config.predictive_model


def translate_after_improvement(state: RunState, problem: Problem, config: AlgorithmConfig,
                                rng: RandomSource) -> RunState:
    """Follow up an improving step with a translation batch.

    Standard STA searches along the ray from the previous to the new
    incumbent. ESTA and EXSTA use the predictive forms with a random pair of
    archived bests. Missing history or a zero direction make this a no-op.
    """
    if state.translation_anchor is None:
        return state
    s = state.incumbent.point
    beta = state.params.beta
    try:
        if config.variant == "standard_sta":
            batch = ops.translate_standard(s, state.translation_anchor, beta, config.se, rng)
        else:
            order = _choose_order(config, rng)
            a, b = archive_sample_pair(state.archive, rng)
            batch = ops.translate_predictive(s, a, b, beta, order, config.se, rng)
    except (InsufficientHistory, DegenerateDirection):
        return state
    return evaluate_batch_and_update(state, batch, problem)


def adapt_params_intuitive(state: RunState, config: AlgorithmConfig, previous_best=None) -> TransformParams:
    """New factors from the largest coordinate change of the incumbent.

    ``previous_best`` is the incumbent at the start of the iteration. A
    change ``dx > 0`` sets alpha and gamma to ``dx`` clipped into
    ``[epsilon, alpha_max]`` and ``[epsilon, 1]``; no change halves alpha,
    never below ``epsilon``.
    """
    p = state.params
    if previous_best is None:
        return p
    dx = float(np.max(np.abs(state.incumbent.point - np.asarray(previous_best, dtype=float))))
    eps = config.epsilon
    if dx == 0.0:
        return p.with_(alpha=max(p.alpha / p.fc, eps))
    return p.with_(alpha=min(max(dx, eps), p.alpha_max), gamma=min(max(dx, eps), 1.0))


def _line_search(state: RunState, direction, problem: Problem, config: AlgorithmConfig, origin=None):
    origin = state.incumbent.point if origin is None else np.asarray(origin, dtype=float)
    grid = np.asarray(config.omega_grid)
    X = clamp_to_bounds(origin + grid[:, None] * np.asarray(direction, dtype=float), problem.bounds)
    values = evaluate_batch(problem, X, state.budget)
    # argmin returns the first minimum, i.e. the largest step among ties
    i = int(np.argmin(values))
    return float(grid[i]), X[i].copy(), float(values[i])


def select_param_linesearch(state: RunState, direction, problem: Problem, config: AlgorithmConfig,
                            origin=None) -> float:
    """Return the grid step ``a`` minimising ``f(origin + a * direction)``.

    ``origin`` defaults to the incumbent. Every grid point is charged to the
    budget; at the budget edge the best step among those evaluated is
    returned.
    """
    if not np.any(direction):
        raise DegenerateDirection("line-search direction is zero")
    return _line_search(state, direction, problem, config, origin)[0]


def check_termination(state: RunState, config: AlgorithmConfig) -> Optional[str]:
    term = config.termination
    if state.budget.exhausted:
        return "budget_exhausted"
    if term.mode == "designed":
        progress = state.prev_fbest - state.incumbent.value
        if progress <= config.stall_eps and state.params.alpha <= config.epsilon:
            return "designed_optimal"
    elif term.mode == "max_stalls":
        if state.stall_count >= term.max_stalls:
            return "stalled"
    return None


def _initial_state(problem: Problem, config: AlgorithmConfig, rng: RandomSource) -> RunState:
    term = config.termination
    if config.variant == "standard_sta" and term.mode == "designed" and term.max_fes is None:
        raise ValueError(
            "standard STA cycles alpha back to alpha_max and never reaches the designed "
            "stopping rule; give termination.max_fes as a cap"
        )
    budget = EvalBudget(limit=None if term.max_fes is None else int(term.max_fes))
    lo, hi = problem.bounds.lower, problem.bounds.upper
    x0 = lo + (hi - lo) * rng.uniform01(problem.dimension)
    f0 = float(evaluate_batch(problem, x0[None, :], budget)[0])
    state = RunState(
        incumbent=Incumbent(x0, f0),
        archive=BestArchive(capacity=config.archive_capacity),
        params=config.params,
        budget=budget,
        curve_stride=config.curve_stride,
    )
    state._record_curve()
    return state


def _finish(state: RunState, problem: Problem, config: AlgorithmConfig, rng: RandomSource,
            trace, alphas, started) -> RunRecord:
    curve = list(state.curve)
    if not curve or curve[-1][0] != state.budget.used:
        curve.append((state.budget.used, state.incumbent.value))
    return RunRecord(
        seed=rng.seed,
        variant=config.variant,
        problem=problem.name,
        dimension=problem.dimension,
        x=state.incumbent.point.copy(),
        fbest=state.incumbent.value,
        evaluations=state.budget.used,
        iterations=state.iteration,
        termination_reason=state.termination_reason or "budget_exhausted",
        curve=curve,
        trace=trace,
        alphas=alphas,
        wall_time=time.perf_counter() - started,
    )


def _loop(problem, config, rng, iterate):
    started = time.perf_counter()
    state = _initial_state(problem, config, rng)
    trace, alphas = [], []
    while state.termination_reason is None:
        state.prev_fbest = state.incumbent.value
        try:
            iterate(state)
        except BudgetExhausted:
            state.termination_reason = "budget_exhausted"
        state.iteration += 1
        trace.append(state.incumbent.value)
        alphas.append(state.params.alpha)
        if state.prev_fbest - state.incumbent.value <= config.stall_eps:
            state.stall_count += 1
        else:
            state.stall_count = 0
        if state.termination_reason is None:
            state.termination_reason = check_termination(state, config)
    return _finish(state, problem, config, rng, trace, alphas, started)


def run_standard_sta(problem: Problem, config: AlgorithmConfig, rng: RandomSource) -> RunRecord:
    """Classical STA: expansion, rotation, axesion, each followed by a
    translation whenever it improved the incumbent."""
    if config.variant != "standard_sta":
        raise ValueError("run_standard_sta needs variant='standard_sta'")
    se = config.se

    def step(operator):
        def apply(state):
            evaluate_batch_and_update(state, operator(state), problem)
            translate_after_improvement(state, problem, config, rng)
        return apply

    expansion = step(lambda st: ops.expand_original(st.incumbent.point, st.params.gamma, se, rng))
    rotation = step(lambda st: ops.rotate(st.incumbent.point, st.params.alpha, se, rng))
    axesion = step(lambda st: ops.axesion_original(st.incumbent.point, st.params.delta, se, rng))

    def iterate(state):
        p = state.params
        if p.alpha < p.alpha_min:
            state.params = p = p.with_(alpha=p.alpha_max)
        expansion(state)
        rotation(state)
        axesion(state)
        state.params = p.with_(alpha=p.alpha / p.fc)

    return _loop(problem, config, rng, iterate)


def _axis_scale(problem: Problem, config: AlgorithmConfig):
    # "box": one unit of the all-ones axesion spans the search box in that coordinate
    if config.allones_axis_scale == "box":
        return problem.bounds.upper - problem.bounds.lower
    return 1.0


def _predictive_translation(state, problem, config, rng, start_value):
    # one translation per iteration, only after the iteration has improved
    state.translation_anchor = (
        state.incumbent.point if state.incumbent.value < start_value else None
    )
    translate_after_improvement(state, problem, config, rng)


def run_esta(problem: Problem, config: AlgorithmConfig, rng: RandomSource) -> RunRecord:
    if config.variant != "esta":
        raise ValueError("run_esta needs variant='esta'")
    se = config.se
    w = _axis_scale(problem, config)

    def iterate(state):
        start = state.incumbent.point
        f_start = state.incumbent.value
        p = state.params
        try:
            evaluate_batch_and_update(state, ops.expand_mixed(start, p.gamma, se, rng), problem)
            evaluate_batch_and_update(state, ops.rotate(state.incumbent.point, p.alpha, se, rng), problem)
            evaluate_batch_and_update(
                state, ops.axesion_mixed(state.incumbent.point, p.delta, se, rng, w), problem
            )
            _predictive_translation(state, problem, config, rng, f_start)
        finally:
            state.params = adapt_params_intuitive(state, config, previous_best=start)

    return _loop(problem, config, rng, iterate)


# alpha is left at its line-search value so the designed stopping rule can fire
_RESET_ON_FAILURE = frozenset({"gamma", "delta", "beta"})


def run_exsta(problem: Problem, config: AlgorithmConfig, rng: RandomSource) -> RunRecord:
    if config.variant != "exsta":
        raise ValueError("run_exsta needs variant='exsta'")
    se = config.se
    w = _axis_scale(problem, config)

    def tuned(state, factor_name, make_batch):
        origin = state.incumbent.point
        f_origin = state.incumbent.value
        factor = getattr(state.params, factor_name)
        batch = make_batch(origin, factor)
        if batch is None:
            return
        evaluate_batch_and_update(state, batch, problem)
        cand, _ = state.last_batch_best
        direction = (cand - origin) / factor
        if not np.any(direction):
            return
        a, x, fx = _line_search(state, direction, problem, config, origin=origin)
        state.params = state.params.with_(**{factor_name: a})
        if fx < state.incumbent.value:
            archive_push(state.archive, state.incumbent.point)
            state.incumbent = Incumbent(x, fx)
        elif state.incumbent.value >= f_origin and factor_name in _RESET_ON_FAILURE:
            # nothing found along this operator's direction: restore the exploratory scale
            state.params = state.params.with_(**{factor_name: getattr(config.params, factor_name)})
        state._record_curve()

    def translation_batch(state, f_start):
        def make(origin, beta):
            if not state.incumbent.value < f_start:
                return None
            try:
                order = _choose_order(config, rng)
                a, b = archive_sample_pair(state.archive, rng)
                return ops.translate_predictive(origin, a, b, beta, order, se, rng)
            except (InsufficientHistory, DegenerateDirection):
                return None
        return make

    def iterate(state):
        f_start = state.incumbent.value
        tuned(state, "gamma", lambda s, g: ops.expand_mixed(s, g, se, rng))
        tuned(state, "alpha", lambda s, a: ops.rotate(s, a, se, rng))
        tuned(state, "delta", lambda s, d: ops.axesion_mixed(s, d, se, rng, w))
        tuned(state, "beta", translation_batch(state, f_start))

    return _loop(problem, config, rng, iterate)


_RUNNERS = {"standard_sta": run_standard_sta, "esta": run_esta, "exsta": run_exsta}


def run(problem: Problem, config: AlgorithmConfig, rng=None, seed: int = 0) -> RunRecord:
    """Dispatch on ``config.variant``; ``rng`` defaults to ``RandomSource(seed)``."""
    rng = RandomSource(seed) if rng is None else rng
    return _RUNNERS[config.variant](problem, config, rng)
