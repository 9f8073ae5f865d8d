"""Shared building blocks: problems, bounds, evaluation budget, archive, RNG.

Candidate solutions are plain 1-D float ``numpy`` arrays. Batches of
candidates are 2-D arrays of shape ``(m, n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "STAError",
    "BudgetExhausted",
    "DimensionMismatch",
    "InsufficientHistory",
    "DegenerateDirection",
    "NondifferentiablePoint",
    "BoxBounds",
    "Problem",
    "Incumbent",
    "BestArchive",
    "EvalBudget",
    "RandomSource",
    "as_state",
    "evaluate",
    "evaluate_batch",
    "clamp_to_bounds",
    "archive_push",
    "archive_sample_pair",
]


class STAError(Exception):
    """Base class for errors raised by this package."""


class BudgetExhausted(STAError):
    pass


class DimensionMismatch(STAError, ValueError):
    pass


class InsufficientHistory(STAError):
    pass


class DegenerateDirection(STAError):
    pass


class NondifferentiablePoint(STAError, ValueError):
    pass


def as_state(x, n: Optional[int] = None) -> np.ndarray:
    """Validate ``x`` as a finite 1-D state vector (optionally of length ``n``)."""
    s = np.asarray(x, dtype=float)
    if s.ndim != 1 or s.size == 0:
        raise DimensionMismatch(f"state must be a non-empty 1-D vector, got shape {s.shape}")
    if n is not None and s.size != n:
        raise DimensionMismatch(f"state has length {s.size}, expected {n}")
    if not np.all(np.isfinite(s)):
        raise ValueError("state contains NaN or Inf")
    return s


@dataclass(frozen=True)
class BoxBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("lower and upper must be 1-D vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError("lower must be strictly smaller than upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def uniform(cls, low: float, high: float, n: int) -> "BoxBounds":
        return cls(np.full(n, float(low)), np.full(n, float(high)))

    @property
    def dimension(self) -> int:
        return self.lower.size

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))


@dataclass
class Problem:
    """A box-bounded minimisation problem.

    Parameters
    ----------
    dimension : int
        Number of decision variables ``n``.
    bounds : BoxBounds
        Search box.
    objective : callable
        Maps a state of shape ``(n,)`` to a float. When ``vectorized`` is
        true it must also map an array of shape ``(m, n)`` to shape ``(m,)``.
    gradient : callable, optional
        Analytic gradient, same calling convention as ``objective``.
    name : str
        Label used in reports.
    vectorized : bool
        Whether ``objective`` accepts batches.
    """

    dimension: int
    bounds: BoxBounds
    objective: Callable
    gradient: Optional[Callable] = None
    name: str = "problem"
    vectorized: bool = False

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise ValueError("dimension must be >= 1")
        if self.bounds.dimension != self.dimension:
            raise DimensionMismatch(
                f"bounds have dimension {self.bounds.dimension}, problem has {self.dimension}"
            )

    def __call__(self, x) -> float:
        return float(self.objective(np.asarray(x, dtype=float)))


@dataclass
class Incumbent:
    point: np.ndarray
    value: float


@dataclass
class EvalBudget:
    """Counts objective evaluations against an optional hard limit."""

    limit: Optional[int] = None
    used: int = 0

    def __post_init__(self):
        if self.limit is not None and self.limit < 1:
            raise ValueError("limit must be a positive integer or None")

    @property
    def remaining(self) -> float:
        return float("inf") if self.limit is None else self.limit - self.used

    @property
    def exhausted(self) -> bool:
        return self.limit is not None and self.used >= self.limit

    def grant(self, k: int) -> int:
        """Charge up to ``k`` evaluations and return how many were granted."""
        if self.limit is None:
            granted = k
        else:
            granted = max(0, min(k, self.limit - self.used))
        self.used += granted
        return granted


def evaluate(problem: Problem, s, budget: EvalBudget) -> float:
    s = as_state(s, problem.dimension)
    if budget.exhausted:
        raise BudgetExhausted(f"evaluation budget of {budget.limit} exhausted")
    budget.grant(1)
    return float(problem.objective(s))


def evaluate_batch(problem: Problem, X: np.ndarray, budget: EvalBudget) -> np.ndarray:
    """Evaluate as many rows of ``X`` as the budget allows.

    Returns the values of the evaluated prefix of ``X`` (possibly shorter than
    ``X`` at the budget edge). Raises ``BudgetExhausted`` when nothing could
    be charged.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != problem.dimension:
        raise DimensionMismatch(f"batch has {X.shape[1]} columns, expected {problem.dimension}")
    k = budget.grant(X.shape[0])
    if k == 0:
        raise BudgetExhausted(f"evaluation budget of {budget.limit} exhausted")
    X = X[:k]
    if problem.vectorized:
        return np.asarray(problem.objective(X), dtype=float).reshape(k)
    return np.array([problem.objective(row) for row in X], dtype=float)


def clamp_to_bounds(s, bounds: BoxBounds) -> np.ndarray:
    """Project a state (or a batch of states) onto the box, coordinate-wise."""
    s = np.asarray(s, dtype=float)
    if s.shape[-1] != bounds.dimension:
        raise DimensionMismatch(f"state has length {s.shape[-1]}, bounds have {bounds.dimension}")
    return np.clip(s, bounds.lower, bounds.upper)


@dataclass
class BestArchive:
    """FIFO store of distinct past incumbents, most recent last.

    Distinctness is exact bitwise equality of the stored vectors.
    """

    capacity: int = 10
    entries: list = field(default_factory=list)
    _keys: set = field(default_factory=set, repr=False, compare=False)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.entries = [np.array(e, dtype=float) for e in self.entries]
        self._keys = {e.tobytes() for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, s) -> bool:
        return np.asarray(s, dtype=float).tobytes() in self._keys


def archive_push(archive: BestArchive, s) -> BestArchive:
    """Append ``s`` unless it is already stored; evict the oldest past capacity.

    The archive is updated in place and returned for chaining.
    """
    s = np.array(s, dtype=float)
    if archive.entries and archive.entries[0].shape != s.shape:
        raise DimensionMismatch("archive entries and pushed state differ in length")
    key = s.tobytes()
    if key in archive._keys:
        return archive
    archive.entries.append(s)
    archive._keys.add(key)
    if len(archive.entries) > archive.capacity:
        archive._keys.discard(archive.entries.pop(0).tobytes())
    return archive


def archive_sample_pair(archive: BestArchive, rng: "RandomSource"):
    if len(archive) < 2:
        raise InsufficientHistory(f"need at least 2 archived states, have {len(archive)}")
    i, j = rng.choice_pair(len(archive))
    return archive.entries[i], archive.entries[j]


class RandomSource:
    """Seeded random stream used by one optimisation run.

    Backed by ``numpy``'s PCG64 bit generator; Gaussian variates come from
    numpy's ziggurat sampler. Identical seeds and identical call sequences
    give bit-identical streams.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self):
        return f"RandomSource(seed={self.seed})"

    def uniform01(self, size=None):
        return self._gen.random(size)

    def uniform_pm1(self, size=None):
        return self._gen.uniform(-1.0, 1.0, size)

    def gaussian(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low: int, high: int, size=None):
        """Uniform integers on ``[low, high)``."""
        return self._gen.integers(low, high, size)

    def choice_pair(self, m: int):
        """Two distinct indices from ``range(m)``, drawn without replacement."""
        i, j = self._gen.choice(m, size=2, replace=False)
        return int(i), int(j)
