"""scikit-learn style wrappers around the three optimisers.

Optimisers have no data to learn from, so ``fit`` takes the objective and
the search box instead of ``X, y`` and there is no ``predict``. The rest of
the estimator contract holds: constructor arguments are stored verbatim,
``get_params``/``set_params``/``clone`` work, validation happens in
``fit``, and results live in trailing-underscore attributes.

>>> import numpy as np
>>> opt = ESTA(random_state=0).fit(lambda x: float(np.sum(x**2)), [(-5, 5)] * 3)
>>> opt.fun_ < 1e-12
True
"""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_random_state

from .algorithms import MODELS, AlgorithmConfig, TerminationSpec, run
from .core import BoxBounds, Problem, RandomSource
from .operators import TransformParams

__all__ = ["StandardSTA", "ESTA", "EXSTA"]

_MODES = {"designed": "designed", "max_fes": "max_fes", "max-fes": "max_fes",
          "max_stalls": "max_stalls", "max-stalls": "max_stalls"}


def _as_bounds(bounds) -> BoxBounds:
    if isinstance(bounds, BoxBounds):
        return bounds
    arr = np.asarray(bounds, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("bounds must be a sequence of (low, high) pairs, got shape %r" % (arr.shape,))
    if not np.all(np.isfinite(arr)):
        raise ValueError("bounds must be finite")
    return BoxBounds(arr[:, 0], arr[:, 1])


class _STABase(BaseEstimator):
    _variant = ""

    def __init__(self, se=30, epsilon=1e-8, termination="designed", max_fes=None, max_stalls=None,
                 predictive_model="hybrid", archive_capacity=200, random_state=None):
        self.se = se
        self.epsilon = epsilon
        self.termination = termination
        self.max_fes = max_fes
        self.max_stalls = max_stalls
        self.predictive_model = predictive_model
        self.archive_capacity = archive_capacity
        self.random_state = random_state

    def _seed(self) -> int:
        if isinstance(self.random_state, numbers.Integral):
            return int(self.random_state)
        return int(check_random_state(self.random_state).randint(2**31 - 1))

    def _config(self, n: int) -> AlgorithmConfig:
        if self.termination not in _MODES:
            raise ValueError(f"termination must be one of {sorted(set(_MODES.values()))}")
        if self.predictive_model not in MODELS:
            raise ValueError(f"predictive_model must be one of {MODELS}")
        mode = _MODES[self.termination]
        cap = self.max_fes
        if cap is None and (mode == "max_fes" or self._variant == "standard_sta"):
            cap = 10_000 * n
        return AlgorithmConfig(
            variant=self._variant,
            se=self.se,
            params=TransformParams(),
            predictive_model=self.predictive_model,
            epsilon=self.epsilon,
            termination=TerminationSpec(mode, max_fes=cap, max_stalls=self.max_stalls),
            archive_capacity=self.archive_capacity,
        )

    def fit(self, func, bounds=None, gradient=None, vectorized=False):
        """Minimise ``func`` over ``bounds``.

        ``func`` may also be a ``Problem``, in which case ``bounds`` and the
        other arguments are taken from it. ``bounds`` is a sequence of
        ``(low, high)`` pairs or a ``BoxBounds``.
        """
        if isinstance(func, Problem):
            problem = func
        else:
            if not callable(func):
                raise TypeError("func must be callable or a Problem")
            if bounds is None:
                raise ValueError("bounds are required when func is a plain callable")
            box = _as_bounds(bounds)
            problem = Problem(box.dimension, box, func, gradient=gradient,
                              name=getattr(func, "__name__", "objective"), vectorized=vectorized)
        config = self._config(problem.dimension)
        seed = self._seed()
        rec = run(problem, config, rng=RandomSource(seed))
        self.record_ = rec
        self.seed_ = seed
        self.x_ = rec.x
        self.fun_ = rec.fbest
        self.n_evals_ = rec.evaluations
        self.n_iter_ = rec.iterations
        self.termination_reason_ = rec.termination_reason
        self.curve_ = np.asarray(rec.curve, dtype=float).reshape(-1, 2)
        return self


class StandardSTA(_STABase):
    """Classical state transition algorithm with the cyclic alpha schedule.

    The designed stopping rule never fires for this variant, so when
    ``max_fes`` is not given the run is capped at ``10_000 * n`` evaluations.
    """

    _variant = "standard_sta"


class ESTA(_STABase):
    """STA with intuitive alpha/gamma adaptation and predictive translation."""

    _variant = "esta"


class EXSTA(_STABase):
    """STA whose factors are chosen by a grid line search after each operator."""

    _variant = "exsta"
