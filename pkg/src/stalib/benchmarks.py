"""The ten benchmark functions with bounds, known optima and analytic gradients.

All objectives and gradients broadcast over leading axes: ``x`` of shape
``(..., n)`` maps to values of shape ``(...)`` and gradients of shape
``(..., n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .core import BoxBounds, NondifferentiablePoint, Problem, as_state

__all__ = [
    "Benchmark",
    "BENCHMARKS",
    "UnknownBenchmark",
    "DimensionTooSmall",
    "make_benchmark",
    "resolve_name",
    "gradient",
    "grad_norm",
    "finite_difference_gradient",
    "sphere",
    "rosenbrock",
    "rastrigin",
    "griewank",
    "ackley",
    "quadconvex",
    "schwefel",
    "michalewicz",
    "trid",
    "giunta",
]


class UnknownBenchmark(KeyError):
    pass


class DimensionTooSmall(ValueError):
    pass


def _arr(x):
    # float64 at least, wider float types (e.g. longdouble) pass through
    x = np.asarray(x)
    return x.astype(np.result_type(x.dtype, np.float64), copy=False)


def _idx(n):
    return np.arange(1, n + 1, dtype=float)


def sphere(x):
    x = _arr(x)
    return np.sum(x**2, axis=-1)


def sphere_grad(x):
    return 2.0 * np.asarray(x, dtype=float)


def rosenbrock(x):
    x = _arr(x)
    head, tail = x[..., :-1], x[..., 1:]
    return np.sum(100.0 * (tail - head**2) ** 2 + (head - 1.0) ** 2, axis=-1)


def rosenbrock_grad(x):
    x = _arr(x)
    head, tail = x[..., :-1], x[..., 1:]
    r = tail - head**2
    g = np.zeros_like(x)
    g[..., :-1] += -400.0 * head * r + 2.0 * (head - 1.0)
    g[..., 1:] += 200.0 * r
    return g


def rastrigin(x):
    x = _arr(x)
    return np.sum(x**2 - 10.0 * np.cos(2 * np.pi * x) + 10.0, axis=-1)


def rastrigin_grad(x):
    x = _arr(x)
    return 2.0 * x + 20.0 * np.pi * np.sin(2 * np.pi * x)


def griewank(x):
    x = _arr(x)
    root = np.sqrt(_idx(x.shape[-1]))
    return np.sum(x**2, axis=-1) / 4000.0 - np.prod(np.cos(x / root), axis=-1) + 1.0


def griewank_grad(x):
    x = _arr(x)
    n = x.shape[-1]
    root = np.sqrt(_idx(n))
    c = np.cos(x / root)
    # product over j != i without dividing by cos (which may vanish)
    ones = np.ones(x.shape[:-1] + (1,))
    before = np.cumprod(np.concatenate([ones, c[..., :-1]], axis=-1), axis=-1)
    after = np.cumprod(np.concatenate([ones, c[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    return x / 2000.0 + np.sin(x / root) / root * before * after


def ackley(x):
    x = _arr(x)
    n = x.shape[-1]
    r = np.sqrt(np.sum(x**2, axis=-1) / n)
    c = np.sum(np.cos(2 * np.pi * x), axis=-1) / n
    return 20.0 + np.e - 20.0 * np.exp(-0.2 * r) - np.exp(c)


def ackley_grad(x):
    x = _arr(x)
    n = x.shape[-1]
    r = np.sqrt(np.sum(x**2, axis=-1, keepdims=True) / n)
    if np.any(r == 0.0):
        raise NondifferentiablePoint("ackley is not differentiable at the origin")
    c = np.sum(np.cos(2 * np.pi * x), axis=-1, keepdims=True) / n
    return 4.0 * np.exp(-0.2 * r) * x / (n * r) + np.exp(c) * 2 * np.pi * np.sin(2 * np.pi * x) / n


def quadconvex(x):
    x = _arr(x)
    return np.sum((x - _idx(x.shape[-1])) ** 2, axis=-1)


def quadconvex_grad(x):
    x = _arr(x)
    return 2.0 * (x - _idx(x.shape[-1]))


_SCHWEFEL_C = 418.9828872724338


def schwefel(x):
    x = _arr(x)
    return np.sum(-x * np.sin(np.sqrt(np.abs(x))), axis=-1) + _SCHWEFEL_C * x.shape[-1]


def schwefel_grad(x):
    # -x sin(sqrt|x|) behaves like |x|^1.5 at 0, so the derivative exists there (= 0)
    x = _arr(x)
    q = np.sqrt(np.abs(x))
    return -np.sin(q) - 0.5 * q * np.cos(q)


def michalewicz(x):
    x = _arr(x)
    i = _idx(x.shape[-1])
    return -np.sum(np.sin(x) * np.sin(i * x**2 / np.pi) ** 20, axis=-1)


def michalewicz_grad(x):
    x = _arr(x)
    i = _idx(x.shape[-1])
    arg = i * x**2 / np.pi
    s = np.sin(arg)
    return -(np.cos(x) * s**20 + np.sin(x) * 20.0 * s**19 * np.cos(arg) * 2.0 * i * x / np.pi)


def _trid_const(n):
    return n * (n + 4) * (n - 1) / 6.0


def trid(x):
    x = _arr(x)
    n = x.shape[-1]
    terms = np.concatenate(
        [(x - 1.0) ** 2, -x[..., 1:] * x[..., :-1], np.full(x.shape[:-1] + (1,), _trid_const(n))],
        axis=-1,
    )
    if terms.dtype != np.float64:
        return np.sum(terms, axis=-1)
    # large cancelling terms near the optimum: sum exactly-rounded per row
    flat = terms.reshape(-1, terms.shape[-1])
    out = np.array([math.fsum(row) for row in flat])
    return out.reshape(x.shape[:-1]) if x.ndim > 1 else float(out[0])


def trid_grad(x):
    x = _arr(x)
    g = 2.0 * (x - 1.0)
    g[..., 1:] -= x[..., :-1]
    g[..., :-1] -= x[..., 1:]
    return g


_GIUNTA_A = 16.0 / 15.0
_GIUNTA_B = 1.0 / 50.0
_GIUNTA_C = 0.2677647897315472


def giunta(x):
    x = _arr(x)
    t = _GIUNTA_A * x - 1.0
    s = np.sin(t)
    return np.sum(s + s**2 + _GIUNTA_B * np.sin(4.0 * t), axis=-1) + _GIUNTA_C * x.shape[-1]


def giunta_grad(x):
    x = _arr(x)
    t = _GIUNTA_A * x - 1.0
    return _GIUNTA_A * (np.cos(t) + 2.0 * np.sin(t) * np.cos(t) + 4.0 * _GIUNTA_B * np.cos(4.0 * t))


@dataclass
class Benchmark(Problem):
    """A ``Problem`` carrying its identifier, known optimum and type tags."""

    fid: str = ""
    known_point: Optional[np.ndarray] = None
    known_value: Optional[float] = None
    tags: frozenset = field(default_factory=frozenset)
    optimum_tol: float = 1e-9
    kink: Optional[Callable] = None

    def near_kink(self, x) -> bool:
        """True when ``x`` is within finite-difference reach of a point where
        the gradient does not exist."""
        return bool(self.kink is not None and self.kink(np.asarray(x, dtype=float)))


@dataclass(frozen=True)
class _Def:
    fid: str
    objective: Callable
    gradient: Callable
    bounds: Callable  # n -> (low, high)
    optimum: Optional[Callable]  # n -> point
    value: Optional[float]
    tags: frozenset
    min_dim: int = 1
    optimum_tol: float = 1e-9
    kink: Optional[Callable] = None


def _tags(*names):
    return frozenset(names)


BENCHMARKS: Dict[str, _Def] = {
    "sphere": _Def(
        "f1", sphere, sphere_grad, lambda n: (-100.0, 100.0), lambda n: np.zeros(n), 0.0,
        _tags("unimodal", "zero-optimum", "identical-optimum", "separable", "unflatten"),
    ),
    "rosenbrock": _Def(
        "f2", rosenbrock, rosenbrock_grad, lambda n: (-30.0, 30.0), lambda n: np.ones(n), 0.0,
        _tags("multimodal", "nonzero-optimum", "identical-optimum", "non-separable", "flatten"),
        min_dim=2,
    ),
    "rastrigin": _Def(
        "f3", rastrigin, rastrigin_grad, lambda n: (-5.12, 5.12), lambda n: np.zeros(n), 0.0,
        _tags("multimodal", "zero-optimum", "identical-optimum", "separable", "unflatten"),
    ),
    "griewank": _Def(
        "f4", griewank, griewank_grad, lambda n: (-600.0, 600.0), lambda n: np.zeros(n), 0.0,
        _tags("multimodal", "zero-optimum", "identical-optimum", "non-separable", "unflatten"),
    ),
    "ackley": _Def(
        "f5", ackley, ackley_grad, lambda n: (-32.0, 32.0), lambda n: np.zeros(n), 0.0,
        _tags("multimodal", "zero-optimum", "identical-optimum", "non-separable", "unflatten"),
        kink=lambda x: float(np.max(np.abs(x))) < 1e-6,
    ),
    "quadconvex": _Def(
        "f6", quadconvex, quadconvex_grad, lambda n: (-10.0 * n, 10.0 * n), lambda n: _idx(n), 0.0,
        _tags("unimodal", "nonzero-optimum", "nonidentical-optimum", "separable", "unflatten"),
    ),
    "schwefel": _Def(
        "f7", schwefel, schwefel_grad, lambda n: (-500.0, 500.0), lambda n: np.full(n, 420.9687), 0.0,
        _tags("multimodal", "nonzero-optimum", "identical-optimum", "separable", "unflatten"),
        optimum_tol=1e-6,
    ),
    "michalewicz": _Def(
        "f8", michalewicz, michalewicz_grad, lambda n: (0.0, np.pi), None, None,
        _tags("multimodal", "nonzero-optimum", "nonidentical-optimum", "non-separable", "flatten"),
    ),
    "trid": _Def(
        "f9", trid, trid_grad, lambda n: (-float(n * n), float(n * n)),
        lambda n: _idx(n) * (n + 1 - _idx(n)), 0.0,
        _tags("unimodal", "nonzero-optimum", "nonidentical-optimum", "non-separable", "flatten"),
        min_dim=2,
    ),
    "giunta": _Def(
        "f10", giunta, giunta_grad, lambda n: (-1.0, 1.0), lambda n: np.full(n, 0.4673), 0.0,
        _tags("multimodal", "nonzero-optimum", "identical-optimum", "separable", "unflatten"),
        optimum_tol=1e-6,
    ),
}

_BY_FID = {d.fid: name for name, d in BENCHMARKS.items()}


def resolve_name(name: str) -> str:
    """Map ``"f3"``/``"Rastrigin"``/``"rastrigin"`` to the registry key."""
    key = str(name).strip().lower()
    if key in BENCHMARKS:
        return key
    if key in _BY_FID:
        return _BY_FID[key]
    raise UnknownBenchmark(f"unknown benchmark {name!r}")


def make_benchmark(name: str, n: int) -> Benchmark:
    key = resolve_name(name)
    d = BENCHMARKS[key]
    n = int(n)
    if n < d.min_dim:
        raise DimensionTooSmall(f"{key} needs n >= {d.min_dim}, got {n}")
    low, high = d.bounds(n)
    return Benchmark(
        dimension=n,
        bounds=BoxBounds.uniform(low, high, n),
        objective=d.objective,
        gradient=d.gradient,
        name=key,
        vectorized=True,
        fid=d.fid,
        known_point=None if d.optimum is None else np.asarray(d.optimum(n), dtype=float),
        known_value=d.value,
        tags=d.tags,
        optimum_tol=d.optimum_tol,
        kink=d.kink,
    )


def gradient(problem: Problem, x) -> np.ndarray:
    if problem.gradient is None:
        raise ValueError(f"{problem.name} has no analytic gradient")
    x = as_state(x, problem.dimension)
    return np.asarray(problem.gradient(x), dtype=float)


def grad_norm(problem: Problem, x) -> float:
    return float(np.linalg.norm(gradient(problem, x)))


def fd_step(x) -> np.ndarray:
    return np.maximum(1e-6, 1e-6 * np.abs(np.asarray(x, dtype=float)))


def finite_difference_gradient(problem: Problem, x, h=None, extended: bool = False) -> np.ndarray:
    """Central differences with per-coordinate step ``max(1e-6, 1e-6 |x_i|)``.

    Pass ``h`` to override the step (scalar or per-coordinate). With
    ``extended=True`` the differences are taken in ``numpy.longdouble``,
    which removes most of the cancellation error when ``|f|`` is large
    compared with the gradient (for benchmark objectives, which keep the
    input precision).
    """
    x = as_state(x, problem.dimension)
    dt = np.longdouble if extended else np.float64
    h = fd_step(x) if h is None else np.broadcast_to(np.asarray(h, dtype=float), x.shape)
    xe, he = x.astype(dt), h.astype(dt)
    E = np.diag(he)
    X = np.vstack([xe + E, xe - E])
    f = np.asarray(problem.objective(X), dtype=dt) if problem.vectorized else np.array(
        [problem.objective(row) for row in X], dtype=dt
    )
    n = x.size
    return np.asarray((f[:n] - f[n:]) / (2 * he), dtype=float)
