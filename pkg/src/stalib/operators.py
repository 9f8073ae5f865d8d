"""State transformation operators.

Every operator takes the incumbent ``s`` (shape ``(n,)``) and returns a batch
of ``se`` candidates with shape ``(se, n)``. Random factors are drawn fresh
for each candidate, in a fixed order from the supplied ``RandomSource``.
Candidates are returned unclamped; projecting them onto the search box is
the caller's job.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import DegenerateDirection, RandomSource, as_state

__all__ = [
    "TransformParams",
    "rotate",
    "translate_standard",
    "translate_predictive",
    "expand_original",
    "expand_allones",
    "expand_mixed",
    "axesion_original",
    "axesion_allones",
    "axesion_mixed",
]

_MAX_RESAMPLE = 100


@dataclass(frozen=True)
class TransformParams:
    """Rotation, translation, expansion and axesion factors plus the
    rotation-factor schedule constants."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    delta: float = 1.0
    alpha_min: float = 1e-4
    alpha_max: float = 1.0
    fc: float = 2.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta", "alpha_min", "alpha_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.alpha_min < self.alpha_max:
            raise ValueError("alpha_min must be smaller than alpha_max")
        if not self.fc > 1:
            raise ValueError("fc must be greater than 1")

    def with_(self, **changes) -> "TransformParams":
        return replace(self, **changes)


def _check_se(se: int) -> int:
    se = int(se)
    if se < 1:
        raise ValueError("sample size se must be >= 1")
    return se


def rotate(s, alpha: float, se: int, rng: RandomSource) -> np.ndarray:
    """Sample ``se`` points in the closed ball of radius ``alpha`` around ``s``.

    Each candidate is ``s + alpha * r * u / ||u||`` with ``r ~ U[-1, 1]`` and
    ``u ~ U[-1, 1]^n``.
    """
    s = as_state(s)
    se = _check_se(se)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    r = rng.uniform_pm1((se, 1))
    u = rng.uniform_pm1((se, s.size))
    norms = np.linalg.norm(u, axis=1)
    for _ in range(_MAX_RESAMPLE):
        bad = norms == 0.0
        if not bad.any():
            break
        u[bad] = rng.uniform_pm1((int(bad.sum()), s.size))
        norms[bad] = np.linalg.norm(u[bad], axis=1)
    else:
        raise DegenerateDirection("could not sample a non-zero rotation direction")
    return s + alpha * r * (u / norms[:, None])


def translate_standard(s, s_prev, beta: float, se: int, rng: RandomSource) -> np.ndarray:
    """Search along the ray from ``s_prev`` through ``s``, up to length ``beta``."""
    s = as_state(s)
    s_prev = as_state(s_prev, s.size)
    se = _check_se(se)
    d = s - s_prev
    norm = np.linalg.norm(d)
    if norm == 0.0:
        raise DegenerateDirection("s and s_prev coincide")
    t = rng.uniform01((se, 1))
    return s + beta * t * (d / norm)


def translate_predictive(s, a, b, beta: float, order: str, se: int, rng: RandomSource) -> np.ndarray:
    """Translation along a first- or second-order difference of past bests.

    ``order="first"`` uses the direction ``s - a``; ``order="second"`` uses
    ``a - b``. The direction is not normalised and the step
    ``beta * r``, ``r ~ U[-1, 1]``, is signed.
    """
    s = as_state(s)
    a = as_state(a, s.size)
    se = _check_se(se)
    if order == "first":
        d = s - a
    elif order == "second":
        d = a - as_state(b, s.size)
    else:
        raise ValueError(f"order must be 'first' or 'second', got {order!r}")
    if not np.any(d):
        raise DegenerateDirection("predictive direction is zero")
    t = rng.uniform_pm1((se, 1))
    return s + beta * t * d


def expand_original(s, gamma: float, se: int, rng: RandomSource) -> np.ndarray:
    """Multiplicative Gaussian expansion: ``c_i = s_i (1 + gamma g_i)``."""
    s = as_state(s)
    se = _check_se(se)
    g = rng.gaussian((se, s.size))
    return s + gamma * g * s


def expand_allones(s, gamma: float, se: int, rng: RandomSource) -> np.ndarray:
    """Additive Gaussian expansion: ``c_i = s_i + gamma g_i``."""
    s = as_state(s)
    se = _check_se(se)
    g = rng.gaussian((se, s.size))
    return s + gamma * g


def _single_axis(s, delta, se, rng, scale):
    s = as_state(s)
    se = _check_se(se)
    axes = rng.integers(0, s.size, se)
    g = rng.gaussian(se)
    out = np.tile(s, (se, 1))
    out[np.arange(se), axes] += delta * g * scale[axes]
    return out


def axesion_original(s, delta: float, se: int, rng: RandomSource) -> np.ndarray:
    """Perturb one random coordinate multiplicatively: ``c_j = s_j (1 + delta g)``."""
    s = as_state(s)
    return _single_axis(s, delta, se, rng, s)


def axesion_allones(s, delta: float, se: int, rng: RandomSource, scale=1.0) -> np.ndarray:
    """Perturb one random coordinate additively: ``c_j = s_j + delta g w_j``.

    ``scale`` gives the per-coordinate unit ``w`` (scalar or length-``n``
    vector); the default of 1 is the plain all-ones form.
    """
    s = as_state(s)
    return _single_axis(s, delta, se, rng, np.broadcast_to(np.asarray(scale, dtype=float), s.shape))


def _split(se: int):
    se = _check_se(se)
    n_orig = (se + 1) // 2
    return n_orig, se - n_orig


def expand_mixed(s, gamma: float, se: int, rng: RandomSource) -> np.ndarray:
    """Half original, half all-ones expansion (the odd candidate goes to the original form)."""
    n_orig, n_new = _split(se)
    parts = [expand_original(s, gamma, n_orig, rng)]
    if n_new:
        parts.append(expand_allones(s, gamma, n_new, rng))
    return np.vstack(parts)


def axesion_mixed(s, delta: float, se: int, rng: RandomSource, scale=1.0) -> np.ndarray:
    """Half original, half all-ones axesion; ``scale`` is passed to the all-ones half."""
    n_orig, n_new = _split(se)
    parts = [axesion_original(s, delta, n_orig, rng)]
    if n_new:
        parts.append(axesion_allones(s, delta, n_new, rng, scale))
    return np.vstack(parts)
