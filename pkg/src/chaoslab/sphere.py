"""Uniform sampling on S^{d-1} and pair moments under the unit-volume measure."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import betaln, gammaln


def _check_d(d: int) -> None:
    if d < 2:
        raise ValueError(f"dimension d must be >= 2, got {d}")


def log_surface_area(d: int) -> float:
    """log of ``s_d = 2 pi^{d/2} / Gamma(d/2)``, the area of S^{d-1}."""
    return math.log(2.0) + 0.5 * d * math.log(math.pi) - float(gammaln(0.5 * d))


def surface_area(d: int) -> float:
    _check_d(d)
    return math.exp(log_surface_area(d))


def sample_sphere(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform point(s) on S^{d-1}: normalized standard Gaussian vectors.

    Returns shape ``(d,)`` when ``size`` is None, else ``(size, d)``.
    """
    _check_d(d)
    g = rng.standard_normal(d if size is None else (size, d))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def pair_moment_exact(d: int, k: int) -> float:
    """``int int <x1, x2>^{2k} dx1 dx2`` over the unit-volume sphere product.

    Equal to ``(s_{d-1} / s_d) B(k + 1/2, (d-1)/2)``, evaluated in log scale.
    """
    _check_d(d)
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    if k == 0:
        # B(1/2, (d-1)/2) = s_d / s_{d-1}; avoid log-gamma rounding above 1
        return 1.0
    log_ratio = log_surface_area(d - 1) - log_surface_area(d)
    return math.exp(log_ratio + float(betaln(k + 0.5, 0.5 * (d - 1))))


def pair_moment_factorial(d: int, k: int) -> float:
    """Same integral as :func:`pair_moment_exact` via ``(2k-1)!! / prod_{i<k} (d + 2i)``."""
    _check_d(d)
    if k < 0:
        raise ValueError(f"k must be nonnegative, got {k}")
    out = 1.0
    for i in range(k):
        out *= (2 * i + 1) / (d + 2 * i)
    return out


def pair_moment_mc(d: int, k: int, samples: int, rng: np.random.Generator) -> tuple[float, float]:
    """Plain Monte Carlo average of ``<x1, x2>^{2k}`` over independent uniform pairs.

    Returns ``(estimate, standard error)``.
    """
    if samples < 1000:
        raise ValueError(f"samples must be >= 1000, got {samples}")
    x1 = sample_sphere(d, rng, samples)
    x2 = sample_sphere(d, rng, samples)
    vals = np.einsum("ij,ij->i", x1, x2) ** (2 * k)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))
