"""Local randomized smoothing for nonsmooth stochastic oracles.

Replacing f by the average of f over a uniform epsilon-ball makes the gradient
Lipschitz with constant kappa * (n!!/(n-1)!!) * C/epsilon, where C bounds the
subgradient norms on the enlarged set and kappa is 2/pi for even n, 1 for odd n.
Sampling a subgradient at a ball-perturbed point gives an unbiased estimate of
the smoothed gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

Oracle = Callable[[np.ndarray, np.random.Generator], np.ndarray]

LOG_DOUBLE_FACTORIAL_CUTOFF = 150  # beyond this n!! overflows float64


def sample_ball(n: int, epsilon: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the n-ball of radius epsilon.

    Normalized-Gaussian radial construction: direction from a normalized
    standard normal vector, radius epsilon * U^(1/n). Exact for any n, unlike
    rejection sampling which collapses past n ~ 10.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if epsilon <= 0:
        raise ValueError(f"radius must be positive, got {epsilon}")
    direction = rng.standard_normal(n)
    norm = np.linalg.norm(direction)
    while norm == 0.0:  # probability zero, but keep the draw well defined
        direction = rng.standard_normal(n)
        norm = np.linalg.norm(direction)
    radius = epsilon * rng.uniform() ** (1.0 / n)
    return (radius / norm) * direction


def sample_ball_batch(
    m: int, n: int, epsilon: float, rng: np.random.Generator
) -> np.ndarray:
    """m independent uniform ball draws, one per row."""
    directions = rng.standard_normal((m, n))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = epsilon * rng.uniform(size=(m, 1)) ** (1.0 / n)
    return directions * (radii / norms)


def ball_volume_coeff(n: int) -> float:
    """Unit n-ball volume pi^(n/2) / Gamma(n/2 + 1)."""
    if n < 0:
        raise ValueError(f"dimension must be >= 0, got {n}")
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def log_double_factorial(n: int) -> float:
    """log(n!!) with n!! = n(n-2)(n-4)...; 0!! = (-1)!! = 1."""
    if n < -1:
        raise ValueError(f"double factorial undefined for {n}")
    total = 0.0
    k = n
    while k > 1:
        total += math.log(k)
        k -= 2
    return total


def double_factorial(n: int) -> float:
    if n > LOG_DOUBLE_FACTORIAL_CUTOFF:
        raise OverflowError(
            f"{n}!! overflows float64; use log_double_factorial instead"
        )
    result = 1
    k = n
    while k > 1:
        result *= k
        k -= 2
    return float(result)


def double_factorial_ratio(n: int) -> float:
    """n!!/(n-1)!!, evaluated in log space so large n cannot overflow."""
    if n <= LOG_DOUBLE_FACTORIAL_CUTOFF:
        return double_factorial(n) / double_factorial(n - 1)
    return math.exp(log_double_factorial(n) - log_double_factorial(n - 1))


def smoothing_lipschitz(n: int, subgrad_bound: float, epsilon: float) -> float:
    """Gradient Lipschitz constant kappa * (n!!/(n-1)!!) * C/epsilon.

    kappa = 2/pi for even n and 1 for odd n; equal to 2*c_{n-1}/c_n * C/epsilon
    with c_n the unit-ball volume. Grows like sqrt(n). Feed the result, plus any
    regularizer modulus, to the steplength policies as L.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if subgrad_bound <= 0 or epsilon <= 0:
        raise ValueError("subgradient bound and radius must be positive")
    kappa = 2.0 / math.pi if n % 2 == 0 else 1.0
    return kappa * double_factorial_ratio(n) * subgrad_bound / epsilon


@dataclass(frozen=True)
class BallDistribution:
    """Uniform distribution on the epsilon-ball in R^n."""

    n: int
    epsilon: float

    def __post_init__(self) -> None:
        if self.n < 1 or self.epsilon <= 0:
            raise ValueError("need n >= 1 and epsilon > 0")

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return sample_ball(self.n, self.epsilon, rng)


@dataclass(frozen=True)
class SmoothedOracle:
    """Ball-perturbed wrapper around a bounded-subgradient stochastic oracle.

    inner(x, rng) must return a subgradient sample of the integrand at x, valid
    on the epsilon-enlarged feasible set. When subgrad_bound is set, emitted
    directions are rescaled onto the ball of that radius; this is how the
    unbounded-tail oracles (Gaussian noise) are truncated to honor the bound.
    """

    inner: Oracle
    n: int
    epsilon: float
    subgrad_bound: float | None = None

    def perturbation(self, rng: np.random.Generator) -> np.ndarray:
        return sample_ball(self.n, self.epsilon, rng)


def smoothed_subgradient(
    oracle: SmoothedOracle, x: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Subgradient sample of the smoothed function at x.

    Draws z uniform on the epsilon-ball, queries the inner oracle at x + z, and
    truncates to the declared norm bound. Unbiased for the smoothed gradient up
    to the truncation tail.
    """
    z = oracle.perturbation(rng)
    g = np.asarray(oracle.inner(x + z, rng), dtype=float)
    if oracle.subgrad_bound is not None:
        norm = np.linalg.norm(g)
        if norm > oracle.subgrad_bound:
            g = g * (oracle.subgrad_bound / norm)
    return g


def smoothed_value_estimate(
    value_fn: Callable[[np.ndarray, np.random.Generator], float],
    x: np.ndarray,
    m: int,
    epsilon: float,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the smoothed value E[f(x+z)] and its standard error."""
    if m < 1:
        raise ValueError(f"sample count must be >= 1, got {m}")
    x = np.asarray(x, dtype=float)
    values = np.empty(m)
    for i in range(m):
        z = sample_ball(x.size, epsilon, rng)
        values[i] = value_fn(x + z, rng)
    stderr = float(values.std(ddof=1) / math.sqrt(m)) if m > 1 else float("inf")
    return float(values.mean()), stderr
