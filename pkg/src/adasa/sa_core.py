"""Projected stochastic gradient engine for minimization and saddle problems.

The engine is deliberately small: it threads a caller-owned RNG through a
sampled-gradient oracle, applies a steplength policy, projects, and records the
squared distance to a reference point before every update. All problem
structure lives in the oracle and the projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

Projection = Callable[[np.ndarray], np.ndarray]


class PolicyFailure(RuntimeError):
    """A steplength policy produced an unusable value."""


@dataclass
class SaRunRecord:
    """State of a run just before update k: steplength used and squared error."""

    k: int
    gamma: float
    squared_error: float
    bound: float = math.nan


@dataclass
class Trajectory:
    """Per-iteration records plus the post-final-step error."""

    records: list[SaRunRecord]
    terminal_squared_error: float
    final_point: np.ndarray
    clamped: bool = False

    @property
    def gammas(self) -> np.ndarray:
        return np.array([r.gamma for r in self.records])

    @property
    def squared_errors(self) -> np.ndarray:
        return np.array([r.squared_error for r in self.records])


@dataclass
class SaddlePoint:
    """Feasible primal/dual pair, each living on its own simplex."""

    x: np.ndarray
    y: np.ndarray

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])


def _check_finite(name: str, v: np.ndarray) -> None:
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")


def sa_step(
    x: np.ndarray,
    g: np.ndarray,
    gamma: float,
    proj: Projection | None,
) -> np.ndarray:
    """One projected gradient step proj(x - gamma*g)."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    _check_finite("iterate", x)
    _check_finite("gradient sample", g)
    if not math.isfinite(gamma) or gamma <= 0:
        raise ValueError(f"steplength must be positive and finite, got {gamma}")
    if x.shape != g.shape:
        raise ValueError(f"shape mismatch: x {x.shape} vs g {g.shape}")
    candidate = x - gamma * g
    return candidate if proj is None else proj(candidate)


def _next_gamma(policy) -> float:
    gamma = policy.next_gamma()
    if not math.isfinite(gamma) or gamma <= 0:
        raise PolicyFailure(f"policy produced gamma={gamma}")
    return gamma


def run_sa(
    oracle: Callable[[np.ndarray, np.random.Generator], np.ndarray],
    proj: Projection | None,
    policy,
    x0: np.ndarray,
    n_iters: int,
    reference: np.ndarray,
    rng: np.random.Generator,
) -> Trajectory:
    """Run n_iters projected SA steps, recording the pre-update error at each k.

    Record k holds the steplength gamma_k actually used and ||x_k - reference||^2;
    the error after the final update is stored separately on the trajectory.
    """
    if n_iters < 1:
        raise ValueError(f"iteration budget must be >= 1, got {n_iters}")
    x = np.array(x0, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if x.shape != reference.shape:
        raise ValueError(
            f"reference shape {reference.shape} does not match x0 {x.shape}"
        )
    _check_finite("x0", x)
    records: list[SaRunRecord] = []
    for k in range(n_iters):
        gamma = _next_gamma(policy)
        diff = x - reference
        records.append(SaRunRecord(k=k, gamma=gamma, squared_error=float(diff @ diff)))
        x = sa_step(x, oracle(x, rng), gamma, proj)
    diff = x - reference
    return Trajectory(
        records=records,
        terminal_squared_error=float(diff @ diff),
        final_point=x,
        clamped=bool(getattr(policy, "clamped", False)),
    )


def saddle_step(
    state: SaddlePoint,
    gx: np.ndarray,
    gy: np.ndarray,
    gamma: float,
) -> SaddlePoint:
    """Projected descent step in x and ascent step in y, both onto simplices.

    gx must be the sampled x-gradient and gy the sampled ascent direction for y
    (the y-part of the saddle operator already sign-flipped by the caller).
    """
    from .problems import project_simplex

    gx = np.asarray(gx, dtype=float)
    gy = np.asarray(gy, dtype=float)
    if gx.shape != state.x.shape or gy.shape != state.y.shape:
        raise ValueError(
            f"gradient shapes {gx.shape}/{gy.shape} do not match state "
            f"{state.x.shape}/{state.y.shape}"
        )
    _check_finite("gx", gx)
    _check_finite("gy", gy)
    if not math.isfinite(gamma) or gamma <= 0:
        raise ValueError(f"steplength must be positive and finite, got {gamma}")
    return SaddlePoint(
        x=project_simplex(state.x - gamma * gx),
        y=project_simplex(state.y + gamma * gy),
    )


def run_saddle_sa(
    oracle: Callable[
        [np.ndarray, np.ndarray, np.random.Generator],
        tuple[np.ndarray, np.ndarray],
    ],
    policy,
    x0: np.ndarray,
    y0: np.ndarray,
    n_iters: int,
    reference: np.ndarray,
    rng: np.random.Generator,
) -> Trajectory:
    """Saddle-point analogue of run_sa on the stacked pair z = (x, y).

    The oracle returns (gx, gy) with gy in ascent convention; errors are
    ||z_k - reference||^2 against the stacked regularized reference.
    """
    if n_iters < 1:
        raise ValueError(f"iteration budget must be >= 1, got {n_iters}")
    state = SaddlePoint(x=np.array(x0, dtype=float), y=np.array(y0, dtype=float))
    reference = np.asarray(reference, dtype=float)
    if reference.size != state.x.size + state.y.size:
        raise ValueError("reference must stack the x and y components")
    records: list[SaRunRecord] = []
    for k in range(n_iters):
        gamma = _next_gamma(policy)
        diff = state.stacked() - reference
        records.append(SaRunRecord(k=k, gamma=gamma, squared_error=float(diff @ diff)))
        gx, gy = oracle(state.x, state.y, rng)
        state = saddle_step(state, gx, gy, gamma)
    diff = state.stacked() - reference
    return Trajectory(
        records=records,
        terminal_squared_error=float(diff @ diff),
        final_point=state.stacked(),
        clamped=bool(getattr(policy, "clamped", False)),
    )
