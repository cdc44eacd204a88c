"""Replication harness: configuration, replicated runs, CIs, CSV and metadata.

A run resolves a problem instance and its constants from the seed, computes one
shared reference solution, executes `replications` independent SA trajectories
(replication r uses seed base_seed + r), and aggregates per-iteration means,
log-domain confidence intervals, and the scheme's theoretical bound curve.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import bounds as bounds_mod
from .problems import (
    BimatrixProblem,
    NetworkProblem,
    Reference,
    UtilityProblem,
    project_simplex,
    saa_reference,
)
from .sa_core import Trajectory, run_sa, run_saddle_sa
from .smoothing import SmoothedOracle, smoothed_subgradient, smoothing_lipschitz
from .steplength import CsaParams, CsaPolicy, HsaPolicy, RsaPolicy, csa_schedule

PROBLEMS = ("utility", "bimatrix", "network")
SCHEMES = ("hsa", "rsa", "csa")

# independent streams for problem generation, pilot estimation, and reference
_TAG_PROBLEM, _TAG_PILOT, _TAG_REFERENCE = 101, 102, 103

LOG_FLOOR = 1e-300  # squared errors can be exactly zero (vertex solutions)

PROBLEM_DEFAULTS: dict[str, dict[str, float | int]] = {
    "utility": {"n": 20, "iters": 4000, "eta": 0.5, "epsilon": 0.5},
    "bimatrix": {"n": 20, "iters": 4000, "eta": 0.01, "epsilon": 0.2},
    "network": {"n": 5, "iters": 4000, "eta": 0.5, "epsilon": 0.5},
}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    scheme: str
    n: int
    iters: int
    eta: float
    epsilon: float
    theta: float = 0.5
    alpha: float = 1.0
    gamma0: float | None = None
    replications: int = 50
    seed: int = 0
    out: str = "sa_run.csv"
    saa_samples: int = 100_000
    pieces: int = 5

    def __post_init__(self) -> None:
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1 (>= 2 for CIs)")
        if self.iters < 1:
            raise ValueError("iteration budget must be >= 1")


def resolve_config(problem: str, scheme: str, **overrides) -> ExperimentConfig:
    """Config with per-problem baseline defaults; explicit overrides win."""
    if problem not in PROBLEM_DEFAULTS:
        raise ValueError(f"unknown problem {problem!r}")
    merged: dict = dict(PROBLEM_DEFAULTS[problem])
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(problem=problem, scheme=scheme, **merged)


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float
    upper: float
    level: float = 0.90
    log_domain: bool = False

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)


def confidence_interval(
    samples: Sequence[float], level: float = 0.90, log_domain: bool = False
) -> ConfidenceInterval:
    """Student-t interval mean +/- t_{(1+level)/2, m-1} * s/sqrt(m).

    With log_domain the interval is computed on log(samples) and reported in
    the log domain; nonpositive samples are rejected there.
    """
    data = np.asarray(samples, dtype=float)
    if data.size < 2:
        raise ValueError("need at least 2 samples for a confidence interval")
    if log_domain:
        if np.any(data <= 0.0):
            raise ValueError("log-domain intervals need strictly positive samples")
        data = np.log(data)
    center = float(data.mean())
    half = float(
        stats.t.ppf(0.5 * (1.0 + level), data.size - 1)
        * data.std(ddof=1)
        / math.sqrt(data.size)
    )
    return ConfidenceInterval(center - half, center + half, level, log_domain)


# ---------------------------------------------------------------------------
# problem setup


@dataclass
class RunSetup:
    kind: str  # "min" | "saddle"
    problem: object
    oracle: Callable
    proj: Callable | None
    x0: np.ndarray
    y0: np.ndarray | None
    constants: dict[str, float]


def _setup_utility(config: ExperimentConfig) -> RunSetup:
    problem = UtilityProblem.from_seed(
        config.n,
        config.eta,
        config.epsilon,
        pieces=config.pieces,
        seed=np.random.default_rng([config.seed, _TAG_PROBLEM]),
    )
    pilot_rng = np.random.default_rng([config.seed, _TAG_PILOT])
    subgrad_bound = problem.estimate_subgradient_bound(pilot_rng)
    smoothed = SmoothedOracle(
        inner=problem.oracle, n=config.n, epsilon=config.epsilon, subgrad_bound=subgrad_bound
    )
    oracle = lambda x, rng: smoothed_subgradient(smoothed, x, rng)
    # start at a vertex: initial squared error ~1 on the regularized problem,
    # the level the reported experiments start from
    x0 = np.zeros(config.n)
    x0[-1] = 1.0
    nu2 = _pilot_noise_bound(lambda rng: oracle(x0, rng), pilot_rng)
    lip = smoothing_lipschitz(config.n, subgrad_bound, config.epsilon) + config.eta
    constants = {
        "C": subgrad_bound,
        "nu2": nu2,
        "lip": lip,
        "eta": config.eta,
        "d2": 2.0,
        "e0": 2.0,
    }
    return RunSetup("min", problem, oracle, project_simplex, x0, None, constants)


def _setup_bimatrix(config: ExperimentConfig) -> RunSetup:
    problem = BimatrixProblem(n=config.n, eta=config.eta, epsilon=config.epsilon)
    oracle = problem.run_oracle()
    pilot_rng = np.random.default_rng([config.seed, _TAG_PILOT])
    x0 = np.full(config.n, 1.0 / config.n)
    nu2 = _pilot_noise_bound(
        lambda rng: np.concatenate(oracle(x0, x0, rng)), pilot_rng
    )
    norms = [
        float(np.linalg.norm(np.concatenate(oracle(x0, x0, pilot_rng))))
        for _ in range(2_000)
    ]
    constants = {
        "C": float(np.percentile(norms, 99.9) * 1.25),
        "nu2": nu2,
        "lip": problem.lipschitz(),
        "eta": config.eta,
        "d2": problem.diameter_squared(),
        "e0": problem.diameter_squared(),
    }
    return RunSetup("saddle", problem, oracle, None, x0, x0.copy(), constants)


def _setup_network(config: ExperimentConfig) -> RunSetup:
    problem = NetworkProblem.from_seed(
        config.n, "c3", seed=np.random.default_rng([config.seed, _TAG_PROBLEM])
    )
    consts = problem.constants()
    caps = problem.user_caps()
    # sup ||grad F||: sqrt(n)*k_max for the utility part, 2*lambda_max*||x|| for
    # the congestion part with ||x|| <= ||caps||
    two_lambda_max = consts["lip"] - problem.k_range[1]
    grad_bound = math.sqrt(config.n) * problem.k_range[1] + two_lambda_max * float(
        np.linalg.norm(caps)
    )
    constants = {
        "C": grad_bound,
        "nu2": consts["nu2"],
        "lip": consts["lip"],
        "eta": consts["eta"],
        "d2": consts["d2"],
        "e0": consts["d2"],
    }
    return RunSetup(
        "min",
        problem,
        problem.oracle,
        problem.projection(),
        np.zeros(config.n),
        None,
        constants,
    )


def _pilot_noise_bound(
    sampler: Callable[[np.random.Generator], np.ndarray],
    rng: np.random.Generator,
    pilot_size: int = 10_000,
    inflation: float = 1.5,
) -> float:
    draws = np.stack([sampler(rng) for _ in range(pilot_size)])
    center = draws.mean(axis=0)
    return float(((draws - center) ** 2).sum(axis=1).mean() * inflation)


_SETUPS = {
    "utility": _setup_utility,
    "bimatrix": _setup_bimatrix,
    "network": _setup_network,
}


def build_setup(config: ExperimentConfig) -> RunSetup:
    return _SETUPS[config.problem](config)


# ---------------------------------------------------------------------------
# steplength policy and bound construction


def make_policy(config: ExperimentConfig, constants: dict[str, float]):
    eta, lip, nu2 = constants["eta"], constants["lip"], constants["nu2"]
    if config.scheme == "hsa":
        return HsaPolicy(config.alpha)
    if config.scheme == "rsa":
        c = eta / 2.0
        if config.gamma0 is not None:
            gamma0 = min(config.gamma0, (1.0 - 1e-12) / c)
        else:
            # scale e0 down when eta*e0/(2 nu2) exceeds 1/L (beta-scaling keeps
            # the sequence optimal); boundary value 1/L itself is admissible
            gamma0 = min(eta * constants["e0"] / (2.0 * nu2), 1.0 / lip)
        return RsaPolicy(gamma0, c)
    gamma_init = config.gamma0 if config.gamma0 is not None else 1.0 / lip
    gamma_init = min(gamma_init, (1.0 - 1e-9) * 2.0 / lip)
    params = CsaParams(
        gamma_init=gamma_init,
        theta=config.theta,
        eta=eta,
        lip=lip,
        nu2=nu2,
        d2=constants["d2"],
    )
    return CsaPolicy(params)


def bound_trajectory(
    config: ExperimentConfig, constants: dict[str, float], gammas: np.ndarray
) -> np.ndarray:
    """Scheme's theoretical bound per iteration; HSA has no published formula."""
    if config.scheme == "rsa":
        return bounds_mod.rsa_bound_trajectory(
            gammas, constants["eta"], constants["nu2"]
        )
    if config.scheme == "csa":
        gamma_init = config.gamma0 if config.gamma0 is not None else 1.0 / constants["lip"]
        gamma_init = min(gamma_init, (1.0 - 1e-9) * 2.0 / constants["lip"])
        params = CsaParams(
            gamma_init=gamma_init,
            theta=config.theta,
            eta=constants["eta"],
            lip=constants["lip"],
            nu2=constants["nu2"],
            d2=constants["d2"],
        )
        schedule = csa_schedule(params, config.iters)
        bp = bounds_mod.BoundParams(
            eta=constants["eta"],
            lip=constants["lip"],
            nu2=constants["nu2"],
            e0=constants["e0"],
            d2=constants["d2"],
        )
        return bounds_mod.csa_bound_trajectory(schedule, bp, config.iters)
    return np.full(len(gammas), math.nan)


# ---------------------------------------------------------------------------
# replications


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trajectories: list[Trajectory]
    gammas: np.ndarray
    bound: np.ndarray
    mean_sq_error: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    terminal_errors: np.ndarray
    constants: dict[str, float]
    reference: Reference
    floored_zeros: bool

    @property
    def terminal_mean(self) -> float:
        return float(self.terminal_errors.mean())

    def terminal_ci(self, level: float = 0.90) -> ConfidenceInterval:
        return confidence_interval(
            np.maximum(self.terminal_errors, LOG_FLOOR), level=level, log_domain=True
        )


def _log_ci_columns(
    errors: np.ndarray, level: float
) -> tuple[np.ndarray, np.ndarray, bool]:
    reps, n_iters = errors.shape
    lo = np.full(n_iters, math.nan)
    hi = np.full(n_iters, math.nan)
    floored = bool(np.any(errors < LOG_FLOOR))
    if reps < 2:
        return lo, hi, floored
    logs = np.log(np.maximum(errors, LOG_FLOOR))
    center = logs.mean(axis=0)
    half = (
        stats.t.ppf(0.5 * (1.0 + level), reps - 1)
        * logs.std(axis=0, ddof=1)
        / math.sqrt(reps)
    )
    return center - half, center + half, floored


def run_replications(
    config: ExperimentConfig,
    reference: Reference | None = None,
    setup: RunSetup | None = None,
    ci_level: float = 0.90,
) -> ExperimentResult:
    """Execute `config.replications` independent trajectories and aggregate.

    The reference solution is computed once (or injected, e.g. to share across
    the schemes being compared) and reused by every replication.
    """
    setup = setup if setup is not None else build_setup(config)
    if reference is None:
        reference = saa_reference(
            setup.problem,
            sample_size=config.saa_samples,
            seed=np.random.default_rng([config.seed, _TAG_REFERENCE]),
        )
    trajectories: list[Trajectory] = []
    for r in range(config.replications):
        rng = np.random.default_rng(config.seed + r)
        policy = make_policy(config, setup.constants)
        try:
            if setup.kind == "saddle":
                traj = run_saddle_sa(
                    setup.oracle,
                    policy,
                    setup.x0,
                    setup.y0,
                    config.iters,
                    reference.point,
                    rng,
                )
            else:
                traj = run_sa(
                    setup.oracle,
                    setup.proj,
                    policy,
                    setup.x0,
                    config.iters,
                    reference.point,
                    rng,
                )
        except Exception as exc:
            raise RuntimeError(
                f"replication {r} (seed {config.seed + r}) failed: {exc}"
            ) from exc
        trajectories.append(traj)
    gammas = trajectories[0].gammas
    errors = np.stack([t.squared_errors for t in trajectories])
    bound = bound_trajectory(config, setup.constants, gammas)
    for traj in trajectories:
        for rec, b in zip(traj.records, bound):
            rec.bound = float(b)
    ci_lo, ci_hi, floored = _log_ci_columns(errors, ci_level)
    return ExperimentResult(
        config=config,
        trajectories=trajectories,
        gammas=gammas,
        bound=bound,
        mean_sq_error=errors.mean(axis=0),
        ci_lo=ci_lo,
        ci_hi=ci_hi,
        terminal_errors=np.array([t.terminal_squared_error for t in trajectories]),
        constants=setup.constants,
        reference=reference,
        floored_zeros=floored,
    )


# ---------------------------------------------------------------------------
# output


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def emit_csv(
    trajectories: Sequence[Trajectory],
    bounds: Sequence[float],
    path: str,
    ci_level: float = 0.90,
) -> None:
    """Write `k,gamma,mean_sq_error,ci_lo,ci_hi,theory_bound`, one row per
    iteration; 17 significant digits so values round-trip bit-exactly."""
    if not trajectories:
        raise ValueError("no trajectories to emit")
    n_iters = len(trajectories[0].records)
    if any(len(t.records) != n_iters for t in trajectories):
        raise ValueError("trajectories have mismatched lengths")
    bounds = np.asarray(bounds, dtype=float)
    if bounds.size != n_iters:
        raise ValueError(
            f"bounds length {bounds.size} does not match trajectory length {n_iters}"
        )
    errors = np.stack([t.squared_errors for t in trajectories])
    mean = errors.mean(axis=0)
    ci_lo, ci_hi, _ = _log_ci_columns(errors, ci_level)
    gammas = trajectories[0].gammas
    lines = ["k,gamma,mean_sq_error,ci_lo,ci_hi,theory_bound"]
    for k in range(n_iters):
        lines.append(
            f"{k},{_fmt(gammas[k])},{_fmt(mean[k])},"
            f"{_fmt(ci_lo[k])},{_fmt(ci_hi[k])},{_fmt(bounds[k])}"
        )
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def emit_metadata(result: ExperimentResult, csv_path: str) -> str:
    """Sidecar JSON next to the CSV with resolved parameters and constants."""
    meta_path = csv_path + ".meta.json"
    terminal_ci = (
        result.terminal_ci() if result.config.replications >= 2 else None
    )
    payload = {
        "config": asdict(result.config),
        "constants": result.constants,
        "reference": {
            "grad_map_norm": result.reference.grad_map_norm,
            "converged": result.reference.converged,
            "iterations": result.reference.iterations,
        },
        "terminal_mean_sq_error": float(result.terminal_errors.mean()),
        "terminal_log_ci": (
            [terminal_ci.lower, terminal_ci.upper] if terminal_ci else None
        ),
        "floored_zero_errors": result.floored_zeros,
        "clamped_steplengths": any(t.clamped for t in result.trajectories),
        "rng": "numpy PCG64 (default_rng); normals via ziggurat; "
        "replication r seeds base_seed + r",
    }
    with open(meta_path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return meta_path


def parse_config_file(path: str) -> dict[str, str]:
    """Flat key=value file mirroring the CLI flag names; # starts a comment."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out
