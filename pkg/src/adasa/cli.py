"""Command-line entry point: run a replicated experiment and emit CSV + metadata."""

from __future__ import annotations

import argparse
import math
import sys

from .harness import (
    PROBLEMS,
    SCHEMES,
    emit_csv,
    emit_metadata,
    parse_config_file,
    resolve_config,
    run_replications,
)

_FLOAT_KEYS = {"eta", "eps", "theta", "alpha", "gamma0"}
_INT_KEYS = {"n", "iters", "replications", "seed"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adasa",
        description=(
            "Replicated stochastic-approximation experiments with harmonic (hsa), "
            "recursive (rsa), and cascading (csa) steplength schemes. Flags left "
            "unset fall back to the config file, then to per-problem baselines "
            "(utility: n=20 iters=4000 eta=0.5 eps=0.5; bimatrix: n=20 iters=4000 "
            "eta=0.01 eps=0.2; network: n=5 iters=4000, constants estimated from "
            "the instance)."
        ),
    )
    parser.add_argument("--problem", choices=PROBLEMS, help="benchmark problem")
    parser.add_argument("--scheme", choices=SCHEMES, help="steplength scheme")
    parser.add_argument("--n", type=int, help="problem dimension (users/strategies)")
    parser.add_argument("--iters", type=int, help="iteration budget N per replication")
    parser.add_argument("--eta", type=float, help="strong-convexity regularization")
    parser.add_argument("--eps", type=float, help="smoothing ball radius")
    parser.add_argument("--theta", type=float, help="csa reduction factor (default 0.5)")
    parser.add_argument("--alpha", type=float, help="hsa steplength scale (default 1)")
    parser.add_argument(
        "--gamma0",
        type=float,
        help="initial steplength; rsa/csa derive one from the constants when unset",
    )
    parser.add_argument(
        "--replications", type=int, help="independent trajectories (default 50)"
    )
    parser.add_argument("--seed", type=int, help="base seed; replication r uses seed+r")
    parser.add_argument("--out", help="output CSV path (default sa_run.csv)")
    parser.add_argument(
        "--config", help="flat key=value file mirroring these flag names"
    )
    return parser


_STR_KEYS = {"problem", "scheme", "out"}


def _merge_settings(args: argparse.Namespace) -> dict:
    settings: dict = {}
    if args.config:
        for key, raw in parse_config_file(args.config).items():
            if key in _FLOAT_KEYS:
                settings[key] = float(raw)
            elif key in _INT_KEYS:
                settings[key] = int(raw)
            elif key in _STR_KEYS:
                settings[key] = raw
            else:
                raise SystemExit(f"error: unknown config key {key!r} in {args.config}")
    for key in (
        "problem",
        "scheme",
        "n",
        "iters",
        "eta",
        "eps",
        "theta",
        "alpha",
        "gamma0",
        "replications",
        "seed",
        "out",
    ):
        value = getattr(args, key)
        if value is not None:
            settings[key] = value
    return settings


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = _merge_settings(args)
    problem = settings.pop("problem", None)
    scheme = settings.pop("scheme", None)
    if problem is None or scheme is None:
        print("error: --problem and --scheme are required (flag or config file)", file=sys.stderr)
        return 2
    if "eps" in settings:
        settings["epsilon"] = settings.pop("eps")
    out = settings.pop("out", "sa_run.csv")
    config = resolve_config(problem, scheme, out=out, **settings)

    result = run_replications(config)
    emit_csv(result.trajectories, result.bound, config.out)
    meta_path = emit_metadata(result, config.out)

    print(f"problem={config.problem} scheme={config.scheme} n={config.n} "
          f"iters={config.iters} replications={config.replications} seed={config.seed}")
    print(f"reference residual {result.reference.grad_map_norm:.3e} "
          f"(converged={result.reference.converged})")
    print(f"terminal mean squared error: {result.terminal_errors.mean():.6e}")
    if config.replications >= 2:
        ci = result.terminal_ci()
        print(
            "terminal 90% CI (log-domain, shown as errors): "
            f"[{math.exp(ci.lower):.6e}, {math.exp(ci.upper):.6e}]"
        )
    print(f"wrote {config.out} and {meta_path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
