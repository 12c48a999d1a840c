"""Command-line interface.

Subcommands:

``estimate FILE``
    Fit (mu, tau) to the values in FILE (one decimal per line, ``#``
    comments and blank lines allowed).
``oracle``
    Population reference tau for a noise law, sigma, n, and delta/z.
``simulate``
    Write a reproducible synthetic sample to a file.
``study``
    Run a Monte Carlo study described by a flat key=value spec file and
    write CSV and JSON reports.

Exit codes: 0 success, 1 computational failure, 2 user error (bad flags,
malformed input, out-of-domain parameters).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings

from . import harness, noise, oracle
from .solver import EstimatorConfig, fit


class UserError(Exception):
    """Input or usage problem; maps to exit code 2."""


def _fmt(value) -> str:
    """Text-format values: 12 significant digits for floats."""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _print_pairs(pairs) -> None:
    width = max(len(k) for k, _ in pairs)
    for key, value in pairs:
        print(f"{key.ljust(width)}  {_fmt(value)}")


def read_data_file(path) -> list[float]:
    """Parse the one-value-per-line data format, naming bad lines."""
    try:
        fh = open(path, "r")
    except OSError as exc:
        raise UserError(f"cannot read {path}: {exc.strerror or exc}") from None
    values = []
    with fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                value = float(text)
            except ValueError:
                raise UserError(
                    f"{path}: line {lineno}: {text!r} is not a decimal number"
                ) from None
            if not math.isfinite(value):
                raise UserError(f"{path}: line {lineno}: non-finite value {text!r}")
            values.append(value)
    if not values:
        raise UserError(f"{path}: no data values found")
    return values


def _estimator_config(args) -> EstimatorConfig:
    try:
        return EstimatorConfig(delta=args.delta, z_override=args.z)
    except ValueError as exc:
        raise UserError(str(exc)) from None


def cmd_estimate(args) -> int:
    values = read_data_file(args.input)
    cfg = _estimator_config(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = fit(values, cfg)
    notes = [str(w.message) for w in caught]
    if args.format == "json":
        payload = {
            "n": len(values),
            "z": cfg.z,
            "mu_hat": result.mu_hat,
            "tau_hat": result.tau_hat,
            "iterations": result.iterations,
            "grad_norm": result.grad_norm,
            "converged": result.converged,
            "degenerate": result.degenerate,
            "warnings": notes,
        }
        print(json.dumps(payload, sort_keys=True, separators=(",", ":")))
    else:
        _print_pairs(
            [
                ("n", len(values)),
                ("z", cfg.z),
                ("mu_hat", result.mu_hat),
                ("tau_hat", result.tau_hat),
                ("iterations", result.iterations),
                ("grad_norm", result.grad_norm),
                ("converged", result.converged),
                ("degenerate", result.degenerate),
            ]
        )
        for note in notes:
            print(f"warning: {note}", file=sys.stderr)
    return 0 if result.converged else 1


def cmd_oracle(args) -> int:
    model = _parse_noise_arg(args.noise)
    cfg = _estimator_config(args)
    try:
        sol = oracle.tau_star(model, args.sigma, args.n, cfg.z)
    except ValueError as exc:
        raise UserError(str(exc)) from None
    _print_pairs(
        [
            ("noise", noise.law_label(model)),
            ("sigma", float(args.sigma)),
            ("n", args.n),
            ("z", cfg.z),
            ("tau_star", sol.tau_star),
            ("sigma_tau_star_sq", sol.sigma_tau_star_sq),
            ("tau_sq_lower_bound", sol.lower_bound_sq),
            ("tau_sq_upper_bound", sol.upper_bound_sq),
            ("residual", sol.residual),
        ]
    )
    return 0


def cmd_simulate(args) -> int:
    model = _parse_noise_arg(args.noise)
    try:
        values = noise.sample(model, args.sigma, args.n, args.mu, args.seed)
    except ValueError as exc:
        raise UserError(str(exc)) from None
    try:
        with open(args.out, "w") as fh:
            for v in values:
                # plain-float repr round-trips exactly and parses back
                fh.write(f"{float(v)!r}\n")
    except OSError as exc:
        raise UserError(f"cannot write {args.out}: {exc.strerror or exc}") from None
    return 0


def _parse_noise_arg(text) -> noise.NoiseModel:
    try:
        return noise.parse_noise(text)
    except ValueError as exc:
        raise UserError(str(exc)) from None


_STUDY_KEYS = (
    "noise",
    "sigma",
    "mu",
    "n_grid",
    "delta",
    "replications",
    "seed",
    "estimators",
    "z",
    "study",
)


def read_study_spec(path) -> tuple[harness.StudySpec, str]:
    """Parse the flat key=value study format; returns (spec, study kind)."""
    try:
        fh = open(path, "r")
    except OSError as exc:
        raise UserError(f"cannot read {path}: {exc.strerror or exc}") from None
    raw = {}
    with fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            key, sep, value = text.partition("=")
            if not sep:
                raise UserError(f"{path}: line {lineno}: expected key = value, got {text!r}")
            key = key.strip()
            value = value.strip()
            if key not in _STUDY_KEYS:
                raise UserError(
                    f"{path}: line {lineno}: unknown key {key!r}; "
                    f"expected one of {', '.join(_STUDY_KEYS)}"
                )
            if key in raw:
                raise UserError(f"{path}: line {lineno}: duplicate key {key!r}")
            raw[key] = (value, lineno)

    def take(key, default=None):
        if key in raw:
            return raw.pop(key)[0]
        return default

    def bad(key, lineno, detail):
        raise UserError(f"{path}: line {lineno}: bad value for {key}: {detail}")

    if "noise" not in raw:
        raise UserError(f"{path}: missing required key 'noise'")
    if "n_grid" not in raw:
        raise UserError(f"{path}: missing required key 'n_grid'")
    noise_text, noise_line = raw.pop("noise")
    try:
        model = noise.parse_noise(noise_text)
    except ValueError as exc:
        bad("noise", noise_line, exc)
    grid_text, grid_line = raw.pop("n_grid")
    try:
        n_grid = tuple(int(part.strip()) for part in grid_text.split(",") if part.strip())
    except ValueError:
        bad("n_grid", grid_line, f"{grid_text!r} is not a comma-separated integer list")
    if not n_grid:
        bad("n_grid", grid_line, "empty grid")

    def take_float(key, default):
        if key not in raw:
            return default
        value, lineno = raw.pop(key)
        try:
            return float(value)
        except ValueError:
            bad(key, lineno, f"{value!r} is not a number")

    def take_int(key, default):
        if key not in raw:
            return default
        value, lineno = raw.pop(key)
        try:
            return int(value)
        except ValueError:
            bad(key, lineno, f"{value!r} is not an integer")

    sigma = take_float("sigma", 1.0)
    mu_true = take_float("mu", 0.0)
    delta = take_float("delta", 0.05)
    replications = take_int("replications", 100)
    seed = take_int("seed", 0)
    z_override = take_float("z", None)
    kind = "deviation"
    if "study" in raw:
        kind, kind_line = raw.pop("study")
        if kind not in ("deviation", "adaptivity", "both"):
            bad("study", kind_line, f"expected deviation, adaptivity, or both, got {kind!r}")
    estimators = ("penalized_ph", "sample_mean")
    if "estimators" in raw:
        est_text, est_line = raw.pop("estimators")
        estimators = tuple(part.strip() for part in est_text.split(",") if part.strip())
        if not estimators:
            bad("estimators", est_line, "empty list")
    try:
        spec = harness.StudySpec(
            noise=model,
            n_grid=n_grid,
            sigma=sigma,
            mu_true=mu_true,
            delta=delta,
            replications=replications,
            base_seed=seed,
            estimators=estimators,
            z_override=z_override,
        )
    except ValueError as exc:
        raise UserError(f"{path}: {exc}") from None
    return spec, kind


def cmd_study(args) -> int:
    spec, kind = read_study_spec(args.spec)
    try:
        if kind == "deviation":
            result = harness.run_deviation_study(spec)
        elif kind == "adaptivity":
            result = harness.run_tau_adaptivity_study(spec)
        else:
            if "penalized_ph" not in spec.estimators:
                raise UserError(
                    "study = both requires 'penalized_ph' among the estimators"
                )
            result = harness.merge_adaptivity(
                harness.run_deviation_study(spec),
                harness.run_tau_adaptivity_study(spec),
            )
    except ValueError as exc:
        raise UserError(str(exc)) from None
    try:
        harness.write_csv(result, args.out_csv)
        harness.write_json(result, args.out_json)
    except OSError as exc:
        raise UserError(f"cannot write output: {exc}") from None
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="autohuber",
        description="Self-tuning pseudo-Huber mean estimation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_est = sub.add_parser("estimate", help="fit (mu, tau) to a data file")
    p_est.add_argument("input", help="data file, one decimal per line")
    p_est.add_argument("--delta", type=float, default=0.05, help="confidence level")
    p_est.add_argument("--z", type=float, default=None, help="override the adjustment factor")
    p_est.add_argument("--format", choices=("text", "json"), default="text")
    p_est.set_defaults(func=cmd_estimate)

    p_orc = sub.add_parser("oracle", help="population reference tau for a noise law")
    p_orc.add_argument("--noise", required=True, help="law[:key=value,...]")
    p_orc.add_argument("--sigma", type=float, default=1.0)
    p_orc.add_argument("--n", type=int, required=True)
    p_orc.add_argument("--delta", type=float, default=0.05)
    p_orc.add_argument("--z", type=float, default=None)
    p_orc.set_defaults(func=cmd_oracle)

    p_sim = sub.add_parser("simulate", help="write a reproducible synthetic sample")
    p_sim.add_argument("--noise", required=True, help="law[:key=value,...]")
    p_sim.add_argument("--sigma", type=float, default=1.0)
    p_sim.add_argument("--mu", type=float, default=0.0)
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_stu = sub.add_parser("study", help="run a Monte Carlo study from a spec file")
    p_stu.add_argument("--spec", required=True, help="flat key = value study file")
    p_stu.add_argument("--out-csv", required=True)
    p_stu.add_argument("--out-json", required=True)
    p_stu.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UserError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # computational failure
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
