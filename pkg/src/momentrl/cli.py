"""Experiment runner: JSON config in, CSV artifacts and summary.json out.

Four experiments are dispatched by name:

  curse-demo    discounted LQR over sampled scalar systems; records how
                value/policy diffs and parameter counts scale with n
  lqr-infinite  the same discounted problem on the moment hierarchy,
                converging as the truncation order N grows
  lqr-finite    finite-horizon filtrated policy search on the LQR moment
                system (hierarchy table, per-order policies and profiles)
  bloch         two-axis pulse design on the Bloch moment system with a
                first-order seeding stage, plus sampled-ensemble evaluation

All numeric pipelines are deterministic, so reruns with the same config
produce byte-identical CSVs.  Wall-clock timings are reported in
summary.json only, keeping the CSV surface stable.  Output files are
written after the experiment finishes; a failed run leaves no partial
outputs behind.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ddp import GradientSearchConfig, SearchConfig, first_order_search
from .ensemble import excitation_metrics, simulate_bloch_ensemble
from .frl import FrlConfig, run_frl
from .ode import NumericalError, PolicyTable, TimeGrid
from .oracle import frl_infinite_demo, sampled_demo
from .systems import build_bloch, build_lqr

__all__ = [
    "ConfigError",
    "main",
    "resolve_config",
]


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configurations."""


# per-experiment keys: name -> (kind, default); kinds are checked by _coerce
_SPECS: dict[str, dict[str, tuple[str, object]]] = {
    "curse-demo": {
        "n_range": ("int_pair", (2, 20)),
        "rho": ("float", 2.5),
    },
    "lqr-infinite": {
        "N0": ("int", 2),
        "Nmax": ("int", 10),
        "rho": ("float", 2.5),
    },
    "lqr-finite": {
        "N0": ("int", 2),
        "Nmax": ("int", 10),
        "epsilon": ("float", 1e-8),
        "eta": ("eta", 1.0),
        "K": ("int", 1),
        "steps": ("int", 200),
        "T": ("float", 1.0),
        "damping": ("float", 0.35),
        "exact_row0": ("bool", False),
    },
    "bloch": {
        "N0": ("int", 2),
        "Nmax": ("int", 10),
        "epsilon": ("float", 1e-12),
        "eta": ("eta", None),
        "K": ("int", 80),
        "steps": ("int", 500),
        "T": ("float", 1.0),
        "delta": ("float", 0.4),
        "beta_count": ("int", 101),
        "damping": ("float", 0.35),
        "terminal_weight": ("float", 400.0),
    },
}

# the documented symmetry-breaking start of the bloch experiment: a plain
# rotation plus one full sine period on the second axis, refined by the
# first-order stage before any second-order pass
_BLOCH_SEED_SEARCH = GradientSearchConfig(max_iters=400, tolerance=2e-3)


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def _coerce(name: str, kind: str, value):
    is_bool = isinstance(value, bool)
    if kind == "int":
        _check(isinstance(value, int) and not is_bool, f"field {name} must be an integer")
        return int(value)
    if kind == "float":
        _check(isinstance(value, (int, float)) and not is_bool,
               f"field {name} must be a number")
        return float(value)
    if kind == "eta":
        if value is None:
            return math.inf
        _check(isinstance(value, (int, float)) and not is_bool,
               f"field {name} must be a positive number or null")
        return float(value)
    if kind == "bool":
        _check(is_bool, f"field {name} must be a boolean")
        return bool(value)
    if kind == "int_pair":
        _check(isinstance(value, (list, tuple)) and len(value) == 2
               and all(isinstance(v, int) and not isinstance(v, bool) for v in value),
               f"field {name} must be a pair of integers")
        return (int(value[0]), int(value[1]))
    raise AssertionError(f"unhandled kind {kind}")


def _validate_semantics(experiment: str, p: dict) -> None:
    if experiment == "curse-demo":
        lo, hi = p["n_range"]
        _check(lo >= 2, "n_range lower bound must be at least 2")
        _check(hi >= lo, "n_range must be increasing")
        _check(p["rho"] > 0.0, "rho must be positive")
    elif experiment == "lqr-infinite":
        _check(0 <= p["N0"] <= p["Nmax"], "need 0 <= N0 <= Nmax")
        _check(p["rho"] > 0.0, "rho must be positive")
    else:
        _check(0 <= p["N0"] <= p["Nmax"], "need 0 <= N0 <= Nmax")
        _check(p["epsilon"] > 0.0, "epsilon must be positive")
        _check(p["eta"] > 0.0, "eta must be positive")
        _check(p["K"] >= 1, "K must be at least 1")
        _check(p["steps"] >= 1, "steps must be at least 1")
        _check(p["T"] > 0.0, "T must be positive")
        _check(0.0 < p["damping"] <= 1.0, "damping must lie in (0, 1]")
        if experiment == "bloch":
            _check(0.0 < p["delta"] < 1.0, "delta must lie in (0, 1)")
            _check(p["beta_count"] >= 2, "beta_count must be at least 2")
            _check(p["terminal_weight"] > 0.0, "terminal_weight must be positive")


def resolve_config(raw, output_override: str | None = None):
    """Validate a parsed config and return (experiment, output_dir, params)."""
    _check(isinstance(raw, dict), "config must be a JSON object")
    _check("experiment" in raw, "missing field: experiment")
    experiment = raw["experiment"]
    _check(isinstance(experiment, str) and experiment in _SPECS,
           f"unknown experiment: {experiment!r} "
           f"(expected one of {', '.join(sorted(_SPECS))})")
    spec = _SPECS[experiment]
    known = set(spec) | {"experiment", "output_dir"}
    unknown = sorted(set(raw) - known)
    _check(not unknown, f"unknown config keys: {', '.join(unknown)}")
    output_dir = output_override if output_override is not None else raw.get("output_dir")
    _check(output_dir is not None, "missing field: output_dir")
    _check(isinstance(output_dir, str) and output_dir != "",
           "field output_dir must be a non-empty string")
    params = {}
    for name, (kind, default) in spec.items():
        params[name] = _coerce(name, kind, raw[name]) if name in raw else \
            (_coerce(name, kind, default) if default is not None or kind == "eta"
             else default)
    _validate_semantics(experiment, params)
    return experiment, output_dir, params


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _csv(header: tuple[str, ...], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _json_safe(value):
    if isinstance(value, float) and math.isinf(value):
        return None
    if isinstance(value, tuple):
        return list(value)
    return value


def _convergence_outputs(table, index_name_values):
    rows = [(index, r.value_diff, r.policy_diff, r.param_count)
            for index, r in zip(index_name_values, table.rows)]
    files = {"convergence.csv": _csv(("n_or_N", "value_diff", "policy_diff",
                                      "param_count"), rows)}
    return files


def _run_curse_demo(params):
    lo, hi = params["n_range"]
    started = time.perf_counter()
    table = sampled_demo(range(lo, hi + 1), rho=params["rho"])
    total = time.perf_counter() - started
    files = _convergence_outputs(table, [r.index for r in table.rows])
    diffs = [r.policy_diff for r in table.rows[1:]]
    summary_metrics = {
        "rows": len(table.rows),
        "min_policy_diff": min(diffs),
        "max_policy_diff": max(diffs),
        "param_count_final": table.rows[-1].param_count,
    }
    walls = {"total": round(total, 3),
             "per_index": {str(r.index): round(r.wall_time_s, 3)
                           for r in table.rows}}
    return files, summary_metrics, walls


def _run_lqr_infinite(params):
    started = time.perf_counter()
    table = frl_infinite_demo(range(params["N0"], params["Nmax"] + 1),
                              rho=params["rho"])
    total = time.perf_counter() - started
    files = _convergence_outputs(table, [r.index for r in table.rows])
    summary_metrics = {
        "rows": len(table.rows),
        "value_diff_final": table.rows[-1].value_diff,
        "policy_diff_final": table.rows[-1].policy_diff,
        "param_count_final": table.rows[-1].param_count,
    }
    walls = {"total": round(total, 3),
             "per_index": {str(r.index): round(r.wall_time_s, 3)
                           for r in table.rows}}
    return files, summary_metrics, walls


def _hierarchy_outputs(reports, grid, control_names):
    files = {}
    rows = [(r.order, r.iterations, r.cost, r.projection_error) for r in reports]
    files["hierarchy.csv"] = _csv(("N", "iterations", "cost", "projection_error"),
                                  rows)
    t = grid.nodes
    for r in reports:
        policy_rows = [(t[i], *r.policy.controls[i]) for i in range(t.size)]
        files[f"policy_N{r.order}.csv"] = _csv(("t", *control_names), policy_rows)
        profile_rows = [(t[i], r.profile[i]) for i in range(t.size)]
        files[f"value_profile_N{r.order}.csv"] = _csv(("t", "V"), profile_rows)
    return files


def _run_lqr_finite(params):
    grid = TimeGrid(0.0, params["T"], params["steps"])
    search = SearchConfig(eta=params["eta"], max_iters=params["K"],
                          damping=params["damping"])
    config = FrlConfig(
        model_builder=lambda N: build_lqr(N, exact_row0=params["exact_row0"]),
        search=search, grid=grid, N0=params["N0"], Nmax=params["Nmax"],
        epsilon=params["epsilon"])
    started = time.perf_counter()
    reports = run_frl(config)
    total = time.perf_counter() - started
    files = _hierarchy_outputs(reports, grid, ("u",))
    summary_metrics = {
        "orders": [r.order for r in reports],
        "costs": [r.cost for r in reports],
        "final_cost": reports[-1].cost,
        "final_projection_error": _json_safe(reports[-1].projection_error),
    }
    walls = {"total": round(total, 3),
             "per_hierarchy": {str(r.order): round(r.wall_time_s, 3)
                               for r in reports}}
    return files, summary_metrics, walls


def _run_bloch(params):
    grid = TimeGrid(0.0, params["T"], params["steps"])
    t = grid.nodes
    init = PolicyTable(grid, np.column_stack([
        np.full(grid.steps + 1, -2.0),
        2.0 * np.sin(2.0 * np.pi * t / params["T"]),
    ]))

    def builder(N):
        return build_bloch(N, params["delta"],
                           terminal_weight=params["terminal_weight"])

    started = time.perf_counter()
    seed_model = builder(params["N0"])
    seed = first_order_search(seed_model, init,
                              seed_model.initial_moments().values,
                              _BLOCH_SEED_SEARCH)
    seed_wall = time.perf_counter() - started
    search = SearchConfig(eta=params["eta"], max_iters=params["K"],
                          damping=params["damping"], converge_tol=1e-9)
    config = FrlConfig(model_builder=builder, search=search, grid=grid,
                       N0=params["N0"], Nmax=params["Nmax"],
                       epsilon=params["epsilon"], initial_policy=seed.policy)
    reports = run_frl(config)
    final = reports[-1]
    run = simulate_bloch_ensemble(final.policy, params["delta"],
                                  params["beta_count"], grid)
    metrics = excitation_metrics(run)
    total = time.perf_counter() - started

    radii = np.linalg.norm(run.states, axis=2)
    sphere_drift = float(np.max(np.abs(radii - 1.0)))
    moment_drift = 0.0
    for r in reports:
        norms = np.linalg.norm(r.trajectory.states, axis=1)
        moment_drift = max(moment_drift, float(np.max(np.abs(norms - norms[0]))))

    files = _hierarchy_outputs(reports, grid, ("u", "v"))
    final_rows = [(run.beta_samples[b], *run.final_states[b])
                  for b in range(run.beta_samples.size)]
    files["bloch_final.csv"] = _csv(("beta", "x1", "x2", "x3"), final_rows)
    mean_rows = [(t[i], metrics.mean_x1_vs_time[i]) for i in range(t.size)]
    files["bloch_mean_x1.csv"] = _csv(("t", "mean_x1"), mean_rows)
    trace_indices = np.unique(np.linspace(0, run.beta_samples.size - 1, 5)
                              .round().astype(int))
    trace_rows = []
    for b in trace_indices:
        beta = run.beta_samples[b]
        for i in range(t.size):
            trace_rows.append((t[i], beta, *run.states[b, i]))
    files["bloch_trajectory.csv"] = _csv(("t", "beta", "x1", "x2", "x3"),
                                         trace_rows)

    summary_metrics = {
        "mean_x1_final": metrics.mean_x1_final,
        "min_x1_final": metrics.min_x1_final,
        "final_cost": final.cost,
        "orders": [r.order for r in reports],
        "costs": [r.cost for r in reports],
        "sphere_drift_max": sphere_drift,
        "moment_norm_drift_max": moment_drift,
        "seed": {
            "iterations": seed.iterations,
            "cost": seed.cost,
            "stationarity": seed.stationarity,
            "converged": seed.converged,
        },
    }
    walls = {"total": round(total, 3), "seed": round(seed_wall, 3),
             "per_hierarchy": {str(r.order): round(r.wall_time_s, 3)
                               for r in reports}}
    return files, summary_metrics, walls


_RUNNERS = {
    "curse-demo": _run_curse_demo,
    "lqr-infinite": _run_lqr_infinite,
    "lqr-finite": _run_lqr_finite,
    "bloch": _run_bloch,
}


def _write_outputs(output_dir: Path, files: dict[str, str], summary: dict) -> None:
    output_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        for name, content in files.items():
            path = output_dir / name
            path.write_text(content)
            written.append(path)
        summary_path = output_dir / "summary.json"
        summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momentrl",
        description="Moment-space policy search experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    runner = sub.add_parser("run", help="run one experiment from a JSON config")
    runner.add_argument("--config", required=True, help="path to the JSON config")
    runner.add_argument("--output-dir", default=None,
                        help="override the config's output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        try:
            text = Path(args.config).read_text()
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}") from err
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config is not valid JSON: {err}") from err
        experiment, output_dir, params = resolve_config(raw, args.output_dir)
        try:
            Path(output_dir).mkdir(parents=True, exist_ok=True)
        except OSError as err:
            raise ConfigError(f"cannot create output_dir: {err}") from err
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    try:
        files, summary_metrics, walls = _RUNNERS[experiment](params)
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3

    summary = {
        "experiment": experiment,
        "version": __version__,
        "parameters": {k: _json_safe(v) for k, v in params.items()},
        "metrics": summary_metrics,
        "wall_time_s": walls,
    }
    _write_outputs(Path(output_dir), files, summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
