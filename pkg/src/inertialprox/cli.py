"""Experiment harness: JSON config -> runs -> CSV traces + summary.

Subcommands:

    inertialprox run <config.json> [--output-dir DIR]
    inertialprox check-conditions <config.json>
    inertialprox gen-instance <config.json> -o <file.npz>

Config parsing is strict: unknown keys are fatal (a silently ignored typo in
an alpha/beta field would invalidate a comparison), every omitted key gets
an explicit default, and the fully resolved config is echoed into each trace
header so a run can be replayed from its own output. The output directory
can be overridden with the INERTIALPROX_OUTDIR environment variable.
"""

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import (ASYNC_PARALLEL, MODES, SEQUENTIAL, SYNC_PARALLEL,
                   SCHEDULE_KINDS, RunConfig, Schedule)
from .diagnostics import REGIMES, MoreauConfig, check_parameter_conditions, moreau_grad_norm
from .optimizer import (DELAY_KINDS, DELAY_NONE, DELAY_OBSERVED, DelayModel,
                        DivergenceError, run_sequential)
from .parallel import run_async, run_sync
from .problems import (generate_blr_synthetic, generate_phase_retrieval,
                       generate_smooth_synthetic, QuadraticInstance,
                       load_instance, save_instance)
from .traceio import write_trace_csv

OUTDIR_ENV = "INERTIALPROX_OUTDIR"

PROBLEMS = ("phase_retrieval", "smooth_synthetic", "blr_synthetic", "quadratic")


class ConfigError(ValueError):
    pass


# key -> (default, validator). Validators raise ConfigError on bad values.
def _enum(options):
    def check(key, v):
        if v not in options:
            raise ConfigError(f"{key}: invalid value {v!r}; valid options: {', '.join(map(str, options))}")
        return v
    return check


def _typed(py_type, cond=None, desc=""):
    def check(key, v):
        if py_type is float and isinstance(v, int):
            v = float(v)
        if not isinstance(v, py_type) or isinstance(v, bool) and py_type is not bool:
            raise ConfigError(f"{key}: expected {py_type.__name__}, got {type(v).__name__}")
        if cond is not None and not cond(v):
            raise ConfigError(f"{key}: value {v!r} must satisfy {desc}")
        return v
    return check


def _optional(inner):
    def check(key, v):
        return None if v is None else inner(key, v)
    return check


def _number_list(key, v):
    if not isinstance(v, list) or not v or not all(isinstance(x, (int, float)) for x in v):
        raise ConfigError(f"{key}: expected a nonempty list of numbers")
    return list(v)


_pos_int = _typed(int, lambda v: v >= 1, ">= 1")
_nonneg_int = _typed(int, lambda v: v >= 0, ">= 0")
_pos_float = _typed(float, lambda v: v > 0, "> 0")
_nonneg_float = _typed(float, lambda v: v >= 0, ">= 0")

_SCHEMA = {
    "label": ("run", _typed(str)),
    "problem": (None, _enum(PROBLEMS)),
    "m": (2000, _pos_int),
    "d": (50, _pos_int),
    "s": (8, _pos_int),
    "t": (8, _pos_int),
    "classes": (4, _typed(int, lambda v: v >= 2, ">= 2")),
    "rank": (2, _pos_int),
    "lam": (1e-3, _nonneg_float),
    "dim": (10, _pos_int),
    "instance_seed": (0, _nonneg_int),
    "K": (800, _pos_int),
    "batch_size": (100, _pos_int),
    "schedule": ("diminishing_sqrt", _enum(SCHEDULE_KINDS)),
    "alpha": (1e-3, _pos_float),
    "beta": (2.0, _nonneg_float),
    "beta_cap": (0.9, _typed(float, lambda v: 0 <= v < 1, "in [0, 1)")),
    "shift": (1, _pos_int),
    "epoch_based": (True, _typed(bool)),
    "beta_sweep": (None, _optional(_number_list)),
    "mode": (SEQUENTIAL, _enum(MODES)),
    "workers": (0, _nonneg_int),
    "worker_sweep": (None, _optional(_number_list)),
    "delay": ("none", _enum(DELAY_KINDS)),
    "tau": (0, _nonneg_int),
    "delay_probs": (None, _optional(_number_list)),
    "tau_max_discard": (None, _optional(_nonneg_int)),
    "seed": (0, _nonneg_int),
    "repeats": (1, _pos_int),
    "objective_every": (0, _nonneg_int),
    "output_dir": ("runs", _typed(str)),
    "instance_file": (None, _optional(_typed(str))),
    "gradient_cost_ms": (0.0, _nonneg_float),
    "rho": (None, _optional(_pos_float)),
    "rho_bar": (None, _optional(_pos_float)),
    "check_regime": (None, _optional(_enum(REGIMES))),
    "moreau": (False, _typed(bool)),
    "moreau_budget": (500, _pos_int),
}


@dataclass
class ExperimentConfig:
    resolved: dict
    defaulted: list = field(default_factory=list)

    def __getitem__(self, key):
        return self.resolved[key]


def parse_config(text):
    """Parse and validate a JSON experiment config; defaults are recorded."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"malformed config: {e.msg} at line {e.lineno} column {e.colno}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(_SCHEMA))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    resolved, defaulted = {}, []
    for key, (default, validator) in _SCHEMA.items():
        if key in raw:
            resolved[key] = validator(key, raw[key])
        else:
            resolved[key] = default
            defaulted.append(key)
    if resolved["problem"] is None:
        raise ConfigError("missing required key 'problem'")
    mode = resolved["mode"]
    if mode != SEQUENTIAL and resolved["workers"] < 1 and not resolved["worker_sweep"]:
        raise ConfigError(f"mode {mode} needs 'workers' >= 1 or a 'worker_sweep'")
    if mode == ASYNC_PARALLEL and resolved["delay"] not in (DELAY_NONE, DELAY_OBSERVED):
        raise ConfigError("async runs observe real delays; use delay 'observed' (or omit)")
    return ExperimentConfig(resolved=resolved, defaulted=defaulted)


def load_config(path):
    return parse_config(Path(path).read_text())


def build_instance(cfg: ExperimentConfig):
    c = cfg.resolved
    if c["instance_file"] is not None:
        instance = load_instance(c["instance_file"])
        if instance.kind != c["problem"]:
            raise ConfigError(
                f"instance_file holds a {instance.kind!r} instance, config says {c['problem']!r}")
        return instance
    kind = c["problem"]
    if kind == "phase_retrieval":
        return generate_phase_retrieval(c["m"], c["d"], c["instance_seed"])
    if kind == "smooth_synthetic":
        return generate_smooth_synthetic(c["m"], c["d"], c["instance_seed"])
    if kind == "blr_synthetic":
        return generate_blr_synthetic(c["m"], c["s"], c["t"], c["classes"],
                                      c["rank"], c["lam"], c["instance_seed"])
    rng = np.random.default_rng(c["instance_seed"])
    diag = rng.uniform(0.5, 2.0, size=c["dim"])
    return QuadraticInstance(diag)


def _build_schedule(c, beta):
    try:
        return Schedule(
            kind=c["schedule"],
            alpha=c["alpha"],
            beta=beta,
            beta_cap=c["beta_cap"],
            horizon=c["K"] if c["schedule"] in ("fixed_horizon", "momentum_coupled") else None,
            shift=c["shift"] if c["schedule"] == "diminishing_shifted" else None,
            epoch_based=c["epoch_based"],
        )
    except ValueError as e:
        raise ConfigError(f"invalid schedule parameters: {e}") from e


def _build_delay(c, mode):
    if mode == ASYNC_PARALLEL:
        return DelayModel.observed()
    kind = c["delay"]
    if kind == "none":
        return DelayModel.none()
    if kind == "fixed":
        return DelayModel.fixed(c["tau"])
    if kind == "static":
        if c["delay_probs"] is not None:
            return DelayModel.static(c["delay_probs"])
        return DelayModel.uniform(c["tau"])
    return DelayModel.observed()


def _run_one(run_cfg, instance, gradient_cost_ms=0.0):
    # artificial per-gradient cost: a workload knob for parallel timing
    # comparisons (worker sleeps before each oracle call)
    hook = None
    if gradient_cost_ms > 0:
        cost_s = gradient_cost_ms / 1e3
        hook = lambda wid: time.sleep(cost_s)  # noqa: E731
    if run_cfg.mode == SEQUENTIAL:
        return run_sequential(run_cfg, instance)
    if run_cfg.mode == SYNC_PARALLEL:
        return run_sync(run_cfg, instance, worker_hook=hook)
    return run_async(run_cfg, instance, worker_hook=hook)


def _condition_verdict(cfg, beta):
    c = cfg.resolved
    if c["check_regime"] is None:
        return "unchecked"
    params = {"alpha": c["alpha"], "beta": beta, "beta_cap": c["beta_cap"],
              "K": c["K"], "a": c["shift"], "tau": c["tau"],
              "rho": c["rho"], "rho_bar": c["rho_bar"]}
    if params["rho"] is not None and params["rho_bar"] is None:
        params["rho_bar"] = 2.0 * params["rho"]
    report = check_parameter_conditions(c["check_regime"], params)
    return "feasible" if report.feasible else "infeasible:" + ";".join(report.violated)


SUMMARY_COLUMNS = ("label", "problem", "mode", "schedule", "alpha", "beta",
                   "workers", "seed", "K", "status", "failed_k",
                   "final_objective", "best_objective", "total_wall_ms",
                   "delay_min", "delay_mean", "delay_max", "delay_hist",
                   "moreau_estimate", "conditions")


def run_experiment(cfg: ExperimentConfig, output_dir=None):
    """Execute the config's (beta x workers x seed) grid; returns exit code."""
    c = cfg.resolved
    out = Path(output_dir or os.environ.get(OUTDIR_ENV) or c["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    instance = build_instance(cfg)
    betas = c["beta_sweep"] if c["beta_sweep"] else [c["beta"]]
    workers = c["worker_sweep"] if c["worker_sweep"] else [c["workers"]]
    seeds = [c["seed"] + i for i in range(c["repeats"])]
    rows, failures, trace_paths = [], 0, []
    for beta in betas:
        for w in workers:
            for seed in seeds:
                run_cfg = RunConfig(
                    schedule=_build_schedule(c, float(beta)),
                    delay=_build_delay(c, c["mode"]),
                    batch_size=c["batch_size"],
                    total_iters=c["K"],
                    seed=seed,
                    workers=int(w),
                    mode=c["mode"],
                    tau_max_discard=c["tau_max_discard"],
                    objective_every=c["objective_every"],
                    problem=c["problem"],
                )
                name = f"trace_{c['label']}_beta{beta:g}_w{int(w)}_seed{seed}.csv"
                row = {"label": c["label"], "problem": c["problem"], "mode": c["mode"],
                       "schedule": c["schedule"], "alpha": c["alpha"], "beta": beta,
                       "workers": int(w), "seed": seed, "K": c["K"],
                       "status": "ok", "failed_k": "", "final_objective": "",
                       "best_objective": "", "total_wall_ms": "", "delay_min": "",
                       "delay_mean": "", "delay_max": "", "delay_hist": "",
                       "moreau_estimate": "",
                       "conditions": _condition_verdict(cfg, beta)}
                try:
                    trace = _run_one(run_cfg, instance, c["gradient_cost_ms"])
                except DivergenceError as e:
                    row["status"] = "diverged"
                    row["failed_k"] = e.iteration
                    failures += 1
                else:
                    header = dict(c)
                    header.update({"resolved_beta": beta, "resolved_workers": int(w),
                                   "resolved_seed": seed,
                                   "defaulted_keys": cfg.defaulted})
                    path = out / name
                    write_trace_csv(trace, path, config=header, version=__version__)
                    trace_paths.append(path)
                    row["final_objective"] = trace.final_objective()
                    row["best_objective"] = trace.best_objective()
                    row["total_wall_ms"] = trace.records[-1].wall_ms
                    if trace.delay_stats is not None:
                        ds = trace.delay_stats
                        row["delay_min"] = ds.min
                        row["delay_mean"] = ds.mean
                        row["delay_max"] = ds.max
                        row["delay_hist"] = ";".join(f"{k}:{v}" for k, v in sorted(ds.histogram.items()))
                    if c["moreau"] and c["rho"] is not None:
                        mc = MoreauConfig(rho=c["rho"], rho_bar=c["rho_bar"],
                                          inner_budget=c["moreau_budget"])
                        row["moreau_estimate"] = moreau_grad_norm(instance, trace.final_x, mc)[0]
                rows.append(row)
    summary_path = out / f"summary_{c['label']}.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return (1 if failures else 0), trace_paths, summary_path


def _cmd_run(args):
    try:
        cfg = load_config(args.config)
        code, traces, summary = run_experiment(cfg, output_dir=args.output_dir)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {len(traces)} trace file(s) and {summary}")
    for key in cfg.defaulted:
        print(f"  defaulted {key} = {cfg.resolved[key]!r}")
    return code


def _cmd_check(args):
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    c = cfg.resolved
    if c["check_regime"] is None or c["rho"] is None:
        print("config error: check-conditions needs 'check_regime' and 'rho'", file=sys.stderr)
        return 2
    params = {"alpha": c["alpha"], "beta": c["beta"], "beta_cap": c["beta_cap"],
              "K": c["K"], "a": c["shift"], "tau": c["tau"], "rho": c["rho"],
              "rho_bar": c["rho_bar"] if c["rho_bar"] is not None else 2 * c["rho"]}
    report = check_parameter_conditions(c["check_regime"], params)
    print(report.as_text())
    return 0 if report.feasible else 1


def _cmd_gen(args):
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    instance = build_instance(cfg)
    save_instance(instance, args.output)
    print(f"wrote {args.output} ({instance.kind}, m={instance.num_samples}, n={instance.n})")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="inertialprox",
                                     description="inertial proximal stochastic subgradient experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.set_defaults(func=_cmd_run)
    p_chk = sub.add_parser("check-conditions", help="evaluate schedule feasibility conditions")
    p_chk.add_argument("config")
    p_chk.set_defaults(func=_cmd_check)
    p_gen = sub.add_parser("gen-instance", help="generate and save a problem instance")
    p_gen.add_argument("config")
    p_gen.add_argument("-o", "--output", required=True)
    p_gen.set_defaults(func=_cmd_gen)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
