import json
import math

import numpy as np
import pytest

from inertialprox import load_instance, read_trace_csv, write_trace_csv
from inertialprox.cli import (ConfigError, build_instance, load_config, main,
                              parse_config, run_experiment)
from inertialprox.core import Trace, TraceRecord


def minimal(**extra):
    cfg = {"problem": "phase_retrieval", "m": 200, "d": 20, "K": 40,
           "batch_size": 20, "alpha": 2e-3}
    cfg.update(extra)
    return json.dumps(cfg)


def strip_wall(path):
    """Trace CSV bytes with the (measured, nondeterministic) wall column blanked."""
    out = []
    for line in open(path).read().splitlines():
        if line.startswith("#") or line.startswith("k,"):
            out.append(line)
        else:
            out.append(line.rsplit(",", 1)[0] + ",WALL")
    return "\n".join(out)


class TestParseConfig:
    def test_minimal_defaults_applied(self):
        cfg = parse_config(minimal())
        assert cfg["schedule"] == "diminishing_sqrt"
        assert cfg["mode"] == "sequential"
        assert "beta" in cfg.defaulted and "seed" in cfg.defaulted
        assert "problem" not in cfg.defaulted

    def test_unknown_key_fatal(self):
        with pytest.raises(ConfigError, match="alpa"):
            parse_config(minimal(alpa=0.1))

    def test_invalid_enum_lists_options(self):
        with pytest.raises(ConfigError, match="phase_retrieval"):
            parse_config(minimal(problem="phase_retreival"))

    def test_malformed_json_reports_position(self):
        with pytest.raises(ConfigError, match=r"line \d+ column \d+"):
            parse_config('{"problem": "phase_retrieval",}')

    def test_missing_problem(self):
        with pytest.raises(ConfigError, match="problem"):
            parse_config("{}")

    def test_type_errors(self):
        with pytest.raises(ConfigError, match="K"):
            parse_config(minimal(K="many"))
        with pytest.raises(ConfigError, match="beta_sweep"):
            parse_config(minimal(beta_sweep=[]))

    def test_parallel_needs_workers(self):
        with pytest.raises(ConfigError, match="workers"):
            parse_config(minimal(mode="async_parallel"))


class TestRunExperiment:
    def test_trace_and_summary_written(self, tmp_path):
        cfg = parse_config(minimal(label="t0"))
        code, traces, summary = run_experiment(cfg, output_dir=tmp_path)
        assert code == 0
        assert len(traces) == 1
        assert summary.exists()
        trace, header = read_trace_csv(traces[0])
        assert len(trace) == 40
        assert header["problem"] == "phase_retrieval"
        assert header["resolved_seed"] == 0

    def test_rerun_identical_modulo_wall(self, tmp_path):
        cfg = parse_config(minimal(label="det", seed=3))
        _, traces1, _ = run_experiment(cfg, output_dir=tmp_path / "a")
        _, traces2, _ = run_experiment(cfg, output_dir=tmp_path / "b")
        assert strip_wall(traces1[0]) == strip_wall(traces2[0])

    def test_beta_sweep_rows(self, tmp_path):
        cfg = parse_config(minimal(label="sweep", beta_sweep=[0.0, 0.9],
                                   schedule="constant_pair", alpha=1e-3,
                                   repeats=2))
        code, traces, summary = run_experiment(cfg, output_dir=tmp_path)
        assert code == 0
        assert len(traces) == 4  # 2 betas x 2 seeds
        rows = summary.read_text().strip().splitlines()
        assert len(rows) == 5  # header + one row per (beta, seed)

    def test_divergent_run_recorded(self, tmp_path):
        cfg = parse_config(minimal(label="boom", schedule="constant_pair",
                                   alpha=1e6, beta=0.0))
        code, traces, summary = run_experiment(cfg, output_dir=tmp_path)
        assert code == 1
        body = summary.read_text()
        assert "diverged" in body

    def test_async_summary_has_delay_stats(self, tmp_path):
        cfg = parse_config(minimal(label="as", mode="async_parallel", workers=2,
                                   K=60))
        code, traces, summary = run_experiment(cfg, output_dir=tmp_path)
        assert code == 0
        header = summary.read_text().splitlines()
        row = dict(zip(header[0].split(","), header[1].split(",")))
        assert row["delay_max"] != ""

    def test_condition_verdict_column(self, tmp_path):
        cfg = parse_config(minimal(label="cond", schedule="constant_pair",
                                   alpha=1e-3, beta=0.0,
                                   check_regime="smooth_constant", rho=1.0))
        _, _, summary = run_experiment(cfg, output_dir=tmp_path)
        assert "feasible" in summary.read_text()

    def test_worker_sweep_walltime_decreases_under_fixed_cost(self, tmp_path):
        import csv as csvmod
        cfg = parse_config(minimal(label="ws", mode="async_parallel",
                                   worker_sweep=[1, 2, 4], K=400,
                                   gradient_cost_ms=1.0))
        code, _, summary = run_experiment(cfg, output_dir=tmp_path)
        assert code == 0
        with open(summary, newline="") as fh:
            rows = list(csvmod.DictReader(fh))
        wall = {int(r["workers"]): float(r["total_wall_ms"]) for r in rows}
        assert wall[1] > wall[2] > wall[4], wall

    def test_instance_file_replay(self, tmp_path):
        from inertialprox import save_instance
        from inertialprox.cli import build_instance
        inst = build_instance(parse_config(minimal()))
        path = tmp_path / "inst.npz"
        save_instance(inst, path)
        cfg_a = parse_config(minimal(label="gen", seed=5))
        cfg_b = parse_config(minimal(label="file", seed=5,
                                     instance_file=str(path)))
        _, traces_a, _ = run_experiment(cfg_a, output_dir=tmp_path / "a")
        _, traces_b, _ = run_experiment(cfg_b, output_dir=tmp_path / "b")
        a, _ = read_trace_csv(traces_a[0])
        b, _ = read_trace_csv(traces_b[0])
        assert a.same_path(b)

    def test_instance_file_kind_mismatch(self, tmp_path):
        from inertialprox import save_instance
        from inertialprox.cli import build_instance
        inst = build_instance(parse_config(minimal()))
        path = tmp_path / "inst.npz"
        save_instance(inst, path)
        cfg = parse_config(minimal(problem="quadratic", instance_file=str(path)))
        with pytest.raises(ConfigError, match="instance_file"):
            build_instance(cfg)

    def test_env_var_overrides_output_dir(self, tmp_path, monkeypatch):
        from inertialprox.cli import OUTDIR_ENV
        monkeypatch.setenv(OUTDIR_ENV, str(tmp_path / "env_out"))
        cfg = parse_config(minimal(label="env"))
        _, traces, _ = run_experiment(cfg)
        assert str(tmp_path / "env_out") in str(traces[0])


class TestTraceIO:
    def test_roundtrip_exact(self, tmp_path):
        trace = Trace(meta={"x": 1})
        rng = np.random.default_rng(0)
        for k in range(1, 21):
            trace.append(TraceRecord(
                k=k, epoch=(k - 1) // 5,
                objective=float(rng.normal()) if k % 5 == 1 else math.nan,
                step_norm=float(abs(rng.normal()) * 1e-7),
                observed_delay=int(rng.integers(0, 4)),
                wall_ms=float(k) * 0.37))
        path = tmp_path / "t.csv"
        write_trace_csv(trace, path, config={"seed": 9}, version="1")
        back, header = read_trace_csv(path)
        assert header == {"seed": 9}
        assert back.same_path(trace)
        for a, b in zip(back.records, trace.records):
            assert a.wall_ms == b.wall_ms  # 17 significant digits round-trip

    def test_rejects_garbage(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("not,a,trace\n1,2,3\n")
        with pytest.raises(ValueError):
            read_trace_csv(p)


class TestCliCommands:
    def test_run_and_exit_code(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(minimal(label="cli"))
        code = main(["run", str(cfg_path), "--output-dir", str(tmp_path / "out")])
        assert code == 0
        out = capsys.readouterr().out
        assert "trace file" in out
        assert "defaulted" in out  # resolved defaults echoed

    def test_check_conditions(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(minimal(schedule="constant_pair", alpha=1e-3, beta=0.0,
                                    check_regime="smooth_constant", rho=1.0))
        code = main(["check-conditions", str(cfg_path)])
        assert code == 0
        assert "feasible: True" in capsys.readouterr().out

    def test_gen_instance(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(minimal())
        out_path = tmp_path / "inst.npz"
        code = main(["gen-instance", str(cfg_path), "-o", str(out_path)])
        assert code == 0
        inst = load_instance(out_path)
        assert inst.kind == "phase_retrieval"
        assert inst.num_samples == 200

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(minimal(alpa=1.0))
        assert main(["run", str(cfg_path)]) == 2
        assert "config error" in capsys.readouterr().err


class TestBuildInstance:
    @pytest.mark.parametrize("problem", ["phase_retrieval", "smooth_synthetic",
                                         "blr_synthetic", "quadratic"])
    def test_all_problems_buildable(self, problem):
        cfg = parse_config(json.dumps({"problem": problem, "m": 60, "d": 6,
                                       "s": 3, "t": 4, "dim": 5}))
        inst = build_instance(cfg)
        assert inst.kind == problem
