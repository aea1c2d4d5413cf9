import json
import subprocess
import sys

import pytest


def run_cli(config: dict, outdir):
    """Drive the solver CLI (the only interface this package consumes)."""
    cfg_path = outdir / f"{config['label']}.json"
    cfg_path.write_text(json.dumps(config))
    subprocess.run(
        [sys.executable, "-m", "inertialprox.cli", "run", str(cfg_path),
         "--output-dir", str(outdir)],
        check=True, capture_output=True, text=True)


@pytest.fixture(scope="session")
def desk_outputs(tmp_path_factory):
    """Desk-scale CSV outputs: a beta sweep, a worker sweep, and timing runs."""
    out = tmp_path_factory.mktemp("desk_csv")
    base = {"problem": "phase_retrieval", "m": 2000, "d": 50, "K": 200,
            "batch_size": 100, "alpha": 1e-3}
    run_cli(dict(base, label="betas", schedule="constant_pair",
                 beta_sweep=[0.0, 0.5, 0.9], repeats=2), out)
    run_cli(dict(base, label="workers", mode="async_parallel",
                 worker_sweep=[1, 2], beta=2.0), out)
    run_cli(dict(base, label="timing_async", mode="async_parallel",
                 worker_sweep=[1, 2, 4], beta=2.0), out)
    run_cli(dict(base, label="timing_sync", mode="sync_parallel",
                 worker_sweep=[1, 2, 4], beta=2.0), out)
    return out
