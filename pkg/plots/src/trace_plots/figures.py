import argparse
import csv
import glob as globlib
import json
import sys
from dataclasses import dataclass

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PANELS = ("beta_sweep", "worker_sweep", "time_bars")

TRACE_COLUMNS = "k,epoch,objective,step_norm,observed_delay,wall_ms"


@dataclass(frozen=True)
class FigureSpec:
    panel: str
    csv_glob: str
    output: str
    logy: bool = True

    def __post_init__(self):
        if self.panel not in PANELS:
            raise ValueError(f"unknown panel {self.panel!r}; expected one of {PANELS}")


class TraceFileError(ValueError):
    pass


def read_trace(path):
    """Parse one trace CSV into (config, rows as dict of numpy arrays)."""
    config = {}
    table = []
    saw_header = False
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if body.startswith("config:"):
                        config = json.loads(body[len("config:"):])
                    continue
                if not saw_header:
                    if line != TRACE_COLUMNS:
                        raise TraceFileError(f"{path}: unexpected header {line!r}")
                    saw_header = True
                    continue
                parts = line.split(",")
                if len(parts) != 6:
                    raise TraceFileError(f"{path}: malformed row {line!r}")
                table.append([float(v) for v in parts])
    except (OSError, ValueError) as e:
        if isinstance(e, TraceFileError):
            raise
        raise TraceFileError(f"{path}: {e}") from e
    if not saw_header:
        raise TraceFileError(f"{path}: not a trace CSV (no column header)")
    arr = np.array(table) if table else np.zeros((0, 6))
    cols = ["k", "epoch", "objective", "step_norm", "observed_delay", "wall_ms"]
    return config, {c: arr[:, i] for i, c in enumerate(cols)}


def read_summary(path):
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as e:
        raise TraceFileError(f"{path}: {e}") from e


def _expand(spec):
    paths = sorted(globlib.glob(spec.csv_glob))
    if not paths:
        raise TraceFileError(f"no CSV matches {spec.csv_glob!r}")
    return paths


def _epoch_objective(rows):
    mask = ~np.isnan(rows["objective"])
    return rows["epoch"][mask], rows["objective"][mask]


def _curve_panel(spec, label_key, axis_label):
    """Group traces by a header key; mean over seeds with min/max shading."""
    groups = {}
    for path in _expand(spec):
        config, rows = read_trace(path)
        if label_key not in config:
            raise TraceFileError(f"{path}: header lacks {label_key!r}")
        groups.setdefault(config[label_key], []).append(_epoch_objective(rows))
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    for value in sorted(groups):
        curves = groups[value]
        epochs = curves[0][0]
        ys = np.stack([c[1] for c in curves])
        mean = ys.mean(axis=0)
        ax.plot(epochs, mean, label=f"{axis_label}={value:g}")
        if len(curves) > 1:
            ax.fill_between(epochs, ys.min(axis=0), ys.max(axis=0), alpha=0.2)
    ax.set_xlabel("epoch")
    ax.set_ylabel("objective")
    if spec.logy:
        ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _time_bars_panel(spec):
    """Wall-time bars from summary CSVs: sync vs async per worker count."""
    rows = []
    for path in _expand(spec):
        rows.extend(read_summary(path))
    times = {}
    for row in rows:
        if row.get("status") != "ok" or not row.get("total_wall_ms"):
            continue
        key = (row["mode"], int(row["workers"]))
        times.setdefault(key, []).append(float(row["total_wall_ms"]))
    if not times:
        raise TraceFileError(f"no completed runs found under {spec.csv_glob!r}")
    workers = sorted({w for _, w in times})
    modes = [m for m in ("sync_parallel", "async_parallel") if any(k[0] == m for k in times)]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    width = 0.8 / max(len(modes), 1)
    xs = np.arange(len(workers))
    for j, mode in enumerate(modes):
        vals = [np.mean(times.get((mode, w), [np.nan])) for w in workers]
        ax.bar(xs + j * width, vals, width, label=mode.replace("_parallel", ""))
    ax.set_xticks(xs + width * (len(modes) - 1) / 2)
    ax.set_xticklabels([str(w) for w in workers])
    ax.set_xlabel("workers")
    ax.set_ylabel("wall time (ms)")
    if spec.logy:
        ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def build_figure(spec: FigureSpec):
    if spec.panel == "beta_sweep":
        return _curve_panel(spec, "resolved_beta", "beta")
    if spec.panel == "worker_sweep":
        return _curve_panel(spec, "resolved_workers", "workers")
    return _time_bars_panel(spec)


def render(spec: FigureSpec):
    """Render one panel to spec.output; returns the output path."""
    fig = build_figure(spec)
    try:
        fig.savefig(spec.output, dpi=120, metadata={"Software": "trace-plots"})
    finally:
        plt.close(fig)
    return spec.output


def main(argv=None):
    p = argparse.ArgumentParser(prog="trace-plots",
                                description="render convergence/timing panels from run CSVs")
    p.add_argument("--panel", required=True, choices=PANELS)
    p.add_argument("--csv-glob", required=True,
                   help="trace CSVs for curve panels, summary CSVs for time_bars")
    p.add_argument("--out", required=True)
    p.add_argument("--linear-y", action="store_true", help="linear instead of log y-axis")
    args = p.parse_args(argv)
    spec = FigureSpec(panel=args.panel, csv_glob=args.csv_glob, output=args.out,
                      logy=not args.linear_y)
    try:
        out = render(spec)
    except TraceFileError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
