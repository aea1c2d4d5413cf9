"""Trace CSV format.

Layout:

    # config: {...resolved run config as JSON...}
    # library_version: x.y.z
    k,epoch,objective,step_norm,observed_delay,wall_ms
    1,0,1.2190820565918339,0.00311,0,0.41
    ...
    # delay_stats: {"min": 0, ...}          (async runs only)

Reals are written with 17 significant digits, which round-trips float64
exactly; unrecorded objectives appear as nan. read_trace_csv inverts
write_trace_csv bit-for-bit on every column.
"""

import json
import math

from .core import Trace, TraceRecord
from .parallel import DelayStats


def _fmt(x):
    if isinstance(x, int):
        return str(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def write_trace_csv(trace: Trace, path, config=None, version="0"):
    with open(path, "w") as fh:
        fh.write(f"# config: {json.dumps(config or trace.meta, sort_keys=True)}\n")
        fh.write(f"# library_version: {version}\n")
        fh.write(",".join(Trace.COLUMNS) + "\n")
        for r in trace.records:
            fh.write(
                f"{r.k},{r.epoch},{_fmt(r.objective)},{_fmt(r.step_norm)},"
                f"{r.observed_delay},{_fmt(r.wall_ms)}\n"
            )
        if trace.delay_stats is not None:
            fh.write(f"# delay_stats: {json.dumps(trace.delay_stats.as_dict())}\n")


def read_trace_csv(path):
    """Parse a trace CSV; returns (Trace, config dict)."""
    config = {}
    trace = Trace()
    saw_header = False
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("config:"):
                    config = json.loads(body[len("config:"):])
                elif body.startswith("delay_stats:"):
                    d = json.loads(body[len("delay_stats:"):])
                    trace.delay_stats = DelayStats(
                        min=d["min"], max=d["max"], mean=d["mean"],
                        histogram={int(k): v for k, v in d["histogram"].items()})
                continue
            if not saw_header:
                if line != ",".join(Trace.COLUMNS):
                    raise ValueError(f"unexpected trace header in {path}: {line!r}")
                saw_header = True
                continue
            k, epoch, obj, step, delay, wall = line.split(",")
            trace.append(TraceRecord(
                k=int(k), epoch=int(epoch), objective=float(obj),
                step_norm=float(step), observed_delay=int(delay),
                wall_ms=float(wall)))
    if not saw_header:
        raise ValueError(f"{path} is not a trace CSV (no header row)")
    return trace, config
