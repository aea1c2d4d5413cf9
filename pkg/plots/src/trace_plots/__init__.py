"""Offline figure generation for inertialprox trace/summary CSVs.

Consumes only the documented CSV formats (never the solver package):

  trace CSV    '# config: {json}' header lines, a
               'k,epoch,objective,step_norm,observed_delay,wall_ms' table,
               optionally a '# delay_stats: {json}' trailer
  summary CSV  one row per run with mode, workers, seed, total_wall_ms, ...

Three panel kinds mirror the usual convergence-figure layout: objective vs
epoch per inertia weight (beta_sweep), objective vs epoch per worker count
(worker_sweep), and wall-time bars for sync vs async per worker count
(time_bars).
"""

from .figures import FigureSpec, render, main

__all__ = ["FigureSpec", "render", "main"]
