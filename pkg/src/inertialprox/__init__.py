"""Inertial (heavy-ball) proximal stochastic subgradient optimization.

Minimizes phi(x) = F(x) + r(x), where F is a sampleable (possibly nonsmooth,
weakly convex) data term and r a prox-friendly convex regularizer, via

    x^{k+1} = prox_{alpha_k r}( x^k - alpha_k g^k + beta_k (x^k - x^{k-1}) )

with g^k a minibatch subgradient that may be stale (computed at x^{k-tau_k}).
Includes a sequential engine with simulated delays, an in-process
master-worker runtime (sync and async) that produces real delays, named
step/inertia schedules with feasibility checkers, envelope-based
stationarity diagnostics, and benchmark problems (phase retrieval, a smooth
surrogate, sparse bilinear logistic regression, diagonal quadratics).
"""

__version__ = "0.1.0"

from .backends import get_backend, set_backend
from .core import (ASYNC_PARALLEL, CONSTANT_PAIR, DIMINISHING_SHIFTED,
                   DIMINISHING_SQRT, FIXED_HORIZON, MOMENTUM_COUPLED,
                   SEQUENTIAL, SYNC_PARALLEL, Iterate, RunConfig, Schedule,
                   ScheduleExhaustedError, Trace, TraceRecord, alpha_at,
                   beta_at, epoch_of)
from .diagnostics import (MoreauConfig, check_parameter_conditions,
                          moreau_grad_norm, select_T)
from .optimizer import (DelayModel, DivergenceError, HistoryBuffer, OptState,
                        run_sequential, sample_delay, step_inertial,
                        step_momentum, step_shb)
from .parallel import DelayStats, GradientMessage, SharedIterate, run_async, run_sync
from .problems import (BatchStream, PhaseRetrievalInstance, QuadraticInstance,
                       SmoothSyntheticInstance, SparseBLRInstance,
                       generate_blr_synthetic, generate_phase_retrieval,
                       generate_smooth_synthetic, load_instance, save_instance)
from .prox import INFEASIBLE, Regularizer, eval_r, prox
from .traceio import read_trace_csv, write_trace_csv
