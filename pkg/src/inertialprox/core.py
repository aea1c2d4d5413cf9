"""Shared domain types: iterates, step/inertia schedules, run config, traces.

A Schedule produces the per-iteration pair (alpha_k, beta_k). The supported
kinds:

  fixed_horizon       alpha_k = alpha/sqrt(K),      beta_k = beta/K**(1/4)
  diminishing_sqrt    alpha_k = alpha/sqrt(k),      beta_k = min(beta_cap, beta/k**(1/4))
  diminishing_shifted alpha_k = alpha/sqrt(a+k-1),  beta_k = min(beta_cap, beta/(a+k-1)**(1/4))
  constant_pair       alpha_k = alpha,              beta_k = beta
  momentum_coupled    beta_k = beta * alpha_k/alpha_{k-1}  (alpha_0 := alpha_1);
                      alpha_k rule chosen by fields: horizon -> alpha/sqrt(K),
                      shift -> alpha/sqrt(a+k-1), neither -> constant alpha.

With epoch_based=True the index k in the formulas is replaced by e_k + 1,
where e_k = floor((k-1)*b/m) is the zero-based epoch number; the pair is
therefore held constant within each epoch.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

FIXED_HORIZON = "fixed_horizon"
DIMINISHING_SQRT = "diminishing_sqrt"
DIMINISHING_SHIFTED = "diminishing_shifted"
CONSTANT_PAIR = "constant_pair"
MOMENTUM_COUPLED = "momentum_coupled"
SCHEDULE_KINDS = (
    FIXED_HORIZON,
    DIMINISHING_SQRT,
    DIMINISHING_SHIFTED,
    CONSTANT_PAIR,
    MOMENTUM_COUPLED,
)

SEQUENTIAL = "sequential"
SYNC_PARALLEL = "sync_parallel"
ASYNC_PARALLEL = "async_parallel"
MODES = (SEQUENTIAL, SYNC_PARALLEL, ASYNC_PARALLEL)


class ScheduleExhaustedError(RuntimeError):
    """A fixed-horizon schedule was queried past its horizon."""


def epoch_of(k, b, m):
    """Zero-based epoch number of iteration k with batch size b over m samples."""
    if k < 1 or b < 1 or m < 1:
        raise ValueError("k, b and m must all be >= 1")
    return (k - 1) * b // m


@dataclass(frozen=True)
class Schedule:
    kind: str
    alpha: float
    beta: float = 0.0
    beta_cap: float = 0.9
    horizon: int | None = None  # K, required for fixed_horizon
    shift: int | None = None  # a >= 1, required for diminishing_shifted
    epoch_based: bool = False
    batch_size: int | None = None  # required to evaluate epoch_based schedules
    dataset_size: int | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}; expected one of {SCHEDULE_KINDS}")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not 0.0 <= self.beta_cap < 1.0:
            raise ValueError("beta_cap must lie in [0, 1)")
        if self.kind == FIXED_HORIZON:
            if self.horizon is None or self.horizon < 1:
                raise ValueError("fixed_horizon requires horizon K >= 1")
            if not self.beta / self.horizon ** 0.25 < 1.0:
                raise ValueError("fixed_horizon needs beta/K^(1/4) < 1")
        if self.kind == DIMINISHING_SHIFTED and (self.shift is None or self.shift < 1):
            raise ValueError("diminishing_shifted requires shift a >= 1")
        if self.kind in (CONSTANT_PAIR, MOMENTUM_COUPLED) and not self.beta < 1.0:
            raise ValueError(f"{self.kind} requires beta < 1")

    def bound(self, batch_size, dataset_size):
        """Bind the batch/dataset sizes an epoch-based schedule needs."""
        if not self.epoch_based:
            return self
        return replace(self, batch_size=batch_size, dataset_size=dataset_size)


def _effective_index(s: Schedule, k):
    if k < 1:
        raise ValueError("iteration index k must be >= 1")
    if not s.epoch_based:
        return k
    if s.batch_size is None or s.dataset_size is None:
        raise ValueError("epoch_based schedule evaluated without batch/dataset sizes bound")
    return epoch_of(k, s.batch_size, s.dataset_size) + 1


def _check_horizon(s: Schedule, k):
    if s.horizon is not None and k > s.horizon:
        raise ScheduleExhaustedError(f"schedule horizon K={s.horizon} exhausted at k={k}")


def alpha_at(s: Schedule, k):
    """Step size alpha_k. Nonincreasing in k for every kind."""
    j = _effective_index(s, k)
    if s.kind == FIXED_HORIZON:
        _check_horizon(s, k)
        return s.alpha / math.sqrt(s.horizon)
    if s.kind == DIMINISHING_SQRT:
        return s.alpha / math.sqrt(j)
    if s.kind == DIMINISHING_SHIFTED:
        return s.alpha / math.sqrt(s.shift + j - 1)
    if s.kind == CONSTANT_PAIR:
        return s.alpha
    # momentum_coupled
    _check_horizon(s, k)
    if s.horizon is not None:
        return s.alpha / math.sqrt(s.horizon)
    if s.shift is not None:
        return s.alpha / math.sqrt(s.shift + j - 1)
    return s.alpha


def beta_at(s: Schedule, k):
    """Inertia weight beta_k in [0, 1)."""
    j = _effective_index(s, k)
    if s.kind == FIXED_HORIZON:
        _check_horizon(s, k)
        return s.beta / s.horizon ** 0.25
    if s.kind == DIMINISHING_SQRT:
        return min(s.beta_cap, s.beta / j ** 0.25)
    if s.kind == DIMINISHING_SHIFTED:
        return min(s.beta_cap, s.beta / (s.shift + j - 1) ** 0.25)
    if s.kind == CONSTANT_PAIR:
        return s.beta
    # momentum_coupled: beta_k = beta * alpha_k / alpha_{k-1}, with alpha_0 := alpha_1
    if k == 1:
        return s.beta
    return s.beta * alpha_at(s, k) / alpha_at(s, k - 1)


@dataclass
class Iterate:
    """Current/previous iterate pair carried by the inertial update."""

    x_curr: np.ndarray
    x_prev: np.ndarray
    k: int = 1

    @classmethod
    def start(cls, x0):
        x0 = np.array(x0, dtype=float)
        return cls(x_curr=x0, x_prev=x0.copy(), k=1)

    @property
    def dim(self):
        return self.x_curr.size


@dataclass
class TraceRecord:
    k: int
    epoch: int
    objective: float  # nan when not recorded at this iteration
    step_norm: float
    observed_delay: int
    wall_ms: float


class Trace:
    """Per-iteration metrics of one run, in iteration order."""

    COLUMNS = ("k", "epoch", "objective", "step_norm", "observed_delay", "wall_ms")

    def __init__(self, meta=None):
        self.records: list[TraceRecord] = []
        self.meta = dict(meta or {})
        self.delay_stats = None
        self.final_x = None  # final iterate, attached by the engines

    def append(self, rec: TraceRecord):
        if self.records and rec.k <= self.records[-1].k:
            raise ValueError("trace iterations must be strictly increasing")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records])

    def recorded_objectives(self):
        """(k, epoch, objective) rows where the objective was evaluated."""
        rows = [(r.k, r.epoch, r.objective) for r in self.records if not math.isnan(r.objective)]
        return rows

    def final_objective(self):
        rows = self.recorded_objectives()
        return rows[-1][2] if rows else float("nan")

    def best_objective(self):
        rows = self.recorded_objectives()
        return min(r[2] for r in rows) if rows else float("nan")

    def same_path(self, other):
        """Bitwise equality of everything except measured wall time."""
        if len(self) != len(other):
            return False
        for a, b in zip(self.records, other.records):
            if (a.k, a.epoch, a.observed_delay) != (b.k, b.epoch, b.observed_delay):
                return False
            if a.step_norm != b.step_norm:
                return False
            if not (a.objective == b.objective or (math.isnan(a.objective) and math.isnan(b.objective))):
                return False
        return True


@dataclass(frozen=True)
class RunConfig:
    """Everything one run needs besides the problem instance itself.

    The delay field holds an optimizer.DelayModel. problem/problem_params are
    carried for the CLI harness; the engines ignore them.
    """

    schedule: Schedule
    delay: object
    batch_size: int
    total_iters: int
    seed: int = 0
    workers: int = 0
    mode: str = SEQUENTIAL
    tau_max_discard: int | None = None
    objective_every: int = 0  # 0 = once per epoch (plus first and last iteration)
    problem: str = ""
    problem_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.total_iters < 1:
            raise ValueError("total_iters must be >= 1")
        if self.workers < 0:
            raise ValueError("workers must be >= 0")
        if self.mode != SEQUENTIAL and self.workers < 1:
            raise ValueError(f"{self.mode} requires workers >= 1")
        if self.tau_max_discard is not None and self.tau_max_discard < 0:
            raise ValueError("tau_max_discard must be >= 0")
        if self.objective_every < 0:
            raise ValueError("objective_every must be >= 0")
