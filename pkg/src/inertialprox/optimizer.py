"""Sequential engine: inertial prox step, momentum form, SHB baseline, delays.

The core update applied once per iteration k is

    x^{k+1} = prox_{alpha_k r}( x^k - alpha_k g^k + beta_k (x^k - x^{k-1}) )

where g^k is a minibatch subgradient evaluated at the possibly stale iterate
x^{k - tau_k}. Sequential runs draw tau_k from a configured delay model and
serve x^{k-tau_k} from a ring buffer; the parallel runtime instead observes
real delays (see parallel.py).
"""

import math
import time
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .core import (SEQUENTIAL, Trace, TraceRecord, alpha_at, beta_at, epoch_of)
from .problems import BatchStream
from .prox import ZERO, Regularizer, prox

DELAY_NONE = "none"
DELAY_FIXED = "fixed"
DELAY_STATIC = "static"
DELAY_OBSERVED = "observed"
DELAY_KINDS = (DELAY_NONE, DELAY_FIXED, DELAY_STATIC, DELAY_OBSERVED)


class DivergenceError(RuntimeError):
    """A run produced a non-finite gradient or iterate."""

    def __init__(self, iteration, message):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True, eq=False)
class DelayModel:
    kind: str
    tau: int = 0
    probs: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in DELAY_KINDS:
            raise ValueError(f"unknown delay kind {self.kind!r}; expected one of {DELAY_KINDS}")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if self.kind == DELAY_NONE and self.tau != 0:
            raise ValueError("delay 'none' means tau = 0")
        if self.kind == DELAY_STATIC:
            p = np.asarray(self.probs, dtype=float)
            if p.shape != (self.tau + 1,):
                raise ValueError("static delay needs a probability for each of 0..tau")
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ValueError("delay probabilities must be nonnegative and sum to 1")
            object.__setattr__(self, "probs", p)

    @classmethod
    def none(cls):
        return cls(DELAY_NONE)

    @classmethod
    def fixed(cls, tau):
        return cls(DELAY_FIXED, tau=int(tau))

    @classmethod
    def static(cls, probs):
        p = np.asarray(probs, dtype=float)
        return cls(DELAY_STATIC, tau=p.size - 1, probs=p)

    @classmethod
    def uniform(cls, tau):
        tau = int(tau)
        if tau == 0:
            return cls.none()
        return cls.static(np.full(tau + 1, 1.0 / (tau + 1)))

    @classmethod
    def observed(cls, tau=0):
        return cls(DELAY_OBSERVED, tau=int(tau))


def sample_delay(model: DelayModel, k, rng):
    """Draw tau_k, clamped to k-1 so the stale iterate always exists."""
    if model.kind == DELAY_NONE:
        return 0
    if model.kind == DELAY_FIXED:
        return min(model.tau, k - 1)
    if model.kind == DELAY_STATIC:
        j = int(rng.choice(model.tau + 1, p=model.probs))
        return min(j, k - 1)
    raise ValueError("'observed' delays only exist in the parallel runtime")


class HistoryBuffer:
    """The last depth iterates keyed by iteration stamp.

    Stamps <= 0 resolve to x^{(1)} (the pre-start convention); asking for a
    stamp that already fell out of the window is a bug and raises.
    """

    def __init__(self, depth, x1):
        if depth < 1:
            raise ValueError("history depth must be >= 1")
        self.depth = depth
        self._x1 = np.array(x1, dtype=float)
        self._buf = OrderedDict([(1, self._x1)])

    def push(self, stamp, x):
        self._buf[stamp] = np.array(x, dtype=float)
        while len(self._buf) > self.depth:
            self._buf.popitem(last=False)

    def get(self, stamp):
        if stamp <= 0:
            return self._x1
        try:
            return self._buf[stamp]
        except KeyError:
            raise ValueError(f"iterate {stamp} is outside the retained window") from None


class OptState:
    """Mutable state of one run: iterate pair, momentum vector, history."""

    def __init__(self, x0, history_depth=1):
        x0 = np.array(x0, dtype=float)
        self.x_curr = x0
        self.x_prev = x0.copy()
        self.k = 1
        self.m = np.zeros_like(x0)
        self.history = HistoryBuffer(history_depth, x0)

    @property
    def n(self):
        return self.x_curr.size

    def _advance(self, x_new):
        self.x_prev = self.x_curr
        self.x_curr = x_new
        self.k += 1
        self.history.push(self.k, x_new)

    def last_step_norm(self):
        return float(np.linalg.norm(self.x_curr - self.x_prev))


def _check_gradient(state, g):
    g = np.asarray(g, dtype=float)
    if g.shape != (state.n,):
        raise ValueError(f"gradient dimension {g.shape} != iterate dimension {state.n}")
    if not np.all(np.isfinite(g)):
        raise DivergenceError(state.k, "non-finite gradient")
    return g


def step_inertial(state: OptState, g, alpha_k, beta_k, reg: Regularizer):
    """One heavy-ball prox step; mutates and returns the state."""
    if not alpha_k > 0 or beta_k < 0:
        raise ValueError("need alpha_k > 0 and beta_k >= 0")
    g = _check_gradient(state, g)
    y = state.x_curr - alpha_k * g + beta_k * (state.x_curr - state.x_prev)
    if not np.all(np.isfinite(y)):
        raise DivergenceError(state.k, "non-finite iterate")
    state._advance(prox(reg, alpha_k, y))
    return state


def step_momentum(state: OptState, g, alpha_k, beta, reg=None):
    """Momentum-form rewrite; only valid for the unregularized problem."""
    if reg is not None and reg.kind != ZERO:
        raise ValueError("momentum form is only equivalent when r = 0")
    if not 0.0 < beta < 1.0:
        raise ValueError("momentum form needs beta in (0, 1)")
    g = _check_gradient(state, g)
    state.m = beta * state.m + (1.0 - beta) * g
    state._advance(state.x_curr - (alpha_k / (1.0 - beta)) * state.m)
    return state


def step_shb(state: OptState, g, alpha, beta, projection: Regularizer):
    """Comparison baseline with reversed coefficient roles:

    x^{k+1} = Proj_X( x^k - alpha*beta*g + (1-beta)(x^k - x^{k-1}) ).
    """
    if not projection.is_projection:
        raise ValueError("SHB baseline takes a projection set (zero/box/ball)")
    if not 0.0 < beta <= 1.0:
        raise ValueError("SHB needs beta in (0, 1]")
    g = _check_gradient(state, g)
    y = state.x_curr - alpha * beta * g + (1.0 - beta) * (state.x_curr - state.x_prev)
    state._advance(prox(projection, 1.0, y))
    return state


def _spawn_rngs(seed):
    init_ss, batch_ss, delay_ss = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(init_ss), batch_ss, np.random.default_rng(delay_ss)


def resolve_x0(cfg, instance, x0):
    rng_init, batch_ss, rng_delay = _spawn_rngs(cfg.seed)
    if x0 is None:
        x0 = instance.default_init(rng_init)
    else:
        x0 = np.array(x0, dtype=float)
    return x0, batch_ss, rng_delay


def objective_due(k, total_iters, batch_size, num_samples, every):
    """Cadence rule: every N iterations, or (N=0) at each epoch boundary;
    the first and last iterations always record."""
    if k == 1 or k == total_iters:
        return True
    if every > 0:
        return k % every == 0
    return epoch_of(k, batch_size, num_samples) > epoch_of(k - 1, batch_size, num_samples)


def record_objective(instance, x, k):
    """phi(x) for the trace; +inf from an indicator is a legitimate
    infeasibility sentinel, but a non-finite data term is divergence."""
    val = instance.full_objective(x)
    if not math.isfinite(val) and not math.isfinite(instance.data_term(x)):
        raise DivergenceError(k, "non-finite objective")
    return val


def run_sequential(cfg, instance, x0=None, callback=None):
    """Run the full loop for cfg.total_iters iterations; returns the Trace.

    Deterministic: equal configs reproduce the iterate path bit-for-bit
    (wall_ms, being measured time, is the one nondeterministic column).
    """
    if cfg.mode != SEQUENTIAL:
        raise ValueError("run_sequential requires mode='sequential'")
    if cfg.delay.kind == DELAY_OBSERVED:
        raise ValueError("'observed' delays require a parallel mode")
    x0, batch_ss, rng_delay = resolve_x0(cfg, instance, x0)
    schedule = cfg.schedule.bound(cfg.batch_size, instance.num_samples)
    state = OptState(x0, history_depth=cfg.delay.tau + 1)
    stream = BatchStream(instance.num_samples, cfg.batch_size, batch_ss)
    trace = Trace(meta={"mode": cfg.mode, "seed": cfg.seed})
    m = instance.num_samples
    t0 = time.perf_counter()
    for k in range(1, cfg.total_iters + 1):
        tau_k = sample_delay(cfg.delay, k, rng_delay)
        x_eval = state.history.get(k - tau_k)
        obj = (record_objective(instance, state.x_curr, k)
               if objective_due(k, cfg.total_iters, cfg.batch_size, m, cfg.objective_every)
               else math.nan)
        _, idx = stream.next_batch()
        g = instance.sample_subgradient(x_eval, idx)
        a_k = alpha_at(schedule, k)
        b_k = beta_at(schedule, k)
        step_inertial(state, g, a_k, b_k, instance.regularizer)
        if not np.all(np.isfinite(state.x_curr)):
            raise DivergenceError(k, "non-finite iterate")
        trace.append(TraceRecord(
            k=k,
            epoch=epoch_of(k, cfg.batch_size, m),
            objective=obj,
            step_norm=state.last_step_norm(),
            observed_delay=tau_k,
            wall_ms=(time.perf_counter() - t0) * 1e3,
        ))
        if callback is not None:
            callback(k, state)
    trace.final_x = state.x_curr.copy()
    return trace
