"""In-process master-worker runtime: async and sync parallel execution.

One master thread owns the iterate and applies every update; W worker
threads compute minibatch subgradients against the latest published
snapshot. Communication is a bounded worker->master queue (capacity 4*W,
which also bounds staleness growth from backlog) plus one versioned
master->worker snapshot. The master is the single writer.

Async: the master applies one inertial-prox update per received gradient,
in arrival order, and tracks the real staleness tau_k = k - based_on_k of
each message. Multi-worker arrival order is genuinely nondeterministic;
the 1-worker rendezvous mode serializes master and worker, reproducing the
sequential engine bit-for-bit.

Sync: per round every worker evaluates at the same iterate, the master
averages the W gradients and applies one update; tau_k = 0 by construction.
"""

import queue
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (ASYNC_PARALLEL, SYNC_PARALLEL, Trace, TraceRecord,
                   alpha_at, beta_at, epoch_of)
from .optimizer import (DELAY_OBSERVED, DivergenceError, OptState,
                        objective_due, record_objective, resolve_x0,
                        step_inertial)
from .problems import BatchStream


@dataclass
class GradientMessage:
    g: np.ndarray
    based_on_k: int
    worker_id: int
    sample_batch_id: int


@dataclass
class DelayStats:
    min: int
    max: int
    mean: float
    histogram: dict = field(default_factory=dict)

    @classmethod
    def from_delays(cls, delays):
        arr = np.asarray(delays, dtype=np.int64)
        hist = {int(v): int(c) for v, c in zip(*np.unique(arr, return_counts=True))}
        return cls(min=int(arr.min()), max=int(arr.max()), mean=float(arr.mean()),
                   histogram=hist)

    def as_dict(self):
        return {"min": self.min, "max": self.max, "mean": self.mean,
                "histogram": self.histogram}


class SharedIterate:
    """Versioned (x, stamp) snapshot with a single permitted writer.

    Readers grab the whole (version, stamp, x) tuple in one reference read,
    so a stamp is never paired with another version's vector.
    """

    def __init__(self, x, stamp):
        self._cond = threading.Condition()
        self._snap = (1, stamp, np.array(x, dtype=float))
        self._owner = threading.get_ident()
        self._stopped = False

    def publish(self, x, stamp):
        if threading.get_ident() != self._owner:
            raise RuntimeError("only the master thread may publish the iterate")
        with self._cond:
            version = self._snap[0] + 1
            self._snap = (version, stamp, np.array(x, dtype=float))
            self._cond.notify_all()

    def read(self):
        return self._snap

    def wait_for_stamp(self, min_stamp, poll=0.05):
        """Block until a snapshot with stamp >= min_stamp exists (or stop)."""
        with self._cond:
            while self._snap[1] < min_stamp and not self._stopped:
                self._cond.wait(timeout=poll)
            return None if self._stopped else self._snap

    def stop(self):
        with self._cond:
            self._stopped = True
            self._cond.notify_all()


def run_async(cfg, instance, x0=None, worker_hook=None, rendezvous=False):
    """Asynchronous run: K applied updates, then clean worker shutdown.

    worker_hook(worker_id), when given, runs before each gradient
    computation (test hook for artificial compute cost / slow workers).
    Returns a Trace whose delay_stats summarize the observed tau_k.
    """
    if cfg.mode != ASYNC_PARALLEL:
        raise ValueError("run_async requires mode='async_parallel'")
    if cfg.workers < 1:
        raise ValueError("async runs need at least one worker")
    if cfg.delay.kind != DELAY_OBSERVED:
        raise ValueError("async runs observe real delays: use DelayModel.observed()")
    if rendezvous and cfg.workers != 1:
        raise ValueError("rendezvous mode is defined for exactly one worker")

    x0, batch_ss, _ = resolve_x0(cfg, instance, x0)
    schedule = cfg.schedule.bound(cfg.batch_size, instance.num_samples)
    state = OptState(x0, history_depth=1)
    stream = BatchStream(instance.num_samples, cfg.batch_size, batch_ss)
    shared = SharedIterate(x0, stamp=1)
    mailbox: queue.Queue = queue.Queue(maxsize=4 * cfg.workers)
    stop = threading.Event()
    failures = []

    def worker(wid):
        try:
            last_stamp = 0
            while not stop.is_set():
                if rendezvous:
                    snap = shared.wait_for_stamp(last_stamp + 1)
                    if snap is None:
                        return
                else:
                    snap = shared.read()
                _, stamp, x_snap = snap
                bid, idx = stream.next_batch()
                if worker_hook is not None:
                    worker_hook(wid)
                g = instance.sample_subgradient(x_snap, idx)
                last_stamp = stamp
                msg = GradientMessage(g, based_on_k=stamp, worker_id=wid,
                                      sample_batch_id=bid)
                while not stop.is_set():
                    try:
                        mailbox.put(msg, timeout=0.05)
                        break
                    except queue.Full:
                        continue
        except Exception as exc:  # surfaced to the master below
            failures.append((wid, exc))
            stop.set()

    threads = [threading.Thread(target=worker, args=(w,), daemon=True)
               for w in range(cfg.workers)]
    for t in threads:
        t.start()

    trace = Trace(meta={"mode": cfg.mode, "seed": cfg.seed, "workers": cfg.workers})
    delays = []
    discarded = 0
    m = instance.num_samples
    t0 = time.perf_counter()
    try:
        k = 1
        while k <= cfg.total_iters:
            try:
                msg = mailbox.get(timeout=1.0)
            except queue.Empty:
                if failures:
                    break
                continue
            tau_k = k - msg.based_on_k
            if cfg.tau_max_discard is not None and tau_k > cfg.tau_max_discard:
                discarded += 1
                continue
            obj = (record_objective(instance, state.x_curr, k)
                   if objective_due(k, cfg.total_iters, cfg.batch_size, m,
                                    cfg.objective_every)
                   else float("nan"))
            a_k = alpha_at(schedule, k)
            b_k = beta_at(schedule, k)
            step_inertial(state, msg.g, a_k, b_k, instance.regularizer)
            if not np.all(np.isfinite(state.x_curr)):
                raise DivergenceError(k, "non-finite iterate")
            shared.publish(state.x_curr, stamp=k + 1)
            delays.append(tau_k)
            trace.append(TraceRecord(
                k=k,
                epoch=epoch_of(k, cfg.batch_size, m),
                objective=obj,
                step_norm=state.last_step_norm(),
                observed_delay=tau_k,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            ))
            k += 1
    finally:
        stop.set()
        shared.stop()
        # unblock any worker stuck on a full mailbox, then join
        deadline = time.perf_counter() + 10.0
        while any(t.is_alive() for t in threads):
            try:
                mailbox.get_nowait()
            except queue.Empty:
                pass
            for t in threads:
                t.join(timeout=0.01)
            if time.perf_counter() > deadline:  # pragma: no cover
                break

    if failures:
        wid, exc = failures[0]
        raise RuntimeError(f"worker {wid} failed: {exc!r}") from exc
    trace.delay_stats = DelayStats.from_delays(delays)
    trace.meta["discarded"] = discarded
    trace.final_x = state.x_curr.copy()
    return trace


def run_sync(cfg, instance, x0=None, worker_hook=None):
    """Synchronous run: one barriered round of W gradients per update.

    Batch ids are assigned before the round is dispatched and the W results
    are averaged in worker order, so the trace does not depend on thread
    scheduling.
    """
    if cfg.mode != SYNC_PARALLEL:
        raise ValueError("run_sync requires mode='sync_parallel'")
    if cfg.workers < 1:
        raise ValueError("sync runs need at least one worker")

    x0, batch_ss, _ = resolve_x0(cfg, instance, x0)
    schedule = cfg.schedule.bound(cfg.batch_size, instance.num_samples)
    state = OptState(x0, history_depth=1)
    stream = BatchStream(instance.num_samples, cfg.batch_size, batch_ss)
    trace = Trace(meta={"mode": cfg.mode, "seed": cfg.seed, "workers": cfg.workers})
    m = instance.num_samples

    def compute(x_snap, idx, wid):
        if worker_hook is not None:
            worker_hook(wid)
        return instance.sample_subgradient(x_snap, idx)

    t0 = time.perf_counter()
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        for k in range(1, cfg.total_iters + 1):
            batches = [stream.next_batch() for _ in range(cfg.workers)]
            obj = (record_objective(instance, state.x_curr, k)
                   if objective_due(k, cfg.total_iters, cfg.batch_size, m,
                                    cfg.objective_every)
                   else float("nan"))
            x_snap = state.x_curr
            futures = [pool.submit(compute, x_snap, idx, wid)
                       for wid, (_, idx) in enumerate(batches)]
            gs = np.stack([f.result() for f in futures])
            g = gs.sum(axis=0) / cfg.workers
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
                observed_delay=0,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            ))
    trace.final_x = state.x_curr.copy()
    return trace
