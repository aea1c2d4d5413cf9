"""Hot oracle kernels: numba-jitted loops with a pure-numpy fallback.

The per-iteration cost of a run is dominated by the minibatch oracle over
Gaussian measurement rows. Those loops exist twice here: a ``*_numpy``
version (vectorized fancy-indexing) and a ``*_numba`` version (@njit row
loop, avoids materializing the A[batch] copy). Which one the dispatchers
use is controlled by the INERTIALPROX_BACKEND environment variable
("numba", "numpy", or "auto" = numba when importable), read once at import;
``set_backend`` switches at runtime (used by the benchmark and tests).

The two backends compute the same quantity but sum in different orders, so
results may differ in the last ulp; within one backend results are
bit-reproducible.
"""

import os

import numpy as np

ENV_VAR = "INERTIALPROX_BACKEND"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def _sign(r):
    # subgradient convention at the kink of |.|: pick 0
    if r > 0.0:
        return 1.0
    if r < 0.0:
        return -1.0
    return 0.0


# -- measurement matvec u = A x ---------------------------------------------
# The generators build b from this, with the same per-row accumulation order
# the oracle kernels use, so residuals at the planted signal are exactly zero.


def measure_numpy(A, x):
    return A @ x


@njit(cache=True)
def measure_numba(A, x):
    m, d = A.shape
    u = np.empty(m)
    for i in range(m):
        acc = 0.0
        for j in range(d):
            acc += A[i, j] * x[j]
        u[i] = acc
    return u


# -- phase retrieval: f_i(x) = | <a_i,x>^2 - b_i^2 | ------------------------


def pr_batch_subgrad_numpy(A, bsq, x, idx):
    rows = A[idx]
    u = rows @ x
    s = np.sign(u * u - bsq[idx])
    return ((2.0 * s * u) @ rows) / idx.size


@njit(cache=True)
def pr_batch_subgrad_numba(A, bsq, x, idx):
    d = x.size
    g = np.zeros(d)
    for t in range(idx.size):
        i = idx[t]
        u = 0.0
        for j in range(d):
            u += A[i, j] * x[j]
        c = 2.0 * _sign(u * u - bsq[i]) * u
        for j in range(d):
            g[j] += c * A[i, j]
    inv = 1.0 / idx.size
    for j in range(d):
        g[j] *= inv
    return g


def pr_objective_numpy(A, bsq, x):
    u = A @ x
    return float(np.mean(np.abs(u * u - bsq)))


@njit(cache=True)
def pr_objective_numba(A, bsq, x):
    m, d = A.shape
    acc = 0.0
    for i in range(m):
        u = 0.0
        for j in range(d):
            u += A[i, j] * x[j]
        acc += abs(u * u - bsq[i])
    return acc / m


# -- smooth surrogate: f_i(x) = ( <a_i,x>^2 - b_i^2 )^2 ---------------------


def smooth_batch_grad_numpy(A, bsq, x, idx):
    rows = A[idx]
    u = rows @ x
    return ((4.0 * (u * u - bsq[idx]) * u) @ rows) / idx.size


@njit(cache=True)
def smooth_batch_grad_numba(A, bsq, x, idx):
    d = x.size
    g = np.zeros(d)
    for t in range(idx.size):
        i = idx[t]
        u = 0.0
        for j in range(d):
            u += A[i, j] * x[j]
        c = 4.0 * (u * u - bsq[i]) * u
        for j in range(d):
            g[j] += c * A[i, j]
    inv = 1.0 / idx.size
    for j in range(d):
        g[j] *= inv
    return g


def smooth_objective_numpy(A, bsq, x):
    u = A @ x
    r = u * u - bsq
    return float(np.mean(r * r))


@njit(cache=True)
def smooth_objective_numba(A, bsq, x):
    m, d = A.shape
    acc = 0.0
    for i in range(m):
        u = 0.0
        for j in range(d):
            u += A[i, j] * x[j]
        r = u * u - bsq[i]
        acc += r * r
    return acc / m


# -- backend selection -------------------------------------------------------

_active = None


def _resolve(choice):
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"invalid backend {choice!r}: expected 'numba', 'numpy' or 'auto'"
        )
    if choice == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    if choice == "auto":
        return "numba" if HAVE_NUMBA else "numpy"
    return choice


def set_backend(choice):
    """Select the kernel backend: 'numba', 'numpy' or 'auto'."""
    global _active
    _active = _resolve(choice)
    return _active


def get_backend():
    return _active


set_backend(os.environ.get(ENV_VAR, "auto"))


def measure(A, x):
    if _active == "numba":
        return measure_numba(A, x)
    return measure_numpy(A, x)


def pr_batch_subgrad(A, bsq, x, idx):
    if _active == "numba":
        return pr_batch_subgrad_numba(A, bsq, x, idx)
    return pr_batch_subgrad_numpy(A, bsq, x, idx)


def pr_objective(A, bsq, x):
    if _active == "numba":
        return float(pr_objective_numba(A, bsq, x))
    return pr_objective_numpy(A, bsq, x)


def smooth_batch_grad(A, bsq, x, idx):
    if _active == "numba":
        return smooth_batch_grad_numba(A, bsq, x, idx)
    return smooth_batch_grad_numpy(A, bsq, x, idx)


def smooth_objective(A, bsq, x):
    if _active == "numba":
        return float(smooth_objective_numba(A, bsq, x))
    return smooth_objective_numpy(A, bsq, x)


def warm_up():
    """Trigger (or load from cache) JIT compilation of all numba kernels."""
    if not HAVE_NUMBA:
        return
    A = np.ones((2, 3))
    bsq = np.ones(2)
    x = np.ones(3)
    idx = np.arange(2, dtype=np.int64)
    measure_numba(A, x)
    pr_batch_subgrad_numba(A, bsq, x, idx)
    pr_objective_numba(A, bsq, x)
    smooth_batch_grad_numba(A, bsq, x, idx)
    smooth_objective_numba(A, bsq, x)
