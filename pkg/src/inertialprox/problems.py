"""Stochastic problem instances: generators, minibatch oracles, objectives.

Every instance exposes:

  n                    dimension of the flat optimization variable
  num_samples          size m of the finite sample set
  regularizer          prox-friendly convex term (may be zero)
  sample_subgradient(x, batch)   average subgradient of the data term over
                                 the given sample indices
  sample_loss(i, x)    single-sample data loss (finite-difference oracle hook)
  full_objective(x)    exact finite-sum data term plus regularizer value
  default_init(rng)    a sensible starting point

Gaussian draws use numpy's PCG64 generator (ziggurat normal sampling), so
instances are bit-reproducible for a given seed and numpy version.

Minibatches come from BatchStream: each epoch consumes a fresh seeded
permutation in batch-size chunks, i.e. sampling without replacement within
an epoch. (The convergence theory assumes i.i.d. sampling; per-epoch
shuffling is the standard experimental practice and is what we implement.)
"""

import threading

import numpy as np

from . import backends
from .prox import Regularizer, eval_r


class ProblemError(ValueError):
    pass


def _as_batch(batch, m):
    idx = np.asarray(batch, dtype=np.int64).ravel()
    if idx.size == 0:
        raise ProblemError("empty minibatch")
    if idx.min() < 0 or idx.max() >= m:
        raise ProblemError(f"batch index out of range [0, {m})")
    return idx


def _check_dim(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise ProblemError(f"expected vector of dimension {n}, got shape {x.shape}")
    return x


class PhaseRetrievalInstance:
    """Recover a signal from magnitudes of Gaussian linear measurements.

    Data term: F(x) = (1/m) sum_i | <a_i,x>^2 - b_i^2 |, with b_i built so
    F(x_star) = 0. Nonsmooth and weakly convex; the subgradient at a kink
    (zero residual) is taken as 0.
    """

    kind = "phase_retrieval"

    def __init__(self, A, b, x_star, regularizer=None):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.x_star = np.asarray(x_star, dtype=float)
        self.regularizer = regularizer or Regularizer.zero()
        if self.A.shape != (self.b.size, self.x_star.size):
            raise ProblemError("measurement matrix shape inconsistent with b / x_star")
        self._bsq = self.b * self.b

    @property
    def n(self):
        return self.x_star.size

    @property
    def num_samples(self):
        return self.b.size

    def sample_subgradient(self, x, batch):
        x = _check_dim(x, self.n)
        idx = _as_batch(batch, self.num_samples)
        return backends.pr_batch_subgrad(self.A, self._bsq, x, idx)

    def sample_loss(self, i, x):
        u = float(self.A[i] @ x)
        return abs(u * u - self._bsq[i])

    def data_term(self, x):
        x = _check_dim(x, self.n)
        return backends.pr_objective(self.A, self._bsq, x)

    def full_objective(self, x):
        return self.data_term(x) + eval_r(self.regularizer, x)

    def default_init(self, rng):
        v = rng.standard_normal(self.n)
        return v / np.linalg.norm(v)


class SmoothSyntheticInstance(PhaseRetrievalInstance):
    """Same measurement data with the squared (smooth) residual loss.

    F(x) = (1/m) sum_i ( <a_i,x>^2 - b_i^2 )^2; smooth nonconvex, stands in
    for the unregularized smooth problem class.
    """

    kind = "smooth_synthetic"

    def sample_subgradient(self, x, batch):
        x = _check_dim(x, self.n)
        idx = _as_batch(batch, self.num_samples)
        return backends.smooth_batch_grad(self.A, self._bsq, x, idx)

    def sample_loss(self, i, x):
        u = float(self.A[i] @ x)
        r = u * u - self._bsq[i]
        return r * r

    def data_term(self, x):
        x = _check_dim(x, self.n)
        return backends.smooth_objective(self.A, self._bsq, x)


class QuadraticInstance:
    """F(x) = 1/2 (x-c)^T D (x-c) with diagonal positive-definite D.

    Deterministic oracle (every sample returns the full gradient); exists for
    closed-form checks of the engine and of the envelope-based diagnostics.
    """

    kind = "quadratic"

    def __init__(self, diag, center=None, regularizer=None, num_samples=1):
        self.diag = np.asarray(diag, dtype=float)
        if np.any(self.diag <= 0):
            raise ProblemError("diagonal entries must be positive")
        self.center = np.zeros_like(self.diag) if center is None else np.asarray(center, dtype=float)
        if self.center.shape != self.diag.shape:
            raise ProblemError("center dimension mismatch")
        self.regularizer = regularizer or Regularizer.zero()
        self._m = int(num_samples)

    @property
    def n(self):
        return self.diag.size

    @property
    def num_samples(self):
        return self._m

    def sample_subgradient(self, x, batch):
        x = _check_dim(x, self.n)
        _as_batch(batch, self.num_samples)
        return self.diag * (x - self.center)

    def sample_loss(self, i, x):
        return self.data_term(x)

    def data_term(self, x):
        x = _check_dim(x, self.n)
        d = x - self.center
        return 0.5 * float(d @ (self.diag * d))

    def full_objective(self, x):
        return self.data_term(x) + eval_r(self.regularizer, x)

    def default_init(self, rng):
        return rng.standard_normal(self.n)


class SparseBLRInstance:
    """Multiclass bilinear logistic regression with an l1 regularizer.

    Sample i is a matrix X_i in R^{s x t} with label y_i in {0..C-1}. The
    class score is tr(U_j X_i V_j) + b_j with U_j in R^{p x s}, V_j in
    R^{t x p}; the data term is the mean softmax cross-entropy and
    r(x) = lam * ||x||_1 over the flat variable (U_1..U_C, V_1..V_C, b).
    The l1 part is handled by prox, never by the oracle.
    """

    kind = "blr_synthetic"

    def __init__(self, X, y, p, lam, planted_x=None):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=np.int64)
        if self.X.ndim != 3 or self.X.shape[0] != self.y.size:
            raise ProblemError("X must be (m, s, t) aligned with labels y")
        self.p = int(p)
        self.lam = float(lam)
        self.C = int(self.y.max()) + 1
        if self.y.min() < 0:
            raise ProblemError("labels must be nonnegative")
        self.s = self.X.shape[1]
        self.t = self.X.shape[2]
        self.regularizer = Regularizer.l1(self.lam) if self.lam > 0 else Regularizer.zero()
        self.planted_x = None if planted_x is None else np.asarray(planted_x, dtype=float)

    @property
    def n(self):
        return self.C * (self.p * self.s + self.t * self.p + 1)

    @property
    def num_samples(self):
        return self.y.size

    def unpack(self, x):
        x = _check_dim(x, self.n)
        C, p, s, t = self.C, self.p, self.s, self.t
        nU = C * p * s
        nV = C * t * p
        U = x[:nU].reshape(C, p, s)
        V = x[nU:nU + nV].reshape(C, t, p)
        bias = x[nU + nV:]
        return U, V, bias

    @staticmethod
    def pack(U, V, bias):
        return np.concatenate([U.ravel(), V.ravel(), bias.ravel()])

    def scores(self, x, Xb):
        """Class scores for a stack of samples Xb of shape (n_b, s, t)."""
        U, V, bias = self.unpack(x)
        # tr(U_c X V_c) = <W_c, X>_F with W_c[s,t] = sum_p U[c,p,s] V[c,t,p]
        W = np.einsum("cps,ctp->cst", U, V)
        return np.einsum("cst,nst->nc", W, Xb) + bias

    def sample_subgradient(self, x, batch):
        idx = _as_batch(batch, self.num_samples)
        U, V, _ = self.unpack(x)
        Xb = self.X[idx]
        sc = self.scores(x, Xb)
        sc -= sc.max(axis=1, keepdims=True)
        e = np.exp(sc)
        probs = e / e.sum(axis=1, keepdims=True)
        coef = probs
        coef[np.arange(idx.size), self.y[idx]] -= 1.0
        XV = np.einsum("nst,ctp->ncsp", Xb, V)
        UX = np.einsum("cps,nst->ncpt", U, Xb)
        gU = np.einsum("nc,ncsp->cps", coef, XV)
        gV = np.einsum("nc,ncpt->ctp", coef, UX)
        gb = coef.sum(axis=0)
        return self.pack(gU, gV, gb) / idx.size

    def sample_loss(self, i, x):
        sc = self.scores(x, self.X[i:i + 1])[0]
        sc = sc - sc.max()
        return float(np.log(np.exp(sc).sum()) - sc[self.y[i]])

    def data_term(self, x):
        sc = self.scores(x, self.X)
        sc -= sc.max(axis=1, keepdims=True)
        lse = np.log(np.exp(sc).sum(axis=1))
        return float(np.mean(lse - sc[np.arange(self.num_samples), self.y]))

    def full_objective(self, x):
        return self.data_term(x) + eval_r(self.regularizer, x)

    def accuracy(self, x):
        pred = np.argmax(self.scores(x, self.X), axis=1)
        return float(np.mean(pred == self.y))

    def default_init(self, rng):
        return 0.01 * rng.standard_normal(self.n)


# -- generators ---------------------------------------------------------------


def generate_phase_retrieval(m, d, seed, ground_truth="unit_sphere", regularizer=None):
    """Gaussian measurement rows a_i ~ N(0, I_d); b_i = |<a_i, x_star>|."""
    A, b, x_star = _measurement_data(m, d, seed, ground_truth)
    return PhaseRetrievalInstance(A, b, x_star, regularizer)


def generate_smooth_synthetic(m, d, seed, ground_truth="unit_sphere", regularizer=None):
    A, b, x_star = _measurement_data(m, d, seed, ground_truth)
    return SmoothSyntheticInstance(A, b, x_star, regularizer)


def _measurement_data(m, d, seed, ground_truth):
    if m < 1 or d < 1:
        raise ProblemError("m and d must be >= 1")
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, d))
    if isinstance(ground_truth, str):
        if ground_truth != "unit_sphere":
            raise ProblemError(f"unknown ground_truth mode {ground_truth!r}")
        x_star = rng.standard_normal(d)
        x_star /= np.linalg.norm(x_star)
    else:
        x_star = np.asarray(ground_truth, dtype=float)
        if x_star.shape != (d,):
            raise ProblemError(f"provided ground truth has dimension {x_star.size}, expected {d}")
    # measure through the active backend so the oracles see exactly-zero
    # residuals at x_star (same accumulation order as the hot kernels)
    b = np.abs(backends.measure(A, x_star))
    return A, b, x_star


def generate_blr_synthetic(m, s, t, C, p, lam, seed, template_scale=6.0, noise=1.0):
    """Linearly-separable-in-score synthetic data for the bilinear model.

    Plants rank-p score filters W_c = P_c Q_c, uses their normalized versions
    as class templates, and draws X_i = template(y_i) + noise * G_i. The
    planted parameters (U_c, V_c) = (P_c^T, Q_c^T) score the templates by
    construction, so they classify the train set nearly perfectly.
    """
    if min(m, s, t, p) < 1 or C < 2:
        raise ProblemError("need m,s,t,p >= 1 and C >= 2")
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((C, s, p))
    Q = rng.standard_normal((C, p, t))
    W = P @ Q
    templates = template_scale * W / np.linalg.norm(W, axis=(1, 2), keepdims=True)
    y = rng.integers(0, C, size=m)
    X = templates[y] + noise * rng.standard_normal((m, s, t))
    U = np.transpose(P, (0, 2, 1))
    V = np.transpose(Q, (0, 2, 1))
    planted = SparseBLRInstance.pack(U, V, np.zeros(C))
    return SparseBLRInstance(X, y, p=p, lam=lam, planted_x=planted)


# -- instance persistence -----------------------------------------------------


def save_instance(instance, path):
    """Serialize an instance to .npz (shape headers + row-major payloads)."""
    kind = instance.kind
    if kind in ("phase_retrieval", "smooth_synthetic"):
        np.savez(path, kind=kind, A=instance.A, b=instance.b, x_star=instance.x_star)
    elif kind == "quadratic":
        np.savez(path, kind=kind, diag=instance.diag, center=instance.center,
                 num_samples=instance.num_samples)
    elif kind == "blr_synthetic":
        planted = instance.planted_x if instance.planted_x is not None else np.zeros(0)
        np.savez(path, kind=kind, X=instance.X, y=instance.y, p=instance.p,
                 lam=instance.lam, planted_x=planted)
    else:
        raise ProblemError(f"cannot serialize instance kind {kind!r}")


def load_instance(path):
    with np.load(path, allow_pickle=False) as z:
        kind = str(z["kind"])
        if kind == "phase_retrieval":
            return PhaseRetrievalInstance(z["A"], z["b"], z["x_star"])
        if kind == "smooth_synthetic":
            return SmoothSyntheticInstance(z["A"], z["b"], z["x_star"])
        if kind == "quadratic":
            return QuadraticInstance(z["diag"], z["center"], num_samples=int(z["num_samples"]))
        if kind == "blr_synthetic":
            planted = z["planted_x"]
            return SparseBLRInstance(z["X"], z["y"], p=int(z["p"]), lam=float(z["lam"]),
                                     planted_x=planted if planted.size else None)
    raise ProblemError(f"unknown instance kind {kind!r} in {path}")


# -- minibatch stream ---------------------------------------------------------


class BatchStream:
    """Seeded stream of minibatch index arrays, shuffled once per epoch.

    next_batch() is thread-safe: in parallel runs the workers pull from one
    shared stream, so the consumed sample sequence matches the sequential
    engine whenever consumption order does.
    """

    def __init__(self, num_samples, batch_size, seed):
        if batch_size < 1:
            raise ProblemError("batch_size must be >= 1")
        self.m = int(num_samples)
        self.b = int(min(batch_size, self.m))
        self._rng = np.random.default_rng(seed)
        self._perm = None
        self._pos = 0
        self._counter = 0
        self._lock = threading.Lock()

    def next_batch(self):
        """Returns (batch_id, index array); batch ids count from 0."""
        with self._lock:
            if self._perm is None or self._pos >= self.m:
                self._perm = self._rng.permutation(self.m)
                self._pos = 0
            idx = self._perm[self._pos:self._pos + self.b]
            self._pos += self.b
            bid = self._counter
            self._counter += 1
            return bid, idx
