"""Closed-form proximal mappings for the supported regularizers.

prox_{alpha r}(x) = argmin_y r(y) + ||y - x||^2 / (2 alpha).

Evaluating an indicator outside its set returns the INFEASIBLE sentinel
(+inf) instead of raising: a trace may legitimately ask for the objective at
the raw initial point before the first prox has projected it.
"""

from dataclasses import dataclass

import numpy as np

ZERO = "zero"
L1 = "l1"
BOX = "box"
BALL = "ball"
BOX_L1 = "box_l1"
REGULARIZER_KINDS = (ZERO, L1, BOX, BALL, BOX_L1)

INFEASIBLE = float("inf")


@dataclass(frozen=True, eq=False)
class Regularizer:
    kind: str
    lam: float = 0.0
    lo: np.ndarray | float | None = None
    hi: np.ndarray | float | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in REGULARIZER_KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}; expected one of {REGULARIZER_KINDS}")
        if self.lam < 0:
            raise ValueError("l1 weight must be nonnegative")
        if self.kind in (BOX, BOX_L1):
            if self.lo is None or self.hi is None:
                raise ValueError(f"{self.kind} requires lo and hi bounds")
            if np.any(np.asarray(self.lo) > np.asarray(self.hi)):
                raise ValueError("box bounds need lo <= hi componentwise")
        if self.kind == BALL and (self.radius is None or not self.radius > 0):
            raise ValueError("ball requires radius > 0")

    @classmethod
    def zero(cls):
        return cls(ZERO)

    @classmethod
    def l1(cls, lam):
        return cls(L1, lam=lam)

    @classmethod
    def box(cls, lo, hi):
        return cls(BOX, lo=_as_bound(lo), hi=_as_bound(hi))

    @classmethod
    def ball(cls, radius):
        return cls(BALL, radius=float(radius))

    @classmethod
    def box_l1(cls, lo, hi, lam):
        return cls(BOX_L1, lam=lam, lo=_as_bound(lo), hi=_as_bound(hi))

    @property
    def is_projection(self):
        """Whether prox is a plain projection (indicator-only kinds)."""
        return self.kind in (ZERO, BOX, BALL)


def _as_bound(v):
    arr = np.asarray(v, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def prox(reg: Regularizer, alpha, x):
    """Proximal mapping of alpha * r at x."""
    if not alpha > 0:
        raise ValueError("prox needs alpha > 0")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("prox input has non-finite coordinates")
    if reg.kind == ZERO:
        return x.copy()
    if reg.kind == L1:
        return soft_threshold(x, alpha * reg.lam)
    if reg.kind == BOX:
        return np.clip(x, reg.lo, reg.hi)
    if reg.kind == BALL:
        nrm = float(np.linalg.norm(x))
        if nrm <= reg.radius:
            return x.copy()
        return x * (reg.radius / nrm)
    # box_l1: soft-threshold then clamp. Valid because both terms separate per
    # coordinate and in 1-D the objective lam|y| + (y-x)^2/(2a) + i_[lo,hi](y)
    # is convex; its unconstrained minimizer is the soft-threshold point, and
    # clamping a 1-D convex function's minimizer onto an interval yields the
    # constrained minimizer.
    return np.clip(soft_threshold(x, alpha * reg.lam), reg.lo, reg.hi)


def eval_r(reg: Regularizer, x):
    """r(x); INFEASIBLE (+inf) when x violates an indicator constraint."""
    x = np.asarray(x, dtype=float)
    if reg.kind == ZERO:
        return 0.0
    if reg.kind == L1:
        return float(reg.lam * np.sum(np.abs(x)))
    if reg.kind == BOX:
        return 0.0 if _in_box(x, reg) else INFEASIBLE
    if reg.kind == BALL:
        # tiny relative slack: radial rescaling can overshoot by one ulp
        ok = float(np.linalg.norm(x)) <= reg.radius * (1.0 + 1e-12)
        return 0.0 if ok else INFEASIBLE
    if not _in_box(x, reg):
        return INFEASIBLE
    return float(reg.lam * np.sum(np.abs(x)))


def _in_box(x, reg):
    return bool(np.all(x >= reg.lo) and np.all(x <= reg.hi))
