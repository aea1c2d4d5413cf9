"""Stationarity diagnostics and parameter feasibility checks.

Near-stationarity of x is measured through the envelope

    env_{1/rb}(x) = min_y phi(y) + (rb/2) ||y - x||^2,   rb > rho,

whose gradient norm is rb * ||x - x_tilde|| with x_tilde the inner
minimizer. For rho-weakly-convex phi the inner problem is (rb - rho)
strongly convex, so a full-batch proximal subgradient method with the
classic strongly-convex step 2/((rb - rho)(t+1)) solves it; the returned
point is the best inner-objective iterate, which guarantees
phi(x_tilde) <= phi(x). Diagonal quadratics take an exact closed-form path
instead.

check_parameter_conditions evaluates the feasibility inequalities of the
supported schedule regimes literally and names each violated one.
"""

import math
from dataclasses import dataclass

import numpy as np

from .problems import QuadraticInstance
from .prox import BALL, BOX, BOX_L1, L1, ZERO, prox, soft_threshold


@dataclass(frozen=True)
class MoreauConfig:
    rho: float
    rho_bar: float | None = None  # default 2*rho
    inner_budget: int = 1000
    inner_tol: float = 0.0  # 0 disables early stopping

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.inner_budget < 1:
            raise ValueError("inner_budget must be >= 1")
        if self.rho_bar is None:
            object.__setattr__(self, "rho_bar", 2.0 * self.rho)
        if not self.rho_bar > self.rho:
            raise ValueError("rho_bar must exceed rho")


def _quadratic_closed_form(instance, x, rho_bar):
    # componentwise: argmin_y r(y) + sum_i w_i (y_i - z_i)^2 / 2
    w = instance.diag + rho_bar
    z = (instance.diag * instance.center + rho_bar * x) / w
    reg = instance.regularizer
    if reg.kind == ZERO:
        return z
    if reg.kind == L1:
        return soft_threshold(z, reg.lam / w)
    if reg.kind == BOX:
        return np.clip(z, reg.lo, reg.hi)
    if reg.kind == BOX_L1:
        return np.clip(soft_threshold(z, reg.lam / w), reg.lo, reg.hi)
    return None  # ball coupling is not separable; use the iterative path


def moreau_grad_norm(instance, x, cfg: MoreauConfig, method="auto"):
    """Envelope gradient-norm estimate at x; returns (estimate, x_tilde)."""
    x = np.asarray(x, dtype=float)
    rb = cfg.rho_bar
    if method not in ("auto", "closed_form", "iterative"):
        raise ValueError("method must be 'auto', 'closed_form' or 'iterative'")
    x_tilde = None
    if method in ("auto", "closed_form") and isinstance(instance, QuadraticInstance):
        x_tilde = _quadratic_closed_form(instance, x, rb)
    if x_tilde is None and method == "closed_form":
        raise ValueError("no closed form available for this instance")
    if x_tilde is None:
        x_tilde = _inner_solve(instance, x, cfg)
    phi_x = instance.full_objective(x)
    phi_t = instance.full_objective(x_tilde)
    assert phi_t <= phi_x + 1e-9 * max(1.0, abs(phi_x)), "inner solve left the envelope"
    return rb * float(np.linalg.norm(x - x_tilde)), x_tilde


def _inner_solve(instance, x, cfg):
    rb, mu = cfg.rho_bar, cfg.rho_bar - cfg.rho
    full_batch = np.arange(instance.num_samples)
    reg = instance.regularizer

    def inner_obj(y):
        return instance.full_objective(y) + 0.5 * rb * float(np.dot(y - x, y - x))

    y = x.copy()
    best_y, best_val = y, inner_obj(y)
    for t in range(1, cfg.inner_budget + 1):
        g = instance.sample_subgradient(y, full_batch) + rb * (y - x)
        eta = 2.0 / (mu * (t + 1))
        y_next = prox(reg, eta, y - eta * g)
        val = inner_obj(y_next)
        if val < best_val:
            best_val, best_y = val, y_next
        if cfg.inner_tol > 0 and np.linalg.norm(y_next - y) <= cfg.inner_tol * max(1.0, float(np.linalg.norm(y))):
            y = y_next
            break
        y = y_next
    return best_y


def select_T(alphas, k0, rng):
    """Random output index T in {k0..K} with P(T=k) proportional to alpha_k."""
    alphas = np.asarray(alphas, dtype=float)
    K = alphas.size
    if k0 < 1 or k0 > K:
        raise ValueError(f"k0 must lie in [1, {K}]")
    if np.any(alphas <= 0):
        raise ValueError("all step sizes must be positive")
    w = alphas[k0 - 1:]
    return int(k0 + rng.choice(w.size, p=w / w.sum()))


# -- feasibility conditions ---------------------------------------------------

WEAKLY_CONVEX_FIXED = "weakly_convex_fixed"
WEAKLY_CONVEX_VARYING = "weakly_convex_varying"
COMPOSITE_FIXED = "composite_fixed"
COMPOSITE_VARYING = "composite_varying"
SMOOTH_CONSTANT = "smooth_constant"
SMOOTH_SHIFTED = "smooth_shifted"
REGIMES = (WEAKLY_CONVEX_FIXED, WEAKLY_CONVEX_VARYING, COMPOSITE_FIXED,
           COMPOSITE_VARYING, SMOOTH_CONSTANT, SMOOTH_SHIFTED)

_REQUIRED = {
    WEAKLY_CONVEX_FIXED: ("alpha", "beta", "K", "rho", "rho_bar"),
    WEAKLY_CONVEX_VARYING: ("alpha", "beta_cap", "rho", "rho_bar"),
    COMPOSITE_FIXED: ("alpha", "beta", "K", "tau", "rho", "rho_bar"),
    COMPOSITE_VARYING: ("alpha", "beta_cap", "a", "tau", "rho", "rho_bar"),
    SMOOTH_CONSTANT: ("alpha", "beta", "K", "tau", "rho"),
    SMOOTH_SHIFTED: ("alpha", "beta", "a", "tau", "rho"),
}


@dataclass
class ConditionReport:
    regime: str
    feasible: bool
    violated: list
    checked: dict  # name -> (satisfied, human-readable inequality)

    def as_text(self):
        lines = [f"regime: {self.regime}", f"feasible: {self.feasible}"]
        for name, (ok, detail) in self.checked.items():
            lines.append(f"  [{'ok' if ok else 'VIOLATED'}] {name}: {detail}")
        return "\n".join(lines)


def check_parameter_conditions(regime, params):
    """Evaluate the regime's feasibility inequalities; name each violation."""
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    missing = [p for p in _REQUIRED[regime] if params.get(p) is None]
    if missing:
        raise ValueError(f"regime {regime} missing parameter(s): {', '.join(missing)}")
    p = {k: float(v) for k, v in params.items() if v is not None}

    checked = {}

    def check(name, ok, detail):
        checked[name] = (bool(ok), detail)

    alpha = p["alpha"]
    rho = p["rho"]
    check("step_positive", alpha > 0, f"alpha={alpha:g} > 0")

    if regime == WEAKLY_CONVEX_FIXED:
        beta, K, rb = p["beta"], p["K"], p["rho_bar"]
        check("beta_nonnegative", beta >= 0, f"beta={beta:g} >= 0")
        check("rho_bar_in_range", rho < rb <= 2 * rho,
              f"rho < rho_bar <= 2*rho with rho={rho:g}, rho_bar={rb:g}")
        check("step_within_prox_bound", alpha / math.sqrt(K) <= 1 / rb,
              f"alpha/sqrt(K)={alpha / math.sqrt(K):g} <= 1/rho_bar={1 / rb:g}")
        check("inertia_margin", beta / K ** 0.25 < 1 - alpha * rho / (2 * math.sqrt(K)),
              f"beta/K^0.25={beta / K ** 0.25:g} < 1 - alpha*rho/(2 sqrt(K))"
              f"={1 - alpha * rho / (2 * math.sqrt(K)):g}")

    elif regime == WEAKLY_CONVEX_VARYING:
        bc, rb = p["beta_cap"], p["rho_bar"]
        check("beta_cap_nonnegative", bc >= 0, f"beta_cap={bc:g} >= 0")
        check("rho_bar_in_range", rho < rb <= 2 * rho,
              f"rho < rho_bar <= 2*rho with rho={rho:g}, rho_bar={rb:g}")
        check("step_within_prox_bound", alpha <= 1 / rb,
              f"alpha={alpha:g} <= 1/rho_bar={1 / rb:g}")
        check("inertia_cap_margin", bc < 1 - alpha * rho / 2,
              f"beta_cap={bc:g} < 1 - alpha*rho/2={1 - alpha * rho / 2:g}")

    elif regime == COMPOSITE_FIXED:
        beta, K, tau, rb = p["beta"], p["K"], p["tau"], p["rho_bar"]
        check("beta_nonnegative", beta >= 0, f"beta={beta:g} >= 0")
        check("tau_nonnegative", tau >= 0, f"tau={tau:g} >= 0")
        check("rho_bar_exceeds_rho", rb > rho, f"rho_bar={rb:g} > rho={rho:g}")
        check("step_within_prox_bound", alpha / math.sqrt(K) <= 1 / rb,
              f"alpha/sqrt(K)={alpha / math.sqrt(K):g} <= 1/rho_bar={1 / rb:g}")
        gamma = 0.5 - alpha * rho / (2 * math.sqrt(K)) - tau ** 2 * alpha ** 2 * rho ** 2 / K \
            - beta / K ** 0.25
        check("gamma_margin", gamma > 0,
              f"1/2 - alpha*rho/(2 sqrt(K)) - tau^2 alpha^2 rho^2/K - beta/K^0.25"
              f" = {gamma:g} > 0")

    elif regime == COMPOSITE_VARYING:
        bc, a, tau, rb = p["beta_cap"], p["a"], p["tau"], p["rho_bar"]
        check("beta_cap_nonnegative", bc >= 0, f"beta_cap={bc:g} >= 0")
        check("tau_nonnegative", tau >= 0, f"tau={tau:g} >= 0")
        check("shift_at_least_one", a >= 1, f"a={a:g} >= 1")
        check("rho_bar_exceeds_rho", rb > rho, f"rho_bar={rb:g} > rho={rho:g}")
        check("step_within_prox_bound", alpha / math.sqrt(a) <= 1 / rb,
              f"alpha/sqrt(a)={alpha / math.sqrt(a):g} <= 1/rho_bar={1 / rb:g}")
        gamma = 0.5 * (1 - alpha * rho / math.sqrt(a) - bc ** 2
                       - 2 * tau ** 2 * rho ** 2 * alpha ** 2 / a)
        check("gamma_margin", gamma > 0,
              f"(1 - alpha*rho/sqrt(a) - beta_cap^2 - 2 tau^2 rho^2 alpha^2/a)/2"
              f" = {gamma:g} > 0")

    elif regime in (SMOOTH_CONSTANT, SMOOTH_SHIFTED):
        beta, tau = p["beta"], p["tau"]
        check("beta_in_unit_interval", 0 <= beta < 1, f"0 <= beta={beta:g} < 1")
        check("tau_nonnegative", tau >= 0, f"tau={tau:g} >= 0")
        if regime == SMOOTH_SHIFTED:
            a = p["a"]
            horizon = a
            check("shift_covers_delay", a >= 2 * tau, f"a={a:g} >= 2*tau={2 * tau:g}")
            check("shift_large_enough", a * math.sqrt(a + 1) >= (1 - beta) / (2 * alpha),
                  f"a*sqrt(a+1)={a * math.sqrt(a + 1):g} >= (1-beta)/(2 alpha)"
                  f"={(1 - beta) / (2 * alpha):g}")
        else:
            horizon = p["K"]
        if 0 <= beta < 1:
            lhs1 = tau ** 2 + tau / (1 - beta) + beta ** 2 / (1 - beta ** 2)
            rhs1 = (1 - beta) ** 2 * horizon / (2 * alpha ** 2 * rho ** 2)
            check("delay_inertia_budget", lhs1 <= rhs1, f"{lhs1:g} <= {rhs1:g}")
            lhs2 = 3 * rho + 2 * (1 + 5 * rho) * beta ** 2 / ((1 - beta) * (1 - beta ** 2))
            rhs2 = (1 - beta) * math.sqrt(horizon) / (2 * alpha)
            check("curvature_step_budget", lhs2 <= rhs2, f"{lhs2:g} <= {rhs2:g}")
        else:
            check("delay_inertia_budget", False, "undefined for beta outside [0,1)")
            check("curvature_step_budget", False, "undefined for beta outside [0,1)")

    violated = [name for name, (ok, _) in checked.items() if not ok]
    return ConditionReport(regime=regime, feasible=not violated,
                           violated=violated, checked=checked)
