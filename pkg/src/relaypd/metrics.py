"""Error metrics, the reference solver, and linear-rate fitting."""
import math
from dataclasses import dataclass

import numpy as np

from . import objective
from .errors import OracleError, ValidationError

__all__ = [
    "FLOOR",
    "IterationRecord",
    "CentralizedRecord",
    "ReferenceSolution",
    "prox_grad_step",
    "reference_solution",
    "check_optimality",
    "relative_error",
    "s_norm_dist",
    "consensus_gap",
    "update_counters",
    "fit_linear_rate",
]

# relative errors at or below this are treated as numerically converged
# and excluded from rate fits
FLOOR = 1e-13


@dataclass
class IterationRecord:
    """Per-iteration row of a decentralized run. agent is 1-based."""

    k: int
    agent: int
    rel_err: float
    s_dist: float
    consensus: float
    comm: int
    xi: int
    cum_eps: float


@dataclass
class CentralizedRecord:
    k: int
    rel_err: float
    s_dist: float


@dataclass(frozen=True)
class ReferenceSolution:
    """High-accuracy minimizer with per-agent optimal duals."""

    x_star: np.ndarray
    lam_star: np.ndarray
    objective: float
    iterations: int


def prox_grad_step(p, x, step):
    """One proximal gradient step on the full objective."""
    g = np.zeros(p.q)
    for loss in p.losses:
        g += objective.grad_local(loss, x)
    return objective.prox_reg(p.regularizer, x - step * g, step * p.reg_weight)


def _full_lipschitz(p):
    """lambda_max of sum_i c_i B_i^T B_i with c_i the curvature constant."""
    H = np.zeros((p.q, p.q))
    for loss in p.losses:
        c = 1.0 if loss.kind == objective.LEAST_SQUARES else 0.25
        H += c * (loss.B.T @ loss.B)
    return objective._sym_spectral(H)


def reference_solution(p, tol=1e-12, max_iter=10**6):
    """Solve the instance to near machine precision by proximal gradient.

    Stops when the gradient-mapping norm ||x - T(x)|| / step falls below
    tol. The result carries lam_star_i = grad f_i(x_star), the duals the
    decentralized iteration converges to.
    """
    L_F = _full_lipschitz(p)
    if L_F <= 0.0:
        raise OracleError("objective has no usable curvature bound")
    step = 1.0 / L_F
    x = np.zeros(p.q)
    for it in range(1, max_iter + 1):
        x_new = prox_grad_step(p, x, step)
        if np.linalg.norm(x - x_new) / step <= tol:
            x = x_new
            break
        x = x_new
    else:
        raise OracleError(
            "reference solver did not reach tolerance %.1e in %d iterations"
            % (tol, max_iter)
        )
    resid = check_optimality(p, x)
    if resid > 1e-8:
        raise OracleError(
            "reference point fails the optimality check (residual %.3e)" % resid
        )
    lam_star = np.stack([objective.grad_local(loss, x) for loss in p.losses])
    return ReferenceSolution(
        x_star=x,
        lam_star=lam_star,
        objective=objective.objective_value(p, x),
        iterations=it,
    )


def check_optimality(p, x_star):
    """Max-norm violation of the first-order condition at x_star.

    For l1 the condition is -sum_i grad f_i(x_star) in w * nu *
    sign-subdifferential, checked coordinatewise; elastic net shifts by
    the smooth quadratic part first.
    """
    x_star = np.asarray(x_star, dtype=float)
    v = np.zeros(p.q)
    for loss in p.losses:
        v -= objective.grad_local(loss, x_star)
    reg = p.regularizer
    w = p.reg_weight
    if reg.kind == "none":
        return float(np.max(np.abs(v))) if v.size else 0.0
    if reg.kind == "elastic-net":
        v = v - 2.0 * w * reg.nu2 * x_star
        t = w * reg.nu1
    else:
        t = w * reg.nu
    resid = np.where(
        x_star != 0.0,
        np.abs(v - t * np.sign(x_star)),
        np.maximum(np.abs(v) - t, 0.0),
    )
    return float(np.max(resid)) if resid.size else 0.0


def relative_error(x, ref, x0):
    """||x - x*|| / ||x0 - x*||, absolute when the start is the solution."""
    num = np.linalg.norm(x - ref.x_star)
    den = np.linalg.norm(np.asarray(x0, dtype=float) - ref.x_star)
    if den == 0.0:
        return float(num)
    return float(num / den)


def s_norm_dist(lam, x, y, ref, beta, alphas):
    """Distance to the saddle point in the diagonal S-weighted norm.

    S weights the dual block by 1/beta, the consensus block by 1, and
    each primal block by 1/alpha_i.
    """
    d2 = float(np.sum((lam - ref.lam_star) ** 2)) / beta
    d2 += float(np.sum((x - ref.x_star) ** 2))
    d2 += float(np.sum((y - ref.x_star[None, :]) ** 2 / np.asarray(alphas)[:, None]))
    return math.sqrt(d2)


def consensus_gap(x, y):
    """max_i ||y_i - x||."""
    return float(np.max(np.linalg.norm(y - x[None, :], axis=1)))


def update_counters(tau, active, comm):
    """Return (tau', xi', comm') after one activation of agent `active`."""
    tau = np.array(tau, dtype=np.int64, copy=True)
    tau[active] += 1
    return tau, int(tau.max()), comm + 1


def fit_linear_rate(errors, tail_fraction=0.5):
    """Least-squares slope of log(error) against iteration index.

    Entries at or below FLOOR are dropped as converged before the tail
    window (the last tail_fraction of survivors, by original index) is
    taken. Needs at least 10 usable points. Returns (slope, r_squared).
    """
    errors = np.asarray(errors, dtype=float)
    if np.any(errors < 0.0):
        raise ValueError("errors must be nonnegative")
    if not (0.0 < tail_fraction <= 1.0):
        raise ValueError("tail fraction must lie in (0, 1]")
    idx = np.nonzero(errors > FLOOR)[0]
    keep = max(int(math.ceil(tail_fraction * idx.size)), 0)
    idx = idx[idx.size - keep :]
    if idx.size < 10:
        raise ValueError(
            "need at least 10 points above the noise floor to fit a rate"
        )
    ylog = np.log(errors[idx])
    A = np.stack([idx.astype(float), np.ones(idx.size)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(A, ylog, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((ylog - fit) ** 2))
    ss_tot = float(np.sum((ylog - ylog.mean()) ** 2))
    if ss_tot == 0.0:
        # constant target: the flat line fits it perfectly up to rounding
        perfect = ss_res <= 1e-20 * max(1.0, float(np.sum(ylog**2)))
        r2 = 1.0 if perfect else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(coef[0]), r2
