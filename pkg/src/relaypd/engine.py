"""State machine: relay step, centralized step, masking, run orchestration.

Two execution backends produce the same trajectories: a plain numpy loop
(always available) and a compiled kernel (built at install time when a C
compiler is present). `run` picks the compiled one when it imported
cleanly; set RELAYPD_BACKEND=numpy or =cext to force a choice.
"""
import math
import os
from dataclasses import dataclass

import numpy as np

from . import metrics, objective, privacy, topology
from .errors import DivergenceError, ValidationError

__all__ = [
    "RunState",
    "MaskSpec",
    "FullUpdate",
    "Trajectory",
    "init_state",
    "relay_step",
    "centralized_step",
    "apply_mask",
    "run",
    "run_centralized",
    "available_backends",
    "default_backend",
]

_BETA_TOL = 1e-12


@dataclass
class RunState:
    """Everything one run owns. Arrays are row-per-agent.

    u is the exact dual aggregate sum_i lam_i maintained by recursion;
    u_tilde is the published (perturbed) copy the next x-update consumes.
    The iteration counter k starts at 1 and `current` is 0-based.
    """

    lam: np.ndarray
    y: np.ndarray
    x: np.ndarray
    u: np.ndarray
    u_tilde: np.ndarray
    tau: np.ndarray
    k: int
    current: int
    beta: float
    alphas: np.ndarray
    problem: objective.ProblemInstance
    rng_relay: np.random.Generator
    rng_noise: np.random.Generator


@dataclass(frozen=True)
class MaskSpec:
    """Selects one agent's lambda/y blocks plus the global x block."""

    n: int
    active: int

    def __post_init__(self):
        if not isinstance(self.active, int):
            raise TypeError("mask takes exactly one integer agent index")
        if not (0 <= self.active < self.n):
            raise ValidationError("active agent out of range")


@dataclass(frozen=True)
class FullUpdate:
    """All-agents update, before any activation mask is applied."""

    lam_half: np.ndarray
    lam: np.ndarray
    x: np.ndarray
    y: np.ndarray
    noise: np.ndarray


@dataclass
class Trajectory:
    records: list
    final_state: RunState
    xi: int
    comm: int
    backend: str


def init_state(
    p,
    s,
    start=0,
    x0=None,
    y0=None,
    seed_relay=None,
    seed_noise=None,
):
    """Fresh RunState with zero duals at iteration k = 1.

    Both the per-agent bound and the matrix condition are checked here
    so a bad stepsize set cannot start a run. beta is pinned to
    1/(2(n+1)); any other coupling stepsize breaks the contraction
    argument and is rejected rather than silently accepted.
    """
    n, q = p.n, p.q
    report = objective.validate_stepsizes(s, p, mode="simple")
    if not report.ok:
        raise ValidationError("stepsizes rejected: " + report.message)
    report = objective.validate_stepsizes(s, p, mode="matrix")
    if not report.ok:
        raise ValidationError("stepsizes rejected: " + report.message)
    if abs(s.beta - 1.0 / (2.0 * (n + 1))) > _BETA_TOL:
        raise ValidationError("beta must equal 1/(2(n+1)) for this scheme")
    if not (0 <= start < n):
        raise ValidationError("start agent out of range")
    x0 = np.zeros(q) if x0 is None else np.array(x0, dtype=float)
    if x0.shape != (q,):
        raise ValidationError("x0 must have dimension q")
    if y0 is None:
        y = np.tile(x0, (n, 1))
    else:
        y = np.array(y0, dtype=float)
        if y.shape != (n, q):
            raise ValidationError("y0 must be one row per agent")
    return RunState(
        lam=np.zeros((n, q)),
        y=y,
        x=x0,
        u=np.zeros(q),
        u_tilde=np.zeros(q),
        tau=np.zeros(n, dtype=np.int64),
        k=1,
        current=int(start),
        beta=float(s.beta),
        alphas=np.array(s.alphas, dtype=float),
        problem=p,
        rng_relay=np.random.default_rng(seed_relay),
        rng_noise=np.random.default_rng(seed_noise),
    )


def _require_finite(arr, state, quantity):
    if not np.all(np.isfinite(arr)):
        raise DivergenceError(
            "non-finite %s at iteration %d (agent %d)"
            % (quantity, state.k, state.current + 1),
            iteration=state.k,
            agent=state.current + 1,
            quantity=quantity,
        )


def relay_step(state, noise=None, transition=None):
    """One activation of the current agent; returns the next RunState.

    The x-update reads the published aggregate u_tilde (which already
    carries the previous step's perturbation) plus the coupling
    correction beta * (n x - sum_j y_j). `noise` is this step's fresh
    perturbation; it only enters the aggregate published for the NEXT
    step. When a transition matrix is given the next active agent is
    sampled from the relay stream, otherwise the baton stays put.
    """
    p = state.problem
    n, q = p.n, p.q
    i = state.current
    beta = state.beta
    eps = np.zeros(q) if noise is None else np.asarray(noise, dtype=float)
    if eps.shape != (q,):
        raise ValidationError("noise must have dimension q")

    lam_half_i = state.lam[i] + beta * (state.x - state.y[i])
    x_new = objective.prox_reg(
        p.regularizer,
        state.x - (state.u_tilde + beta * (n * state.x - state.y.sum(axis=0))),
        p.reg_weight,
    )
    _require_finite(x_new, state, "x")
    y_new_i = state.y[i] - state.alphas[i] * (
        objective.grad_local(p.losses[i], state.y[i]) - lam_half_i
    )
    _require_finite(y_new_i, state, "y")
    lam_new_i = lam_half_i + beta * ((x_new - state.x) - (y_new_i - state.y[i]))
    _require_finite(lam_new_i, state, "lambda")

    lam = state.lam.copy()
    lam[i] = lam_new_i
    y = state.y.copy()
    y[i] = y_new_i
    u = state.u + (lam_new_i - state.lam[i])
    tau = state.tau.copy()
    tau[i] += 1
    nxt = state.current
    if transition is not None:
        nxt = topology.sample_next(transition, i, state.rng_relay)
    return RunState(
        lam=lam,
        y=y,
        x=x_new,
        u=u,
        u_tilde=u - eps,
        tau=tau,
        k=state.k + 1,
        current=nxt,
        beta=beta,
        alphas=state.alphas,
        problem=p,
        rng_relay=state.rng_relay,
        rng_noise=state.rng_noise,
    )


def centralized_step(state, noise=None):
    """The all-agents update the relay step is a coordinate sample of.

    Computes every block of the full operator at the current state; the
    perturbation enters the x-update directly (x reads the aggregate
    dual minus noise).
    """
    p = state.problem
    n, q = p.n, p.q
    beta = state.beta
    eps = np.zeros(q) if noise is None else np.asarray(noise, dtype=float)
    if eps.shape != (q,):
        raise ValidationError("noise must have dimension q")

    lam_half = state.lam + beta * (state.x[None, :] - state.y)
    x_hat = objective.prox_reg(
        p.regularizer,
        state.x - (lam_half.sum(axis=0) - eps),
        p.reg_weight,
    )
    _require_finite(x_hat, state, "x")
    grads = np.stack(
        [objective.grad_local(p.losses[i], state.y[i]) for i in range(n)]
    )
    y_hat = state.y - state.alphas[:, None] * (grads - lam_half)
    _require_finite(y_hat, state, "y")
    lam_hat = lam_half + beta * ((x_hat - state.x)[None, :] - (y_hat - state.y))
    _require_finite(lam_hat, state, "lambda")
    return FullUpdate(lam_half=lam_half, lam=lam_hat, x=x_hat, y=y_hat, noise=eps)


def apply_mask(base, full, mask):
    """Keep only the active agent's blocks (plus x) from a full update.

    The published aggregate is rebuilt exactly as the relay does it:
    u advances by the active agent's dual increment and the full
    update's noise is subtracted from the published copy.
    """
    if mask.n != base.problem.n:
        raise ValidationError("mask and state disagree on the agent count")
    a = mask.active
    lam = base.lam.copy()
    lam[a] = full.lam[a]
    y = base.y.copy()
    y[a] = full.y[a]
    u = base.u + (full.lam[a] - base.lam[a])
    tau = base.tau.copy()
    tau[a] += 1
    return RunState(
        lam=lam,
        y=y,
        x=full.x.copy(),
        u=u,
        u_tilde=u - full.noise,
        tau=tau,
        k=base.k + 1,
        current=base.current,
        beta=base.beta,
        alphas=base.alphas,
        problem=base.problem,
        rng_relay=base.rng_relay,
        rng_noise=base.rng_noise,
    )


# -- backend handling -------------------------------------------------


def _load_kernels():
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_KERNELS = _load_kernels()


def available_backends():
    """Names of the execution backends importable right now."""
    names = ["numpy"]
    if _KERNELS is not None:
        names.append("cext")
    return names


def default_backend():
    """Environment override if set, else the fastest available backend."""
    env = os.environ.get("RELAYPD_BACKEND")
    if env:
        if env not in ("numpy", "cext"):
            raise ValidationError(
                "RELAYPD_BACKEND must be 'numpy' or 'cext', got %r" % env
            )
        if env == "cext" and _KERNELS is None:
            raise ValidationError(
                "RELAYPD_BACKEND=cext but the compiled kernel is not installed"
            )
        return env
    return "cext" if _KERNELS is not None else "numpy"


def _presample_path(transition, start, K, rng):
    """Active-agent indices a_1..a_{K+1}; a_1 = start, K chain draws."""
    path = np.empty(K + 1, dtype=np.int64)
    path[0] = start
    for k in range(K):
        path[k + 1] = topology.sample_next(transition, int(path[k]), rng)
    return path


def _presample_noise(schedule, path, K, q, rng):
    """Noise vectors for steps 1..K, variance keyed to the activation count.

    The variance at step k uses the active agent's count including the
    current activation, so an agent's first turn draws from the initial
    variance. Draw order (one q-block per step, in step order) matches
    sampling inside the loop exactly, values included.
    """
    if schedule is None:
        return np.zeros((K, q))
    Z = rng.standard_normal((K, q))
    tau = {}
    for k in range(K):
        a = int(path[k])
        tau[a] = tau.get(a, 0) + 1
        var = privacy.noise_variance(schedule, tau[a])
        Z[k] *= math.sqrt(var)
    return Z


def run(
    p,
    s,
    graph,
    schedule,
    K,
    seed_relay,
    seed_noise,
    start=0,
    x0=None,
    y0=None,
    reference=None,
    backend=None,
    delta=None,
):
    """Execute K relay steps on a graph and record metrics each iteration.

    The agent path and all noise are presampled from the two streams so
    both backends consume randomness identically. The cumulative privacy
    column is filled only when a schedule and delta are given; noiseless
    runs report zero spend. Returns a Trajectory whose records start
    with the initial state (k = 0 row, no active agent).
    """
    if K < 0:
        raise ValidationError("iteration budget must be nonnegative")
    if backend is None:
        backend = default_backend()
    if backend not in available_backends():
        raise ValidationError("backend %r is not available" % (backend,))
    if reference is None:
        reference = metrics.reference_solution(p)

    state = init_state(
        p, s, start=start, x0=x0, y0=y0,
        seed_relay=seed_relay, seed_noise=seed_noise,
    )
    transition = topology.transition_matrix(graph) if p.n > 1 else None
    if transition is not None:
        path = _presample_path(transition, state.current, K, state.rng_relay)
    else:
        path = np.zeros(K + 1, dtype=np.int64)
    eps = _presample_noise(schedule, path, K, p.q, state.rng_noise)

    x0_arr = state.x.copy()
    denom = float(np.linalg.norm(x0_arr - reference.x_star))

    def rel(x):
        d = float(np.linalg.norm(x - reference.x_star))
        return d if denom == 0.0 else d / denom

    records = [
        metrics.IterationRecord(
            k=0,
            agent=None,
            rel_err=rel(state.x),
            s_dist=metrics.s_norm_dist(
                state.lam, state.x, state.y, reference, state.beta, state.alphas
            ),
            consensus=metrics.consensus_gap(state.x, state.y),
            comm=0,
            xi=0,
            cum_eps=0.0,
        )
    ]

    if backend == "cext" and K > 0:
        rel_err, s_dist, consensus, xi_arr = _run_kernel(
            state, path, eps, reference, denom, K
        )
    elif K > 0:
        rel_err = np.empty(K)
        s_dist = np.empty(K)
        consensus = np.empty(K)
        xi_arr = np.empty(K, dtype=np.int64)
        for k in range(K):
            state.current = int(path[k])
            state = relay_step(state, noise=eps[k])
            state.current = int(path[k + 1])
            rel_err[k] = rel(state.x)
            s_dist[k] = metrics.s_norm_dist(
                state.lam, state.x, state.y, reference, state.beta, state.alphas
            )
            consensus[k] = metrics.consensus_gap(state.x, state.y)
            xi_arr[k] = int(state.tau.max())

    alpha_max = float(np.max(state.alphas))
    L_max = float(np.max(p.lipschitz_constants))
    for k in range(K):
        if schedule is not None and delta is not None:
            cum = privacy.epsilon_for_xi(
                alpha_max, state.beta, L_max, schedule, delta, int(xi_arr[k])
            )
        else:
            cum = 0.0
        records.append(
            metrics.IterationRecord(
                k=k + 1,
                agent=int(path[k]) + 1,
                rel_err=float(rel_err[k]),
                s_dist=float(s_dist[k]),
                consensus=float(consensus[k]),
                comm=k + 1,
                xi=int(xi_arr[k]),
                cum_eps=cum,
            )
        )
    return Trajectory(
        records=records,
        final_state=state,
        xi=int(state.tau.max()),
        comm=K,
        backend=backend,
    )


def _run_kernel(state, path, eps, reference, denom, K):
    """Drive the compiled loop; mutates `state` arrays in place."""
    p = state.problem
    n, q = p.n, p.q
    mlen = np.array([loss.B.shape[0] for loss in p.losses], dtype=np.int64)
    m_max = int(mlen.max())
    B_pad = np.zeros((n, m_max, q))
    b_pad = np.zeros((n, m_max))
    kinds = np.zeros(n, dtype=np.int64)
    for i, loss in enumerate(p.losses):
        B_pad[i, : mlen[i]] = loss.B
        b_pad[i, : mlen[i]] = loss.b
        kinds[i] = 0 if loss.kind == objective.LEAST_SQUARES else 1
    reg = p.regularizer
    if reg.kind == "none":
        reg_kind, t1, t2 = 0, 0.0, 0.0
    elif reg.kind == "l1":
        reg_kind, t1, t2 = 1, p.reg_weight * reg.nu, 0.0
    else:
        reg_kind, t1, t2 = 2, p.reg_weight * reg.nu1, p.reg_weight * reg.nu2

    rel_err = np.empty(K)
    s_dist = np.empty(K)
    consensus = np.empty(K)
    xi_arr = np.empty(K, dtype=np.int64)
    code, err_k, err_agent = _KERNELS.relay_loop(
        B_pad,
        b_pad,
        mlen,
        kinds,
        reg_kind,
        t1,
        t2,
        state.beta,
        state.alphas,
        state.lam,
        state.y,
        state.x,
        state.u,
        state.u_tilde,
        state.tau,
        path,
        np.ascontiguousarray(eps),
        reference.x_star,
        reference.lam_star,
        denom,
        rel_err,
        s_dist,
        consensus,
        xi_arr,
    )
    if code:
        quantity = {1: "x", 2: "y", 3: "lambda"}[code]
        raise DivergenceError(
            "non-finite %s at iteration %d (agent %d)"
            % (quantity, err_k, err_agent),
            iteration=err_k,
            agent=err_agent,
            quantity=quantity,
        )
    state.k = K + 1
    state.current = int(path[K])
    return rel_err, s_dist, consensus, xi_arr


def run_centralized(p, s, K, reference=None, x0=None, y0=None):
    """Iterate the full (all-agents) update K times, noiseless.

    Returns one CentralizedRecord per iteration including the k = 0
    starting point; used for monotonicity checks and as the dense
    baseline the relay trades per-step progress against.
    """
    if reference is None:
        reference = metrics.reference_solution(p)
    state = init_state(p, s, x0=x0, y0=y0)
    denom = float(np.linalg.norm(state.x - reference.x_star))

    def rel(x):
        d = float(np.linalg.norm(x - reference.x_star))
        return d if denom == 0.0 else d / denom

    records = [
        metrics.CentralizedRecord(
            k=0,
            rel_err=rel(state.x),
            s_dist=metrics.s_norm_dist(
                state.lam, state.x, state.y, reference, state.beta, state.alphas
            ),
        )
    ]
    for k in range(K):
        full = centralized_step(state)
        state.lam = full.lam
        state.x = full.x
        state.y = full.y
        state.u = full.lam.sum(axis=0)
        state.u_tilde = state.u.copy()
        state.k += 1
        records.append(
            metrics.CentralizedRecord(
                k=k + 1,
                rel_err=rel(state.x),
                s_dist=metrics.s_norm_dist(
                    state.lam, state.x, state.y, reference, state.beta, state.alphas
                ),
            )
        )
    return records
