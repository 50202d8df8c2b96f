"""Local smooth losses, the shared regularizer, and stepsize validation.

The composite objective is sum_i f_i(x) + w * r(x) where each f_i is
held by one agent and r is proximable. The prox weight w defaults to
the agent count n (the consensus reformulation attaches one copy of r
per agent) and is configurable on :class:`ProblemInstance`.
"""
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedRegularizerError, ValidationError

__all__ = [
    "LocalLoss",
    "Regularizer",
    "ProblemInstance",
    "StepsizeSet",
    "ValidationReport",
    "least_squares_loss",
    "logistic_loss",
    "grad_local",
    "loss_value",
    "lipschitz",
    "prox_reg",
    "reg_value",
    "objective_value",
    "problem_instance",
    "stepsizes_from_fraction",
    "validate_stepsizes",
]

LEAST_SQUARES = "least-squares"
LOGISTIC = "logistic"

_UNSUPPORTED_REG = ("linf", "fused-lasso")


def _spectral_norm_sq(B, tol=1e-10, max_iter=200_000):
    """Largest eigenvalue of B^T B by power iteration.

    The start vector mixes a constant with a fixed irrational-frequency
    cosine so it cannot be orthogonal to the top eigenspace for any
    structured B that occurs in practice.
    """
    q = B.shape[1]
    v = 1.0 + 0.1 * np.cos(1.7 * np.arange(q))
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = B.T @ (B @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(v @ (B.T @ (B @ v)))
        if abs(new - lam) <= tol * max(new, 1.0):
            return new
        lam = new
    return lam


def _sym_spectral(H, tol=1e-10, max_iter=200_000):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    q = H.shape[0]
    v = 1.0 + 0.1 * np.cos(1.7 * np.arange(q))
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = H @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(v @ (H @ v))
        if abs(new - lam) <= tol * max(new, 1.0):
            return new
        lam = new
    return lam


@dataclass(frozen=True)
class LocalLoss:
    """One agent's smooth loss: data (B, b) plus a cached Lipschitz constant.

    Use :func:`least_squares_loss` or :func:`logistic_loss` to build one;
    they compute and validate L.
    """

    kind: str
    B: np.ndarray
    b: np.ndarray
    L: float


def _check_data(B, b):
    B = np.asarray(B, dtype=float)
    b = np.asarray(b, dtype=float)
    if B.ndim != 2:
        raise ValidationError("design matrix must be 2-d")
    if b.ndim != 1 or b.shape[0] != B.shape[0]:
        raise ValidationError(
            "targets must be a vector with one entry per row of the design"
        )
    if not (np.all(np.isfinite(B)) and np.all(np.isfinite(b))):
        raise ValidationError("loss data must be finite")
    return B, b


def least_squares_loss(B, b):
    """Loss 0.5 * ||B y - b||^2 with L = lambda_max(B^T B)."""
    B, b = _check_data(B, b)
    L = _spectral_norm_sq(B)
    if L <= 0.0:
        raise ValidationError("all-zero design matrix has no positive Lipschitz constant")
    return LocalLoss(kind=LEAST_SQUARES, B=B, b=b, L=L)


def logistic_loss(B, b):
    """Loss sum_j log(1 + exp((B y)_j)) - <b, B y> with labels in {0, 1}.

    L = lambda_max(B^T B) / 4, the per-sample sigmoid curvature bound
    folded into the design.
    """
    B, b = _check_data(B, b)
    if not np.all(np.isin(b, (0.0, 1.0))):
        raise ValidationError("logistic labels must be 0 or 1 after ingestion")
    L = 0.25 * _spectral_norm_sq(B)
    if L <= 0.0:
        raise ValidationError("all-zero design matrix has no positive Lipschitz constant")
    return LocalLoss(kind=LOGISTIC, B=B, b=b, L=L)


def _sigmoid(z):
    # tanh form, stable at both tails
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def grad_local(loss, y):
    """Gradient of one local loss at y."""
    y = np.asarray(y, dtype=float)
    if y.shape != (loss.B.shape[1],):
        raise ValidationError(
            "gradient point has dimension %d, loss expects %d"
            % (y.size, loss.B.shape[1])
        )
    z = loss.B @ y
    if loss.kind == LEAST_SQUARES:
        return loss.B.T @ (z - loss.b)
    return loss.B.T @ (_sigmoid(z) - loss.b)


def loss_value(loss, y):
    """Value of one local loss at y."""
    z = loss.B @ np.asarray(y, dtype=float)
    if loss.kind == LEAST_SQUARES:
        d = z - loss.b
        return 0.5 * float(d @ d)
    return float(np.sum(np.logaddexp(0.0, z)) - loss.b @ z)


def lipschitz(loss):
    return loss.L


@dataclass(frozen=True)
class Regularizer:
    """Global regularizer r(x).

    kind "none", "l1" (weight nu), or "elastic-net" (nu1 on the l1 part,
    nu2 on the squared part). The kinds "linf" and "fused-lasso" are
    recognized names but deliberately unimplemented.
    """

    kind: str = "none"
    nu: float = 0.0
    nu1: float = 0.0
    nu2: float = 0.0

    def __post_init__(self):
        if self.kind in _UNSUPPORTED_REG:
            raise UnsupportedRegularizerError(
                "regularizer %r is not implemented; use l1 or elastic-net"
                % self.kind
            )
        if self.kind not in ("none", "l1", "elastic-net"):
            raise ValidationError("unknown regularizer kind %r" % (self.kind,))
        if min(self.nu, self.nu1, self.nu2) < 0.0:
            raise ValidationError("regularizer weights must be nonnegative")


def _soft(z, t):
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def prox_reg(reg, z, weight):
    """Proximal map of weight * r at z.

    l1 is the componentwise soft threshold; elastic net soft-thresholds
    then rescales by 1 / (1 + 2 * weight * nu2).
    """
    if weight <= 0.0:
        raise ValidationError("prox weight must be positive")
    z = np.asarray(z, dtype=float)
    if reg.kind == "none":
        return z.copy()
    if reg.kind == "l1":
        return _soft(z, weight * reg.nu)
    return _soft(z, weight * reg.nu1) / (1.0 + 2.0 * weight * reg.nu2)


def reg_value(reg, x):
    """Unweighted r(x)."""
    x = np.asarray(x, dtype=float)
    if reg.kind == "none":
        return 0.0
    if reg.kind == "l1":
        return reg.nu * float(np.abs(x).sum())
    return reg.nu1 * float(np.abs(x).sum()) + reg.nu2 * float(x @ x)


@dataclass(frozen=True)
class ProblemInstance:
    """Dimension, one loss per agent, the shared regularizer, prox weight."""

    q: int
    losses: tuple
    regularizer: Regularizer
    reg_weight: float

    def __post_init__(self):
        if not self.losses:
            raise ValidationError("an instance needs at least one agent")
        for loss in self.losses:
            if loss.B.shape[1] != self.q:
                raise ValidationError("all losses must share the dimension q")
        if self.reg_weight <= 0.0:
            raise ValidationError("prox weight must be positive")

    @property
    def n(self):
        return len(self.losses)

    @property
    def lipschitz_constants(self):
        return np.array([loss.L for loss in self.losses])


def problem_instance(losses, regularizer=None, reg_weight=None):
    """Assemble a :class:`ProblemInstance`; the prox weight defaults to n."""
    losses = tuple(losses)
    if regularizer is None:
        regularizer = Regularizer(kind="none")
    if reg_weight is None:
        reg_weight = float(len(losses))
    q = losses[0].B.shape[1] if losses else 0
    return ProblemInstance(
        q=q, losses=losses, regularizer=regularizer, reg_weight=float(reg_weight)
    )


def objective_value(p, x):
    """sum_i f_i(x) + reg_weight * r(x)."""
    return sum(loss_value(loss, x) for loss in p.losses) + p.reg_weight * reg_value(
        p.regularizer, x
    )


@dataclass(frozen=True)
class StepsizeSet:
    """Per-agent gradient stepsizes alpha_i and the coupling stepsize beta."""

    alphas: np.ndarray
    beta: float


def stepsizes_from_fraction(p, fraction):
    """alpha_i = fraction * 2 / (L_i + 1), beta = 1 / (2 (n + 1))."""
    if not (0.0 < fraction < 1.0):
        raise ValidationError("stepsize fraction must lie in (0, 1)")
    L = p.lipschitz_constants
    return StepsizeSet(
        alphas=fraction * 2.0 / (L + 1.0), beta=1.0 / (2.0 * (p.n + 1))
    )


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    mode: str
    message: str
    min_eigenvalue: float = None


def _stepsize_matrix(s, p):
    """The (q + nq)-square test matrix for the matrix-mode check.

    Blocks: [[I, 0], [0, Gamma^{-1} - Q/2]] - beta [[U^T U, -U^T], [-U, I]]
    with U = 1_n (x) I_q, Q = diag(L_i I_q).
    """
    n, q = p.n, p.q
    beta = s.beta
    dim = q + n * q
    M = np.zeros((dim, dim))
    M[:q, :q] = (1.0 - beta * n) * np.eye(q)
    L = p.lipschitz_constants
    for i in range(n):
        r = q + i * q
        M[:q, r : r + q] = beta * np.eye(q)
        M[r : r + q, :q] = beta * np.eye(q)
        M[r : r + q, r : r + q] = (1.0 / s.alphas[i] - L[i] / 2.0 - beta) * np.eye(q)
    return M


def validate_stepsizes(s, p, mode="matrix"):
    """Check a stepsize set against the convergence condition.

    mode "simple" checks alpha_i < 2 / (L_i + 1); mode "matrix"
    assembles the block test matrix and attempts a Cholesky
    factorization, reporting the smallest eigenvalue on failure.
    """
    alphas = np.asarray(s.alphas, dtype=float)
    if alphas.shape != (p.n,):
        return ValidationReport(False, mode, "need one alpha per agent")
    if np.any(alphas <= 0.0) or s.beta <= 0.0:
        return ValidationReport(False, mode, "stepsizes must be positive")
    if mode == "simple":
        bound = 2.0 / (p.lipschitz_constants + 1.0)
        bad = np.nonzero(alphas >= bound)[0]
        if bad.size:
            i = int(bad[0])
            return ValidationReport(
                False,
                mode,
                "alpha[%d] = %.6g exceeds the bound 2/(L+1) = %.6g"
                % (i, alphas[i], bound[i]),
            )
        return ValidationReport(True, mode, "all alphas below 2/(L+1)")
    if mode != "matrix":
        raise ValidationError("unknown validation mode %r" % (mode,))
    M = _stepsize_matrix(s, p)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(M)
        return ValidationReport(
            False,
            mode,
            "stepsize test matrix is not positive definite "
            "(smallest eigenvalue %.6g)" % w[0],
            min_eigenvalue=float(w[0]),
        )
    w = np.linalg.eigvalsh(M)
    return ValidationReport(
        True,
        mode,
        "stepsize test matrix is positive definite",
        min_eigenvalue=float(w[0]),
    )
