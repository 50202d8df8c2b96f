# cython: language_level=3
"""Compiled relay loop.

One entry point, relay_loop, advances the state through K activations
and fills the per-step metric arrays. It mirrors the numpy path in
engine.py step for step; the two are compared in the backend tests and
in the benchmark subcommand. Losses arrive padded to a common row count
so the data sits in one C-contiguous block per field.
"""
import numpy as np

cimport cython
from libc.math cimport isfinite, sqrt, tanh


@cython.boundscheck(False)
@cython.wraparound(False)
@cython.cdivision(True)
def relay_loop(
    double[:, :, ::1] B,
    double[:, ::1] b,
    long long[::1] mlen,
    long long[::1] kinds,
    int reg_kind,
    double t1,
    double t2,
    double beta,
    double[::1] alphas,
    double[:, ::1] lam,
    double[:, ::1] y,
    double[::1] x,
    double[::1] u,
    double[::1] u_tilde,
    long long[::1] tau,
    long long[::1] path,
    double[:, ::1] eps,
    double[::1] x_star,
    double[:, ::1] lam_star,
    double denom,
    double[::1] rel_err,
    double[::1] s_dist,
    double[::1] consensus,
    long long[::1] xi_out,
):
    """Run len(eps) relay steps in place; return (err_code, err_k, err_agent).

    err_code 0 means the loop finished; 1/2/3 flag a non-finite x, y or
    lambda at 1-based iteration err_k of 1-based agent err_agent, with
    the state left as it was before the failing step's writeback.
    """
    cdef Py_ssize_t n = lam.shape[0]
    cdef Py_ssize_t q = x.shape[0]
    cdef Py_ssize_t K = eps.shape[0]
    cdef Py_ssize_t k, i, j, r, m
    cdef double acc, v, z, s, d, best, xi_scale
    cdef long long xi = 0

    buf = np.zeros((5, q))
    cdef double[::1] lam_half = buf[0]
    cdef double[::1] xn = buf[1]
    cdef double[::1] g = buf[2]
    cdef double[::1] ynew = buf[3]
    cdef double[::1] ysum = buf[4]
    zbuf = np.zeros(B.shape[1])
    cdef double[::1] zrow = zbuf

    for i in range(n):
        if tau[i] > xi:
            xi = tau[i]
        for j in range(q):
            ysum[j] += y[i, j]

    for k in range(K):
        i = path[k]
        m = mlen[i]

        for j in range(q):
            lam_half[j] = lam[i, j] + beta * (x[j] - y[i, j])

        # x-update through the prox of the weighted regularizer
        for j in range(q):
            v = x[j] - (u_tilde[j] + beta * (n * x[j] - ysum[j]))
            if reg_kind == 0:
                xn[j] = v
            else:
                if v > t1:
                    v -= t1
                elif v < -t1:
                    v += t1
                else:
                    v = 0.0
                if reg_kind == 2:
                    v /= 1.0 + 2.0 * t2
                xn[j] = v
            if not isfinite(xn[j]):
                return 1, k + 1, i + 1

        # local gradient at y_i
        for r in range(m):
            acc = 0.0
            for j in range(q):
                acc += B[i, r, j] * y[i, j]
            if kinds[i] == 1:
                acc = 0.5 * (1.0 + tanh(0.5 * acc))
            zrow[r] = acc - b[i, r]
        for j in range(q):
            acc = 0.0
            for r in range(m):
                acc += B[i, r, j] * zrow[r]
            g[j] = acc

        for j in range(q):
            ynew[j] = y[i, j] - alphas[i] * (g[j] - lam_half[j])
            if not isfinite(ynew[j]):
                return 2, k + 1, i + 1
        for j in range(q):
            lam_half[j] = lam_half[j] + beta * (
                (xn[j] - x[j]) - (ynew[j] - y[i, j])
            )
            if not isfinite(lam_half[j]):
                return 3, k + 1, i + 1

        # writeback: lam_half now holds the full dual update
        for j in range(q):
            u[j] += lam_half[j] - lam[i, j]
            u_tilde[j] = u[j] - eps[k, j]
            ysum[j] += ynew[j] - y[i, j]
            lam[i, j] = lam_half[j]
            y[i, j] = ynew[j]
            x[j] = xn[j]
        tau[i] += 1
        if tau[i] > xi:
            xi = tau[i]
        xi_out[k] = xi

        # metrics at the new state
        acc = 0.0
        for j in range(q):
            d = x[j] - x_star[j]
            acc += d * d
        rel_err[k] = sqrt(acc) if denom <= 0.0 else sqrt(acc) / denom

        s = acc
        for r in range(n):
            xi_scale = 1.0 / alphas[r]
            for j in range(q):
                d = lam[r, j] - lam_star[r, j]
                s += d * d / beta
                d = y[r, j] - x_star[j]
                s += d * d * xi_scale
        s_dist[k] = sqrt(s)

        best = 0.0
        for r in range(n):
            acc = 0.0
            for j in range(q):
                d = y[r, j] - x[j]
                acc += d * d
            if acc > best:
                best = acc
        consensus[k] = sqrt(best)

    return 0, 0, 0
