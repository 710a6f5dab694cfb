"""Hot numeric kernels.

The dense simplex engine below is the innermost loop of the whole package:
branch-and-bound feasibility pruning, bound tightening, and redundancy
removal all funnel into it, typically as thousands of tiny LPs.  The kernel
is written in a numba-compilable numpy dialect; by default it is JIT
compiled, and setting the environment variable ``PWALYAP_DISABLE_NUMBA=1``
selects the plain-numpy interpretation of the same source instead (useful
for debugging and as the benchmark baseline, see benchmarks/).
"""

import os

import numpy as np

NUMBA_DISABLED = os.environ.get("PWALYAP_DISABLE_NUMBA", "") == "1"

try:
    if NUMBA_DISABLED:
        raise ImportError
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


# status codes shared with lp.py
OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITER_CAP = 3

# consecutive non-improving pivots before switching to Bland's rule
_STALL_LIMIT = 50


def _simplex_standard(A, b, c, maxiter, tol):
    """Two-phase dense simplex for max c.x s.t. Ax = b, x >= 0, b >= 0.

    Returns (status, x, value, y) where y holds the row duals read off the
    artificial columns of the final tableau.  Dantzig pricing switches to
    Bland's rule after a run of non-improving (degenerate) pivots, which
    guarantees termination.
    """
    m, n = A.shape

    def pivot(T, basis, r, j):
        T[r, :] = T[r, :] / T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r, :])
        # kill roundoff in the pivot column so later sign tests stay clean
        T[:, j] = 0.0
        T[r, j] = 1.0
        basis[r] = j

    def pivot_loop(T, basis, ncols):
        # obj row (last) stores z_j - c_j for a maximization; rhs col last;
        # only columns < ncols may enter the basis
        rhs = T.shape[1] - 1
        bland = False
        stall = 0
        last_z = T[m, rhs]
        for _ in range(maxiter):
            j = -1
            if bland:
                for k in range(ncols):
                    if T[m, k] < -tol:
                        j = k
                        break
            else:
                k = int(np.argmin(T[m, :ncols]))
                if T[m, k] < -tol:
                    j = k
            if j < 0:
                return OPTIMAL
            best = np.inf
            r = -1
            for i in range(m):
                a = T[i, j]
                if a > tol:
                    ratio = T[i, rhs] / a
                    if ratio < best - 1e-12:
                        best = ratio
                        r = i
                    elif bland and ratio < best + 1e-12 and r >= 0:
                        if basis[i] < basis[r]:
                            r = i
            if r < 0:
                return UNBOUNDED
            pivot(T, basis, r, j)
            z = T[m, rhs]
            if z > last_z + 1e-12:
                stall = 0
            else:
                stall += 1
                if stall > _STALL_LIMIT:
                    bland = True
            last_z = z
        return ITER_CAP

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    for i in range(m):
        T[i, n + i] = 1.0
    T[:m, n + m] = b
    basis = np.arange(n, n + m)

    # phase 1: maximize -sum(artificials); price out the artificial basis
    T[m, :] = -T[:m, :].sum(axis=0)
    T[m, n:n + m] += 1.0
    status = pivot_loop(T, basis, n)
    x = np.zeros(n)
    y = np.zeros(m)
    if status == ITER_CAP:
        return ITER_CAP, x, 0.0, y
    bmax = 0.0
    for i in range(m):
        if abs(b[i]) > bmax:
            bmax = abs(b[i])
    if T[m, n + m] < -100.0 * tol * (1.0 + bmax):
        return INFEASIBLE, x, 0.0, y

    # drive leftover artificials out of the basis where possible
    for r in range(m):
        if basis[r] >= n:
            jbest = -1
            abest = tol
            for k in range(n):
                a = abs(T[r, k])
                if a > abest:
                    abest = a
                    jbest = k
            if jbest >= 0:
                pivot(T, basis, r, jbest)

    # phase 2: price the real objective through the current basis
    T[m, :] = 0.0
    T[m, :n] = -c
    for r in range(m):
        jb = basis[r]
        if jb < n and c[jb] != 0.0:
            T[m, :] += c[jb] * T[r, :]
    status = pivot_loop(T, basis, n)
    if status == ITER_CAP:
        return ITER_CAP, x, 0.0, y
    for r in range(m):
        if basis[r] < n:
            x[basis[r]] = T[r, n + m]
    for i in range(m):
        y[i] = T[m, n + i]
    return status, x, T[m, n + m], y


def _assign_modes_scalar(X, F, h, offsets, tol):
    """Per-point lowest-index mode assignment (njit inner-loop form).

    F stacks all mode rows, offsets[i]:offsets[i+1] delimits mode i.
    Returns -1 where no mode contains the point.
    """
    npts = X.shape[0]
    nmodes = offsets.shape[0] - 1
    out = np.full(npts, -1, dtype=np.int64)
    for p in range(npts):
        for i in range(nmodes):
            ok = True
            for r in range(offsets[i], offsets[i + 1]):
                v = 0.0
                for k in range(X.shape[1]):
                    v += F[r, k] * X[p, k]
                if v > h[r] + tol:
                    ok = False
                    break
            if ok:
                out[p] = i
                break
    return out


def _assign_modes_vector(X, F, h, offsets, tol):
    """Vectorized fallback with identical semantics to the scalar kernel."""
    npts = X.shape[0]
    sat = X @ F.T <= h + tol
    out = np.full(npts, -1, dtype=np.int64)
    for i in range(offsets.shape[0] - 2, -1, -1):
        inside = sat[:, offsets[i]:offsets[i + 1]].all(axis=1)
        out[inside] = i
    return out


if NUMBA_ENABLED:
    simplex_standard = njit(cache=True)(_simplex_standard)
    assign_modes = njit(cache=True)(_assign_modes_scalar)
else:
    simplex_standard = _simplex_standard
    assign_modes = _assign_modes_vector

# raw implementations kept importable for the path-comparison benchmark
simplex_standard_py = _simplex_standard
assign_modes_py = _assign_modes_vector
