"""Dense two-phase simplex linear programming.

Small dense LPs (tens of rows) drive feasibility pruning, bound tightening
and redundancy removal everywhere else in the package.  The pivot engine
lives in :mod:`pwalyap._kernels`; this module owns problem scaling, the
free-variable split, status mapping and dual extraction.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .errors import IterationCapExceeded, LpNumericalFailure

DEFAULT_TOL = 1e-8

# module-wide call counter, read by the verifier for its stats blocks
_CALLS = 0


def call_count():
    return _CALLS


class LpStatus(Enum):
    Optimal = "optimal"
    Infeasible = "infeasible"
    Unbounded = "unbounded"


@dataclass(frozen=True)
class LpProblem:
    """Maximize ``objective . x`` over ``constraints`` (+ optional Ax = b)."""

    objective: np.ndarray
    constraints: "object"  # any object with .F / .h (geometry.Polytope)
    eq_A: np.ndarray | None = None
    eq_b: np.ndarray | None = None


@dataclass(frozen=True)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None
    value: float
    y_ineq: np.ndarray | None = None
    y_eq: np.ndarray | None = None


def solve_lp(problem: LpProblem, tol: float = DEFAULT_TOL) -> LpSolution:
    return maximize(
        problem.objective,
        problem.constraints.F,
        problem.constraints.h,
        eq_A=problem.eq_A,
        eq_b=problem.eq_b,
        tol=tol,
    )


def maximize(c, G, h, eq_A=None, eq_b=None, tol=DEFAULT_TOL):
    """Maximize c.x subject to Gx <= h (and optionally eq_A x = eq_b)."""
    global _CALLS
    _CALLS += 1

    c = np.asarray(c, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float).ravel()
    # zero rows are vacuous or a direct infeasibility proof; they must not
    # reach the equilibration step where their rhs would blow up
    zrow = np.abs(G).max(axis=1) <= 1e-14
    mi_full = G.shape[0]
    kept = np.arange(mi_full)
    if zrow.any():
        if (h[zrow] < -tol).any():
            return LpSolution(LpStatus.Infeasible, None, -np.inf)
        kept = np.nonzero(~zrow)[0]
        G, h = G[~zrow], h[~zrow]
    mi, n = G.shape
    if eq_A is not None:
        eq_A = np.atleast_2d(np.asarray(eq_A, dtype=float))
        eq_b = np.asarray(eq_b, dtype=float).ravel()
        me = eq_A.shape[0]
    else:
        eq_A = np.zeros((0, n))
        eq_b = np.zeros(0)
        me = 0
    if mi + me == 0:
        if np.abs(c).max(initial=0.0) <= 1e-15:
            return LpSolution(LpStatus.Optimal, np.zeros(n), 0.0, np.zeros(mi_full), np.zeros(0))
        return LpSolution(LpStatus.Unbounded, None, np.inf)

    # row equilibration; the simplex works on the scaled copy
    rows = np.vstack([G, eq_A])
    rhs = np.concatenate([h, eq_b])
    scale = np.maximum(np.abs(rows).max(axis=1), 1e-12)
    rows = rows / scale[:, None]
    rhs = rhs / scale

    # free x split as u - v; one slack per inequality row
    m = mi + me
    A_std = np.zeros((m, 2 * n + mi))
    A_std[:, :n] = rows
    A_std[:, n:2 * n] = -rows
    A_std[:mi, 2 * n:] = np.eye(mi)
    b_std = rhs.copy()
    flip = b_std < 0
    A_std[flip] *= -1.0
    b_std[flip] *= -1.0
    c_std = np.concatenate([c, -c, np.zeros(mi)])

    maxiter = 2000 + 200 * (m + n)
    status, x_std, value, y_std = _kernels.simplex_standard(
        A_std, b_std, c_std, maxiter, 1e-9
    )

    if status == _kernels.ITER_CAP:
        raise IterationCapExceeded(
            f"simplex exceeded {maxiter} pivots on a {m}x{n} problem"
        )
    if status == _kernels.INFEASIBLE:
        return LpSolution(LpStatus.Infeasible, None, -np.inf)
    if status == _kernels.UNBOUNDED:
        return LpSolution(LpStatus.Unbounded, None, np.inf)

    x = x_std[:n] - x_std[n:2 * n]
    # map duals back through the row flips and the equilibration
    sign = np.where(flip, -1.0, 1.0)
    y = y_std * sign / scale
    y_ineq = np.zeros(mi_full)
    y_ineq[kept] = y[:mi]
    y_eq = y[mi:]

    resid = float((G @ x - h).max()) if mi else 0.0
    eqres = float(np.abs(eq_A @ x - eq_b).max()) if me else 0.0
    denom = 1.0 + np.abs(h).max() if mi else 1.0
    if resid > 100 * tol * denom or eqres > 100 * tol * denom:
        raise LpNumericalFailure(
            f"optimal vertex violates constraints (residuals {resid:.2e}, {eqres:.2e})"
        )
    return LpSolution(LpStatus.Optimal, x, float(c @ x), y_ineq, y_eq)


def dual_certificate(c, G, h, sol: LpSolution, eq_A=None, eq_b=None):
    """Independently validate the dual returned with an Optimal solution.

    Returns (dual_bound, stationarity_violation, sign_violation).  A clean
    certificate has the bound within ~1e-6 of the primal value, tiny
    stationarity residual Gᵀy + Aᵀw - c, and y >= 0 up to roundoff.
    """
    c = np.asarray(c, dtype=float)
    G = np.atleast_2d(np.asarray(G, dtype=float))
    h = np.asarray(h, dtype=float).ravel()
    y = sol.y_ineq
    lhs = G.T @ y
    bound = float(h @ y)
    if eq_A is not None:
        eq_A = np.atleast_2d(np.asarray(eq_A, dtype=float))
        eq_b = np.asarray(eq_b, dtype=float).ravel()
        lhs = lhs + eq_A.T @ sol.y_eq
        bound += float(eq_b @ sol.y_eq)
    stat = float(np.abs(lhs - c).max())
    signv = float(max(0.0, -(y.min() if y.size else 0.0)))
    return bound, stat, signv
