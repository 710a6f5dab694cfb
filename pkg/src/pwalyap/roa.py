"""Region-of-attraction estimation and invariance checking.

After certification, the largest sublevel set of the Lyapunov function that
fits inside the region of interest is an inner ROA approximation.  Its
level alpha is the exact minimum of V over the roi boundary, facet by
facet: convex quadratic minimization for quadratic V, the lifted
branch-and-bound for the piecewise-quadratic class.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry, qp_exact, verifier
from .dynamics import ClosedLoop
from .errors import DimensionUnsupported, OutOfDomain
from .geometry import Polytope
from .learner import PWQ, QUADRATIC

LP_TOL = 1e-8


@dataclass(frozen=True)
class RoaEstimate:
    """Sublevel set {x | V(x) <= alpha} inside `roi`."""

    kind: str  # "ellipse" | "pwq_contour"
    P: np.ndarray
    alpha: float
    roi: Polytope
    cl: ClosedLoop | None = None

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "ellipse":
            return float(x @ self.P @ x)
        v = np.concatenate([x, self.cl.step(x)])
        return float(v @ self.P @ v)

    def contains(self, x):
        try:
            return self.value(x) <= self.alpha
        except OutOfDomain:
            return False


def _facets(roi: Polytope):
    roi = geometry.remove_redundant(roi)
    for k in range(roi.nrows):
        facet = roi.with_rows(-roi.F[k][None, :], np.array([-roi.h[k]]))
        if not geometry.is_empty(facet):
            yield facet


def sublevel_alpha(V, cl: ClosedLoop, roi: Polytope, options=None) -> float:
    """Largest alpha with {V <= alpha} inside the roi: the exact minimum of
    V over the roi's boundary."""
    P = np.asarray(V.P, dtype=float)
    best = np.inf
    for facet in _facets(roi):
        if V.kind == QUADRATIC:
            form = qp_exact.QuadraticForm(P, np.zeros(roi.dim), 0.0)
            _, val = qp_exact.extremize(form, facet, "min")
        elif V.kind == PWQ:
            val = verifier.minimize_lifted_quadratic(cl, P, facet, options).p_star
        else:
            raise ValueError(f"unknown candidate kind {V.kind!r}")
        best = min(best, val)
    if not np.isfinite(best):
        raise ValueError("roi has no nonempty facets")
    return float(best)


def estimate_roa(V, cl: ClosedLoop, roi: Polytope, options=None) -> RoaEstimate:
    alpha = sublevel_alpha(V, cl, roi, options)
    kind = "ellipse" if V.kind == QUADRATIC else "pwq_contour"
    return RoaEstimate(kind, np.asarray(V.P, dtype=float), alpha, roi, cl)


def is_positive_invariant(cl: ClosedLoop, X: Polytope, options=None):
    """Exact check of Suc(X) inside X; returns (flag, worst facet margin)."""
    X = geometry.remove_redundant(X)
    worst = -np.inf
    for k in range(X.nrows):
        margin = verifier.verify_linear_objective(cl, X, X.F[k], X.h[k], options)
        worst = max(worst, margin)
    return worst <= LP_TOL, worst


@dataclass(frozen=True)
class InvariantSetResult:
    S: Polytope
    converged: bool
    iterations: int


def _pre_set(A, B, S: Polytope, U: Polytope) -> Polytope:
    """{x | exists u in U with Ax + Bu in S} via Fourier-Motzkin."""
    n, nu = B.shape
    rows = np.vstack([
        np.hstack([S.F @ A, S.F @ B]),
        np.hstack([np.zeros((U.nrows, n)), U.F]),
    ])
    rhs = np.concatenate([S.h, U.h])
    P = Polytope(rows, rhs)
    for _ in range(nu):
        P = geometry.fourier_motzkin_project(P, P.dim - 1)
    return P


def control_invariant_set(A, B, X: Polytope, U: Polytope, max_iter=60) -> InvariantSetResult:
    """Largest-style control invariant subset of X by S <- S n Pre(S).

    Stops when successive iterates agree up to per-row LP containment with
    the standard tolerance; the fixed point satisfies S within Pre(S).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    S = geometry.remove_redundant(X)
    for it in range(1, max_iter + 1):
        pre = _pre_set(A, B, S, U)
        S_next = geometry.remove_redundant(S.intersect(pre))
        if geometry.poly_subset(S, S_next) and geometry.poly_subset(S_next, S):
            return InvariantSetResult(S_next, True, it)
        S = S_next
    return InvariantSetResult(S, False, max_iter)


def export_contours(est: RoaEstimate, resolution=512):
    """Figure-ready data for a 2-D estimate.

    Ellipse estimates yield a boundary polyline sampled by angle with
    V = alpha exactly on every point; piecewise-quadratic estimates yield a
    grid of V values over the roi's bounding box with an inside flag.
    """
    if est.roi.dim != 2:
        raise DimensionUnsupported("contour export supports 2-D state spaces only")
    if est.kind == "ellipse":
        theta = np.linspace(0.0, 2.0 * np.pi, resolution, endpoint=False)
        dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        scale = np.sqrt(est.alpha / ((dirs @ est.P) * dirs).sum(axis=1))
        pts = dirs * scale[:, None]
        vals = ((pts @ est.P) * pts).sum(axis=1)
        return {"kind": "ellipse", "boundary": pts, "V": vals, "alpha": est.alpha}
    box = geometry.bounding_box(est.roi)
    xs = np.linspace(box.lower[0], box.upper[0], resolution)
    ys = np.linspace(box.lower[1], box.upper[1], resolution)
    Xg, Yg = np.meshgrid(xs, ys)
    pts = np.column_stack([Xg.ravel(), Yg.ravel()])
    Y, ok = est.cl.step_batch(pts)
    V = np.full(pts.shape[0], np.nan)
    v = np.hstack([pts[ok], Y[ok]])
    V[ok] = ((v @ est.P) * v).sum(axis=1)
    inside = ok & est.roi.contains(pts) & (V <= est.alpha)
    return {
        "kind": "pwq_contour",
        "points": pts,
        "V": V,
        "inside": inside,
        "alpha": est.alpha,
    }
