"""Exact global extremization of (possibly indefinite) quadratics over
bounded polytopes.

Any optimizer lies in the relative interior of some face, where the
gradient restricted to the face's affine hull vanishes, or at a vertex.
Enumerating all faces and collecting vertices plus feasible restricted
stationary points therefore yields the exact optimum in low dimension.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry, lp
from .errors import EmptyPolytopeError

SINGULAR_TOL = 1e-10


@dataclass(frozen=True)
class QuadraticForm:
    """value(x) = x'Qx + q'x + c with Q symmetrized on construction."""

    Q: np.ndarray
    q: np.ndarray
    c: float

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        Q = 0.5 * (Q + Q.T)
        q = np.asarray(self.q, dtype=float).ravel()
        Q.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "c", float(self.c))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.Q @ x + self.q @ x + self.c)

    def value_batch(self, X):
        X = np.asarray(X, dtype=float)
        return ((X @ self.Q) * X).sum(axis=1) + X @ self.q + self.c

    def negated(self):
        return QuadraticForm(-self.Q, -self.q, -self.c)

    def shifted(self, t):
        """The form x -> value(x - t)."""
        t = np.asarray(t, dtype=float)
        return QuadraticForm(self.Q, self.q - 2.0 * (self.Q @ t), self.value(-t))


def _face_stationary_points(f: QuadraticForm, face: geometry.Face, P: geometry.Polytope, tol):
    """Feasible stationary points of f restricted to the face's affine hull."""
    pts = face.vertices
    x0 = pts[0]
    if face.dim == 0:
        return []
    diffs = pts[1:] - x0
    U_, sv, Vt = np.linalg.svd(diffs, full_matrices=False)
    r = int((sv > 1e-9 * max(1.0, sv[0])).sum())
    N = Vt[:r].T  # orthonormal basis of the face's direction space
    H = N.T @ (2.0 * f.Q) @ N
    g0 = N.T @ (2.0 * f.Q @ x0 + f.q)
    w, U = np.linalg.eigh(H)
    scale = max(1.0, np.abs(w).max())
    nonsing = np.abs(w) > SINGULAR_TOL * scale
    gt = U.T @ g0
    if (np.abs(gt[~nonsing]) > 1e-8 * (1.0 + np.abs(g0).max())).any():
        return []  # restricted gradient cannot vanish on this face
    tcoef = np.zeros_like(gt)
    tcoef[nonsing] = -gt[nonsing] / w[nonsing]
    t_p = U @ tcoef
    if nonsing.all():
        x = x0 + N @ t_p
        if P.contains(x, tol=tol):
            return [x]
        return []
    # flat directions: f is constant on the stationary affine set, so any
    # feasible point of it inside the face witnesses the candidate value
    Z = U[:, ~nonsing]
    base = x0 + N @ t_p
    G = P.F @ (N @ Z)
    h = P.h - P.F @ base
    sol = lp.maximize(np.zeros(Z.shape[1]), G, h)
    if sol.status != lp.LpStatus.Optimal:
        return []
    x = base + (N @ Z) @ sol.x
    if P.contains(x, tol=10 * tol):
        return [x]
    return []


def extremize(f: QuadraticForm, P: geometry.Polytope, sense: str = "max", tol=1e-8):
    """Exact global optimum of f over bounded nonempty P.

    Returns (argopt, value); ties resolve to the lexicographically smallest
    optimizer for determinism.
    """
    if sense == "min":
        x, v = extremize(f.negated(), P, "max", tol=tol)
        return x, -v
    faces = geometry.enumerate_faces(P)
    if not faces:
        raise EmptyPolytopeError("extremize over an empty polytope")
    cands = []
    for face in faces:
        if face.dim == 0:
            x = face.vertices[0]
            cands.append((x, f.value(x)))
        else:
            for x in _face_stationary_points(f, face, P, tol):
                cands.append((x, f.value(x)))
    best = max(v for _, v in cands)
    near = [x for x, v in cands if v >= best - 1e-12 * (1.0 + abs(best))]
    argopt = min(near, key=lambda x: tuple(x))
    return argopt, best
