"""Polytope arithmetic in H-representation.

Everything downstream (plant regions, regions of interest, branch-and-bound
node regions, invariant sets) is a set of the form {x | Fx <= h}.  Vertex
and face information is produced on demand by combinatorial tight-set
search, which is exact and cheap in the low dimensions this package targets
(state dimension <= 4).
"""

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .errors import DimensionCapExceeded, EmptyPolytopeError, UnboundedError

TOL = 1e-8
FACE_DIM_CAP = 4


@dataclass(frozen=True)
class Polytope:
    """The set {x | Fx <= h}."""

    F: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.F, dtype=float))
        h = np.asarray(self.h, dtype=float).ravel()
        if F.ndim != 2 or F.shape[0] < 1 or F.shape[1] < 1:
            raise ValueError("F must be a nonempty m x n matrix")
        if F.shape[0] != h.shape[0]:
            raise ValueError(f"row mismatch: F has {F.shape[0]} rows, h has {h.shape[0]}")
        if not (np.isfinite(F).all() and np.isfinite(h).all()):
            raise ValueError("polytope data must be finite")
        F.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "h", h)

    @property
    def dim(self) -> int:
        return self.F.shape[1]

    @property
    def nrows(self) -> int:
        return self.F.shape[0]

    def contains(self, x, tol=TOL):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return bool((self.F @ x <= self.h + tol).all())
        return (x @ self.F.T <= self.h + tol).all(axis=1)

    def intersect(self, other: "Polytope") -> "Polytope":
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in intersection")
        return Polytope(np.vstack([self.F, other.F]), np.concatenate([self.h, other.h]))

    def with_rows(self, F_extra, h_extra) -> "Polytope":
        F_extra = np.atleast_2d(np.asarray(F_extra, dtype=float))
        h_extra = np.atleast_1d(np.asarray(h_extra, dtype=float))
        return Polytope(np.vstack([self.F, F_extra]), np.concatenate([self.h, h_extra]))

    def to_json(self) -> dict:
        return {"F": self.F.tolist(), "h": self.h.tolist()}

    @staticmethod
    def from_json(obj) -> "Polytope":
        return Polytope(np.asarray(obj["F"], dtype=float), np.asarray(obj["h"], dtype=float))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @staticmethod
    def box(lower, upper) -> "Polytope":
        lower = np.asarray(lower, dtype=float).ravel()
        upper = np.asarray(upper, dtype=float).ravel()
        n = lower.size
        return Polytope(np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([upper, -lower]))


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        up = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != up.shape:
            raise ValueError("box bound shapes differ")
        if (lo > up + 1e-12).any():
            raise ValueError("box has lower > upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    def as_polytope(self) -> Polytope:
        return Polytope.box(self.lower, self.upper)

    @property
    def width(self):
        return self.upper - self.lower


@dataclass(frozen=True)
class Face:
    """A face of `parent`, carried as its tight rows plus its vertex set."""

    parent: Polytope
    tight: tuple
    dim: int
    vertices: np.ndarray = field(repr=False)
    witness: np.ndarray = field(repr=False)


def is_empty(P: Polytope, tol=TOL) -> bool:
    """Phase-I LP feasibility test for {x | Fx <= h}."""
    sol = lp.maximize(np.zeros(P.dim), P.F, P.h, tol=tol)
    return sol.status == lp.LpStatus.Infeasible


def bounding_box(P: Polytope, tol=TOL) -> Box:
    """Component-wise exact min/max via 2n LPs."""
    n = P.dim
    lo = np.empty(n)
    up = np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        smax = lp.maximize(e, P.F, P.h, tol=tol)
        smin = lp.maximize(-e, P.F, P.h, tol=tol)
        if smax.status == lp.LpStatus.Infeasible:
            raise EmptyPolytopeError("bounding box of an empty polytope")
        if smax.status == lp.LpStatus.Unbounded or smin.status == lp.LpStatus.Unbounded:
            raise UnboundedError(f"polytope unbounded along coordinate {k}")
        up[k] = smax.value
        lo[k] = -smin.value
    return Box(lo, up)


def is_bounded(P: Polytope) -> bool:
    try:
        bounding_box(P)
        return True
    except UnboundedError:
        return False


def vertices(P: Polytope, tol=TOL):
    """All vertices by n-subset tight-row search.

    Returns (V, active) where V is (k, n) and active[i] is the boolean row
    mask of constraints active at vertex i.
    """
    F, h = P.F, P.h
    m, n = F.shape
    if n > FACE_DIM_CAP:
        raise DimensionCapExceeded(f"vertex enumeration capped at dim {FACE_DIM_CAP}")
    if m < n:
        return np.zeros((0, n)), np.zeros((0, m), dtype=bool)
    combos = np.array(list(itertools.combinations(range(m), n)))
    mats = F[combos]  # (k, n, n)
    rhs = h[combos]
    dets = np.abs(np.linalg.det(mats))
    rowscale = np.maximum(np.abs(mats).max(axis=(1, 2)), 1e-12) ** n
    ok = dets > 1e-10 * rowscale
    if not ok.any():
        return np.zeros((0, n)), np.zeros((0, m), dtype=bool)
    cand = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    feas_tol = tol * (1.0 + np.abs(h).max())
    feas = (cand @ F.T <= h + feas_tol).all(axis=1)
    cand = cand[feas]
    if cand.shape[0] == 0:
        return np.zeros((0, n)), np.zeros((0, m), dtype=bool)
    # cluster duplicates produced by different tight sets at the same point
    order = np.lexsort(cand.T[::-1])
    cand = cand[order]
    keep = [cand[0]]
    for v in cand[1:]:
        if np.abs(v - keep[-1]).max() > 1e-7 * (1.0 + np.abs(v).max()):
            keep.append(v)
    V = np.array(keep)
    # merge any remaining non-adjacent duplicates
    uniq = []
    for v in V:
        if all(np.abs(v - u).max() > 1e-7 * (1.0 + np.abs(v).max()) for u in uniq):
            uniq.append(v)
    V = np.array(uniq)
    active = np.abs(V @ F.T - h) <= 10 * feas_tol
    return V, active


def enumerate_faces(P: Polytope, tol=TOL):
    """All nonempty faces of a bounded polytope, dimension 0..n.

    Faces are intersections of facets, so the lattice is generated by
    closing the per-row vertex-incidence sets under intersection.  Each
    face's witness is the barycenter of its vertices, which lies in the
    face's relative interior.
    """
    if P.dim > FACE_DIM_CAP:
        raise DimensionCapExceeded(f"face enumeration capped at dim {FACE_DIM_CAP}")
    V, active = vertices(P, tol=tol)
    nv = V.shape[0]
    if nv == 0:
        return []
    allv = frozenset(range(nv))
    sets = {allv}
    for i in range(P.nrows):
        s = frozenset(np.nonzero(active[:, i])[0])
        if s:
            sets.add(s)
    # close under pairwise intersection
    frontier = set(sets)
    while frontier:
        new = set()
        for a in frontier:
            for b in sets:
                c = a & b
                if c and c not in sets and c not in new:
                    new.add(c)
        sets |= new
        frontier = new
    faces = []
    for s in sets:
        idx = sorted(s)
        pts = V[idx]
        tight = tuple(np.nonzero(active[idx].all(axis=0))[0])
        if len(idx) == 1:
            dim = 0
        else:
            diffs = pts[1:] - pts[0]
            sv = np.linalg.svd(diffs, compute_uv=False)
            dim = int((sv > 1e-9 * max(1.0, sv[0])).sum())
        faces.append(Face(P, tight, dim, pts, pts.mean(axis=0)))
    faces.sort(key=lambda f: (f.dim, f.tight))
    return faces


def fourier_motzkin_project(P: Polytope, drop: int, tol=TOL) -> Polytope:
    """Eliminate coordinate `drop` by Fourier-Motzkin, then prune rows."""
    F, h = P.F, P.h
    m, n = F.shape
    if not 0 <= drop < n:
        raise ValueError(f"coordinate {drop} out of range for dim {n}")
    a = F[:, drop]
    keepcols = [k for k in range(n) if k != drop]
    zero = np.abs(a) <= 1e-11
    pos = a > 1e-11
    neg = a < -1e-11
    rows = [F[zero][:, keepcols]]
    rhs = [h[zero]]
    if pos.any() and neg.any():
        Fp = F[pos][:, keepcols] / a[pos][:, None]
        hp = h[pos] / a[pos]
        Fn = F[neg][:, keepcols] / (-a[neg][:, None])
        hn = h[neg] / (-a[neg])
        comb_F = Fp[:, None, :] + Fn[None, :, :]
        comb_h = hp[:, None] + hn[None, :]
        rows.append(comb_F.reshape(-1, n - 1))
        rhs.append(comb_h.ravel())
    Fout = np.vstack(rows) if rows else np.zeros((0, n - 1))
    hout = np.concatenate(rhs) if rhs else np.zeros(0)
    # drop vacuous 0 <= h rows; a 0 <= negative row certifies emptiness
    if Fout.shape[0]:
        zrow = np.abs(Fout).max(axis=1) <= 1e-11
        if (hout[zrow] < -tol).any():
            return Polytope(np.zeros((1, n - 1)), np.array([-1.0]))
        Fout, hout = Fout[~zrow], hout[~zrow]
    if Fout.shape[0] == 0:
        # projection is all of R^(n-1)
        return Polytope(np.zeros((1, n - 1)), np.array([0.0]))
    return remove_redundant(Polytope(Fout, hout), tol=tol)


def remove_redundant(P: Polytope, tol=TOL) -> Polytope:
    """Drop every row implied by the others (max F_i x <= h_i + tol)."""
    F, h = P.F, P.h
    m = P.nrows
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        others = keep.copy()
        others[i] = False
        if not others.any():
            break
        sol = lp.maximize(F[i], F[others], h[others], tol=tol)
        if sol.status == lp.LpStatus.Unbounded:
            continue
        if sol.status == lp.LpStatus.Infeasible:
            # remaining system already empty; the row adds nothing
            keep[i] = False
            continue
        if sol.value <= h[i] + tol * (1.0 + abs(h[i])):
            keep[i] = False
    if not keep.any():
        return Polytope(np.zeros((1, P.dim)), np.array([0.0]))
    return Polytope(F[keep], h[keep])


def scale_about_origin(P: Polytope, gamma: float) -> Polytope:
    """The set {x | Fx <= gamma h}; for 0 < gamma <= 1 this shrinks toward 0."""
    if gamma <= 0:
        raise ValueError("scale factor must be positive")
    return Polytope(P.F, gamma * P.h)


def poly_subset(A: Polytope, B: Polytope, tol=TOL) -> bool:
    """True iff A is contained in B, by maximizing each row of B over A."""
    for i in range(B.nrows):
        sol = lp.maximize(B.F[i], A.F, A.h, tol=tol)
        if sol.status == lp.LpStatus.Infeasible:
            return True
        if sol.status == lp.LpStatus.Unbounded or sol.value > B.h[i] + tol * (1 + abs(B.h[i])):
            return False
    return True


def chebyshev_center(P: Polytope, tol=TOL):
    """Center and radius of the largest inscribed euclidean ball."""
    norms = np.linalg.norm(P.F, axis=1)
    G = np.hstack([P.F, norms[:, None]])
    c = np.zeros(P.dim + 1)
    c[-1] = 1.0
    # keep the radius variable bounded in case P is unbounded
    G = np.vstack([G, -c])
    h = np.concatenate([P.h, [1e9]])
    sol = lp.maximize(c, G, h, tol=tol)
    if sol.status != lp.LpStatus.Optimal:
        raise EmptyPolytopeError("no chebyshev center: polytope empty")
    return sol.x[:-1], float(sol.value)
