"""Exact counterexample search for Lyapunov decrease conditions.

The mixed-integer structure of the closed loop (plant mode choices, ReLU
on/off decisions, projection active sets) is explored as a tree of x-space
regions: fixing every discrete decision makes the successor state affine in
x, so each leaf is an exact quadratic extremization over a polytope.  The
search therefore returns the true global maximum of the decrease objective,
matching the semantics of a mixed-integer quadratic program without a
commercial solver (at desk scale).

Branch order: origin-exclusion half-space, then plant mode, then neurons in
layer order (widest pre-activation interval first), then the projection
active set.  Interval bounds prune subtrees that cannot beat the incumbent;
disabling pruning never changes the result, only the work.
"""

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from . import geometry, lp, qp_exact
from .dynamics import PROJECTED_INPUT, PROJECTED_STATE, RAW, output_range_box
from .errors import DomainGap, EmptyProjectionSet, PwalyapError
from .geometry import Polytope
from .qp_exact import QuadraticForm

CERTIFIED = "certified"
COUNTEREXAMPLE = "counterexample"


@dataclass
class VerifierOptions:
    use_interval_pruning: bool = True
    collect_leaves: bool = False
    check_domain: bool = True
    init_samples: int = 100
    seed: int = 0
    early_exit: bool = False
    tol: float = 1e-8


@dataclass
class VerifierStats:
    nodes: int = 0
    leaves: int = 0
    lp_calls: int = 0
    pruned: int = 0
    singular_kkt: int = 0
    wall_time: float = 0.0


@dataclass(frozen=True)
class LeafRecord:
    region: Polytope
    modes: tuple
    patterns: tuple  # per step: tuple over layers of on/off tuples
    active_sets: tuple
    u_maps: tuple  # per step: (K, k) with u = Kx0 + k
    y_maps: tuple  # per step: (T, t) with x_{s+1} = Tx0 + t
    value: float
    argopt: np.ndarray


@dataclass
class VerifierResult:
    status: str
    p_star: float
    x_star: np.ndarray | None
    stats: VerifierStats
    leaves: list | None = None
    recheck_gap: float = 0.0

    def to_json(self):
        return {
            "status": self.status,
            "p_star": self.p_star,
            "x_star": None if self.x_star is None else list(self.x_star),
            "nodes": self.stats.nodes,
            "leaves": self.stats.leaves,
            "lp_calls": self.stats.lp_calls,
            "time_s": self.stats.wall_time,
        }


def _interval_affine(M, d, lo, hi):
    Mp = np.maximum(M, 0.0)
    Mn = np.minimum(M, 0.0)
    return Mp @ lo + Mn @ hi + d, Mp @ hi + Mn @ lo + d


def _quad_form_box(P, lo, hi):
    """Interval bounds of v'Pv over the box [lo, hi]."""
    vlo = 0.0
    vhi = 0.0
    d = lo.size
    for i in range(d):
        for j in range(d):
            p = P[i, j]
            if p == 0.0:
                continue
            cands = np.array([lo[i] * lo[j], lo[i] * hi[j], hi[i] * lo[j], hi[i] * hi[j]])
            if i == j:
                low = 0.0 if lo[i] <= 0.0 <= hi[i] else min(lo[i] ** 2, hi[i] ** 2)
                cands = np.array([low, max(lo[i] ** 2, hi[i] ** 2)])
            vlo += p * (cands.min() if p > 0 else cands.max())
            vhi += p * (cands.max() if p > 0 else cands.min())
    return vlo, vhi


def region_covered_by(C: Polytope, covers, gap=1e-6, tol=1e-8):
    """True iff C is covered by the union of `covers` (up to `gap` slivers).

    Containment in a single cover is the cheap common case; otherwise one
    cover is peeled off and the uncovered remainder of C splits along that
    cover's rows, each piece shifted inward by `gap` to ignore shared
    facets, and the pieces recurse on the remaining sets.  `gap` must stay
    well above the LP feasibility resolution or empty slivers read as
    uncovered regions.
    """
    if geometry.is_empty(C, tol=tol):
        return True
    if not covers:
        return False
    for Q in covers:
        if geometry.poly_subset(C, Q, tol=tol):
            return True
    Q = covers[0]
    for i in range(Q.nrows):
        piece = C.with_rows(-Q.F[i][None, :], np.array([-(Q.h[i] + gap)]))
        if not region_covered_by(piece, covers[1:], gap=gap, tol=tol):
            return False
    return True


class _Region:
    """Growing constraint list on x0, rooted at the roi."""

    __slots__ = ("F", "h")

    def __init__(self, F, h):
        self.F = F
        self.h = h

    def child(self, rows, rhs):
        rows = np.atleast_2d(rows)
        rhs = np.atleast_1d(rhs)
        return _Region(np.vstack([self.F, rows]), np.concatenate([self.h, rhs]))

    def polytope(self):
        return Polytope(self.F, self.h)


class _StepState:
    """Affine data for one plant step, all in x0 coordinates."""

    __slots__ = ("mode", "pattern", "u_map", "y_map", "active_set")

    def __init__(self):
        self.mode = None
        self.pattern = []
        self.u_map = None
        self.y_map = None
        self.active_set = None


class _Search:
    def __init__(self, cl, roi, eps, objective, objective_eval, steps, options):
        self.cl = cl
        self.roi = roi
        self.eps = eps
        self.objective = objective  # (y_maps, x1_maps...) -> QuadraticForm on x0
        self.objective_eval = objective_eval  # exact pointwise oracle for incumbents
        self.steps = steps
        self.opt = options or VerifierOptions()
        self.stats = VerifierStats()
        self.p_best = -np.inf
        self.x_best = None
        self.leaves = [] if self.opt.collect_leaves else None
        self.n = roi.dim
        self.net = cl.controller.net
        self._stop = False
        if cl.controller.variant != RAW:
            ubox = geometry.bounding_box(cl.controller.input_set)
            self._input_set_box = (ubox.lower, ubox.upper)

    # -- plumbing ---------------------------------------------------------

    def _empty(self, region):
        self.stats.nodes += 1
        return geometry.is_empty(region.polytope(), tol=self.opt.tol)

    def _bbox(self, region):
        try:
            box = geometry.bounding_box(region.polytope())
        except geometry.EmptyPolytopeError:
            return None
        return box.lower, box.upper

    def _improve(self, value, x):
        if value > self.p_best:
            self.p_best = value
            self.x_best = np.asarray(x, dtype=float)
            if self.opt.early_exit and value >= 0.0:
                self._stop = True

    def _init_incumbent(self):
        rng = np.random.default_rng(self.opt.seed)
        pts = []
        try:
            V, _ = geometry.vertices(self.roi)
            pts.extend(V)
        except geometry.DimensionCapExceeded:
            pass
        box = geometry.bounding_box(self.roi)
        raw = rng.uniform(box.lower, box.upper, size=(20 * self.opt.init_samples, self.n))
        raw = raw[self.roi.contains(raw)][: self.opt.init_samples]
        pts.extend(raw)
        for x in pts:
            if self.eps is not None and np.abs(x).max() < self.eps - 1e-15:
                continue
            try:
                self._improve(self.objective_eval(x), x)
            except PwalyapError:
                continue  # domain holes are reported exactly during branching

    # -- interval pruning --------------------------------------------------

    def _subtree_bound(self, region, states, step_idx, layer_idx, zmap):
        """Sound upper bound of the objective over `region` given the
        decisions made so far; None disables pruning at this node."""
        bb = self._bbox(region)
        if bb is None:
            return -np.inf
        xlo, xhi = bb
        x1boxes = []
        lo, hi = xlo.copy(), xhi.copy()
        for s in range(self.steps):
            st = states[s] if s < len(states) else None
            if st is not None and st.y_map is not None:
                T, t = st.y_map
                ylo, yhi = _interval_affine(T, t, xlo, xhi)
            else:
                # propagate the current affine prefix, then remaining layers
                if s == step_idx and zmap is not None:
                    M, dvec = zmap
                    zlo, zhi = _interval_affine(M, dvec, xlo, xhi)
                    start = layer_idx
                else:
                    zlo, zhi = lo, hi
                    start = 0
                for W, b in self.net.hidden[start:]:
                    plo, phi = _interval_affine(W, b, zlo, zhi)
                    zlo, zhi = np.maximum(plo, 0.0), np.maximum(phi, 0.0)
                Wl, bl = self.net.layers[-1]
                ulo, uhi = _interval_affine(Wl, bl, zlo, zhi)
                if self.cl.controller.variant != RAW:
                    # the projected input always lands in the admissible set
                    ulo, uhi = self._input_set_box
                ylo = np.full(self.n, np.inf)
                yhi = np.full(self.n, -np.inf)
                modes = self.cl.plant.modes
                if st is not None and st.mode is not None:
                    modes = [self.cl.plant.modes[st.mode]]
                for m in modes:
                    mlo, mhi = _interval_affine(
                        np.hstack([m.A, m.B]), m.c,
                        np.concatenate([lo, ulo]), np.concatenate([hi, uhi]),
                    )
                    ylo = np.minimum(ylo, mlo)
                    yhi = np.maximum(yhi, mhi)
            x1boxes.append((ylo, yhi))
            lo, hi = ylo, yhi
        return self._objective_box_bound((xlo, xhi), x1boxes)

    def _objective_box_bound(self, xbox, x1boxes):
        raise NotImplementedError

    def _maybe_prune(self, region, states, step_idx=0, layer_idx=0, zmap=None):
        if not self.opt.use_interval_pruning:
            return False
        ub = self._subtree_bound(region, states, step_idx, layer_idx, zmap)
        if ub <= self.p_best:
            self.stats.pruned += 1
            return True
        return False

    # -- branching ---------------------------------------------------------

    def run(self):
        t0 = time.perf_counter()
        lp0 = lp.call_count()
        self._precheck()
        self._init_incumbent()
        base = _Region(self.roi.F.copy(), self.roi.h.copy())
        if self.eps is None:
            regions = [base]
        else:
            regions = []
            for k in range(self.n):
                e = np.zeros(self.n)
                e[k] = 1.0
                regions.append(base.child(-e, -self.eps))  # x_k >= eps
                regions.append(base.child(e, -self.eps))  # x_k <= -eps
        for region in regions:
            if self._stop:
                break
            if self._empty(region):
                continue
            self._descend_step(region, [], 0)
        self.stats.wall_time = time.perf_counter() - t0
        self.stats.lp_calls = lp.call_count() - lp0
        return self._result()

    def _precheck(self):
        if self.cl.input_box is not None:
            cover = output_range_box(self.net, self.roi)
            inner = geometry.bounding_box(cover)
            outer = geometry.bounding_box(self.cl.input_box)
            if (inner.lower < outer.lower - 1e-12).any() or (inner.upper > outer.upper + 1e-12).any():
                raise ValueError(
                    "declared input box does not cover the controller range over the roi"
                )

    def _descend_step(self, region, states, step_idx):
        if self._stop:
            return
        if step_idx == self.steps:
            self._leaf(region, states)
            return
        xmap = states[-1].y_map if states else (np.eye(self.n), np.zeros(self.n))
        covered = []
        children = []
        for i, m in enumerate(self.cl.plant.modes):
            T, t = xmap
            rows = m.region.F @ T
            rhs = m.region.h - m.region.F @ t
            covered.append(Polytope(rows, rhs))
            child = region.child(rows, rhs)
            if not self._empty(child):
                children.append((i, child))
        if self.opt.check_domain:
            if not region_covered_by(region.polytope(), covered, tol=self.opt.tol):
                step_word = "roi" if step_idx == 0 else f"step-{step_idx} successor set"
                raise DomainGap(f"{step_word} leaves the plant domain")
        for i, child in children:
            if self._stop:
                return
            st = _StepState()
            st.mode = i
            if self._maybe_prune(child, states + [st], step_idx, 0, None):
                continue
            self._descend_net(child, states + [st], step_idx, 0, xmap)

    def _descend_net(self, region, states, step_idx, layer_idx, zmap):
        if self._stop:
            return
        st = states[-1]
        if layer_idx == self.net.num_hidden:
            M, dvec = zmap
            Wl, bl = self.net.layers[-1]
            K, k = Wl @ M, Wl @ dvec + bl
            st.u_map = (K, k)
            if self.cl.controller.variant == RAW:
                self._finish_step(region, states, step_idx, K, k)
            else:
                self._descend_active_set(region, states, step_idx, K, k)
            return
        W, b = self.net.hidden[layer_idx]
        M, dvec = zmap
        G = W @ M
        beta = W @ dvec + b
        bb = self._bbox(region)
        if bb is None:
            return
        lo, hi = _interval_affine(G, beta, *bb)
        width = hi - lo
        dec = np.full(G.shape[0], -1, dtype=int)
        dec[(lo >= 0.0) & (hi > 0.0)] = 1
        dec[hi <= 0.0] = 0
        order = [int(j) for j in np.argsort(-width) if dec[j] < 0]

        def assign(region, idx):
            if self._stop:
                return
            if idx == len(order):
                act = dec.astype(float)
                st.pattern.append(tuple(bool(v) for v in dec))
                self._descend_net(
                    region, states, step_idx, layer_idx + 1, (G * act[:, None], beta * act)
                )
                st.pattern.pop()
                return
            j = order[idx]
            for val, rows, rhs in (
                (1, -G[j][None, :], np.array([beta[j]])),
                (0, G[j][None, :], np.array([-beta[j]])),
            ):
                child = region.child(rows, rhs)
                if self._empty(child):
                    continue
                dec[j] = val
                # re-bound periodically as constraints accumulate in the layer
                if idx % 4 == 3 and self._maybe_prune(child, states, step_idx, layer_idx, zmap):
                    dec[j] = -1
                    continue
                assign(child, idx + 1)
                dec[j] = -1

        assign(region, 0)

    def _descend_active_set(self, region, states, step_idx, K, k):
        st = states[-1]
        variant = self.cl.controller.variant
        mode = self.cl.plant.modes[st.mode]
        U = self.cl.controller.input_set
        if variant == PROJECTED_STATE:
            X = self.cl.controller.roi
            M_rows = np.vstack([X.F @ mode.B, U.F])
            R = np.vstack([-X.F @ mode.A, np.zeros((U.nrows, self.n))])
            r = np.concatenate([X.h, U.h])
        else:
            M_rows = U.F
            R = np.zeros((U.nrows, self.n))
            r = U.h
        T_prev, t_prev = states[-2].y_map if len(states) > 1 else (np.eye(self.n), np.zeros(self.n))
        nrows = M_rows.shape[0]
        nu = self.cl.plant.input_dim
        for size in range(min(nu, nrows) + 1):
            for S in itertools.combinations(range(nrows), size):
                if self._stop:
                    return
                MS = M_rows[list(S)]
                if size:
                    sv = np.linalg.svd(MS, compute_uv=False)
                    if sv[-1] <= 1e-10 * max(1.0, sv[0]):
                        self.stats.singular_kkt += 1
                        continue
                KKT = np.block([
                    [np.eye(nu), MS.T],
                    [MS, np.zeros((size, size))],
                ])
                # rhs columns: [pi(x) ; rhs_S(x)] = [K k; R_S r_S] acting on (x, 1)
                top = np.hstack([K, k[:, None]])
                bot = np.hstack([R[list(S)] @ T_prev, (R[list(S)] @ t_prev + r[list(S)])[:, None]])
                sol = np.linalg.solve(KKT, np.vstack([top, bot]))
                E, e = sol[:nu, :-1], sol[:nu, -1]
                Lam, lam0 = sol[nu:, :-1], sol[nu:, -1]
                rows = []
                rhs = []
                for a in range(size):
                    rows.append(-Lam[a])
                    rhs.append(lam0[a])
                inactive = [j for j in range(nrows) if j not in S]
                for j in inactive:
                    rows.append(M_rows[j] @ E - R[j] @ T_prev)
                    rhs.append(r[j] + R[j] @ t_prev - M_rows[j] @ e)
                child = region.child(np.array(rows), np.array(rhs)) if rows else region
                if rows and self._empty(child):
                    continue
                st.active_set = S
                st.u_map = (E, e)
                self._finish_step(child, states, step_idx, E, e)
                st.active_set = None

    def _finish_step(self, region, states, step_idx, K, k):
        st = states[-1]
        mode = self.cl.plant.modes[st.mode]
        T_prev, t_prev = states[-2].y_map if len(states) > 1 else (np.eye(self.n), np.zeros(self.n))
        T = mode.A @ T_prev + mode.B @ K
        t = mode.A @ t_prev + mode.B @ k + mode.c
        st.y_map = (T, t)
        st.u_map = (K, k)
        if step_idx + 1 == self.steps:
            self._check_final_successor(region, states)
        self._descend_step(region, states, step_idx + 1)
        st.y_map = None

    def _check_final_successor(self, region, states):
        raise NotImplementedError

    def _leaf(self, region, states):
        self.stats.leaves += 1
        poly = geometry.remove_redundant(region.polytope(), tol=self.opt.tol)
        form = self.objective(states)
        if self.opt.use_interval_pruning:
            bb = self._bbox(_Region(poly.F, poly.h))
            if bb is not None:
                _, qhi = _quad_form_box(form.Q, *bb)
                _, lhi = _interval_affine(form.q[None, :], np.array([form.c]), *bb)
                if qhi + lhi[0] <= self.p_best:
                    self.stats.pruned += 1
                    self._record_leaf(poly, states, None, None)
                    return
        try:
            argopt, value = qp_exact.extremize(form, poly, "max", tol=self.opt.tol)
        except geometry.EmptyPolytopeError:
            return
        self._improve(value, argopt)
        self._record_leaf(poly, states, value, argopt)

    def _record_leaf(self, poly, states, value, argopt):
        if self.leaves is None:
            return
        self.leaves.append(
            LeafRecord(
                region=poly,
                modes=tuple(st.mode for st in states),
                patterns=tuple(tuple(st.pattern) for st in states),
                active_sets=tuple(st.active_set for st in states),
                u_maps=tuple(st.u_map for st in states),
                y_maps=tuple(st.y_map for st in states),
                value=np.nan if value is None else value,
                argopt=np.zeros(self.n) if argopt is None else np.asarray(argopt),
            )
        )

    def _result(self):
        gap = 0.0
        if self.x_best is not None and np.isfinite(self.p_best):
            try:
                gap = abs(self.objective_eval(self.x_best) - self.p_best)
            except Exception:
                gap = np.nan
        status = CERTIFIED if self.p_best < 0.0 else COUNTEREXAMPLE
        return VerifierResult(status, float(self.p_best), self.x_best, self.stats,
                              self.leaves, gap)


class _QuadSearch(_Search):
    def __init__(self, cl, P, roi, eps, options):
        self.P = np.asarray(P, dtype=float)

        def objective(states):
            T, t = states[0].y_map
            Q = T.T @ self.P @ T - self.P
            q = 2.0 * T.T @ (self.P @ t)
            c = float(t @ self.P @ t)
            return QuadraticForm(Q, q, c)

        def objective_eval(x):
            y = cl.step(x)
            return float(y @ self.P @ y - x @ self.P @ x)

        super().__init__(cl, roi, eps, objective, objective_eval, 1, options)

    def _objective_box_bound(self, xbox, x1boxes):
        _, yhi = _quad_form_box(self.P, *x1boxes[0])
        xlo, _ = _quad_form_box(self.P, *xbox)
        return yhi - xlo

    def _check_final_successor(self, region, states):
        if not self.opt.check_domain:
            return
        T, t = states[-1].y_map
        covers = [
            Polytope(m.region.F @ T, m.region.h - m.region.F @ t)
            for m in self.cl.plant.modes
        ]
        if not region_covered_by(region.polytope(), covers, tol=self.opt.tol):
            raise DomainGap("successor set leaves the plant domain")


class _PwqSearch(_Search):
    def __init__(self, cl, P, roi, eps, options):
        self.P = np.asarray(P, dtype=float)

        def objective(states):
            n = roi.dim
            T0, t0 = states[0].y_map
            T1, t1 = states[1].y_map
            S0 = np.vstack([np.eye(n), T0])
            s0 = np.concatenate([np.zeros(n), t0])
            S1 = np.vstack([T0, T1])
            s1 = np.concatenate([t0, t1])
            Q = S1.T @ self.P @ S1 - S0.T @ self.P @ S0
            q = 2.0 * (S1.T @ (self.P @ s1) - S0.T @ (self.P @ s0))
            c = float(s1 @ self.P @ s1 - s0 @ self.P @ s0)
            return QuadraticForm(Q, q, c)

        def objective_eval(x):
            x1 = cl.step(x)
            x2 = cl.step(x1)
            v0 = np.concatenate([x, x1])
            v1 = np.concatenate([x1, x2])
            return float(v1 @ self.P @ v1 - v0 @ self.P @ v0)

        super().__init__(cl, roi, eps, objective, objective_eval, 2, options)

    def _objective_box_bound(self, xbox, x1boxes):
        v0 = (np.concatenate([xbox[0], x1boxes[0][0]]), np.concatenate([xbox[1], x1boxes[0][1]]))
        v1 = (np.concatenate([x1boxes[0][0], x1boxes[1][0]]),
              np.concatenate([x1boxes[0][1], x1boxes[1][1]]))
        _, hi1 = _quad_form_box(self.P, *v1)
        lo0, _ = _quad_form_box(self.P, *v0)
        return hi1 - lo0

    def _check_final_successor(self, region, states):
        return  # x2 may leave the domain; only x1 must stay inside


class _LinearSearch(_Search):
    def __init__(self, cl, roi, cvec, d, options):
        self.cvec = np.asarray(cvec, dtype=float)
        self.d = float(d)

        def objective(states):
            T, t = states[0].y_map
            return QuadraticForm(np.zeros((roi.dim, roi.dim)), T.T @ self.cvec,
                                 float(self.cvec @ t) - self.d)

        def objective_eval(x):
            return float(self.cvec @ cl.step(x)) - self.d

        super().__init__(cl, roi, None, objective, objective_eval, 1, options)

    def _objective_box_bound(self, xbox, x1boxes):
        _, hi = _interval_affine(self.cvec[None, :], np.array([-self.d]), *x1boxes[0])
        return float(hi[0])

    def _check_final_successor(self, region, states):
        return  # a linear functional of the successor needs no second step

    def _leaf(self, region, states):
        self.stats.leaves += 1
        form = self.objective(states)
        sol = lp.maximize(form.q, region.F, region.h, tol=self.opt.tol)
        if sol.status != lp.LpStatus.Optimal:
            return
        self._improve(sol.value + form.c, sol.x)
        self._record_leaf(region.polytope(), states, sol.value + form.c, sol.x)


def verify_quadratic(cl, P, roi, eps, options=None) -> VerifierResult:
    """Exact max of V(f(x)) - V(x) over roi minus the eps-ball, V = x'Px."""
    P = np.asarray(P, dtype=float)
    _require_psd(P)
    if cl.controller.variant == RAW:
        return _QuadSearch(cl, P, roi, eps, options).run()
    return _ProjSearch(cl, P, roi, eps, options).run()


def verify_pwq(cl, P, roi, eps, options=None) -> VerifierResult:
    """Exact max of the lifted two-step decrease objective (2n x 2n P)."""
    if cl.controller.variant != RAW:
        raise ValueError("piecewise-quadratic verification supports raw controllers only")
    P = np.asarray(P, dtype=float)
    if P.shape != (2 * roi.dim, 2 * roi.dim):
        raise ValueError("lifted parameter must be 2n x 2n")
    return _PwqSearch(cl, P, roi, eps, options).run()


def verify_projected(cl, P, roi, eps, options=None) -> VerifierResult:
    """verify_quadratic for controllers with a projection stage."""
    if cl.controller.variant == RAW:
        raise ValueError("controller has no projection; use verify_quadratic")
    return _ProjSearch(cl, np.asarray(P, dtype=float), roi, eps, options).run()


class _ProjSearch(_QuadSearch):
    pass  # the projection stage is engaged by the controller variant


def verify_linear_objective(cl, roi, c, d, options=None) -> float:
    """Exact max of c . f_cl(x) - d over the roi."""
    return _LinearSearch(cl, roi, c, d, options).run().p_star


class _LiftedMinSearch(_Search):
    """Exact minimum of (x, f(x))' P (x, f(x)) over a region (run negated)."""

    def __init__(self, cl, P, region, options):
        self.P = np.asarray(P, dtype=float)
        n = region.dim

        def objective(states):
            T, t = states[0].y_map
            S = np.vstack([np.eye(n), T])
            s = np.concatenate([np.zeros(n), t])
            Q = -(S.T @ self.P @ S)
            q = -2.0 * S.T @ (self.P @ s)
            c = -float(s @ self.P @ s)
            return QuadraticForm(Q, q, c)

        def objective_eval(x):
            v = np.concatenate([x, cl.step(x)])
            return -float(v @ self.P @ v)

        super().__init__(cl, region, None, objective, objective_eval, 1, options)

    def _objective_box_bound(self, xbox, x1boxes):
        v = (np.concatenate([xbox[0], x1boxes[0][0]]),
             np.concatenate([xbox[1], x1boxes[0][1]]))
        lo, _ = _quad_form_box(self.P, *v)
        return -lo

    def _check_final_successor(self, region, states):
        return  # the lifted value needs f(x) only, which the mode branch pins


def minimize_lifted_quadratic(cl, P, region, options=None) -> VerifierResult:
    """Exact min over `region` of the lifted value (x, f_cl(x))' P (. , .)."""
    res = _LiftedMinSearch(cl, P, region, options).run()
    res.p_star = -res.p_star
    return res


def _require_psd(P):
    w = np.linalg.eigvalsh(0.5 * (P + P.T))
    if w.min() < -1e-10:
        raise ValueError(f"P must be positive semidefinite (min eigenvalue {w.min():.2e})")


def _lipschitz_data(cl, roi):
    """Norm radii and Lipschitz constants of x, f(x), f(f(x)) over the roi."""
    box = geometry.bounding_box(roi)
    L_pi = 1.0
    for W, _ in cl.controller.net.layers:
        L_pi *= np.linalg.norm(W, 2)
    L_f = max(
        np.linalg.norm(m.A, 2) + np.linalg.norm(m.B, 2) * L_pi for m in cl.plant.modes
    )
    corner = np.maximum(np.abs(box.lower), np.abs(box.upper))
    R_x = float(np.linalg.norm(corner))

    def image_radius(lo, hi):
        zlo, zhi = lo, hi
        for W, b in cl.controller.net.hidden:
            plo, phi = _interval_affine(W, b, zlo, zhi)
            zlo, zhi = np.maximum(plo, 0.0), np.maximum(phi, 0.0)
        Wl, bl = cl.controller.net.layers[-1]
        ulo, uhi = _interval_affine(Wl, bl, zlo, zhi)
        ylo = np.full(lo.size, np.inf)
        yhi = np.full(lo.size, -np.inf)
        for m in cl.plant.modes:
            mlo, mhi = _interval_affine(
                np.hstack([m.A, m.B]), m.c, np.concatenate([lo, ulo]), np.concatenate([hi, uhi])
            )
            ylo = np.minimum(ylo, mlo)
            yhi = np.maximum(yhi, mhi)
        return ylo, yhi

    flo, fhi = image_radius(box.lower, box.upper)
    R_f = float(np.linalg.norm(np.maximum(np.abs(flo), np.abs(fhi))))
    f2lo, f2hi = image_radius(flo, fhi)
    R_f2 = float(np.linalg.norm(np.maximum(np.abs(f2lo), np.abs(f2hi))))
    return box, L_f, R_x, R_f, R_f2


def grid_oracle(cl, P, roi, eps, resolution=500, kind="quadratic"):
    """Dense-grid approximate maximum of the decrease objective.

    Returns (value, error_bound): the exact maximum lies within
    [value, value + error_bound], where the bound is the objective's
    Lipschitz constant over the roi times the grid cell half-diagonal.
    Raw controllers only (the projection's state-dependent Lipschitz
    constant is not tracked); state dimension <= 3.
    """
    if cl.controller.variant != RAW:
        raise ValueError("grid oracle bounds cover raw controllers only")
    n = roi.dim
    if n > 3:
        raise ValueError("grid oracle limited to state dimension <= 3")
    P = np.asarray(P, dtype=float)
    box, L_f, R_x, R_f, R_f2 = _lipschitz_data(cl, roi)
    axes = [np.linspace(box.lower[k], box.upper[k], resolution) for k in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    pts = pts[roi.contains(pts)]
    if eps:
        pts = pts[np.abs(pts).max(axis=1) >= eps]
    if pts.shape[0] == 0:
        return -np.inf, 0.0
    Y, ok = cl.step_batch(pts)
    pts, Y = pts[ok], Y[ok]
    Pn = np.linalg.norm(P, 2)
    if kind == "quadratic":
        vals = ((Y @ P) * Y).sum(axis=1) - ((pts @ P) * pts).sum(axis=1)
        L = 2.0 * Pn * (L_f * R_f + R_x)
    elif kind == "pwq":
        Y2, ok2 = cl.step_batch(Y)
        pts, Y, Y2 = pts[ok2], Y[ok2], Y2[ok2]
        v0 = np.hstack([pts, Y])
        v1 = np.hstack([Y, Y2])
        vals = ((v1 @ P) * v1).sum(axis=1) - ((v0 @ P) * v0).sum(axis=1)
        L_v0 = np.sqrt(1.0 + L_f ** 2)
        L_v1 = np.sqrt(L_f ** 2 + L_f ** 4)
        R_v0 = np.sqrt(R_x ** 2 + R_f ** 2)
        R_v1 = np.sqrt(R_f ** 2 + R_f2 ** 2)
        L = 2.0 * Pn * (L_v1 * R_v1 + L_v0 * R_v0)
    else:
        raise ValueError(f"unknown oracle kind {kind!r}")
    # full cell diagonal as covering radius: near the roi boundary and the
    # exclusion ball the nearest kept grid point can sit a whole cell away
    cell = np.linalg.norm([(ax[1] - ax[0]) for ax in axes]) if resolution > 1 else 0.0
    return float(vals.max()), float(L * cell)


def solve_projection_qp(x, net_output, roi, A, B, input_set, tol=1e-8):
    """Projection of the raw controller output onto the admissible set.

    With roi/A/B given, the set is {u | A x + B u in roi, u in input_set};
    with them None it is just input_set.  Solved exactly by enumerating
    candidate active sets (the input dimension is small).
    """
    g = np.asarray(net_output, dtype=float).ravel()
    if roi is not None:
        x = np.asarray(x, dtype=float)
        M = np.vstack([roi.F @ B, input_set.F])
        rhs = np.concatenate([roi.h - roi.F @ (A @ x), input_set.h])
    else:
        M = input_set.F
        rhs = input_set.h
    return _project_point(g, M, rhs, tol=tol)


def _project_point(g, M, rhs, tol=1e-8):
    nu = g.size
    nrows = M.shape[0]
    feas = lp.maximize(np.zeros(nu), M, rhs)
    if feas.status != lp.LpStatus.Optimal:
        raise EmptyProjectionSet("projection constraint set is empty")
    if (M @ g <= rhs + tol).all():
        return g
    best = None
    best_dist = np.inf
    for size in range(min(nu, nrows) + 1):
        for S in itertools.combinations(range(nrows), size):
            MS = M[list(S)]
            if size:
                sv = np.linalg.svd(MS, compute_uv=False)
                if sv[-1] <= 1e-10 * max(1.0, sv[0]):
                    continue
            KKT = np.block([[np.eye(nu), MS.T], [MS, np.zeros((size, size))]])
            sol = np.linalg.solve(KKT, np.concatenate([g, rhs[list(S)]]))
            u, lam = sol[:nu], sol[nu:]
            if size and lam.min() < -tol:
                continue
            if (M @ u <= rhs + tol).all():
                dist = float(np.linalg.norm(u - g))
                if dist < best_dist - 1e-12:
                    best, best_dist = u, dist
    if best is None:
        raise EmptyProjectionSet("no KKT-consistent active set found")
    return best
