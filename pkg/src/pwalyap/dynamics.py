"""Piecewise-affine plants, ReLU network controllers, and their closed loop.

The plant steps through x+ = A_i x + B_i u + c_i on polytopic regions R_i;
the controller is a feed-forward ReLU network (optionally followed by a
projection onto an input- or state-dependent constraint set); the closed
loop composes the two into an autonomous piecewise-affine map.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, geometry
from .errors import DegenerateOrigin, OutOfDomain, UnboundedError
from .geometry import Box, Polytope

STEP_TOL = 1e-8
ORIGIN_TOL = 1e-9
OUTPUT_BOX_MARGIN = 1e-6


@dataclass(frozen=True)
class PwaMode:
    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    region: Polytope

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        c = np.asarray(self.c, dtype=float).ravel()
        if B.shape[0] != A.shape[0] and B.shape[1] == A.shape[0]:
            B = B.T
        for arr in (A, B, c):
            arr.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", c)
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or c.shape != (n,):
            raise ValueError("mode matrices have inconsistent shapes")
        if self.region.dim != n:
            raise ValueError("mode region dimension differs from state dimension")


class PwaSystem:
    """x+ = A_i x + B_i u + c_i on regions R_i; lowest index wins overlaps."""

    def __init__(self, modes, check_bounded=True):
        if not modes:
            raise ValueError("a PWA system needs at least one mode")
        self.modes = [m if isinstance(m, PwaMode) else PwaMode(*m) for m in modes]
        self.state_dim = self.modes[0].A.shape[0]
        self.input_dim = self.modes[0].B.shape[1]
        for m in self.modes:
            if m.A.shape[0] != self.state_dim or m.B.shape[1] != self.input_dim:
                raise ValueError("modes disagree on state/input dimension")
        if check_bounded:
            for i, m in enumerate(self.modes):
                if not geometry.is_bounded(m.region):
                    raise UnboundedError(f"region of mode {i} is unbounded")
        i0 = self.mode_of(np.zeros(self.state_dim), missing_ok=True)
        if i0 is not None and np.linalg.norm(self.modes[i0].c) > ORIGIN_TOL:
            raise ValueError("the origin's mode has a nonzero affine term")
        self._stack = None

    def mode_of(self, x, tol=STEP_TOL, missing_ok=False):
        for i, m in enumerate(self.modes):
            if m.region.contains(x, tol=tol):
                return i
        if missing_ok:
            return None
        raise OutOfDomain(x)

    def _stacked(self):
        if self._stack is None:
            F = np.vstack([m.region.F for m in self.modes])
            h = np.concatenate([m.region.h for m in self.modes])
            offsets = np.cumsum([0] + [m.region.nrows for m in self.modes])
            self._stack = (F, h, offsets.astype(np.int64))
        return self._stack

    def modes_of_batch(self, X, tol=STEP_TOL):
        F, h, offsets = self._stacked()
        return _kernels.assign_modes(np.ascontiguousarray(X, dtype=float), F, h, offsets, tol)

    def sample_wellposedness(self, rng, pairs_samples=1000, tol=1e-7):
        """Check psi_i = psi_j on sampled points of overlapping regions."""
        for i in range(len(self.modes)):
            for j in range(i + 1, len(self.modes)):
                mi, mj = self.modes[i], self.modes[j]
                inter = mi.region.intersect(mj.region)
                if geometry.is_empty(inter):
                    continue
                box = geometry.bounding_box(inter)
                pts = rng.uniform(box.lower, box.upper, size=(20 * pairs_samples, self.state_dim))
                pts = pts[inter.contains(pts)][:pairs_samples]
                if pts.shape[0] == 0:
                    c, _ = geometry.chebyshev_center(inter)
                    pts = c[None, :]
                u = rng.uniform(-1, 1, size=(pts.shape[0], self.input_dim))
                yi = pts @ mi.A.T + u @ mi.B.T + mi.c
                yj = pts @ mj.A.T + u @ mj.B.T + mj.c
                gap = np.abs(yi - yj).max()
                if gap > tol:
                    raise ValueError(
                        f"modes {i} and {j} disagree on their overlap (gap {gap:.2e})"
                    )
        return True


class ReluNetwork:
    """Alternating affine maps and elementwise max(., 0); last layer affine."""

    def __init__(self, layers):
        self.layers = []
        for W, b in layers:
            W = np.atleast_2d(np.asarray(W, dtype=float))
            b = np.asarray(b, dtype=float).ravel()
            if W.shape[0] != b.shape[0]:
                raise ValueError("layer weight/bias row mismatch")
            W.setflags(write=False)
            b.setflags(write=False)
            self.layers.append((W, b))
        for (W1, _), (W2, _) in zip(self.layers, self.layers[1:]):
            if W2.shape[1] != W1.shape[0]:
                raise ValueError("consecutive layer dimensions do not chain")
        self.input_dim = self.layers[0][0].shape[1]
        self.output_dim = self.layers[-1][0].shape[0]
        out0, _ = self.forward(np.zeros(self.input_dim))
        if np.abs(out0).max() > ORIGIN_TOL:
            raise ValueError(f"network output at the origin is {out0}, expected 0")

    @property
    def hidden(self):
        return self.layers[:-1]

    @property
    def num_hidden(self):
        return len(self.layers) - 1

    def forward(self, x):
        """Evaluate the network; also return the on/off activation pattern.

        A pre-activation of exactly 0 counts as off, matching max(., 0) = 0.
        """
        z = np.asarray(x, dtype=float)
        pattern = []
        for W, b in self.hidden:
            a = W @ z + b
            pattern.append(a > 0.0)
            z = np.maximum(a, 0.0)
        W, b = self.layers[-1]
        return W @ z + b, pattern

    def forward_batch(self, X):
        Z = np.asarray(X, dtype=float)
        for W, b in self.hidden:
            Z = np.maximum(Z @ W.T + b, 0.0)
        W, b = self.layers[-1]
        return Z @ W.T + b

    def to_json(self):
        return {"layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.layers]}

    @staticmethod
    def from_json(obj):
        return ReluNetwork([(l["W"], l["b"]) for l in obj["layers"]])


RAW = "raw"
PROJECTED_STATE = "projected_state"
PROJECTED_INPUT = "projected_input"


@dataclass(frozen=True)
class ControllerSpec:
    """A ReLU controller, optionally projected onto an admissible set.

    variant "projected_state" projects onto {u | Ax + Bu in roi, u in
    input_set} (LTI plants only); "projected_input" onto input_set alone.
    """

    net: ReluNetwork
    variant: str = RAW
    roi: Polytope | None = None
    input_set: Polytope | None = None

    def __post_init__(self):
        if self.variant not in (RAW, PROJECTED_STATE, PROJECTED_INPUT):
            raise ValueError(f"unknown controller variant {self.variant!r}")
        if self.variant == PROJECTED_STATE and (self.roi is None or self.input_set is None):
            raise ValueError("state-dependent projection needs roi and input_set")
        if self.variant == PROJECTED_INPUT and self.input_set is None:
            raise ValueError("input projection needs input_set")


class ClosedLoop:
    """x+ = psi(x, pi(x)): the autonomous composition of plant and controller."""

    def __init__(self, plant: PwaSystem, controller, input_box: Polytope | None = None):
        if isinstance(controller, ReluNetwork):
            controller = ControllerSpec(controller)
        self.plant = plant
        self.controller = controller
        self.input_box = input_box
        if controller.net.input_dim != plant.state_dim:
            raise ValueError("controller input dimension differs from state dimension")
        if controller.net.output_dim != plant.input_dim:
            raise ValueError("controller output dimension differs from plant input")
        if controller.variant == PROJECTED_STATE:
            if len(plant.modes) != 1:
                raise ValueError("state-dependent projection requires an LTI plant")
            if np.linalg.norm(plant.modes[0].c) > ORIGIN_TOL:
                raise ValueError("state-dependent projection requires x+ = Ax + Bu")
        step0 = self.step(np.zeros(plant.state_dim))
        if np.abs(step0).max() > 10 * ORIGIN_TOL:
            raise ValueError("the origin is not an equilibrium of the closed loop")

    def control(self, x):
        u, _ = self.controller.net.forward(x)
        if self.controller.variant == RAW:
            return u
        from .verifier import solve_projection_qp

        if self.controller.variant == PROJECTED_INPUT:
            return solve_projection_qp(x, u, None, None, None, self.controller.input_set)
        mode = self.plant.modes[0]
        return solve_projection_qp(
            x, u, self.controller.roi, mode.A, mode.B, self.controller.input_set
        )

    def step(self, x):
        return pwa_step(self.plant, x, self.control(x))

    def step_batch(self, X):
        """Vectorized closed-loop step; returns (Y, valid mask)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.controller.variant == RAW:
            U = self.controller.net.forward_batch(X)
        else:
            U = np.array([self.control(x) for x in X])
        idx = self.plant.modes_of_batch(X)
        Y = np.zeros_like(X)
        for i, m in enumerate(self.plant.modes):
            sel = idx == i
            if sel.any():
                Y[sel] = X[sel] @ m.A.T + U[sel] @ m.B.T + m.c
        return Y, idx >= 0


def pwa_step(sys: PwaSystem, x, u):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float).ravel()
    i = sys.mode_of(x)
    m = sys.modes[i]
    return m.A @ x + m.B @ u + m.c


def relu_forward(net: ReluNetwork, x):
    return net.forward(x)


def closed_loop_step(cl: ClosedLoop, x):
    return cl.step(x)


def rollout(cl: ClosedLoop, x0, k):
    """[x0, f(x0), ...] up to k steps; truncates if the state leaves the domain."""
    x = np.asarray(x0, dtype=float)
    traj = [x]
    truncated = False
    for _ in range(k):
        try:
            x = cl.step(x)
        except OutOfDomain:
            truncated = True
            break
        traj.append(x)
    return np.array(traj), truncated


def _interval_affine(W, b, lo, hi):
    Wp = np.maximum(W, 0.0)
    Wn = np.minimum(W, 0.0)
    return Wp @ lo + Wn @ hi + b, Wp @ hi + Wn @ lo + b


def preactivation_bounds(net: ReluNetwork, input_poly: Polytope, method="interval"):
    """Sound per-hidden-layer element-wise pre-activation bounds.

    "interval" propagates the input's bounding box; "lp" additionally
    tightens every neuron with an LP over the triangle relaxation of all
    earlier layers, so its bounds are never looser.
    """
    if method not in ("interval", "lp"):
        raise ValueError(f"unknown bound method {method!r}")
    box = geometry.bounding_box(input_poly)
    bounds = []
    lo, hi = box.lower, box.upper
    for W, b in net.hidden:
        plo, phi = _interval_affine(W, b, lo, hi)
        bounds.append((plo, phi))
        lo, hi = np.maximum(plo, 0.0), np.maximum(phi, 0.0)
    if method == "interval":
        return bounds
    return _lp_bounds(net, input_poly, bounds)


def _lp_bounds(net, input_poly, interval_bounds):
    # variables are (x, z_1, ..., z_L): the input and every post-activation;
    # each layer adds its triangle relaxation before the next is bounded
    from . import lp as lpmod

    nx = net.input_dim
    widths = [W.shape[0] for W, _ in net.hidden]
    nvar = nx + sum(widths)

    G_rows = [np.hstack([input_poly.F, np.zeros((input_poly.nrows, nvar - nx))])]
    h_rows = [input_poly.h]
    bounds = []
    prev_off, prev_w = 0, nx
    for li, (W, b) in enumerate(net.hidden):
        width = W.shape[0]
        zoff = nx + sum(widths[:li])
        G = np.vstack(G_rows)
        hvec = np.concatenate(h_rows)
        ilo, ihi = interval_bounds[li]
        lo = np.empty(width)
        hi = np.empty(width)
        pre = np.zeros((width, nvar))
        pre[:, prev_off:prev_off + prev_w] = W
        for j in range(width):
            smax = lpmod.maximize(pre[j], G, hvec)
            smin = lpmod.maximize(-pre[j], G, hvec)
            hi[j] = min(smax.value + b[j], ihi[j])
            lo[j] = min(max(-smin.value + b[j], ilo[j]), hi[j])
        bounds.append((lo, hi))
        for j in range(width):
            zj = np.zeros(nvar)
            zj[zoff + j] = 1.0
            if lo[j] >= 0.0:  # always active: z = pre
                G_rows += [(zj - pre[j])[None], (pre[j] - zj)[None]]
                h_rows += [np.array([b[j]]), np.array([-b[j]])]
            elif hi[j] <= 0.0:  # always inactive: z = 0
                G_rows += [zj[None], -zj[None]]
                h_rows += [np.zeros(1), np.zeros(1)]
            else:
                s = hi[j] / (hi[j] - lo[j])
                G_rows += [-zj[None], (pre[j] - zj)[None], (zj - s * pre[j])[None]]
                h_rows += [np.zeros(1), np.array([-b[j]]), np.array([s * (b[j] - lo[j])])]
        prev_off, prev_w = zoff, width
    return bounds


def output_range_box(net: ReluNetwork, roi: Polytope, method="interval",
                     margin=OUTPUT_BOX_MARGIN) -> Polytope:
    """A box guaranteed to contain pi(x) for every x in the roi."""
    W, b = net.layers[-1]
    if net.num_hidden == 0:
        box = geometry.bounding_box(roi)
        lo, hi = _interval_affine(W, b, box.lower, box.upper)
    else:
        bounds = preactivation_bounds(net, roi, method=method)
        plo, phi = bounds[-1]
        lo, hi = _interval_affine(W, b, np.maximum(plo, 0.0), np.maximum(phi, 0.0))
    return Box(lo - margin, hi + margin).as_polytope()


def affine_region_of_pattern(net: ReluNetwork, pattern):
    """Fix an activation pattern: the affine controller map on its region.

    Returns (K, k, rows_F, rows_h) with pi(x) = Kx + k wherever
    rows_F x <= rows_h.  Neurons whose pre-activation is identically zero
    on the region contribute no constraint.
    """
    nx = net.input_dim
    M = np.eye(nx)
    d = np.zeros(nx)
    rows_F, rows_h = [], []
    for (W, b), pat in zip(net.hidden, pattern):
        G = W @ M
        beta = W @ d + b
        for j in range(W.shape[0]):
            if np.abs(G[j]).max() <= 1e-12 and abs(beta[j]) <= 1e-12:
                continue
            if pat[j]:
                rows_F.append(-G[j])
                rows_h.append(beta[j])
            else:
                rows_F.append(G[j])
                rows_h.append(-beta[j])
        act = np.asarray(pat, dtype=float)
        M = G * act[:, None]
        d = beta * act
    W, b = net.layers[-1]
    return W @ M, W @ d + b, np.array(rows_F), np.array(rows_h)


def local_linearization(cl: ClosedLoop):
    """The exact linear closed-loop map A_cl on the origin's pattern region D0.

    Raises DegenerateOrigin when a neuron's pre-activation vanishes at the
    origin while varying with x, since no single-sided pattern then holds on
    a neighborhood.
    """
    net = cl.controller.net
    x0 = np.zeros(cl.plant.state_dim)
    i0 = cl.plant.mode_of(x0)
    mode = cl.plant.modes[i0]
    # detect sign-ambiguous neurons along the way
    M = np.eye(net.input_dim)
    d = np.zeros(net.input_dim)
    pattern = []
    for W, b in net.hidden:
        G = W @ M
        beta = W @ d + b
        pat = beta > 0.0
        amb = (np.abs(beta) <= 1e-12) & (np.abs(G).max(axis=1) > 1e-12)
        if amb.any():
            raise DegenerateOrigin(
                f"pre-activation exactly 0 at the origin for neurons {np.nonzero(amb)[0]}"
            )
        pattern.append(pat)
        act = pat.astype(float)
        M = G * act[:, None]
        d = beta * act
    K, k, rows_F, rows_h = affine_region_of_pattern(net, pattern)
    if np.abs(k).max() > 1e-9 or np.abs(mode.B @ k + mode.c).max() > 1e-9:
        raise DegenerateOrigin("origin pattern map has a nonzero affine part")
    A_cl = mode.A + mode.B @ K
    D0 = mode.region
    if rows_F.size:
        D0 = D0.with_rows(rows_F, rows_h)
    if cl.controller.variant != RAW:
        U = cl.controller.input_set
        extra_F = [U.F @ K]
        extra_h = [U.h]
        if cl.controller.variant == PROJECTED_STATE:
            X = cl.controller.roi
            extra_F.append(X.F @ A_cl)
            extra_h.append(X.h)
            if (X.h <= 1e-12).any():
                raise DegenerateOrigin("projection constraint active at the origin")
        if (U.h <= 1e-12).any():
            raise DegenerateOrigin("input constraint active at the origin")
        D0 = D0.with_rows(np.vstack(extra_F), np.concatenate(extra_h))
    D0 = geometry.remove_redundant(D0)
    return A_cl, D0


def saturated_linear_controller(K, limits) -> ReluNetwork:
    """A ReLU network computing clamp(Kx) exactly.

    Uses clamp(y, lo, hi) = lo + relu(y - lo) - relu(y - hi), so each
    output needs two hidden neurons.  Requires lo < 0 < hi so that the
    network vanishes at the origin.
    """
    K = np.atleast_2d(np.asarray(K, dtype=float))
    nu, nx = K.shape
    limits = np.asarray(limits, dtype=float)
    if limits.ndim == 0:
        limits = np.tile([-abs(limits), abs(limits)], (nu, 1))
    limits = np.atleast_2d(limits)
    if limits.shape != (nu, 2):
        raise ValueError("limits must be one (lo, hi) pair per input")
    lo, hi = limits[:, 0], limits[:, 1]
    if (lo >= 0).any() or (hi <= 0).any():
        raise ValueError("saturation limits must straddle zero")
    W1 = np.repeat(K, 2, axis=0)
    b1 = np.empty(2 * nu)
    b1[0::2] = -lo
    b1[1::2] = -hi
    W2 = np.zeros((nu, 2 * nu))
    W2[np.arange(nu), 2 * np.arange(nu)] = 1.0
    W2[np.arange(nu), 2 * np.arange(nu) + 1] = -1.0
    return ReluNetwork([(W1, b1), (W2, lo)])


def system_to_json(sys: PwaSystem):
    return {
        "modes": [
            {"A": m.A.tolist(), "B": m.B.tolist(), "c": m.c.tolist(),
             "F": m.region.F.tolist(), "h": m.region.h.tolist()}
            for m in sys.modes
        ]
    }


def system_from_json(obj, check_bounded=True) -> PwaSystem:
    modes = [
        PwaMode(np.asarray(m["A"], dtype=float), np.asarray(m["B"], dtype=float),
                np.asarray(m["c"], dtype=float),
                Polytope(np.asarray(m["F"], dtype=float), np.asarray(m["h"], dtype=float)))
        for m in obj["modes"]
    ]
    return PwaSystem(modes, check_bounded=check_bounded)
