"""The learner: localization set over symmetric matrices and its analytic
center.

The candidate parameter P lives in {0 <= P <= I} cut down by accumulated
half-spaces <D_j, P> <= c_j.  The analytic center minimizes the log-barrier
potential of that system; a damped Newton method in the scaled-vectorized
(svec) coordinates converges in a handful of steps at these sizes (P is at
most 4 x 4).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalFailure, ZeroCut

NEWTON_DECREMENT_TOL = 1e-8
GRAD_TOL = 1e-6
PHASE1_MARGIN = 1e-6
PHASE1_SWEEPS = 10_000

QUADRATIC = "quadratic"
PWQ = "pwq"


def svec(M):
    """Scaled upper-triangle vectorization with <A,B> = svec(A).svec(B)."""
    d = M.shape[0]
    out = []
    for i in range(d):
        out.append(M[i, i])
        for j in range(i + 1, d):
            out.append(np.sqrt(2.0) * M[i, j])
    return np.array(out)


def smat(v, d):
    M = np.zeros((d, d))
    k = 0
    for i in range(d):
        M[i, i] = v[k]
        k += 1
        for j in range(i + 1, d):
            M[i, j] = M[j, i] = v[k] / np.sqrt(2.0)
            k += 1
    return M


def svec_dim(d):
    return d * (d + 1) // 2


@dataclass(frozen=True)
class Cut:
    """Half-space <D, P> <= c with ||D||_F = 1, from counterexample `source`."""

    D: np.ndarray
    c: float
    source: np.ndarray

    def slack(self, P):
        return self.c - float((self.D * P).sum())


@dataclass
class LocalizationSet:
    """Cuts plus the implicit spectral box 0 <= P <= I."""

    dim: int
    cuts: list = field(default_factory=list)

    def add(self, cut: Cut):
        if cut.D.shape != (self.dim, self.dim):
            raise ValueError("cut dimension mismatch")
        self.cuts.append(cut)

    def slacks(self, P):
        return np.array([c.slack(P) for c in self.cuts])


@dataclass(frozen=True)
class CandidateParam:
    P: np.ndarray
    kind: str


@dataclass(frozen=True)
class AnalyticCenterResult:
    status: str  # "optimal" | "infeasible"
    candidate: CandidateParam | None
    newton_decrement: float = np.nan
    grad_norm: float = np.nan
    iterations: int = 0


def make_cut(x_star, cl, kind, mode="strict", P_current=None) -> Cut:
    """Separating hyperplane from a counterexample state.

    For quadratic candidates D ~ f(x)f(x)' - xx'; for the lifted piecewise
    quadratic class the pair (x, f(x)) -> (f(x), f(f(x))) takes that role.
    """
    x = np.asarray(x_star, dtype=float)
    fx = cl.step(x)
    if kind == QUADRATIC:
        v0, v1 = x, fx
    elif kind == PWQ:
        ffx = cl.step(fx)
        v0 = np.concatenate([x, fx])
        v1 = np.concatenate([fx, ffx])
    else:
        raise ValueError(f"unknown candidate kind {kind!r}")
    D = np.outer(v1, v1) - np.outer(v0, v0)
    norm = np.linalg.norm(D)
    if norm < 1e-12:
        raise ZeroCut(f"degenerate cut at x = {x} (f(x) = +-x)")
    D = D / norm
    if mode == "strict":
        c = 0.0
    elif mode == "relaxed":
        if P_current is None:
            raise ValueError("relaxed cuts need the current center")
        c = float((D * P_current).sum())
        if c < -1e-9:
            raise NumericalFailure(f"relaxed cut offset {c} < 0 at a counterexample")
        c = max(c, 0.0)
    else:
        raise ValueError(f"unknown cut mode {mode!r}")
    return Cut(D, c, x.copy())


def _strictly_feasible(ls, P, eig_margin=1e-9, slack_margin=0.0):
    w = np.linalg.eigvalsh(P)
    if w.min() <= eig_margin or w.max() >= 1.0 - eig_margin:
        return False
    if ls.cuts and ls.slacks(P).min() <= slack_margin:
        return False
    return True


def potential_value(ls: LocalizationSet, P) -> float:
    """phi(P) = -sum log(slack_j) - log det P - log det (I - P)."""
    P = np.asarray(P, dtype=float)
    w = np.linalg.eigvalsh(P)
    if w.min() <= 0 or w.max() >= 1:
        raise DomainError("P outside the open spectral box")
    val = -np.log(w).sum() - np.log1p(-w).sum()
    if ls.cuts:
        s = ls.slacks(P)
        if s.min() <= 0:
            raise DomainError("nonpositive cut slack")
        val -= np.log(s).sum()
    return float(val)


def potential_gradient(ls: LocalizationSet, P):
    P = np.asarray(P, dtype=float)
    Pinv = np.linalg.inv(P)
    Qinv = np.linalg.inv(np.eye(ls.dim) - P)
    G = -Pinv + Qinv
    for cut in ls.cuts:
        G = G + cut.D / cut.slack(P)
    return 0.5 * (G + G.T)


def _hessian_matrix(ls, P):
    d = ls.dim
    k = svec_dim(d)
    Pinv = np.linalg.inv(P)
    Qinv = np.linalg.inv(np.eye(d) - P)
    H = np.zeros((k, k))
    basis = np.eye(k)
    for i in range(k):
        E = smat(basis[i], d)
        H[:, i] = svec(Pinv @ E @ Pinv + Qinv @ E @ Qinv)
    for cut in ls.cuts:
        dvec = svec(cut.D)
        H += np.outer(dvec, dvec) / cut.slack(P) ** 2
    return 0.5 * (H + H.T)


def phase_one(ls: LocalizationSet, delta=PHASE1_MARGIN, sweeps=PHASE1_SWEEPS):
    """Alternating projections onto the shrunk spectral box and cut
    half-spaces; returns a strictly feasible P or None if presumed empty."""
    d = ls.dim
    P = 0.5 * np.eye(d)
    if not ls.cuts:
        return P
    for _ in range(sweeps):
        moved = False
        for cut in ls.cuts:
            s = cut.slack(P)
            if s < delta:
                P = P - (delta - s) * cut.D  # ||D||_F = 1
                moved = True
        w, U = np.linalg.eigh(0.5 * (P + P.T))
        wc = np.clip(w, delta, 1.0 - delta)
        if np.abs(wc - w).max() > 0:
            P = (U * wc) @ U.T
            moved = True
        if not moved or ls.slacks(P).min() >= delta / 2:
            w = np.linalg.eigvalsh(P)
            if w.min() >= delta / 2 and w.max() <= 1 - delta / 2 and ls.slacks(P).min() >= delta / 2:
                return 0.5 * (P + P.T)
    return None


def _warm_start_point(ls, warm):
    P = warm.P if isinstance(warm, CandidateParam) else np.asarray(warm, dtype=float)
    if _strictly_feasible(ls, P, slack_margin=1e-12):
        return P
    if not ls.cuts:
        return None
    # newest cut usually passes through (or cuts off) the previous center;
    # retreat along its normal until strictly inside
    newest = ls.cuts[-1]
    s = newest.slack(P)
    for t in (0.3, 0.1, 0.03, 0.01, 0.003, 0.001):
        cand = P - (max(0.0, -s) + t) * newest.D
        if _strictly_feasible(ls, cand, eig_margin=1e-9, slack_margin=1e-12):
            return cand
    return None


def analytic_center(ls: LocalizationSet, warm_start=None, max_iter=200) -> AnalyticCenterResult:
    d = ls.dim
    if not ls.cuts:
        P = 0.5 * np.eye(d)
        return AnalyticCenterResult("optimal", CandidateParam(P, ""), 0.0, 0.0, 0)
    P = None
    if warm_start is not None:
        P = _warm_start_point(ls, warm_start)
    if P is None:
        P = phase_one(ls)
        if P is None:
            return AnalyticCenterResult("infeasible", None)
    decrement = np.inf
    for it in range(max_iter):
        g = potential_gradient(ls, P)
        gvec = svec(g)
        H = _hessian_matrix(ls, P)
        try:
            step = np.linalg.solve(H, -gvec)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(H, -gvec, rcond=None)[0]
        decrement = float(np.sqrt(max(0.0, -gvec @ step)))
        grad_norm = float(np.linalg.norm(g))
        if decrement <= NEWTON_DECREMENT_TOL and grad_norm <= GRAD_TOL:
            return AnalyticCenterResult("optimal", CandidateParam(P, ""), decrement, grad_norm, it)
        Delta = smat(step, d)
        phi0 = potential_value(ls, P)
        # fraction-to-boundary on the cut half-spaces (they bind first in
        # thin sets); eigenvalue feasibility is left to the backtracking
        t = 1.0
        for cut in ls.cuts:
            dd = float((cut.D * Delta).sum())
            if dd > 1e-16:
                t = min(t, 0.99 * cut.slack(P) / dd)
        accepted = False
        while t > 1e-14:
            Pn = P + t * Delta
            if _strictly_feasible(ls, Pn, eig_margin=1e-12, slack_margin=0.0):
                phin = potential_value(ls, Pn)
                if phin <= phi0 + 0.25 * t * float(gvec @ step) + 1e-12:
                    P = 0.5 * (Pn + Pn.T)
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if decrement <= 1e-6:
                break  # flat enough; accept the current interior point
            raise NumericalFailure("line search could not keep strict feasibility")
    g = potential_gradient(ls, P)
    grad_norm = float(np.linalg.norm(g))
    if grad_norm > GRAD_TOL:
        raise NumericalFailure(
            f"analytic-center Newton stalled (gradient norm {grad_norm:.2e})"
        )
    return AnalyticCenterResult("optimal", CandidateParam(P, ""), decrement, grad_norm, max_iter)
