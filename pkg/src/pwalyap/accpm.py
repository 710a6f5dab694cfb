"""The synthesis loop: propose a candidate at the analytic center, query the
exact verifier, cut, repeat.

A feasible run ends with a parameter whose decrease condition holds
everywhere on the region of interest outside a small origin ball, plus a
Schur-stable local linear map covering that ball; together these certify
asymptotic stability.  A gamma-bisection wrapper searches for the largest
scaling of a reference region that still certifies.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import geometry, learner, roa, verifier
from .dynamics import RAW, ClosedLoop, local_linearization
from .errors import NumericalFailure, NoFeasibleGamma, UnstableLinearization, ZeroCut
from .geometry import Polytope
from .learner import PWQ, QUADRATIC, CandidateParam, LocalizationSet

FEASIBLE = "feasible"
PRESUMED_INFEASIBLE = "presumed_infeasible"
MAX_ITERATIONS = "max_iterations"

EPS_SAFETY = 0.95
SPECTRAL_MARGIN = 1e-9


@dataclass(frozen=True)
class BisectGamma:
    lo: float = 0.1
    hi: float = 1.0
    tol: float = 0.01


@dataclass
class AccpmConfig:
    candidate_kind: str = QUADRATIC
    epsilon: float | str = "auto"
    gamma: float | BisectGamma = 1.0
    max_iterations: int = 200
    cut_mode: str = "strict"
    seed: int = 0
    use_interval_pruning: bool = True
    check_domain: bool = True
    early_exit: bool = False
    tol: float = 1e-8

    def __post_init__(self):
        if self.candidate_kind not in (QUADRATIC, PWQ):
            raise ValueError(f"unknown candidate kind {self.candidate_kind!r}")
        if self.cut_mode not in ("strict", "relaxed"):
            raise ValueError(f"unknown cut mode {self.cut_mode!r}")
        if isinstance(self.epsilon, str):
            if self.epsilon != "auto":
                raise ValueError("epsilon must be positive or 'auto'")
        elif self.epsilon <= 0:
            raise ValueError("epsilon must be positive or 'auto'")
        if isinstance(self.gamma, (int, float)) and not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")

    def verifier_options(self, collect_leaves=False):
        return verifier.VerifierOptions(
            use_interval_pruning=self.use_interval_pruning,
            collect_leaves=collect_leaves,
            check_domain=self.check_domain,
            seed=self.seed,
            early_exit=self.early_exit,
            tol=self.tol,
        )


@dataclass
class IterationRecord:
    index: int
    P: np.ndarray
    p_star: float
    x_star: np.ndarray | None
    cut_D: np.ndarray | None
    cut_c: float | None
    cut_slack: float | None
    potential: float
    verifier_json: dict
    time_s: float


@dataclass
class Certificate:
    status: str
    kind: str
    P_star: np.ndarray | None
    epsilon: float
    A_cl: np.ndarray
    spectral_radius: float
    alpha: float | None
    roi: Polytope
    gamma: float | None
    iterations: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    @property
    def feasible(self):
        return self.status == FEASIBLE

    def to_json(self):
        return {
            "schema_version": 1,
            "status": self.status,
            "kind": self.kind,
            "P_star": None if self.P_star is None else self.P_star.tolist(),
            "epsilon": self.epsilon,
            "A_cl": self.A_cl.tolist(),
            "spectral_radius": self.spectral_radius,
            "alpha": self.alpha,
            "roi": self.roi.to_json(),
            "gamma": self.gamma,
            "iteration_count": len(self.iterations),
            "p_star_history": [r.p_star for r in self.iterations],
            "notes": self.notes,
            "final_verifier": self.iterations[-1].verifier_json if self.iterations else None,
        }

    def history_rows(self):
        """Rows (iteration, p_star, x*..., time_s) for the history CSV."""
        rows = []
        for r in self.iterations:
            x = [np.nan] * self.roi.dim if r.x_star is None else list(r.x_star)
            rows.append([r.index, r.p_star, *x, r.time_s])
        return rows

    def cut_rows(self):
        """Rows (iteration, x*..., svec(D)..., c, slack) for the cuts CSV."""
        rows = []
        for r in self.iterations:
            if r.cut_D is None:
                continue
            rows.append(
                [r.index, *list(r.x_star), *list(learner.svec(r.cut_D)), r.cut_c, r.cut_slack]
            )
        return rows


def _linf_inradius(P: Polytope) -> float:
    norms = np.abs(P.F).sum(axis=1)
    ok = norms > 1e-12
    return float((P.h[ok] / norms[ok]).min())


def choose_epsilon(cl: ClosedLoop):
    """Radius of the excluded origin ball plus the local linear map.

    The ball must fit inside the origin's pattern region so the linear map
    is exact on it; a Schur-unstable map refutes certification outright.
    """
    A_cl, D0 = local_linearization(cl)
    eig = np.linalg.eigvals(A_cl)
    rho = float(np.abs(eig).max())
    if rho >= 1.0 - SPECTRAL_MARGIN:
        raise UnstableLinearization(eig)
    r = _linf_inradius(D0)
    if r <= 0:
        raise NumericalFailure("origin pattern region has empty interior")
    return EPS_SAFETY * r, A_cl


def _pick_epsilon(cl, roi, cfg):
    """Epsilon plus the local map; a Schur-unstable map does not abort the
    loop (no candidate can certify, so the run ends presumed-infeasible or
    at the iteration cap, which is the honest report)."""
    try:
        eps_d0, A_cl = choose_epsilon(cl)
        stable = True
    except UnstableLinearization as exc:
        A_cl, D0 = local_linearization(cl)
        eps_d0 = EPS_SAFETY * _linf_inradius(D0)
        stable = False
    if cfg.epsilon == "auto":
        eps = min(eps_d0, EPS_SAFETY * _linf_inradius(roi))
    else:
        eps = float(cfg.epsilon)
        if eps > eps_d0 / EPS_SAFETY + 1e-12:
            raise ValueError(
                f"epsilon {eps} exceeds the origin pattern region (ball radius {eps_d0 / EPS_SAFETY:.3g})"
            )
    if eps <= 0:
        raise ValueError("epsilon collapsed to zero; roi has empty interior")
    return eps, A_cl, stable


def _run_verifier(cl, P, roi, eps, cfg):
    opts = cfg.verifier_options()
    if cfg.candidate_kind == QUADRATIC:
        if cl.controller.variant == RAW:
            return verifier.verify_quadratic(cl, P, roi, eps, opts)
        return verifier.verify_projected(cl, P, roi, eps, opts)
    if cl.controller.variant != RAW:
        raise ValueError(
            "piecewise-quadratic candidates are not supported with projected controllers"
        )
    return verifier.verify_pwq(cl, P, roi, eps, opts)


def _resample_counterexample(x_star, cl, roi, eps, P, kind, rng):
    """Jitter a degenerate counterexample until its cut matrix is nonzero."""
    for scale in (1e-6, 1e-5, 1e-4, 1e-3, 1e-2):
        for _ in range(20):
            x = x_star + rng.normal(scale=scale, size=x_star.size)
            if not roi.contains(x) or np.abs(x).max() < eps:
                continue
            try:
                cut = learner.make_cut(x, cl, kind, "strict")
            except ZeroCut:
                continue
            y = cl.step(x)
            # the jittered point must still witness non-decrease
            if kind == QUADRATIC:
                dv = y @ P @ y - x @ P @ x
            else:
                yy = cl.step(y)
                v0 = np.concatenate([x, y])
                v1 = np.concatenate([y, yy])
                dv = v1 @ P @ v1 - v0 @ P @ v0
            if dv >= -1e-12:
                return x
    raise NumericalFailure("could not resample a usable counterexample")


def synthesize(cl: ClosedLoop, roi: Polytope, cfg: AccpmConfig | None = None,
               gamma: float | None = None) -> Certificate:
    """The full learner/verifier loop on a fixed region of interest."""
    cfg = cfg or AccpmConfig()
    if (roi.h <= 0).any():
        raise ValueError("the roi must contain the origin in its interior")
    eps, A_cl, stable = _pick_epsilon(cl, roi, cfg)
    rho = float(np.abs(np.linalg.eigvals(A_cl)).max())
    n = cl.plant.state_dim
    dim = n if cfg.candidate_kind == QUADRATIC else 2 * n
    ls = LocalizationSet(dim)
    rng = np.random.default_rng(cfg.seed)
    records = []
    warm = None
    notes = {
        "cut_mode": cfg.cut_mode,
        "full_dimensionality_assumed": True,
        "projection_kkt": "active-set branching (no big-M constants)",
    }
    if not stable:
        notes["unstable_linearization"] = True

    def build(status, P_star, alpha):
        return Certificate(
            status=status, kind=cfg.candidate_kind, P_star=P_star, epsilon=eps,
            A_cl=A_cl, spectral_radius=rho, alpha=alpha, roi=roi, gamma=gamma,
            iterations=records, notes=notes,
        )

    for i in range(cfg.max_iterations):
        t0 = time.perf_counter()
        try:
            ac = learner.analytic_center(ls, warm_start=warm)
        except NumericalFailure as exc:
            # the localization set is too thin to center reliably, which is
            # how an (almost) empty target manifests under relaxed cuts
            notes["analytic_center_failure"] = str(exc)
            return build(PRESUMED_INFEASIBLE, None, None)
        if ac.status == "infeasible":
            return build(PRESUMED_INFEASIBLE, None, None)
        P = ac.candidate.P
        cand = CandidateParam(P, cfg.candidate_kind)
        res = _run_verifier(cl, P, roi, eps, cfg)
        if res.status == verifier.CERTIFIED:
            if not stable:
                raise NumericalFailure(
                    "verifier certified a candidate although the origin map is not Schur stable"
                )
            alpha = roa.sublevel_alpha(cand, cl, roi, cfg.verifier_options())
            records.append(IterationRecord(
                i, P, res.p_star, res.x_star, None, None, None,
                learner.potential_value(ls, P), res.to_json(),
                time.perf_counter() - t0,
            ))
            return build(FEASIBLE, P, alpha)
        x_star = res.x_star
        try:
            cut = learner.make_cut(x_star, cl, cfg.candidate_kind, cfg.cut_mode, P_current=P)
        except ZeroCut:
            x_star = _resample_counterexample(x_star, cl, roi, eps, P, cfg.candidate_kind, rng)
            cut = learner.make_cut(x_star, cl, cfg.candidate_kind, cfg.cut_mode, P_current=P)
        records.append(IterationRecord(
            i, P, res.p_star, x_star, cut.D, cut.c, cut.slack(P),
            learner.potential_value(ls, P), res.to_json(), time.perf_counter() - t0,
        ))
        ls.add(cut)
        warm = ac.candidate
    return build(MAX_ITERATIONS, None, None)


def bisect_gamma(cl: ClosedLoop, roi0: Polytope, cfg: AccpmConfig | None = None):
    """Largest scaling of roi0 (to cfg.gamma.tol) that still certifies.

    The top of the bracket is tried first, so a system feasible on the full
    region costs a single run.
    """
    cfg = cfg or AccpmConfig()
    spec = cfg.gamma if isinstance(cfg.gamma, BisectGamma) else BisectGamma()

    def trial(g):
        region = geometry.scale_about_origin(roi0, g)
        cert = synthesize(cl, region, cfg, gamma=g)
        return cert if cert.feasible else None

    cert = trial(spec.hi)
    if cert is not None:
        return spec.hi, cert
    lo, hi = spec.lo, spec.hi
    best = None
    while hi - lo > spec.tol:
        mid = 0.5 * (lo + hi)
        cert = trial(mid)
        if cert is not None:
            best = (mid, cert)
            lo = mid
        else:
            hi = mid
    if best is not None:
        return best
    cert = trial(spec.lo)
    if cert is not None:
        return spec.lo, cert
    raise NoFeasibleGamma(
        f"no certifying scaling found in [{spec.lo}, {spec.hi}] at tolerance {spec.tol}"
    )
