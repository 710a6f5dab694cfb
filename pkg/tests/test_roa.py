"""Tests for ROA estimation, invariance checks, and invariant sets."""

import numpy as np
import pytest

from pwalyap import geometry, roa
from pwalyap.dynamics import (
    ClosedLoop,
    ControllerSpec,
    PwaMode,
    PwaSystem,
    ReluNetwork,
    rollout,
    saturated_linear_controller,
)
from pwalyap.errors import DimensionUnsupported
from pwalyap.geometry import Polytope
from pwalyap.learner import PWQ, QUADRATIC, CandidateParam

from conftest import DI_A, DI_B, DI_K, double_integrator_cl, lti_1d, pendulum_plant, zero_controller


def lti2_cl(a=0.5):
    plant = PwaSystem([
        PwaMode(a * np.eye(2), np.zeros((2, 1)), np.zeros(2), Polytope.box([-2, -2], [2, 2]))
    ])
    return ClosedLoop(plant, zero_controller(2, 1))


class TestSublevelAlpha:
    def test_identity_on_square(self):
        V = CandidateParam(np.eye(2), QUADRATIC)
        alpha = roa.sublevel_alpha(V, lti2_cl(), Polytope.box([-1, -1], [1, 1]))
        assert alpha == pytest.approx(1.0, abs=1e-8)

    def test_anisotropic(self):
        V = CandidateParam(np.diag([1.0, 4.0]), QUADRATIC)
        alpha = roa.sublevel_alpha(V, lti2_cl(), Polytope.box([-1, -1], [1, 1]))
        assert alpha == pytest.approx(1.0, abs=1e-8)

    def test_pwq_vs_boundary_sampling(self):
        K = np.array([[-19.7376, -6.3091]])
        cl = ClosedLoop(pendulum_plant(), saturated_linear_controller(K, 4.0))
        roi = Polytope.box([-0.1, -0.4], [0.1, 0.4])
        P = np.diag([0.5, 0.4, 0.3, 0.2])
        V = CandidateParam(P, PWQ)
        alpha = roa.sublevel_alpha(V, cl, roi)
        # oracle: dense sampling of the roi boundary
        rng = np.random.default_rng(0)
        t = rng.uniform(-1, 1, size=(10_000, 2))
        pts = []
        for a, b in t:
            for edge in range(4):
                p = {0: [0.1 * np.sign(a if a else 1), 0.4 * b],
                     1: [-0.1, 0.4 * b], 2: [0.1 * a, 0.4], 3: [0.1 * a, -0.4]}[edge]
                pts.append(p)
        pts = np.array(pts)
        X1, ok = cl.step_batch(pts)
        v = np.hstack([pts, X1])[ok]
        vals = ((v @ P) * v).sum(axis=1)
        assert alpha <= vals.min() + 1e-9
        assert alpha >= vals.min() - 0.01  # sampling resolution slack
        est = roa.estimate_roa(V, cl, roi)
        assert est.kind == "pwq_contour"

    def test_inner_approximation_sampled(self, di_cl):
        roi = Polytope.box([-1.5, -1.5], [1.5, 1.5])
        P = np.array([[0.4, 0.1], [0.1, 0.6]])
        V = CandidateParam(P, QUADRATIC)
        est = roa.estimate_roa(V, di_cl, roi)
        rng = np.random.default_rng(1)
        X = rng.uniform(-1.6, 1.6, size=(100_000, 2))
        vals = ((X @ P) * X).sum(axis=1)
        inside = X[vals <= est.alpha]
        assert roi.contains(inside).all()


class TestPositiveInvariance:
    def test_contraction_invariant(self):
        cl = ClosedLoop(lti_1d(0.5), zero_controller(1, 1))
        ok, margin = roa.is_positive_invariant(cl, Polytope.box([-1], [1]))
        assert ok
        assert margin == pytest.approx(-0.5, abs=1e-9)

    def test_expansion_not_invariant(self):
        cl = ClosedLoop(lti_1d(2.0), zero_controller(1, 1))
        ok, margin = roa.is_positive_invariant(cl, Polytope.box([-1], [1]))
        assert not ok
        assert margin == pytest.approx(1.0, abs=1e-9)

    def test_projected_controller_renders_cis_invariant(self):
        U = Polytope.box([-1], [1])
        dom = Polytope.box([-5, -5], [5, 5])
        cis = roa.control_invariant_set(DI_A, DI_B, dom, U).S
        plant = PwaSystem([PwaMode(DI_A, DI_B, np.zeros(2), dom)])
        net = saturated_linear_controller(DI_K, 1.0)
        cl = ClosedLoop(plant, ControllerSpec(net, "projected_state", roi=cis, input_set=U))
        ok, margin = roa.is_positive_invariant(cl, cis)
        assert ok
        assert margin <= 1e-8


class TestControlInvariantSet:
    def test_stable_autonomous_fixed_point(self):
        res = roa.control_invariant_set(
            np.array([[0.5]]), np.array([[0.0]]), Polytope.box([-2], [2]), Polytope.box([-1], [1])
        )
        assert res.converged
        assert res.iterations == 1
        bb = geometry.bounding_box(res.S)
        np.testing.assert_allclose([bb.lower[0], bb.upper[0]], [-2, 2], atol=1e-9)

    def test_one_dimensional_hand_iteration(self):
        res = roa.control_invariant_set(
            np.array([[2.0]]), np.array([[1.0]]), Polytope.box([-2], [2]), Polytope.box([-1], [1])
        )
        assert res.converged
        bb = geometry.bounding_box(res.S)
        np.testing.assert_allclose([bb.lower[0], bb.upper[0]], [-1, 1], atol=1e-6)

    def test_fixed_point_property(self):
        res = roa.control_invariant_set(DI_A, DI_B, Polytope.box([-5, -5], [5, 5]),
                                        Polytope.box([-1], [1]))
        assert res.converged
        S = res.S
        pre = roa._pre_set(DI_A, DI_B, S, Polytope.box([-1], [1]))
        inter = geometry.remove_redundant(S.intersect(pre))
        assert geometry.poly_subset(S, inter, tol=1e-7)
        assert geometry.poly_subset(inter, S, tol=1e-7)

    def test_lp_witness_check(self):
        from pwalyap import lp

        U = Polytope.box([-1], [1])
        res = roa.control_invariant_set(DI_A, DI_B, Polytope.box([-5, -5], [5, 5]), U)
        S = res.S
        rng = np.random.default_rng(2)
        bb = geometry.bounding_box(S)
        X = rng.uniform(bb.lower, bb.upper, size=(40_000, 2))
        X = X[S.contains(X)][:10_000]
        for x in X[::20]:
            G = np.vstack([S.F @ DI_B, U.F])
            h = np.concatenate([S.h - S.F @ (DI_A @ x), U.h])
            sol = lp.maximize(np.zeros(1), G, h)
            assert sol.status == lp.LpStatus.Optimal


class TestExportContours:
    def test_unit_circle(self):
        est = roa.RoaEstimate("ellipse", np.eye(2), 1.0, Polytope.box([-2, -2], [2, 2]))
        data = roa.export_contours(est, resolution=256)
        radii = np.linalg.norm(data["boundary"], axis=1)
        np.testing.assert_allclose(radii, 1.0, atol=1e-9)

    def test_anisotropic_semiaxes(self):
        est = roa.RoaEstimate("ellipse", np.diag([1.0, 4.0]), 1.0, Polytope.box([-2, -2], [2, 2]))
        data = roa.export_contours(est, resolution=360)
        pts = data["boundary"]
        assert pts[:, 0].max() == pytest.approx(1.0, abs=1e-9)
        assert pts[:, 1].max() == pytest.approx(0.5, abs=1e-9)

    def test_boundary_level_recomputed(self):
        P = np.array([[0.7, 0.2], [0.2, 0.4]])
        est = roa.RoaEstimate("ellipse", P, 0.37, Polytope.box([-2, -2], [2, 2]))
        data = roa.export_contours(est, resolution=500)
        for p in data["boundary"]:
            assert abs(p @ P @ p - 0.37) <= 1e-6

    def test_pwq_grid(self, di_cl):
        P = np.eye(4) * 0.2
        est = roa.RoaEstimate("pwq_contour", P, 0.3, Polytope.box([-1, -1], [1, 1]), di_cl)
        data = roa.export_contours(est, resolution=64)
        assert data["points"].shape == (64 * 64, 2)
        ok = ~np.isnan(data["V"])
        assert ok.all()  # the whole bounding box lies in the plant domain
        assert data["inside"].any()

    def test_dimension_guard(self):
        est = roa.RoaEstimate("ellipse", np.eye(3), 1.0,
                              Polytope.box([-1, -1, -1], [1, 1, 1]))
        with pytest.raises(DimensionUnsupported):
            roa.export_contours(est)


class TestTrajectorySoundness:
    def test_rollouts_from_estimate_reach_ball(self, di_cl):
        from pwalyap.accpm import AccpmConfig, synthesize

        roi = Polytope.box([-2, -2], [2, 2])
        cert = synthesize(di_cl, roi, AccpmConfig(max_iterations=50))
        assert cert.feasible
        V = CandidateParam(cert.P_star, QUADRATIC)
        est = roa.estimate_roa(V, di_cl, roi)
        rng = np.random.default_rng(3)
        starts = []
        while len(starts) < 100:
            x = rng.uniform(-2, 2, size=2)
            if est.value(x) <= est.alpha:
                starts.append(x)
        for x0 in starts:
            traj, trunc = rollout(di_cl, x0, 400)
            assert not trunc
            assert roi.contains(traj, tol=1e-7).all()
            assert (np.abs(traj).max(axis=1) < cert.epsilon).any()
