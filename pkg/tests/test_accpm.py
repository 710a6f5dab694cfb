"""Tests for the synthesis loop and gamma bisection."""

import numpy as np
import pytest

from pwalyap import accpm, geometry, learner, verifier
from pwalyap.accpm import AccpmConfig, BisectGamma, Certificate, bisect_gamma, choose_epsilon, synthesize
from pwalyap.dynamics import ClosedLoop, PwaMode, PwaSystem, ReluNetwork
from pwalyap.errors import NoFeasibleGamma, UnstableLinearization
from pwalyap.geometry import Polytope

from conftest import double_integrator_cl, lti_1d, zero_controller


def lti2_cl(a=0.5):
    plant = PwaSystem([
        PwaMode(a * np.eye(2), np.zeros((2, 1)), np.zeros(2), Polytope.box([-2, -2], [2, 2]))
    ])
    return ClosedLoop(plant, zero_controller(2, 1))


class TestChooseEpsilon:
    def test_unit_box_region(self):
        # D0 is the full plant region for a linear controller
        plant = PwaSystem([
            PwaMode(0.5 * np.eye(2), np.zeros((2, 1)), np.zeros(2), Polytope.box([-1, -1], [1, 1]))
        ])
        cl = ClosedLoop(plant, zero_controller(2, 1))
        eps, A_cl = choose_epsilon(cl)
        assert eps == pytest.approx(0.95, abs=1e-12)
        np.testing.assert_allclose(A_cl, 0.5 * np.eye(2))

    def test_facet_formula(self):
        region = Polytope(
            np.array([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]), np.array([1.0, 1.0, 1.0])
        )
        plant = PwaSystem([PwaMode(0.5 * np.eye(2), np.zeros((2, 1)), np.zeros(2), region)])
        cl = ClosedLoop(plant, zero_controller(2, 1))
        eps, _ = choose_epsilon(cl)
        assert eps == pytest.approx(0.475, abs=1e-12)  # 0.95 * 1/\|(1,1)\|_1

    def test_spectral_fixture_matrix(self):
        # the published closed-loop map of the double-integrator benchmark
        A_cl = np.array([[0.50355752, 0.02697626], [-0.29822124, 0.56348813]])
        eig = np.linalg.eigvals(A_cl)
        expect = np.array([0.53352282 + 0.08453977j, 0.53352282 - 0.08453977j])
        got = eig[np.argsort(eig.imag)[::-1]]
        exp = expect[np.argsort(expect.imag)[::-1]]
        np.testing.assert_allclose(got, exp, atol=1e-6)
        assert np.abs(eig).max() < 1.0

    def test_unstable_map_raises(self):
        cl = ClosedLoop(lti_1d(2.0), zero_controller(1, 1))
        with pytest.raises(UnstableLinearization):
            choose_epsilon(cl)


class TestSynthesize:
    def test_contractive_lti_first_center(self):
        cert = synthesize(lti2_cl(0.5), Polytope.box([-1, -1], [1, 1]))
        assert cert.status == accpm.FEASIBLE
        assert len(cert.iterations) == 1
        np.testing.assert_allclose(cert.P_star, 0.5 * np.eye(2), atol=1e-10)
        assert cert.iterations[0].p_star < 0

    def test_expansion_never_feasible(self):
        cl = ClosedLoop(lti_1d(2.0), zero_controller(1, 1))
        cert = synthesize(cl, Polytope.box([-1], [1]), AccpmConfig(max_iterations=25))
        assert cert.status in (accpm.PRESUMED_INFEASIBLE, accpm.MAX_ITERATIONS)

    def test_double_integrator_with_cuts(self, di_cl):
        cert = synthesize(di_cl, Polytope.box([-2, -2], [2, 2]), AccpmConfig(max_iterations=50))
        assert cert.status == accpm.FEASIBLE
        assert len(cert.iterations) > 1  # exercises the cut loop
        # final verifier call certified with p* < 0
        assert cert.iterations[-1].p_star < 0
        assert cert.spectral_radius < 1
        assert cert.alpha is not None and cert.alpha > 0

    def test_certificate_soundness_sampled(self, di_cl):
        roi = Polytope.box([-2, -2], [2, 2])
        cert = synthesize(di_cl, roi, AccpmConfig(max_iterations=50))
        P = cert.P_star
        rng = np.random.default_rng(0)
        X = rng.uniform(-2, 2, size=(100_000, 2))
        X = X[np.abs(X).max(axis=1) >= cert.epsilon]
        Y, _ = di_cl.step_batch(X)
        dv = ((Y @ P) * Y).sum(axis=1) - ((X @ P) * X).sum(axis=1)
        assert (dv < 0).all()

    def test_cut_system_consistency(self, di_cl):
        roi = Polytope.box([-2, -2], [2, 2])
        cert = synthesize(di_cl, roi, AccpmConfig(max_iterations=50))
        P_star = cert.P_star
        cuts = [(r.cut_D, r.cut_c) for r in cert.iterations if r.cut_D is not None]
        assert cuts
        for D, c in cuts:
            assert (D * P_star).sum() <= c + 1e-9
        # monotone localization: every later center satisfies all earlier cuts
        for i, rec in enumerate(cert.iterations):
            for D, c in [(r.cut_D, r.cut_c) for r in cert.iterations[:i] if r.cut_D is not None]:
                assert (D * rec.P).sum() <= c + 1e-9

    def test_cut_separation_strict_mode(self, di_cl):
        roi = Polytope.box([-2, -2], [2, 2])
        cert = synthesize(di_cl, roi, AccpmConfig(max_iterations=50, cut_mode="strict"))
        for r in cert.iterations:
            if r.cut_D is None:
                continue
            # the generating center violates (or touches) its own cut
            assert (r.cut_D * r.P).sum() >= -1e-9

    def test_relaxed_mode_potential_monotone(self, di_cl):
        roi = Polytope.box([-2, -2], [2, 2])
        cert = synthesize(di_cl, roi, AccpmConfig(max_iterations=50, cut_mode="relaxed"))
        assert cert.status == accpm.FEASIBLE
        pots = [r.potential for r in cert.iterations]
        assert all(b >= a - 1e-9 for a, b in zip(pots, pots[1:]))

    def test_explicit_epsilon_validated(self, di_cl):
        with pytest.raises(ValueError):
            synthesize(di_cl, Polytope.box([-1, -1], [1, 1]), AccpmConfig(epsilon=2.0))

    def test_explicit_epsilon_used(self, di_cl):
        cert = synthesize(di_cl, Polytope.box([-1, -1], [1, 1]), AccpmConfig(epsilon=0.05))
        assert cert.epsilon == 0.05
        assert cert.status == accpm.FEASIBLE

    def test_roi_must_contain_origin(self, di_cl):
        roi = Polytope(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]),
                       np.array([2.0, -0.5, 1.0, 1.0]))
        with pytest.raises(ValueError):
            synthesize(di_cl, roi)

    def test_history_rows_shape(self, di_cl):
        cert = synthesize(di_cl, Polytope.box([-2, -2], [2, 2]), AccpmConfig(max_iterations=50))
        rows = cert.history_rows()
        assert len(rows) == len(cert.iterations)
        assert all(len(r) == 5 for r in rows)  # iteration, p*, x1, x2, time
        cut_rows = cert.cut_rows()
        # iteration + x*(2) + svec(3) + c + slack
        assert all(len(r) == 8 for r in cut_rows)


class TestBisectGamma:
    def test_feasible_at_top(self):
        calls = []
        cl = lti2_cl(0.5)
        g, cert = bisect_gamma(cl, Polytope.box([-1, -1], [1, 1]), AccpmConfig())
        assert g == 1.0
        assert cert.feasible

    def test_monotone_threshold_found(self, di_cl):
        # quadratic certification fails beyond a scaling threshold of this box
        roi0 = Polytope.box([-2.6, -2.6], [2.6, 2.6])
        cfg = AccpmConfig(gamma=BisectGamma(0.1, 1.0, 0.02), max_iterations=40)
        g, cert = bisect_gamma(di_cl, roi0, cfg)
        assert 0.1 <= g < 1.0
        assert cert.feasible
        assert cert.gamma == g
        # the bracket is tight: the next grid point up must fail
        above = min(1.0, g + 0.04)
        failed = synthesize(di_cl, geometry.scale_about_origin(roi0, above),
                            AccpmConfig(max_iterations=40))
        assert not failed.feasible

    def test_no_feasible_gamma(self):
        cl = ClosedLoop(lti_1d(2.0), zero_controller(1, 1))
        with pytest.raises(NoFeasibleGamma):
            bisect_gamma(cl, Polytope.box([-1], [1]),
                         AccpmConfig(gamma=BisectGamma(0.5, 1.0, 0.05), max_iterations=10))

    def test_trial_count_bound(self, monkeypatch):
        # feasible iff gamma <= 0.5: counts trials of the bisection loop
        calls = []
        real = accpm.synthesize

        def fake(cl, roi, cfg=None, gamma=None):
            calls.append(gamma)
            ok = gamma is not None and gamma <= 0.5
            return Certificate(
                status=accpm.FEASIBLE if ok else accpm.MAX_ITERATIONS,
                kind="quadratic", P_star=np.eye(2) if ok else None, epsilon=0.1,
                A_cl=0.5 * np.eye(2), spectral_radius=0.5, alpha=1.0 if ok else None,
                roi=roi, gamma=gamma,
            )

        monkeypatch.setattr(accpm, "synthesize", fake)
        g, cert = bisect_gamma(None, Polytope.box([-1, -1], [1, 1]),
                               AccpmConfig(gamma=BisectGamma(0.1, 1.0, 0.01)))
        assert abs(g - 0.5) <= 0.011
        assert len(calls) <= int(np.ceil(np.log2(0.9 / 0.01))) + 1
