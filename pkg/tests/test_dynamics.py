"""Tests for the plant/controller/closed-loop layer."""

import numpy as np
import pytest

from pwalyap import dynamics, geometry
from pwalyap.dynamics import (
    ClosedLoop,
    PwaMode,
    PwaSystem,
    ReluNetwork,
    local_linearization,
    output_range_box,
    preactivation_bounds,
    pwa_step,
    rollout,
    saturated_linear_controller,
)
from pwalyap.errors import DegenerateOrigin, OutOfDomain
from pwalyap.geometry import Polytope

from conftest import (
    centered_random_net,
    DI_A,
    DI_B,
    DI_K,
    double_integrator_cl,
    identity_relu,
    lti_1d,
    pendulum_plant,
    zero_controller,
)


class TestPwaStep:
    def test_double_integrator_step(self):
        sys = PwaSystem([PwaMode(DI_A, DI_B, np.zeros(2), Polytope.box([-5, -5], [5, 5]))])
        np.testing.assert_allclose(
            pwa_step(sys, np.array([1.0, 0.0]), np.array([0.0])), [1.1, 0.0], atol=1e-12
        )

    def test_equilibrium(self):
        sys = pendulum_plant()
        np.testing.assert_allclose(pwa_step(sys, np.zeros(2), np.zeros(1)), 0.0, atol=1e-12)

    def test_pendulum_contact_mode(self):
        sys = pendulum_plant()
        y = pwa_step(sys, np.array([0.15, 0.0]), np.array([0.0]))
        np.testing.assert_allclose(y, [0.15, -0.035], atol=1e-12)

    def test_out_of_domain(self):
        sys = pendulum_plant()
        with pytest.raises(OutOfDomain):
            pwa_step(sys, np.array([0.5, 0.0]), np.array([0.0]))

    def test_tie_break_lowest_mode(self):
        sys = pendulum_plant()
        # x1 = 0.1 lies in both regions; mode 1 must win and both maps agree
        assert sys.mode_of(np.array([0.1, 0.3])) == 0

    def test_wellposedness_sampling(self):
        pendulum_plant().sample_wellposedness(np.random.default_rng(0))

    def test_batch_mode_assignment_matches_scalar(self):
        sys = pendulum_plant()
        rng = np.random.default_rng(1)
        X = rng.uniform([-0.3, -1.6], [0.3, 1.6], size=(2000, 2))
        idx = sys.modes_of_batch(X)
        for x, i in zip(X[:200], idx[:200]):
            assert sys.mode_of(x, missing_ok=True) == (None if i < 0 else i)


class TestReluForward:
    def test_identity_pattern(self):
        net = identity_relu(2)
        out, pat = net.forward(np.array([1.0, -1.0]))
        np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-15)
        assert pat[0].tolist() == [True, False]

    def test_zero_at_origin(self):
        net = identity_relu(3, depth=2)
        out, _ = net.forward(np.zeros(3))
        np.testing.assert_allclose(out, 0.0, atol=1e-15)

    def test_saturated_output(self):
        net = saturated_linear_controller(np.array([[1.0, 1.0]]), 1.0)
        out, _ = net.forward(np.array([2.0, 1.0]))  # Kx = 3 clamps to 1
        np.testing.assert_allclose(out, [1.0], atol=1e-12)

    def test_forward_batch_matches_scalar(self):
        rng = np.random.default_rng(2)
        net = ReluNetwork([
            (rng.normal(size=(5, 2)), rng.normal(size=5) * 0 ),
            (rng.normal(size=(3, 5)), np.zeros(3)),
        ])
        X = rng.normal(size=(50, 2))
        batch = net.forward_batch(X)
        for x, row in zip(X, batch):
            np.testing.assert_allclose(net.forward(x)[0], row, atol=1e-12)

    def test_origin_constraint_enforced(self):
        with pytest.raises(ValueError):
            ReluNetwork([(np.eye(2), np.zeros(2)), (np.eye(2), np.ones(2))])


class TestSaturatedLinearController:
    def test_interior_is_linear(self):
        net = saturated_linear_controller(np.array([[0.5, 0.0]]), 1.0)
        out, _ = net.forward(np.array([1.0, 0.0]))
        np.testing.assert_allclose(out, [0.5], atol=1e-14)

    def test_clamps_high(self):
        net = saturated_linear_controller(np.array([[3.0]]), 1.0)
        out, _ = net.forward(np.array([1.0]))
        np.testing.assert_allclose(out, [1.0], atol=1e-14)

    def test_matches_clamp_oracle(self):
        rng = np.random.default_rng(3)
        K = rng.normal(size=(2, 3))
        limits = np.array([[-0.7, 1.3], [-2.0, 0.4]])
        net = saturated_linear_controller(K, limits)
        X = rng.normal(size=(100_000, 3), scale=2.0)
        expect = np.clip(X @ K.T, limits[:, 0], limits[:, 1])
        got = net.forward_batch(X)
        np.testing.assert_allclose(got, expect, atol=1e-12)

    def test_rejects_one_sided_limits(self):
        with pytest.raises(ValueError):
            saturated_linear_controller(np.array([[1.0]]), np.array([[0.5, 1.0]]))


class TestClosedLoop:
    def test_origin_fixed_point(self, di_cl):
        np.testing.assert_allclose(di_cl.step(np.zeros(2)), 0.0, atol=1e-12)

    def test_raw_step_is_composition(self, di_cl):
        x = np.array([0.3, -0.2])
        u, _ = di_cl.controller.net.forward(x)
        np.testing.assert_allclose(di_cl.step(x), pwa_step(di_cl.plant, x, u), atol=1e-14)

    def test_step_batch_matches_scalar(self, di_cl):
        rng = np.random.default_rng(4)
        X = rng.uniform(-4, 4, size=(300, 2))
        Y, ok = di_cl.step_batch(X)
        assert ok.all()
        for x, y in zip(X[:100], Y[:100]):
            np.testing.assert_allclose(di_cl.step(x), y, atol=1e-12)


class TestRollout:
    def test_zero_stays_zero(self, di_cl):
        traj, trunc = rollout(di_cl, np.zeros(2), 5)
        assert traj.shape == (6, 2)
        assert not trunc
        np.testing.assert_allclose(traj, 0.0, atol=1e-12)

    def test_zero_steps(self, di_cl):
        traj, trunc = rollout(di_cl, np.array([1.0, 1.0]), 0)
        assert traj.shape == (1, 2)
        assert not trunc

    def test_stable_trajectory_contracts(self, di_cl):
        traj, trunc = rollout(di_cl, np.array([0.4, -0.3]), 200)
        assert not trunc
        assert np.abs(traj[-1]).max() < 1e-6

    def test_truncation_flag(self):
        cl = ClosedLoop(lti_1d(2.0, domain=1.0), zero_controller(1, 1))
        traj, trunc = rollout(cl, np.array([0.9]), 50)
        assert trunc
        assert traj.shape[0] < 51


class TestPreactivationBounds:
    def test_single_layer_interval(self):
        net = ReluNetwork([(np.array([[1.0]]), np.zeros(1)), (np.array([[1.0]]), np.zeros(1))])
        (lo, hi), = preactivation_bounds(net, Polytope.box([-1], [1]))
        np.testing.assert_allclose(lo, [-1.0])
        np.testing.assert_allclose(hi, [1.0])

    def test_stacked_identity_layers(self):
        net = identity_relu(1, depth=2)
        bounds = preactivation_bounds(net, Polytope.box([-1], [1]))
        np.testing.assert_allclose(bounds[0][0], [-1.0])
        np.testing.assert_allclose(bounds[1][0], [0.0])
        np.testing.assert_allclose(bounds[1][1], [1.0])

    @pytest.mark.parametrize("method", ["interval", "lp"])
    def test_sampled_soundness(self, method):
        rng = np.random.default_rng(5)
        net = centered_random_net(rng, [2, 6, 4, 1])
        roi = Polytope(
            np.vstack([np.eye(2), -np.eye(2), [[1.0, 1.0]]]),
            np.array([1.0, 1.0, 1.0, 1.0, 1.2]),
        )
        bounds = preactivation_bounds(net, roi, method=method)
        X = rng.uniform(-1, 1, size=(100_000, 2))
        X = X[roi.contains(X)]
        Z = X
        for (W, b), (lo, hi) in zip(net.hidden, bounds):
            pre = Z @ W.T + b
            assert (pre >= lo - 1e-9).all()
            assert (pre <= hi + 1e-9).all()
            Z = np.maximum(pre, 0.0)

    def test_lp_never_looser_than_interval(self):
        rng = np.random.default_rng(6)
        net = centered_random_net(rng, [2, 5, 5, 1], bias_scale=0.2)
        roi = Polytope(
            np.vstack([np.eye(2), -np.eye(2), [[0.7, -0.7]]]),
            np.array([1.0, 1.0, 1.0, 1.0, 0.5]),
        )
        ib = preactivation_bounds(net, roi, method="interval")
        lb = preactivation_bounds(net, roi, method="lp")
        for (ilo, ihi), (llo, lhi) in zip(ib, lb):
            assert (llo >= ilo - 1e-9).all()
            assert (lhi <= ihi + 1e-9).all()


class TestOutputRangeBox:
    def test_zero_network(self):
        net = zero_controller(2, 1)
        box = output_range_box(net, Polytope.box([-1, -1], [1, 1]))
        bb = geometry.bounding_box(box)
        np.testing.assert_allclose(bb.lower, [-1e-6], atol=1e-12)
        np.testing.assert_allclose(bb.upper, [1e-6], atol=1e-12)

    def test_clamp_range(self):
        # closed-form oracle: on this roi the clamp is linear, range [-0.8, 0.8]
        net = saturated_linear_controller(np.array([[2.0, 0.0]]), 1.0)
        box = output_range_box(net, Polytope.box([-0.4, -0.4], [0.4, 0.4]))
        bb = geometry.bounding_box(box)
        assert -1.0 - 1e-5 <= bb.lower[0] <= -0.8
        assert 0.8 <= bb.upper[0] <= 1.0 + 1e-5

    def test_clamp_range_saturated_is_sound(self):
        # with saturation active the interval box is loose but must contain
        # the true range [-1, 1]
        net = saturated_linear_controller(np.array([[2.0, 0.0]]), 1.0)
        box = output_range_box(net, Polytope.box([-3, -3], [3, 3]))
        bb = geometry.bounding_box(box)
        assert bb.lower[0] <= -1.0
        assert bb.upper[0] >= 1.0

    def test_sampled_outputs_inside(self):
        rng = np.random.default_rng(7)
        net = centered_random_net(rng, [2, 4, 2], bias_scale=0.1)
        roi = Polytope.box([-2, -1], [1, 2])
        box = output_range_box(net, roi)
        X = rng.uniform([-2, -1], [1, 2], size=(100_000, 2))
        U = net.forward_batch(X)
        assert box.contains(U).all()


class TestLocalLinearization:
    def test_linear_controller(self):
        plant = lti_1d(0.8, domain=2.0, b=1.0)
        net = ReluNetwork([(np.array([[-0.5]]), np.zeros(1))])
        cl = ClosedLoop(plant, net)
        A_cl, D0 = local_linearization(cl)
        np.testing.assert_allclose(A_cl, [[0.3]], atol=1e-12)
        assert D0.contains(np.array([1.9])) and D0.contains(np.array([-1.9]))

    def test_clamp_controller_region(self, di_cl):
        A_cl, D0 = local_linearization(di_cl)
        np.testing.assert_allclose(A_cl, DI_A + DI_B @ DI_K, atol=1e-12)
        # exactness of the linear model on sampled points of D0
        rng = np.random.default_rng(8)
        box = geometry.bounding_box(D0)
        X = rng.uniform(box.lower, box.upper, size=(40_000, 2))
        X = X[D0.contains(X)][:10_000]
        assert X.shape[0] > 100
        Y, _ = di_cl.step_batch(X)
        np.testing.assert_allclose(Y, X @ A_cl.T, atol=1e-9)

    def test_degenerate_origin_detected(self):
        plant = lti_1d(0.5, domain=1.0, b=1.0)
        net = identity_relu(1)  # pre-activation 0 at the origin, slope 1
        with pytest.raises(DegenerateOrigin):
            local_linearization(ClosedLoop(plant, net))


class TestSerialization:
    def test_network_roundtrip(self):
        net = saturated_linear_controller(DI_K, 1.0)
        net2 = ReluNetwork.from_json(net.to_json())
        x = np.array([0.2, -0.4])
        np.testing.assert_array_equal(net.forward(x)[0], net2.forward(x)[0])

    def test_system_roundtrip(self):
        sys = pendulum_plant()
        sys2 = dynamics.system_from_json(dynamics.system_to_json(sys))
        x = np.array([0.15, 0.2])
        np.testing.assert_array_equal(
            pwa_step(sys, x, np.zeros(1)), pwa_step(sys2, x, np.zeros(1))
        )
