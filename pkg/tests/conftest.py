"""Shared fixture systems.

The double integrator and the pendulum-against-wall plant matrices follow
the standard benchmark values; controller gains are frozen LQR solutions
(Q = I, R = 1) so no Riccati solver is needed at test time.
"""

import numpy as np
import pytest

from pwalyap.dynamics import (
    ClosedLoop,
    PwaMode,
    PwaSystem,
    ReluNetwork,
    saturated_linear_controller,
)
from pwalyap.geometry import Polytope

DI_A = np.array([[1.1, 1.1], [0.0, 1.1]])
DI_B = np.array([[1.0], [0.5]])
# discrete LQR gain for (DI_A, DI_B) with Q = I, R = 1
DI_K = np.array([[-0.59378628095340767, -1.0692426905612556]])

PEND_A1 = np.array([[1.0, 0.01], [0.1, 1.0]])
PEND_A2 = np.array([[1.0, 0.01], [-0.9, 1.0]])
PEND_B = np.array([[0.0], [0.01]])
PEND_C2 = np.array([0.0, 0.1])


def double_integrator_plant(domain_halfwidth=5.0):
    region = Polytope.box([-domain_halfwidth] * 2, [domain_halfwidth] * 2)
    return PwaSystem([PwaMode(DI_A, DI_B, np.zeros(2), region)])


def double_integrator_cl(limits=1.0, domain_halfwidth=5.0):
    net = saturated_linear_controller(DI_K, limits)
    return ClosedLoop(double_integrator_plant(domain_halfwidth), net)


def pendulum_plant():
    r1 = Polytope.box([-0.2, -1.5], [0.1, 1.5])
    r2 = Polytope.box([0.1, -1.5], [0.2, 1.5])
    return PwaSystem([
        PwaMode(PEND_A1, PEND_B, np.zeros(2), r1),
        PwaMode(PEND_A2, PEND_B, PEND_C2, r2),
    ])


def identity_relu(n, depth=1):
    layers = [(np.eye(n), np.zeros(n)) for _ in range(depth + 1)]
    return ReluNetwork(layers)


def lti_1d(a, domain=4.0, b=0.0):
    region = Polytope.box([-domain], [domain])
    return PwaSystem([PwaMode(np.array([[a]]), np.array([[b]]), np.zeros(1), region)])


def zero_controller(nx, nu):
    return ReluNetwork([(np.zeros((nu, nx)), np.zeros(nu))])


def centered_random_net(rng, sizes, bias_scale=0.3):
    """Random ReLU net with the output bias chosen so the origin maps to 0."""
    layers = []
    z = np.zeros(sizes[0])
    for i in range(len(sizes) - 2):
        W = rng.normal(size=(sizes[i + 1], sizes[i]))
        b = rng.normal(size=sizes[i + 1]) * bias_scale
        layers.append((W, b))
        z = np.maximum(W @ z + b, 0.0)
    W = rng.normal(size=(sizes[-1], sizes[-2]))
    layers.append((W, -W @ z))
    return ReluNetwork(layers)


@pytest.fixture
def di_cl():
    return double_integrator_cl()


@pytest.fixture
def pend_sys():
    return pendulum_plant()
