"""Regenerate the committed problem fixtures.

Run from the repository root:  python3 fixtures/make_fixtures.py

Controller gains are frozen LQR solutions (stated next to each fixture);
the pendulum network is an exact two-hidden-layer saturation composition,
with the output bias fixing the origin, in the same spirit as trained
controllers whose output layer is re-centered.
"""

from pathlib import Path

import numpy as np

import sys

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from pwalyap.cli import write_json  # noqa: E402
from pwalyap.geometry import Polytope  # noqa: E402
from pwalyap import roa  # noqa: E402

HERE = Path(__file__).resolve().parent

DI_A = [[1.1, 1.1], [0.0, 1.1]]
DI_B = [[1.0], [0.5]]
# discrete LQR gain for (DI_A, DI_B) with Q = I, R = 1
DI_K = [[-0.59378628095340767, -1.0692426905612556]]

PEND_A1 = [[1.0, 0.01], [0.1, 1.0]]
PEND_A2 = [[1.0, 0.01], [-0.9, 1.0]]
PEND_B = [[0.0], [0.01]]
# discrete LQR gain for the contact-free mode with Q = I, R = 1
PEND_K = np.array([[-19.7376, -6.3091]])


def box_json(lower, upper):
    return Polytope.box(lower, upper).to_json()


def pendulum_network():
    """clamp(Kx, -4, 4) as relu(relu(.)) composition: two hidden layers."""
    lo, hi = -4.0, 4.0
    W1 = np.vstack([PEND_K, PEND_K])
    b1 = np.array([-lo, -hi])
    W2 = np.eye(2)
    b2 = np.zeros(2)
    W3 = np.array([[1.0, -1.0]])
    b3 = np.array([lo])
    return {
        "layers": [
            {"W": W1.tolist(), "b": b1.tolist()},
            {"W": W2.tolist(), "b": b2.tolist()},
            {"W": W3.tolist(), "b": b3.tolist()},
        ]
    }


def main():
    write_json({
        "schema_version": 1,
        "plant": {"modes": [{
            "A": DI_A, "B": DI_B, "c": [0.0, 0.0],
            **box_json([-5.0, -5.0], [5.0, 5.0]),
        }]},
        "controller": {
            "variant": "raw",
            "saturated_linear": {"K": DI_K, "limits": [[-1.0, 1.0]]},
        },
        "roi0": box_json([-2.0, -2.0], [2.0, 2.0]),
        "options": {"max_iterations": 50},
    }, HERE / "double_integrator.json")

    # hexagonal reference region: velocity-limited box with clipped corners
    hexF = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0],
            [4.0, 0.7], [-4.0, -0.7]]
    hexh = [0.18, 0.18, 1.2, 1.2, 1.0, 1.0]
    write_json({
        "schema_version": 1,
        "plant": {"modes": [
            {"A": PEND_A1, "B": PEND_B, "c": [0.0, 0.0],
             **box_json([-0.2, -1.5], [0.1, 1.5])},
            {"A": PEND_A2, "B": PEND_B, "c": [0.0, 0.1],
             **box_json([0.1, -1.5], [0.2, 1.5])},
        ]},
        "controller": {"variant": "raw", "network": pendulum_network()},
        "roi0": {"F": hexF, "h": hexh},
        "options": {"max_iterations": 50},
    }, HERE / "pendulum.json")

    write_json({
        "schema_version": 1,
        "plant": {"modes": [{
            "A": [[2.0]], "B": [[0.0]], "c": [0.0], **box_json([-4.0], [4.0]),
        }]},
        "controller": {"variant": "raw",
                       "network": {"layers": [{"W": [[0.0]], "b": [0.0]}]}},
        "roi0": box_json([-1.0], [1.0]),
        "options": {"max_iterations": 30},
    }, HERE / "expansion_1d.json")

    write_json({
        "schema_version": 1,
        "plant": {"modes": [{
            "A": [[0.5]], "B": [[0.0]], "c": [0.0], **box_json([-4.0], [4.0]),
        }]},
        "controller": {"variant": "raw",
                       "network": {"layers": [{"W": [[0.0]], "b": [0.0]}]}},
        "roi0": box_json([-1.0], [1.0]),
    }, HERE / "contraction_1d.json")

    write_json({
        "schema_version": 1,
        "plant": {"modes": [{
            "A": [[2.0]], "B": [[1.0]], "c": [0.0], **box_json([-2.0], [2.0]),
        }]},
        "controller": {"variant": "raw",
                       "network": {"layers": [{"W": [[0.0]], "b": [0.0]}]}},
        "roi0": box_json([-2.0], [2.0]),
        "input_set": box_json([-1.0], [1.0]),
    }, HERE / "integrator_1d.json")

    # projection fixture: the admissible set comes from the computed control
    # invariant subset of the state box
    U = Polytope.box([-1.0], [1.0])
    cis = roa.control_invariant_set(
        np.asarray(DI_A), np.asarray(DI_B), Polytope.box([-5, -5], [5, 5]), U
    ).S
    write_json({
        "schema_version": 1,
        "plant": {"modes": [{
            "A": DI_A, "B": DI_B, "c": [0.0, 0.0],
            **box_json([-5.0, -5.0], [5.0, 5.0]),
        }]},
        "controller": {
            "variant": "projected_state",
            "saturated_linear": {"K": DI_K, "limits": [[-1.0, 1.0]]},
            "projection": {"roi": cis.to_json(), "input_set": U.to_json()},
        },
        "roi0": cis.to_json(),
        "options": {"max_iterations": 50, "gamma": 0.7},
    }, HERE / "double_integrator_proj.json")
    print("fixtures written to", HERE)


if __name__ == "__main__":
    main()
