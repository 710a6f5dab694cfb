"""Tests for the dense two-phase simplex solver."""

import numpy as np
import pytest

from pwalyap import _kernels, geometry, lp


def test_maximize_interval():
    sol = lp.maximize(np.array([1.0]), np.array([[1.0], [-1.0]]), np.array([1.0, 1.0]))
    assert sol.status == lp.LpStatus.Optimal
    assert sol.value == pytest.approx(1.0, abs=1e-9)
    assert sol.x[0] == pytest.approx(1.0, abs=1e-9)


def test_maximize_simplex_triangle():
    G = np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]])
    h = np.array([0.0, 0.0, 1.0])
    sol = lp.maximize(np.array([1.0, 1.0]), G, h)
    assert sol.status == lp.LpStatus.Optimal
    assert sol.value == pytest.approx(1.0, abs=1e-9)


def test_infeasible_and_unbounded():
    sol = lp.maximize(np.array([1.0]), np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0]))
    assert sol.status == lp.LpStatus.Infeasible
    sol = lp.maximize(np.array([1.0]), np.array([[-1.0]]), np.array([0.0]))
    assert sol.status == lp.LpStatus.Unbounded


def test_equality_constraints():
    # max x1 on the segment {x1 + x2 = 1} inside [-2, 2]^2: stops at (2, -1)
    G = geometry.Polytope.box([-2, -2], [2, 2])
    sol = lp.maximize(
        np.array([1.0, 0.0]), G.F, G.h,
        eq_A=np.array([[1.0, 1.0]]), eq_b=np.array([1.0]),
    )
    assert sol.status == lp.LpStatus.Optimal
    assert sol.value == pytest.approx(2.0, abs=1e-9)
    assert sol.x[1] == pytest.approx(-1.0, abs=1e-9)


def _random_lp(rng):
    # random bounded polytope: box plus a few random cuts through it
    n = rng.integers(1, 4)
    F = [np.eye(n), -np.eye(n)]
    h = [np.full(n, 2.0), np.full(n, 2.0)]
    for _ in range(rng.integers(1, 5)):
        a = rng.normal(size=n)
        a /= np.linalg.norm(a)
        F.append(a[None, :])
        h.append([rng.uniform(0.3, 1.8)])
    P = geometry.Polytope(np.vstack(F), np.concatenate(h))
    c = rng.normal(size=n)
    return c, P


@pytest.mark.parametrize("seed", range(25))
def test_random_lp_matches_vertex_oracle(seed):
    # independent oracle: best objective over the enumerated vertex set
    rng = np.random.default_rng(1000 + seed)
    c, P = _random_lp(rng)
    V, _ = geometry.vertices(P)
    assert V.shape[0] > 0
    oracle = float((V @ c).max())
    sol = lp.maximize(c, P.F, P.h)
    assert sol.status == lp.LpStatus.Optimal
    assert sol.value == pytest.approx(oracle, abs=1e-7)


@pytest.mark.parametrize("seed", range(25))
def test_weak_duality_certificate(seed):
    rng = np.random.default_rng(2000 + seed)
    c, P = _random_lp(rng)
    sol = lp.maximize(c, P.F, P.h)
    assert sol.status == lp.LpStatus.Optimal
    bound, stat, signv = lp.dual_certificate(c, P.F, P.h, sol)
    assert stat <= 1e-7
    assert signv <= 1e-9
    assert bound == pytest.approx(sol.value, abs=1e-6)


def test_determinism():
    rng = np.random.default_rng(7)
    c, P = _random_lp(rng)
    a = lp.maximize(c, P.F, P.h)
    b = lp.maximize(c, P.F, P.h)
    assert np.array_equal(a.x, b.x)
    assert a.value == b.value


def test_kernel_paths_agree():
    # the jitted kernel and its plain-numpy interpretation share one source;
    # pivot sequences and results must match exactly
    rng = np.random.default_rng(3)
    for _ in range(10):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(n + 1, 8))
        A = rng.normal(size=(m, 2 * n + m))
        A[:, n:2 * n] = -A[:, :n]
        b = np.abs(rng.normal(size=m))
        c = np.concatenate([rng.normal(size=n), np.zeros(n + m)])
        c[n:2 * n] = -c[:n]
        out_a = _kernels.simplex_standard(A, b, c, 500, 1e-9)
        out_b = _kernels.simplex_standard_py(A, b, c, 500, 1e-9)
        assert out_a[0] == out_b[0]
        if out_a[0] == _kernels.OPTIMAL:
            assert np.array_equal(out_a[1], out_b[1])
            assert out_a[2] == out_b[2]


def test_degenerate_lp_terminates():
    # many redundant rows through one vertex: exercises the stall counter
    n = 2
    F = []
    h = []
    for k in range(12):
        th = 0.1 + 2.8 * k / 11
        F.append([np.cos(th), np.sin(th)])
        h.append(1.0)
    F.append([-1.0, 0.0])
    h.append(0.0)
    F.append([0.0, -1.0])
    h.append(0.0)
    sol = lp.maximize(np.array([1.0, 1.0]), np.array(F), np.array(h))
    assert sol.status == lp.LpStatus.Optimal
