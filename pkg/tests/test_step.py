"""Implicit step solver: closed forms, oracle agreement, contraction bounds."""

import dataclasses

import numpy as np
import pytest

from helpers import random_step_instance
from luresim import (
    Box,
    DecomposedMovingSet,
    GeneralMovingSet,
    PassivityCertificate,
    Polyhedron,
    SolverOptions,
    box_vi_enumerate,
    brute_force_step_oracle,
    build_system,
    inner_solve_box,
    project,
    solve_static_multiplier,
    solve_step,
    whole_space,
)
from luresim.errors import NoSolution, SolverDiverged, StepTooLarge, StepTooSmall


def _static_box_system(b, c, d, box, **kw):
    m = np.atleast_2d(np.asarray(c, float)).shape[0]
    n = np.atleast_2d(np.asarray(c, float)).shape[1]
    ms = DecomposedMovingSet(
        lambda t, _box=box: _box, np.zeros((m, n)), lambda t, _z=np.zeros(m): _z
    )
    return build_system(b, c, d, ms, **kw)


def test_one_dimensional_sweeping_step():
    # K = (-inf, 0], B = C = 1, D = 0: the step lands on the constraint
    sys_ = _static_box_system([[1.0]], [[1.0]], [[0.0]], Box([-np.inf], [0.0]))
    res = solve_step(sys_, 0.5, np.array([1.0]), np.array([1.0]), 0.5)
    assert res.x_next == pytest.approx(0.0, abs=1e-12)
    assert res.mu == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(res.lam, -res.mu)
    assert res.w == pytest.approx(0.0, abs=1e-12)
    assert res.residual <= 1e-10
    assert res.iterations >= 1


def test_interior_point_step_is_unconstrained():
    sys_ = _static_box_system([[1.0]], [[1.0]], [[0.0]], Box([-np.inf], [0.0]))
    res = solve_step(sys_, 0.5, np.array([-1.0]), np.array([-1.0]), 0.5)
    assert res.x_next == pytest.approx(-1.0, abs=1e-12)
    assert res.mu == pytest.approx(0.0, abs=1e-12)


def test_whole_space_step_is_rescaled_input():
    sys_ = _static_box_system(np.eye(2), np.eye(2), np.zeros((2, 2)), whole_space(2))
    y = np.array([0.7, -2.0])
    res = solve_step(sys_, 0.1, np.zeros(2), y, 0.1)
    # kappa = 0 here, so the step is the identity on y
    assert np.allclose(res.x_next, y, atol=1e-12)
    assert np.allclose(res.mu, 0.0)


def test_identity_reduction_step_is_projection():
    # B = C = I, D = 0 turns one implicit step into the metric projection
    rng = np.random.default_rng(2)
    for _ in range(25):
        n = int(rng.integers(1, 4))
        lo = rng.normal(size=n)
        box = Box(lo, lo + abs(rng.normal(size=n)) + 0.2)
        sys_ = _static_box_system(np.eye(n), np.eye(n), np.zeros((n, n)), box)
        y = 2.0 * rng.normal(size=n)
        res = solve_step(sys_, 0.0, np.zeros(n), y, 0.05)
        assert np.allclose(res.x_next, project(box, y), atol=1e-10)


def test_step_on_polyhedral_set_is_projection():
    tri = Polyhedron(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]),
                     np.array([1.0, 1.0, 1.0]))
    ms = GeneralMovingSet(lambda t, x: tri, 0.0, 0.0)
    sys_ = build_system(np.eye(2), np.eye(2), np.zeros((2, 2)), ms)
    rng = np.random.default_rng(8)
    for _ in range(10):
        y = 2.0 * rng.normal(size=2)
        res = solve_step(sys_, 0.0, np.zeros(2), y, 0.05)
        assert np.allclose(res.x_next, project(tri, y), atol=1e-9)
        assert res.residual <= 1e-10


def test_box_vi_enumerate_frozen_cases():
    mu, w, examined = box_vi_enumerate(np.array([[1.0]]), np.array([2.0]),
                                       np.array([-1.0]), np.array([1.0]))
    assert mu == pytest.approx(1.0)
    assert w == pytest.approx(1.0)
    assert examined <= 3
    mu, w, _ = box_vi_enumerate(np.eye(2), np.array([2.0, -3.0]),
                                np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    assert np.allclose(mu, [1.0, -2.0])
    assert np.allclose(w, [1.0, -1.0])


def test_box_vi_enumerate_infeasible_raises():
    # zero row of M pins w_1 = q_1 outside the box
    m_mat = np.array([[0.0, 0.0], [0.0, 1.0]])
    with pytest.raises(NoSolution):
        box_vi_enumerate(m_mat, np.array([0.0, 0.5]),
                         np.array([0.5, -1.0]), np.array([1.0, 1.0]))


def test_inner_solver_matches_enumeration():
    rng = np.random.default_rng(21)
    for _ in range(120):
        m = int(rng.integers(1, 4))
        g = rng.normal(size=(m, m))
        w_skew = rng.normal(size=(m, m))
        m_mat = g @ g.T + 0.2 * np.eye(m) + 0.3 * (w_skew - w_skew.T)
        q = 2.0 * rng.normal(size=m)
        lo = rng.normal(size=m)
        up = lo + abs(rng.normal(size=m)) + 0.1
        mu_fast, w_fast, _ = inner_solve_box(m_mat, q, Box(lo, up))
        mu_slow, w_slow, _ = box_vi_enumerate(m_mat, q, lo, up)
        assert np.allclose(mu_fast, mu_slow, atol=1e-8)
        assert np.allclose(w_fast, w_slow, atol=1e-8)


def test_solve_step_matches_oracle_sample():
    # small version of the acceptance sweep, same instance family
    rng = np.random.default_rng(77)
    for _ in range(60):
        sys_, t_next, x_prev, y_in, h = random_step_instance(rng)
        res = solve_step(sys_, t_next, x_prev, y_in, h)
        ora = brute_force_step_oracle(sys_, t_next, x_prev, y_in, h)
        scale = 1.0 + np.linalg.norm(ora.x_next)
        assert np.linalg.norm(res.x_next - ora.x_next) <= 1e-8 * scale
        assert np.linalg.norm(sys_.B @ (res.mu - ora.mu)) <= 1e-8 * scale


def test_resolvent_nonexpansive_when_output_is_transposed_input():
    # with C = B^T, P = I the step map is nonexpansive in y (kappa = 0)
    rng = np.random.default_rng(31)
    for _ in range(80):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 4))
        b = rng.normal(size=(n, m))
        g = rng.normal(size=(m, m))
        d = g @ g.T + 0.05 * np.eye(m)
        lo = rng.normal(size=m)
        box = Box(lo, lo + abs(rng.normal(size=m)) + 0.2)
        sys_ = _static_box_system(b, b.T, d, box)
        assert sys_.kappa == 0.0
        x_prev = rng.normal(size=n)
        y1 = 2.0 * rng.normal(size=n)
        y2 = 2.0 * rng.normal(size=n)
        h = 0.05
        r1 = solve_step(sys_, 0.0, x_prev, y1, h)
        r2 = solve_step(sys_, 0.0, x_prev, y2, h)
        lhs = np.linalg.norm(r1.x_next - r2.x_next)
        rhs = np.linalg.norm(y1 - y2)
        assert lhs <= rhs * (1.0 + 1e-9) + 1e-12


def test_multiplier_monotonicity_across_inputs():
    # mu in N_K(w) at two solutions of the same inclusion: <dmu, dw> >= 0
    rng = np.random.default_rng(41)
    for _ in range(60):
        sys_, t_next, x_prev, _, h = random_step_instance(rng)
        y1 = 1.5 * rng.normal(size=sys_.n)
        y2 = 1.5 * rng.normal(size=sys_.n)
        r1 = solve_step(sys_, t_next, x_prev, y1, h)
        r2 = solve_step(sys_, t_next, x_prev, y2, h)
        gap = float((r1.mu - r2.mu) @ (r1.w - r2.w))
        scale = (1.0 + np.linalg.norm(r1.mu) + np.linalg.norm(r2.mu)) * (
            1.0 + np.linalg.norm(r1.w) + np.linalg.norm(r2.w))
        assert gap >= -1e-8 * scale


def test_minimal_norm_multiplier_on_rank_deficient_channel():
    # column 1 of B is zero, so the returned multiplier keeps that channel 0
    b = np.array([[0.0, 0.0], [0.0, 1.0]])
    sys_ = _static_box_system(b, b, b, Box([-1.0, -1.0], [1.0, 1.0]))
    res = solve_step(sys_, 0.0, np.zeros(2), np.array([0.5, 2.0]), 0.01)
    assert res.mu[0] == pytest.approx(0.0, abs=1e-12)
    assert res.mu[1] > 0.0
    assert res.w[1] == pytest.approx(1.0, abs=1e-10)


def test_static_multiplier_solve():
    mu, w, iters = solve_static_multiplier(
        Box([-1.0], [1.0]), np.array([[1.0]]), np.array([[1.0]]), np.array([3.0])
    )
    assert mu == pytest.approx(2.0, abs=1e-12)
    assert w == pytest.approx(1.0, abs=1e-12)
    assert iters >= 1


def test_step_size_guards():
    sys_ = _static_box_system([[1.0]], [[1.0]], [[0.0]], Box([-1.0], [1.0]))
    with pytest.raises(StepTooSmall):
        solve_step(sys_, 0.0, np.array([0.0]), np.array([0.0]), 1e-15)
    # defensive guard for a hand-made certificate with positive shift
    bad_cert = PassivityCertificate(P=np.eye(1), kappa=800.0, c1=None,
                                    c2=1.0, alpha=1.0)
    bad_sys = dataclasses.replace(sys_, cert=bad_cert)
    with pytest.raises(StepTooLarge):
        solve_step(bad_sys, 0.0, np.array([0.0]), np.array([0.0]), 0.01)


def test_step_reports_divergence_on_infeasible_channel():
    # channel 1 of this tuple is passive dead weight: row 1 of C B and of D
    # vanish, pinning w_1 = 0; a box with lower bound 0.5 on that channel is
    # unreachable and the inner solver must say so
    b = np.array([[0.0, 0.0], [0.0, 1.0]])
    sys_ = _static_box_system(b, b, b, Box([0.5, -1.0], [1.0, 1.0]))
    with pytest.raises(SolverDiverged):
        solve_step(sys_, 0.0, np.zeros(2), np.array([0.0, 0.0]), 0.01)


def test_solver_options_tolerance_is_respected():
    sys_ = _static_box_system([[1.0]], [[1.0]], [[0.0]], Box([-np.inf], [0.0]))
    loose = solve_step(sys_, 0.5, np.array([1.0]), np.array([1.0]), 0.5,
                       SolverOptions(tol=1e-6))
    tight = solve_step(sys_, 0.5, np.array([1.0]), np.array([1.0]), 0.5,
                       SolverOptions(tol=1e-12))
    assert loose.residual <= 1e-6
    assert tight.residual <= 1e-12
