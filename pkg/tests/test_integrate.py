"""Catching-up integration: closed forms, invariants, diagnostics, CSV."""

import io

import numpy as np
import pytest

from helpers import scenario_path
from luresim import (
    Box,
    DecomposedMovingSet,
    SolverOptions,
    build_system,
    from_csv,
    load_scenario,
    make_system,
    richardson_refine,
    simulate,
    to_csv,
)
from luresim.errors import NotAdmissible, SolverDiverged


def _load_system(name):
    report = make_system(load_scenario(scenario_path(name)))
    return report.system, load_scenario(scenario_path(name))


def test_halfline_sweeping_closed_form():
    sys_, sc = _load_system("example_sweeping.json")
    traj = simulate(sys_, sc.x0, sc.t_final, sc.n_steps)
    expected = np.maximum(0.0, traj.times - 1.0)
    assert np.max(np.abs(traj.states[:, 0] - expected)) <= 1e-14
    assert traj.n_steps == sc.n_steps


def test_initial_row_is_stationary_multiplier():
    sys_, sc = _load_system("example_thm3.json")
    traj = simulate(sys_, sc.x0, sc.t_final, sc.n_steps)
    # x0 = (0.5, 0.9) against upper bound 1 - 0.4 * 0.9 = 0.64: the static
    # multiplier carries the overshoot through the feedthrough channel
    assert np.allclose(traj.lambdas[0], [0.0, -0.26], atol=1e-10)
    assert traj.outputs[0, 1] == pytest.approx(0.64, abs=1e-10)
    assert traj.residuals[0] <= 1e-10


def test_outputs_are_assembled_from_states_and_multipliers():
    sys_, sc = _load_system("example_timevarying.json")
    traj = simulate(sys_, sc.x0, sc.t_final, sc.n_steps)
    assert np.array_equal(traj.outputs,
                          traj.states @ sys_.C.T + traj.lambdas @ sys_.D.T)


def test_simulation_is_deterministic():
    sys_, sc = _load_system("example_thm4.json")
    a = simulate(sys_, sc.x0, sc.t_final, sc.n_steps)
    b = simulate(sys_, sc.x0, sc.t_final, sc.n_steps)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.lambdas, b.lambdas)
    assert np.array_equal(a.residuals, b.residuals)
    assert np.array_equal(a.iterations, b.iterations)


def test_diagnostics_have_no_hypomonotonicity_violations():
    for name in ("example_trivial.json", "example_sweeping.json",
                 "example_thm3.json", "example_timevarying.json"):
        sys_, sc = _load_system(name)
        traj = simulate(sys_, sc.x0, sc.t_final, sc.n_steps)
        assert traj.diag["hypo_violations"] == 0, name
        assert traj.diag["max_dx_over_h"] > 0.0


def test_csv_round_trip_is_exact(tmp_path):
    sys_, sc = _load_system("example_thm3.json")
    traj = simulate(sys_, sc.x0, sc.t_final, sc.n_steps)
    target = tmp_path / "traj.csv"
    to_csv(traj, target)
    text = target.read_text()
    header = text.splitlines()[0]
    assert header == "t,x_1,x_2,lambda_1,lambda_2,y_1,y_2,residual,iters"
    back = from_csv(target)
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.states, traj.states)
    assert np.array_equal(back.lambdas, traj.lambdas)
    assert np.array_equal(back.outputs, traj.outputs)
    assert np.array_equal(back.residuals, traj.residuals)
    assert np.array_equal(back.iterations, traj.iterations)


def test_csv_accepts_file_objects():
    sys_, sc = _load_system("example_trivial.json")
    traj = simulate(sys_, sc.x0, sc.t_final, sc.n_steps)
    buf = io.StringIO()
    to_csv(traj, buf)
    back = from_csv(io.StringIO(buf.getvalue()))
    assert np.array_equal(back.states, traj.states)


def _pinned_channel_system(lower_slope=0.0):
    b = np.array([[0.0, 0.0], [0.0, 1.0]])
    if lower_slope:
        def base(t):
            return Box([-1.0 + lower_slope * t, -1.0], [1.0, 1.0])
        lh1 = lower_slope
    else:
        def base(t):
            return Box([-1.0, -1.0], [1.0, 1.0])
        lh1 = 0.0
    ms = DecomposedMovingSet(base, np.zeros((2, 2)), lambda t: np.zeros(2),
                             lh1=lh1)
    return build_system(b, b + 0.1 * np.eye(2), b, ms)


def test_inadmissible_initial_state_is_rejected():
    sys_ = _pinned_channel_system()
    with pytest.raises(NotAdmissible):
        simulate(sys_, np.array([15.0, 0.5]), 1.0, 10)


def test_divergence_carries_partial_trajectory():
    # the pinned output channel leaves the rising lower bound at t ~ 1.05
    sys_ = _pinned_channel_system(lower_slope=0.95)
    with pytest.raises(SolverDiverged) as info:
        simulate(sys_, np.array([0.2, 0.2]), 2.0, 100)
    exc = info.value
    assert exc.step_index > 10
    partial = exc.partial
    assert partial.times.size == exc.step_index + 1
    assert partial.states.shape == (exc.step_index + 1, 2)
    # everything accumulated before the failure is a valid prefix
    clean = simulate(sys_, np.array([0.2, 0.2]), 2.0 * exc.step_index / 100,
                     exc.step_index)
    assert np.allclose(partial.states, clean.states, atol=1e-12)


def test_force_skips_admissibility_gate_only():
    sys_, sc = _load_system("example_thm4.json")
    a = simulate(sys_, sc.x0, sc.t_final, 50)
    b = simulate(sys_, sc.x0, sc.t_final, 50, SolverOptions(force=True))
    assert np.array_equal(a.states, b.states)


def test_richardson_refine_doubles_steps():
    sys_, sc = _load_system("example_trivial.json")
    trajs = richardson_refine(sys_, sc.x0, sc.t_final, 10, 3)
    assert [t.n_steps for t in trajs] == [10, 20, 40]
    # all grids nest: shared endpoint, refined estimates approach it
    finals = [t.states[-1, 0] for t in trajs]
    exact = sc.x0[0] * np.exp(-sc.t_final)
    errs = [abs(f - exact) for f in finals]
    assert errs[2] < errs[1] < errs[0]


def test_simulate_input_validation():
    sys_, sc = _load_system("example_trivial.json")
    with pytest.raises(ValueError):
        simulate(sys_, np.array([1.0, 2.0]), 1.0, 10)
    with pytest.raises(ValueError):
        simulate(sys_, sc.x0, -1.0, 10)
    with pytest.raises(ValueError):
        simulate(sys_, sc.x0, 1.0, 0)
