import numpy as np
import pytest
from pydantic import ValidationError

from freqlemma.benchmarks import UNSTABLE_SISO_DEN, UNSTABLE_SISO_X0
from freqlemma.control.predictive import (
    PredictionModel,
    PredictiveProblem,
    build_model_qp,
    build_predictive_qp,
    equivalence_check,
    estimate_initial_state,
)
from freqlemma.control.qp import qp_solve
from freqlemma.control.receding import free_response_window
from freqlemma.core import FrequencyGrid, Trajectory
from freqlemma.errors import InvalidInput
from freqlemma.plantlab import (
    StateSpaceModel,
    TransferFunction,
    simulate,
    steady_state_spectrum,
    tf_to_state_space,
)


def plain_problem(**update):
    values = dict(horizon=4, past_length=2, Q=[[1.0]], R=[[0.01]],
                  u_lower=[-10.0], u_upper=[10.0], lambda_sigma=None, lambda_g=0.0)
    values.update(update)
    return PredictiveProblem(**values)


def plant_window(plant, rng, length):
    x = rng.standard_normal(plant.n_x)
    u = 0.1 * rng.standard_normal((length, plant.n_u))
    _, y = simulate(plant, x, Trajectory(u))
    return Trajectory(u), y


def time_data(plant, rng, length=60):
    u = Trajectory(rng.standard_normal((length, plant.n_u)))
    _, y = simulate(plant, rng.standard_normal(plant.n_x), u)
    return u, y


def test_frequency_and_time_data_give_the_same_controller(siso, siso_spectra, rng):
    u_past, y_past = plant_window(siso, rng, 2)
    report = equivalence_check(siso_spectra, time_data(siso, rng), plain_problem(), u_past, y_past, tolerance=1e-5)
    assert report.equivalent
    assert report.relative_gap <= 1e-5


def test_data_from_another_plant_is_not_equivalent(siso, rng):
    other = tf_to_state_space(TransferFunction.siso([0.2328, 0.2142], UNSTABLE_SISO_DEN))
    wrong = steady_state_spectrum(other, FrequencyGrid(20), np.ones((20, 1)))
    u_past, y_past = plant_window(siso, rng, 2)
    report = equivalence_check(wrong, time_data(siso, rng), plain_problem(), u_past, y_past)
    assert not report.equivalent


def test_model_predictor_agrees_with_noise_free_data(siso, siso_spectra, rng):
    problem = plain_problem()
    u_past, y_past = plant_window(siso, rng, 2)
    model = PredictionModel.from_spectra(siso_spectra, problem.past_length, problem.horizon)
    data_sol = qp_solve(build_predictive_qp(model, problem, u_past, y_past).qp)
    model_sol = qp_solve(build_model_qp(siso, problem, u_past, y_past).qp)
    assert data_sol.objective == pytest.approx(model_sol.objective, rel=1e-6, abs=1e-9)


def test_zero_window_gives_zero_input(siso_spectra):
    problem = plain_problem(horizon=1)
    model = PredictionModel.from_spectra(siso_spectra, problem.past_length, problem.horizon)
    zeros = Trajectory(np.zeros((2, 1)))
    pqp = build_predictive_qp(model, problem, zeros, zeros)
    sol = qp_solve(pqp.qp)
    np.testing.assert_allclose(pqp.inputs(sol.x), 0.0, atol=1e-6)
    np.testing.assert_allclose(pqp.outputs(sol.x), 0.0, atol=1e-6)


def test_regularized_problem_respects_boxes(siso, siso_spectra, siso_problem):
    model = PredictionModel.from_spectra(siso_spectra, siso_problem.past_length, siso_problem.horizon)
    u_past, y_past = free_response_window(siso, UNSTABLE_SISO_X0, siso_problem.past_length)
    pqp = build_predictive_qp(model, siso_problem, Trajectory(u_past), Trajectory(y_past))
    assert "g_abs" in pqp.layout and "sigma_abs" in pqp.layout
    sol = qp_solve(pqp.qp)
    assert sol.status == "optimal"
    u, y = pqp.inputs(sol.x), pqp.outputs(sol.x)
    assert np.all(u >= -3.0 - 1e-6) and np.all(u <= 0.5 + 1e-6)
    assert np.all(y >= -0.5 - 1e-6) and np.all(y <= 1.2 + 1e-6)
    assert pqp.coefficients(sol.x).size == model.n_g


def test_unregularized_coefficients_stay_in_row_space(siso_spectra, rng):
    problem = plain_problem()
    model = PredictionModel.from_spectra(siso_spectra, problem.past_length, problem.horizon)
    window = Trajectory(rng.standard_normal((2, 1)))
    pqp = build_predictive_qp(model, problem, window, Trajectory(np.zeros((2, 1))))
    assert pqp.g_basis is not None
    sol = qp_solve(pqp.qp)
    g = pqp.coefficients(sol.x)
    np.testing.assert_allclose(model.Hu_future @ g, pqp.inputs(sol.x).reshape(-1), atol=1e-6)


def test_initial_state_estimate(siso, rng):
    x = rng.standard_normal(2)
    u = Trajectory(rng.standard_normal((3, 1)))
    states, y = simulate(siso, x, u)
    x_end = siso.A @ states.samples[-1] + siso.B @ u.samples[-1]
    np.testing.assert_allclose(estimate_initial_state(siso, u, y), x_end, atol=1e-9)


def test_window_length_is_checked(siso_spectra):
    problem = plain_problem()
    model = PredictionModel.from_spectra(siso_spectra, problem.past_length, problem.horizon)
    short = Trajectory(np.zeros((1, 1)))
    with pytest.raises(InvalidInput):
        build_predictive_qp(model, problem, short, short)


@pytest.mark.parametrize("update", [
    {"R": [[0.0]]},
    {"Q": [[1.0, 0.0]]},
    {"u_lower": [-1.0, -1.0]},
    {"u_lower": [1.0], "u_upper": [0.0]},
    {"horizon": 0},
])
def test_invalid_problems_are_rejected(update):
    with pytest.raises(ValidationError):
        plain_problem(**update)


def test_static_plant_has_no_state_to_estimate():
    gain = StateSpaceModel(np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[2.0]])
    window = Trajectory(np.ones((2, 1)))
    with pytest.raises(InvalidInput):
        estimate_initial_state(gain, window, window)
