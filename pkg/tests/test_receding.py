import numpy as np
import pytest

from freqlemma.benchmarks import UNSTABLE_SISO_X0
from freqlemma.control.predictive import PredictiveProblem
from freqlemma.control.receding import (
    FreePCController,
    ModelMPCController,
    free_response_window,
    monte_carlo,
    receding_horizon_run,
)
from freqlemma.core import Trajectory
from freqlemma.errors import ControlFailure, Infeasible, InvalidInput
from freqlemma.plantlab import NoiseConfig, StateSpaceModel, simulate


def test_plant_at_rest_costs_nothing(siso, siso_spectra, siso_problem):
    result = receding_horizon_run(FreePCController(siso_spectra, siso_problem), siso, steps=5)
    assert result.cost <= 1e-10
    np.testing.assert_allclose(result.u.samples, 0.0, atol=1e-6)


def test_first_moves_from_the_case_study_state(siso, siso_spectra, siso_problem):
    controller = FreePCController(siso_spectra, siso_problem)
    result = receding_horizon_run(controller, siso, steps=2, x0=UNSTABLE_SISO_X0, bootstrap="free_response")
    assert result.u.samples[0, 0] == pytest.approx(-3.0, abs=1e-4)
    assert result.y.samples[0, 0] == pytest.approx(1.05699, abs=1e-4)
    assert result.y.samples[1, 0] == pytest.approx(1.14788, abs=1e-4)
    np.testing.assert_allclose(result.cumulative_cost[-1], result.cost)


def test_model_benchmark_matches_noise_free_data_loop(siso, siso_spectra):
    problem = PredictiveProblem(horizon=10, past_length=6, Q=[[1.0]], R=[[0.01]],
                                u_lower=[-3.0], u_upper=[0.5], lambda_sigma=None, lambda_g=0.0)
    data_loop = receding_horizon_run(FreePCController(siso_spectra, problem), siso, steps=10,
                                     x0=UNSTABLE_SISO_X0, bootstrap="free_response")
    model_loop = receding_horizon_run(ModelMPCController(siso, problem), siso, steps=10,
                                      x0=UNSTABLE_SISO_X0, bootstrap="free_response")
    np.testing.assert_allclose(data_loop.u.samples, model_loop.u.samples, atol=1e-5)
    assert data_loop.cost == pytest.approx(model_loop.cost, rel=1e-5)


def test_case_study_runs_all_steps_close_to_the_model_benchmark(siso, siso_spectra, siso_problem):
    freepc, mpc = (
        receding_horizon_run(controller, siso, steps=50, x0=UNSTABLE_SISO_X0, bootstrap="free_response")
        for controller in (FreePCController(siso_spectra, siso_problem), ModelMPCController(siso, siso_problem))
    )
    assert freepc.u.length == 50
    assert np.all(freepc.u.samples >= -3.0 - 1e-6) and np.all(freepc.u.samples <= 0.5 + 1e-6)
    assert abs(freepc.y.samples[-1, 0]) < 1e-2
    assert freepc.cost == pytest.approx(mpc.cost, rel=0.15)


def test_noisy_runs_are_reproducible(siso, siso_spectra, siso_problem):
    noise = NoiseConfig(standard_deviation=0.01, seed=3)
    runs = [
        receding_horizon_run(FreePCController(siso_spectra, siso_problem), siso, steps=4,
                             x0=UNSTABLE_SISO_X0, noise=noise, bootstrap="free_response")
        for _ in range(2)
    ]
    np.testing.assert_array_equal(runs[0].u.samples, runs[1].u.samples)
    assert runs[0].cost == runs[1].cost


def test_free_response_window_ends_in_the_state(siso):
    u, y = free_response_window(siso, UNSTABLE_SISO_X0, 4)
    np.testing.assert_array_equal(u, 0.0)
    x_start = np.linalg.matrix_power(np.linalg.inv(siso.A), 4) @ np.asarray(UNSTABLE_SISO_X0)
    _, y_sim = simulate(siso, x_start, Trajectory(u))
    np.testing.assert_allclose(y, y_sim.samples, atol=1e-9)


def test_free_response_needs_invertible_dynamics():
    plant = StateSpaceModel.from_matrices([[0.0]], [[1.0]], [[1.0]])
    with pytest.raises(InvalidInput):
        free_response_window(plant, [1.0], 3)


def test_failed_step_is_reported(siso):
    problem = PredictiveProblem(horizon=3, past_length=2, Q=[[1.0]], R=[[1.0]],
                                u_lower=[0.0], u_upper=[0.0], y_lower=[5.0], y_upper=[6.0])
    with pytest.raises(ControlFailure) as info:
        receding_horizon_run(ModelMPCController(siso, problem), siso, steps=3)
    assert info.value.step == 0
    assert isinstance(info.value.cause, Infeasible)


@pytest.mark.parametrize("kwargs", [{"bootstrap": "warm"}, {"steps": 0}, {"x0": [1.0, 2.0, 3.0]}])
def test_invalid_run_arguments(siso, siso_spectra, siso_problem, kwargs):
    args = {"steps": 2, **kwargs}
    with pytest.raises(InvalidInput):
        receding_horizon_run(FreePCController(siso_spectra, siso_problem), siso, **args)


def test_monte_carlo_is_ordered_and_seeded():
    def draw(index, seed_sequence):
        return index, float(np.random.default_rng(seed_sequence).standard_normal())

    threaded = monte_carlo(draw, runs=8, seed=2024, workers=4)
    serial = monte_carlo(draw, runs=8, seed=2024, workers=1)
    assert [i for i, _ in threaded] == list(range(8))
    assert threaded == serial
    assert monte_carlo(draw, runs=8, seed=2025, workers=1) != serial
