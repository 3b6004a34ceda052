import numpy as np
import pytest

from freqlemma.benchmarks import (
    batch_reactor,
    batch_reactor_controller,
    unstable_siso,
    unstable_siso_controller,
    unstable_siso_tf,
)
from freqlemma.core import FrequencyGrid, Trajectory
from freqlemma.errors import DivergedLoop, EigenvalueHit, IllPosedLoop, InvalidInput
from freqlemma.plantlab import (
    NoiseConfig,
    StateSpaceModel,
    TransferFunction,
    average_spectra,
    closed_loop_collect,
    closed_loop_matrix,
    estimate_frf,
    frf_to_spectra,
    multisine,
    observability_index,
    per_period_dft,
    period_dft,
    random_phases,
    simulate,
    steady_state_spectrum,
    tf_to_state_space,
    toeplitz_matrix,
    transfer_eval,
)


@pytest.fixture
def scalar():
    return StateSpaceModel.from_matrices([[0.5]], [[1.0]], [[1.0]])


def test_simulate_scalar_recursion(scalar):
    states, y = simulate(scalar, [0.0], Trajectory(np.ones((4, 1))))
    np.testing.assert_allclose(y.samples[:, 0], [0.0, 1.0, 1.5, 1.75])
    np.testing.assert_allclose(states.samples[:, 0], [0.0, 1.0, 1.5, 1.75])


def test_simulate_checks_dimensions(scalar):
    with pytest.raises(InvalidInput):
        simulate(scalar, [0.0, 1.0], Trajectory(np.ones((4, 1))))
    with pytest.raises(InvalidInput):
        simulate(scalar, None, Trajectory(np.ones((4, 2))))


def test_model_rejects_inconsistent_matrices():
    with pytest.raises(InvalidInput):
        StateSpaceModel.from_matrices(np.eye(2), np.ones((3, 1)), np.ones((1, 2)))


def test_transfer_eval_matches_rational_form(siso):
    z = 0.8 * np.exp(0.4j)
    expected = unstable_siso_tf().evaluate(z)
    np.testing.assert_allclose(transfer_eval(siso, z), expected, rtol=1e-12)


def test_transfer_eval_at_eigenvalue(scalar):
    with pytest.raises(EigenvalueHit):
        transfer_eval(scalar, 0.5)


def test_steady_state_relations_hold(reactor, reactor_spectra):
    grid = reactor_spectra.grid
    for e in range(reactor_spectra.E):
        U = reactor_spectra.inputs[e].samples
        X = reactor_spectra.states[e].samples
        Y = reactor_spectra.outputs[e].samples
        for k, z in enumerate(grid.points):
            np.testing.assert_allclose(z * X[k], reactor.A @ X[k] + reactor.B @ U[k], atol=1e-10)
            np.testing.assert_allclose(Y[k], reactor.C @ X[k], atol=1e-10)


def test_multisine_is_periodic(rng):
    grid = FrequencyGrid(6)
    d = multisine(1.0, grid, random_phases(grid, rng), 3 * grid.period)
    np.testing.assert_allclose(d.samples[:grid.period], d.samples[grid.period:2 * grid.period], atol=1e-12)


def test_period_dft_matches_direct_sum(rng):
    grid = FrequencyGrid(5)
    signal = rng.standard_normal((2, grid.period, 3))
    t = np.arange(grid.period)
    direct = np.einsum("kt,ptn->pkn", np.exp(-1j * np.outer(grid.frequencies, t)), signal)
    np.testing.assert_allclose(period_dft(signal, grid), direct, atol=1e-10)


def test_period_dft_rejects_wrong_period_length():
    with pytest.raises(InvalidInput):
        period_dft(np.zeros((1, 7, 1)), FrequencyGrid(4))


def test_noise_free_closed_loop_frf_is_exact(siso):
    grid = FrequencyGrid(20)
    rng = np.random.default_rng(3)
    injection = multisine(1.0, grid, random_phases(grid, rng), grid.period, direction=[1.0])
    records = closed_loop_collect(siso, unstable_siso_controller(), [injection], NoiseConfig(), p0=20, p=3)
    assert records[0].periods == 3
    frf = estimate_frf([per_period_dft(records[0], grid)], grid)
    assert frf.excited.all()
    for k, z in enumerate(grid.points):
        np.testing.assert_allclose(frf.H[k], transfer_eval(siso, z), rtol=1e-6, atol=1e-9)
    assert np.max(frf.variance) < 1e-12

    dataset = frf_to_spectra(frf)
    np.testing.assert_allclose(dataset.outputs[0].samples[1:, 0], frf.H[1:, 0, 0])


def test_noisy_closed_loop_frf_has_positive_variance(siso):
    grid = FrequencyGrid(10)
    rng = np.random.default_rng(5)
    injection = multisine(1.0, grid, random_phases(grid, rng), grid.period, direction=[1.0])
    records = closed_loop_collect(siso, unstable_siso_controller(), [injection],
                                  NoiseConfig(standard_deviation=0.1, seed=1), p0=20, p=5)
    frf = estimate_frf([per_period_dft(records[0], grid)], grid)
    assert np.all(frf.variance > 0)
    averaged = average_spectra([per_period_dft(records[0], grid)])
    assert averaged.E == 1 and averaged.grid.M == 10


def test_noise_stream_is_reproducible(siso):
    grid = FrequencyGrid(4)
    injection = multisine(1.0, grid, np.zeros(grid.M), grid.period, direction=[1.0])
    noise = NoiseConfig(standard_deviation=0.1, seed=9)
    first = closed_loop_collect(siso, unstable_siso_controller(), [injection], noise, p0=2, p=2)
    second = closed_loop_collect(siso, unstable_siso_controller(), [injection], noise, p0=2, p=2)
    np.testing.assert_array_equal(first[0].y, second[0].y)


def test_ill_posed_loop_is_rejected():
    plant = StateSpaceModel.from_matrices([[0.5]], [[1.0]], [[1.0]], [[1.0]])
    controller = StateSpaceModel.static_gain([[-1.0]])
    grid = FrequencyGrid(2)
    injection = multisine(1.0, grid, np.zeros(2), grid.period, direction=[1.0])
    with pytest.raises(IllPosedLoop):
        closed_loop_collect(plant, controller, [injection], NoiseConfig(), p0=0, p=1)


def test_unstable_loop_diverges():
    plant = StateSpaceModel.from_matrices([[2.0]], [[1.0]], [[1.0]])
    controller = StateSpaceModel.static_gain([[0.0]])
    grid = FrequencyGrid(2)
    injection = multisine(1.0, grid, np.zeros(2), grid.period, direction=[1.0])
    with pytest.raises(DivergedLoop):
        closed_loop_collect(plant, controller, [injection], NoiseConfig(), p0=20, p=20)


def test_unstable_loop_is_logged(caplog):
    plant = StateSpaceModel.from_matrices([[2.0]], [[1.0]], [[1.0]])
    grid = FrequencyGrid(2)
    injection = multisine(1.0, grid, np.zeros(2), grid.period, direction=[1.0])
    with caplog.at_level("WARNING", logger="freqlemma.plantlab"), pytest.raises(DivergedLoop):
        closed_loop_collect(plant, StateSpaceModel.static_gain([[0.0]]), [injection], NoiseConfig(), p0=20, p=20)
    assert "spectral radius 2.000" in caplog.text


def test_static_feedback_closed_loop_matrix():
    plant = StateSpaceModel.from_matrices([[2.0]], [[1.0]], [[1.0]])
    np.testing.assert_allclose(closed_loop_matrix(plant, StateSpaceModel.static_gain([[1.5]])), [[0.5]])


@pytest.mark.parametrize("plant, controller", [
    (batch_reactor, batch_reactor_controller),
    (unstable_siso, unstable_siso_controller),
])
def test_benchmark_controllers_stabilize_their_plants(plant, controller):
    radius = np.max(np.abs(np.linalg.eigvals(closed_loop_matrix(plant(), controller()))))
    assert radius < 1.0


def test_reactor_closed_loop_runs_without_diverging(reactor):
    grid = FrequencyGrid(5)
    rng = np.random.default_rng(2)
    injections = [multisine(1.0, grid, random_phases(grid, rng), grid.period, direction=direction)
                  for direction in ([1.0, 0.0], [0.0, 1.0])]
    records = closed_loop_collect(reactor, batch_reactor_controller(), injections,
                                  NoiseConfig(), p0=40, p=2)
    assert all(np.all(np.isfinite(r.y)) for r in records)
    frf = estimate_frf([per_period_dft(r, grid) for r in records], grid)
    for k in (1, 2):
        np.testing.assert_allclose(frf.H[k], transfer_eval(reactor, grid.points[k]), rtol=1e-5, atol=1e-8)


def test_tf_realization_matches_evaluation():
    tf = TransferFunction(
        numerators=(([1.0, 0.2], [0.5]), ([0.0], [2.0, -1.0])),
        denominators=(([1.0, -0.3], [1.0]), ([1.0], [1.0, 0.4])),
    )
    ss = tf_to_state_space(tf)
    assert ss.n_u == 2 and ss.n_y == 2
    z = 1.3 * np.exp(0.7j)
    np.testing.assert_allclose(transfer_eval(ss, z), tf.evaluate(z), rtol=1e-12)


def test_improper_transfer_function_is_rejected():
    with pytest.raises(InvalidInput):
        tf_to_state_space(TransferFunction.siso([1.0, 0.0, 0.0], [1.0, 0.5]))


def test_reactor_observability_index(reactor):
    assert observability_index(reactor) == 2


def test_toeplitz_gives_forced_response(reactor, rng):
    u = rng.standard_normal((5, 2))
    _, y = simulate(reactor, None, Trajectory(u))
    np.testing.assert_allclose(toeplitz_matrix(reactor, 5) @ u.reshape(-1), y.vectorized(), atol=1e-9)


def test_steady_state_rejects_bad_direction_shape(reactor):
    with pytest.raises(InvalidInput):
        steady_state_spectrum(reactor, FrequencyGrid(4), np.ones((3, 2)))
