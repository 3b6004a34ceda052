import warnings

import numpy as np
import pytest

from freqlemma.benchmarks import batch_reactor, unstable_siso
from freqlemma.control.predictive import PredictiveProblem
from freqlemma.core import FrequencyGrid
from freqlemma.errors import WeakDataWarning
from freqlemma.plantlab import steady_state_spectrum, unit_input_directions


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def reactor():
    return batch_reactor()


@pytest.fixture(scope="session")
def reactor_grid():
    return FrequencyGrid(10)


@pytest.fixture(scope="session")
def reactor_spectra(reactor, reactor_grid):
    """Noise-free unit-direction spectra, E = 2, M = 10, with states."""
    return steady_state_spectrum(reactor, reactor_grid, unit_input_directions(2, reactor_grid.M))


@pytest.fixture(scope="session")
def siso():
    return unstable_siso()


@pytest.fixture(scope="session")
def siso_spectra(siso):
    """Noise-free spectra of the unstable SISO plant with U_k = 1 on M = 20 bins."""
    grid = FrequencyGrid(20)
    return steady_state_spectrum(siso, grid, np.ones((grid.M, 1)))


@pytest.fixture
def quiet():
    """Silence weak-data warnings in tests that deliberately use thin data."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeakDataWarning)
        yield


@pytest.fixture(scope="session")
def reactor_lqr_reference():
    """
    Four-decimal P and K for the batch reactor with Q = I, R = I. They were
    computed from the unrounded reactor data, so P sits up to 1.5e-3 away
    from the Riccati solution of the rounded matrices.
    """
    P = np.array([
        [3.6042, 0.0490, 1.7622, -1.3063],
        [0.0490, 1.1700, 0.0724, 0.1416],
        [1.7622, 0.0724, 2.2018, -0.8446],
        [-1.3063, 0.1416, -0.8446, 1.8234],
    ])
    K = np.array([
        [0.1626, -0.2920, 0.0495, -0.3284],
        [1.4183, 0.1155, 0.9841, -0.6247],
    ])
    return P, K


@pytest.fixture
def siso_problem():
    """Regulation of the unstable SISO plant to zero under input and output boxes."""
    return PredictiveProblem(
        horizon=10,
        past_length=6,
        Q=[[1.0]],
        R=[[0.01]],
        u_lower=[-3.0],
        u_upper=[0.5],
        y_lower=[-0.5],
        y_upper=[1.2],
        lambda_g=0.1,
        lambda_sigma=1e5,
    )
