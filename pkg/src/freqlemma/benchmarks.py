"""
Case-study plants and controllers, addressable by preset name from configs.
"""
from typing import Callable, Dict, Union

import numpy as np

from .errors import ConfigError
from .plantlab import StateSpaceModel, TransferFunction, tf_to_state_space


BATCH_REACTOR_A = np.array([
    [2.622, 0.320, 1.834, -1.066],
    [-0.238, 0.187, -0.136, 0.202],
    [0.161, 0.789, 0.286, 0.606],
    [-0.104, 0.764, 0.089, 0.736],
])
BATCH_REACTOR_B = np.array([
    [0.465, -1.550],
    [1.314, 0.085],
    [2.055, -0.673],
    [2.023, -0.160],
])
BATCH_REACTOR_C = np.array([
    [1.0, 0.0, 1.0, -1.0],
    [0.0, 1.0, 0.0, 0.0],
])

# unstable SISO plant: poles near 1.285 and 0.606
UNSTABLE_SISO_NUM = [0.1164, 0.1071]
UNSTABLE_SISO_DEN = [1.0, -1.891, 0.7788]


def batch_reactor() -> StateSpaceModel:
    """Open-loop unstable 4-state, 2-input, 2-output reactor (observability index 2)."""
    return StateSpaceModel.from_matrices(BATCH_REACTOR_A, BATCH_REACTOR_B, BATCH_REACTOR_C)


def batch_reactor_full_state() -> StateSpaceModel:
    """Same reactor with C = I, used for state-feedback LQR."""
    return StateSpaceModel.from_matrices(BATCH_REACTOR_A, BATCH_REACTOR_B, np.eye(4))


def batch_reactor_controller() -> TransferFunction:
    """
    Stabilizing 2x2 controller with an integrator, for the loop
    u = d - C(z) y:

        C(z) = 1 / (1.84 (z - 1)) * [[0, 2z - 1], [-5z + 1, 0]]
    """
    den = [1.84, -1.84]
    return TransferFunction(
        numerators=(([0.0], [2.0, -1.0]), ([-5.0, 1.0], [0.0])),
        denominators=((den, den), (den, den)),
    )


def unstable_siso_tf() -> TransferFunction:
    return TransferFunction.siso(UNSTABLE_SISO_NUM, UNSTABLE_SISO_DEN)


def unstable_siso() -> StateSpaceModel:
    """Controllable canonical realization of (0.1164 z + 0.1071) / (z^2 - 1.891 z + 0.7788)."""
    return tf_to_state_space(unstable_siso_tf())


def unstable_siso_controller() -> TransferFunction:
    return TransferFunction.siso([6.0, -5.135], [1.0, -0.1353])


# Initial state of the unstable SISO closed-loop study, in the realization above.
UNSTABLE_SISO_X0 = (5.618, 3.7635)


PLANTS: Dict[str, Callable[[], StateSpaceModel]] = {
    "batch_reactor": batch_reactor,
    "batch_reactor_full_state": batch_reactor_full_state,
    "unstable_siso": unstable_siso,
}

CONTROLLERS: Dict[str, Callable[[], TransferFunction]] = {
    "batch_reactor_controller": batch_reactor_controller,
    "unstable_siso_controller": unstable_siso_controller,
}


def plant_preset(name: str) -> StateSpaceModel:
    try:
        return PLANTS[name]()
    except KeyError:
        raise ConfigError(f"unknown plant preset {name!r}; choose from {sorted(PLANTS)}") from None


def controller_preset(name: str) -> Union[StateSpaceModel, TransferFunction]:
    try:
        return CONTROLLERS[name]()
    except KeyError:
        raise ConfigError(
            f"unknown controller preset {name!r}; choose from {sorted(CONTROLLERS)}"
        ) from None
