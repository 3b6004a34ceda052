"""
Receding-horizon closed loops for FreePC, DeePC and the model-based MPC
benchmark, plus a seeded Monte Carlo fan-out.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from ..core import SpectraCollection, Trajectory
from ..errors import ControlFailure, FreqLemmaError, InvalidInput
from ..plantlab import NoiseConfig, StateSpaceModel
from .predictive import (
    PredictionModel,
    PredictiveProblem,
    PredictiveQp,
    build_model_qp,
    build_predictive_qp,
)
from .qp import qp_solve


logger = logging.getLogger(__name__)

BOOTSTRAP_MODES = ("zeros", "free_response")
T = TypeVar("T")


class PredictiveController:
    """
    Owns the past window; `act` solves one QP and returns the first input.
    Not thread-safe: use one instance per closed loop.
    """
    kind = "base"

    def __init__(self, problem: PredictiveProblem):
        self.problem = problem
        self.u_past = np.zeros((problem.past_length, problem.n_u))
        self.y_past = np.zeros((problem.past_length, problem.n_y))
        self.last_solution = None

    def reset(self, u_past: np.ndarray, y_past: np.ndarray) -> None:
        u_past = np.asarray(u_past, dtype=float).reshape(self.u_past.shape)
        y_past = np.asarray(y_past, dtype=float).reshape(self.y_past.shape)
        self.u_past, self.y_past = u_past.copy(), y_past.copy()

    def build(self) -> PredictiveQp:
        raise NotImplementedError

    def act(self) -> np.ndarray:
        pqp = self.build()
        solution = qp_solve(pqp.qp)
        self.last_solution = solution
        return pqp.inputs(solution.x)[0]

    def observe(self, u: np.ndarray, y: np.ndarray) -> None:
        self.u_past = np.vstack([self.u_past[1:], np.reshape(u, (1, -1))])
        self.y_past = np.vstack([self.y_past[1:], np.reshape(y, (1, -1))])

    def _window(self):
        return Trajectory(self.u_past), Trajectory(self.y_past)


class DataDrivenController(PredictiveController):
    def __init__(self, model: PredictionModel, problem: PredictiveProblem):
        super().__init__(problem)
        self.model = model
        self.kind = model.kind

    def build(self) -> PredictiveQp:
        return build_predictive_qp(self.model, self.problem, *self._window())


class FreePCController(DataDrivenController):
    def __init__(self, spectra: SpectraCollection, problem: PredictiveProblem, state_order: Optional[int] = None):
        model = PredictionModel.from_spectra(spectra, problem.past_length, problem.horizon, state_order)
        super().__init__(model, problem)


class DeePCController(DataDrivenController):
    def __init__(self, u_data: Trajectory, y_data: Trajectory, problem: PredictiveProblem,
                 state_order: Optional[int] = None):
        model = PredictionModel.from_time_data(u_data, y_data, problem.past_length, problem.horizon, state_order)
        super().__init__(model, problem)


class ModelMPCController(PredictiveController):
    kind = "mpc"

    def __init__(self, plant: StateSpaceModel, problem: PredictiveProblem):
        super().__init__(problem)
        self.plant = plant

    def build(self) -> PredictiveQp:
        return build_model_qp(self.plant, self.problem, *self._window())


@dataclass(frozen=True)
class ClosedLoopResult:
    u: Trajectory
    y: Trajectory
    stage_costs: np.ndarray

    @property
    def cost(self) -> float:
        return float(self.stage_costs.sum())

    @property
    def cumulative_cost(self) -> np.ndarray:
        return np.cumsum(self.stage_costs)


def free_response_window(plant: StateSpaceModel, x0, length: int):
    """
    Zero-input past window of `length` samples that ends in state x0,
    i.e. y_{-i} = C A^{-i} x0. Requires an invertible A.
    """
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if plant.n_x and abs(np.linalg.det(plant.A)) < 1e-12:
        raise InvalidInput("free-response bootstrap needs an invertible A")
    A_inv = np.linalg.inv(plant.A) if plant.n_x else plant.A
    ys = np.zeros((length, plant.n_y))
    x = x0
    for i in range(length - 1, -1, -1):
        x = A_inv @ x
        ys[i] = plant.C @ x
    return np.zeros((length, plant.n_u)), ys


def receding_horizon_run(
    controller: PredictiveController,
    plant: StateSpaceModel,
    steps: int,
    x0=None,
    noise: Optional[NoiseConfig] = None,
    bootstrap: str = "zeros",
) -> ClosedLoopResult:
    """
    Apply the first optimal input, measure, shift the window, repeat.

    The cost accumulates y'Qy + u'Ru of the noise-free plant output.
    """
    if bootstrap not in BOOTSTRAP_MODES:
        raise InvalidInput(f"bootstrap must be one of {BOOTSTRAP_MODES}, got {bootstrap!r}")
    if steps < 1:
        raise InvalidInput("steps must be >= 1")
    problem = controller.problem
    x = np.zeros(plant.n_x) if x0 is None else np.asarray(x0, dtype=float).reshape(-1)
    if x.size != plant.n_x:
        raise InvalidInput(f"x0 must have {plant.n_x} entries")

    if bootstrap == "zeros":
        controller.reset(np.zeros((problem.past_length, problem.n_u)),
                         np.zeros((problem.past_length, problem.n_y)))
    else:
        controller.reset(*free_response_window(plant, x, problem.past_length))

    n = noise.sample(steps, plant.n_y) if noise is not None else np.zeros((steps, plant.n_y))
    us = np.empty((steps, plant.n_u))
    ys = np.empty((steps, plant.n_y))
    costs = np.empty(steps)
    for k in range(steps):
        try:
            u = controller.act()
        except FreqLemmaError as exc:
            raise ControlFailure(k, exc) from exc
        y = plant.C @ x + plant.D @ u
        us[k], ys[k] = u, y
        costs[k] = problem.stage_cost(u, y)
        controller.observe(u, y + n[k])
        x = plant.A @ x + plant.B @ u
        logger.debug("%s step %d: u=%s y=%s cost %.6g", controller.kind, k, u, y, costs[k])

    result = ClosedLoopResult(Trajectory(us), Trajectory(ys), costs)
    logger.info("%s closed loop over %d steps: J = %.6g", controller.kind, steps, result.cost)
    return result


def monte_carlo(
    task: Callable[[int, np.random.SeedSequence], T],
    runs: int,
    seed: int,
    workers: Optional[int] = None,
) -> List[T]:
    """
    Run task(index, seed_sequence) for every run, each with its own child
    seed, and return results ordered by run index.
    """
    if runs < 1:
        raise InvalidInput("runs must be >= 1")
    children: Sequence[np.random.SeedSequence] = np.random.SeedSequence(seed).spawn(runs)
    if workers == 1:
        return [task(i, s) for i, s in enumerate(children)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, range(runs), children))
