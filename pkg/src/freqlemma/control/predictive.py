"""
Finite-horizon predictive-control QPs.

The same QP layout serves three prediction models:

- FreePC: the real-form frequency-domain data matrix (coefficients g are
  the real coordinates of G),
- DeePC: time-domain Hankel matrices,
- a model-based MPC benchmark: y = O_T x0 + T_T u with x0 estimated from
  the past window.

Variables, in order: u (T n_u), y (T n_y), g, sigma (Tbar n_y), then the
1-norm epigraph variables of g and sigma. sigma and the epigraph variables
are left out when their weight switches them off.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .. import linalg
from ..core import SpectraCollection, Trajectory, build_data_matrix, hankel
from ..errors import InvalidInput, WeakDataWarning
from ..excitation import is_cpe, is_pe_time
from ..plantlab import StateSpaceModel, observability_matrix, simulate, toeplitz_matrix
from .qp import QpProblem, QpSolution, qp_solve


logger = logging.getLogger(__name__)


class PredictiveProblem(BaseModel):
    """
    Horizon, past window, stage cost and constraints of one predictive controller.

    - Q, R: output and input weights of the stage cost y'Qy + u'Ru
    - *_lower / *_upper: per-channel boxes (None = unbounded)
    - lambda_sigma: weight of ||sigma||_1; None pins sigma to zero
    - lambda_g: weight of ||g||_1 (applied to the real coordinates of G)
    """
    horizon: int = Field(ge=1)                     # T
    past_length: int = Field(ge=1)                 # Tbar
    Q: List[List[float]]
    R: List[List[float]]
    u_lower: Optional[List[float]] = None
    u_upper: Optional[List[float]] = None
    y_lower: Optional[List[float]] = None
    y_upper: Optional[List[float]] = None
    lambda_sigma: Optional[float] = Field(default=1e5, gt=0)
    lambda_g: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _check(self):
        Q, R = self.Q_matrix, self.R_matrix
        if Q.shape[0] != Q.shape[1] or R.shape[0] != R.shape[1]:
            raise ValueError("Q and R must be square")
        if not (np.allclose(Q, Q.T, atol=1e-12) and np.allclose(R, R.T, atol=1e-12)):
            raise ValueError("Q and R must be symmetric")
        if np.linalg.eigvalsh(Q)[0] < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R)[0] <= 0:
            raise ValueError("R must be positive definite")
        for name, lo, hi, n in (("u", self.u_lower, self.u_upper, R.shape[0]),
                                ("y", self.y_lower, self.y_upper, Q.shape[0])):
            for bound in (lo, hi):
                if bound is not None and len(bound) != n:
                    raise ValueError(f"{name} bounds need {n} entries")
            if lo is not None and hi is not None and np.any(np.asarray(lo) > np.asarray(hi)):
                raise ValueError(f"{name} box is empty")
        return self

    @property
    def Q_matrix(self) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.Q, dtype=float))

    @property
    def R_matrix(self) -> np.ndarray:
        return np.atleast_2d(np.asarray(self.R, dtype=float))

    @property
    def n_u(self) -> int:
        return self.R_matrix.shape[0]

    @property
    def n_y(self) -> int:
        return self.Q_matrix.shape[0]

    def box(self, name: str):
        n = self.n_u if name == "u" else self.n_y
        lo = getattr(self, f"{name}_lower")
        hi = getattr(self, f"{name}_upper")
        lo = np.full(n, -np.inf) if lo is None else np.asarray(lo, dtype=float)
        hi = np.full(n, np.inf) if hi is None else np.asarray(hi, dtype=float)
        return lo, hi

    def stage_cost(self, u, y) -> float:
        u = np.asarray(u, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        return float(y @ self.Q_matrix @ y + u @ self.R_matrix @ u)


@dataclass(frozen=True)
class PredictionModel:
    """
    Data matrices split into past/future blocks:

        [u_past; u_future; y_past; y_future] = [Hu_past; Hu_future; Hy_past; Hy_future] g
    """
    Hu_past: np.ndarray
    Hu_future: np.ndarray
    Hy_past: np.ndarray
    Hy_future: np.ndarray
    kind: str

    @property
    def n_g(self) -> int:
        return self.Hu_past.shape[1]

    @property
    def stacked(self) -> np.ndarray:
        return np.vstack([self.Hu_past, self.Hu_future, self.Hy_past, self.Hy_future])

    @classmethod
    def from_spectra(cls, spectra: SpectraCollection, past_length: int, horizon: int,
                     state_order: Optional[int] = None) -> "PredictionModel":
        depth = past_length + horizon
        order = depth + (state_order or 0)
        if order <= spectra.E * (2 * spectra.grid.M - 1):
            report = is_cpe(spectra.inputs, order)
            if not report.achieved:
                warnings.warn(f"frequency data is not CPE of order {order}", WeakDataWarning, stacklevel=2)
        else:
            warnings.warn(f"frequency data cannot be CPE of order {order}", WeakDataWarning, stacklevel=2)
        dm = build_data_matrix(depth, spectra, ("input", "output"))
        U, Y = dm.rows("input"), dm.rows("output")
        pu, py = past_length * spectra.n_u, past_length * spectra.n_y
        return cls(U[:pu], U[pu:], Y[:py], Y[py:], "freepc")

    @classmethod
    def from_time_data(cls, u: Trajectory, y: Trajectory, past_length: int, horizon: int,
                       state_order: Optional[int] = None) -> "PredictionModel":
        depth = past_length + horizon
        order = depth + (state_order or 0)
        if order <= u.length and not is_pe_time(u, order).achieved:
            warnings.warn(f"time data is not PE of order {order}", WeakDataWarning, stacklevel=2)
        U, Y = hankel(depth, u), hankel(depth, y)
        pu, py = past_length * u.channel_count, past_length * y.channel_count
        return cls(U[:pu], U[pu:], Y[:py], Y[py:], "deepc")


class PredictiveQp(NamedTuple):
    qp: QpProblem
    layout: Dict[str, slice]
    horizon: int
    n_u: int
    n_y: int
    # g = basis @ (g variables) when g was reparametrized onto the data row space
    g_basis: Optional[np.ndarray] = None

    def inputs(self, x: np.ndarray) -> np.ndarray:
        return x[self.layout["u"]].reshape(self.horizon, self.n_u)

    def outputs(self, x: np.ndarray) -> np.ndarray:
        return x[self.layout["y"]].reshape(self.horizon, self.n_y)

    def coefficients(self, x: np.ndarray) -> Optional[np.ndarray]:
        if "g" not in self.layout:
            return None
        g = x[self.layout["g"]]
        return g if self.g_basis is None else self.g_basis @ g


def _check_window(problem: PredictiveProblem, u_past: Trajectory, y_past: Trajectory) -> None:
    if u_past.length != problem.past_length or y_past.length != problem.past_length:
        raise InvalidInput(f"past window must hold {problem.past_length} samples")
    if u_past.channel_count != problem.n_u or y_past.channel_count != problem.n_y:
        raise InvalidInput("past window channel counts do not match the cost weights")


class _Layout:
    def __init__(self):
        self.size = 0
        self.slices: Dict[str, slice] = {}

    def add(self, name: str, length: int) -> slice:
        self.slices[name] = slice(self.size, self.size + length)
        self.size += length
        return self.slices[name]


def _assemble(problem: PredictiveProblem, layout: _Layout, equalities, epigraphs, linear) -> QpProblem:
    """Common cost, boxes and 1-norm epigraph rows on top of model equalities."""
    T, n = problem.horizon, layout.size
    H = np.zeros((n, n))
    H[layout.slices["u"], layout.slices["u"]] = 2.0 * np.kron(np.eye(T), problem.R_matrix)
    H[layout.slices["y"], layout.slices["y"]] = 2.0 * np.kron(np.eye(T), problem.Q_matrix)
    f = np.zeros(n)
    for name, weight in linear:
        f[layout.slices[name]] = weight

    A_rows, b_rows = [], []
    for blocks, rhs in equalities:
        row = np.zeros((rhs.size, n))
        for name, mat in blocks:
            row[:, layout.slices[name]] = mat
        A_rows.append(row)
        b_rows.append(rhs)

    C_rows, lo_rows, hi_rows = [], [], []
    for name in ("u", "y"):
        lo, hi = problem.box(name)
        s = layout.slices[name]
        row = np.zeros((s.stop - s.start, n))
        row[:, s] = np.eye(s.stop - s.start)
        C_rows.append(row)
        lo_rows.append(np.tile(lo, T))
        hi_rows.append(np.tile(hi, T))
    for var, aux in epigraphs:
        sv, sa = layout.slices[var], layout.slices[aux]
        m = sv.stop - sv.start
        for sign in (1.0, -1.0):
            row = np.zeros((m, n))
            row[:, sv] = sign * np.eye(m)
            row[:, sa] = -np.eye(m)
            C_rows.append(row)
            lo_rows.append(np.full(m, -np.inf))
            hi_rows.append(np.zeros(m))

    return QpProblem(
        H=H, f=f,
        A_eq=np.vstack(A_rows), b_eq=np.concatenate(b_rows),
        C_in=np.vstack(C_rows), lower=np.concatenate(lo_rows), upper=np.concatenate(hi_rows),
    )


def build_predictive_qp(model: PredictionModel, problem: PredictiveProblem,
                        u_past: Trajectory, y_past: Trajectory) -> PredictiveQp:
    """
    QP of one predictive-control step for a data-based prediction model.

    Without a g regularizer, g is restricted to the row space of the data
    matrix; this leaves the feasible (u, y) set unchanged.
    """
    _check_window(problem, u_past, y_past)
    T, Tbar, n_u, n_y = problem.horizon, problem.past_length, problem.n_u, problem.n_y
    if model.Hu_future.shape[0] != T * n_u or model.Hy_past.shape[0] != Tbar * n_y:
        raise InvalidInput("prediction model was built for a different horizon or past window")

    g_basis = None
    Hu_p, Hu_f, Hy_p, Hy_f = model.Hu_past, model.Hu_future, model.Hy_past, model.Hy_future
    if problem.lambda_g == 0.0:
        g_basis = linalg.row_space_basis(model.stacked)
        Hu_p, Hu_f, Hy_p, Hy_f = (m @ g_basis for m in (Hu_p, Hu_f, Hy_p, Hy_f))
    n_g = Hu_p.shape[1]

    layout = _Layout()
    layout.add("u", T * n_u)
    layout.add("y", T * n_y)
    layout.add("g", n_g)
    slack = problem.lambda_sigma is not None
    if slack:
        layout.add("sigma", Tbar * n_y)
    epigraphs, linear = [], []
    if problem.lambda_g > 0:
        layout.add("g_abs", n_g)
        epigraphs.append(("g", "g_abs"))
        linear.append(("g_abs", problem.lambda_g))
    if slack:
        layout.add("sigma_abs", Tbar * n_y)
        epigraphs.append(("sigma", "sigma_abs"))
        linear.append(("sigma_abs", problem.lambda_sigma))

    y_past_rows = [("g", Hy_p)] + ([("sigma", -np.eye(Tbar * n_y))] if slack else [])
    equalities = [
        ([("g", Hu_p)], u_past.vectorized()),
        ([("g", Hu_f), ("u", -np.eye(T * n_u))], np.zeros(T * n_u)),
        (y_past_rows, y_past.vectorized()),
        ([("g", Hy_f), ("y", -np.eye(T * n_y))], np.zeros(T * n_y)),
    ]
    qp = _assemble(problem, layout, equalities, epigraphs, linear)
    return PredictiveQp(qp, dict(layout.slices), T, n_u, n_y, g_basis)


def estimate_initial_state(plant: StateSpaceModel, u_past: Trajectory, y_past: Trajectory) -> np.ndarray:
    """
    State at the end of the past window: least-squares x_{-Tbar} from
    y_past = O x + T u_past, propagated through the window.
    """
    if plant.n_x == 0:
        raise InvalidInput("a static plant has no state to estimate")
    Tbar = u_past.length
    O = observability_matrix(plant, Tbar)
    Tm = toeplitz_matrix(plant, Tbar)
    x_start, _ = linalg.least_squares(O, y_past.vectorized() - Tm @ u_past.vectorized())
    states, _ = simulate(plant, x_start, u_past)
    return plant.A @ states.samples[-1] + plant.B @ u_past.samples[-1]


def build_model_qp(plant: StateSpaceModel, problem: PredictiveProblem,
                   u_past: Trajectory, y_past: Trajectory) -> PredictiveQp:
    """Same cost and constraints with the exact model as predictor."""
    _check_window(problem, u_past, y_past)
    T, n_u, n_y = problem.horizon, problem.n_u, problem.n_y
    if plant.n_u != n_u or plant.n_y != n_y:
        raise InvalidInput("plant dimensions do not match the cost weights")
    x0 = estimate_initial_state(plant, u_past, y_past)

    layout = _Layout()
    layout.add("u", T * n_u)
    layout.add("y", T * n_y)
    equalities = [
        ([("y", np.eye(T * n_y)), ("u", -toeplitz_matrix(plant, T))], observability_matrix(plant, T) @ x0),
    ]
    qp = _assemble(problem, layout, equalities, [], [])
    return PredictiveQp(qp, dict(layout.slices), T, n_u, n_y)


class EquivalenceReport(BaseModel):
    objective_frequency: float
    objective_time: float
    relative_gap: float
    first_input_frequency: List[float]
    first_input_time: List[float]
    input_gap: float
    equivalent: bool


def equivalence_check(
    spectra: SpectraCollection,
    time_data,
    problem: PredictiveProblem,
    u_past: Trajectory,
    y_past: Trajectory,
    tolerance: float = 1e-6,
) -> EquivalenceReport:
    """
    Solve the frequency-data and time-data QPs without regularization and
    with sigma pinned to zero, and compare optimal values and first inputs.

    `time_data` is a (u, y) pair of trajectories.
    """
    plain = problem.model_copy(update={"lambda_g": 0.0, "lambda_sigma": None})
    u_data, y_data = time_data
    freq_model = PredictionModel.from_spectra(spectra, plain.past_length, plain.horizon)
    time_model = PredictionModel.from_time_data(u_data, y_data, plain.past_length, plain.horizon)

    freq_qp = build_predictive_qp(freq_model, plain, u_past, y_past)
    time_qp = build_predictive_qp(time_model, plain, u_past, y_past)
    sol_f: QpSolution = qp_solve(freq_qp.qp)
    sol_t: QpSolution = qp_solve(time_qp.qp)

    u0_f = freq_qp.inputs(sol_f.x)[0]
    u0_t = time_qp.inputs(sol_t.x)[0]
    rel = abs(sol_f.objective - sol_t.objective) / max(1.0, abs(sol_f.objective), abs(sol_t.objective))
    du = float(np.max(np.abs(u0_f - u0_t)))
    equivalent = rel <= tolerance and du <= tolerance
    logger.info("equivalence check: objectives %.10g / %.10g, first-input gap %.2e -> %s",
                sol_f.objective, sol_t.objective, du, equivalent)
    return EquivalenceReport(
        objective_frequency=sol_f.objective,
        objective_time=sol_t.objective,
        relative_gap=rel,
        first_input_frequency=u0_f.tolist(),
        first_input_time=u0_t.tolist(),
        input_gap=du,
        equivalent=equivalent,
    )
