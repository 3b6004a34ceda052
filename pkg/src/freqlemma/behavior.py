"""
Trajectory membership, data-driven simulation and frequency-response
evaluation, all computed from frequency-domain data alone.

Conjugate-structured coefficient vectors are solved for in real
coordinates g (see `core.to_real_coordinates`); only the frequency-response
evaluation works with a free complex coefficient vector.
"""
import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import linalg
from .core import SpectraCollection, Trajectory, build_data_matrix, from_real_coordinates, vandermonde_column
from .errors import EvaluationFailed, InconsistentPast, InvalidInput, WeakDataWarning
from .excitation import is_cpe


logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-6
# singular values below this fraction of the largest count as kernel when
# checking whether Y_z is pinned down
UNIQUENESS_TOLERANCE = 1e-10


@dataclass(frozen=True)
class GVector:
    """Real coordinates g = (G0, 2 Re G1, -2 Im G1) of G = (G0, G1, conj G1)."""
    g: np.ndarray
    M: int
    E: int = 1

    @property
    def G(self) -> np.ndarray:
        return from_real_coordinates(self.g, self.M, self.E)

    @property
    def G0(self) -> np.ndarray:
        return self.g[:self.E].copy()

    @property
    def G1(self) -> np.ndarray:
        return self.G[self.E:self.E * self.M]


@dataclass(frozen=True)
class BehaviorQuery:
    """
    Past window u/y over [-L0, -1] and future inputs over [0, L-1].
    With L0 = 0 the past trajectories are None.
    """
    u_future: Trajectory
    u_past: Optional[Trajectory] = None
    y_past: Optional[Trajectory] = None

    def __post_init__(self):
        if (self.u_past is None) != (self.y_past is None):
            raise InvalidInput("past inputs and past outputs must be given together")
        if self.u_past is not None and self.u_past.length != self.y_past.length:
            raise InvalidInput("past inputs and outputs must have the same length")

    @property
    def L0(self) -> int:
        return 0 if self.u_past is None else self.u_past.length

    @property
    def L(self) -> int:
        return self.u_future.length


class MembershipResult(NamedTuple):
    is_member: bool
    g: GVector
    residual: float


class SimulationResult(NamedTuple):
    y_future: Trajectory
    y_full: Trajectory
    g: GVector
    residual: float


def _check_excitation(spectra: SpectraCollection, order: int, state_order: Optional[int]) -> None:
    """Warn when the input data is not collectively exciting of the needed order."""
    needed = order + (state_order or 0)
    limit = spectra.E * (2 * spectra.grid.M - 1)
    if needed > limit:
        warnings.warn(
            f"data holds {limit} real columns, too few for excitation of order {needed}",
            WeakDataWarning,
            stacklevel=3,
        )
        return
    report = is_cpe(spectra.inputs, needed)
    if not report.achieved:
        warnings.warn(
            f"input data is not collectively persistently exciting of order {needed} "
            f"(rank {report.rank_found} < {report.rank_required})",
            WeakDataWarning,
            stacklevel=3,
        )


def is_trajectory(
    spectra: SpectraCollection,
    u: Trajectory,
    y: Trajectory,
    tolerance: float = DEFAULT_TOLERANCE,
    state_order: Optional[int] = None,
) -> MembershipResult:
    """
    Whether (u, y) of length L lies in the span of the depth-L data matrix.
    """
    if u.length != y.length:
        raise InvalidInput("u and y must have the same length")
    if u.channel_count != spectra.n_u or y.channel_count != spectra.n_y:
        raise InvalidInput("trajectory channel counts do not match the dataset")
    L = u.length
    _check_excitation(spectra, L, state_order)

    dm = build_data_matrix(L, spectra, ("input", "output"))
    rhs = np.concatenate([u.vectorized(), y.vectorized()])
    g, residual = linalg.least_squares(dm.real_form, rhs)
    ok = residual <= tolerance * max(1.0, float(np.linalg.norm(rhs)))
    logger.debug("membership test L=%d residual %.3e -> %s", L, residual, ok)
    return MembershipResult(ok, GVector(g, spectra.grid.M, spectra.E), residual)


def dd_simulate(
    spectra: SpectraCollection,
    query: BehaviorQuery,
    tolerance: float = DEFAULT_TOLERANCE,
    state_order: Optional[int] = None,
) -> SimulationResult:
    """
    Predict y over [0, L-1] from the past window and the future inputs.

    g solves [U_{L0+L}; Y_{L0}] g = [u_past; u_future; y_past] (minimum
    norm), and the prediction is Y_{L0+L} g. Returns the future block and the
    full window [-L0, L-1].
    """
    L0, L = query.L0, query.L
    if query.u_future.channel_count != spectra.n_u:
        raise InvalidInput("future input channel count does not match the dataset")
    if L0 and query.y_past.channel_count != spectra.n_y:
        raise InvalidInput("past output channel count does not match the dataset")
    _check_excitation(spectra, L0 + L, state_order)

    u_data = build_data_matrix(L0 + L, spectra, ("input",)).real_form
    y_data = build_data_matrix(L0 + L, spectra, ("output",)).real_form
    n_y = spectra.n_y

    if L0:
        lhs = np.vstack([u_data, y_data[:L0 * n_y]])
        rhs = np.concatenate([
            query.u_past.vectorized(), query.u_future.vectorized(), query.y_past.vectorized(),
        ])
    else:
        lhs = u_data
        rhs = query.u_future.vectorized()

    g, residual = linalg.least_squares(lhs, rhs)
    limit = tolerance * max(1.0, float(np.linalg.norm(rhs)))
    if residual > limit:
        raise InconsistentPast(residual, limit)

    y_full = Trajectory.from_vector(y_data @ g, n_y, start=-L0)
    y_future = y_full.window(0, L - 1)
    logger.debug("data-driven simulation L0=%d L=%d residual %.3e", L0, L, residual)
    return SimulationResult(y_future, y_full, GVector(g, spectra.grid.M, spectra.E), residual)


def freq_response_eval(
    spectra: SpectraCollection,
    z: complex,
    U_z,
    L0: int,
    tolerance: float = DEFAULT_TOLERANCE,
    state_order: Optional[int] = None,
) -> np.ndarray:
    """
    Output amplitude Y_z of the exponential trajectory (z^k U_z, z^k Y_z).

    Solves

        [ 0              Psi_U ] [Y_z]   [W(z) (x) U_z]
        [ -W(z) (x) I    Psi_Y ] [ G ] = [     0      ]

    with W = W_{L0+1} and G a free complex vector.
    """
    U_z = np.asarray(U_z, dtype=complex).reshape(-1)
    if U_z.size != spectra.n_u:
        raise InvalidInput(f"U_z needs {spectra.n_u} entries, got {U_z.size}")
    if L0 < 0:
        raise InvalidInput("L0 must be >= 0")
    _check_excitation(spectra, L0 + 1, state_order)

    depth = L0 + 1
    dm = build_data_matrix(depth, spectra, ("input", "output"))
    psi_u = dm.complex_form[dm.row_slices["input"]]
    psi_y = dm.complex_form[dm.row_slices["output"]]
    n_y = spectra.n_y
    w = vandermonde_column(depth, z)

    lhs = np.block([
        [np.zeros((psi_u.shape[0], n_y), dtype=complex), psi_u],
        [-np.kron(w[:, None], np.eye(n_y)), psi_y],
    ])
    rhs = np.concatenate([np.kron(w, U_z), np.zeros(psi_y.shape[0], dtype=complex)])

    solution, residual = linalg.least_squares(lhs, rhs)
    limit = tolerance * max(1.0, float(np.linalg.norm(rhs)))
    if residual > limit:
        raise EvaluationFailed(
            f"no exponential trajectory at z = {z} (residual {residual:.3e} > {limit:.3e}); "
            "z may be an eigenvalue or the data insufficient"
        )

    smax = linalg.singular_values(lhs)[0]
    kernel = linalg.kernel_basis(lhs, UNIQUENESS_TOLERANCE * smax)
    if kernel.shape[1] and np.linalg.norm(kernel[:n_y]) > 1e-6:
        raise EvaluationFailed(
            f"Y_z is not unique at z = {z}; z may be an eigenvalue or L0 too small"
        )
    return solution[:n_y]


def transfer_matrix_at(
    spectra: SpectraCollection,
    z: complex,
    L0: int,
    tolerance: float = DEFAULT_TOLERANCE,
    state_order: Optional[int] = None,
) -> np.ndarray:
    """H(z), column i evaluated with U_z = e_i."""
    eye = np.eye(spectra.n_u)
    columns = [
        freq_response_eval(spectra, z, eye[i], L0, tolerance, state_order)
        for i in range(spectra.n_u)
    ]
    return np.column_stack(columns)
