"""
Infinite-horizon LQR from input-state spectra.

The value matrix P is the trace-maximal solution of

    S(P) = X0' (Q - P) X0 + X1' P X1 + U' R U >= 0,   P >= 0,

where X0 / X1 are the state data matrix and its one-step shift and U the
input data matrix, all in real form. The gain follows as K = U X0^dagger,
with X0^dagger a right inverse of X0 whose columns lie in ker S(P).
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .. import linalg
from ..core import SpectraCollection, build_data_matrix
from ..errors import DegenerateData, InvalidInput, MaxIterations
from ..excitation import input_state_rank
from .sdp import SdpProblem, SdpSolution, sdp_solve


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LqrWeights:
    """Stage cost x'Qx + u'Ru with Q >= 0 and R > 0."""
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        for name, W in (("Q", Q), ("R", R)):
            if W.shape[0] != W.shape[1]:
                raise InvalidInput(f"{name} must be square")
            if np.abs(W - W.T).max() > 1e-12 * max(1.0, np.abs(W).max()):
                raise InvalidInput(f"{name} must be symmetric")
        if np.linalg.eigvalsh(Q)[0] < -1e-10:
            raise InvalidInput("Q must be positive semidefinite")
        if np.linalg.eigvalsh(R)[0] <= 0:
            raise InvalidInput("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


class LqrResult(NamedTuple):
    K: np.ndarray
    P: np.ndarray
    right_inverse: np.ndarray
    sdp: SdpSolution


def symmetric_basis(n: int) -> np.ndarray:
    """E_k for the upper-triangle entries of an n x n symmetric matrix."""
    rows, cols = np.triu_indices(n)
    basis = np.zeros((rows.size, n, n))
    basis[np.arange(rows.size), rows, cols] = 1.0
    basis[np.arange(rows.size), cols, rows] = 1.0
    return basis


def lqr_sdp(X0: np.ndarray, X1: np.ndarray, U: np.ndarray, weights: LqrWeights) -> SdpProblem:
    """
    maximize tr P subject to S(P) >= 0, P >= 0, posed on the row space of
    [X0; X1; U] (S vanishes on its orthogonal complement).
    """
    n_x = X0.shape[0]
    V = linalg.row_space_basis(np.vstack([X0, X1, U]))
    X0v, X1v, Uv = X0 @ V, X1 @ V, U @ V

    basis = symmetric_basis(n_x)
    constant = X0v.T @ weights.Q @ X0v + Uv.T @ weights.R @ Uv
    # Z = C - sum_k y_k A_k with S(P) = C - X0'PX0 + X1'PX1
    coeff_s = np.einsum("ai,kab,bj->kij", X0v, basis, X0v) - np.einsum("ai,kab,bj->kij", X1v, basis, X1v)
    coeff_p = -basis
    b = np.array([np.trace(E) for E in basis])
    return SdpProblem(C=(constant, np.zeros((n_x, n_x))), A=(coeff_s, coeff_p), b=b)


def lmi_matrix(X0, X1, U, weights: LqrWeights, P: np.ndarray) -> np.ndarray:
    """S(P) on the full data coordinates."""
    return X0.T @ (weights.Q - P) @ X0 + X1.T @ P @ X1 + U.T @ weights.R @ U


def right_inverse(S: np.ndarray, X0: np.ndarray, n_u: int) -> np.ndarray:
    """
    X0^dagger = K_perp (X0 K_perp)^+ with K_perp spanning ker S.

    At the optimum S has rank n_u; the kernel threshold sits in the middle
    of that singular-value gap (geometric mean).
    """
    s = linalg.singular_values(S)
    if s.size <= n_u:
        raise DegenerateData("data matrix too small for a kernel of S(P)")
    threshold = np.sqrt(s[n_u - 1] * s[n_u]) if n_u else s[0] * 1e-8
    gap = s[n_u] / s[n_u - 1] if s[n_u - 1] > 0 else 1.0
    if gap > 1e-4:
        logger.warning("weak rank gap in S(P): sigma_%d/sigma_%d = %.2e", n_u + 1, n_u, gap)
    kernel = linalg.kernel_basis(S, threshold)
    projected = X0 @ kernel
    if linalg.rank(projected) < X0.shape[0]:
        raise DegenerateData(
            f"ker S(P) is too small to invert the state data (rank {linalg.rank(projected)} < {X0.shape[0]})"
        )
    return kernel @ linalg.pseudo_inverse(projected)


def dd_lqr(
    spectra: SpectraCollection,
    weights: LqrWeights,
    tolerance: float = 1e-10,
    initial_scale: float = 10.0,
) -> LqrResult:
    """State-feedback gain K (u = K x) and value matrix P from input-state spectra."""
    if spectra.states is None:
        raise InvalidInput("LQR from data needs state spectra")
    n_x, n_u = spectra.n_x, spectra.n_u
    if weights.Q.shape != (n_x, n_x) or weights.R.shape != (n_u, n_u):
        raise InvalidInput(f"weights must be {n_x}x{n_x} and {n_u}x{n_u}")

    report = input_state_rank(spectra, 1)
    if not report.achieved:
        raise DegenerateData(
            f"input/state data has rank {report.rank_found} < {report.rank_required}"
        )

    states = build_data_matrix(2, spectra, ("state",)).real_form
    X0, X1 = states[:n_x], states[n_x:]
    U = build_data_matrix(1, spectra, ("input",)).real_form

    problem = lqr_sdp(X0, X1, U, weights)
    solution = sdp_solve(problem, tolerance=tolerance, initial_scale=initial_scale)
    P = np.tensordot(solution.y, symmetric_basis(n_x), axes=1)

    S = lmi_matrix(X0, X1, U, weights, P)
    X0_dagger = right_inverse(S, X0, n_u)
    K = U @ X0_dagger
    if solution.status != "optimal":
        logger.warning("LQR SDP ended %s (gap %.2e): P and K are approximate",
                       solution.status, solution.gap)
    logger.info("data-driven LQR: trace P = %.10g after %d SDP iterations (%s)",
                float(np.trace(P)), solution.iterations, solution.status)
    return LqrResult(K=K, P=P, right_inverse=X0_dagger, sdp=solution)


def dare_iterate(A, B, Q, R, tol: float = 1e-12, max_iters: int = 100000) -> np.ndarray:
    """
    Model-based DARE solution by the fixed-point iteration from P0 = Q:

        P+ = Q + A'PA - A'PB (R + B'PB)^{-1} B'PA
    """
    A, B, Q, R = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, Q, R))
    P = Q.copy()
    for _ in range(max_iters):
        G = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ G
        if np.max(np.abs(P_next - P)) < tol * max(1.0, np.abs(P_next).max()):
            return P_next
        P = P_next
    raise MaxIterations(max_iters, "DARE iteration did not converge")


def model_lqr(A, B, Q, R, P: Optional[np.ndarray] = None) -> np.ndarray:
    """Gain K with u = K x for the model (A, B); P defaults to the DARE solution."""
    A, B, R = (np.atleast_2d(np.asarray(m, dtype=float)) for m in (A, B, R))
    if P is None:
        P = dare_iterate(A, B, Q, R)
    return -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
