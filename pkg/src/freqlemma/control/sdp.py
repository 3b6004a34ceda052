"""
Small dense SDP solver (primal-dual interior point, HKM direction with a
Mehrotra predictor-corrector).

Solves the pair

    minimize   sum_j tr(C_j X_j)            maximize   b'y
    subject to sum_j tr(A_ij X_j) = b_i     subject to Z_j = C_j - sum_i y_i A_ij >= 0
               X_j >= 0

over a list of symmetric blocks j. Callers usually care about the dual
side: a linear matrix inequality in y.
"""
import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..errors import Infeasible, InvalidInput, MaxIterations, NumericalFailure


logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-10
MAX_ITERATIONS = 100
STEP_FRACTION = 0.98


@dataclass(frozen=True)
class SdpProblem:
    """
    C: one symmetric constant matrix per block.
    A: A[j] has shape (m, d_j, d_j), the coefficient of y_i in block j.
    b: objective vector (length m) of the maximization.
    """
    C: Tuple[np.ndarray, ...]
    A: Tuple[np.ndarray, ...]
    b: np.ndarray

    def __post_init__(self):
        C = tuple(np.atleast_2d(np.asarray(c, dtype=float)) for c in self.C)
        A = tuple(np.asarray(a, dtype=float) for a in self.A)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if len(C) != len(A) or not C:
            raise InvalidInput("need one coefficient stack per constant block")
        for j, (c, a) in enumerate(zip(C, A)):
            d = c.shape[0]
            if c.shape != (d, d) or a.shape != (b.size, d, d):
                raise InvalidInput(f"block {j}: C{c.shape} and A{a.shape} do not fit m={b.size}")
            if not (np.allclose(c, c.T) and np.allclose(a, a.transpose(0, 2, 1))):
                raise InvalidInput(f"block {j} is not symmetric")
        object.__setattr__(self, "C", tuple(0.5 * (c + c.T) for c in C))
        object.__setattr__(self, "A", tuple(0.5 * (a + a.transpose(0, 2, 1)) for a in A))
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.b.size

    def slack(self, y: np.ndarray) -> List[np.ndarray]:
        return [c - np.tensordot(y, a, axes=1) for c, a in zip(self.C, self.A)]


class SdpSolution(NamedTuple):
    y: np.ndarray
    X: List[np.ndarray]
    Z: List[np.ndarray]
    status: str
    iterations: int
    gap: float


def _a_map(A: Sequence[np.ndarray], X: Sequence[np.ndarray]) -> np.ndarray:
    """(tr(A_i X))_i summed over blocks."""
    return sum(np.einsum("iab,ab->i", a, x) for a, x in zip(A, X))


def _max_step(X: np.ndarray, dX: np.ndarray) -> float:
    """Largest alpha with X + alpha dX >= 0, for X > 0."""
    try:
        lam = scipy.linalg.eigh(dX, X, eigvals_only=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"iterate lost positive definiteness: {exc}") from exc
    lmin = float(lam[0])
    return np.inf if lmin >= 0 else -1.0 / lmin


def sdp_solve(
    problem: SdpProblem,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
    initial_scale: float = 10.0,
) -> SdpSolution:
    """
    Infeasible-start interior point from X = Z = xi I, y = 0, where xi is
    `initial_scale` times the magnitude of the data.
    """
    C, A, b = problem.C, problem.A, problem.b
    sizes = [c.shape[0] for c in C]
    n_total = sum(sizes)
    data_scale = max(1.0, max(np.abs(c).max() for c in C), max(np.abs(a).max(initial=0.0) for a in A))
    xi = initial_scale * data_scale

    X = [xi * np.eye(d) for d in sizes]
    Z = [xi * np.eye(d) for d in sizes]
    y = np.zeros(problem.m)

    norm_b = 1.0 + np.linalg.norm(b)
    norm_c = 1.0 + np.sqrt(sum(np.sum(c * c) for c in C))
    best = None

    for it in range(1, max_iterations + 1):
        Zs = problem.slack(y)
        R_d = [zs - z for zs, z in zip(Zs, Z)]
        R_p = b - _a_map(A, X)
        mu = sum(np.sum(x * z) for x, z in zip(X, Z)) / n_total
        pobj = sum(np.sum(c * x) for c, x in zip(C, X))
        dobj = float(b @ y)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        pinf = np.linalg.norm(R_p) / norm_b
        dinf = np.sqrt(sum(np.sum(r * r) for r in R_d)) / norm_c

        if best is None or max(gap, pinf, dinf) < best[0]:
            best = (max(gap, pinf, dinf), y.copy(), [x.copy() for x in X], [z.copy() for z in Z], it - 1, gap)
        if gap <= tolerance and pinf <= tolerance and dinf <= tolerance:
            logger.debug("SDP converged in %d iterations, objective %.12g", it - 1, dobj)
            return SdpSolution(y, X, Z, "optimal", it - 1, gap)
        if np.linalg.norm(y) > 1e12 * (1.0 + data_scale):
            raise Infeasible("dual iterates diverge; the primal problem looks infeasible")

        try:
            Zinv = [np.linalg.inv(z) for z in Z]
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"dual slack became singular: {exc}") from exc

        # Schur complement M_ij = sum_blocks tr(A_i X A_j Z^-1)
        XAZ = [x @ a @ zi for a, x, zi in zip(A, X, Zinv)]
        schur = sum(np.einsum("iab,jab->ij", a, t) for a, t in zip(A, XAZ))
        try:
            schur_factor = scipy.linalg.lu_factor(schur)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise NumericalFailure(f"Schur complement factorization failed: {exc}") from exc
        base_rhs = b + _a_map(A, [x @ r @ zi for x, r, zi in zip(X, R_d, Zinv)])

        def direction(sigma_mu, second_order):
            rhs = base_rhs - _a_map(A, [sigma_mu * zi for zi in Zinv])
            if second_order is not None:
                rhs = rhs + _a_map(A, [dxa @ dza @ zi for (dxa, dza), zi in zip(second_order, Zinv)])
            dy = scipy.linalg.lu_solve(schur_factor, rhs)
            dZ = [r - np.tensordot(dy, a, axes=1) for r, a in zip(R_d, A)]
            dX = []
            for j, (x, dz, zi) in enumerate(zip(X, dZ, Zinv)):
                d = sigma_mu * zi - x - x @ dz @ zi
                if second_order is not None:
                    d = d - second_order[j][0] @ second_order[j][1] @ zi
                dX.append(0.5 * (d + d.T))
            return dy, dX, dZ

        def steps(dX, dZ):
            ap = min(_max_step(x, dx) for x, dx in zip(X, dX))
            ad = min(_max_step(z, dz) for z, dz in zip(Z, dZ))
            return min(1.0, STEP_FRACTION * ap), min(1.0, STEP_FRACTION * ad)

        # predictor
        dy_a, dX_a, dZ_a = direction(0.0, None)
        ap, ad = steps(dX_a, dZ_a)
        mu_aff = sum(np.sum((x + ap * dx) * (z + ad * dz))
                     for x, dx, z, dz in zip(X, dX_a, Z, dZ_a)) / n_total
        sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.0

        # corrector
        dy, dX, dZ = direction(sigma * mu, list(zip(dX_a, dZ_a)))
        ap, ad = steps(dX, dZ)

        X = [x + ap * dx for x, dx in zip(X, dX)]
        Z = [z + ad * dz for z, dz in zip(Z, dZ)]
        y = y + ad * dy
        X = [0.5 * (x + x.T) for x in X]
        Z = [0.5 * (z + z.T) for z in Z]

        logger.debug("SDP iteration %d: gap %.2e pinf %.2e dinf %.2e steps (%.3f, %.3f)",
                     it, gap, pinf, dinf, ap, ad)
        if max(ap, ad) < 1e-12:
            logger.warning("SDP steps stalled at iteration %d (gap %.2e)", it, gap)
            break

    score, y_b, X_b, Z_b, it_b, gap_b = best
    if score <= np.sqrt(tolerance):
        logger.warning("SDP stopped at reduced accuracy %.2e (target %.2e)", score, tolerance)
        return SdpSolution(y_b, X_b, Z_b, "inaccurate", it_b, gap_b)
    raise MaxIterations(max_iterations, f"SDP did not converge (best accuracy {score:.2e})")
