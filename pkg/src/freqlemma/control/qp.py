"""
Dense convex QP solver (Mehrotra predictor-corrector interior point).

    minimize    1/2 x'Hx + f'x
    subject to  A x = b,   lower <= C x <= upper

Infinite bounds are dropped, rows with lower == upper become equalities,
and the equalities are reduced to independent rows before the
interior-point loop starts. The objective is rescaled by a power of two so
that its largest coefficient is of order one.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from .. import linalg
from ..errors import Infeasible, InvalidInput, MaxIterations, NumericalFailure


logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-8
MAX_ITERATIONS = 200
REGULARIZATION = 1e-10
STEP_FRACTION = 0.995
REFINEMENT_STEPS = 2
# every product s_i z_i stays above CENTRALITY times their mean
CENTRALITY = 1e-6
STALL_WINDOW = 30
DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    C_in: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = H.shape[0]
        if H.shape != (n, n):
            raise InvalidInput(f"H must be square, got {H.shape}")
        if not np.allclose(H, H.T, atol=1e-12 * max(1.0, np.abs(H).max())):
            raise InvalidInput("H must be symmetric")
        H = 0.5 * (H + H.T)
        if n and np.linalg.eigvalsh(H)[0] < -1e-10 * max(1.0, np.abs(H).max()):
            raise InvalidInput("H must be positive semidefinite")
        f = np.asarray(self.f, dtype=float).reshape(-1)
        if f.size != n:
            raise InvalidInput(f"f needs {n} entries, got {f.size}")

        A = np.zeros((0, n)) if self.A_eq is None else np.atleast_2d(np.asarray(self.A_eq, dtype=float))
        b = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).reshape(-1)
        if A.shape[1] != n or b.size != A.shape[0]:
            raise InvalidInput(f"equality constraints A{A.shape} b{b.shape} do not fit {n} variables")

        C = np.zeros((0, n)) if self.C_in is None else np.atleast_2d(np.asarray(self.C_in, dtype=float))
        m = C.shape[0]
        lo = np.full(m, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.full(m, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).reshape(-1)
        if C.shape[1] != n or lo.size != m or hi.size != m:
            raise InvalidInput(f"inequality constraints C{C.shape} do not fit {n} variables")
        for name, value in (("H", H), ("f", f), ("A_eq", A), ("b_eq", b), ("C_in", C)):
            if not np.all(np.isfinite(value)):
                raise InvalidInput(f"{name} has non-finite entries")

        for name, value in (("H", H), ("f", f), ("A_eq", A), ("b_eq", b), ("C_in", C), ("lower", lo), ("upper", hi)):
            object.__setattr__(self, name, value)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.H @ x + self.f @ x)


class QpSolution(NamedTuple):
    x: np.ndarray
    objective: float
    status: str
    iterations: int


def _standard_form(p: QpProblem):
    """Equalities (A, b) and one-sided inequalities G x <= h."""
    if np.any(p.lower > p.upper):
        raise Infeasible("some inequality has lower bound above upper bound")
    fixed = np.isfinite(p.lower) & (p.lower == p.upper)
    A = np.vstack([p.A_eq, p.C_in[fixed]])
    b = np.concatenate([p.b_eq, p.upper[fixed]])

    up = np.isfinite(p.upper) & ~fixed
    lo = np.isfinite(p.lower) & ~fixed
    G = np.vstack([p.C_in[up], -p.C_in[lo]])
    h = np.concatenate([p.upper[up], -p.lower[lo]])

    if A.shape[0]:
        x_ls, residual = linalg.least_squares(A, b)
        if residual > 1e-9 * max(1.0, float(np.linalg.norm(b))):
            raise Infeasible(f"equality constraints are inconsistent (residual {residual:.3e})")
        u, s, v = linalg.svd(A)
        r = int(np.sum(s > linalg.default_tolerance(s, A.shape)))
        # same affine set, independent and well-conditioned rows
        A = v[:, :r].T * s[:r, None]
        b = u[:, :r].T @ b
    return A, b, G, h


class _Kkt:
    """
    Reduced Newton system [[H + G'WG, A'], [A, 0]]. The factorization is of
    a slightly regularized copy; iterative refinement against the exact
    matrix removes the regularization error from the solution.
    """

    def __init__(self, H: np.ndarray, A: np.ndarray, G: np.ndarray, W: np.ndarray):
        n, m = H.shape[0], A.shape[0]
        K = np.zeros((n + m, n + m))
        K[:n, :n] = H + (G.T * W) @ G
        K[:n, n:] = A.T
        K[n:, :n] = A
        regularized = K.copy()
        regularized[:n, :n] += REGULARIZATION * np.eye(n)
        regularized[n:, n:] -= REGULARIZATION * np.eye(m)
        try:
            self.factor = scipy.linalg.lu_factor(regularized, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise NumericalFailure(f"KKT factorization failed: {exc}") from exc
        self.K = K
        self.n = n

    def solve(self, rhs_x: np.ndarray, rhs_y: np.ndarray):
        rhs = np.concatenate([rhs_x, rhs_y])
        sol = scipy.linalg.lu_solve(self.factor, rhs)
        for _ in range(REFINEMENT_STEPS):
            sol = sol + scipy.linalg.lu_solve(self.factor, rhs - self.K @ sol)
        if not np.all(np.isfinite(sol)):
            raise NumericalFailure("KKT solve produced non-finite values")
        return sol[:self.n], sol[self.n:]


def qp_solve(problem: QpProblem, tolerance: float = DEFAULT_TOLERANCE, max_iterations: int = MAX_ITERATIONS) -> QpSolution:
    """
    Status is "optimal", or "inaccurate" when the iterations stall at an
    accuracy between `tolerance` and its square root. Problems whose
    constraints admit no point raise Infeasible.
    """
    A, b, G, h = _standard_form(problem)
    if G.shape[0] == 0:
        x = _equality_qp(problem.H, problem.f, A, b)
        return QpSolution(x, problem.objective(x), "optimal", 1)

    try:
        return _interior_point(problem, A, b, G, h, tolerance, max_iterations)
    except (MaxIterations, NumericalFailure) as exc:
        if not _has_feasible_point(A, b, G, h):
            raise Infeasible("the constraints admit no feasible point") from exc
        raise


def _interior_point(problem: QpProblem, A, b, G, h, tolerance: float, max_iterations: int) -> QpSolution:
    scale = _objective_scale(problem.H, problem.f)
    H, f = scale * problem.H, scale * problem.f
    p = G.shape[0]

    # start from the equality-constrained least-squares point, shifted inside
    x, y = _Kkt(H, A, G, np.ones(p)).solve(-f + G.T @ h, b)
    s = _shift_positive(h - G @ x)
    z = _shift_positive(G @ x - h)

    scale_d = 1.0 + np.abs(f).max(initial=0.0)
    scale_p = 1.0 + np.abs(b).max(initial=0.0)
    scale_g = 1.0 + np.abs(h).max(initial=0.0)

    best_merit, best_x, best_it = np.inf, x, 0
    progress_merit, progress_it = np.inf, 0
    for it in range(max_iterations + 1):
        r_d = H @ x + f + A.T @ y + G.T @ z
        r_p = A @ x - b
        r_g = G @ x + s - h
        mu = float(s @ z) / p
        obj = float(0.5 * x @ H @ x + f @ x)

        infeasibility = max(np.abs(r_d).max() / scale_d,
                            np.abs(r_p).max(initial=0.0) / scale_p,
                            np.abs(r_g).max() / scale_g)
        gap = mu / (1.0 + abs(obj))
        merit = max(infeasibility, gap)
        if merit < best_merit:
            best_merit, best_x, best_it = merit, x.copy(), it
        if merit <= tolerance:
            logger.debug("QP converged in %d iterations, objective %.10g", it, obj / scale)
            return QpSolution(x, problem.objective(x), "optimal", it)

        if merit < 0.9 * progress_merit:
            progress_merit, progress_it = merit, it
        elif it - progress_it >= STALL_WINDOW:
            logger.warning("QP stalled at iteration %d: residual %.2e, gap %.2e", it, infeasibility, gap)
            break
        if it == max_iterations:
            break
        if np.abs(z).max() > DIVERGENCE_LIMIT * scale_d:
            logger.debug("QP dual iterates diverge at iteration %d", it)
            break

        kkt = _Kkt(H, A, G, z / s)

        def direction(r_sz):
            rhs_x = -r_d - G.T @ ((z * r_g - r_sz) / s)
            dx, dy = kkt.solve(rhs_x, -r_p)
            ds = -r_g - G @ dx
            dz = (-r_sz - z * ds) / s
            return dx, dy, ds, dz

        # predictor
        dx_a, dy_a, ds_a, dz_a = direction(s * z)
        alpha_a = min(_max_step(s, ds_a), _max_step(z, dz_a))
        mu_aff = float((s + alpha_a * ds_a) @ (z + alpha_a * dz_a)) / p
        sigma = (mu_aff / mu) ** 3
        if gap < 1e-2 * infeasibility:
            # complementarity ran ahead of feasibility: recentre
            sigma = max(sigma, 0.5)

        # corrector
        dx, dy, ds, dz = direction(s * z + ds_a * dz_a - sigma * mu)
        alpha = min(1.0, STEP_FRACTION * min(_max_step(s, ds), _max_step(z, dz)))
        alpha = _central_step(s, ds, z, dz, alpha)

        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz
        if it % 25 == 0:
            logger.debug("QP iteration %d: mu %.3e, residual %.3e, step %.3f", it, mu, infeasibility, alpha)

    if best_merit <= np.sqrt(tolerance):
        logger.warning("QP stopped at reduced accuracy %.2e (target %.2e)", best_merit, tolerance)
        return QpSolution(best_x, problem.objective(best_x), "inaccurate", best_it)
    raise MaxIterations(max_iterations, f"QP did not converge (best accuracy {best_merit:.2e})")


def _objective_scale(H: np.ndarray, f: np.ndarray) -> float:
    """Power of two bringing the largest objective coefficient into (0.5, 1]."""
    largest = max(np.abs(H).max(initial=0.0), np.abs(f).max(initial=0.0))
    if largest <= 1.0:
        return 1.0
    return float(2.0 ** -np.ceil(np.log2(largest)))


def _shift_positive(v: np.ndarray) -> np.ndarray:
    """v when it is safely positive, otherwise v shifted so its minimum is 1."""
    lowest = float(v.min())
    if lowest > 1e-8 * max(1.0, float(np.abs(v).max())):
        return v
    return v + (1.0 - lowest)


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    """Largest alpha <= 1 keeping v + alpha dv >= 0."""
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _central_step(s, ds, z, dz, alpha: float) -> float:
    """
    Shorten alpha until no product s_i z_i falls below CENTRALITY times the
    mean (or below the current ratio, when the iterate is already off-centre).
    """
    current = s * z
    ratio = min(CENTRALITY, float(current.min() / current.mean()))
    for _ in range(60):
        products = (s + alpha * ds) * (z + alpha * dz)
        if products.min() >= ratio * products.mean():
            break
        alpha *= 0.8
    return alpha


def _has_feasible_point(A, b, G, h) -> bool:
    """Phase-one feasibility LP (HiGHS)."""
    n = G.shape[1]
    equalities = {"A_eq": A, "b_eq": b} if A.shape[0] else {}
    result = scipy.optimize.linprog(
        np.zeros(n), A_ub=G, b_ub=h, bounds=[(None, None)] * n, method="highs", **equalities
    )
    return result.status != 2


def _equality_qp(H, f, A, b) -> np.ndarray:
    """Direct KKT solve when there are no inequalities."""
    n, m = H.shape[0], A.shape[0]
    K = np.block([[H, A.T], [A, np.zeros((m, m))]])
    rhs = np.concatenate([-f, b])
    sol, residual = linalg.least_squares(K, rhs)
    if residual > 1e-8 * max(1.0, float(np.linalg.norm(rhs))):
        raise Infeasible("objective is unbounded below on the equality-constrained set")
    return sol[:n]
