import numpy as np
import pytest
import scipy.optimize

from freqlemma.control.qp import QpProblem, qp_solve
from freqlemma.errors import Infeasible, InvalidInput


def test_unconstrained_minimum():
    sol = qp_solve(QpProblem(H=[[2.0]], f=[-6.0]))
    assert sol.x[0] == pytest.approx(3.0)
    assert sol.objective == pytest.approx(-9.0)


@pytest.mark.parametrize("bound, expected", [(5.0, 3.0), (2.0, 2.0)])
def test_upper_bound(bound, expected):
    sol = qp_solve(QpProblem(H=[[2.0]], f=[-6.0], C_in=[[1.0]], upper=[bound]))
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(expected, abs=1e-6)


def test_equality_with_active_bound():
    problem = QpProblem(H=2 * np.eye(2), f=np.zeros(2), A_eq=[[1.0, 1.0]], b_eq=[2.0],
                        C_in=[[1.0, 0.0]], upper=[0.5])
    np.testing.assert_allclose(qp_solve(problem).x, [0.5, 1.5], atol=1e-6)


def test_rows_with_equal_bounds_become_equalities():
    problem = QpProblem(H=2 * np.eye(2), f=np.zeros(2),
                        C_in=[[1.0, 1.0], [1.0, 0.0]], lower=[2.0, -np.inf], upper=[2.0, 0.5])
    np.testing.assert_allclose(qp_solve(problem).x, [0.5, 1.5], atol=1e-6)


def test_redundant_equalities_are_accepted():
    problem = QpProblem(H=np.eye(2), f=np.zeros(2), A_eq=[[1.0, 1.0], [2.0, 2.0]], b_eq=[2.0, 4.0])
    np.testing.assert_allclose(qp_solve(problem).x, [1.0, 1.0], atol=1e-8)


@pytest.mark.parametrize("seed", range(100))
def test_matches_reference_solver(seed):
    g = np.random.default_rng(seed)
    n = 6
    L = g.standard_normal((n, n))
    H = L @ L.T + 0.1 * np.eye(n)
    f = g.standard_normal(n)
    A = g.standard_normal((2, n))
    b = A @ g.uniform(-0.5, 0.5, n)
    problem = QpProblem(H=H, f=f, A_eq=A, b_eq=b, C_in=np.eye(n), lower=-np.ones(n), upper=np.ones(n))
    sol = qp_solve(problem)

    reference = scipy.optimize.minimize(
        lambda x: 0.5 * x @ H @ x + f @ x,
        np.zeros(n),
        jac=lambda x: H @ x + f,
        bounds=[(-1.0, 1.0)] * n,
        constraints=[{"type": "eq", "fun": lambda x: A @ x - b, "jac": lambda x: A}],
        method="SLSQP",
        options={"ftol": 1e-12, "maxiter": 500},
    )
    assert reference.success
    np.testing.assert_allclose(A @ sol.x, b, atol=1e-7)
    assert np.all(np.abs(sol.x) <= 1.0 + 1e-7)
    np.testing.assert_allclose(sol.x, reference.x, atol=1e-4)
    assert sol.objective <= reference.fun + 1e-7


def test_crossed_bounds_are_infeasible():
    with pytest.raises(Infeasible):
        qp_solve(QpProblem(H=[[1.0]], f=[0.0], C_in=[[1.0]], lower=[1.0], upper=[0.0]))


def test_exact_penalty_keeps_the_slack_at_zero():
    # x = 2 + s with |s| <= t and t weighted 1e5
    problem = QpProblem(
        H=np.diag([2.0, 0.0, 0.0]),
        f=[-2.0, 0.0, 1e5],
        A_eq=[[1.0, -1.0, 0.0]],
        b_eq=[2.0],
        C_in=[[0.0, 1.0, -1.0], [0.0, -1.0, -1.0]],
        upper=[0.0, 0.0],
    )
    sol = qp_solve(problem)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.x, [2.0, 0.0, 0.0], atol=1e-6)


def test_inequalities_contradicting_equalities_are_infeasible():
    problem = QpProblem(H=np.eye(2), f=np.zeros(2), A_eq=[[1.0, -1.0]], b_eq=[0.0],
                        C_in=np.eye(2), lower=[-np.inf, 5.0], upper=[0.0, np.inf])
    with pytest.raises(Infeasible):
        qp_solve(problem)


def test_inconsistent_equalities_are_infeasible():
    problem = QpProblem(H=np.eye(2), f=np.zeros(2), A_eq=[[1.0, 1.0], [1.0, 1.0]], b_eq=[1.0, 2.0])
    with pytest.raises(Infeasible):
        qp_solve(problem)


def test_unbounded_objective_is_reported():
    with pytest.raises(Infeasible):
        qp_solve(QpProblem(H=[[0.0]], f=[1.0]))


def test_indefinite_hessian_is_rejected():
    with pytest.raises(InvalidInput):
        QpProblem(H=[[1.0, 0.0], [0.0, -1.0]], f=[0.0, 0.0])


def test_dimension_mismatch_is_rejected():
    with pytest.raises(InvalidInput):
        QpProblem(H=np.eye(2), f=[0.0])
