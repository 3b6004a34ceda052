import numpy as np
import pytest

from freqlemma.control.sdp import SdpProblem, sdp_solve
from freqlemma.errors import InvalidInput


def test_scalar_bound():
    problem = SdpProblem(C=(np.array([[1.0]]),), A=(np.array([[[1.0]]]),), b=[1.0])
    sol = sdp_solve(problem)
    assert sol.status == "optimal"
    assert sol.y[0] == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_largest_shift_is_smallest_eigenvalue(seed):
    g = np.random.default_rng(seed)
    W = g.standard_normal((4, 4))
    C = W + W.T
    problem = SdpProblem(C=(C,), A=(np.eye(4)[None],), b=[1.0])
    sol = sdp_solve(problem)
    assert sol.y[0] == pytest.approx(np.linalg.eigvalsh(C)[0], abs=1e-7)
    assert np.linalg.eigvalsh(sol.Z[0])[0] >= -1e-8


def test_two_blocks():
    # maximize y1 + y2 with y1 <= 2 and y2 <= 3 given in separate blocks
    C = (np.array([[2.0]]), np.array([[3.0]]))
    A = (np.array([[[1.0]], [[0.0]]]), np.array([[[0.0]], [[1.0]]]))
    sol = sdp_solve(SdpProblem(C=C, A=A, b=[1.0, 1.0]))
    np.testing.assert_allclose(sol.y, [2.0, 3.0], atol=1e-7)


def test_asymmetric_block_is_rejected():
    with pytest.raises(InvalidInput):
        SdpProblem(C=(np.array([[1.0, 2.0], [0.0, 1.0]]),), A=(np.zeros((1, 2, 2)),), b=[1.0])


def test_shape_mismatch_is_rejected():
    with pytest.raises(InvalidInput):
        SdpProblem(C=(np.eye(2),), A=(np.zeros((2, 3, 3)),), b=[1.0, 1.0])
