import cvxpy as cp
import numpy as np
import pytest

from core.config import SdpConfig
from core.conic import INFEASIBLE, OPTIMAL, SdpProblem, check_kkt, require_optimal, solve_sdp
from core.errors import InvalidProblem, SolverError

A = np.array([[2.0, 1j], [-1j, 2.0]])


def _lambda_max_problem() -> SdpProblem:
    p = SdpProblem("lambda_max", "min")
    t = p.scalar("t")
    p.add_psd(t * np.eye(2) - A, "dominates")
    p.set_objective(t)
    return p


def test_lambda_max_is_recovered():
    sol = solve_sdp(_lambda_max_problem(), SdpConfig())
    assert sol.status in (OPTIMAL, "MaxIter")
    assert sol.objective == pytest.approx(3.0, abs=1e-5)
    assert sol.worst_residual() <= 1e-6


def test_check_kkt_recomputes_small_residuals():
    p = _lambda_max_problem()
    sol = solve_sdp(p)
    res = check_kkt(p, sol)
    assert set(res) == {"primal_res", "dual_res", "gap"}
    assert max(res.values()) <= 1e-6


def test_hermitian_block_program():
    # max <rho, X> over 0 <= X <= I, tr X = 1 equals the top eigenvalue of rho.
    rho = np.array([[0.7, 0.2], [0.2, 0.3]])
    p = SdpProblem("top_eigenvalue", "max")
    X = p.block("X", 2)
    p.add_psd(X, "X_psd")
    p.add_psd(np.eye(2) - X, "X_le_I")
    p.add_equality(cp.real(cp.trace(X)), 1.0, "unit_trace")
    p.set_objective(cp.real(cp.trace(rho @ X)))
    sol = require_optimal(solve_sdp(p), p.name, 1e-6)
    assert sol.objective == pytest.approx(float(np.linalg.eigvalsh(rho)[-1]), abs=1e-5)
    assert sol.values["X"].shape == (2, 2)


def test_infeasible_program_is_reported():
    p = SdpProblem("negative_trace", "min")
    X = p.block("X", 2)
    p.add_psd(X, "X_psd")
    p.add_equality(cp.real(cp.trace(X)), -1.0, "trace")
    p.set_objective(cp.real(cp.trace(X)))
    sol = solve_sdp(p)
    assert sol.status == INFEASIBLE
    with pytest.raises(SolverError):
        require_optimal(sol, p.name, 1e-6)


def test_declaration_errors():
    with pytest.raises(InvalidProblem):
        SdpProblem("x", "sideways")
    p = SdpProblem("dup")
    p.block("X", 2)
    with pytest.raises(InvalidProblem):
        p.block("X", 2)
    with pytest.raises(InvalidProblem):
        p.build()


def test_undeclared_variable_is_rejected():
    p = SdpProblem("stray")
    p.scalar("t")
    stray = cp.Variable(name="stray")
    p.set_objective(stray)
    with pytest.raises(InvalidProblem):
        p.build()
