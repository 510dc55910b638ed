"""Semidefinite programs with recomputed certificates.

Problems are modelled with cvxpy and solved by SCS (a first-order operator
splitting method). cvxpy maps complex Hermitian blocks to the real symmetric
embedding ``[[Re, -Im], [Im, Re]]`` before SCS sees them, so residuals below
are well defined on the real problem.

Residual definitions (all reported by `check_kkt`):

* primal: worst violation of the declared constraints, evaluated from the
  block values (equality: max modulus; PSD: ``max(0, -lambda_min)``).
* dual: ``||A^T y + c||_inf / (1 + ||c||_inf)`` on the compiled conic data,
  combined with the worst dual-cone violation of the constraint multipliers.
* gap: ``|c^T x + b^T y| / (1 + |c^T x| + |b^T y|)``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import cvxpy as cp
import numpy as np

from core import telemetry
from core.config import SdpConfig
from core.errors import InvalidProblem, InvalidSolution, SolverError

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
MAX_ITER = "MaxIter"

_STATUS_MAP = {
    cp.OPTIMAL: OPTIMAL,
    cp.OPTIMAL_INACCURATE: MAX_ITER,
    cp.INFEASIBLE: INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: INFEASIBLE,
    cp.UNBOUNDED: UNBOUNDED,
    cp.UNBOUNDED_INACCURATE: UNBOUNDED,
}


@dataclass(frozen=True)
class Block:
    name: str
    size: int
    hermitian: bool


@dataclass
class _Constraint:
    name: str
    kind: str  # "eq" | "psd" | "nonneg"
    expr: cp.Expression
    con: cp.Constraint


class SdpProblem:
    """Variable blocks, affine equalities, PSD constraints and a real objective."""

    def __init__(self, name: str = "sdp", sense: str = "min"):
        if sense not in ("min", "max"):
            raise InvalidProblem(f"sense must be 'min' or 'max', got {sense!r}")
        self.name = name
        self.sense = sense
        self.blocks: Dict[str, Block] = {}
        self.variables: Dict[str, cp.Variable] = {}
        self.constraints: List[_Constraint] = []
        self.objective: Optional[cp.Expression] = None
        self._problem: Optional[cp.Problem] = None

    # ---------- Declaration ----------
    def block(self, name: str, size: int, hermitian: bool = True) -> cp.Variable:
        if name in self.blocks:
            raise InvalidProblem(f"block {name!r} declared twice")
        if int(size) < 1:
            raise InvalidProblem(f"block {name!r} needs a positive side length")
        size = int(size)
        if size == 1 and not hermitian:
            var = cp.Variable(name=name)
        elif hermitian:
            var = cp.Variable((size, size), hermitian=True, name=name)
        else:
            var = cp.Variable((size, size), symmetric=True, name=name)
        self.blocks[name] = Block(name, size, bool(hermitian))
        self.variables[name] = var
        self._problem = None
        return var

    def scalar(self, name: str) -> cp.Variable:
        return self.block(name, 1, hermitian=False)

    def _add(self, kind: str, expr: cp.Expression, con: cp.Constraint, name: Optional[str]) -> None:
        self.constraints.append(_Constraint(name or f"{kind}{len(self.constraints)}", kind, expr, con))
        self._problem = None

    def add_equality(self, lhs: Any, rhs: Any = 0.0, name: Optional[str] = None) -> None:
        expr = lhs - rhs
        self._add("eq", expr, expr == 0, name)

    def add_psd(self, expr: cp.Expression, name: Optional[str] = None) -> None:
        if expr.ndim != 2 or expr.shape[0] != expr.shape[1]:
            raise InvalidProblem(f"PSD constraint {name!r} on non-square expression of shape {expr.shape}")
        if not expr.is_hermitian():
            expr = (expr + expr.H) / 2
        self._add("psd", expr, expr >> 0, name)

    def add_nonneg(self, expr: cp.Expression, name: Optional[str] = None) -> None:
        self._add("nonneg", expr, expr >= 0, name)

    def add_cone(self, cone: Any) -> None:
        """Merge a `ConeDescription` produced by a free-set model."""
        for i, e in enumerate(cone.equalities):
            self.add_equality(e, 0.0, name=f"{cone.name}_eq{i}")
        for i, e in enumerate(cone.psd):
            self.add_psd(e, name=f"{cone.name}_psd{i}")

    def set_objective(self, expr: Any) -> None:
        expr = cp.Constant(expr) if not isinstance(expr, cp.Expression) else expr
        if expr.is_complex():
            expr = cp.real(expr)
        self.objective = expr
        self._problem = None

    # ---------- Compilation ----------
    def _declared_ids(self) -> set:
        return {v.id for v in self.variables.values()}

    def build(self) -> cp.Problem:
        if self._problem is not None:
            return self._problem
        if self.objective is None:
            raise InvalidProblem(f"{self.name}: objective not set")
        if self.objective.size != 1:
            raise InvalidProblem(f"{self.name}: objective must be scalar, got shape {self.objective.shape}")
        ids = self._declared_ids()
        if any(v.id not in ids for v in self.objective.variables()):
            raise InvalidProblem(f"{self.name}: objective references undeclared variables")
        for c in self.constraints:
            if any(v.id not in ids for v in c.expr.variables()):
                raise InvalidProblem(f"{self.name}: constraint {c.name!r} references undeclared variables")
        obj = cp.Minimize(self.objective) if self.sense == "min" else cp.Maximize(self.objective)
        try:
            self._problem = cp.Problem(obj, [c.con for c in self.constraints])
        except (ValueError, cp.error.DCPError) as e:
            raise InvalidProblem(f"{self.name}: {e}") from None
        if not self._problem.is_dcp():
            raise InvalidProblem(f"{self.name}: problem is not a convex program")
        return self._problem


@dataclass
class SdpSolution:
    status: str
    objective: float
    values: Dict[str, np.ndarray]
    primal_res: float = math.inf
    dual_res: float = math.inf
    gap: float = math.inf
    dual_objective: float = math.nan
    iterations: int = 0
    problem_name: str = ""
    duals: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    raw_x: Optional[np.ndarray] = field(default=None, repr=False)
    raw_y: Optional[np.ndarray] = field(default=None, repr=False)
    conic_data: Optional[Tuple[Any, np.ndarray, np.ndarray]] = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def worst_residual(self) -> float:
        return max(self.primal_res, self.dual_res, self.gap)

    def certificate(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "primal_res": float(self.primal_res),
            "dual_res": float(self.dual_res),
            "gap": float(self.gap),
            "iterations": int(self.iterations),
        }


# ---------- Residuals ----------
def _min_eig(M: np.ndarray) -> float:
    M = np.atleast_2d(np.asarray(M))
    return float(np.linalg.eigvalsh(0.5 * (M + M.conj().T))[0])


def _violation(kind: str, value: Any) -> float:
    v = np.asarray(value)
    if kind == "eq":
        return float(np.max(np.abs(v), initial=0.0))
    if kind == "psd":
        return max(0.0, -_min_eig(v))
    return max(0.0, -float(np.min(np.real(v))))


def _finite(x: float) -> float:
    return float(np.nan_to_num(x, nan=1e300, posinf=1e300, neginf=1e300))


def check_kkt(p: SdpProblem, s: SdpSolution) -> Dict[str, float]:
    """Recompute residuals from block values, multipliers and the compiled conic data."""
    if set(s.values) != set(p.blocks):
        raise InvalidSolution(f"solution blocks {sorted(s.values)} do not match problem blocks {sorted(p.blocks)}")
    for name, blk in p.blocks.items():
        shape = np.shape(s.values[name])
        expected = () if (blk.size == 1 and not blk.hermitian) else (blk.size, blk.size)
        if shape != expected and not (expected == () and shape in ((1,), (1, 1))):
            raise InvalidSolution(f"block {name!r} has shape {shape}, expected {expected}")

    A, b, c = s.conic_data if s.conic_data is not None else (None, None, None)
    x, y = s.raw_x, s.raw_y

    if s.status in (INFEASIBLE, UNBOUNDED):
        # Certificate residuals of the infeasibility (or unboundedness) ray.
        if A is None or y is None or x is None:
            return {"primal_res": 0.0, "dual_res": 0.0, "gap": 0.0}
        if s.status == INFEASIBLE and np.all(np.isfinite(y)):
            scale = max(abs(float(b @ y)), 1e-300)
            return {"primal_res": _finite(float(np.max(np.abs(A.T @ y))) / scale), "dual_res": 0.0, "gap": 0.0}
        if np.all(np.isfinite(x)):
            scale = max(abs(float(c @ x)), 1e-300)
            return {"primal_res": 0.0, "dual_res": _finite(float(np.max(np.abs(A @ x), initial=0.0)) / scale), "gap": 0.0}
        return {"primal_res": 0.0, "dual_res": 0.0, "gap": 0.0}

    # Primal: evaluate declared constraints at the given block values.
    saved = {name: var.value for name, var in p.variables.items()}
    primal = 0.0
    try:
        for name, var in p.variables.items():
            val = np.asarray(s.values[name])
            if not np.all(np.isfinite(val)):
                val = np.nan_to_num(val)
            if p.blocks[name].size == 1 and not p.blocks[name].hermitian:
                var.value = float(np.real(val).reshape(-1)[0])
            elif p.blocks[name].hermitian:
                var.value = 0.5 * (val + val.conj().T)
            else:
                var.value = np.real(0.5 * (val + val.T))
        for con in p.constraints:
            primal = max(primal, _violation(con.kind, con.expr.value))
    finally:
        for name, var in p.variables.items():
            if saved[name] is not None:
                var.value = saved[name]

    # Dual: stationarity on the conic data plus dual-cone membership of multipliers.
    dual = 0.0
    gap = 0.0
    if A is not None and x is not None and y is not None:
        xf, yf = np.nan_to_num(x), np.nan_to_num(y)
        stat = A.T @ yf + c
        dual = float(np.max(np.abs(stat), initial=0.0)) / (1.0 + float(np.max(np.abs(c), initial=0.0)))
        pc, db = float(c @ xf), float(b @ yf)
        gap = abs(pc + db) / (1.0 + abs(pc) + abs(db))
    for i, con in enumerate(p.constraints):
        mult = s.duals.get(i)
        if mult is None or con.kind == "eq":
            continue
        dual = max(dual, _violation(con.kind, mult))

    return {"primal_res": _finite(primal), "dual_res": _finite(dual), "gap": _finite(gap)}


# ---------- Solve ----------
def solve_sdp(p: SdpProblem, cfg: Optional[SdpConfig] = None) -> SdpSolution:
    cfg = cfg or SdpConfig()
    prob = p.build()
    t0 = time.perf_counter()
    try:
        data, chain, inverse_data = prob.get_problem_data(cp.SCS)
    except (ValueError, cp.error.DCPError) as e:
        raise InvalidProblem(f"{p.name}: {e}") from None

    eps = max(float(cfg.tolerance) * 0.1, 1e-12)
    opts = {"eps_abs": eps, "eps_rel": eps, "max_iters": int(cfg.max_iter)}
    try:
        raw = chain.solve_via_data(prob, data, warm_start=False, verbose=False, solver_opts=opts)
        prob.unpack_results(raw, chain, inverse_data)
    except cp.error.SolverError as e:
        raise SolverError(f"{p.name}: {e}") from None

    status = _STATUS_MAP.get(prob.status, MAX_ITER)
    info = raw.get("info", {}) if isinstance(raw, dict) else {}
    iterations = int(info.get("iter", 0) or 0)

    values: Dict[str, np.ndarray] = {}
    for name, var in p.variables.items():
        blk = p.blocks[name]
        shape = () if (blk.size == 1 and not blk.hermitian) else (blk.size, blk.size)
        values[name] = np.array(var.value) if var.value is not None else np.full(shape, np.nan)
    duals: Dict[int, np.ndarray] = {}
    for i, con in enumerate(p.constraints):
        dv = con.con.dual_value
        if dv is not None:
            duals[i] = np.array(dv)

    A, b, c = data["A"], np.asarray(data["b"], dtype=float), np.asarray(data["c"], dtype=float)
    x = np.asarray(raw.get("x"), dtype=float) if raw.get("x") is not None else None
    y = np.asarray(raw.get("y"), dtype=float) if raw.get("y") is not None else None

    objective = float(prob.value) if prob.value is not None else math.nan
    if status == INFEASIBLE:
        objective = math.inf if p.sense == "min" else -math.inf
    elif status == UNBOUNDED:
        objective = -math.inf if p.sense == "min" else math.inf

    sol = SdpSolution(
        status=status,
        objective=objective,
        values=values,
        iterations=iterations,
        problem_name=p.name,
        duals=duals,
        raw_x=x,
        raw_y=y,
        conic_data=(A, b, c),
    )
    res = check_kkt(p, sol)
    sol.primal_res, sol.dual_res, sol.gap = res["primal_res"], res["dual_res"], res["gap"]

    if status in (OPTIMAL, MAX_ITER) and x is not None and y is not None and math.isfinite(objective):
        sign = 1.0 if p.sense == "min" else -1.0
        offset = sign * objective - float(c @ np.nan_to_num(x))
        sol.dual_objective = sign * (-float(b @ np.nan_to_num(y)) + offset)
    if status == OPTIMAL and sol.worst_residual() > cfg.tolerance:
        sol.status = MAX_ITER

    telemetry.current().sdp_solve(
        problem=p.name,
        status=sol.status,
        primal_res=sol.primal_res,
        dual_res=sol.dual_res,
        gap=sol.gap,
        iterations=iterations,
        dt_sec=time.perf_counter() - t0,
    )
    return sol


def require_optimal(sol: SdpSolution, what: str, accept_tol: Optional[float] = None) -> SdpSolution:
    """Optimal, or an inaccurate finish whose recomputed residuals still meet `accept_tol`."""
    if sol.status == OPTIMAL:
        return sol
    if sol.status == MAX_ITER and accept_tol is not None and sol.worst_residual() <= accept_tol:
        return sol
    raise SolverError(f"{what}: solver finished with status {sol.status}", sol.certificate())
