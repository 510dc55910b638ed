"""Robustness and geometric quantifiers of resource states, plus the quantifier axiom harness."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import cvxpy as cp
import numpy as np
from tqdm import tqdm

from core import qmath, telemetry
from core.config import RnoConfig
from core.conic import INFEASIBLE, OPTIMAL, SdpProblem, require_optimal, solve_sdp
from core.errors import ConditionNotMet, InvalidRequest, InvalidState
from core.freesets import FreeSetModel, Verdict
from core.ledger import FindingsLedger
from core.qmath import Channel, DensityMatrix, SeedLike

GENERALIZED = "generalized"
STANDARD = "standard"
QUANTIFIERS = (GENERALIZED, STANDARD)

AXIOM_TOL = 1e-5
ZERO_TOL = 1e-7


@dataclass
class RobustnessResult:
    value: float
    mixer: Optional[DensityMatrix]
    free_witness: Optional[DensityMatrix]
    residuals: Dict[str, Any] = field(default_factory=dict)
    status: str = OPTIMAL
    kind: str = GENERALIZED

    @property
    def finite(self) -> bool:
        return math.isfinite(self.value)

    def log_value(self) -> float:
        return math.log2(1.0 + self.value) if self.finite else math.inf

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "value": self.value,
            "status": self.status,
            "residuals": dict(self.residuals),
        }


def _cfg(cfg: Optional[RnoConfig]) -> RnoConfig:
    return cfg if cfg is not None else RnoConfig()


def _trace(X: cp.Expression) -> cp.Expression:
    return cp.real(cp.trace(X))


def _robustness(m: FreeSetModel, rho: DensityMatrix, standard: bool, cfg: RnoConfig) -> RobustnessResult:
    m.check_state(rho)
    kind = STANDARD if standard else GENERALIZED
    if standard and m.structurally_infeasible(rho, cfg.psd_tol):
        return RobustnessResult(math.inf, None, None, {"status": INFEASIBLE, "reason": "structural"}, INFEASIBLE, kind)

    # T = (1 + s) * tau with tau free and T - rho the unnormalized mixer.
    p = SdpProblem(f"{kind}_robustness", "min")
    T = p.block("T", rho.dim)
    p.add_cone(m.free_cone_constraints(T, "T_free"))
    if standard:
        p.add_cone(m.free_cone_constraints(T - rho.matrix, "mixer_free"))
    else:
        p.add_psd(T - rho.matrix, "T_dominates")
    p.set_objective(_trace(T) - 1.0)

    sol = solve_sdp(p, cfg.sdp())
    if standard and sol.status == INFEASIBLE:
        return RobustnessResult(math.inf, None, None, sol.certificate(), INFEASIBLE, kind)
    require_optimal(sol, p.name, cfg.certify_tolerance)

    s = max(0.0, float(sol.objective))
    Tv = qmath.hermitian_part(np.asarray(sol.values["T"]))
    witness = m.project_free(qmath.nearest_state(Tv, rho.dims))
    if s > ZERO_TOL:
        mixer = qmath.nearest_state((Tv - rho.matrix) / s, rho.dims)
        if standard:
            mixer = m.project_free(mixer)
    else:
        s = 0.0
        mixer = qmath.maximally_mixed(rho.dims)
    return RobustnessResult(s, mixer, witness, sol.certificate(), sol.status, kind)


def generalized_robustness(m: FreeSetModel, rho: DensityMatrix, cfg: Optional[RnoConfig] = None) -> RobustnessResult:
    """min r such that (rho + r sigma)/(1 + r) is free for some state sigma."""
    return _robustness(m, rho, standard=False, cfg=_cfg(cfg))


def standard_robustness(m: FreeSetModel, rho: DensityMatrix, cfg: Optional[RnoConfig] = None) -> RobustnessResult:
    """Same with a free mixer. +inf (status Infeasible) when no free mixer exists."""
    return _robustness(m, rho, standard=True, cfg=_cfg(cfg))


def robustness(m: FreeSetModel, rho: DensityMatrix, quantifier: str = GENERALIZED, cfg: Optional[RnoConfig] = None) -> RobustnessResult:
    if quantifier not in QUANTIFIERS:
        raise InvalidRequest(f"unknown quantifier {quantifier!r}; choose one of {QUANTIFIERS}")
    return _robustness(m, rho, standard=(quantifier == STANDARD), cfg=_cfg(cfg))


def smoothed_log_robustness(
    m: FreeSetModel,
    rho: DensityMatrix,
    eps: float,
    variant: str = "R",
    cfg: Optional[RnoConfig] = None,
) -> float:
    """Generalized robustness minimized over the trace ball of radius eps around rho.

    One joint program over (rho~, T); the ball is encoded as rho - rho~ = P - N
    with P, N >= 0 and tr(P + N) <= 2 eps. Variant "LR" returns log2(1 + R).
    """
    cfg = _cfg(cfg)
    if not (0.0 <= eps < 1.0):
        raise InvalidRequest(f"smoothing radius must lie in [0, 1), got {eps}")
    if variant not in ("R", "LR"):
        raise InvalidRequest(f"variant must be 'R' or 'LR', got {variant!r}")
    m.check_state(rho)
    D = rho.dim

    p = SdpProblem("smoothed_robustness", "min")
    rt = p.block("rho_tilde", D)
    T = p.block("T", D)
    P = p.block("P", D)
    N = p.block("N", D)
    p.add_cone(m.free_cone_constraints(T, "T_free"))
    p.add_psd(T - rt, "T_dominates")
    p.add_psd(rt, "rho_tilde_psd")
    p.add_equality(_trace(rt), 1.0, name="rho_tilde_trace")
    p.add_equality(rho.matrix - rt, P - N, name="ball_split")
    p.add_psd(P, "P_psd")
    p.add_psd(N, "N_psd")
    p.add_nonneg(2.0 * eps - _trace(P + N), name="ball_radius")
    p.set_objective(_trace(T) - 1.0)

    sol = require_optimal(solve_sdp(p, cfg.sdp()), p.name, cfg.certify_tolerance)
    value = max(0.0, float(sol.objective))
    if value <= ZERO_TOL:
        value = 0.0
    return math.log2(1.0 + value) if variant == "LR" else value


def geometric_measure_pure(m: FreeSetModel, psi: DensityMatrix) -> float:
    """1 - max |<phi|psi>| over pure free phi (basis amplitudes or Schmidt coefficients)."""
    if not psi.is_pure():
        raise InvalidState("geometric measure is defined for pure states only")
    best = float(np.max(m.pure_coefficients(psi)))
    return float(min(max(1.0 - best, 0.0), 1.0))


def pure_state_robustness(m: FreeSetModel, psi: DensityMatrix) -> float:
    """Closed form (sum of coefficients)^2 - 1 for pure inputs."""
    if not psi.is_pure():
        raise InvalidState("closed-form robustness is defined for pure states only")
    return max(0.0, m.pure_robustness(psi))


# ---------- Axiom harness ----------
@dataclass
class AxiomReport:
    model: Dict[str, Any]
    quantifier: str
    trials: int
    seed: int
    max_violation: Dict[str, float] = field(default_factory=lambda: {"O1": 0.0, "O2": 0.0, "O3": 0.0, "O4": 0.0})
    checked: Dict[str, int] = field(default_factory=lambda: {"O1": 0, "O2": 0, "O3": 0, "O4": 0})
    skipped: Dict[str, int] = field(default_factory=lambda: {"O1": 0, "O2": 0, "O3": 0, "O4": 0})
    channels: Dict[str, int] = field(default_factory=dict)
    tol: float = AXIOM_TOL

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.max_violation.values())

    def note(self, axiom: str, violation: float) -> None:
        self.checked[axiom] += 1
        self.max_violation[axiom] = max(self.max_violation[axiom], float(violation))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": dict(self.model),
            "quantifier": self.quantifier,
            "trials": self.trials,
            "seed": self.seed,
            "max_violation": dict(self.max_violation),
            "checked": dict(self.checked),
            "skipped": dict(self.skipped),
            "channels": dict(self.channels),
            "tol": self.tol,
            "passed": self.passed,
        }


def _resource_sample(m: FreeSetModel, rng: np.random.Generator) -> DensityMatrix:
    # Separable samples come from pure states so that NotFree is decided exactly.
    if m.kind == "separable_ppt":
        return qmath.random_pure_state(m.dims, rng)
    return qmath.random_state(m.dims, rng)


def _transform_channel(m: FreeSetModel, psi: DensityMatrix, rng: np.random.Generator, cfg: RnoConfig) -> Channel:
    """Measure-and-prepare RNO taking psi to a target that the condition admits."""
    from protocols.transform import build_transform_channel, check_condition

    target = qmath.random_pure_state(m.dims, rng)
    floor = m.sample_free_state(rng)
    # t = 0 gives a free target, which is always admitted.
    for t in (0.5, 0.25, 0.125, 0.0):
        sigma = DensityMatrix(t * target.matrix + (1.0 - t) * floor.matrix, m.dims)
        plan = check_condition(m, psi, sigma, cfg=cfg)
        if plan.feasible:
            return build_transform_channel(plan)
    raise ConditionNotMet("no admitted target for the transformation channel")


def _o2_channel(m: FreeSetModel, rho: DensityMatrix, trial: int, rng: np.random.Generator, cfg: RnoConfig) -> Tuple[str, Channel]:
    # Nonentangling maps are not certifiable in general; the separable model alternates
    # transformation channels with the local and swap samples.
    if m.kind == "separable_ppt" and trial % 2 == 0:
        return "transform", _transform_channel(m, rho, rng, cfg)
    return "sampled", m.sample_free_channel(rng)


def quantifier_axiom_suite(
    m: FreeSetModel,
    quantifier: str = GENERALIZED,
    trials: int = 200,
    seed: SeedLike = 0,
    cfg: Optional[RnoConfig] = None,
    ledger: Optional[FindingsLedger] = None,
    mix_weights: tuple = (0.25, 0.5, 0.75),
    free_only: bool = False,
    progress: bool = False,
) -> AxiomReport:
    """Empirical check of zero-on-free, monotonicity, faithfulness and convexity.

    O3 is scored as an indicator: 1.0 whenever a NotFree sample gets value <= 1e-7.
    With `free_only` only O1 is exercised.
    """
    if quantifier not in QUANTIFIERS:
        raise InvalidRequest(f"unknown quantifier {quantifier!r}; choose one of {QUANTIFIERS}")
    cfg = _cfg(cfg)
    rng = qmath.as_rng(seed)
    seed_value = int(seed) if isinstance(seed, (int, np.integer)) else -1
    report = AxiomReport(model=m.describe(), quantifier=quantifier, trials=int(trials), seed=seed_value)

    def f(rho: DensityMatrix) -> float:
        return robustness(m, rho, quantifier, cfg).value

    for trial in tqdm(range(int(trials)), desc=f"axioms[{quantifier}]", disable=not progress):
        sigma = m.sample_free_state(rng)
        report.note("O1", abs(f(sigma)))
        if free_only:
            continue

        rho = _resource_sample(m, rng)
        f_rho = f(rho)
        source, lam = _o2_channel(m, rho, trial, rng, cfg)
        if math.isfinite(f_rho):
            report.channels[source] = report.channels.get(source, 0) + 1
            out = qmath.apply_channel(lam, rho)
            report.note("O2", max(0.0, f(DensityMatrix(out.matrix, m.dims)) - f_rho))
        else:
            report.skipped["O2"] += 1

        if m.is_free_state(rho, cfg.psd_tol) == Verdict.NOT_FREE:
            report.note("O3", 1.0 if f_rho <= ZERO_TOL else 0.0)
        else:
            report.skipped["O3"] += 1

        rho2 = qmath.random_state(m.dims, rng)
        f_rho2 = f(rho2)
        for w in mix_weights:
            rhs = w * f_rho + (1.0 - w) * f_rho2
            if not math.isfinite(rhs):
                report.skipped["O4"] += 1
                continue
            mix = DensityMatrix(w * rho.matrix + (1.0 - w) * rho2.matrix, m.dims)
            report.note("O4", max(0.0, f(mix) - rhs))

    t = telemetry.current()
    t.gap_logged(
        "o_axiom_range",
        "axioms state the range (0,1); robustness quantifiers take values in [0, inf)",
        quantifier=quantifier,
    )
    t.finding(f"axioms_{quantifier}_{m.kind}", report.passed, **report.max_violation)
    if ledger is not None:
        ledger.record(f"axioms_{quantifier}_{m.kind}", report.passed, report.to_dict())
    return report


def robustness_profile(m: FreeSetModel, rho: DensityMatrix, cfg: Optional[RnoConfig] = None) -> Dict[str, Any]:
    """All state quantifiers of rho in one mapping, for reports."""
    cfg = _cfg(cfg)
    gen = generalized_robustness(m, rho, cfg)
    std = standard_robustness(m, rho, cfg)
    out: Dict[str, Any] = {
        "model": m.describe(),
        "verdict": m.is_free_state(rho, cfg.psd_tol).value,
        "generalized": gen.value,
        "standard": std.value,
        "log_generalized": gen.log_value(),
        "certificate": gen.residuals,
    }
    if rho.is_pure():
        out["geometric"] = geometric_measure_pure(m, rho)
        out["pure_closed_form"] = pure_state_robustness(m, rho)
    return out
