"""Pure-state transformations by a measure-and-prepare RNO.

For pure psi and target sigma with standard robustness R and free mixer delta,
``X -> tr(psi X) sigma + tr((I - psi) X) delta`` maps psi to sigma and keeps
free states free whenever every free rho has ``tr(psi rho) <= 1/(1 + R)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from core import qmath, telemetry
from core.config import RnoConfig
from core.errors import ConditionNotMet, InvalidState, TooLarge
from core.freesets import FreeSetModel, Verdict
from core.qmath import Channel, DensityMatrix, SeedLike
from measures.static import geometric_measure_pure, standard_robustness

CONDITION_TOL = 1e-9
OVERLAP_TOL = 1e-6


@dataclass
class TransformPlan:
    psi: DensityMatrix
    sigma: DensityMatrix
    condition_lhs: float
    mixer: Optional[DensityMatrix]
    feasible: bool
    robustness: float
    geometric: float
    max_free_overlap: float
    tight: bool = False
    reason: str = ""
    residuals: Dict[str, Any] = field(default_factory=dict)

    @property
    def overlap_bound(self) -> float:
        return 1.0 / (1.0 + self.robustness) if math.isfinite(self.robustness) else 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "condition_lhs": self.condition_lhs,
            "feasible": self.feasible,
            "robustness": self.robustness,
            "geometric": self.geometric,
            "max_free_overlap": self.max_free_overlap,
            "overlap_bound": self.overlap_bound,
            "tight": self.tight,
            "reason": self.reason,
            "residuals": dict(self.residuals),
        }


def check_condition(
    m: FreeSetModel,
    psi: DensityMatrix,
    sigma: DensityMatrix,
    tight: bool = False,
    cfg: Optional[RnoConfig] = None,
) -> TransformPlan:
    """Evaluate 1/(1 + R(sigma)) + G(psi) >= 1.

    With `tight` the plan is feasible under the weaker overlap condition
    max_free_overlap(psi) <= 1/(1 + R(sigma)); the stated condition is still reported.
    """
    cfg = cfg or RnoConfig()
    if not psi.is_pure():
        raise InvalidState("transformation source must be a pure state")
    m.check_state(psi)
    m.check_state(sigma)

    rob = standard_robustness(m, sigma, cfg)
    G = geometric_measure_pure(m, psi)
    overlap = m.max_free_overlap(psi)

    if not rob.finite:
        return TransformPlan(psi, sigma, G, None, False, math.inf, G, overlap, tight, "Vacuous", rob.residuals)

    lhs = 1.0 / (1.0 + rob.value) + G
    if tight:
        feasible = overlap <= 1.0 / (1.0 + rob.value) + CONDITION_TOL
    else:
        feasible = lhs >= 1.0 - CONDITION_TOL
    reason = "" if feasible else "ConditionNotMet"
    return TransformPlan(psi, sigma, lhs, rob.mixer, feasible, rob.value, G, overlap, tight, reason, rob.residuals)


def build_transform_channel(plan: TransformPlan) -> Channel:
    if not plan.feasible or plan.mixer is None:
        raise ConditionNotMet(
            f"transformation condition fails: lhs {plan.condition_lhs:.6g} < 1 ({plan.reason or 'infeasible'})"
        )
    return qmath.measure_prepare_channel(plan.psi, plan.sigma, plan.mixer, label="transform")


@dataclass
class TransformVerification:
    samples: int
    max_violation: float
    all_free: bool
    verdicts: Dict[str, int]
    max_sampled_overlap: float = math.nan
    overlap_bound: float = math.nan
    adversarial_violation: float = math.nan
    target_error: float = math.nan

    def to_dict(self) -> Dict[str, Any]:
        return {
            "samples": self.samples,
            "max_violation": self.max_violation,
            "all_free": self.all_free,
            "verdicts": dict(self.verdicts),
            "max_sampled_overlap": self.max_sampled_overlap,
            "overlap_bound": self.overlap_bound,
            "adversarial_violation": self.adversarial_violation,
            "target_error": self.target_error,
        }


def verify_transform(
    m: FreeSetModel,
    channel: Channel,
    samples: int = 500,
    seed: SeedLike = 0,
    plan: Optional[TransformPlan] = None,
    tol: float = 1e-9,
    progress: bool = False,
) -> TransformVerification:
    """Push sampled free states through the channel and test every output."""
    rng = qmath.as_rng(seed)
    out_model = m
    worst = 0.0
    verdicts: Dict[str, int] = {}
    overlap = 0.0

    def check(rho: DensityMatrix) -> float:
        out = qmath.apply_channel(channel, rho)
        out = DensityMatrix(out.matrix, out_model.dims)
        v = out_model.is_free_state(out, tol)
        verdicts[v.value] = verdicts.get(v.value, 0) + 1
        return out_model.violation(out)

    for _ in tqdm(range(int(samples)), desc="verify transform", disable=not progress):
        rho = m.sample_free_state(rng)
        worst = max(worst, check(rho))
        if plan is not None:
            overlap = max(overlap, float(np.real(np.trace(plan.psi.matrix @ rho.matrix))))

    report = TransformVerification(int(samples), worst, verdicts.get(Verdict.NOT_FREE.value, 0) == 0, verdicts)
    if plan is not None:
        adv = m.most_overlapping_free_state(plan.psi, rng)
        report.adversarial_violation = check(adv)
        overlap = max(overlap, float(np.real(np.trace(plan.psi.matrix @ adv.matrix))))
        report.max_violation = max(report.max_violation, report.adversarial_violation)
        report.all_free = verdicts.get(Verdict.NOT_FREE.value, 0) == 0
        report.max_sampled_overlap = overlap
        report.overlap_bound = plan.overlap_bound
        target = qmath.apply_channel(channel, plan.psi)
        report.target_error = float(np.max(np.abs(target.matrix - plan.sigma.matrix)))
        telemetry.current().gap_logged(
            "overlap_restatement",
            "the construction needs max tr(psi rho) over free rho, not the min fidelity the condition names",
            max_sampled_overlap=overlap,
            overlap_bound=plan.overlap_bound,
            within=overlap <= plan.overlap_bound + OVERLAP_TOL,
        )
    return report


def corollary_condition_check(
    m: FreeSetModel,
    psi: DensityMatrix,
    sigma: DensityMatrix,
    ns: Sequence[int] = (1, 2),
    tight: bool = False,
    cfg: Optional[RnoConfig] = None,
) -> List[TransformPlan]:
    """The condition for psi^(x)n -> sigma^(x)n at each n."""
    cfg = cfg or RnoConfig()
    plans = []
    for n in ns:
        mn = m.power(int(n))
        if mn.dim > cfg.state_guard:
            raise TooLarge(f"{n} copies need dimension {mn.dim} > guard {cfg.state_guard}")
        plans.append(check_condition(mn, psi.power(int(n)), sigma.power(int(n)), tight, cfg))
    return plans
