"""Finite-copy proxies for the asymptotic resource cost.

lower(n) = LR^eps(rho^n) / n with the generalized robustness;
upper(n) = floor(c^-1(1/(1 + R_std(rho^n)))) / n with the standard robustness.
Neither is a limit value; reports carry the n and eps used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from core import qmath, telemetry
from core.config import RnoConfig
from core.errors import BoundViolation, InvalidRequest, TooLarge, Vacuous
from core.freesets import FreeSetModel, SeparablePPTModel, Verdict
from core.qmath import Channel, DensityMatrix, SeedLike
from measures.static import smoothed_log_robustness, standard_robustness

FLOOR_SLACK = 1e-6
MAX_COST_EPS = 0.2


def _power(m: FreeSetModel, rho: DensityMatrix, n: int, cfg: RnoConfig):
    if n < 1:
        raise InvalidRequest(f"copies must be >= 1, got {n}")
    if rho.dim ** n > cfg.state_guard:
        raise TooLarge(f"{n} copies of a dimension-{rho.dim} state exceed the state guard {cfg.state_guard}")
    m.check_state(rho)
    return m.power(n), rho.power(n)


def _k_from_robustness(m: FreeSetModel, R: float) -> int:
    return int(math.floor(m.overlap_bound_inverse(1.0 / (1.0 + R)) + FLOOR_SLACK))


def cost_lower_bound(m: FreeSetModel, rho: DensityMatrix, n: int = 1, eps: float = 0.0, cfg: Optional[RnoConfig] = None) -> float:
    cfg = cfg or RnoConfig()
    if not (0.0 <= eps <= MAX_COST_EPS):
        raise InvalidRequest(f"eps must lie in [0, {MAX_COST_EPS}], got {eps}")
    mn, rn = _power(m, rho, n, cfg)
    return smoothed_log_robustness(mn, rn, eps, "LR", cfg) / n


def _upper(m: FreeSetModel, rho: DensityMatrix, n: int, cfg: RnoConfig):
    mn, rn = _power(m, rho, n, cfg)
    rob = standard_robustness(mn, rn, cfg)
    if not rob.finite:
        telemetry.current().gap_logged(
            "standard_robustness_vacuous",
            "the upper bound uses the standard robustness, which is infinite here",
            model=m.kind,
            n=n,
        )
        return math.inf, rob
    return _k_from_robustness(m, rob.value) / n, rob


def cost_upper_bound(m: FreeSetModel, rho: DensityMatrix, n: int = 1, cfg: Optional[RnoConfig] = None) -> float:
    value, _ = _upper(m, rho, n, cfg or RnoConfig())
    return value


@dataclass
class CostBoundReport:
    n: int
    eps: float
    lower_bound: float
    upper_bound: float
    standard_robustness: float
    vacuous: bool
    residuals: Dict[str, Any] = field(default_factory=dict)

    @property
    def ordered(self) -> Optional[bool]:
        if not (math.isfinite(self.lower_bound) and math.isfinite(self.upper_bound)):
            return None
        return self.lower_bound <= self.upper_bound + 1e-4

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "eps": self.eps,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "standard_robustness": self.standard_robustness,
            "vacuous": self.vacuous,
            "ordered": self.ordered,
            "residuals": dict(self.residuals),
        }


def cost_bounds(
    m: FreeSetModel,
    rho: DensityMatrix,
    ns: Sequence[int] = (1, 2),
    eps: float = 0.0,
    cfg: Optional[RnoConfig] = None,
) -> List[CostBoundReport]:
    cfg = cfg or RnoConfig()
    out = []
    for n in ns:
        lower = cost_lower_bound(m, rho, n, eps, cfg)
        upper, rob = _upper(m, rho, n, cfg)
        out.append(CostBoundReport(int(n), eps, lower, upper, rob.value, not math.isfinite(upper), rob.residuals))
    return out


# ---------- Cost channel ----------
@dataclass
class CostChannelReport:
    channel: Channel
    k: int
    n: int
    target_error: float
    samples: int
    all_free: bool
    check: str
    max_violation: float
    max_overlap: float
    overlap_bound: float
    freeness_guaranteed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "n": self.n,
            "target_error": self.target_error,
            "samples": self.samples,
            "all_free": self.all_free,
            "check": self.check,
            "max_violation": self.max_violation,
            "max_overlap": self.max_overlap,
            "overlap_bound": self.overlap_bound,
            "freeness_guaranteed": self.freeness_guaranteed,
        }


def _trivial_state() -> DensityMatrix:
    return DensityMatrix(np.ones((1, 1), dtype=complex), (1,))


def build_cost_channel(
    m: FreeSetModel,
    rho: DensityMatrix,
    n: int = 1,
    samples: int = 200,
    seed: SeedLike = 0,
    cfg: Optional[RnoConfig] = None,
) -> CostChannelReport:
    """X -> tr(X phi^k) rho^n + tr(X (I - phi^k)) pi_n, pi_n the free standard-robustness mixer."""
    cfg = cfg or RnoConfig()
    mn, rn = _power(m, rho, n, cfg)
    rob = standard_robustness(mn, rn, cfg)
    if not rob.finite:
        raise Vacuous(f"standard robustness of {n} copies is infinite under the {m.kind} model")
    k = _k_from_robustness(m, rob.value)
    resource = m.max_resource_state(k) if k >= 1 else _trivial_state()
    channel = qmath.measure_prepare_channel(resource, rn, rob.mixer, label=f"cost_channel_{n}")
    target_error = float(np.max(np.abs(qmath.apply_channel(channel, resource).matrix - rn.matrix)))

    c_k = m.overlap_bound_c(k)
    guaranteed = c_k <= 1.0 / (1.0 + rob.value) + cfg.certify_tolerance
    if not guaranteed:
        telemetry.current().gap_logged(
            "cost_channel_rounding",
            "rounding k down gives c(k) above 1/(1 + R); freeness of the channel is not implied",
            k=k,
            c_k=c_k,
            robustness=rob.value,
        )

    rng = qmath.as_rng(seed)
    inputs = [resource] if k == 0 else [m.power(k).sample_free_state(rng) for _ in range(int(samples))]
    exact = n == 1 or not isinstance(m, SeparablePPTModel)
    worst, overlap, all_free = 0.0, 0.0, True
    for eta in inputs:
        if k >= 1:
            ov = float(np.real(np.trace(eta.matrix @ resource.matrix)))
            if ov > c_k + 1e-9:
                raise BoundViolation(f"free input overlap {ov:.12g} exceeds c({k}) = {c_k:.12g}")
            overlap = max(overlap, ov)
        out = DensityMatrix(qmath.apply_channel(channel, eta).matrix, mn.dims)
        if exact:
            ok = mn.is_free_state(out, cfg.psd_tol) != Verdict.NOT_FREE
            worst = max(worst, mn.violation(out))
        else:
            ok, min_eig = mn.ppt_all_bipartitions(out, cfg.psd_tol)
            worst = max(worst, max(0.0, -min_eig))
        all_free = all_free and ok
    return CostChannelReport(
        channel=channel,
        k=k,
        n=n,
        target_error=target_error,
        samples=len(inputs),
        all_free=all_free,
        check="exact" if exact else "necessary_only",
        max_violation=worst,
        max_overlap=overlap,
        overlap_bound=c_k,
        freeness_guaranteed=guaranteed,
    )
