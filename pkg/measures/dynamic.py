"""Channel quantifiers for the incoherent (MIO) model.

All Choi matrices are in the trace-d_in convention, input factor first.

* half diamond distance: ``max <J1 - J2, W>`` over ``0 <= W <= rho (x) I``, ``tr rho = 1``.
* RNO robustness: ``max p`` such that ``p J_E + Y`` is an MIO Choi with
  ``Y >= 0`` and ``tr_out Y = (1 - p) I``; the companion channel is ``Y / (1 - p)``.
* divergence to the free set: ``log2 min lambda`` with ``K >= J_E``, ``K`` in the
  MIO cone and ``tr_out K = lambda I``. At the optimum ``L(E) = 2^-F(E)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np
from tqdm import tqdm

from core import qmath, telemetry
from core.config import RnoConfig
from core.conic import SdpProblem, require_optimal, solve_sdp
from core.errors import InvalidRequest, InvalidShape
from core.freesets import ChannelVerdict, FreeSetModel, IncoherentModel, is_mio_channel, mio_cone
from core.ledger import FindingsLedger
from core.qmath import Channel, SeedLike

ZERO_TOL = 1e-7
AXIOM_TOL = 1e-5


def _cfg(cfg: Optional[RnoConfig]) -> RnoConfig:
    return cfg if cfg is not None else RnoConfig()


def _require_incoherent(model: Optional[FreeSetModel]) -> None:
    if model is not None and not isinstance(model, IncoherentModel):
        raise InvalidRequest(f"channel quantifiers are offered for the incoherent model only, got {model.kind}")


def _same_shape(E1: Channel, E2: Channel) -> None:
    if E1.d_in != E2.d_in or E1.d_out != E2.d_out:
        raise InvalidShape(f"channels differ in shape: {E1.in_dims}->{E1.out_dims} vs {E2.in_dims}->{E2.out_dims}")


def _tr_out(X: cp.Expression, d_in: int, d_out: int) -> cp.Expression:
    return cp.partial_trace(X, [d_in, d_out], axis=1)


def _mio_verdict(E: Channel, tol: float) -> ChannelVerdict:
    return is_mio_channel(E, tol)


# ---------- Diamond distance ----------
@dataclass
class DiamondResult:
    value: float
    lower_bound: float
    residuals: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"value": self.value, "lower_bound": self.lower_bound, "residuals": dict(self.residuals)}


def _diamond_sdp(E1: Channel, E2: Channel, cfg: RnoConfig) -> Tuple[float, Dict[str, Any]]:
    d_in, d_out = E1.d_in, E1.d_out
    J = E1.choi - E2.choi
    if float(np.max(np.abs(J), initial=0.0)) <= 1e-13:
        return 0.0, {"status": "Optimal", "primal_res": 0.0, "dual_res": 0.0, "gap": 0.0, "iterations": 0}
    p = SdpProblem("diamond_distance", "max")
    W = p.block("W", d_in * d_out)
    rho = p.block("rho", d_in)
    p.add_psd(W, "W_psd")
    p.add_psd(cp.kron(rho, np.eye(d_out)) - W, "W_bounded")
    p.add_equality(cp.real(cp.trace(rho)), 1.0, name="rho_trace")
    p.set_objective(cp.real(cp.trace(J @ W)))
    sol = require_optimal(solve_sdp(p, cfg.sdp()), p.name, cfg.certify_tolerance)
    return float(min(max(sol.objective, 0.0), 1.0)), sol.certificate()


def diamond_lower_bound(E1: Channel, E2: Channel, samples: int = 64, seed: SeedLike = 0) -> float:
    """Best of 1/2 ||(A (x) I)(J1 - J2)(A (x) I)^+||_1 over unit-Frobenius A (plus A = I/sqrt(d))."""
    _same_shape(E1, E2)
    d_in, d_out = E1.d_in, E1.d_out
    J = E1.choi - E2.choi
    rng = qmath.as_rng(seed)
    cands = [np.eye(d_in) / math.sqrt(d_in)]
    for _ in range(int(samples)):
        A = rng.normal(size=(d_in, d_in)) + 1j * rng.normal(size=(d_in, d_in))
        cands.append(A / np.linalg.norm(A))
    best = 0.0
    for A in cands:
        AI = np.kron(A, np.eye(d_out))
        best = max(best, 0.5 * qmath.trace_norm(AI @ J @ AI.conj().T))
    return float(min(best, 1.0))


def diamond_distance(E1: Channel, E2: Channel, cfg: Optional[RnoConfig] = None) -> float:
    """Half diamond norm of E1 - E2, in [0, 1]."""
    _same_shape(E1, E2)
    value, _ = _diamond_sdp(E1, E2, _cfg(cfg))
    return value


def diamond_certificate(E1: Channel, E2: Channel, cfg: Optional[RnoConfig] = None, samples: int = 64, seed: SeedLike = 0) -> DiamondResult:
    _same_shape(E1, E2)
    value, cert = _diamond_sdp(E1, E2, _cfg(cfg))
    return DiamondResult(value=value, lower_bound=diamond_lower_bound(E1, E2, samples, seed), residuals=cert)


# ---------- RNO robustness ----------
@dataclass
class ChannelRobustnessResult:
    p_star: float
    companion: Channel
    resulting_free: Channel
    residuals: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"p_star": self.p_star, "residuals": dict(self.residuals)}


def channel_rno_robustness(E: Channel, cfg: Optional[RnoConfig] = None, model: Optional[FreeSetModel] = None) -> ChannelRobustnessResult:
    """sup p such that p E + (1 - p) G is MIO for some channel G."""
    _require_incoherent(model)
    cfg = _cfg(cfg)
    d_in, d_out = E.d_in, E.d_out
    uniform = qmath.replacement_channel(qmath.maximally_mixed(E.out_dims), E.in_dims)

    if _mio_verdict(E, cfg.psd_tol) == ChannelVerdict.FREE:
        return ChannelRobustnessResult(1.0, uniform, E, {"status": "Optimal", "reason": "certified_free"})

    p = SdpProblem("channel_rno_robustness", "max")
    ps = p.scalar("p")
    Y = p.block("Y", d_in * d_out)
    p.add_psd(Y, "Y_psd")
    p.add_equality(_tr_out(Y, d_in, d_out), (1 - ps) * np.eye(d_in), name="Y_trace")
    p.add_nonneg(ps, name="p_low")
    p.add_nonneg(1 - ps, name="p_high")
    p.add_cone(mio_cone(ps * E.choi + Y, d_in, d_out, "mixture_mio"))
    p.set_objective(ps)
    sol = require_optimal(solve_sdp(p, cfg.sdp()), p.name, cfg.certify_tolerance)

    p_star = float(min(max(sol.objective, 0.0), 1.0))
    Yv = np.asarray(sol.values["Y"])
    if 1.0 - p_star > ZERO_TOL:
        G = Channel.from_choi(Yv / (1.0 - p_star), E.in_dims, E.out_dims, repair=True, label="companion")
    else:
        p_star, G = 1.0, uniform
    mixed = Channel.from_choi(p_star * E.choi + (1.0 - p_star) * G.choi, E.in_dims, E.out_dims, repair=True, label="mixed_free")
    return ChannelRobustnessResult(p_star, G, mixed, sol.certificate())


def channel_divergence_to_free(E: Channel, cfg: Optional[RnoConfig] = None, model: Optional[FreeSetModel] = None) -> float:
    """Restricted max-relative divergence to the MIO set, in bits."""
    _require_incoherent(model)
    cfg = _cfg(cfg)
    if _mio_verdict(E, cfg.psd_tol) == ChannelVerdict.FREE:
        return 0.0
    d_in, d_out = E.d_in, E.d_out
    p = SdpProblem("channel_divergence", "min")
    lam = p.scalar("lambda")
    K = p.block("K", d_in * d_out)
    p.add_cone(mio_cone(K, d_in, d_out, "K_mio"))
    p.add_psd(K - E.choi, "K_dominates")
    p.add_equality(_tr_out(K, d_in, d_out), lam * np.eye(d_in), name="K_trace")
    p.set_objective(lam)
    sol = require_optimal(solve_sdp(p, cfg.sdp()), p.name, cfg.certify_tolerance)

    telemetry.current().gap_logged(
        "restricted_divergence",
        "divergence computed with trivial ancilla only; the sup over nontrivial free pre-processing is not taken",
    )
    value = math.log2(max(float(sol.objective), 1.0))
    return 0.0 if value <= ZERO_TOL else value


# ---------- epsilon-RNO ----------
@dataclass
class EpsilonRnoResult:
    distance: float
    nearest: Channel
    residuals: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"distance": self.distance, "residuals": dict(self.residuals)}


def epsilon_rno_distance(E: Channel, cfg: Optional[RnoConfig] = None) -> EpsilonRnoResult:
    """min over MIO channels M of 1/2 ||E - M||_diamond, through the dual diamond program."""
    cfg = _cfg(cfg)
    if _mio_verdict(E, cfg.psd_tol) == ChannelVerdict.FREE:
        return EpsilonRnoResult(0.0, E, {"status": "Optimal", "reason": "certified_free"})
    d_in, d_out = E.d_in, E.d_out
    p = SdpProblem("epsilon_rno_distance", "min")
    mu = p.scalar("mu")
    JM = p.block("J_M", d_in * d_out)
    Z = p.block("Z", d_in * d_out)
    p.add_cone(mio_cone(JM, d_in, d_out, "M_mio"))
    p.add_equality(_tr_out(JM, d_in, d_out), np.eye(d_in), name="M_trace_preserving")
    p.add_psd(Z, "Z_psd")
    p.add_psd(Z - (E.choi - JM), "Z_dominates")
    p.add_psd(mu * np.eye(d_in) - _tr_out(Z, d_in, d_out), "mu_bound")
    p.set_objective(mu)
    sol = require_optimal(solve_sdp(p, cfg.sdp()), p.name, cfg.certify_tolerance)
    M = Channel.from_choi(np.asarray(sol.values["J_M"]), E.in_dims, E.out_dims, repair=True, label="nearest_mio")
    return EpsilonRnoResult(float(min(max(sol.objective, 0.0), 1.0)), M, sol.certificate())


def is_epsilon_rno(E: Channel, eps: float, cfg: Optional[RnoConfig] = None) -> bool:
    cfg = _cfg(cfg)
    return epsilon_rno_distance(E, cfg).distance <= eps + cfg.certify_tolerance


# ---------- Smoothed robustness ----------
@dataclass
class SmoothedChannelResult:
    eps: float
    upper_estimate: float
    witness: Channel
    witness_radius: float
    direction: str
    is_upper_bound: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "upper_estimate": self.upper_estimate,
            "witness_radius": self.witness_radius,
            "direction": self.direction,
            "is_upper_bound": self.is_upper_bound,
        }


def _fourier(d: int) -> np.ndarray:
    w = np.exp(2j * math.pi / d)
    return np.array([[w ** (j * k) for k in range(d)] for j in range(d)], dtype=complex) / math.sqrt(d)


def radius_lattice(eps: float, step: float) -> List[float]:
    """{j * step <= eps} together with eps itself; nested along multiples of `step`."""
    if step <= 0:
        raise InvalidRequest(f"radius step must be positive, got {step}")
    n = int(math.floor(eps / step + 1e-9))
    radii = [round(j * step, 12) for j in range(n + 1)]
    if eps - radii[-1] > 1e-12:
        radii.append(float(eps))
    return radii


class _SmoothingSearch:
    """Line search from E toward seeded directions; caches distances and robustness values."""

    def __init__(self, E: Channel, cfg: RnoConfig, restarts: int, seed: SeedLike):
        self.E = E
        self.cfg = cfg
        self.directions = self._directions(max(1, int(restarts)), qmath.as_rng(seed))
        self._dist: Dict[int, float] = {}
        self._robust: Dict[Tuple[int, float], float] = {}
        self._base: Optional[float] = None

    def _directions(self, restarts: int, rng: np.random.Generator) -> List[Tuple[str, Channel]]:
        E = self.E
        out: List[Tuple[str, Channel]] = []
        if E.d_in == E.d_out:
            F = qmath.unitary_channel(_fourier(E.d_in), E.in_dims, label="coherence_generating")
            out.append(("coherence_generating", F))
            out.append(("E_after_coherence_generating", Channel(E.in_dims, E.out_dims, qmath.compose(E, F).choi)))
        while len(out) < restarts:
            if len(out) % 2 == 0 and E.d_in == E.d_out:
                out.append((f"random_unitary_{len(out)}", qmath.unitary_channel(qmath.random_unitary(E.d_in, rng), E.in_dims)))
            else:
                out.append((f"random_channel_{len(out)}", qmath.random_channel(E.in_dims, E.out_dims, rng, kraus_rank=2)))
        return out[:restarts]

    def base(self) -> float:
        if self._base is None:
            self._base = channel_rno_robustness(self.E, self.cfg).p_star
        return self._base

    def distance(self, k: int) -> float:
        if k not in self._dist:
            self._dist[k] = diamond_distance(self.directions[k][1], self.E, self.cfg)
        return self._dist[k]

    def candidate(self, k: int, r: float) -> Tuple[float, Channel]:
        D = self.distance(k)
        t = 1.0 if D <= r else r / D
        U = self.directions[k][1]
        Ep = Channel.from_choi((1 - t) * self.E.choi + t * U.choi, self.E.in_dims, self.E.out_dims, repair=True, label="smoothed")
        key = (k, round(t * D, 12))
        if key not in self._robust:
            self._robust[key] = channel_rno_robustness(Ep, self.cfg).p_star
        return self._robust[key], Ep

    def run(self, eps: float, progress: bool = False) -> SmoothedChannelResult:
        best = SmoothedChannelResult(eps, self.base(), self.E, 0.0, "none")
        radii = [r for r in radius_lattice(eps, self.cfg.smoothing_radius_step) if r > 0]
        for k in tqdm(range(len(self.directions)), desc="smoothing", disable=not progress):
            for r in radii:
                val, Ep = self.candidate(k, r)
                if val < best.upper_estimate:
                    best = SmoothedChannelResult(eps, val, Ep, min(r, self.distance(k)), self.directions[k][0])
        return best


def _check_eps(eps: float) -> None:
    if not (0.0 <= eps < 1.0):
        raise InvalidRequest(f"smoothing radius must lie in [0, 1), got {eps}")


def smoothed_channel_robustness(
    E: Channel,
    eps: float,
    cfg: Optional[RnoConfig] = None,
    restarts: Optional[int] = None,
    seed: SeedLike = None,
    progress: bool = False,
) -> SmoothedChannelResult:
    """Heuristic upper estimate of inf L(E') over the diamond ball of radius eps."""
    _check_eps(eps)
    cfg = _cfg(cfg)
    search = _SmoothingSearch(E, cfg, restarts or cfg.smoothing_restarts, cfg.seed if seed is None else seed)
    telemetry.current().gap_logged(
        "smoothing_direction",
        "the infimum over the ball makes smoothing lower the robustness; the value is an upper estimate",
        eps=eps,
    )
    return search.run(eps, progress)


def smoothed_channel_robustness_sweep(
    E: Channel,
    eps_grid: Sequence[float],
    cfg: Optional[RnoConfig] = None,
    restarts: Optional[int] = None,
    seed: SeedLike = None,
    progress: bool = False,
) -> List[SmoothedChannelResult]:
    for eps in eps_grid:
        _check_eps(eps)
    cfg = _cfg(cfg)
    search = _SmoothingSearch(E, cfg, restarts or cfg.smoothing_restarts, cfg.seed if seed is None else seed)
    return [search.run(float(eps), progress) for eps in eps_grid]


# ---------- Axiom harness ----------
@dataclass
class ChannelAxiomReport:
    d: int
    trials: int
    max_violation: Dict[str, float] = field(default_factory=lambda: {"P1": 0.0, "P2": 0.0, "P3": 0.0, "P4": 0.0})
    checked: Dict[str, int] = field(default_factory=lambda: {"P1": 0, "P2": 0, "P3": 0, "P4": 0})
    tol: float = AXIOM_TOL

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.max_violation.values())

    def note(self, axiom: str, violation: float) -> None:
        self.checked[axiom] += 1
        self.max_violation[axiom] = max(self.max_violation[axiom], float(violation))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "trials": self.trials,
            "max_violation": dict(self.max_violation),
            "checked": dict(self.checked),
            "tol": self.tol,
            "passed": self.passed,
        }


def channel_axiom_suite(
    d: int = 2,
    trials: int = 20,
    seed: SeedLike = 0,
    cfg: Optional[RnoConfig] = None,
    ledger: Optional[FindingsLedger] = None,
    mix_weights: Tuple[float, ...] = (0.25, 0.5, 0.75),
    progress: bool = False,
) -> ChannelAxiomReport:
    """Zero on MIO, monotone under MIO pre/post processing, faithful, and convexity of 2^F - 1."""
    cfg = _cfg(cfg)
    m = IncoherentModel(d)
    rng = qmath.as_rng(seed)
    report = ChannelAxiomReport(d=d, trials=int(trials))

    def F(ch: Channel) -> float:
        return channel_divergence_to_free(ch, cfg)

    for _ in tqdm(range(int(trials)), desc="channel axioms", disable=not progress):
        M1, M2 = m.sample_free_channel(rng), m.sample_free_channel(rng)
        report.note("P1", abs(F(M1)))

        E = qmath.random_channel(d, d, rng, kraus_rank=2)
        f_E = F(E)
        post = Channel(E.in_dims, E.out_dims, qmath.compose(M2, qmath.compose(E, M1)).choi)
        report.note("P2", max(0.0, F(post) - f_E))

        if m.is_rno_channel(E, cfg.psd_tol) == ChannelVerdict.NOT_FREE:
            report.note("P3", 1.0 if f_E <= ZERO_TOL else 0.0)

        E2 = qmath.random_channel(d, d, rng, kraus_rank=2)
        g1, g2 = 2.0 ** f_E - 1.0, 2.0 ** F(E2) - 1.0
        for w in mix_weights:
            mix = qmath.mix_channels([w, 1.0 - w], [E, E2])
            report.note("P4", max(0.0, (2.0 ** F(mix) - 1.0) - (w * g1 + (1.0 - w) * g2)))

    telemetry.current().finding("channel_axioms", report.passed, **report.max_violation)
    if ledger is not None:
        ledger.record("channel_axioms", report.passed, report.to_dict())
    return report
