"""Resource destruction by permutation mixing.

For channels Psi, Phi with a free mixture Theta = p Psi + (1 - p) Phi,
Gamma_n = (1/n) sum_i Theta^(i-1) (x) Psi (x) Theta^(n-i) is close to Theta^n:

    ||J(Gamma_n) - J(Theta^n)||_1  <=  (1/p) sum_k C(n,k) p^k (1-p)^(n-k) |p - k/n|

in the trace-one Choi convention. Scalar bounds are evaluated in exact rational
arithmetic; Choi distances are computed on the support span of the pair.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from core import qmath, telemetry
from core.config import RnoConfig
from core.errors import BoundViolation, HypothesisViolated, InvalidRequest, TooLarge
from core.freesets import ChannelVerdict, is_mio_channel
from core.qmath import Channel, SeedLike
from measures.dynamic import diamond_distance, smoothed_channel_robustness_sweep

E12 = math.exp(1.0 / 12.0)
E6 = math.exp(1.0 / 6.0)
CHAIN_TOL = 1e-6


def _frac(p: float) -> Fraction:
    return Fraction(str(p))


def _check_p(p: float) -> None:
    if not (0.0 < p < 1.0):
        raise InvalidRequest(f"mixing weight must lie in (0, 1), got {p}")


# ---------- Scalar bounds ----------
@dataclass(frozen=True)
class BinomialBound:
    n: int
    p: float
    k: int
    pmf: float
    bound: float


def binomial_pmf_bound(n: int, p: float, k: int) -> BinomialBound:
    """C(n,k) p^k (1-p)^(n-k) against e^(1/12) / sqrt(2 pi n p (1-p) - 2 pi)."""
    _check_p(p)
    P = _frac(p)
    var = n * P * (1 - P)
    if var <= 1:
        raise InvalidRequest(f"n p (1 - p) = {float(var):.6g} must exceed 1")
    if k < 0 or k > math.floor(n * P):
        raise InvalidRequest(f"k = {k} must satisfy 0 <= k <= floor(n p) = {math.floor(n * P)}")
    pmf = Fraction(math.comb(n, k)) * P ** k * (1 - P) ** (n - k)
    bound = E12 / math.sqrt(2.0 * math.pi * float(var) - 2.0 * math.pi)
    if float(pmf) > bound:
        raise BoundViolation(f"binomial pmf {float(pmf):.12g} exceeds bound {bound:.12g} at n={n}, p={p}, k={k}")
    return BinomialBound(n, p, k, float(pmf), bound)


def exact_sum_bound(n: int, p: float) -> float:
    if n < 1:
        raise InvalidRequest(f"n must be >= 1, got {n}")
    _check_p(p)
    P = _frac(p)
    total = sum(
        Fraction(math.comb(n, k)) * P ** k * (1 - P) ** (n - k) * abs(P - Fraction(k, n)) for k in range(n + 1)
    )
    return float(total / P)


def closed_form_bound(n: int, p: float) -> Optional[float]:
    """sqrt(2) (1-p) e^(1/12) / sqrt(pi p (n-1)(1-p) - pi); None where undefined."""
    _check_p(p)
    s = p * (n - 1) * (1 - p)
    if s <= 1.0:
        return None
    return math.sqrt(2.0) * (1 - p) * E12 / math.sqrt(math.pi * s - math.pi)


def threshold_n(eps: float, p: float) -> int:
    """Smallest n with n - 1 >= 2(1-p) e^(1/6) / (eps^2 pi p) + 1/(p(1-p))."""
    _check_p(p)
    if not (0.0 < eps < 1.0):
        raise InvalidRequest(f"eps must lie in (0, 1), got {eps}")
    rhs = 2.0 * (1 - p) * E6 / (eps ** 2 * math.pi * p) + 1.0 / (p * (1 - p))
    return int(math.ceil(1.0 + rhs - 1e-12))


# ---------- Channels ----------
def _choi_side_guard(ch: Channel, n: int, guard: int) -> None:
    side = (ch.d_in * ch.d_out) ** n
    if side > guard:
        raise TooLarge(f"Choi side {side} for n={n} exceeds guard {guard}")


def build_gamma_n(psi: Channel, theta: Channel, n: int, cfg: Optional[RnoConfig] = None) -> Channel:
    """Uniform mixture of the n placements of psi among copies of theta."""
    cfg = cfg or RnoConfig()
    if psi.in_dims != theta.in_dims or psi.out_dims != theta.out_dims:
        raise InvalidRequest(f"channels differ in dims: {psi.in_dims}->{psi.out_dims} vs {theta.in_dims}->{theta.out_dims}")
    if n < 1:
        raise InvalidRequest(f"n must be >= 1, got {n}")
    _choi_side_guard(psi, n, cfg.choi_guard)
    if n == 1:
        return psi
    terms = [qmath.tensor_channels(*([theta] * i + [psi] + [theta] * (n - 1 - i))) for i in range(n)]
    return qmath.mix_channels([1.0 / n] * n, terms).with_label(f"gamma_{n}")


def hadamard_pair() -> Tuple[Channel, Channel]:
    """(H, ZH): an equal mixture sends every basis state to I/2."""
    H = qmath.HADAMARD
    return qmath.unitary_channel(H, 2, label="H"), qmath.unitary_channel(qmath.PAULI_Z @ H, 2, label="ZH")


def sample_mixing_pair(p: float, rng: SeedLike = None, phases: bool = True) -> Tuple[Channel, Channel]:
    """Coherent qubit rotations whose p-mixture is MIO.

    Psi = R(theta), Phi = Z R(phi) with p sin(2 theta) = (1-p) sin(2 phi), so the
    off-diagonals of Theta(|i><i|) cancel. Diagonal phases on both sides keep that.
    """
    _check_p(p)
    r = qmath.as_rng(rng)
    t = r.uniform(0.2, 1.0) * min(1.0, (1 - p) / p)
    theta = 0.5 * math.asin(t)
    phi = 0.5 * math.asin(min(1.0, p * t / (1 - p)))

    def rot(a: float) -> np.ndarray:
        return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]], dtype=complex)

    A, B = rot(theta), qmath.PAULI_Z @ rot(phi)
    if phases:
        D1 = np.diag(np.exp(2j * math.pi * r.random(2)))
        D2 = np.diag(np.exp(2j * math.pi * r.random(2)))
        A, B = D1 @ A @ D2, D1 @ B @ D2
    return qmath.unitary_channel(A, 2, label="psi"), qmath.unitary_channel(B, 2, label="phi")


def _support_basis(chois: Sequence[np.ndarray]) -> np.ndarray:
    w, v = np.linalg.eigh(qmath.hermitian_part(sum(chois)))
    keep = w > max(float(w[-1]), 1.0) * 1e-12
    return v[:, keep]


def choi_deviation(psi: Channel, phi: Channel, p: float, n: int, guard: int = 4096) -> Tuple[float, float]:
    """||J(Gamma_n) - J(Theta^n)||_1 in the trace-one and trace-d_in conventions."""
    Q = _support_basis([psi.choi, phi.choi])
    r = Q.shape[1]
    if r ** n > guard:
        raise TooLarge(f"support dimension {r}^{n} exceeds guard {guard}")
    Pc = Q.conj().T @ psi.choi @ Q
    Tc = p * Pc + (1 - p) * (Q.conj().T @ phi.choi @ Q)
    target = qmath.kron_all([Tc] * n)
    gamma = sum(qmath.kron_all([Tc] * i + [Pc] + [Tc] * (n - 1 - i)) for i in range(n)) / n
    norm = float(np.sum(np.abs(np.linalg.eigvalsh(qmath.hermitian_part(gamma - target)))))
    return norm / psi.d_in ** n, norm


@dataclass
class ErasureReport:
    n: int
    p: float
    exact_sum_bound: float
    closed_form_bound: Optional[float]
    measured_choi_trace_distance: float
    measured_choi_trace_distance_d_in: float
    measured_diamond_distance: Optional[float]
    threshold_n: int
    eps: float
    cost_lower: Optional[float] = None
    cost_upper: Optional[float] = None
    flags: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "p": self.p,
            "exact_sum_bound": self.exact_sum_bound,
            "closed_form_bound": self.closed_form_bound,
            "measured_choi_trace_distance": self.measured_choi_trace_distance,
            "measured_choi_trace_distance_d_in": self.measured_choi_trace_distance_d_in,
            "measured_diamond_distance": self.measured_diamond_distance,
            "threshold_n": self.threshold_n,
            "eps": self.eps,
            "cost_lower": self.cost_lower,
            "cost_upper": self.cost_upper,
            "flags": dict(self.flags),
        }


def mixing_deviation_bound(
    psi: Channel,
    phi: Channel,
    p: float,
    n: int,
    compute_diamond: bool = False,
    eps: float = 0.1,
    cfg: Optional[RnoConfig] = None,
) -> ErasureReport:
    cfg = cfg or RnoConfig()
    _check_p(p)
    theta = qmath.mix_channels([p, 1 - p], [psi, phi])
    if is_mio_channel(theta, cfg.certify_tolerance) != ChannelVerdict.FREE:
        raise HypothesisViolated(f"mixture at p={p} is not an MIO channel")

    exact = exact_sum_bound(n, p)
    closed = closed_form_bound(n, p)
    one, d_in = choi_deviation(psi, phi, p, n, cfg.choi_guard)
    if one > exact + CHAIN_TOL:
        raise BoundViolation(f"Choi deviation {one:.9g} exceeds exact sum {exact:.9g} at n={n}, p={p}")

    diamond = None
    if compute_diamond and n <= 2:
        diamond = diamond_distance(build_gamma_n(psi, theta, n, cfg), theta.power(n) if n > 1 else theta, cfg)
        if diamond > 0.5 * d_in + CHAIN_TOL:
            raise BoundViolation(f"half diamond distance {diamond:.9g} exceeds half the Choi norm {0.5 * d_in:.9g}")

    flags: Dict[str, Any] = {
        "exact_le_closed": None if closed is None else exact <= closed + 1e-9,
        "choi_le_exact": True,
    }
    if diamond is not None:
        flags["diamond_le_choi_trace_one"] = diamond <= one + CHAIN_TOL
    return ErasureReport(n, p, exact, closed, one, d_in, diamond, threshold_n(eps, p), eps, flags=flags)


# ---------- Destruction cost ----------
def destruction_upper_expression(L: float, eta: float) -> float:
    """log2(2(1-L) e^(1/6) / (eta^2 pi L) + 1/(L(1-L)) + 1) for L in (0, 1)."""
    return math.log2(2.0 * (1 - L) * E6 / (eta ** 2 * math.pi * L) + 1.0 / (L * (1 - L)) + 1.0)


@dataclass
class DestructionCostReport:
    eps: float
    eta: float
    upper_radius: float
    lower_radius: float
    L_upper_radius: float
    L_lower_radius: float
    lower: float
    upper: float
    flags: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "eps": self.eps,
            "eta": self.eta,
            "upper_radius": self.upper_radius,
            "lower_radius": self.lower_radius,
            "L_upper_radius": self.L_upper_radius,
            "L_lower_radius": self.L_lower_radius,
            "lower": self.lower,
            "upper": self.upper,
            "flags": dict(self.flags),
        }


def destruction_cost_bounds(
    E: Channel,
    eps: float,
    eta: float,
    cfg: Optional[RnoConfig] = None,
    restarts: Optional[int] = None,
    seed: SeedLike = None,
) -> DestructionCostReport:
    cfg = cfg or RnoConfig()
    if not (0.0 < eta < eps < 1.0):
        raise InvalidRequest(f"need 0 < eta < eps < 1, got eta={eta}, eps={eps}")
    r_up = eps - eta
    r_low = math.sqrt(eps * (2.0 - eps))
    up, low = smoothed_channel_robustness_sweep(E, [r_up, r_low], cfg, restarts, seed)
    L1, L2 = up.upper_estimate, low.upper_estimate

    flags: Dict[str, Any] = {"smoothed_values_are_upper_estimates": True, "lower_bound_weak": True}
    if L1 >= 1.0 - cfg.certify_tolerance:
        upper = 0.0
        flags["degenerate"] = "robustness 1: the channel is already free, nothing to erase"
    elif L1 <= 1e-12:
        upper = math.inf
        flags["degenerate"] = "robustness 0: the bound is infinite"
    else:
        upper = destruction_upper_expression(L1, eta)

    telemetry.current().gap_logged(
        "weak_lower_bound",
        "the destruction lower bound compares a probability with a log-count",
        lower=L2,
        upper=upper,
    )
    return DestructionCostReport(eps, eta, r_up, r_low, L1, L2, L2, upper, flags)


# ---------- Sweeps ----------
@dataclass
class ErasureSweep:
    rows: List[Dict[str, Any]]
    thresholds: List[Dict[str, Any]]

    @property
    def all_chains_hold(self) -> bool:
        return all(r["chain_ok"] for r in self.rows)

    def to_dict(self) -> Dict[str, Any]:
        return {"rows": list(self.rows), "thresholds": list(self.thresholds), "all_chains_hold": self.all_chains_hold}


def erasure_sweep(
    ps: Sequence[float] = (0.3, 0.5, 0.7),
    ns: Sequence[int] = (2, 3, 4, 5, 6),
    pairs: int = 5,
    eps: float = 0.1,
    compute_diamond: bool = True,
    seed: SeedLike = 0,
    cfg: Optional[RnoConfig] = None,
    progress: bool = False,
) -> ErasureSweep:
    """Bound chain over a (p, n) grid, each cell with `pairs` sampled channel pairs."""
    cfg = cfg or RnoConfig()
    rng = qmath.as_rng(seed)
    rows: List[Dict[str, Any]] = []
    cells = [(p, n) for p in ps for n in ns]
    for p, n in tqdm(cells, desc="erasure sweep", disable=not progress):
        for j in range(int(pairs)):
            psi, phi = sample_mixing_pair(p, rng)
            rep = mixing_deviation_bound(psi, phi, p, n, compute_diamond and n <= 2, eps, cfg)
            closed = rep.closed_form_bound
            chain_ok = rep.measured_choi_trace_distance <= rep.exact_sum_bound + CHAIN_TOL
            if closed is not None:
                chain_ok = chain_ok and rep.exact_sum_bound <= closed + CHAIN_TOL
            rows.append(
                {
                    "p": p,
                    "n": n,
                    "pair": j,
                    "diamond": rep.measured_diamond_distance,
                    "choi_trace_one": rep.measured_choi_trace_distance,
                    "choi_trace_d_in": rep.measured_choi_trace_distance_d_in,
                    "exact_sum": rep.exact_sum_bound,
                    "closed_form": closed,
                    "chain_ok": chain_ok,
                }
            )
    thresholds = [{"p": p, "eps": eps, "threshold_n": threshold_n(eps, p)} for p in ps]
    sweep = ErasureSweep(rows, thresholds)
    telemetry.current().finding("erasure_chain", sweep.all_chains_hold, cells=len(cells), pairs=int(pairs))
    return sweep
