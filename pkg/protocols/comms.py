"""Classical communication through a channel with MIO encoders and decoders.

Messages are basis states |k> of an m-level register. The encoder maps them into
the channel input and an ancilla; the channel acts on the system and W on the
ancilla; the decoder maps back to m levels, read out in the basis.
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
from core.errors import InvalidRequest, NotFreeComponent, TooLarge
from core.freesets import ChannelVerdict, is_mio_channel, mio_cone
from core.ledger import FindingsLedger
from core.qmath import Channel, SeedLike
from measures.dynamic import smoothed_channel_robustness

ACCEPT_TOL = 1e-9


@dataclass
class ProtocolSpec:
    N: Channel
    m: int
    ancilla_dim: int
    encoder: Channel
    decoder: Channel
    W: Channel

    @property
    def system_in(self) -> int:
        return self.N.d_in

    @property
    def system_out(self) -> int:
        return self.N.d_out

    def check(self, tol: float = 1e-6) -> None:
        """Shapes and MIO certificates of the encoder, W and the decoder."""
        a = self.ancilla_dim
        if self.encoder.d_in != self.m or self.encoder.d_out != self.system_in * a:
            raise InvalidRequest(f"encoder must map {self.m} levels to {self.system_in}x{a}")
        if self.decoder.d_in != self.system_out * a or self.decoder.d_out != self.m:
            raise InvalidRequest(f"decoder must map {self.system_out}x{a} to {self.m} levels")
        if self.W.d_in != a or self.W.d_out != a:
            raise InvalidRequest(f"W must act on the {a}-level ancilla")
        for name, ch in (("encoder", self.encoder), ("W", self.W), ("decoder", self.decoder)):
            if is_mio_channel(ch, tol) != ChannelVerdict.FREE:
                raise NotFreeComponent(f"{name} is not an MIO channel")


def _middle(spec: ProtocolSpec) -> Channel:
    return qmath.tensor_channels(spec.N, spec.W)


def _success(spec: ProtocolSpec) -> float:
    mid = _middle(spec)
    m = spec.m
    total = 0.0
    for k in range(m):
        e = np.zeros((m, m), dtype=complex)
        e[k, k] = 1.0
        x = qmath.apply_to_operator(spec.encoder, e)
        y = qmath.apply_to_operator(mid, x)
        z = qmath.apply_to_operator(spec.decoder, y)
        total += float(np.real(z[k, k]))
    return float(min(max(total / m, 0.0), 1.0))


def protocol_simulate(spec: ProtocolSpec, tol: float = 1e-6) -> float:
    """Average success probability of the fixed triple."""
    spec.check(tol)
    return _success(spec)


# ---------- Building blocks ----------
def _basis(k: int, d: int) -> np.ndarray:
    e = np.zeros((d, d), dtype=complex)
    e[k, k] = 1.0
    return e


def classical_channel(stochastic: np.ndarray, in_dims: Any, out_dims: Any, label: str = "classical") -> Channel:
    """Measure in the basis, then prepare basis state j with probability S[j, i]."""
    S = np.asarray(stochastic, dtype=float)
    d_in, d_out = S.shape[1], S.shape[0]
    J = sum(np.kron(_basis(i, d_in), np.diag(S[:, i]).astype(complex)) for i in range(d_in))
    return Channel.from_choi(J, in_dims, out_dims, label=label)


def _relay(d_in: int, d_out: int) -> np.ndarray:
    S = np.zeros((d_out, d_in))
    for i in range(d_in):
        S[i % d_out, i] = 1.0
    return S


def _random_stochastic(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    return rng.dirichlet(np.ones(d_out) * 0.5, size=d_in).T


def relay_spec(N: Channel, m: int, ancilla_dim: int = 1, W: Optional[Channel] = None) -> ProtocolSpec:
    """Embed |k> -> |k mod d>, decode |i> -> |i mod m>."""
    a = int(ancilla_dim)
    d_in, d_out = N.d_in * a, N.d_out * a
    enc = classical_channel(_relay(m, d_in), m, (N.d_in, a), "embed")
    dec = classical_channel(_relay(d_out, m), (N.d_out, a), m, "readout")
    return ProtocolSpec(N, m, a, enc, dec, W if W is not None else qmath.identity_channel(a))


def _random_spec(N: Channel, m: int, a: int, W: Channel, rng: np.random.Generator) -> ProtocolSpec:
    d_in, d_out = N.d_in * a, N.d_out * a
    enc = classical_channel(_random_stochastic(rng, m, d_in), m, (N.d_in, a), "encoder")
    dec = classical_channel(_random_stochastic(rng, d_out, m), (N.d_out, a), m, "decoder")
    return ProtocolSpec(N, m, a, enc, dec, W)


def _mio_channel_sdp(name: str, C: np.ndarray, d_in: int, d_out: int, in_dims: Any, out_dims: Any, cfg: RnoConfig) -> Channel:
    """argmax tr(J C) over MIO Choi matrices J."""
    p = SdpProblem(name, "max")
    J = p.block("J", d_in * d_out)
    p.add_cone(mio_cone(J, d_in, d_out, "mio"))
    p.add_equality(cp.partial_trace(J, [d_in, d_out], axis=1), np.eye(d_in), name="trace_preserving")
    p.set_objective(cp.real(cp.trace(J @ C)))
    sol = require_optimal(solve_sdp(p, cfg.sdp()), name, cfg.certify_tolerance)
    return Channel.from_choi(np.asarray(sol.values["J"]), in_dims, out_dims, repair=True, label=name)


def best_decoder(spec: ProtocolSpec, cfg: RnoConfig) -> Channel:
    mid = _middle(spec)
    m = spec.m
    D = spec.system_out * spec.ancilla_dim
    C = np.zeros((D * m, D * m), dtype=complex)
    for k in range(m):
        omega = qmath.apply_to_operator(mid, qmath.apply_to_operator(spec.encoder, _basis(k, m)))
        C += np.kron(omega.T, _basis(k, m))
    return _mio_channel_sdp("seesaw_decoder", C / m, D, m, (spec.system_out, spec.ancilla_dim), m, cfg)


def best_encoder(spec: ProtocolSpec, cfg: RnoConfig) -> Channel:
    mid = _middle(spec)
    m = spec.m
    D = spec.system_in * spec.ancilla_dim
    C = np.zeros((m * D, m * D), dtype=complex)
    for k in range(m):
        A = qmath.adjoint_apply(mid, qmath.adjoint_apply(spec.decoder, _basis(k, m)))
        C += np.kron(_basis(k, m), A)
    return _mio_channel_sdp("seesaw_encoder", C / m, m, D, m, (spec.system_in, spec.ancilla_dim), cfg)


def best_ancilla_map(spec: ProtocolSpec, cfg: RnoConfig) -> Channel:
    a, m = spec.ancilla_dim, spec.m
    d, dp = spec.system_in, spec.system_out
    C = np.zeros((a * a, a * a), dtype=complex)
    for k in range(m):
        rho = qmath.apply_to_operator(spec.encoder, _basis(k, m)).reshape(d, a, d, a)
        B = qmath.adjoint_apply(spec.decoder, _basis(k, m)).reshape(dp, a, dp, a)
        for al in range(a):
            for be in range(a):
                NX = qmath.apply_to_operator(spec.N, rho[:, al, :, be])
                Cab = np.einsum("ij,jdig->dg", NX, B)
                C += np.kron(np.outer(qmath.ket(be, a), qmath.ket(al, a)), Cab)
    return _mio_channel_sdp("seesaw_ancilla", C / m, a, a, a, a, cfg)


# ---------- See-saw ----------
@dataclass
class SeesawResult:
    f_hat: float
    spec: ProtocolSpec
    trajectory: List[float] = field(default_factory=list)
    restarts: int = 0
    monotone: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "f_hat": self.f_hat,
            "m": self.spec.m,
            "ancilla_dim": self.spec.ancilla_dim,
            "restarts": self.restarts,
            "rounds": len(self.trajectory),
            "trajectory": list(self.trajectory),
            "monotone": self.monotone,
            "is_lower_bound": True,
        }


def _guard(N: Channel, m: int, a: int, cfg: RnoConfig) -> None:
    side = max(m * N.d_in * a, m * N.d_out * a)
    if side > cfg.choi_guard:
        raise TooLarge(f"see-saw Choi side {side} exceeds guard {cfg.choi_guard}")


@dataclass
class _SeesawRun:
    spec: ProtocolSpec
    f: float
    trajectory: List[float]
    decreases: List[float]


def _run_seesaw(start: ProtocolSpec, cfg: RnoConfig, rounds: int, alternate_w: bool) -> _SeesawRun:
    spec = start
    f = _success(spec)
    best_spec, best_f = spec, f
    traj, decreases = [f], []
    # Step values are certified only up to the solver tolerance.
    slack = ACCEPT_TOL + cfg.certify_tolerance
    t = telemetry.current()
    for rnd in range(int(rounds)):
        before = f
        steps = [("decoder", best_decoder), ("encoder", best_encoder)]
        if alternate_w:
            steps.append(("W", best_ancilla_map))
        for field_name, step in steps:
            cand = ProtocolSpec(spec.N, spec.m, spec.ancilla_dim, spec.encoder, spec.decoder, spec.W)
            setattr(cand, field_name, step(spec, cfg))
            try:
                cand.check(cfg.certify_tolerance)
            except NotFreeComponent as exc:
                t.gap_logged("seesaw_step_skipped", str(exc), step=field_name, round=rnd, m=spec.m)
                traj.append(f)
                continue
            fc = _success(cand)
            if fc < f - slack:
                decreases.append(f - fc)
                t.finding("seesaw_monotone", False, step=field_name, round=rnd, m=spec.m, before=f, after=fc)
            spec, f = cand, fc
            if f > best_f:
                best_spec, best_f = spec, f
            traj.append(f)
        if f - before < cfg.seesaw_gain_tol:
            break
    return _SeesawRun(best_spec, best_f, traj, decreases)


def seesaw_success_probability(
    N: Channel,
    m: int,
    ancilla_dim: int = 1,
    cfg: Optional[RnoConfig] = None,
    rounds: Optional[int] = None,
    restarts: Optional[int] = None,
    seed: SeedLike = None,
    W: Optional[Channel] = None,
    alternate_w: bool = False,
    progress: bool = False,
) -> SeesawResult:
    """Alternating SDP maximization over decoder and encoder; the best simulated value is an achievable f."""
    cfg = cfg or RnoConfig()
    if m < 2:
        raise InvalidRequest(f"need at least 2 messages, got {m}")
    if ancilla_dim < 1:
        raise InvalidRequest(f"ancilla dimension must be >= 1, got {ancilla_dim}")
    _guard(N, m, ancilla_dim, cfg)
    rounds = cfg.seesaw_rounds if rounds is None else int(rounds)
    restarts = cfg.seesaw_restarts if restarts is None else int(restarts)
    rng = qmath.as_rng(cfg.seed if seed is None else seed)
    W = W if W is not None else qmath.identity_channel(ancilla_dim)

    best: Optional[SeesawResult] = None
    for r in tqdm(range(max(1, restarts)), desc=f"seesaw[m={m}]", disable=not progress):
        start = relay_spec(N, m, ancilla_dim, W) if r == 0 else _random_spec(N, m, ancilla_dim, W, rng)
        run = _run_seesaw(start, cfg, rounds, alternate_w)
        monotone = not run.decreases
        if best is None or run.f > best.f_hat:
            best = SeesawResult(run.f, run.spec, run.trajectory, restarts, monotone and (best is None or best.monotone))
        elif not monotone:
            best.monotone = False
    return best


def achievability_scan(
    N: Channel,
    theta: float,
    ms: Sequence[int] = (2, 3, 4),
    ancilla_dim: int = 1,
    cfg: Optional[RnoConfig] = None,
    restarts: Optional[int] = None,
    seed: SeedLike = None,
) -> Tuple[int, Dict[int, float]]:
    """Largest m in `ms` with 1 - f_hat(m) <= theta (1 when none qualifies)."""
    f_hats: Dict[int, float] = {}
    achieved = 1
    for m in ms:
        f_hats[int(m)] = seesaw_success_probability(N, int(m), ancilla_dim, cfg, restarts=restarts, seed=seed).f_hat
        if 1.0 - f_hats[int(m)] <= theta + ACCEPT_TOL:
            achieved = max(achieved, int(m))
    return achieved, f_hats


# ---------- Capacity bound ----------
def capacity_bound_value(L: float, theta: float, delta: float) -> float:
    """1 / (L (1 - theta - delta)): the bound on the number of messages."""
    if L <= 0:
        return math.inf
    return 1.0 / (L * (1.0 - theta - delta))


@dataclass
class CapacityReport:
    theta: float
    delta: float
    L_delta_estimate: float
    bound_on_m: float
    achieved_f: Optional[float]
    achieved_m: Optional[int]
    consistent: Optional[bool]
    f_hats: Dict[int, float] = field(default_factory=dict)

    @property
    def bound_bits(self) -> float:
        return math.log2(self.bound_on_m) if self.bound_on_m > 0 else -math.inf

    def to_dict(self) -> Dict[str, Any]:
        return {
            "theta": self.theta,
            "delta": self.delta,
            "L_delta_estimate": self.L_delta_estimate,
            "L_is_upper_estimate": True,
            "bound_on_m": self.bound_on_m,
            "bound_is_lower_estimate": True,
            "bound_bits": self.bound_bits,
            "achieved_f": self.achieved_f,
            "achieved_m": self.achieved_m,
            "consistent": self.consistent,
            "f_hats": {str(k): v for k, v in self.f_hats.items()},
        }


def capacity_bound(
    N: Channel,
    theta: float,
    delta: float,
    cfg: Optional[RnoConfig] = None,
    ms: Optional[Sequence[int]] = (2, 3, 4),
    ancilla_dim: int = 1,
    restarts: Optional[int] = None,
    seed: SeedLike = None,
    ledger: Optional[FindingsLedger] = None,
    label: str = "",
) -> CapacityReport:
    """Evaluate the one-shot bound and, when `ms` is given, compare it with see-saw achievability.

    The robustness entering the bound is an upper estimate, so `bound_on_m` is a lower
    estimate of the bound; a consistent verdict therefore implies the inequality on the instance.
    """
    cfg = cfg or RnoConfig()
    if not (0.0 < theta < 1.0) or not (0.0 <= delta < 1.0):
        raise InvalidRequest(f"need theta in (0, 1) and delta in [0, 1), got theta={theta}, delta={delta}")
    if theta + delta >= 1.0:
        raise InvalidRequest(f"theta + delta = {theta + delta} must be < 1")

    L = smoothed_channel_robustness(N, delta, cfg, restarts=restarts, seed=seed).upper_estimate
    bound = capacity_bound_value(L, theta, delta)
    report = CapacityReport(theta, delta, L, bound, None, None, None)
    if not ms:
        return report

    achieved, f_hats = achievability_scan(N, theta, ms, ancilla_dim, cfg, restarts, seed)
    report.achieved_m = achieved
    report.achieved_f = f_hats.get(achieved, 1.0)
    report.f_hats = f_hats
    report.consistent = achieved <= bound + ACCEPT_TOL

    t = telemetry.current()
    t.finding(f"capacity_bound{('_' + label) if label else ''}", report.consistent, achieved_m=achieved, bound_on_m=bound)
    if not report.consistent:
        t.gap_logged(
            "capacity_bound_inequality",
            "achieved message count exceeds the one-shot bound on this instance",
            achieved_m=achieved,
            bound_on_m=bound,
        )
    if ledger is not None:
        ledger.record(f"capacity_bound{('_' + label) if label else ''}", bool(report.consistent), report.to_dict())
    return report
