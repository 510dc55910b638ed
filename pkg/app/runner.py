"""Dispatch a parsed problem file to the library and assemble its report.

A report is a plain mapping: the command, the seed, hashes of every input
object, the tolerances in force and the command's result. Nothing time- or
host-dependent enters it unless `report_wall_time` is set, so a fixed file and
seed give identical bytes.
"""
from __future__ import annotations

import time
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from app.problem import SCHEMA_VERSION, ProblemFile
from app.reports import clean
from core import qmath
from core.config import RnoConfig
from core.errors import ParseError, Vacuous
from core.freesets import IncoherentModel
from core.ledger import FindingsLedger
from core.qmath import Channel
from measures import dynamic, static
from protocols import asymptotic, comms, erasure, transform


class _Ctx:
    def __init__(self, pf: ProblemFile, cfg: RnoConfig, ledger: Optional[FindingsLedger], progress: bool):
        self.pf = pf
        self.cfg = cfg
        self.ledger = ledger
        self.progress = progress

    # ---------- Param access ----------
    def _raw(self, key: str, default: Any) -> Any:
        return self.pf.params.get(key, default)

    def _fail(self, key: str, message: str) -> ParseError:
        return ParseError(f"/command/params/{key}", message)

    def number(self, key: str, default: Optional[float] = None) -> float:
        v = self._raw(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise self._fail(key, f"expected a number, got {v!r}")
        return float(v)

    def integer(self, key: str, default: Optional[int] = None) -> int:
        v = self._raw(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise self._fail(key, f"expected an integer, got {v!r}")
        return int(v)

    def flag(self, key: str, default: bool = False) -> bool:
        v = self._raw(key, default)
        if not isinstance(v, bool):
            raise self._fail(key, f"expected true or false, got {v!r}")
        return v

    def text(self, key: str, default: str) -> str:
        v = self._raw(key, default)
        if not isinstance(v, str):
            raise self._fail(key, f"expected a string, got {v!r}")
        return v

    def numbers(self, key: str, default: List[float]) -> List[float]:
        v = self._raw(key, default)
        if not isinstance(v, list) or not v or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
            raise self._fail(key, f"expected a non-empty list of numbers, got {v!r}")
        return [float(x) for x in v]

    def integers(self, key: str, default: List[int]) -> List[int]:
        v = self._raw(key, default)
        if not isinstance(v, list) or not v or any(isinstance(x, bool) or not isinstance(x, int) for x in v):
            raise self._fail(key, f"expected a non-empty list of integers, got {v!r}")
        return [int(x) for x in v]

    def restarts(self) -> Optional[int]:
        return self.integer("restarts") if "restarts" in self.pf.params else None

    @property
    def seed(self) -> int:
        return self.pf.seed


def _cptp_residuals(ch: Channel) -> Dict[str, float]:
    tp = qmath.ptrace(ch.choi, (ch.d_in, ch.d_out), [0]) - np.eye(ch.d_in)
    return {"trace_preserving": float(np.max(np.abs(tp))), "min_choi_eigenvalue": qmath.min_eig(ch.choi)}


# ---------- Static ----------
def _robustness(ctx: _Ctx) -> Dict[str, Any]:
    m = ctx.pf.require_model()
    rho = ctx.pf.get_state("state")
    res = static.robustness(m, rho, ctx.text("quantifier", static.GENERALIZED), ctx.cfg)
    out = res.to_dict()
    out["log_value"] = res.log_value()
    out["verdict"] = m.is_free_state(rho, ctx.cfg.psd_tol).value
    if "eps" in ctx.pf.params:
        eps = ctx.number("eps")
        out["smoothed"] = {"eps": eps, "value": static.smoothed_log_robustness(m, rho, eps, "R", ctx.cfg)}
    return out


def _std_robustness(ctx: _Ctx) -> Dict[str, Any]:
    m = ctx.pf.require_model()
    res = static.standard_robustness(m, ctx.pf.get_state("state"), ctx.cfg)
    out = res.to_dict()
    out["log_value"] = res.log_value()
    return out


def _geometric(ctx: _Ctx) -> Dict[str, Any]:
    m = ctx.pf.require_model()
    psi = ctx.pf.get_state("state")
    return {
        "geometric": static.geometric_measure_pure(m, psi),
        "pure_closed_form": static.pure_state_robustness(m, psi),
        "max_free_overlap": m.max_free_overlap(psi),
    }


def _transform(ctx: _Ctx) -> Dict[str, Any]:
    m = ctx.pf.require_model()
    psi, sigma = ctx.pf.get_state("source"), ctx.pf.get_state("target")
    tight = ctx.flag("tight", False)
    plan = transform.check_condition(m, psi, sigma, tight, ctx.cfg)
    out: Dict[str, Any] = {"plan": plan.to_dict()}
    if plan.feasible:
        ch = transform.build_transform_channel(plan)
        samples = ctx.integer("samples", ctx.cfg.free_samples)
        check = transform.verify_transform(m, ch, samples, ctx.seed, plan, ctx.cfg.psd_tol, ctx.progress)
        out["verification"] = check.to_dict()
        out["channel_residuals"] = _cptp_residuals(ch)
    if "ns" in ctx.pf.params:
        plans = transform.corollary_condition_check(m, psi, sigma, ctx.integers("ns", [1, 2]), tight, ctx.cfg)
        out["rows"] = [{"n": n, **p.to_dict()} for n, p in zip(ctx.integers("ns", [1, 2]), plans)]
    return out


# ---------- Dynamic ----------
def _channel_robustness(ctx: _Ctx) -> Dict[str, Any]:
    E = ctx.pf.get_channel("channel")
    res = dynamic.channel_rno_robustness(E, ctx.cfg, ctx.pf.model)
    F = dynamic.channel_divergence_to_free(E, ctx.cfg, ctx.pf.model)
    out = res.to_dict()
    out["divergence_bits"] = F
    out["robustness_times_exp_divergence"] = res.p_star * 2.0 ** F
    return out


def _smooth_channel_robustness(ctx: _Ctx) -> Dict[str, Any]:
    E = ctx.pf.get_channel("channel")
    grid = ctx.numbers("eps_grid", []) if "eps_grid" in ctx.pf.params else [ctx.number("eps", 0.0)]
    results = dynamic.smoothed_channel_robustness_sweep(E, grid, ctx.cfg, ctx.restarts(), ctx.seed, ctx.progress)
    return {"rows": [r.to_dict() for r in results]}


def _diamond(ctx: _Ctx) -> Dict[str, Any]:
    E1, E2 = ctx.pf.get_channel("first"), ctx.pf.get_channel("second")
    return dynamic.diamond_certificate(E1, E2, ctx.cfg, ctx.integer("samples", 64), ctx.seed).to_dict()


def _divergence(ctx: _Ctx) -> Dict[str, Any]:
    E = ctx.pf.get_channel("channel")
    dist = dynamic.epsilon_rno_distance(E, ctx.cfg)
    return {
        "divergence_bits": dynamic.channel_divergence_to_free(E, ctx.cfg, ctx.pf.model),
        "epsilon_rno_distance": dist.distance,
        "residuals": dist.residuals,
    }


# ---------- Protocols ----------
def _erasure_sweep(ctx: _Ctx) -> Dict[str, Any]:
    ps = ctx.numbers("ps", [0.3, 0.5, 0.7])
    ns = ctx.integers("ns", [2, 3, 4, 5, 6])
    eps = ctx.number("eps", 0.1)
    diamond = ctx.flag("compute_diamond", True)
    if "first" not in ctx.pf.params:
        sweep = erasure.erasure_sweep(ps, ns, ctx.integer("pairs", 5), eps, diamond, ctx.seed, ctx.cfg, ctx.progress)
        return sweep.to_dict()

    psi, phi = ctx.pf.get_channel("first"), ctx.pf.get_channel("second")
    rows = []
    for p in ps:
        for n in ns:
            rep = erasure.mixing_deviation_bound(psi, phi, p, n, diamond and n <= 2, eps, ctx.cfg)
            rows.append(rep.to_dict())
    thresholds = [{"p": p, "eps": eps, "threshold_n": erasure.threshold_n(eps, p)} for p in ps]
    return {"rows": rows, "thresholds": thresholds}


def _cost_bounds(ctx: _Ctx) -> Dict[str, Any]:
    m = ctx.pf.require_model()
    rho = ctx.pf.get_state("state")
    ns = ctx.integers("ns", [1, 2])
    reports = asymptotic.cost_bounds(m, rho, ns, ctx.number("eps", 0.0), ctx.cfg)
    out: Dict[str, Any] = {"rows": [r.to_dict() for r in reports]}
    if ctx.flag("cost_channel", False):
        try:
            built = asymptotic.build_cost_channel(m, rho, ns[0], ctx.integer("samples", 200), ctx.seed, ctx.cfg)
            out["cost_channel"] = built.to_dict()
        except Vacuous as e:
            out["cost_channel"] = {"vacuous": True, "reason": str(e)}
    return out


def _destruction_bounds(ctx: _Ctx) -> Dict[str, Any]:
    E = ctx.pf.get_channel("channel")
    rep = erasure.destruction_cost_bounds(E, ctx.number("eps"), ctx.number("eta"), ctx.cfg, ctx.restarts(), ctx.seed)
    return rep.to_dict()


def _capacity_bound(ctx: _Ctx) -> Dict[str, Any]:
    N = ctx.pf.get_channel("channel")
    ms = None if ctx.pf.params.get("ms", [2, 3, 4]) is None else ctx.integers("ms", [2, 3, 4])
    rep = comms.capacity_bound(
        N,
        ctx.number("theta"),
        ctx.number("delta"),
        ctx.cfg,
        ms,
        ctx.integer("ancilla_dim", 1),
        ctx.restarts(),
        ctx.seed,
        ctx.ledger,
        ctx.text("label", N.label),
    )
    return rep.to_dict()


def _seesaw(ctx: _Ctx) -> Dict[str, Any]:
    N = ctx.pf.get_channel("channel")
    rounds = ctx.integer("rounds") if "rounds" in ctx.pf.params else None
    res = comms.seesaw_success_probability(
        N,
        ctx.integer("m"),
        ctx.integer("ancilla_dim", 1),
        ctx.cfg,
        rounds=rounds,
        restarts=ctx.restarts(),
        seed=ctx.seed,
        alternate_w=ctx.flag("alternate_w", False),
        progress=ctx.progress,
    )
    return res.to_dict()


def _axioms(ctx: _Ctx) -> Dict[str, Any]:
    target = ctx.text("target", "states")
    trials = ctx.integer("trials", 20)
    if target == "channels":
        m = ctx.pf.model
        d = m.d if isinstance(m, IncoherentModel) else ctx.integer("d", 2)
        return dynamic.channel_axiom_suite(d, trials, ctx.seed, ctx.cfg, ctx.ledger, progress=ctx.progress).to_dict()
    if target != "states":
        raise ParseError("/command/params/target", f"target must be 'states' or 'channels', got {target!r}")
    rep = static.quantifier_axiom_suite(
        ctx.pf.require_model(),
        ctx.text("quantifier", static.GENERALIZED),
        trials,
        ctx.seed,
        ctx.cfg,
        ctx.ledger,
        free_only=ctx.flag("free_only", False),
        progress=ctx.progress,
    )
    return rep.to_dict()


HANDLERS: Dict[str, Callable[[_Ctx], Dict[str, Any]]] = {
    "robustness": _robustness,
    "std-robustness": _std_robustness,
    "geometric": _geometric,
    "transform": _transform,
    "channel-robustness": _channel_robustness,
    "smooth-channel-robustness": _smooth_channel_robustness,
    "diamond": _diamond,
    "divergence": _divergence,
    "erasure-sweep": _erasure_sweep,
    "cost-bounds": _cost_bounds,
    "destruction-bounds": _destruction_bounds,
    "capacity-bound": _capacity_bound,
    "seesaw": _seesaw,
    "axioms": _axioms,
}


def run_command(
    pf: ProblemFile,
    cfg: Optional[RnoConfig] = None,
    ledger: Optional[FindingsLedger] = None,
    progress: bool = False,
) -> Dict[str, Any]:
    cfg = pf.configure(cfg or RnoConfig())
    ctx = _Ctx(pf, cfg, ledger, progress)
    t0 = time.perf_counter()
    result = HANDLERS[pf.command](ctx)
    report: Dict[str, Any] = {
        "version": SCHEMA_VERSION,
        "command": pf.command,
        "seed": pf.seed,
        "model": dict(pf.model_descriptor),
        "inputs": pf.object_hashes(),
        "params": dict(pf.params),
        "tolerances": {
            "sdp_tolerance": cfg.sdp_tolerance,
            "certify_tolerance": cfg.certify_tolerance,
            "psd_tol": cfg.psd_tol,
        },
        "result": result,
    }
    if cfg.report_wall_time:
        report["wall_time_sec"] = time.perf_counter() - t0
    return clean(report)
