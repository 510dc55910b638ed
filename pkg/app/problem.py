"""Problem files: JSON in, validated object graph out.

Layout (version "1")::

    {
      "version": "1",
      "model": {"kind": "incoherent", "d": 2},
      "objects": {
        "plus": {"type": "state", "dims": [2], "matrix": [[[0.5, 0], [0.5, 0]], [[0.5, 0], [0.5, 0]]]},
        "H":    {"type": "channel", "representation": "kraus", "in_dims": [2], "out_dims": [2],
                 "operators": [ ...one matrix per Kraus operator... ]}
      },
      "command": {"name": "robustness", "params": {"state": "plus"}},
      "seed": 7,
      "tolerances": {"sdp_tolerance": 1e-7}
    }

Matrices are lists of rows; every entry is an ``[re, im]`` pair.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from core.config import RnoConfig
from core.errors import InvalidRequest, IoError, ParseError, RnoError, ValidationError
from core.freesets import FreeSetModel, model_from_descriptor
from core.qmath import NORMALIZATIONS, TRACE_D_IN, Channel, DensityMatrix

SCHEMA_VERSION = "1"

COMMANDS = (
    "robustness",
    "std-robustness",
    "geometric",
    "transform",
    "channel-robustness",
    "smooth-channel-robustness",
    "diamond",
    "divergence",
    "erasure-sweep",
    "cost-bounds",
    "destruction-bounds",
    "capacity-bound",
    "seesaw",
    "axioms",
)

TOLERANCE_KEYS = ("sdp_tolerance", "certify_tolerance", "psd_tol")

QObject = Union[DensityMatrix, Channel]


@dataclass
class ProblemFile:
    version: str
    model_descriptor: Dict[str, Any]
    model: Optional[FreeSetModel]
    objects: Dict[str, QObject]
    command: str
    params: Dict[str, Any]
    seed: int
    tolerances: Dict[str, float] = field(default_factory=dict)
    source: str = ""

    def get_state(self, key: str) -> DensityMatrix:
        obj = self._resolve(key)
        if not isinstance(obj, DensityMatrix):
            raise ParseError(f"/command/params/{key}", f"object {self.params[key]!r} is not a state")
        return obj

    def get_channel(self, key: str) -> Channel:
        obj = self._resolve(key)
        if not isinstance(obj, Channel):
            raise ParseError(f"/command/params/{key}", f"object {self.params[key]!r} is not a channel")
        return obj

    def require_model(self) -> FreeSetModel:
        if self.model is None:
            raise ParseError("/model", f"command {self.command!r} needs a model descriptor")
        return self.model

    def _resolve(self, key: str) -> QObject:
        if key not in self.params:
            raise ParseError(f"/command/params/{key}", "missing object reference")
        name = self.params[key]
        if not isinstance(name, str) or name not in self.objects:
            raise ParseError(f"/command/params/{key}", f"unknown object {name!r}")
        return self.objects[name]

    def object_hashes(self) -> Dict[str, str]:
        return {name: object_hash(obj) for name, obj in sorted(self.objects.items())}

    def configure(self, cfg: RnoConfig) -> RnoConfig:
        """Copy of `cfg` with this file's seed and tolerances applied."""
        out = replace(cfg, seed=int(self.seed))
        for key, value in self.tolerances.items():
            setattr(out, key, float(value))
        return out

    def with_overrides(
        self,
        seed: Optional[int] = None,
        restarts: Optional[int] = None,
        tight: Optional[bool] = None,
    ) -> "ProblemFile":
        params = dict(self.params)
        if restarts is not None:
            params["restarts"] = int(restarts)
        if tight is not None:
            params["tight"] = bool(tight)
        return replace(self, params=params, seed=self.seed if seed is None else int(seed))


def object_hash(obj: QObject) -> str:
    h = hashlib.sha256()
    if isinstance(obj, DensityMatrix):
        h.update(b"state")
        h.update(repr(tuple(obj.dims)).encode())
        h.update(np.ascontiguousarray(obj.matrix, dtype=complex).tobytes())
    else:
        h.update(b"channel")
        h.update(repr((tuple(obj.in_dims), tuple(obj.out_dims))).encode())
        h.update(np.ascontiguousarray(obj.choi, dtype=complex).tobytes())
    return h.hexdigest()


# ---------- Parsing helpers ----------
def _expect(cond: bool, pointer: str, message: str) -> None:
    if not cond:
        raise ParseError(pointer, message)


def _dims(raw: Any, pointer: str) -> Tuple[int, ...]:
    _expect(isinstance(raw, list) and len(raw) > 0, pointer, "dims must be a non-empty list")
    out = []
    for i, d in enumerate(raw):
        _expect(isinstance(d, int) and not isinstance(d, bool) and d >= 1, f"{pointer}/{i}", f"dimension must be a positive integer, got {d!r}")
        out.append(int(d))
    return tuple(out)


def _number(x: Any, pointer: str) -> float:
    _expect(isinstance(x, (int, float)) and not isinstance(x, bool), pointer, f"expected a number, got {x!r}")
    v = float(x)
    _expect(math.isfinite(v), pointer, "matrix entries must be finite")
    return v


def parse_matrix(raw: Any, pointer: str) -> np.ndarray:
    """Rows of [re, im] pairs into a square complex array."""
    _expect(isinstance(raw, list) and len(raw) > 0, pointer, "matrix must be a non-empty list of rows")
    n_cols: Optional[int] = None
    rows: List[List[complex]] = []
    for i, row in enumerate(raw):
        _expect(isinstance(row, list) and len(row) > 0, f"{pointer}/{i}", "row must be a non-empty list")
        if n_cols is None:
            n_cols = len(row)
        _expect(len(row) == n_cols, f"{pointer}/{i}", f"row has {len(row)} entries, expected {n_cols}")
        vals = []
        for j, entry in enumerate(row):
            p = f"{pointer}/{i}/{j}"
            _expect(isinstance(entry, list) and len(entry) == 2, p, "entry must be an [re, im] pair")
            vals.append(complex(_number(entry[0], f"{p}/0"), _number(entry[1], f"{p}/1")))
        rows.append(vals)
    return np.array(rows, dtype=complex)


def encode_matrix(M: np.ndarray) -> List[List[List[float]]]:
    M = np.asarray(M, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def _parse_state(name: str, raw: Mapping[str, Any], pointer: str) -> DensityMatrix:
    dims = _dims(raw.get("dims"), f"{pointer}/dims")
    M = parse_matrix(raw.get("matrix"), f"{pointer}/matrix")
    try:
        return DensityMatrix(M, dims)
    except RnoError as e:
        raise ValidationError(f"state {name!r}: {e}") from None


def _parse_channel(name: str, raw: Mapping[str, Any], pointer: str) -> Channel:
    in_dims = _dims(raw.get("in_dims"), f"{pointer}/in_dims")
    out_dims = _dims(raw.get("out_dims", list(in_dims)), f"{pointer}/out_dims")
    rep = raw.get("representation")
    _expect(rep in ("kraus", "choi"), f"{pointer}/representation", f"representation must be 'kraus' or 'choi', got {rep!r}")
    try:
        if rep == "kraus":
            ops = raw.get("operators")
            _expect(isinstance(ops, list) and len(ops) > 0, f"{pointer}/operators", "Kraus list must be non-empty")
            mats = [parse_matrix(K, f"{pointer}/operators/{i}") for i, K in enumerate(ops)]
            return Channel.from_kraus(mats, in_dims, out_dims, label=name)
        norm = raw.get("normalization", TRACE_D_IN)
        _expect(norm in NORMALIZATIONS, f"{pointer}/normalization", f"normalization must be one of {NORMALIZATIONS}")
        J = parse_matrix(raw.get("matrix"), f"{pointer}/matrix")
        return Channel.from_choi(J, in_dims, out_dims, normalization=norm, label=name)
    except ParseError:
        raise
    except RnoError as e:
        raise ValidationError(f"channel {name!r}: {e}") from None


def _parse_objects(raw: Any) -> Dict[str, QObject]:
    if raw is None:
        return {}
    _expect(isinstance(raw, dict), "/objects", "objects must be a mapping of names to objects")
    out: Dict[str, QObject] = {}
    for name, obj in raw.items():
        pointer = f"/objects/{name}"
        _expect(isinstance(obj, dict), pointer, "object must be a mapping")
        kind = obj.get("type")
        if kind == "state":
            out[name] = _parse_state(name, obj, pointer)
        elif kind == "channel":
            out[name] = _parse_channel(name, obj, pointer)
        else:
            raise ParseError(f"{pointer}/type", f"type must be 'state' or 'channel', got {kind!r}")
    return out


def _parse_model(raw: Any) -> Tuple[Dict[str, Any], Optional[FreeSetModel]]:
    if raw is None:
        return {}, None
    _expect(isinstance(raw, dict), "/model", "model must be a mapping")
    try:
        return dict(raw), model_from_descriptor(raw)
    except (InvalidRequest, TypeError, ValueError) as e:
        raise ParseError("/model", str(e)) from None


def _parse_tolerances(raw: Any) -> Dict[str, float]:
    if raw is None:
        return {}
    _expect(isinstance(raw, dict), "/tolerances", "tolerances must be a mapping")
    out = {}
    for key, value in raw.items():
        _expect(key in TOLERANCE_KEYS, f"/tolerances/{key}", f"unknown tolerance; choose from {TOLERANCE_KEYS}")
        v = _number(value, f"/tolerances/{key}")
        _expect(0.0 < v < 1.0, f"/tolerances/{key}", "tolerance must lie in (0, 1)")
        out[key] = v
    return out


def parse_problem(data: Any, source: str = "") -> ProblemFile:
    _expect(isinstance(data, dict), "/", "problem file must be a JSON object")
    version = data.get("version", SCHEMA_VERSION)
    _expect(str(version) == SCHEMA_VERSION, "/version", f"unsupported version {version!r}")

    cmd = data.get("command")
    _expect(isinstance(cmd, dict), "/command", "command block is required")
    name = cmd.get("name")
    _expect(name in COMMANDS, "/command/name", f"unknown command {name!r}")
    params = cmd.get("params", {})
    _expect(isinstance(params, dict), "/command/params", "params must be a mapping")

    seed = data.get("seed", RnoConfig().seed)
    _expect(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0, "/seed", "seed must be a non-negative integer")

    descriptor, model = _parse_model(data.get("model"))
    return ProblemFile(
        version=SCHEMA_VERSION,
        model_descriptor=descriptor,
        model=model,
        objects=_parse_objects(data.get("objects")),
        command=str(name),
        params=dict(params),
        seed=int(seed),
        tolerances=_parse_tolerances(data.get("tolerances")),
        source=source,
    )


def parse_problem_file(path: Union[str, Path]) -> ProblemFile:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot read problem file {p}: {e}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError("/", f"invalid JSON at line {e.lineno} column {e.colno}: {e.msg}") from None
    return parse_problem(data, source=str(p))
