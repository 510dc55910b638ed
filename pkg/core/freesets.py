"""Free-set models: incoherent states (MIO dynamics) and PPT-separable states."""
from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np

from core import qmath
from core.errors import InvalidRequest, InvalidShape
from core.qmath import Channel, DensityMatrix, SeedLike

PPT_EXACT_MAX = 6


class Verdict(str, Enum):
    FREE = "Free"
    NOT_FREE = "NotFree"
    UNKNOWN_RELAXATION = "UnknownRelaxation"


class ChannelVerdict(str, Enum):
    FREE = "Free"
    NOT_FREE = "NotFree"
    NOT_FALSIFIED = "NotFalsified"


@dataclass
class ConeDescription:
    """Conic conditions for "block in cone(F)": equalities `e == 0` and PSD expressions."""

    name: str
    equalities: List[cp.Expression] = field(default_factory=list)
    psd: List[cp.Expression] = field(default_factory=list)

    def constraints(self) -> List[cp.Constraint]:
        out: List[cp.Constraint] = [e == 0 for e in self.equalities]
        for e in self.psd:
            e = e if e.is_hermitian() else (e + e.H) / 2
            out.append(e >> 0)
        return out


def mio_cone(J: cp.Expression, d_in: int, d_out: int, name: str = "mio") -> ConeDescription:
    """Choi matrices of the MIO cone: PSD with every diagonal block E(|i><i|) diagonal."""
    eqs = []
    for i in range(d_in):
        base = i * d_out
        for a in range(d_out):
            for b in range(d_out):
                if a != b:
                    eqs.append(J[base + a, base + b])
    return ConeDescription(name=name, equalities=eqs, psd=[J])


def is_mio_channel(ch: Channel, tol: float = 1e-9) -> ChannelVerdict:
    """Exact MIO test for a channel of any shape: each E(|i><i|) block of the Choi matrix is diagonal."""
    J, d_in, d_out = ch.choi, ch.d_in, ch.d_out
    for i in range(d_in):
        blk = J[i * d_out:(i + 1) * d_out, i * d_out:(i + 1) * d_out]
        if float(np.max(np.abs(blk - np.diag(np.diag(blk))), initial=0.0)) > tol:
            return ChannelVerdict.NOT_FREE
    return ChannelVerdict.FREE


def _dirichlet(rng: np.random.Generator, k: int) -> np.ndarray:
    return rng.dirichlet(np.ones(k))


class FreeSetModel(ABC):
    kind: str = ""
    copies: int = 1

    # ---------- Shape ----------
    @property
    @abstractmethod
    def unit_dims(self) -> Tuple[int, ...]:
        ...

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(self.unit_dims) * self.copies

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    @abstractmethod
    def local_d(self) -> int:
        """Base of c(n) = d^-n."""

    @abstractmethod
    def power(self, n: int) -> "FreeSetModel":
        ...

    @abstractmethod
    def describe(self) -> Dict[str, Any]:
        ...

    def check_state(self, rho: DensityMatrix) -> None:
        if rho.dim != self.dim:
            raise InvalidShape(f"state of dimension {rho.dim} does not fit model dims {self.dims}")

    # ---------- Membership ----------
    @abstractmethod
    def violation(self, rho: DensityMatrix) -> float:
        """How far a state is from passing the membership test (0 when it passes)."""

    @abstractmethod
    def is_free_state(self, rho: DensityMatrix, tol: float = 1e-9) -> Verdict:
        ...

    @abstractmethod
    def free_cone_constraints(self, X: cp.Expression, name: str = "free") -> ConeDescription:
        ...

    @abstractmethod
    def is_rno_channel(self, ch: Channel, tol: float = 1e-9, samples: int = 500, seed: SeedLike = 0) -> ChannelVerdict:
        ...

    def structurally_infeasible(self, rho: DensityMatrix, tol: float = 1e-9) -> bool:
        """True when no free mixer can make rho free (standard robustness is +inf)."""
        return False

    @abstractmethod
    def project_free(self, rho: DensityMatrix, margin: float = 1e-8) -> DensityMatrix:
        """Nearby state that passes the membership test; used to clean solver output."""

    # ---------- Resource structure ----------
    def max_resource_state(self, n: int = 1) -> DensityMatrix:
        if n <= 0:
            raise InvalidRequest(f"copies must be >= 1, got {n}")
        unit = self._resource_unit()
        return unit.power(n)

    @abstractmethod
    def _resource_unit(self) -> DensityMatrix:
        ...

    def overlap_bound_c(self, n: int) -> float:
        if n < 0:
            raise InvalidRequest(f"copies must be >= 0, got {n}")
        return float(self.local_d) ** (-int(n))

    def overlap_bound_inverse(self, y: float) -> float:
        if not (0.0 < y <= 1.0):
            raise InvalidRequest(f"c^-1 is defined on (0, 1], got {y}")
        return math.log(1.0 / y, self.local_d)

    # ---------- Pure-state closed forms ----------
    @abstractmethod
    def pure_coefficients(self, psi: DensityMatrix) -> np.ndarray:
        """Moduli whose max is the best pure-free fidelity (basis amplitudes or Schmidt coefficients)."""

    def max_free_overlap(self, psi: DensityMatrix) -> float:
        return float(np.max(self.pure_coefficients(psi)) ** 2)

    def pure_robustness(self, psi: DensityMatrix) -> float:
        return float(np.sum(self.pure_coefficients(psi)) ** 2 - 1.0)

    @abstractmethod
    def most_overlapping_free_state(self, psi: DensityMatrix, rng: SeedLike = 0, restarts: int = 8) -> DensityMatrix:
        ...

    # ---------- Sampling ----------
    @abstractmethod
    def sample_free_state(self, rng: SeedLike = None) -> DensityMatrix:
        ...

    @abstractmethod
    def sample_free_channel(self, rng: SeedLike = None) -> Channel:
        ...

    def sample_resource_state(self, rng: SeedLike = None) -> DensityMatrix:
        """A state that fails the membership test almost surely."""
        r = qmath.as_rng(rng)
        mix = r.uniform(0.5, 1.0)
        psi = qmath.random_pure_state(self.dims, r)
        return DensityMatrix(mix * psi.matrix + (1 - mix) * qmath.random_state(self.dims, r).matrix, self.dims)


@dataclass(frozen=True)
class IncoherentModel(FreeSetModel):
    d: int = 2
    copies: int = 1
    kind: str = "incoherent"

    def __post_init__(self) -> None:
        if self.d < 2 or self.copies < 1:
            raise InvalidRequest(f"incoherent model needs d >= 2 and copies >= 1, got d={self.d}, copies={self.copies}")

    @property
    def unit_dims(self) -> Tuple[int, ...]:
        return (self.d,)

    @property
    def local_d(self) -> int:
        return self.d

    def power(self, n: int) -> "IncoherentModel":
        return IncoherentModel(self.d, self.copies * int(n))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "d": self.d, "copies": self.copies}

    def violation(self, rho: DensityMatrix) -> float:
        M = rho.matrix
        return float(np.max(np.abs(M - np.diag(np.diag(M))), initial=0.0))

    def is_free_state(self, rho: DensityMatrix, tol: float = 1e-9) -> Verdict:
        self.check_state(rho)
        return Verdict.FREE if self.violation(rho) <= tol else Verdict.NOT_FREE

    def structurally_infeasible(self, rho: DensityMatrix, tol: float = 1e-9) -> bool:
        return self.violation(rho) > tol

    def project_free(self, rho: DensityMatrix, margin: float = 1e-8) -> DensityMatrix:
        return DensityMatrix(np.diag(np.diag(rho.matrix)), rho.dims)

    def free_cone_constraints(self, X: cp.Expression, name: str = "incoherent") -> ConeDescription:
        D = X.shape[0]
        eqs = [X[i, j] for i in range(D) for j in range(D) if i != j]
        return ConeDescription(name=name, equalities=eqs, psd=[X])

    def is_rno_channel(self, ch: Channel, tol: float = 1e-9, samples: int = 500, seed: SeedLike = 0) -> ChannelVerdict:
        if ch.d_in != self.dim or ch.d_out != self.dim:
            raise InvalidShape(f"channel {ch.in_dims}->{ch.out_dims} does not act on model dims {self.dims}")
        return is_mio_channel(ch, tol)

    def _resource_unit(self) -> DensityMatrix:
        return qmath.plus_state(self.d)

    def pure_coefficients(self, psi: DensityMatrix) -> np.ndarray:
        self.check_state(psi)
        return np.abs(psi.amplitudes())

    def most_overlapping_free_state(self, psi: DensityMatrix, rng: SeedLike = 0, restarts: int = 8) -> DensityMatrix:
        k = int(np.argmax(self.pure_coefficients(psi)))
        return qmath.pure_state(qmath.ket(k, self.dim), self.dims)

    def sample_free_state(self, rng: SeedLike = None) -> DensityMatrix:
        r = qmath.as_rng(rng)
        return DensityMatrix(np.diag(_dirichlet(r, self.dim)).astype(complex), self.dims)

    def sample_free_channel(self, rng: SeedLike = None) -> Channel:
        """Random mixture of certified MIO maps: dephased channels, incoherent unitaries, Schur maps."""
        r = qmath.as_rng(rng)
        D, dims = self.dim, self.dims
        deph = qmath.dephasing_channel(D)
        parts = [qmath.compose(deph, qmath.random_channel(D, D, r, kraus_rank=2))]

        perm = r.permutation(D)
        U = np.zeros((D, D), dtype=complex)
        U[perm, np.arange(D)] = np.exp(2j * np.pi * r.random(D))
        parts.append(qmath.unitary_channel(U, D))

        vecs = r.normal(size=(D, 3)) + 1j * r.normal(size=(D, 3))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        C = vecs @ vecs.conj().T
        J = np.zeros((D * D, D * D), dtype=complex)
        for i in range(D):
            for j in range(D):
                J[i * D + i, j * D + j] = C[i, j]
        parts.append(Channel.from_choi(J, D, D, repair=True))

        w = _dirichlet(r, len(parts))
        mixed = qmath.mix_channels(w, parts)
        return Channel(dims, dims, mixed.choi, label="mio_sample")


@dataclass(frozen=True)
class SeparablePPTModel(FreeSetModel):
    dA: int = 2
    dB: int = 2
    copies: int = 1
    kind: str = "separable_ppt"

    def __post_init__(self) -> None:
        if self.dA < 2 or self.dB < 2 or self.copies < 1:
            raise InvalidRequest(f"separable model needs local dims >= 2, got ({self.dA}, {self.dB})")

    @property
    def unit_dims(self) -> Tuple[int, ...]:
        return (self.dA, self.dB)

    @property
    def exact(self) -> bool:
        return self.dim <= PPT_EXACT_MAX

    @property
    def b_axes(self) -> List[int]:
        return [2 * i + 1 for i in range(self.copies)]

    @property
    def a_axes(self) -> List[int]:
        return [2 * i for i in range(self.copies)]

    @property
    def local_d(self) -> int:
        if self.dA != self.dB:
            raise InvalidRequest(f"overlap function needs equal local dims, got ({self.dA}, {self.dB})")
        return self.dA

    def power(self, n: int) -> "SeparablePPTModel":
        return SeparablePPTModel(self.dA, self.dB, self.copies * int(n))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "dims": [self.dA, self.dB], "copies": self.copies, "ppt_exact": self.exact}

    def violation(self, rho: DensityMatrix) -> float:
        pt = qmath.ptranspose(rho.matrix, self.dims, self.b_axes)
        return max(0.0, -qmath.min_eig(pt))

    def is_free_state(self, rho: DensityMatrix, tol: float = 1e-9) -> Verdict:
        self.check_state(rho)
        if self.violation(rho) > tol:
            return Verdict.NOT_FREE
        return Verdict.FREE if self.exact else Verdict.UNKNOWN_RELAXATION

    def project_free(self, rho: DensityMatrix, margin: float = 1e-8) -> DensityMatrix:
        """Mix with I/D just enough that the partial transpose has spectrum >= margin."""
        lam = qmath.min_eig(qmath.ptranspose(rho.matrix, self.dims, self.b_axes))
        if lam >= margin:
            return rho
        D = self.dim
        t = min(1.0, (margin - lam) / (1.0 / D - lam))
        return DensityMatrix((1 - t) * rho.matrix + t * np.eye(D) / D, rho.dims)

    def ppt_all_bipartitions(self, rho: DensityMatrix, tol: float = 1e-9) -> Tuple[bool, float]:
        """Necessary multi-copy check: PPT across every cut of the local factors."""
        n = len(self.dims)
        worst = math.inf
        for r in range(1, n // 2 + 1):
            for subset in itertools.combinations(range(n), r):
                if r == n - r and 0 not in subset:
                    continue
                worst = min(worst, qmath.min_eig(qmath.ptranspose(rho.matrix, self.dims, subset)))
        return worst >= -tol, float(worst)

    def free_cone_constraints(self, X: cp.Expression, name: str = "ppt") -> ConeDescription:
        pt = X
        for ax in self.b_axes:
            pt = cp.partial_transpose(pt, list(self.dims), ax)
        return ConeDescription(name=name, equalities=[], psd=[X, pt])

    def is_rno_channel(self, ch: Channel, tol: float = 1e-9, samples: int = 500, seed: SeedLike = 0) -> ChannelVerdict:
        if ch.d_in != self.dim or ch.d_out != self.dim:
            raise InvalidShape(f"channel {ch.in_dims}->{ch.out_dims} is not square over model dims {self.dims}")
        r = qmath.as_rng(seed)
        inputs = [self._product_basis_state(idx) for idx in range(self.dim)]
        inputs += [self.sample_free_state(r) for _ in range(int(samples))]
        for rho in inputs:
            out = qmath.apply_channel(ch, rho)
            if self.violation(DensityMatrix(out.matrix, self.dims)) > tol:
                return ChannelVerdict.NOT_FREE
        return ChannelVerdict.NOT_FALSIFIED

    def _product_basis_state(self, idx: int) -> DensityMatrix:
        return qmath.pure_state(qmath.ket(idx, self.dim), self.dims)

    def _resource_unit(self) -> DensityMatrix:
        return qmath.maximally_entangled(self.local_d)

    def _amplitude_matrix(self, psi: DensityMatrix) -> np.ndarray:
        self.check_state(psi)
        vec = psi.amplitudes().reshape(self.dims)
        order = self.a_axes + self.b_axes
        DA = self.dA ** self.copies
        return vec.transpose(order).reshape(DA, -1)

    def pure_coefficients(self, psi: DensityMatrix) -> np.ndarray:
        return np.linalg.svd(self._amplitude_matrix(psi), compute_uv=False)

    def _from_ab(self, a: np.ndarray, b: np.ndarray) -> DensityMatrix:
        t = np.kron(a, b).reshape([self.dA] * self.copies + [self.dB] * self.copies)
        inv = list(np.argsort(self.a_axes + self.b_axes))
        return qmath.pure_state(t.transpose(inv).reshape(-1), self.dims)

    def most_overlapping_free_state(self, psi: DensityMatrix, rng: SeedLike = 0, restarts: int = 8) -> DensityMatrix:
        """Alternating maximization of |<a (x) b|psi>| from random starts."""
        M = self._amplitude_matrix(psi)
        r = qmath.as_rng(rng)
        best, best_val = None, -1.0
        for _ in range(max(1, int(restarts))):
            b = r.normal(size=M.shape[1]) + 1j * r.normal(size=M.shape[1])
            b /= np.linalg.norm(b)
            for _ in range(50):
                a = M @ b.conj()
                a /= max(np.linalg.norm(a), 1e-300)
                b = a.conj() @ M
                b /= max(np.linalg.norm(b), 1e-300)
            val = abs(a.conj() @ M @ b.conj())
            if val > best_val:
                best, best_val = (a, b), val
        a, b = best
        return self._from_ab(a, b)

    def sample_free_state(self, rng: SeedLike = None) -> DensityMatrix:
        r = qmath.as_rng(rng)
        terms = int(r.integers(1, 4))
        w = _dirichlet(r, terms)
        M = np.zeros((self.dim, self.dim), dtype=complex)
        for wi in w:
            locals_ = [qmath.random_state(d, r).matrix for d in self.dims]
            M += wi * qmath.kron_all(locals_)
        return DensityMatrix(M, self.dims)

    def sample_free_channel(self, rng: SeedLike = None) -> Channel:
        """Certified nonentangling maps: local products, local unitaries with swap, or measure-prepare onto free states."""
        r = qmath.as_rng(rng)
        choice = int(r.integers(0, 3))
        if choice == 0:
            return qmath.tensor_channels(*[qmath.random_channel(d, d, r, kraus_rank=2) for d in self.dims])
        if choice == 1:
            U = qmath.kron_all([qmath.random_unitary(d, r) for d in self.dims])
            ch = qmath.unitary_channel(U, self.dims, label="local_unitary")
            if self.dA == self.dB and r.random() < 0.5:
                perm = []
                for i in range(self.copies):
                    perm += [2 * i + 1, 2 * i]
                ch = qmath.compose(qmath.permutation_channel(self.dims, perm), ch)
                ch = Channel(self.dims, self.dims, ch.choi, label="local_unitary_swap")
            return ch
        psi = qmath.random_pure_state(self.dims, r)
        return qmath.measure_prepare_channel(psi, self.sample_free_state(r), self.sample_free_state(r), label="free_measure_prepare")


# ---------- Module-level API ----------
def is_free_state(m: FreeSetModel, rho: DensityMatrix, tol: float = 1e-9) -> Verdict:
    return m.is_free_state(rho, tol)


def free_cone_constraints(m: FreeSetModel, block: cp.Expression, name: Optional[str] = None) -> ConeDescription:
    return m.free_cone_constraints(block, name or m.kind)


def max_resource_state(m: FreeSetModel, n: int = 1) -> DensityMatrix:
    return m.max_resource_state(n)


def overlap_bound_c(m: FreeSetModel, n: int) -> float:
    return m.overlap_bound_c(n)


def overlap_bound_inverse(m: FreeSetModel, y: float) -> float:
    return m.overlap_bound_inverse(y)


def is_rno_channel(m: FreeSetModel, ch: Channel, tol: float = 1e-9, samples: int = 500, seed: SeedLike = 0) -> ChannelVerdict:
    return m.is_rno_channel(ch, tol, samples, seed)


def model_from_descriptor(desc: Mapping[str, Any]) -> FreeSetModel:
    kind = str(desc.get("kind", "")).lower()
    copies = int(desc.get("copies", 1))
    if kind == "incoherent":
        return IncoherentModel(int(desc.get("d", 2)), copies)
    if kind in ("separable_ppt", "separable"):
        dims = desc.get("dims", [2, 2])
        if len(dims) != 2:
            raise InvalidRequest(f"separable model needs two local dims, got {dims}")
        return SeparablePPTModel(int(dims[0]), int(dims[1]), copies)
    raise InvalidRequest(f"unknown model kind {kind!r}")
