"""Dense linear algebra and channel calculus.

Conventions
-----------
* States are `DensityMatrix` objects carrying their local dimensions.
* Channels carry a canonical Choi matrix in the *trace-d_in* convention with the
  input factor first: ``J = sum_ij |i><j| (x) E(|i><j|)``, so ``tr_out J = I``.
  The *trace-one* convention is ``J / d_in``. Every conversion is explicit.
* Everything here is pure; random sampling takes a caller-owned
  ``numpy.random.Generator`` (or a seed, which builds one).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import unitary_group

from core.errors import InvalidChannel, InvalidRequest, InvalidShape, InvalidState, InvalidSubsystem

ComplexMatrix = np.ndarray
Dims = Tuple[int, ...]
SeedLike = Union[None, int, np.random.Generator]

PSD_TOL = 1e-9
HERMITIAN_TOL = 1e-9
TRACE_TOL = 1e-9
SUPPORT_TOL = 1e-10

TRACE_D_IN = "trace_d_in"
TRACE_ONE = "trace_one"
NORMALIZATIONS = (TRACE_D_IN, TRACE_ONE)


# ---------- Matrix helpers ----------
def as_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _prod(dims: Iterable[int]) -> int:
    return int(reduce(lambda a, b: a * b, dims, 1))


def _as_dims(dims: Union[int, Sequence[int]]) -> Dims:
    if isinstance(dims, (int, np.integer)):
        dims = (int(dims),)
    out = tuple(int(d) for d in dims)
    if not out or any(d <= 0 for d in out):
        raise InvalidShape(f"dimensions must be positive, got {out}")
    return out


def as_matrix(M: Any) -> ComplexMatrix:
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        raise InvalidShape(f"expected a 2-d matrix, got shape {A.shape}")
    return A


def _require_square(M: ComplexMatrix) -> None:
    if M.shape[0] != M.shape[1]:
        raise InvalidShape(f"expected a square matrix, got shape {M.shape}")


def hermitian_part(M: ComplexMatrix) -> ComplexMatrix:
    return 0.5 * (M + M.conj().T)


def is_hermitian(M: ComplexMatrix, tol: float = 1e-12) -> bool:
    M = as_matrix(M)
    return M.shape[0] == M.shape[1] and float(np.max(np.abs(M - M.conj().T), initial=0.0)) <= tol


def min_eig(M: ComplexMatrix) -> float:
    return float(np.linalg.eigvalsh(hermitian_part(as_matrix(M)))[0])


def psd_sqrt(M: ComplexMatrix) -> ComplexMatrix:
    w, v = np.linalg.eigh(hermitian_part(M))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats, np.ones((1, 1), dtype=complex))


# ---------- Types ----------
@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: ComplexMatrix
    dims: Dims

    def __post_init__(self) -> None:
        M = as_matrix(self.matrix)
        dims = _as_dims(self.dims)
        _require_square(M)
        if _prod(dims) != M.shape[0]:
            raise InvalidShape(f"dims {dims} do not multiply to matrix size {M.shape[0]}")
        if not np.all(np.isfinite(M)):
            raise InvalidState("state has non-finite entries")
        if float(np.max(np.abs(M - M.conj().T), initial=0.0)) > HERMITIAN_TOL:
            raise InvalidState("state is not Hermitian")
        M = hermitian_part(M)
        tr = float(np.real(np.trace(M)))
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidState(f"state trace {tr:.12g} differs from 1")
        lam = float(np.linalg.eigvalsh(M)[0])
        if lam < -PSD_TOL:
            raise InvalidState(f"state has negative eigenvalue {lam:.3e}")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def is_pure(self, tol: float = 1e-9) -> bool:
        return float(np.linalg.eigvalsh(self.matrix)[-1]) >= 1.0 - tol

    def amplitudes(self) -> np.ndarray:
        """State vector of a pure state (global phase fixed by the largest entry)."""
        if not self.is_pure():
            raise InvalidState("amplitudes requested for a mixed state")
        w, v = np.linalg.eigh(self.matrix)
        vec = v[:, -1]
        k = int(np.argmax(np.abs(vec)))
        return vec * (abs(vec[k]) / vec[k])

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self.matrix, other.matrix), self.dims + other.dims)

    def power(self, n: int) -> "DensityMatrix":
        if n < 1:
            raise InvalidRequest(f"tensor power needs n >= 1, got {n}")
        out = self
        for _ in range(n - 1):
            out = out.tensor(self)
        return out


@dataclass(frozen=True, eq=False)
class Channel:
    """CPTP map. `choi` is always stored in the trace-d_in convention."""

    in_dims: Dims
    out_dims: Dims
    choi: ComplexMatrix
    kraus: Optional[Tuple[ComplexMatrix, ...]] = None
    choi_normalization: str = TRACE_D_IN
    label: str = ""

    @property
    def d_in(self) -> int:
        return _prod(self.in_dims)

    @property
    def d_out(self) -> int:
        return _prod(self.out_dims)

    # ---------- Constructors ----------
    @classmethod
    def from_kraus(
        cls,
        kraus: Sequence[Any],
        in_dims: Union[int, Sequence[int]],
        out_dims: Union[None, int, Sequence[int]] = None,
        label: str = "",
    ) -> "Channel":
        in_dims = _as_dims(in_dims)
        out_dims = in_dims if out_dims is None else _as_dims(out_dims)
        d_in, d_out = _prod(in_dims), _prod(out_dims)
        ops = []
        for i, K in enumerate(kraus):
            K = as_matrix(K)
            if K.shape != (d_out, d_in):
                raise InvalidChannel(f"Kraus operator {i} has shape {K.shape}, expected {(d_out, d_in)}")
            ops.append(K)
        if not ops:
            raise InvalidChannel("empty Kraus list")
        completeness = sum(K.conj().T @ K for K in ops)
        err = float(np.max(np.abs(completeness - np.eye(d_in))))
        if err > TRACE_TOL:
            raise InvalidChannel(f"Kraus completeness violated by {err:.3e}")
        J = _choi_from_kraus(ops, d_in, d_out)
        J.setflags(write=False)
        return cls(in_dims=in_dims, out_dims=out_dims, choi=J, kraus=tuple(ops), label=label)

    @classmethod
    def from_choi(
        cls,
        choi: Any,
        in_dims: Union[int, Sequence[int]],
        out_dims: Union[None, int, Sequence[int]] = None,
        normalization: str = TRACE_D_IN,
        repair: bool = False,
        label: str = "",
    ) -> "Channel":
        if normalization not in NORMALIZATIONS:
            raise InvalidRequest(f"unknown Choi normalization {normalization!r}")
        in_dims = _as_dims(in_dims)
        out_dims = in_dims if out_dims is None else _as_dims(out_dims)
        d_in, d_out = _prod(in_dims), _prod(out_dims)
        J = as_matrix(choi)
        if J.shape != (d_in * d_out, d_in * d_out):
            raise InvalidChannel(f"Choi matrix has shape {J.shape}, expected side {d_in * d_out}")
        if not np.all(np.isfinite(J)):
            raise InvalidChannel("Choi matrix has non-finite entries")
        if normalization == TRACE_ONE:
            J = J * d_in
        if repair:
            J = repair_choi(J, d_in, d_out)
        else:
            if float(np.max(np.abs(J - J.conj().T))) > HERMITIAN_TOL:
                raise InvalidChannel("Choi matrix is not Hermitian")
            J = hermitian_part(J)
            lam = float(np.linalg.eigvalsh(J)[0])
            if lam < -PSD_TOL:
                raise InvalidChannel(f"Choi matrix has negative eigenvalue {lam:.3e}")
            err = float(np.max(np.abs(ptrace(J, (d_in, d_out), [0]) - np.eye(d_in))))
            if err > TRACE_TOL:
                raise InvalidChannel(f"partial trace over the output differs from identity by {err:.3e}")
        J = np.array(J, dtype=complex)
        J.setflags(write=False)
        return cls(in_dims=in_dims, out_dims=out_dims, choi=J, choi_normalization=normalization, label=label)

    # ---------- Views ----------
    @cached_property
    def kraus_ops(self) -> Tuple[ComplexMatrix, ...]:
        if self.kraus is not None:
            return self.kraus
        return tuple(_kraus_from_choi(self.choi, self.d_in, self.d_out))

    def choi_matrix(self, normalization: str = TRACE_D_IN) -> ComplexMatrix:
        if normalization == TRACE_D_IN:
            return np.array(self.choi)
        if normalization == TRACE_ONE:
            return np.array(self.choi) / self.d_in
        raise InvalidRequest(f"unknown Choi normalization {normalization!r}")

    def with_label(self, label: str) -> "Channel":
        return Channel(self.in_dims, self.out_dims, self.choi, self.kraus, self.choi_normalization, label)

    def power(self, n: int) -> "Channel":
        if n < 1:
            raise InvalidRequest(f"tensor power needs n >= 1, got {n}")
        return tensor_channels(*([self] * n))


# ---------- Choi / Kraus ----------
def _choi_from_kraus(ops: Sequence[ComplexMatrix], d_in: int, d_out: int) -> ComplexMatrix:
    J = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for K in ops:
        v = K.T.reshape(-1)
        J += np.outer(v, v.conj())
    return J


def _kraus_from_choi(J: ComplexMatrix, d_in: int, d_out: int) -> List[ComplexMatrix]:
    w, v = np.linalg.eigh(hermitian_part(J))
    cut = max(float(w[-1]), 1.0) * 1e-13
    ops = []
    for lam, vec in zip(w[::-1], v.T[::-1]):
        if lam <= cut:
            break
        ops.append(math.sqrt(lam) * vec.reshape(d_in, d_out).T)
    if not ops:
        raise InvalidChannel("Choi matrix has no positive spectrum")
    return ops


def kraus_to_choi(ch: Channel, normalization: str = TRACE_D_IN) -> ComplexMatrix:
    if ch.kraus is None:
        raise InvalidChannel("channel carries no Kraus representation")
    J = _choi_from_kraus(ch.kraus, ch.d_in, ch.d_out)
    return J if normalization == TRACE_D_IN else J / ch.d_in


def choi_to_kraus(ch: Channel) -> List[ComplexMatrix]:
    return _kraus_from_choi(ch.choi, ch.d_in, ch.d_out)


def repair_choi(J: ComplexMatrix, d_in: int, d_out: int) -> ComplexMatrix:
    """Nearest-looking CPTP Choi for solver output: clip the spectrum, then renormalize tr_out."""
    w, v = np.linalg.eigh(hermitian_part(as_matrix(J)))
    J = (v * np.clip(w, 0.0, None)) @ v.conj().T
    T = ptrace(J, (d_in, d_out), [0])
    tw, tv = np.linalg.eigh(hermitian_part(T))
    if float(tw[0]) <= 1e-12:
        raise InvalidChannel("Choi matrix cannot be repaired: tr_out is singular")
    A = (tv / np.sqrt(tw)) @ tv.conj().T
    AI = np.kron(A, np.eye(d_out))
    return hermitian_part(AI @ J @ AI.conj().T)


# ---------- Subsystem operations ----------
def _check_indices(indices: Sequence[int], n: int) -> List[int]:
    out = [int(i) for i in indices]
    for i in out:
        if i < 0 or i >= n:
            raise InvalidSubsystem(f"subsystem index {i} out of range for {n} subsystems")
    if len(set(out)) != len(out):
        raise InvalidSubsystem(f"repeated subsystem index in {out}")
    return out


def ptrace(M: ComplexMatrix, dims: Sequence[int], keep: Sequence[int]) -> ComplexMatrix:
    """Partial trace of a raw operator, keeping `keep` in ascending order."""
    dims = list(dims)
    n = len(dims)
    keep = sorted(_check_indices(keep, n))
    t = np.asarray(M).reshape(dims + dims)
    rows = list(range(n))
    cols = [i if i not in keep else n + i for i in range(n)]
    out = keep + [n + i for i in keep]
    d_keep = _prod(dims[i] for i in keep)
    return np.einsum(t, rows + cols, out).reshape(d_keep, d_keep)


def ptranspose(M: ComplexMatrix, dims: Sequence[int], subsystems: Sequence[int]) -> ComplexMatrix:
    dims = list(dims)
    n = len(dims)
    subs = _check_indices(subsystems, n)
    t = np.asarray(M).reshape(dims + dims)
    axes = list(range(2 * n))
    for s in subs:
        axes[s], axes[n + s] = axes[n + s], axes[s]
    D = _prod(dims)
    return t.transpose(axes).reshape(D, D)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    keep = list(keep)
    if not keep:
        if rho.dim == 1:
            return rho
        raise InvalidSubsystem("empty keep list on a nonscalar state")
    keep = sorted(_check_indices(keep, rho.n_subsystems))
    reduced = ptrace(rho.matrix, rho.dims, keep)
    return DensityMatrix(reduced, tuple(rho.dims[i] for i in keep))


def partial_transpose(rho: DensityMatrix, subsystem: Union[int, Sequence[int]]) -> ComplexMatrix:
    subs = [subsystem] if isinstance(subsystem, (int, np.integer)) else list(subsystem)
    return hermitian_part(ptranspose(rho.matrix, rho.dims, subs))


def _apply_matrix(ch: Channel, M: ComplexMatrix, dims: Dims, subsystems: Optional[Sequence[int]]) -> Tuple[ComplexMatrix, Dims]:
    n = len(dims)
    subs = list(range(n)) if subsystems is None else _check_indices(subsystems, n)
    if tuple(dims[s] for s in subs) != tuple(ch.in_dims):
        if subsystems is None and _prod(dims) == ch.d_in:
            # A state given as one block where the channel expects several factors.
            M2, _ = _apply_matrix(ch, M, ch.in_dims, None)
            return M2, ch.out_dims
        raise InvalidShape(f"subsystem dims {[dims[s] for s in subs]} do not match channel input {ch.in_dims}")
    rest = [i for i in range(n) if i not in subs]
    if rest and len(ch.out_dims) != len(ch.in_dims):
        raise InvalidSubsystem("a channel that changes the number of factors must act on the whole state")
    perm = subs + rest
    d_t, d_r = ch.d_in, _prod(dims[i] for i in rest)
    t = np.asarray(M).reshape(list(dims) * 2).transpose(perm + [n + p for p in perm])
    X = t.reshape(d_t, d_r, d_t, d_r)
    Ks = np.stack(ch.kraus_ops)
    out = np.einsum("kai,irjs,kbj->arbs", Ks, X, Ks.conj(), optimize=True)
    d_o = ch.d_out
    out = out.reshape(d_o * d_r, d_o * d_r)
    if not rest:
        return out, tuple(ch.out_dims)
    new_dims = list(ch.out_dims) + [dims[i] for i in rest]
    inv = list(np.argsort(perm))
    t = out.reshape(new_dims * 2).transpose(inv + [n + i for i in inv])
    final = tuple(new_dims[j] for j in inv)
    D = _prod(final)
    return t.reshape(D, D), final


def apply_channel(ch: Channel, rho: DensityMatrix, subsystems: Optional[Sequence[int]] = None) -> DensityMatrix:
    out, dims = _apply_matrix(ch, rho.matrix, rho.dims, subsystems)
    return DensityMatrix(hermitian_part(out), dims)


def apply_to_operator(ch: Channel, X: ComplexMatrix) -> ComplexMatrix:
    """Action on an arbitrary operator of the full input space."""
    out, _ = _apply_matrix(ch, as_matrix(X), (ch.d_in,), None)
    return out


def adjoint_apply(ch: Channel, Y: ComplexMatrix) -> ComplexMatrix:
    Y = as_matrix(Y)
    return sum(K.conj().T @ Y @ K for K in ch.kraus_ops)


# ---------- Distances ----------
def trace_norm(M: ComplexMatrix) -> float:
    M = as_matrix(M)
    _require_square(M)
    return float(np.sum(np.linalg.svd(M, compute_uv=False)))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.dim != sigma.dim:
        raise InvalidShape(f"dimension mismatch {rho.dim} vs {sigma.dim}")
    return 0.5 * trace_norm(rho.matrix - sigma.matrix)


def sqrt_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.dim != sigma.dim:
        raise InvalidShape(f"dimension mismatch {rho.dim} vs {sigma.dim}")
    f = trace_norm(psd_sqrt(rho.matrix) @ psd_sqrt(sigma.matrix))
    return float(min(max(f, 0.0), 1.0))


def dmax(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Max-relative entropy in bits; +inf when supp(rho) is not inside supp(sigma)."""
    if rho.dim != sigma.dim:
        raise InvalidShape(f"dimension mismatch {rho.dim} vs {sigma.dim}")
    w, v = np.linalg.eigh(sigma.matrix)
    on = w > SUPPORT_TOL
    ker = v[:, ~on]
    if ker.shape[1]:
        leak = ker.conj().T @ rho.matrix @ ker
        if float(np.max(np.abs(leak))) > 1e-9:
            return math.inf
    vs = v[:, on]
    inv_sqrt = (vs / np.sqrt(w[on])) @ vs.conj().T
    lam = float(np.linalg.eigvalsh(hermitian_part(inv_sqrt @ rho.matrix @ inv_sqrt))[-1])
    return max(math.log2(lam), 0.0) if lam > 0 else 0.0


# ---------- State builders ----------
def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def pure_state(vec: Any, dims: Union[None, int, Sequence[int]] = None) -> DensityMatrix:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise InvalidState("zero vector")
    v = v / nrm
    return DensityMatrix(np.outer(v, v.conj()), (v.size,) if dims is None else dims)


def maximally_mixed(dims: Union[int, Sequence[int]]) -> DensityMatrix:
    dims = _as_dims(dims)
    D = _prod(dims)
    return DensityMatrix(np.eye(D, dtype=complex) / D, dims)


def plus_state(d: int = 2) -> DensityMatrix:
    return pure_state(np.ones(d), (d,))


def maximally_entangled(d: int = 2) -> DensityMatrix:
    v = sum(np.kron(ket(i, d), ket(i, d)) for i in range(d))
    return pure_state(v, (d, d))


def bell_state() -> DensityMatrix:
    return maximally_entangled(2)


def werner_state(w: float) -> DensityMatrix:
    """w * Phi_+ + (1 - w) * I/4 on two qubits."""
    return DensityMatrix(w * bell_state().matrix + (1.0 - w) * np.eye(4) / 4.0, (2, 2))


def tensor_states(*states: DensityMatrix) -> DensityMatrix:
    out = states[0]
    for s in states[1:]:
        out = out.tensor(s)
    return out


def nearest_state(M: ComplexMatrix, dims: Union[int, Sequence[int]]) -> DensityMatrix:
    """Project solver output onto the state set (clip spectrum, renormalize)."""
    w, v = np.linalg.eigh(hermitian_part(as_matrix(M)))
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        raise InvalidState("operator has no positive part")
    return DensityMatrix((v * (w / w.sum())) @ v.conj().T, dims)


# ---------- Channel builders ----------
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def identity_channel(dims: Union[int, Sequence[int]]) -> Channel:
    dims = _as_dims(dims)
    return Channel.from_kraus([np.eye(_prod(dims))], dims, dims, label="identity")


def unitary_channel(U: Any, dims: Union[None, int, Sequence[int]] = None, label: str = "unitary") -> Channel:
    U = as_matrix(U)
    return Channel.from_kraus([U], dims if dims is not None else U.shape[0], None, label=label)


def dephasing_channel(d: int = 2) -> Channel:
    return Channel.from_kraus([np.outer(ket(i, d), ket(i, d)) for i in range(d)], d, d, label="dephasing")


def depolarizing_channel(d: int = 2) -> Channel:
    """Completely depolarizing map X -> tr(X) I/d."""
    ops = [np.outer(ket(a, d), ket(b, d)) / math.sqrt(d) for a in range(d) for b in range(d)]
    return Channel.from_kraus(ops, d, d, label="depolarizing")


def replacement_channel(state: DensityMatrix, in_dims: Union[int, Sequence[int]]) -> Channel:
    in_dims = _as_dims(in_dims)
    J = np.kron(np.eye(_prod(in_dims)), state.matrix)
    return Channel.from_choi(J, in_dims, state.dims, label="replacement")


def permutation_channel(dims: Sequence[int], perm: Sequence[int]) -> Channel:
    """Unitary that moves factor perm[j] of the input to slot j of the output."""
    dims = list(_as_dims(dims))
    perm = _check_indices(perm, len(dims))
    if len(perm) != len(dims):
        raise InvalidSubsystem(f"permutation {perm} does not cover {len(dims)} factors")
    D = _prod(dims)
    P = np.eye(D).reshape(dims + [D]).transpose(perm + [len(dims)]).reshape(D, D)
    out_dims = tuple(dims[p] for p in perm)
    return Channel.from_kraus([P.astype(complex)], tuple(dims), out_dims, label="permutation")


def measure_prepare_channel(psi: DensityMatrix, sigma: DensityMatrix, delta: DensityMatrix, label: str = "measure_prepare") -> Channel:
    """X -> tr(psi X) sigma + tr((I - psi) X) delta for a projector psi."""
    if sigma.dims != delta.dims:
        raise InvalidShape(f"prepared states differ in dims: {sigma.dims} vs {delta.dims}")
    P = psi.matrix
    rest = np.eye(psi.dim) - P
    J = np.kron(P.T, sigma.matrix) + np.kron(rest.T, delta.matrix)
    return Channel.from_choi(J, psi.dims, sigma.dims, label=label)


def tensor_channels(*chs: Channel) -> Channel:
    if not chs:
        raise InvalidRequest("tensor of zero channels")
    out = chs[0]
    for b in chs[1:]:
        a = out
        ai, ao, bi, bo = a.d_in, a.d_out, b.d_in, b.d_out
        J = np.kron(a.choi, b.choi).reshape([ai, ao, bi, bo] * 2)
        J = J.transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(ai * bi * ao * bo, ai * bi * ao * bo)
        J.setflags(write=False)
        out = Channel(a.in_dims + b.in_dims, a.out_dims + b.out_dims, J, label=f"{a.label}(x){b.label}")
    return out


def compose(outer: Channel, inner: Channel) -> Channel:
    """outer o inner."""
    if outer.d_in != inner.d_out:
        raise InvalidShape(f"cannot compose: inner outputs {inner.out_dims}, outer expects {outer.in_dims}")
    ops = [A @ B for A in outer.kraus_ops for B in inner.kraus_ops]
    J = _choi_from_kraus(ops, inner.d_in, outer.d_out)
    J.setflags(write=False)
    return Channel(inner.in_dims, outer.out_dims, J, label=f"{outer.label}o{inner.label}")


def mix_channels(weights: Sequence[float], chs: Sequence[Channel]) -> Channel:
    if len(weights) != len(chs) or not chs:
        raise InvalidRequest("weights and channels differ in length")
    w = np.asarray(weights, dtype=float)
    if np.any(w < -1e-12) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise InvalidRequest(f"mixing weights must be a probability vector, got {w.tolist()}")
    ref = chs[0]
    for c in chs[1:]:
        if c.d_in != ref.d_in or c.d_out != ref.d_out:
            raise InvalidShape("cannot mix channels of different dimensions")
    J = sum(float(wi) * c.choi for wi, c in zip(w, chs))
    J.setflags(write=False)
    return Channel(ref.in_dims, ref.out_dims, J, label="mixture")


# ---------- Sampling ----------
def random_state(dims: Union[int, Sequence[int]], rng: SeedLike = None) -> DensityMatrix:
    dims = _as_dims(dims)
    r = as_rng(rng)
    D = _prod(dims)
    G = r.normal(size=(D, D)) + 1j * r.normal(size=(D, D))
    M = G @ G.conj().T
    return DensityMatrix(M / np.trace(M).real, dims)


def random_pure_state(dims: Union[int, Sequence[int]], rng: SeedLike = None) -> DensityMatrix:
    dims = _as_dims(dims)
    r = as_rng(rng)
    D = _prod(dims)
    return pure_state(r.normal(size=D) + 1j * r.normal(size=D), dims)


def random_unitary(dim: int, rng: SeedLike = None) -> ComplexMatrix:
    r = as_rng(rng)
    if dim == 1:
        return np.exp(2j * math.pi * r.random()) * np.ones((1, 1), dtype=complex)
    return np.asarray(unitary_group.rvs(dim, random_state=r), dtype=complex)


def random_channel(
    in_dims: Union[int, Sequence[int]],
    out_dims: Union[None, int, Sequence[int]] = None,
    rng: SeedLike = None,
    kraus_rank: Optional[int] = None,
) -> Channel:
    """Isometry dilation: Haar unitary on system + environment, environment traced out."""
    in_dims = _as_dims(in_dims)
    out_dims = in_dims if out_dims is None else _as_dims(out_dims)
    d_in, d_out = _prod(in_dims), _prod(out_dims)
    rank = int(kraus_rank or d_in * d_out)
    rank = max(rank, -(-d_in // d_out))
    U = random_unitary(d_out * rank, rng)
    V = U[:, :d_in].reshape(d_out, rank, d_in)
    ops = [V[:, e, :] for e in range(rank)]
    return Channel.from_kraus(ops, in_dims, out_dims, label="random")


SAMPLE_KINDS = ("state", "pure_state", "unitary", "channel", "free_state", "free_channel")


def sample(kind: str, dims: Union[int, Sequence[int]], seed: SeedLike = None, model: Any = None, **kwargs: Any) -> Any:
    """Seeded sampler behind the property suites."""
    rng = as_rng(seed)
    if kind == "state":
        return random_state(dims, rng)
    if kind == "pure_state":
        return random_pure_state(dims, rng)
    if kind == "unitary":
        return random_unitary(_prod(_as_dims(dims)), rng)
    if kind == "channel":
        return random_channel(dims, kwargs.get("out_dims"), rng, kwargs.get("kraus_rank"))
    if kind in ("free_state", "free_channel"):
        if model is None:
            raise InvalidRequest(f"sampling {kind!r} needs a free-set model")
        if tuple(_as_dims(dims)) != tuple(model.dims):
            raise InvalidShape(f"dims {dims} do not match model dims {model.dims}")
        return model.sample_free_state(rng) if kind == "free_state" else model.sample_free_channel(rng)
    raise InvalidRequest(f"unsupported sample kind {kind!r}; choose one of {SAMPLE_KINDS}")
