"""Dense quantum-state primitives: states, POVMs, partial trace and distances.

All states are immutable wrappers around numpy arrays. Registers are qudits of
arbitrary local dimension; a :class:`RegisterLayout` maps register ids onto
tensor factors in row-major (first register most significant) order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

ATOL = 1e-9
RENORM_TOL = 1e-6

#: Largest total dimension accepted for a joint (non-product) state.
MAX_DIMENSION = 20_000


class DimensionCapError(ValueError):
    """A joint state would exceed :data:`MAX_DIMENSION`."""


# joint pure tensors larger than this many amplitudes are refused outright
MAX_JOINT_ENTRIES = 2 ** 25


def set_dimension_cap(cap: int) -> int:
    """Replace the global-backend dimension cap; returns the previous value."""
    global MAX_DIMENSION
    if cap < 2:
        raise ValueError("dimension cap must be at least 2")
    previous, MAX_DIMENSION = MAX_DIMENSION, int(cap)
    return previous


def check_dimension(dim: int, what: str = "state", cap: int | None = None) -> None:
    cap = MAX_DIMENSION if cap is None else cap
    if dim > cap:
        raise DimensionCapError(
            f"{what} dimension {dim} exceeds cap {cap}; "
            "use the product backend for this instance")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


def _require_finite(a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError("entries must be finite")


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector."""

    amplitudes: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.amplitudes, dtype=complex)
        if psi.ndim != 1 or psi.size == 0:
            raise ValueError(f"amplitudes must be a non-empty vector, got shape {psi.shape}")
        _require_finite(psi)
        norm2 = float(np.vdot(psi, psi).real)
        if abs(norm2 - 1.0) > RENORM_TOL:
            raise ValueError(f"state norm^2 {norm2:.3g} is not 1")
        if abs(norm2 - 1.0) > 0:
            psi = psi / math.sqrt(norm2)
        object.__setattr__(self, "amplitudes", _frozen(psi))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def inner(self, other: "PureState") -> complex:
        """<self|other>."""
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityMatrix":
        psi = self.amplitudes
        return DensityMatrix(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, dim: int, index: int) -> "PureState":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls(v)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semi-definite matrix.

    Inputs within ``RENORM_TOL`` of valid are repaired (hermitized, negative
    eigenvalues clipped, trace renormalized); anything further off raises.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        _require_finite(m)
        herm_err = np.max(np.abs(m - m.conj().T))
        if herm_err > RENORM_TOL:
            raise ValueError(f"matrix is not Hermitian (error {herm_err:.3g})")
        m = (m + m.conj().T) / 2
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > RENORM_TOL:
            raise ValueError(f"trace {tr:.6g} is not 1")
        evals = np.linalg.eigvalsh(m)
        if evals[0] < -RENORM_TOL:
            raise ValueError(f"matrix is not PSD (min eigenvalue {evals[0]:.3g})")
        if evals[0] < -ATOL:
            w, v = np.linalg.eigh(m)
            m = (v * np.clip(w, 0, None)) @ v.conj().T
            tr = float(np.trace(m).real)
        if tr != 1.0:
            m = m / tr
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    @classmethod
    def mixture(cls, weights: Sequence[float], states: Sequence["PureState"]) -> "DensityMatrix":
        m = sum(w * np.outer(s.amplitudes, s.amplitudes.conj()) for w, s in zip(weights, states))
        return cls(m)


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered ``(register_id, local_dim)`` pairs describing tensor factors."""

    registers: tuple[tuple[Hashable, int], ...]

    def __post_init__(self):
        regs = tuple((rid, int(d)) for rid, d in self.registers)
        ids = [rid for rid, _ in regs]
        if len(set(ids)) != len(ids):
            raise ValueError(f"register ids must be unique: {ids}")
        for rid, d in regs:
            if d < 2:
                raise ValueError(f"register {rid!r} has local dimension {d} < 2")
        object.__setattr__(self, "registers", regs)

    @classmethod
    def of(cls, *dims: int) -> "RegisterLayout":
        """Layout with integer ids 0..len(dims)-1."""
        return cls(tuple(enumerate(dims)))

    @property
    def ids(self) -> list:
        return [rid for rid, _ in self.registers]

    @property
    def dims(self) -> list[int]:
        return [d for _, d in self.registers]

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def position(self, rid) -> int:
        for i, (r, _) in enumerate(self.registers):
            if r == rid:
                return i
        raise ValueError(f"unknown register id {rid!r}")


@dataclass(frozen=True, eq=False)
class BinaryPOVM:
    """Two-outcome measurement ``{accept, reject}``."""

    accept: np.ndarray
    reject: np.ndarray

    def __post_init__(self):
        acc = np.asarray(self.accept, dtype=complex)
        rej = np.asarray(self.reject, dtype=complex)
        if acc.shape != rej.shape or acc.ndim != 2 or acc.shape[0] != acc.shape[1]:
            raise ValueError("POVM elements must be square matrices of equal shape")
        _require_finite(acc)
        _require_finite(rej)
        for name, m in (("accept", acc), ("reject", rej)):
            if np.max(np.abs(m - m.conj().T)) > ATOL:
                raise ValueError(f"{name} element is not Hermitian")
            if np.linalg.eigvalsh((m + m.conj().T) / 2)[0] < -ATOL:
                raise ValueError(f"{name} element is not PSD")
        if np.max(np.abs(acc + rej - np.eye(acc.shape[0]))) > ATOL:
            raise ValueError("POVM elements do not sum to identity")
        object.__setattr__(self, "accept", _frozen(acc))
        object.__setattr__(self, "reject", _frozen(rej))

    @property
    def dim(self) -> int:
        return self.accept.shape[0]

    @classmethod
    def from_accept(cls, accept: np.ndarray) -> "BinaryPOVM":
        accept = np.asarray(accept, dtype=complex)
        return cls(accept, np.eye(accept.shape[0]) - accept)

    @classmethod
    def projector_onto(cls, state: PureState) -> "BinaryPOVM":
        psi = state.amplitudes
        return cls.from_accept(np.outer(psi, psi.conj()))


def tensor(a, b):
    """Kronecker product of two pure states or two density matrices."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        check_dimension(a.dim * b.dim)
        return PureState(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        check_dimension(a.dim * b.dim)
        return DensityMatrix(np.kron(a.matrix, b.matrix))
    raise TypeError("tensor expects two PureStates or two DensityMatrices")


def partial_trace_matrix(m: np.ndarray, layout: RegisterLayout, keep: Iterable) -> np.ndarray:
    """Trace out every register not in ``keep``; works for any square matrix.

    Kept registers stay in layout order.
    """
    keep = set(keep)
    for rid in keep:
        layout.position(rid)
    if not keep:
        raise ValueError("keep must name at least one register")
    dims = layout.dims
    n = len(dims)
    if m.shape != (layout.total_dim, layout.total_dim):
        raise ValueError(f"matrix shape {m.shape} does not match layout dimension {layout.total_dim}")
    t = np.asarray(m).reshape(dims + dims)
    kept = [i for i, rid in enumerate(layout.ids) if rid in keep]
    # einsum labels: rows use letters [0, n), cols [n, 2n); traced cols reuse row letters
    row = list(range(n))
    col = [n + i if i in kept else i for i in range(n)]
    out = kept + [n + i for i in kept]
    r = np.einsum(t, row + col, out)
    d = math.prod(dims[i] for i in kept)
    return r.reshape(d, d)


def partial_trace(rho: DensityMatrix, layout: RegisterLayout, keep: Iterable) -> DensityMatrix:
    return DensityMatrix(partial_trace_matrix(rho.matrix, layout, keep))


def trace_norm(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("trace norm needs a square matrix")
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.dim != sigma.dim:
        raise ValueError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    # rho - sigma is Hermitian, so its trace norm is the sum of |eigenvalues|
    w = np.linalg.eigvalsh(rho.matrix - sigma.matrix)
    return float(min(1.0, max(0.0, 0.5 * np.sum(np.abs(w)))))


def optimal_distinguisher(rho: DensityMatrix, sigma: DensityMatrix) -> np.ndarray:
    """Projector onto the positive eigenspace of ``rho - sigma``.

    It attains ``tr(M (rho - sigma)) = trace_distance(rho, sigma)``.
    """
    w, v = np.linalg.eigh(rho.matrix - sigma.matrix)
    pos = v[:, w > 0]
    return pos @ pos.conj().T


def fidelity_via_purification(psi: PureState, phi: PureState, layout: RegisterLayout,
                              traced_out) -> float:
    """Trace norm of ``tr_{traced_out}(|phi><psi|)``.

    For a bipartite layout this equals the fidelity of the reductions of psi
    and phi on ``traced_out``.
    """
    if len(layout.registers) != 2:
        raise ValueError("fidelity via purification needs a bipartite layout")
    if isinstance(traced_out, (set, frozenset, list, tuple)):
        traced = set(traced_out)
    else:
        traced = {traced_out}
    if len(traced) != 1:
        raise ValueError("exactly one of the two registers must be traced out")
    keep = set(layout.ids) - traced
    if len(keep) != 1:
        raise ValueError(f"unknown register in {traced!r}")
    if psi.dim != layout.total_dim or phi.dim != layout.total_dim:
        raise ValueError("state dimension does not match layout")
    cross = np.outer(phi.amplitudes, psi.amplitudes.conj())
    return min(1.0, trace_norm(partial_trace_matrix(cross, layout, keep)))


def swap_operator(local_dim: int) -> np.ndarray:
    d = local_dim
    s = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            s[j * d + i, i * d + j] = 1.0
    return s


def symmetric_projector(local_dim: int) -> np.ndarray:
    if local_dim < 2:
        raise ValueError("local dimension must be at least 2")
    return (np.eye(local_dim ** 2) + swap_operator(local_dim)) / 2


def antisymmetric_projector(local_dim: int) -> np.ndarray:
    if local_dim < 2:
        raise ValueError("local dimension must be at least 2")
    return (np.eye(local_dim ** 2) - swap_operator(local_dim)) / 2


def _clamp01(p: float) -> float:
    if p < -ATOL or p > 1 + ATOL:
        raise ValueError(f"probability {p} outside [0, 1]")
    return min(1.0, max(0.0, p))


def measure_binary(rho: DensityMatrix, povm: BinaryPOVM) -> float:
    """Probability that ``povm`` accepts ``rho``."""
    if rho.dim != povm.dim:
        raise ValueError(f"dimension mismatch: state {rho.dim}, POVM {povm.dim}")
    # tr(A rho) without forming the product
    return _clamp01(float(np.sum(povm.accept * rho.matrix.T).real))


def swap_trace(rho_pair: np.ndarray, local_dim: int) -> float:
    """``tr(S rho)`` for a matrix on two registers of dimension ``local_dim``."""
    t = np.asarray(rho_pair).reshape(local_dim, local_dim, local_dim, local_dim)
    return float(np.einsum("jiij->", t).real)


def swap_test_accept_probability(rho: DensityMatrix, layout: RegisterLayout | None = None) -> float:
    """Acceptance probability ``tr(Pi_sym rho)`` of the SWAP test on a register pair."""
    if layout is None:
        d = math.isqrt(rho.dim)
        if d * d != rho.dim:
            raise ValueError(f"dimension {rho.dim} is not a square of a local dimension")
    else:
        if len(layout.registers) != 2:
            raise ValueError("SWAP test needs exactly two registers")
        d1, d2 = layout.dims
        if d1 != d2:
            raise ValueError(f"unequal local dimensions {d1} and {d2}")
        if layout.total_dim != rho.dim:
            raise ValueError("layout does not match state dimension")
        d = d1
    return _clamp01(0.5 + 0.5 * swap_trace(rho.matrix, d))


def random_pure_state(dim: int, rng: np.random.Generator) -> PureState:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return PureState(v / np.linalg.norm(v))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-ensemble mixed state of the given rank (full rank by default)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def qubits_for(dim: int) -> int:
    """Size in qubits of a register of the given dimension."""
    return max(1, math.ceil(math.log2(dim)))
