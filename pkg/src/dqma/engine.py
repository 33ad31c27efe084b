"""Local-test evaluation over a collection of quantum registers.

Two backends hold the registers a protocol run acts on:

* :class:`ProductRegisters` - one density matrix per register; tests on
  disjoint registers are independent, so every quantity factorizes.
* :class:`JointRegisters` - one pure vector over all registers plus a
  purifying ancilla, so mixed and entangled certificates are handled exactly.

A local test is either a SWAP test on two registers or a binary POVM on one.
Tests in a single scenario touch pairwise-disjoint registers, hence commute,
and the probability of an outcome pattern is ``<psi| (x)_i E_i |psi>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import (ATOL, MAX_JOINT_ENTRIES, BinaryPOVM, DensityMatrix, DimensionCapError,
                     PureState, check_dimension, measure_binary)


@dataclass(frozen=True, eq=False)
class LocalTest:
    """A SWAP test (``registers == (a, b)``) or a POVM (``registers == (a,)``)."""

    kind: str
    node: object
    registers: tuple[int, ...]
    povm: BinaryPOVM | None = None

    def __post_init__(self):
        if self.kind == "swap" and len(self.registers) != 2:
            raise ValueError("SWAP test acts on two registers")
        if self.kind == "povm" and len(self.registers) != 1:
            raise ValueError("POVM test acts on one register")
        if self.kind not in ("swap", "povm"):
            raise ValueError(f"unknown test kind {self.kind!r}")

    def __repr__(self):
        return f"LocalTest({self.kind}@{self.node}:{self.registers})"


def check_disjoint(tests: Sequence[LocalTest]) -> None:
    seen: set[int] = set()
    for t in tests:
        if seen & set(t.registers):
            raise ValueError(f"tests overlap on registers: {tests}")
        seen |= set(t.registers)


class ProductRegisters:
    def __init__(self, states: Sequence[DensityMatrix]):
        self.states = list(states)
        dims = {s.dim for s in self.states}
        if len(dims) > 1:
            raise ValueError(f"registers must share one dimension, got {sorted(dims)}")

    def __len__(self):
        return len(self.states)

    def accept_probability(self, test: LocalTest) -> float:
        if test.kind == "swap":
            a, b = (self.states[i].matrix for i in test.registers)
            # SWAP test on a product: 1/2 + tr(rho sigma)/2
            overlap = float(np.sum(a * b.T).real)
            return min(1.0, max(0.0, 0.5 + 0.5 * overlap))
        return measure_binary(self.states[test.registers[0]], test.povm)

    def joint_accept_probability(self, tests: Sequence[LocalTest]) -> float:
        check_disjoint(tests)
        return math.prod(self.accept_probability(t) for t in tests)

    def outcome_distribution(self, tests: Sequence[LocalTest]) -> np.ndarray:
        """Probabilities of the ``2**k`` patterns; bit ``i`` set means test ``i`` rejects."""
        check_disjoint(tests)
        acc = [self.accept_probability(t) for t in tests]
        probs = np.empty(2 ** len(tests))
        for pattern in range(2 ** len(tests)):
            probs[pattern] = math.prod(1 - a if pattern >> i & 1 else a for i, a in enumerate(acc))
        return probs


def purify(rho: DensityMatrix, tol: float = 1e-14) -> np.ndarray:
    """Matrix ``V`` (dim x rank) with ``V V^dagger = rho``."""
    w, v = np.linalg.eigh(rho.matrix)
    keep = w > tol
    return v[:, keep] * np.sqrt(w[keep])


class JointRegisters:
    """Pure tensor of shape ``dims + (ancilla,)``."""

    def __init__(self, tensor: np.ndarray, dims: Sequence[int]):
        self.dims = tuple(int(d) for d in dims)
        t = np.asarray(tensor, dtype=complex)
        if t.size % math.prod(self.dims):
            raise ValueError("tensor size does not match register dimensions")
        self.tensor = t.reshape(self.dims + (-1,))
        norm = float(np.vdot(self.tensor, self.tensor).real)
        if abs(norm - 1) > 1e-6:
            raise ValueError(f"joint state has norm^2 {norm}")
        self.tensor = self.tensor / math.sqrt(norm)

    def __len__(self):
        return len(self.dims)

    @classmethod
    def from_blocks(cls, blocks: Sequence[tuple[int, object]], local_dim: int,
                    cap_blocks: bool = True, cap: int | None = None) -> "JointRegisters":
        """Build from ``(register_count, state)`` blocks in register order.

        Each state is a PureState or DensityMatrix on ``register_count``
        registers. Mixed blocks are purified; ancillas are merged at the end.
        Blocks with more than one register (prover-chosen joint states) are
        checked against the dimension cap.
        """
        entries = 1
        for count, state in blocks:
            entries *= local_dim ** count * (1 if isinstance(state, PureState) else local_dim ** count)
        if entries > MAX_JOINT_ENTRIES:
            raise DimensionCapError(
                f"joint register tensor would hold {entries} amplitudes (limit {MAX_JOINT_ENTRIES}); "
                "use the product backend for this instance")
        factors = []
        dims: list[int] = []
        for count, state in blocks:
            dim = local_dim ** count
            if cap_blocks and count > 1:
                check_dimension(dim, "global certificate", cap)
            if isinstance(state, PureState):
                mat = state.amplitudes.reshape(dim, 1)
            elif isinstance(state, DensityMatrix):
                mat = purify(state)
            else:
                raise TypeError(f"unsupported block state {type(state).__name__}")
            if mat.shape[0] != dim:
                raise ValueError(f"block state has dimension {mat.shape[0]}, expected {dim}")
            factors.append(mat)
            dims.extend([local_dim] * count)
        # combine: registers of every block first, then all ancillas
        t = np.ones((1, 1), dtype=complex)
        for mat in factors:
            t = np.einsum("ra,sb->rsab", t, mat).reshape(t.shape[0] * mat.shape[0],
                                                         t.shape[1] * mat.shape[1])
        return cls(t, dims)

    def _apply(self, t: np.ndarray, test: LocalTest, reject: bool) -> np.ndarray:
        if test.kind == "swap":
            a, b = test.registers
            swapped = np.swapaxes(t, a, b)
            return (t - swapped) / 2 if reject else (t + swapped) / 2
        a = test.registers[0]
        m = test.povm.reject if reject else test.povm.accept
        moved = np.tensordot(m, t, axes=([1], [a]))
        return np.moveaxis(moved, 0, a)

    def pattern_probability(self, tests: Sequence[LocalTest], pattern: int) -> float:
        t = self.tensor
        for i, test in enumerate(tests):
            t = self._apply(t, test, bool(pattern >> i & 1))
        return float(np.vdot(self.tensor, t).real)

    def accept_probability(self, test: LocalTest) -> float:
        return self.joint_accept_probability([test])

    def joint_accept_probability(self, tests: Sequence[LocalTest]) -> float:
        check_disjoint(tests)
        p = self.pattern_probability(tests, 0)
        if p < -ATOL or p > 1 + ATOL:
            raise ArithmeticError(f"acceptance probability {p} out of range")
        return min(1.0, max(0.0, p))

    def outcome_distribution(self, tests: Sequence[LocalTest]) -> np.ndarray:
        check_disjoint(tests)
        probs = np.array([self.pattern_probability(tests, pat) for pat in range(2 ** len(tests))])
        return np.clip(probs, 0.0, 1.0)

    def reduced(self, registers: Sequence[int]) -> DensityMatrix:
        """Reduced state on the given registers (in the given order)."""
        keep = list(registers)
        rest = [i for i in range(len(self.tensor.shape)) if i not in keep]
        t = np.transpose(self.tensor, keep + rest)
        d = math.prod(self.dims[i] for i in keep)
        m = t.reshape(d, -1)
        return DensityMatrix(m @ m.conj().T)


def product_to_joint(regs: ProductRegisters) -> JointRegisters:
    d = regs.states[0].dim
    return JointRegisters.from_blocks([(1, s) for s in regs.states], d)

