"""Quantum fingerprints built from Reed-Solomon style polynomial hashing.

The hash family is ``{h_a : a in F_p}`` with ``h_a(x) = sum_i s_i(x) a^i mod p``
where ``s_i(x)`` are the field symbols of ``x``. Distinct inputs give distinct
polynomials of degree below ``block_count``, so they agree on at most
``block_count - 1`` evaluation points. The fingerprint

    |h_x> = p^{-1/2} sum_a |a>|h_a(x)>

lives in dimension ``p * p`` with flat basis index ``a * p + value``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sympy import nextprime

from .linalg import PureState, qubits_for


def _bits(x) -> tuple[int, ...]:
    if isinstance(x, str):
        if any(c not in "01" for c in x):
            raise ValueError(f"input {x!r} is not a bit string")
        return tuple(int(c) for c in x)
    return tuple(int(b) for b in x)


@dataclass(frozen=True)
class HashFamily:
    n: int
    prime: int
    block_count: int
    bits_per_symbol: int = 1

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.block_count * self.bits_per_symbol < self.n:
            raise ValueError("symbols cannot hold all input bits")
        if self.bits_per_symbol > 1 and 2 ** self.bits_per_symbol > self.prime:
            raise ValueError("packed symbol does not fit in the field")

    @property
    def size(self) -> int:
        """Number of hash functions K (one per evaluation point)."""
        return self.prime

    @property
    def dim(self) -> int:
        return self.prime * self.prime

    @property
    def qubits(self) -> int:
        return qubits_for(self.dim)

    @property
    def max_overlap(self) -> Fraction:
        """Upper bound on <h_x|h_y> for x != y."""
        return Fraction(self.block_count - 1, self.prime)

    def symbols(self, x) -> list[int]:
        bits = _bits(x)
        if len(bits) != self.n:
            raise ValueError(f"input has {len(bits)} bits, family expects {self.n}")
        w = self.bits_per_symbol
        out = []
        for i in range(self.block_count):
            chunk = bits[i * w:(i + 1) * w]
            out.append(int("".join(map(str, chunk)), 2) if chunk else 0)
        return out

    def hash(self, a: int, x) -> int:
        # Horner evaluation, symbol i is the coefficient of a^i
        v = 0
        for s in reversed(self.symbols(x)):
            v = (v * a + s) % self.prime
        return v

    def hash_values(self, x) -> np.ndarray:
        syms = self.symbols(x)
        a = np.arange(self.prime, dtype=np.int64)
        v = np.zeros(self.prime, dtype=np.int64)
        for s in reversed(syms):
            v = (v * a + s) % self.prime
        return v

    def agreement(self, x, y) -> int:
        return int(np.count_nonzero(self.hash_values(x) == self.hash_values(y)))


def make_family(n: int, min_soundness: float = 2 / 3, packed: bool = False) -> HashFamily:
    """Smallest-prime family whose distinct fingerprints overlap by at most ``1 - min_soundness``.

    With one symbol per bit this picks the smallest prime
    ``p >= block_count / (1 - min_soundness)``; the default gives
    ``p >= 3 * n``. ``packed`` stores ``floor(log2 p)`` bits per symbol.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0 < min_soundness < 1:
        raise ValueError("min_soundness must lie in (0, 1)")
    overlap = Fraction(min_soundness).limit_denominator(10 ** 6)
    overlap = 1 - overlap

    def smallest_prime_at_least(m: int) -> int:
        return nextprime(max(m, 2) - 1)

    if not packed:
        p = smallest_prime_at_least(math.ceil(n / overlap))
        return HashFamily(n=n, prime=p, block_count=n)
    p = 3
    while True:
        w = max(1, int(math.floor(math.log2(p))))
        blocks = math.ceil(n / w)
        need = math.ceil(blocks / overlap)
        if p >= need:
            return HashFamily(n=n, prime=p, block_count=blocks, bits_per_symbol=w)
        p = smallest_prime_at_least(need)


@dataclass(frozen=True, eq=False)
class Fingerprint:
    family: HashFamily
    source: tuple[int, ...]
    state: PureState

    @property
    def input_string(self) -> str:
        return "".join(map(str, self.source))


def fingerprint_of(family: HashFamily, x) -> Fingerprint:
    bits = _bits(x)
    if len(bits) != family.n:
        raise ValueError(f"input has {len(bits)} bits, family expects {family.n}")
    p = family.prime
    amps = np.zeros(p * p, dtype=complex)
    amps[np.arange(p) * p + family.hash_values(bits)] = 1 / math.sqrt(p)
    return Fingerprint(family, bits, PureState(amps))


def inner_product(a: Fingerprint, b: Fingerprint) -> complex:
    if a.family != b.family:
        raise ValueError("fingerprints come from different families")
    return a.state.inner(b.state)


def exact_inner_product(family: HashFamily, x, y) -> Fraction:
    """<h_x|h_y> as an exact rational: agreement count over p."""
    return Fraction(family.agreement(x, y), family.prime)


def all_inputs(n: int) -> list[str]:
    return [format(i, f"0{n}b") for i in range(2 ** n)]
