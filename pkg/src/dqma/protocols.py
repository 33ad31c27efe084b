"""One-way quantum communication protocols (message state + receiver POVM)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .fingerprint import HashFamily, all_inputs, fingerprint_of
from .linalg import (BinaryPOVM, DimensionCapError, PureState, check_dimension,
                     measure_binary, qubits_for)


def equality(x, y) -> bool:
    return tuple(x) == tuple(y)


@dataclass(frozen=True, eq=False)
class OneWayProtocol:
    """Alice sends ``message_state(x)``; Bob measures ``receiver_povm(y)``.

    ``error_kind`` is ``"one-sided"`` (inputs with f = 1 are always accepted)
    or ``"two-sided"``; ``error_bound`` is the worst-case error probability.
    """

    name: str
    message_dim: int
    message_state: Callable[[str], PureState]
    receiver_povm: Callable[[str], BinaryPOVM]
    error_kind: str
    error_bound: float
    function: Callable[[str, str], bool] = equality
    input_bits: int | None = None

    def __post_init__(self):
        if self.error_kind not in ("one-sided", "two-sided"):
            raise ValueError(f"unknown error kind {self.error_kind!r}")

    @property
    def qubits(self) -> int:
        return qubits_for(self.message_dim)

    def accept_probability(self, x, y) -> float:
        return measure_binary(self.message_state(x).density(), self.receiver_povm(y))

    def inputs(self) -> list[str]:
        if self.input_bits is None:
            raise ValueError(f"protocol {self.name} does not enumerate its inputs")
        return all_inputs(self.input_bits)


def eq_protocol(family: HashFamily) -> OneWayProtocol:
    """Fingerprint protocol for equality: Bob projects onto his own fingerprint."""

    @lru_cache(maxsize=None)
    def state(x) -> PureState:
        return fingerprint_of(family, x).state

    @lru_cache(maxsize=None)
    def povm(y) -> BinaryPOVM:
        return BinaryPOVM.projector_onto(state(y))

    overlap = family.max_overlap
    return OneWayProtocol(
        name=f"eq-fingerprint(n={family.n},p={family.prime})",
        message_dim=family.dim,
        message_state=lambda x: state(_key(x)),
        receiver_povm=lambda y: povm(_key(y)),
        error_kind="one-sided",
        error_bound=float(overlap * overlap),
        input_bits=family.n,
    )


def _key(x) -> str:
    return x if isinstance(x, str) else "".join(map(str, x))


def toy_eq_protocol() -> OneWayProtocol:
    """One-bit equality with computational-basis qubit messages (exactly orthogonal)."""
    states = {b: PureState.basis(2, int(b)) for b in "01"}
    povms = {b: BinaryPOVM.projector_onto(states[b]) for b in "01"}
    return OneWayProtocol(
        name="eq-toy",
        message_dim=2,
        message_state=lambda x: states[_key(x)],
        receiver_povm=lambda y: povms[_key(y)],
        error_kind="one-sided",
        error_bound=0.0,
        input_bits=1,
    )


def noisy_protocol(pi: OneWayProtocol, flip: float) -> OneWayProtocol:
    """Bob's output is flipped with probability ``flip``: accept -> (1-flip) A + flip R."""
    if not 0 <= flip < 0.5:
        raise ValueError("flip probability must lie in [0, 1/2)")

    @lru_cache(maxsize=None)
    def povm(y) -> BinaryPOVM:
        base = pi.receiver_povm(y)
        return BinaryPOVM.from_accept((1 - flip) * base.accept + flip * base.reject)

    # completeness error becomes flip; soundness error e -> e(1 - 2 flip) + flip
    bound = pi.error_bound * (1 - 2 * flip) + flip
    return OneWayProtocol(
        name=f"{pi.name}+flip({flip:g})",
        message_dim=pi.message_dim,
        message_state=pi.message_state,
        receiver_povm=lambda y: povm(_key(y)),
        error_kind="two-sided",
        error_bound=bound,
        function=pi.function,
        input_bits=pi.input_bits,
    )


def binomial_tail(n: int, k: int, p) -> Fraction | float:
    """P[Bin(n, p) >= k]; exact when ``p`` is a Fraction."""
    return sum(math.comb(n, i) * p ** i * (1 - p) ** (n - i) for i in range(k, n + 1))


def majority_error(per_round_error, repetitions: int):
    """Error of a majority vote over independent rounds each wrong w.p. ``per_round_error``."""
    return binomial_tail(repetitions, repetitions // 2 + 1, per_round_error)


def repetitions_for(per_round_error: float, target: float) -> int:
    """Smallest odd repetition count whose majority error is at most ``target``."""
    if not 0 <= per_round_error < 0.5:
        raise ValueError("per-round error must be below 1/2")
    reps = 1
    while majority_error(per_round_error, reps) > target:
        reps += 2
    return reps


def _majority_operator(acc: np.ndarray, rej: np.ndarray, reps: int) -> np.ndarray:
    """Accept element of the majority vote over ``reps`` tensor copies."""
    need = reps // 2 + 1
    # at_least[m] projects the rounds seen so far onto ">= m accepts"
    at_least = [np.eye(1)] + [np.zeros((1, 1))] * need
    for _ in range(reps):
        eye = np.eye(at_least[0].shape[0] * acc.shape[0])
        at_least = [eye] + [np.kron(at_least[m - 1], acc) + np.kron(at_least[m], rej)
                            for m in range(1, need + 1)]
    return at_least[need]


@dataclass(frozen=True, eq=False)
class MajorityProtocol(OneWayProtocol):
    """``repetitions`` independent copies of ``base`` decided by majority vote."""

    base: OneWayProtocol = field(default=None)
    repetitions: int = 1

    def accept_probability(self, x, y) -> float:
        # product message, so rounds are independent Bernoulli trials
        p = self.base.accept_probability(x, y)
        return float(binomial_tail(self.repetitions, self.repetitions // 2 + 1, p))


def amplify_by_majority(pi: OneWayProtocol, repetitions: int) -> MajorityProtocol:
    if repetitions < 1 or repetitions % 2 == 0:
        raise ValueError("repetitions must be a positive odd number")
    if pi.error_bound >= 0.5:
        raise ValueError("majority voting needs per-round error below 1/2")
    dim = pi.message_dim ** repetitions
    check_dimension(dim, "amplified message")

    @lru_cache(maxsize=None)
    def state(x) -> PureState:
        v = np.ones(1, dtype=complex)
        single = pi.message_state(x).amplitudes
        for _ in range(repetitions):
            v = np.kron(v, single)
        return PureState(v)

    @lru_cache(maxsize=None)
    def povm(y) -> BinaryPOVM:
        base = pi.receiver_povm(y)
        acc = _majority_operator(base.accept, base.reject, repetitions)
        return BinaryPOVM.from_accept(acc)

    err = pi.error_bound
    if isinstance(err, float):
        err = Fraction(err).limit_denominator(10 ** 9)
    return MajorityProtocol(
        name=f"{pi.name}^maj{repetitions}",
        message_dim=dim,
        message_state=lambda x: state(_key(x)),
        receiver_povm=lambda y: povm(_key(y)),
        error_kind=pi.error_kind,
        error_bound=float(majority_error(err, repetitions)),
        function=pi.function,
        input_bits=pi.input_bits,
        base=pi,
        repetitions=repetitions,
    )


def protocol_errors(pi: OneWayProtocol, pairs: Sequence[tuple[str, str]] | None = None) -> tuple[float, float]:
    """Worst-case (completeness error, soundness error) over ``pairs`` (default: all)."""
    if pairs is None:
        ins = pi.inputs()
        pairs = list(itertools.product(ins, ins))
    comp, sound = 0.0, 0.0
    for x, y in pairs:
        p = pi.accept_probability(x, y)
        if pi.function(x, y):
            comp = max(comp, 1 - p)
        else:
            sound = max(sound, p)
    return comp, sound


def two_sided_target(n: int, r: int, c: float = 1.0) -> float:
    """Per-protocol error making the path protocol's completeness ``1 - 1/n^c``."""
    return 1.0 / (42 * n ** c * r * r)


__all__ = [
    "OneWayProtocol", "MajorityProtocol", "eq_protocol", "toy_eq_protocol", "noisy_protocol",
    "amplify_by_majority", "binomial_tail", "majority_error", "repetitions_for",
    "protocol_errors", "two_sided_target", "DimensionCapError",
]
