"""Classical distributed Merlin-Arthur protocols on a path and the fooling-set attack.

Nodes v_0 .. v_r run ``rounds`` synchronous rounds of message passing after
receiving their certificates, then decide. Every node sees only its own view
(id, certificate, input if terminal, messages received so far) and the public
random string, so outputs depend on certificates within distance ``rounds``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .protocols import equality

MAX_ENUMERABLE_RANDOM_BITS = 20


class AttackPreconditionError(ValueError):
    """The fooling-set attack cannot be applied to this protocol and set."""


@dataclass(frozen=True)
class View:
    node: int
    cert: str
    input: str | None
    inbox: tuple = ()            # per round: (from left, from right); None past the ends


@dataclass(frozen=True, eq=False)
class ClassicalDMA:
    """A μ-round classical dMA protocol on the path v_0 .. v_r.

    ``randomness`` lists ``(value, probability)`` pairs when the random string
    is enumerable; otherwise ``sampler(rng)`` draws one value.
    """

    name: str
    r: int
    rounds: int
    cert_bits: int
    certificate: Callable[[str, str], tuple]
    message: Callable[[int, int, View, object], object]
    decide: Callable[[int, View, object], bool]
    randomness: tuple | None = None
    sampler: Callable[[np.random.Generator], object] | None = None
    function: Callable[[str, str], bool] = equality
    completeness_error: Fraction | float | None = None

    def __post_init__(self):
        if self.r < 1 or self.rounds < 0 or self.cert_bits < 0:
            raise ValueError("need r >= 1, rounds >= 0, cert_bits >= 0")
        if self.randomness is None and self.sampler is None:
            raise ValueError("protocol needs enumerable randomness or a sampler")
        if self.randomness is not None and len(self.randomness) > 2 ** MAX_ENUMERABLE_RANDOM_BITS:
            raise ValueError("enumerable randomness is limited to 2^20 values; use a sampler")
        if self.randomness is not None and sum(p for _, p in self.randomness) != 1:
            raise ValueError("randomness probabilities must sum to 1")

    @property
    def enumerable(self) -> bool:
        return self.randomness is not None

    def check_assignment(self, w: Sequence[str]) -> None:
        if len(w) != self.r + 1:
            raise ValueError(f"certificate assignment needs {self.r + 1} entries")
        for c in w:
            if len(c) > self.cert_bits or set(c) - {"0", "1"}:
                raise ValueError(f"certificate {c!r} is not a bit string of at most {self.cert_bits} bits")

    def outputs(self, x: str, y: str, w: Sequence[str], s) -> list[bool]:
        """Run the rounds and return every node's decision under random string ``s``."""
        self.check_assignment(w)
        views = [View(i, w[i], x if i == 0 else (y if i == self.r else None))
                 for i in range(self.r + 1)]
        for rnd in range(1, self.rounds + 1):
            sent = [self.message(i, rnd, views[i], s) for i in range(self.r + 1)]
            views = [View(v.node, v.cert, v.input, v.inbox + ((
                sent[i - 1] if i > 0 else None,
                sent[i + 1] if i < self.r else None),))
                for i, v in enumerate(views)]
        return [bool(self.decide(i, views[i], s)) for i in range(self.r + 1)]

    def accept_probability(self, x: str, y: str, w: Sequence[str], trials: int | None = None,
                           seed: int | None = None):
        """Probability that all nodes accept; exact (Fraction) when enumerable."""
        if self.enumerable:
            return sum((p for s, p in self.randomness if all(self.outputs(x, y, w, s))), Fraction(0))
        if trials is None or seed is None:
            raise ValueError("sampled acceptance needs trials and seed")
        rng = np.random.default_rng(seed)
        hits = sum(all(self.outputs(x, y, w, self.sampler(rng))) for _ in range(trials))
        return hits / trials

    def event_probability(self, x, y, w, nodes: Sequence[int]):
        """Pr_s[all of ``nodes`` accept] (enumerable randomness only)."""
        if not self.enumerable:
            raise ValueError("event probabilities need enumerable randomness")
        return sum((p for s, p in self.randomness
                    if all(self.outputs(x, y, w, s)[i] for i in nodes)), Fraction(0))


# -- fooling sets ------------------------------------------------------------

@dataclass(frozen=True)
class FoolingSet:
    pairs: tuple

    def __len__(self):
        return len(self.pairs)


def eq_fooling_set(n: int) -> FoolingSet:
    if n < 1:
        raise ValueError("n must be at least 1")
    return FoolingSet(tuple((x, x) for x in ("".join(b) for b in itertools.product("01", repeat=n))))


def is_fooling(S: FoolingSet, f: Callable[[str, str], bool] = equality) -> bool:
    if not all(f(x, y) for x, y in S.pairs):
        return False
    return all(not f(x1, y2) or not f(x2, y1)
               for (x1, y1), (x2, y2) in itertools.combinations(S.pairs, 2))


@dataclass
class FoolingAttackReport:
    protocol: str
    pairs: tuple                 # the two colliding fooling pairs, in set order
    zero_input: tuple            # crossed input with f = 0
    certificates: list           # spliced assignment w''
    accept_probability: float
    exact: bool
    completeness_error: float
    guaranteed_bound: float         # 1 - 2p
    local_bound: float           # Pr[left half accepts on (x,y,w)] + Pr[right half on (x',y',w')] - 1
    trials: int | None = None
    seed: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def bound_met(self) -> bool:
        return self.accept_probability >= self.guaranteed_bound - 1e-12

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol, "pairs": [list(p) for p in self.pairs],
            "zeroInput": list(self.zero_input), "certificates": list(self.certificates),
            "acceptProbability": self.accept_probability, "exact": self.exact,
            "completenessError": self.completeness_error, "guaranteedBound": self.guaranteed_bound,
            "localBound": self.local_bound, "boundMet": self.bound_met,
            "trials": self.trials, "seed": self.seed,
        }


def completeness_error(p: ClassicalDMA, S: FoolingSet, trials=None, seed=None):
    """Worst honest rejection over the pairs of S (or the protocol's declared value)."""
    if p.completeness_error is not None:
        return p.completeness_error
    return max(1 - p.accept_probability(x, y, p.certificate(x, y), trials, seed) for x, y in S.pairs)


def fooling_attack(p: ClassicalDMA, S: FoolingSet, trials: int | None = None,
                   seed: int | None = None) -> FoolingAttackReport:
    mu = p.rounds
    if p.r < 2 * mu + 1:
        raise AttackPreconditionError(f"need r >= 2*mu + 1, got r={p.r}, mu={mu}")
    if len(S) < 2 ** (2 * mu * p.cert_bits) + 1:
        raise AttackPreconditionError(
            f"pigeonhole needs |S| >= 2^(2*mu*c) + 1 = {2 ** (2 * mu * p.cert_bits) + 1}, "
            f"got {len(S)}; certificates are too large")
    if not is_fooling(S, p.function):
        raise AttackPreconditionError("S is not a 1-fooling set for the protocol's function")
    seen: dict = {}
    first = second = None
    for x, y in S.pairs:
        w = tuple(p.certificate(x, y))
        key = w[1:2 * mu + 1]
        if key in seen:
            first, second = seen[key], ((x, y), w)
            break
        seen[key] = ((x, y), w)
    if first is None:
        raise AttackPreconditionError("no two fooling pairs share certificates on v_1..v_2mu")
    ((x, y), w), ((x2, y2), w2) = first, second
    if p.function(x, y2):
        # swap roles so the crossed input (x, y') has f = 0
        ((x, y), w), ((x2, y2), w2) = second, first
    if p.function(x, y2):
        raise AttackPreconditionError("no crossed 0-input; S is not fooling")
    spliced = [w[0]] + [w[i] for i in range(1, 2 * mu + 1)] + [w2[i] for i in range(2 * mu + 1, p.r + 1)]
    acc = p.accept_probability(x, y2, spliced, trials, seed)
    perr = completeness_error(p, S, trials, seed)
    if p.enumerable:
        left = p.event_probability(x, y, w, range(mu + 1))
        right = p.event_probability(x2, y2, w2, range(mu + 1, p.r + 1))
        local = float(left + right - 1)
    else:
        local = float("nan")
    return FoolingAttackReport(
        protocol=p.name, pairs=((x, y), (x2, y2)), zero_input=(x, y2), certificates=spliced,
        accept_probability=float(acc), exact=p.enumerable, completeness_error=float(perr),
        guaranteed_bound=float(1 - 2 * Fraction(perr)) if p.enumerable else 1 - 2 * float(perr),
        local_bound=local, trials=None if p.enumerable else trials,
        seed=None if p.enumerable else seed,
        extra={"exactAccept": str(acc)} if isinstance(acc, Fraction) else {})


# -- concrete protocols ------------------------------------------------------

def _as_fraction(p) -> Fraction:
    return p if isinstance(p, Fraction) else Fraction(p).limit_denominator(10 ** 6)


def _three_way(p: Fraction) -> tuple:
    # X = -1 w.p. 1-2p, X = 0 and X = 1 w.p. p each
    return tuple((v, q) for v, q in ((-1, 1 - 2 * p), (0, p), (1, p)) if q > 0)


def eq1_optimal_protocol(p, r: int = 1) -> ClassicalDMA:
    """Optimal completeness/soundness trade-off for one-bit distant equality."""
    p = _as_fraction(p)
    if not 0 < p <= Fraction(1, 2):
        raise ValueError("p must lie in (0, 1/2]")
    if r < 1:
        raise ValueError("r must be at least 1")

    def decide(i, view, X):
        if X == -1 or view.input is None:
            return True
        return X == int(view.input)

    return ClassicalDMA(
        name=f"eq1-optimal(p={p})", r=r, rounds=0, cert_bits=0,
        certificate=lambda x, y: ("",) * (r + 1),
        message=lambda i, rnd, view, s: None, decide=decide,
        randomness=_three_way(p), completeness_error=p)


def eq1_errors(proto: ClassicalDMA) -> tuple[Fraction, Fraction]:
    """Exact (completeness, soundness error) of a one-bit EQ protocol over all inputs."""
    comp = min(proto.accept_probability(b, b, proto.certificate(b, b)) for b in "01")
    sound = max(proto.accept_probability(a, b, proto.certificate(a, a)) for a, b in (("0", "1"), ("1", "0")))
    return comp, sound


def _parity(x: str) -> int:
    return x.count("1") % 2


def parity_hash_protocol(n: int = 5, r: int = 3, p=Fraction(1, 4)) -> ClassicalDMA:
    """One-round EQ protocol with 1-bit certificates carrying the parity of the input.

    Terminals check their certificate against the parity of their input and
    run the one-bit noisy test on that parity; inner nodes check that their
    neighbours hold the same bit.
    """
    p = _as_fraction(p)
    if not 0 < p <= Fraction(1, 2):
        raise ValueError("p must lie in (0, 1/2]")

    def decide(i, view, X):
        left, right = view.inbox[0]
        if any(m is not None and m != view.cert for m in (left, right)):
            return False
        if view.input is None:
            return True
        h = _parity(view.input)
        return view.cert == str(h) and (X == -1 or X == h)

    return ClassicalDMA(
        name=f"parity-hash(n={n},r={r},p={p})", r=r, rounds=1, cert_bits=1,
        certificate=lambda x, y: (str(_parity(x)),) * (r + 1),
        message=lambda i, rnd, view, s: view.cert, decide=decide,
        randomness=_three_way(p))


def always_accept_protocol(n: int = 5, r: int = 3) -> ClassicalDMA:
    return ClassicalDMA(
        name="always-accept", r=r, rounds=1, cert_bits=1,
        certificate=lambda x, y: ("0",) * (r + 1),
        message=lambda i, rnd, view, s: view.cert, decide=lambda i, view, s: True,
        randomness=((None, Fraction(1)),))


def wide_cert_protocol(n: int = 5, r: int = 3) -> ClassicalDMA:
    """Certificates carry the first three input bits: wider than the attack allows for n = 5."""

    def decide(i, view, s):
        left, right = view.inbox[0]
        if any(m is not None and m != view.cert for m in (left, right)):
            return False
        return view.input is None or view.input[:3] == view.cert

    return ClassicalDMA(
        name="wide-cert", r=r, rounds=1, cert_bits=3,
        certificate=lambda x, y: (x[:3],) * (r + 1),
        message=lambda i, rnd, view, s: view.cert, decide=decide,
        randomness=((None, Fraction(1)),))


BUNDLED = {
    "parity-hash": parity_hash_protocol,
    "always-accept": always_accept_protocol,
    "wide-cert": wide_cert_protocol,
}


def max_attackable_width(n: int, rounds: int) -> int:
    """Largest certificate width covered by the lower bound for n-bit EQ."""
    return (n - 1) // (2 * rounds)


def locality_violations(p: ClassicalDMA, x: str, y: str, w: Sequence[str]) -> list:
    """Nodes whose output changes when a certificate farther than ``rounds`` changes.

    Also flags non-terminal-neighbourhood nodes whose output reacts to an input.
    Only enumerable randomness is checked.
    """
    bad = []
    alphabet = ["".join(b) for k in range(p.cert_bits + 1) for b in itertools.product("01", repeat=k)]
    for s, _ in p.randomness:
        base = p.outputs(x, y, w, s)
        for j in range(p.r + 1):
            for c in alphabet:
                if c == w[j]:
                    continue
                mutated = list(w)
                mutated[j] = c
                out = p.outputs(x, y, mutated, s)
                for i in range(p.r + 1):
                    if abs(i - j) > p.rounds and out[i] != base[i]:
                        bad.append((i, "cert", j))
        for term, other in ((0, (_flip(x), y)), (p.r, (x, _flip(y)))):
            out = p.outputs(*other, w, s)
            for i in range(p.r + 1):
                if abs(i - term) > p.rounds and out[i] != base[i]:
                    bad.append((i, "input", term))
    return bad


def _flip(x: str) -> str:
    return ("1" if x[0] == "0" else "0") + x[1:]
