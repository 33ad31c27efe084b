"""SWAP-test certification of a one-way protocol along a path v_0 .. v_r.

Node v_0 holds x and prepares ``rho_0 = |h_x><h_x|`` in register R_0; the
prover hands registers R_1 .. R_{r-1} to the intermediate nodes. Every
v_j (j < r) flips a coin b_j and forwards R_j to v_{j+1} when b_j = 0. Node
v_j (0 < j < r) SWAP-tests (R_{j-1}, R_j) when it received R_{j-1} and
b_j = 1; v_r applies Bob's POVM for y to R_{r-1} whenever it arrives.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist
from typing import Mapping, Sequence

import numpy as np

from .engine import JointRegisters, LocalTest, ProductRegisters, check_disjoint
from .linalg import (DensityMatrix, PureState, check_dimension, qubits_for, random_density_matrix,
                     random_pure_state)
from .protocols import OneWayProtocol

MAX_EXACT_R = 16
SAMPLE_CHUNK = 8192


class OutOfScopeError(ValueError):
    """The requested analysis is outside what this library verifies."""


@dataclass(frozen=True, eq=False)
class PathInstance:
    r: int
    protocol: OneWayProtocol
    x: str
    y: str

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("path length r must be at least 1")
        bits = self.protocol.input_bits
        for name, v in (("x", self.x), ("y", self.y)):
            if bits is not None and len(v) != bits:
                raise ValueError(f"input {name}={v!r} must have {bits} bits")

    @property
    def legal(self) -> bool:
        return bool(self.protocol.function(self.x, self.y))

    @property
    def local_dim(self) -> int:
        return self.protocol.message_dim


# -- prover strategies ------------------------------------------------------

@dataclass(frozen=True)
class Honest:
    """Every intermediate register holds the sender's message |h_x>."""


@dataclass(frozen=True)
class RotationAttack:
    """|g_j> = cos(pi j / 2r)|h_x> + sin(pi j / 2r)|h_y'> with h_y' = h_y orthogonalized against h_x."""


@dataclass(frozen=True, eq=False)
class ProductStates:
    """One density matrix (or pure state) per intermediate register R_1 .. R_{r-1}."""

    states: tuple

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))


@dataclass(frozen=True, eq=False)
class GlobalState:
    """One joint state over R_1 .. R_{r-1}, pure or mixed.

    ``spans_repetitions`` marks a state entangled across parallel
    repetitions; such strategies are rejected by :func:`repeat_protocol`.
    """

    state: object
    spans_repetitions: bool = False


def strategy_name(strategy) -> str:
    return {Honest: "honest", RotationAttack: "rotation", ProductStates: "product",
            GlobalState: "global"}[type(strategy)]


def rotation_states(instance: PathInstance) -> list[PureState]:
    """States g_1 .. g_{r-1} of the rotation adversary."""
    r = instance.r
    hx = instance.protocol.message_state(instance.x).amplitudes
    hy = instance.protocol.message_state(instance.y).amplitudes
    perp = hy - np.vdot(hx, hy) * hx
    norm = np.linalg.norm(perp)
    if norm < 1e-12:
        raise ValueError("rotation attack needs messages with a component of h_y orthogonal to h_x")
    perp = perp / norm
    return [PureState(math.cos(math.pi * j / (2 * r)) * hx + math.sin(math.pi * j / (2 * r)) * perp)
            for j in range(1, r)]


def intermediate_states(instance: PathInstance, strategy) -> list:
    """Per-register states of a product strategy (R_1 .. R_{r-1})."""
    r = instance.r
    if isinstance(strategy, Honest):
        hx = instance.protocol.message_state(instance.x)
        return [hx] * (r - 1)
    if isinstance(strategy, RotationAttack):
        return rotation_states(instance)
    if isinstance(strategy, ProductStates):
        if len(strategy.states) != r - 1:
            raise ValueError(f"product strategy needs {r - 1} states, got {len(strategy.states)}")
        for s in strategy.states:
            if s.dim != instance.local_dim:
                raise ValueError(f"certificate dimension {s.dim} != message dimension {instance.local_dim}")
        return list(strategy.states)
    raise TypeError(f"{type(strategy).__name__} is not a product strategy")


def _density(s) -> DensityMatrix:
    return s.density() if isinstance(s, PureState) else s


def build_registers(instance: PathInstance, strategy, backend: str = "auto"):
    """Registers R_0 .. R_{r-1} under ``strategy`` on the requested backend."""
    if backend not in ("auto", "product", "global"):
        raise ValueError(f"unknown backend {backend!r}")
    hx = instance.protocol.message_state(instance.x)
    d = instance.local_dim
    if isinstance(strategy, GlobalState):
        if backend == "product":
            raise ValueError("a global strategy cannot use the product backend")
        if instance.r == 1:
            return JointRegisters.from_blocks([(1, hx)], d)
        st = strategy.state
        if st.dim != d ** (instance.r - 1):
            raise ValueError(f"global certificate dimension {st.dim} != {d}^{instance.r - 1}")
        return JointRegisters.from_blocks([(1, hx), (instance.r - 1, st)], d)
    states = [hx] + intermediate_states(instance, strategy)
    if backend == "global":
        check_dimension(d ** len(states), "global backend state")
        return JointRegisters.from_blocks([(1, s) for s in states], d)
    return ProductRegisters([_density(s) for s in states])


def backend_name(regs) -> str:
    return "global" if isinstance(regs, JointRegisters) else "product"


# -- coins and tests --------------------------------------------------------

def active_tests(coins: Sequence[int]) -> list[LocalTest]:
    """Tests triggered by coin string b_0 .. b_{r-1} (POVM left unresolved)."""
    r = len(coins)
    if r < 1 or any(b not in (0, 1) for b in coins):
        raise ValueError(f"invalid coin string {coins!r}")
    tests = [LocalTest("swap", j, (j - 1, j)) for j in range(1, r)
             if coins[j - 1] == 0 and coins[j] == 1]
    if coins[r - 1] == 0:
        tests.append(LocalTest("povm", r, (r - 1,)))
    check_disjoint(tests)
    return tests


def resolve_tests(instance: PathInstance, coins: Sequence[int]) -> list[LocalTest]:
    povm = instance.protocol.receiver_povm(instance.y)
    return [LocalTest(t.kind, t.node, t.registers, povm) if t.kind == "povm" else t
            for t in active_tests(coins)]


def node_tests(instance: PathInstance) -> list[LocalTest]:
    """The test each node v_1 .. v_r would perform, indexed by node."""
    povm = instance.protocol.receiver_povm(instance.y)
    r = instance.r
    return [LocalTest("swap", j, (j - 1, j)) for j in range(1, r)] + [
        LocalTest("povm", r, (r - 1,), povm)]


def register_locations(coins: Sequence[int]) -> list[int]:
    """Index of the node holding R_j after the forwarding step."""
    return [j + 1 if b == 0 else j for j, b in enumerate(coins)]


def coin_strings(r: int):
    return itertools.product((0, 1), repeat=r)


# -- reports ----------------------------------------------------------------

@dataclass
class AcceptanceReport:
    r: int
    accept_probability: float
    conditionals: list          # alpha_j = Pr[E_j | F_j], j = 1..r (None if F_j never sampled)
    occurrence: list            # Pr[F_j]
    legal: bool
    mode: str = "exact"
    backend: str = "product"
    strategy: str = ""
    repetition_count: int = 1
    certificate_qubits: int = 0
    message_qubits: int = 0
    trials: int | None = None
    seed: int | None = None
    confidence_interval: tuple | None = None
    single_round_accept: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def rejection_probability(self) -> float:
        return 1.0 - self.accept_probability

    @property
    def soundness_sum(self) -> float:
        return math.fsum(a for a in self.conditionals if a is not None)

    @property
    def soundness_sum_lower_bound_met(self) -> bool | None:
        if self.legal:
            return None
        return check_soundness_sum(self, self.r)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rejection_probability"] = self.rejection_probability
        d["soundness_sum"] = self.soundness_sum
        d["soundness_sum_lower_bound_met"] = self.soundness_sum_lower_bound_met
        if d["confidence_interval"] is not None:
            d["confidence_interval"] = list(d["confidence_interval"])
        return d


def check_soundness_sum(report: AcceptanceReport, r: int) -> bool:
    """Sum of conditional rejection probabilities reaches 1/(21 r)."""
    return report.soundness_sum >= 1 / (21 * r) - 1e-9


def soundness_bound(r: int) -> float:
    """Guaranteed single-round rejection probability on illegal inputs."""
    return 1 / (42 * r * r)


def soundness_repetitions(r: int) -> int:
    return 84 * r * r


def certificate_sizes(instance: PathInstance, k: int) -> tuple[int, int]:
    q = qubits_for(instance.local_dim)
    index_bits = math.ceil(math.log2(k)) if k > 1 else 0
    return k * q, k * (q + index_bits)


def exact_acceptance(instance: PathInstance, strategy, backend: str = "auto") -> AcceptanceReport:
    """Acceptance probability by enumerating all 2^r coin strings."""
    r = instance.r
    if r > MAX_EXACT_R:
        raise ValueError(f"exact analysis is capped at r={MAX_EXACT_R}; use sampled_acceptance")
    regs = build_registers(instance, strategy, backend)
    terms = []
    occurs = [0] * r
    for coins in coin_strings(r):
        tests = resolve_tests(instance, coins)
        for t in tests:
            occurs[t.node - 1] += 1
        terms.append(regs.joint_accept_probability(tests))
    accept = math.fsum(terms) / 2 ** r
    alphas = [1.0 - regs.accept_probability(t) for t in node_tests(instance)]
    cert, msg = certificate_sizes(instance, 1)
    return AcceptanceReport(
        r=r, accept_probability=accept, conditionals=alphas,
        occurrence=[c / 2 ** r for c in occurs], legal=instance.legal,
        mode="exact", backend=backend_name(regs), strategy=strategy_name(strategy),
        certificate_qubits=cert, message_qubits=msg, single_round_accept=accept)


def wilson_interval(successes: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def _sample_chunk_product(instance, regs, alphas, size, rng):
    r = instance.r
    coins = rng.integers(0, 2, size=(size, r))
    active = np.zeros((size, r), dtype=bool)
    active[:, :r - 1] = (coins[:, :r - 1] == 0) & (coins[:, 1:] == 1)
    active[:, r - 1] = coins[:, r - 1] == 0
    u = rng.random((size, r))
    rejected = active & (u < np.asarray(alphas))
    accepted = int(np.count_nonzero(~rejected.any(axis=1)))
    return accepted, active.sum(axis=0), rejected.sum(axis=0)


def _sample_chunk_joint(instance, regs, cache, size, rng):
    r = instance.r
    coins = rng.integers(0, 2, size=(size, r))
    u = rng.random(size)
    weights = 1 << np.arange(r - 1, -1, -1)
    codes = coins @ weights
    accepted = 0
    active = np.zeros(r, dtype=np.int64)
    rejected = np.zeros(r, dtype=np.int64)
    for code in np.unique(codes):
        mask = codes == code
        cs = tuple(int(b) for b in coins[np.argmax(mask)])
        tests, cdf = cache[cs]
        patterns = np.minimum(np.searchsorted(cdf, u[mask], side="right"), len(cdf) - 1)
        accepted += int(np.count_nonzero(patterns == 0))
        for i, t in enumerate(tests):
            active[t.node - 1] += int(mask.sum())
            rejected[t.node - 1] += int(np.count_nonzero(patterns >> i & 1))
    return accepted, active, rejected


def sampled_acceptance(instance: PathInstance, strategy, trials: int, seed: int,
                       backend: str = "auto", workers: int = 1) -> AcceptanceReport:
    """Monte Carlo run of the protocol with a 99% Wilson interval.

    Trials are split into fixed chunks with independent counter-derived
    streams, so the result depends only on ``(seed, trials)`` and never on
    ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if seed is None:
        raise ValueError("sampled runs need an explicit seed")
    r = instance.r
    regs = build_registers(instance, strategy, backend)
    sizes = [SAMPLE_CHUNK] * (trials // SAMPLE_CHUNK)
    if trials % SAMPLE_CHUNK:
        sizes.append(trials % SAMPLE_CHUNK)

    if isinstance(regs, ProductRegisters):
        alphas = [1.0 - regs.accept_probability(t) for t in node_tests(instance)]

        def run(i):
            return _sample_chunk_product(instance, regs, alphas, sizes[i], _chunk_rng(seed, i))
    else:
        if r > MAX_EXACT_R:
            raise ValueError(f"global-state sampling is capped at r={MAX_EXACT_R}")
        cache = {}
        for coins in coin_strings(r):
            tests = resolve_tests(instance, coins)
            cache[coins] = (tests, np.cumsum(regs.outcome_distribution(tests)))

        def run(i):
            return _sample_chunk_joint(instance, regs, cache, sizes[i], _chunk_rng(seed, i))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, range(len(sizes))))
    else:
        results = [run(i) for i in range(len(sizes))]

    accepted = sum(a for a, _, _ in results)
    active = np.sum([a for _, a, _ in results], axis=0)
    rejected = np.sum([b for _, _, b in results], axis=0)
    cond = [float(rejected[j] / active[j]) if active[j] else None for j in range(r)]
    cert, msg = certificate_sizes(instance, 1)
    return AcceptanceReport(
        r=r, accept_probability=accepted / trials, conditionals=cond,
        occurrence=[float(a / trials) for a in active], legal=instance.legal,
        mode="sampled", backend=backend_name(regs), strategy=strategy_name(strategy),
        certificate_qubits=cert, message_qubits=msg, trials=trials, seed=seed,
        confidence_interval=wilson_interval(accepted, trials))


def repeat_protocol(instance: PathInstance, strategy, k: int, backend: str = "auto") -> AcceptanceReport:
    """k-fold parallel repetition with conjunctive acceptance.

    ``strategy`` is either one strategy used independently in every
    repetition or a sequence of k per-repetition strategies.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    per_round = list(strategy) if isinstance(strategy, (list, tuple)) else [strategy] * k
    if len(per_round) != k:
        raise ValueError(f"expected {k} per-repetition strategies, got {len(per_round)}")
    for s in per_round:
        if isinstance(s, GlobalState) and s.spans_repetitions:
            raise OutOfScopeError(
                "certificates entangled across repetitions are out of verified scope")
    reports = {}
    accept = 1.0
    for s in per_round:
        key = id(s)
        if key not in reports:
            reports[key] = exact_acceptance(instance, s, backend)
        accept *= reports[key].accept_probability
    first = reports[id(per_round[0])]
    cert, msg = certificate_sizes(instance, k)
    name = strategy_name(per_round[0]) if len({type(s) for s in per_round}) == 1 else "mixed"
    return AcceptanceReport(
        r=instance.r, accept_probability=accept, conditionals=first.conditionals,
        occurrence=first.occurrence, legal=instance.legal, mode="exact",
        backend=first.backend, strategy=name, repetition_count=k,
        certificate_qubits=cert, message_qubits=msg,
        single_round_accept=first.accept_probability)


def event_sandwich_check(joint) -> bool:
    """Check Pr[and A_j] <= mean Pr[A_j] <= Pr[or A_j] for a joint table.

    ``joint`` maps outcome tuples (one bit per event) to probabilities, or
    is an array of shape ``(2,) * n``. Fractions give an exact check.
    """
    if isinstance(joint, np.ndarray):
        joint = {idx: joint[idx] for idx in itertools.product((0, 1), repeat=joint.ndim)}
    table: Mapping[tuple, object] = joint
    n = len(next(iter(table)))
    marginals = [sum(p for o, p in table.items() if o[j]) for j in range(n)]
    mean = sum(marginals) / n
    p_and = sum(p for o, p in table.items() if all(o))
    p_or = sum(p for o, p in table.items() if any(o))
    return p_and <= mean <= p_or


# -- randomized adversaries --------------------------------------------------

def random_product_strategy(instance: PathInstance, rng: np.random.Generator) -> ProductStates:
    """Random certificates, half of them perturbations of the rotation attack."""
    d = instance.local_dim
    r = instance.r
    kind = rng.integers(3)
    if kind == 0:
        return ProductStates(tuple(random_density_matrix(d, rng, rank=int(rng.integers(1, 4)))
                                   for _ in range(r - 1)))
    if kind == 1:
        return ProductStates(tuple(random_pure_state(d, rng) for _ in range(r - 1)))
    base = rotation_states(instance) if not instance.legal else [
        instance.protocol.message_state(instance.x)] * (r - 1)
    eps = float(rng.uniform(0.0, 0.3))
    out = []
    for g in base:
        noise = random_pure_state(d, rng).amplitudes
        v = g.amplitudes + eps * noise
        out.append(PureState(v / np.linalg.norm(v)))
    return ProductStates(tuple(out))


def random_global_strategy(instance: PathInstance, rng: np.random.Generator,
                           max_rank: int = 4) -> GlobalState:
    """Random joint certificate over R_1 .. R_{r-1}: pure or low-rank mixed.

    Half of the draws live on span{h_x, h_y}^{(x)(r-1)}, where the
    rotation attack lives, plus a small generic perturbation.
    """
    d = instance.local_dim
    m = instance.r - 1
    dim = d ** m
    rank = int(rng.integers(1, max_rank + 1))
    if rng.random() < 0.5 and not instance.legal:
        hx = instance.protocol.message_state(instance.x).amplitudes
        hy = instance.protocol.message_state(instance.y).amplitudes
        perp = hy - np.vdot(hx, hy) * hx
        iso = np.stack([hx, perp / np.linalg.norm(perp)], axis=1)
        full = np.ones((1, 1), dtype=complex)
        for _ in range(m):
            full = np.kron(full, iso)
        eps = float(rng.uniform(0.0, 0.2))
        cols = []
        for _ in range(rank):
            small = random_pure_state(2 ** m, rng).amplitudes
            v = full @ small + eps * random_pure_state(dim, rng).amplitudes
            cols.append(v / np.linalg.norm(v))
        if rank == 1:
            return GlobalState(PureState(cols[0]))
        w = rng.dirichlet(np.ones(rank))
        return GlobalState(DensityMatrix(sum(wi * np.outer(c, c.conj()) for wi, c in zip(w, cols))))
    if rank == 1:
        return GlobalState(random_pure_state(dim, rng))
    return GlobalState(random_density_matrix(dim, rng, rank=rank))
