"""Equality certification among t terminals on a certification tree.

Every non-root node v flips b_v and forwards its register to its parent
when b_v = 0. A non-terminal node with b_v = 1 that received registers
SWAP-tests its own certificate against one of them, chosen uniformly. The
root u_1 applies the POVM for its own input x_1 to one uniformly chosen
received register. Leaf terminals prepare their own fingerprints.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping

import numpy as np

from .engine import JointRegisters, LocalTest, ProductRegisters, check_disjoint
from .fingerprint import make_family
from .linalg import PureState, check_dimension, qubits_for
from .path import SAMPLE_CHUNK, GlobalState, Honest, ProductStates, _chunk_rng, wilson_interval
from .protocols import OneWayProtocol, eq_protocol
from .tree import CertTree, Network, build_cert_tree, label_bits, label_tree, verify_labels

MAX_EXACT_NODES = 18


@dataclass(frozen=True)
class PathRotation:
    """Rotation adversary along the tree path from a differing leaf to the root.

    Nodes off that path receive the honest certificate |h_{x_1}>.
    """

    leaf: int | None = None


def _node_key(v):
    return (v.node, 1) if hasattr(v, "node") else (v, 0)


@dataclass(frozen=True, eq=False)
class TreeInstance:
    net: Network
    tree: CertTree
    protocol: OneWayProtocol

    @classmethod
    def from_network(cls, net: Network, protocol: OneWayProtocol | None = None) -> "TreeInstance":
        if not net.inputs:
            raise ValueError("network has no terminal inputs")
        if protocol is None:
            n = len(next(iter(net.inputs.values())))
            protocol = eq_protocol(make_family(n))
        return cls(net, build_cert_tree(net), protocol)

    @property
    def root_input(self) -> str:
        return self.net.inputs[self.tree.root]

    @property
    def legal(self) -> bool:
        return len(set(self.net.inputs.values())) == 1

    @property
    def register_nodes(self) -> list:
        """Non-root tree nodes, one register each, in register order."""
        return sorted((v for v in self.tree.nodes if v != self.tree.root), key=_node_key)

    def is_leaf_terminal(self, v) -> bool:
        return v in self.net.terminals and v != self.tree.root

    @property
    def prover_nodes(self) -> list:
        return [v for v in self.register_nodes if not self.is_leaf_terminal(v)]

    def differing_leaf(self) -> int:
        x1 = self.root_input
        bad = [t for t in sorted(self.net.terminals) if self.net.inputs[t] != x1]
        if not bad:
            raise ValueError("all inputs are equal; there is no differing leaf")
        return bad[0]


def certificate_states(inst: TreeInstance, strategy) -> dict:
    """Prover register content per non-terminal node for product strategies."""
    pi = inst.protocol
    h1 = pi.message_state(inst.root_input)
    if isinstance(strategy, Honest):
        return {v: h1 for v in inst.prover_nodes}
    if isinstance(strategy, PathRotation):
        leaf = inst.differing_leaf() if strategy.leaf is None else strategy.leaf
        hl = pi.message_state(inst.net.inputs[leaf]).amplitudes
        perp = h1.amplitudes - np.vdot(hl, h1.amplitudes) * hl
        norm = np.linalg.norm(perp)
        if norm < 1e-12:
            raise ValueError("leaf and root messages are parallel")
        perp /= norm
        path = inst.tree.path_to_root(leaf)
        depth = len(path) - 1
        states = {v: h1 for v in inst.prover_nodes}
        for j, v in enumerate(path[1:-1], start=1):
            theta = math.pi * j / (2 * depth)
            states[v] = PureState(math.cos(theta) * hl + math.sin(theta) * perp)
        return states
    if isinstance(strategy, ProductStates):
        keyed = bool(strategy.states) and isinstance(strategy.states[0], tuple)
        mapping = dict(strategy.states) if keyed else dict(zip(inst.prover_nodes, strategy.states))
        if not keyed and len(strategy.states) != len(inst.prover_nodes):
            raise ValueError(f"product strategy needs {len(inst.prover_nodes)} states")
        if set(mapping) != set(inst.prover_nodes):
            raise ValueError("product strategy must cover exactly the non-terminal nodes")
        return mapping
    raise TypeError(f"{type(strategy).__name__} is not a product strategy")


def build_tree_registers(inst: TreeInstance, strategy, backend: str = "auto"):
    if backend not in ("auto", "product", "global"):
        raise ValueError(f"unknown backend {backend!r}")
    pi = inst.protocol
    d = pi.message_dim
    nodes = inst.register_nodes
    prepared = {v: pi.message_state(inst.net.inputs[v]) for v in nodes if inst.is_leaf_terminal(v)}
    if isinstance(strategy, GlobalState):
        if backend == "product":
            raise ValueError("a global strategy cannot use the product backend")
        # prover registers first (one joint block), then prepared leaves; reorder via index map
        prover = inst.prover_nodes
        blocks = [(len(prover), strategy.state)] if prover else []
        blocks += [(1, prepared[v]) for v in nodes if v in prepared]
        order = prover + [v for v in nodes if v in prepared]
        regs = JointRegisters.from_blocks(blocks, d)
        perm = [order.index(v) for v in nodes] + [len(order)]
        regs.tensor = np.transpose(regs.tensor, perm)
        return regs
    certs = certificate_states(inst, strategy)
    states = [prepared[v] if v in prepared else certs[v] for v in nodes]
    if backend == "global":
        check_dimension(d ** len(states), "global backend state")
        return JointRegisters.from_blocks([(1, s) for s in states], d)
    return ProductRegisters([s.density() if isinstance(s, PureState) else s for s in states])


def scenarios(inst: TreeInstance, coins: Mapping):
    """Yield ``(weight_given_coins, tests)`` for every uniform child choice."""
    tree = inst.tree
    index = {v: i for i, v in enumerate(inst.register_nodes)}
    povm = inst.protocol.receiver_povm(inst.root_input)
    testers = []
    for u in [tree.root] + inst.prover_nodes:
        received = [c for c in tree.children.get(u, ()) if coins[c] == 0]
        if not received:
            continue
        if u == tree.root or coins[u] == 1:
            testers.append((u, received))
    for choice in itertools.product(*(rec for _, rec in testers)):
        weight = 1.0
        tests = []
        for (u, rec), c in zip(testers, choice):
            weight /= len(rec)
            if u == tree.root:
                tests.append(LocalTest("povm", u, (index[c],), povm))
            else:
                tests.append(LocalTest("swap", u, (index[u], index[c])))
        check_disjoint(tests)
        yield weight, tests


@dataclass
class TreeReport:
    accept_probability: float
    single_round_accept: float
    legal: bool
    labels_ok: bool
    repetition_count: int
    radius: int
    height: int
    terminals: int
    max_degree: int
    nodes: list = field(default_factory=list)
    occurrence: list = field(default_factory=list)
    conditionals: list = field(default_factory=list)
    certificate_qubits: int = 0
    label_bits: int = 0
    mode: str = "exact"
    backend: str = "product"
    trials: int | None = None
    seed: int | None = None
    confidence_interval: tuple | None = None

    @property
    def rejection_probability(self) -> float:
        return 1.0 - self.accept_probability

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rejection_probability"] = self.rejection_probability
        if d["confidence_interval"] is not None:
            d["confidence_interval"] = list(d["confidence_interval"])
        return d


def _testing_nodes(inst: TreeInstance) -> list:
    return [inst.tree.root] + inst.prover_nodes


def exact_tree_acceptance(inst: TreeInstance, strategy, backend: str = "auto"):
    """Single-round acceptance by enumerating coins and child choices.

    Returns ``(accept, occurrence, conditionals, backend)`` where the last two
    are keyed by testing node.
    """
    movers = inst.register_nodes
    if len(movers) > MAX_EXACT_NODES:
        raise ValueError(f"exact tree analysis is capped at {MAX_EXACT_NODES} non-root nodes")
    regs = build_tree_registers(inst, strategy, backend)
    base = 0.5 ** len(movers)
    terms = []
    occ = {v: 0.0 for v in _testing_nodes(inst)}
    rej = {v: 0.0 for v in _testing_nodes(inst)}
    cache = {}
    for bits in itertools.product((0, 1), repeat=len(movers)):
        coins = dict(zip(movers, bits))
        for w, tests in scenarios(inst, coins):
            weight = base * w
            terms.append(weight * regs.joint_accept_probability(tests))
            for t in tests:
                key = (t.kind, t.registers)
                if key not in cache:
                    cache[key] = 1.0 - regs.accept_probability(t)
                occ[t.node] += weight
                rej[t.node] += weight * cache[key]
    cond = {v: (rej[v] / occ[v] if occ[v] > 0 else None) for v in occ}
    name = "global" if isinstance(regs, JointRegisters) else "product"
    return math.fsum(terms), occ, cond, name


def sampled_tree_acceptance(inst: TreeInstance, strategy, trials: int, seed: int,
                            backend: str = "auto"):
    if trials < 1:
        raise ValueError("trials must be at least 1")
    regs = build_tree_registers(inst, strategy, backend)
    movers = inst.register_nodes
    accepted = 0
    occ = {v: 0 for v in _testing_nodes(inst)}
    rej = {v: 0 for v in _testing_nodes(inst)}
    cache: dict = {}
    done = 0
    chunk = 0
    while done < trials:
        size = min(SAMPLE_CHUNK, trials - done)
        rng = _chunk_rng(seed, chunk)
        coin_block = rng.integers(0, 2, size=(size, len(movers)))
        u_choice = rng.random((size, len(movers) + 1))
        u_out = rng.random(size)
        for i in range(size):
            coins = dict(zip(movers, coin_block[i]))
            tests = _sample_scenario(inst, coins, u_choice[i])
            key = tuple((t.kind, t.registers) for t in tests)
            if key not in cache:
                cache[key] = np.cumsum(regs.outcome_distribution(tests))
            cdf = cache[key]
            pattern = min(int(np.searchsorted(cdf, u_out[i], side="right")), len(cdf) - 1)
            accepted += pattern == 0
            for j, t in enumerate(tests):
                occ[t.node] += 1
                rej[t.node] += pattern >> j & 1
        done += size
        chunk += 1
    cond = {v: (rej[v] / occ[v] if occ[v] else None) for v in occ}
    occf = {v: occ[v] / trials for v in occ}
    name = "global" if isinstance(regs, JointRegisters) else "product"
    return accepted / trials, occf, cond, name, wilson_interval(accepted, trials)


def _sample_scenario(inst: TreeInstance, coins, uniforms) -> list[LocalTest]:
    tree = inst.tree
    index = {v: i for i, v in enumerate(inst.register_nodes)}
    tests = []
    for slot, u in enumerate(_testing_nodes(inst)):
        received = [c for c in tree.children.get(u, ()) if coins[c] == 0]
        if not received or (u != tree.root and coins[u] == 0):
            continue
        c = received[min(int(uniforms[slot] * len(received)), len(received) - 1)]
        if u == tree.root:
            tests.append(LocalTest("povm", u, (index[c],), inst.protocol.receiver_povm(inst.root_input)))
        else:
            tests.append(LocalTest("swap", u, (index[u], index[c])))
    return tests


def run_tree_protocol(inst: TreeInstance, strategy, k: int = 1, labels=None, mode: str = "exact",
                      trials: int | None = None, seed: int | None = None,
                      backend: str = "auto") -> TreeReport:
    """Classical label check plus k parallel repetitions of the quantum test."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if labels is None:
        labels = label_tree(inst.net, inst.tree)
    labels_ok = all(verify_labels(inst.net, labels).values())
    ci = None
    if mode == "exact":
        single, occ, cond, bname = exact_tree_acceptance(inst, strategy, backend)
    elif mode == "sampled":
        if trials is None or seed is None:
            raise ValueError("sampled mode needs trials and seed")
        single, occ, cond, bname, ci = sampled_tree_acceptance(inst, strategy, trials, seed, backend)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    accept = single ** k if labels_ok else 0.0
    order = _testing_nodes(inst)
    return TreeReport(
        accept_probability=accept, single_round_accept=single, legal=inst.legal,
        labels_ok=labels_ok, repetition_count=k, radius=inst.tree.radius,
        height=inst.tree.height, terminals=len(inst.net.terminals),
        max_degree=inst.tree.max_degree, nodes=[str(v) for v in order],
        occurrence=[occ[v] for v in order], conditionals=[cond[v] for v in order],
        certificate_qubits=k * qubits_for(inst.protocol.message_dim),
        label_bits=label_bits(inst.net), mode=mode, backend=bname,
        trials=trials if mode == "sampled" else None, seed=seed if mode == "sampled" else None,
        confidence_interval=ci)


def tree_rejection_bound(t: int, r: int) -> float:
    """Single-round rejection guaranteed on 0-inputs: path bound at depth r+1, thinned by 1/t."""
    return 1.0 / (42 * t * (r + 1) ** 2)


def tree_repetitions(t: int, r: int) -> int:
    """k = 84 t (r+1)^2, so (1 - bound)^k <= e^-2."""
    return 84 * t * (r + 1) ** 2


def repetitions_below(single_accept: float, target: float = 1 / 3) -> int:
    """Smallest k with ``single_accept ** k < target``."""
    if single_accept >= 1:
        raise ValueError("single-round acceptance 1 cannot be amplified")
    if single_accept <= 0:
        return 1
    return max(1, math.floor(math.log(target) / math.log(single_accept)) + 1)
