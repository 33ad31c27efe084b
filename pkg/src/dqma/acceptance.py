"""The twelve acceptance checks, runnable from tests and from ``dqma verify-all``."""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .classical import (eq1_errors, eq1_optimal_protocol, eq_fooling_set, fooling_attack,
                        parity_hash_protocol)
from .fingerprint import make_family
from .linalg import (PureState, RegisterLayout, DensityMatrix, partial_trace, random_density_matrix,
                     random_pure_state, swap_test_accept_probability, symmetric_projector, tensor,
                     trace_distance)
from .path import (Honest, PathInstance, RotationAttack, event_sandwich_check, certificate_sizes,
                   exact_acceptance, random_global_strategy, random_product_strategy,
                   soundness_repetitions)
from .protocols import eq_protocol, toy_eq_protocol
from .tree import (Network, build_cert_tree, label_tree, single_field_corruptions,
                   verify_labels)
from .tree_protocol import (PathRotation, TreeInstance, run_tree_protocol, tree_rejection_bound,
                            tree_repetitions)

# frozen regression constants
CERT_SCALING_CONSTANT = 224.0            # fitted C in  qubits ~ C r^2 log2 n
TREE_T3_R2_REJECTION = 0.101870771144703  # single-round rejection, path-rotation, see tree_t3_r2_instance
PATH_R4_ROTATION_REJECTION = 0.06678326766759124  # n = 4, x = 0000, y = 1111


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:2d} {self.name}: {self.detail} ({self.seconds:.2f}s / {self.budget:g}s)"


CRITERIA: dict[int, tuple[str, float, Callable[[], tuple[bool, str]]]] = {}


def criterion(number: int, name: str, budget: float):
    def register(fn):
        CRITERIA[number] = (name, budget, fn)
        return fn
    return register


def run_criterion(number: int) -> CriterionResult:
    name, budget, fn = CRITERIA[number]
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    if elapsed > budget:
        ok, detail = False, detail + f"; exceeded runtime budget {budget:g}s"
    return CriterionResult(number, name, bool(ok), detail, elapsed, budget)


def run_all(numbers=None) -> list[CriterionResult]:
    return [run_criterion(k) for k in sorted(numbers or CRITERIA)]


# -- shared fixtures ---------------------------------------------------------

def tree_t3_r2_instance() -> Network:
    """Path 0-1-2-3-4 with terminals 0, 2, 4; leaf 4 differs."""
    return Network(range(5), ((0, 1), (1, 2), (2, 3), (3, 4)), (0, 2, 4),
                   {0: "0000", 2: "0000", 4: "1111"})


def random_connected_graph(rng: np.random.Generator, n_nodes: int, extra_edges: int) -> list:
    """Random spanning tree plus extra edges."""
    order = rng.permutation(n_nodes)
    edges = set()
    for i in range(1, n_nodes):
        u, v = int(order[i]), int(order[rng.integers(i)])
        edges.add((min(u, v), max(u, v)))
    for _ in range(extra_edges):
        u, v = (int(z) for z in rng.choice(n_nodes, 2, replace=False))
        edges.add((min(u, v), max(u, v)))
    return sorted(edges)


def random_network(rng: np.random.Generator, max_nodes: int, max_terminals: int) -> Network:
    n_nodes = int(rng.integers(2, max_nodes + 1))
    edges = random_connected_graph(rng, n_nodes, int(rng.integers(0, n_nodes)))
    t = int(rng.integers(2, min(max_terminals, n_nodes) + 1))
    terminals = tuple(sorted(int(v) for v in rng.choice(n_nodes, t, replace=False)))
    return Network(tuple(range(n_nodes)), tuple(edges), terminals)


def floyd_warshall_radius(net: Network) -> int:
    """min over terminals of max terminal distance, by all-pairs shortest paths."""
    n = len(net.nodes)
    idx = {v: i for i, v in enumerate(net.nodes)}
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0)
    for u, v in net.edges:
        dist[idx[u], idx[v]] = dist[idx[v], idx[u]] = 1
    for k in range(n):
        dist = np.minimum(dist, dist[:, [k]] + dist[[k], :])
    ts = [idx[t] for t in net.terminals]
    return int(min(max(dist[a, b] for b in ts) for a in ts))


def _soundness_strategies(seed: int = 2024):
    """(instance, strategy) pairs on 0-inputs used by the soundness checks."""
    rng = np.random.default_rng(seed)
    pi = eq_protocol(make_family(4))
    toy = toy_eq_protocol()
    out = []
    for r in range(2, 7):
        inst = PathInstance(r, pi, "0000", "1111")
        out.append((inst, RotationAttack()))
        out.extend((inst, random_product_strategy(inst, rng)) for _ in range(200))
    glob = [PathInstance(2, pi, "0000", "1111")] + [PathInstance(r, toy, "0", "1") for r in (2, 3, 4)]
    for inst in glob:
        out.extend((inst, random_global_strategy(inst, rng)) for _ in range(50))
    return out


# -- criteria ----------------------------------------------------------------

@criterion(1, "SWAP acceptance formula", 5)
def _c1():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(500):
        d = int(rng.integers(2, 7))
        a, b = random_pure_state(d, rng), random_pure_state(d, rng)
        rho = DensityMatrix(np.outer(tensor(a, b).amplitudes, tensor(a, b).amplitudes.conj()))
        got = swap_test_accept_probability(rho)
        want = 0.5 + 0.5 * abs(a.inner(b)) ** 2
        worst = max(worst, abs(got - want))
    return worst <= 1e-9, f"max deviation {worst:.3e} over 500 pairs"


@criterion(2, "two-register distance bound from SWAP acceptance", 30)
def _c2():
    rng = np.random.default_rng(2)
    worst_slack = math.inf
    for _ in range(500):
        d = int(rng.integers(2, 5))
        rho = random_density_matrix(d * d, rng, rank=int(rng.integers(1, d * d + 1)))
        layout = RegisterLayout.of(d, d)
        acc = swap_test_accept_probability(rho, layout)
        inv_z = 1.0 - acc
        bound = 2 * math.sqrt(inv_z) + inv_z
        dist = trace_distance(partial_trace(rho, layout, [0]), partial_trace(rho, layout, [1]))
        worst_slack = min(worst_slack, bound - dist)
    exact_worst = 0.0
    for _ in range(50):
        d = int(rng.integers(2, 5))
        proj = symmetric_projector(d)
        v = proj @ random_pure_state(d * d, rng).amplitudes
        sym = PureState(v / np.linalg.norm(v))
        layout = RegisterLayout.of(d, d)
        rho = sym.density()
        dist = trace_distance(partial_trace(rho, layout, [0]), partial_trace(rho, layout, [1]))
        exact_worst = max(exact_worst, dist)
    ok = worst_slack >= -1e-9 and exact_worst <= 1e-7
    return ok, f"min slack {worst_slack:.3e}; symmetric-state distance {exact_worst:.1e}"


@criterion(3, "perfect completeness of the path protocol", 60)
def _c3():
    worst = 0.0
    for n in (2, 4, 6):
        pi = eq_protocol(make_family(n))
        x = ("01" * n)[:n]
        for r in range(1, 9):
            worst = max(worst, abs(1 - exact_acceptance(PathInstance(r, pi, x, x), Honest()).accept_probability))
    return worst <= 1e-12, f"max |1 - accept| = {worst:.1e} over r=1..8, n in {{2,4,6}}"


@criterion(4, "soundness constants on adversarial and random strategies", 300)
def _c4():
    failures = 0
    ratio_sum = ratio_rej = math.inf
    count = 0
    for inst, strat in _soundness_strategies():
        rep = exact_acceptance(inst, strat)
        r = inst.r
        s_ratio = rep.soundness_sum * 21 * r
        rej_ratio = rep.rejection_probability * 42 * r * r
        ratio_sum = min(ratio_sum, s_ratio)
        ratio_rej = min(ratio_rej, rej_ratio)
        failures += s_ratio < 1 - 1e-9 or rej_ratio < 1 - 1e-9
        count += 1
    rot = exact_acceptance(PathInstance(4, eq_protocol(make_family(4)), "0000", "1111"), RotationAttack())
    frozen = abs(rot.rejection_probability - PATH_R4_ROTATION_REJECTION) <= 1e-9
    return failures == 0 and frozen, (
        f"{count} strategies, {failures} counterexamples; min sum/(1/21r) = {ratio_sum:.2f}, "
        f"min rejection/(1/42r^2) = {ratio_rej:.2f}; r=4 rotation rejection {rot.rejection_probability:.12g}")


@criterion(5, "repetition drives soundness error below e^-2", 60)
def _c5():
    worst = 0.0
    for inst, strat in _soundness_strategies():
        k = soundness_repetitions(inst.r)
        worst = max(worst, exact_acceptance(inst, strat).accept_probability ** k)
    pi = eq_protocol(make_family(4))
    honest = min(exact_acceptance(PathInstance(r, pi, "0110", "0110"), Honest()).accept_probability
                 ** soundness_repetitions(r) for r in range(2, 7))
    ok = worst <= math.exp(-2) and honest == 1.0
    return ok, f"max repeated acceptance {worst:.3e} (e^-2 = {math.exp(-2):.4f}); honest {honest}"


@criterion(6, "certificate size scales as C r^2 log n", 10)
def _c6():
    rows = []
    for n in (4, 16, 64, 256):
        pi = eq_protocol(make_family(n))
        for r in range(2, 7):
            inst = PathInstance(r, pi, "0" * n, "0" * n)
            cert, _ = certificate_sizes(inst, soundness_repetitions(r))
            rows.append((r * r * math.log2(n), cert, n, r))
    xs = np.array([a for a, *_ in rows])
    ys = np.array([b for _, b, *_ in rows], dtype=float)
    c = float(xs @ ys / (xs @ xs))
    resid = ys - c * xs
    r2 = 1 - float(resid @ resid) / float(((ys - ys.mean()) @ (ys - ys.mean())))
    by_n = {}
    for _, cert, n, r in rows:
        by_n.setdefault(r, []).append(cert)
    monotone = all(all(a < b for a, b in zip(v, v[1:])) for v in by_n.values())
    # per-register qubits grow like log n: q / log2 n stays within a constant band
    ratios = [cert / (84 * r * r) / math.log2(n) for _, cert, n, r in rows]
    ok = abs(c - CERT_SCALING_CONSTANT) <= 1e-9 and r2 >= 0.95 and monotone and max(ratios) / min(ratios) <= 2
    return ok, f"C = {c:.6g} (frozen {CERT_SCALING_CONSTANT:g}), R^2 = {r2:.4f}, monotone in n: {monotone}"


@criterion(7, "certification tree shape on random graphs", 30)
def _c7():
    rng = np.random.default_rng(7)
    bad = []
    for i in range(50):
        net = random_network(rng, 30, 5)
        tree = build_cert_tree(net)
        r = floyd_warshall_radius(net)
        t = len(net.terminals)
        leaves = {v for v in tree.nodes if tree.is_leaf(v)}
        ok = (tree.radius == r and tree.height <= r + 1 and tree.max_degree <= t
              and leaves == set(net.terminals) - {tree.root} and tree.degree(tree.root) == 1)
        if not ok:
            bad.append(i)
    return not bad, f"50 graphs, violations at {bad}" if bad else "50 graphs, all within depth r+1 and degree t"


def small_networks(seed: int = 8, count: int = 40) -> list[Network]:
    rng = np.random.default_rng(seed)
    nets = [Network(range(k), tuple((i, i + 1) for i in range(k - 1)), (0, k - 1)) for k in (2, 3, 5, 10)]
    nets.append(Network(range(6), tuple((0, i) for i in range(1, 6)), (1, 3, 5)))
    nets.append(Network(range(6), tuple((i, (i + 1) % 6) for i in range(6)), (0, 2, 4)))
    nets += [random_network(rng, 10, 4) for _ in range(count)]
    return nets


@criterion(8, "labeling scheme completeness and single-field soundness", 120)
def _c8():
    honest_fail = undetected = total = 0
    for net in small_networks():
        labels = label_tree(net, build_cert_tree(net))
        honest_fail += not all(verify_labels(net, labels).values())
        for _, _, changed in single_field_corruptions(labels, net):
            total += 1
            undetected += all(verify_labels(net, changed).values())
    ok = honest_fail == 0 and undetected == 0
    return ok, f"{len(small_networks())} instances, {total} corruptions, {undetected} undetected, {honest_fail} honest rejections"


@criterion(9, "tree protocol completeness, soundness and repetition", 120)
def _c9():
    net = tree_t3_r2_instance()
    inst = TreeInstance.from_network(net)
    eq_net = Network(net.nodes, net.edges, net.terminals, {v: "0000" for v in net.terminals})
    complete = run_tree_protocol(TreeInstance.from_network(eq_net), Honest()).accept_probability
    exact = run_tree_protocol(inst, PathRotation())
    sampled = run_tree_protocol(inst, PathRotation(), mode="sampled", trials=100_000, seed=9)
    lo, hi = sampled.confidence_interval
    inside = lo <= exact.single_round_accept <= hi
    t, r = len(net.terminals), inst.tree.radius
    worst_single = max(run_tree_protocol(inst, s).single_round_accept for s in (Honest(), PathRotation()))
    k = tree_repetitions(t, r)
    repeated = worst_single ** k
    frozen = abs(exact.rejection_probability - TREE_T3_R2_REJECTION) <= 1e-9
    bound = exact.rejection_probability >= tree_rejection_bound(t, r)
    ok = complete == 1.0 and inside and repeated < 1 / 3 and frozen and bound
    return ok, (f"completeness {complete}; rejection {exact.rejection_probability:.12g} "
                 f"(sampled CI [{1 - hi:.4f}, {1 - lo:.4f}]); k = {k} gives {repeated:.2e}")


@criterion(10, "classical one-bit protocol trade-off", 1)
def _c10():
    bad = []
    for p in (Fraction(1, 10), Fraction(1, 4), Fraction(1, 2)):
        comp, sound = eq1_errors(eq1_optimal_protocol(p, r=3))
        if comp != 1 - p or sound != 1 - 2 * p:
            bad.append(str(p))
    return not bad, "exact for p in {1/10, 1/4, 1/2}" if not bad else f"mismatch at p = {bad}"


@criterion(11, "fooling attack on the bundled classical protocol", 60)
def _c11():
    rep = fooling_attack(parity_hash_protocol(5, 3), eq_fooling_set(5))
    ok = rep.exact and rep.bound_met
    return ok, (f"0-input {rep.zero_input} with w'' = {''.join(rep.certificates)} accepted w.p. "
                f"{rep.accept_probability:g} >= 1 - 2p = {rep.guaranteed_bound:g}")


@criterion(12, "union/intersection sandwich on joint distributions", 5)
def _c12():
    rng = np.random.default_rng(12)
    bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        weights = [int(w) for w in rng.integers(0, 20, size=2 ** n)]
        if sum(weights) == 0:
            weights[0] = 1
        total = sum(weights)
        table = {o: Fraction(w, total) for o, w in zip(itertools.product((0, 1), repeat=n), weights)}
        bad += not event_sandwich_check(table)
    return bad == 0, f"1000 exact distributions, {bad} violations"
