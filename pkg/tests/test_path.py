import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dqma.engine import LocalTest
from dqma.linalg import DimensionCapError, PureState, random_pure_state, set_dimension_cap
from dqma.path import (GlobalState, Honest, OutOfScopeError, PathInstance, ProductStates, RotationAttack,
                       active_tests, event_sandwich_check, build_registers, certificate_sizes, exact_acceptance,
                       random_global_strategy, random_product_strategy, register_locations, repeat_protocol,
                       rotation_states, sampled_acceptance, soundness_bound, soundness_repetitions,
                       wilson_interval)
from dqma.protocols import noisy_protocol

PATH_R4_ROTATION_REJECTION = 0.06678326766759124


def held_registers(coins):
    """Registers at each node after forwarding, derived directly from the coin rule."""
    r = len(coins)
    held = {v: set() for v in range(r + 1)}
    for j, b in enumerate(coins):
        held[j + 1 if b == 0 else j].add(j)
    return held


def oracle_tests(coins):
    r = len(coins)
    held = held_registers(coins)
    out = set()
    for v in range(1, r):
        if held[v] == {v - 1, v}:
            out.add(("swap", v))
    if r - 1 in held[r]:
        out.add(("povm", r))
    return out


def dense_acceptance(inst, states):
    rho = np.ones((1, 1), dtype=complex)
    for s in states:
        rho = np.kron(rho, s.density().matrix if isinstance(s, PureState) else s.matrix)
    return dense_joint_acceptance(inst, rho)


def dense_joint_acceptance(inst, rho):
    """Full density-matrix simulation: coin average of tr(rho * product of accept operators)."""
    d = inst.local_dim
    r = inst.r
    eye = np.eye(d)
    swap = np.zeros((d * d, d * d))
    for a, b in itertools.product(range(d), repeat=2):
        swap[b * d + a, a * d + b] = 1
    swap_accept = (np.eye(d * d) + swap) / 2
    povm = inst.protocol.receiver_povm(inst.y).accept
    total = 0.0
    for coins in itertools.product((0, 1), repeat=r):
        tests = oracle_tests(coins)
        op = np.ones((1, 1))
        j = 0
        while j < r:
            if ("swap", j + 1) in tests:
                op, j = np.kron(op, swap_accept), j + 2
            elif j == r - 1 and ("povm", r) in tests:
                op, j = np.kron(op, povm), j + 1
            else:
                op, j = np.kron(op, eye), j + 1
        total += np.trace(rho @ op).real
    return total / 2 ** r


def toy_instance(toy, r, x="0", y="1"):
    return PathInstance(r, toy, x, y)


class TestCoins:
    @pytest.mark.parametrize("coins,expected", [
        ((0,), {("povm", 1)}),
        ((1,), set()),
        ((0, 1), {("swap", 1)}),
        ((0, 0), {("povm", 2)}),
        ((0, 1, 0), {("swap", 1), ("povm", 3)}),
        ((1, 0, 1), {("swap", 2)}),
        ((0, 1, 0, 1), {("swap", 1), ("swap", 3)}),
    ])
    def test_examples(self, coins, expected):
        assert {(t.kind, t.node) for t in active_tests(coins)} == expected

    @pytest.mark.parametrize("r", range(1, 9))
    def test_matches_forwarding_rule(self, r):
        for coins in itertools.product((0, 1), repeat=r):
            assert {(t.kind, t.node) for t in active_tests(coins)} == oracle_tests(coins)
            loc = register_locations(coins)
            held = held_registers(coins)
            assert all(j in held[loc[j]] for j in range(r))

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=14))
    def test_tests_never_share_registers(self, coins):
        regs = [reg for t in active_tests(coins) for reg in t.registers]
        assert len(regs) == len(set(regs))

    def test_invalid(self):
        with pytest.raises(ValueError):
            active_tests(())
        with pytest.raises(ValueError):
            active_tests((0, 2))

    def test_overlapping_tests_rejected(self):
        from dqma.engine import check_disjoint
        with pytest.raises(ValueError):
            check_disjoint([LocalTest("swap", 1, (0, 1)), LocalTest("swap", 2, (1, 2))])

    @pytest.mark.parametrize("r", range(1, 9))
    def test_occurrence(self, r, toy):
        rep = exact_acceptance(PathInstance(r, toy, "0", "0"), Honest())
        assert rep.occurrence[:-1] == [0.25] * (r - 1)
        assert rep.occurrence[-1] == 0.5


class TestExact:
    @pytest.mark.parametrize("r", range(1, 9))
    def test_honest_completeness(self, r, pi4):
        assert exact_acceptance(PathInstance(r, pi4, "0110", "0110"), Honest()).accept_probability == pytest.approx(1, abs=1e-12)

    @pytest.mark.parametrize("flip", [0.05, 0.2])
    def test_two_sided_completeness(self, flip, toy):
        pi = noisy_protocol(toy, flip)
        for r in range(1, 6):
            acc = exact_acceptance(PathInstance(r, pi, "1", "1"), Honest()).accept_probability
            assert acc >= 1 - flip / 2 - 1e-12
            assert acc == pytest.approx(1 - flip / 2)

    @pytest.mark.parametrize("r", range(2, 9))
    def test_rotation_swap_rejection(self, r, toy):
        rep = exact_acceptance(toy_instance(toy, r), RotationAttack())
        want = math.sin(math.pi / (2 * r)) ** 2 / 2
        for a in rep.conditionals[:-1]:
            assert a == pytest.approx(want, abs=1e-12)
        assert rep.conditionals[-1] == pytest.approx(math.sin(math.pi / (2 * r)) ** 2, abs=1e-12)

    def test_frozen_r4_rotation(self, pi4):
        rep = exact_acceptance(PathInstance(4, pi4, "0000", "1111"), RotationAttack())
        assert rep.rejection_probability == pytest.approx(PATH_R4_ROTATION_REJECTION, abs=1e-12)

    @pytest.mark.parametrize("r", range(1, 5))
    def test_against_dense_simulation(self, r, toy, rng):
        inst = toy_instance(toy, r)
        for _ in range(5):
            strat = random_product_strategy(inst, rng)
            want = dense_acceptance(inst, [toy.message_state("0")] + list(strat.states))
            assert exact_acceptance(inst, strat).accept_probability == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("r", range(2, 5))
    def test_global_against_dense_simulation(self, r, toy, rng):
        inst = toy_instance(toy, r)
        for _ in range(4):
            strat = random_global_strategy(inst, rng)
            dens = strat.state.density() if isinstance(strat.state, PureState) else strat.state
            rho0 = toy.message_state("0").density().matrix
            want = dense_joint_acceptance(inst, np.kron(rho0, dens.matrix))
            assert exact_acceptance(inst, strat).accept_probability == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("r", range(2, 6))
    def test_backends_agree(self, r, toy):
        inst = PathInstance(r, noisy_protocol(toy, 0.1), "0", "1")
        for strat in (Honest(), RotationAttack()):
            a = exact_acceptance(inst, strat, backend="product")
            b = exact_acceptance(inst, strat, backend="global")
            assert a.accept_probability == pytest.approx(b.accept_probability, abs=1e-12)
            assert np.allclose(a.conditionals, b.conditionals, atol=1e-12)

    def test_backend_validation(self, toy, rng):
        inst = toy_instance(toy, 3)
        with pytest.raises(ValueError):
            build_registers(inst, Honest(), "sparse")
        with pytest.raises(ValueError):
            build_registers(inst, random_global_strategy(inst, rng), "product")
        with pytest.raises(ValueError):
            build_registers(inst, GlobalState(random_pure_state(2, rng)))
        with pytest.raises(ValueError):
            build_registers(inst, ProductStates([toy.message_state("0")]))

    def test_global_backend_respects_cap(self, pi4):
        inst = PathInstance(3, pi4, "0000", "1111")
        with pytest.raises(DimensionCapError):
            build_registers(inst, Honest(), "global")

    def test_dimension_cap_configurable(self, toy):
        inst = toy_instance(toy, 5)
        old = set_dimension_cap(8)
        try:
            with pytest.raises(DimensionCapError):
                build_registers(inst, Honest(), "global")
        finally:
            set_dimension_cap(old)
        build_registers(inst, Honest(), "global")

    @pytest.mark.parametrize("r", range(2, 7))
    def test_rejection_dominates_weighted_sum(self, r, toy, rng):
        inst = toy_instance(toy, r)
        for _ in range(10):
            rep = exact_acceptance(inst, random_product_strategy(inst, rng))
            assert rep.rejection_probability >= rep.soundness_sum / (2 * r) - 1e-12

    def test_bounds(self):
        assert soundness_bound(3) == pytest.approx(1 / 378)
        assert soundness_repetitions(3) == 756
        for r in range(1, 20):
            k = soundness_repetitions(r)
            assert (1 - soundness_bound(r)) ** k < 1 / 3

    def test_certificate_sizes(self, pi4):
        inst = PathInstance(3, pi4, "0000", "1111")
        assert certificate_sizes(inst, 1) == (8, 8)
        assert certificate_sizes(inst, 8) == (64, 8 * 11)

    def test_report_dict(self, toy):
        d = exact_acceptance(toy_instance(toy, 3), RotationAttack()).to_dict()
        assert d["soundness_sum_lower_bound_met"] is True
        assert d["rejection_probability"] == pytest.approx(1 - d["accept_probability"])


class TestSampled:
    @pytest.mark.parametrize("r", [2, 3, 4])
    def test_within_interval(self, r, pi4):
        inst = PathInstance(r, pi4, "0000", "1111")
        exact = exact_acceptance(inst, RotationAttack()).accept_probability
        rep = sampled_acceptance(inst, RotationAttack(), trials=100_000, seed=7)
        lo, hi = rep.confidence_interval
        assert lo <= exact <= hi
        assert rep.occurrence[-1] == pytest.approx(0.5, abs=0.01)

    def test_global_within_interval(self, toy, rng):
        inst = toy_instance(toy, 3)
        strat = random_global_strategy(inst, rng)
        exact = exact_acceptance(inst, strat).accept_probability
        lo, hi = sampled_acceptance(inst, strat, trials=50_000, seed=3).confidence_interval
        assert lo <= exact <= hi

    def test_deterministic_across_workers(self, toy):
        inst = toy_instance(toy, 5)
        a = sampled_acceptance(inst, RotationAttack(), trials=30_000, seed=11, workers=1)
        b = sampled_acceptance(inst, RotationAttack(), trials=30_000, seed=11, workers=3)
        assert a.to_dict() == b.to_dict()

    def test_validation(self, toy):
        inst = toy_instance(toy, 2)
        with pytest.raises(ValueError):
            sampled_acceptance(inst, Honest(), trials=0, seed=1)
        with pytest.raises(ValueError):
            sampled_acceptance(inst, Honest(), trials=10, seed=None)

    def test_wilson(self):
        lo, hi = wilson_interval(50, 100)
        assert lo < 0.5 < hi
        assert wilson_interval(0, 10)[0] == 0.0 and wilson_interval(10, 10)[1] == 1.0


class TestRepetition:
    @pytest.mark.parametrize("k", [1, 2, 5])
    def test_power(self, k, toy):
        inst = toy_instance(toy, 3)
        single = exact_acceptance(inst, RotationAttack()).accept_probability
        rep = repeat_protocol(inst, RotationAttack(), k)
        assert rep.accept_probability == pytest.approx(single ** k, rel=1e-12)
        assert rep.repetition_count == k

    def test_per_round_strategies(self, toy):
        inst = toy_instance(toy, 3)
        a = exact_acceptance(inst, RotationAttack()).accept_probability
        b = exact_acceptance(inst, Honest()).accept_probability
        rep = repeat_protocol(inst, [RotationAttack(), Honest()], 2)
        assert rep.accept_probability == pytest.approx(a * b)
        assert rep.strategy == "mixed"

    def test_entangled_across_repetitions(self, toy, rng):
        inst = toy_instance(toy, 3)
        g = GlobalState(random_pure_state(4, rng), spans_repetitions=True)
        with pytest.raises(OutOfScopeError):
            repeat_protocol(inst, g, 2)
        ok = GlobalState(g.state)
        assert 0 <= repeat_protocol(inst, ok, 2).accept_probability <= 1

    def test_validation(self, toy):
        inst = toy_instance(toy, 3)
        with pytest.raises(ValueError):
            repeat_protocol(inst, Honest(), 0)
        with pytest.raises(ValueError):
            repeat_protocol(inst, [Honest()], 2)


class TestEventInequality:
    def test_two_events(self):
        table = {(0, 0): Fraction(1, 4), (0, 1): Fraction(1, 4), (1, 0): Fraction(1, 8), (1, 1): Fraction(3, 8)}
        assert event_sandwich_check(table)

    def test_array_input(self):
        p = np.full((2, 2, 2), 1 / 8)
        assert event_sandwich_check(p)

    @given(st.integers(1, 4).flatmap(
        lambda n: st.lists(st.integers(0, 50), min_size=2 ** n, max_size=2 ** n)
        .filter(lambda w: sum(w) > 0).map(lambda w: (n, w))))
    def test_random_tables(self, nw):
        n, w = nw
        total = sum(w)
        table = {o: Fraction(c, total) for o, c in zip(itertools.product((0, 1), repeat=n), w)}
        assert event_sandwich_check(table)


class TestRotationStates:
    def test_endpoints(self, toy):
        inst = toy_instance(toy, 4)
        gs = rotation_states(inst)
        assert len(gs) == 3
        assert abs(gs[0].amplitudes[0]) == pytest.approx(math.cos(math.pi / 8))

    def test_needs_distinct_messages(self, toy):
        with pytest.raises(ValueError):
            rotation_states(PathInstance(3, toy, "0", "0"))

    def test_instance_validation(self, pi4):
        with pytest.raises(ValueError):
            PathInstance(0, pi4, "0000", "0000")
        with pytest.raises(ValueError):
            PathInstance(2, pi4, "000", "0000")
