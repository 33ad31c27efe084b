import itertools
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dqma.classical import (BUNDLED, AttackPreconditionError, ClassicalDMA, FoolingSet, View,
                            always_accept_protocol, completeness_error, eq1_errors, eq1_optimal_protocol,
                            eq_fooling_set, fooling_attack, is_fooling, locality_violations,
                            max_attackable_width, parity_hash_protocol, wide_cert_protocol)


class TestEq1:
    @pytest.mark.parametrize("p", [Fraction(1, 10), Fraction(1, 4), Fraction(1, 3), Fraction(1, 2)])
    def test_tradeoff(self, p):
        comp, sound = eq1_errors(eq1_optimal_protocol(p))
        assert comp == 1 - p
        assert sound == 1 - 2 * p

    @pytest.mark.parametrize("r", [1, 2, 5])
    def test_inner_nodes_do_not_matter(self, r):
        assert eq1_errors(eq1_optimal_protocol(Fraction(1, 4), r)) == (Fraction(3, 4), Fraction(1, 2))

    def test_float_probability(self):
        assert eq1_errors(eq1_optimal_protocol(0.25)) == (Fraction(3, 4), Fraction(1, 2))

    @pytest.mark.parametrize("p,r", [(0, 1), (Fraction(3, 4), 1), (Fraction(1, 4), 0)])
    def test_invalid(self, p, r):
        with pytest.raises(ValueError):
            eq1_optimal_protocol(p, r)


class TestFoolingSet:
    def test_eq_n1(self):
        S = eq_fooling_set(1)
        assert S.pairs == (("0", "0"), ("1", "1")) and is_fooling(S)

    def test_eq_n3(self):
        S = eq_fooling_set(3)
        assert len(S) == 8 and is_fooling(S)

    def test_not_fooling(self):
        assert not is_fooling(FoolingSet((("0", "1"),)))
        assert not is_fooling(FoolingSet((("00", "00"), ("01", "01"))), lambda x, y: x[0] == y[0])

    @given(st.integers(1, 6))
    def test_size(self, n):
        assert len(eq_fooling_set(n)) == 2 ** n

    def test_invalid(self):
        with pytest.raises(ValueError):
            eq_fooling_set(0)


class TestAttack:
    def test_parity_hash(self):
        p = parity_hash_protocol()
        rep = fooling_attack(p, eq_fooling_set(5))
        assert rep.pairs == (("00001", "00001"), ("00010", "00010"))
        assert rep.zero_input == ("00001", "00010")
        assert rep.exact
        assert rep.completeness_error == pytest.approx(0.25)
        assert rep.accept_probability == pytest.approx(0.75)
        assert rep.bound_met and rep.guaranteed_bound == pytest.approx(0.5)
        assert rep.accept_probability >= rep.local_bound - 1e-12
        assert rep.to_dict()["boundMet"] is True

    def test_parity_hash_completeness(self):
        p = parity_hash_protocol()
        assert completeness_error(p, eq_fooling_set(5)) == Fraction(1, 4)

    def test_always_accept(self):
        rep = fooling_attack(always_accept_protocol(), eq_fooling_set(5))
        assert rep.accept_probability == 1.0 and rep.bound_met

    def test_wide_cert_precondition(self):
        with pytest.raises(AttackPreconditionError, match="too large"):
            fooling_attack(wide_cert_protocol(), eq_fooling_set(5))

    def test_path_too_short(self):
        with pytest.raises(AttackPreconditionError):
            fooling_attack(parity_hash_protocol(r=2), eq_fooling_set(5))

    def test_not_fooling(self):
        S = FoolingSet(tuple((x, x) for x in ("000", "001", "010", "011", "100")))
        S_bad = FoolingSet(S.pairs + (("000", "111"),))
        with pytest.raises(AttackPreconditionError):
            fooling_attack(parity_hash_protocol(n=3), S_bad)

    def test_sampled(self):
        p = parity_hash_protocol()
        sampler_version = ClassicalDMA(
            name="parity-hash-sampled", r=p.r, rounds=p.rounds, cert_bits=p.cert_bits,
            certificate=p.certificate, message=p.message, decide=p.decide,
            sampler=lambda rng: int(rng.choice([-1, 0, 1], p=[0.5, 0.25, 0.25])))
        rep = fooling_attack(sampler_version, eq_fooling_set(5), trials=4000, seed=1)
        assert not rep.exact and rep.seed == 1
        assert rep.accept_probability == pytest.approx(0.75, abs=0.04)

    @pytest.mark.parametrize("name", sorted(BUNDLED))
    def test_bundled_are_local(self, name):
        p = BUNDLED[name]()
        for x, y in [("00000", "00000"), ("01101", "10011")]:
            assert locality_violations(p, x, y, p.certificate(x, x)) == []

    def test_locality_detects_long_range_dependence(self):
        # node 3 reads node 0's certificate through a closure, three hops away
        state = {}

        def decide(i, view, s):
            if i == 0:
                state["c0"] = view.cert
            return i != 3 or state.get("c0") == "0"

        peek = ClassicalDMA(
            name="peek", r=3, rounds=0, cert_bits=1,
            certificate=lambda x, y: ("0",) * 4, message=lambda *a: None,
            decide=decide, randomness=((None, Fraction(1)),))
        assert (3, "cert", 0) in locality_violations(peek, "0", "0", ("0",) * 4)


class TestModel:
    def test_assignment_validation(self):
        p = parity_hash_protocol()
        with pytest.raises(ValueError):
            p.accept_probability("00000", "00000", ("0",) * 3)
        with pytest.raises(ValueError):
            p.accept_probability("00000", "00000", ("2",) * 4)

    def test_constructor_validation(self):
        kw = dict(name="x", r=1, rounds=0, cert_bits=0, certificate=lambda x, y: ("", ""),
                  message=lambda *a: None, decide=lambda *a: True)
        with pytest.raises(ValueError):
            ClassicalDMA(**kw)
        with pytest.raises(ValueError):
            ClassicalDMA(**kw, randomness=((0, Fraction(1, 2)),))
        with pytest.raises(ValueError):
            ClassicalDMA(**{**kw, "r": 0}, randomness=((0, Fraction(1)),))
        sampled = ClassicalDMA(**kw, sampler=lambda rng: 0)
        with pytest.raises(ValueError):
            sampled.accept_probability("0", "0", ("", ""))
        with pytest.raises(ValueError):
            sampled.event_probability("0", "0", ("", ""), [0])

    def test_messages_are_delivered(self):
        seen = {}

        def decide(i, view, s):
            seen[i] = view.inbox
            return True

        p = ClassicalDMA(name="echo", r=2, rounds=1, cert_bits=1,
                         certificate=lambda x, y: ("0", "1", "0"),
                         message=lambda i, rnd, view, s: f"{view.node}:{view.cert}",
                         decide=decide, randomness=((None, Fraction(1)),))
        p.outputs("0", "0", ("0", "1", "0"), None)
        assert seen[0] == ((None, "1:1"),)
        assert seen[1] == (("0:0", "2:0"),)
        assert seen[2] == (("1:1", None),)

    def test_view_fields(self):
        v = View(0, "1", "01")
        assert v.inbox == ()

    @pytest.mark.parametrize("n,rounds,width", [(5, 1, 2), (9, 2, 2), (4, 1, 1)])
    def test_attackable_width(self, n, rounds, width):
        assert max_attackable_width(n, rounds) == width
        assert 2 ** n >= 2 ** (2 * rounds * width) + 1

    def test_enumeration_exact(self):
        p = parity_hash_protocol(n=2, r=3)
        for x, y in itertools.product(["00", "01", "10", "11"], repeat=2):
            acc = p.accept_probability(x, y, p.certificate(x, x))
            assert isinstance(acc, Fraction)
