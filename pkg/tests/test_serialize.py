import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from dqma.linalg import DensityMatrix, PureState, random_density_matrix, random_pure_state
from dqma.path import GlobalState, Honest, ProductStates, RotationAttack
from dqma.serialize import (SCHEMA_VERSION, ConfigError, dumps_report, field, loads, loads_report,
                            network_from_json, network_to_json, normalize, state_from_json, state_to_json,
                            strategy_from_json, strategy_to_json)
from dqma.tree import Network
from dqma.tree_protocol import PathRotation


class TestStates:
    def test_pure_round_trip(self, rng):
        s = random_pure_state(5, rng)
        back = state_from_json(json.loads(json.dumps(state_to_json(s))))
        assert_allclose(back.amplitudes, s.amplitudes, atol=1e-15)

    def test_density_round_trip(self, rng):
        s = random_density_matrix(3, rng, rank=2)
        back = state_from_json(json.loads(json.dumps(state_to_json(s))))
        assert_allclose(back.matrix, s.matrix, atol=1e-15)

    def test_real_amplitudes_and_basis(self):
        assert_allclose(state_from_json({"kind": "pure", "amplitudes": [0.6, 0.8]}).amplitudes, [0.6, 0.8])
        assert_allclose(state_from_json({"kind": "basis", "dim": 3, "index": 2}).amplitudes, [0, 0, 1])
        fp = state_from_json({"kind": "fingerprint", "input": "0101"})
        assert fp.dim == 169

    @pytest.mark.parametrize("doc,msg", [
        ({"kind": "pure", "amplitudes": [1, 1]}, "state"),
        ({"kind": "pure", "amplitudes": [["a", 1]]}, "amplitudes"),
        ({"kind": "pure"}, "missing field 'amplitudes'"),
        ({"kind": "density", "matrix": [[1, 0], [0, 1]]}, "state"),
        ({"kind": "blob"}, "field 'kind'"),
        ({"kind": "basis", "dim": "3", "index": 0}, "field 'dim' must be an integer"),
        ("pure", "expected an object"),
    ])
    def test_errors(self, doc, msg):
        with pytest.raises(ConfigError, match=msg):
            state_from_json(doc)

    def test_unsupported_type(self):
        with pytest.raises(TypeError):
            state_to_json(np.zeros(2))


class TestStrategies:
    @pytest.mark.parametrize("strategy", [Honest(), RotationAttack(), PathRotation(), PathRotation(4)])
    def test_simple_round_trip(self, strategy):
        assert strategy_from_json(json.loads(json.dumps(strategy_to_json(strategy)))) == strategy

    def test_product_and_global(self, rng):
        prod = ProductStates((random_pure_state(2, rng), random_density_matrix(2, rng)))
        back = strategy_from_json(strategy_to_json(prod))
        assert isinstance(back.states[0], PureState) and isinstance(back.states[1], DensityMatrix)
        glob = GlobalState(random_pure_state(4, rng), spans_repetitions=True)
        back = strategy_from_json(strategy_to_json(glob))
        assert back.spans_repetitions
        assert_allclose(back.state.amplitudes, glob.state.amplitudes)

    def test_string_shorthand(self):
        assert strategy_from_json("honest") == Honest()

    def test_errors(self):
        with pytest.raises(ConfigError, match="field 'type'"):
            strategy_from_json({"type": "magic"})
        with pytest.raises(ConfigError, match=r"strategy.states\[0\]"):
            strategy_from_json({"type": "product", "states": [{"kind": "pure", "amplitudes": [2, 0]}]})
        with pytest.raises(TypeError):
            strategy_to_json(object())


class TestNetworks:
    def test_round_trip(self):
        net = Network((0, 1, 2), ((0, 1), (1, 2)), (0, 2), {0: "01", 2: "11"})
        back = network_from_json(json.loads(json.dumps(network_to_json(net))))
        assert (back.nodes, back.edges, back.terminals, back.inputs) == (
            net.nodes, net.edges, net.terminals, net.inputs)

    @pytest.mark.parametrize("doc,msg", [
        ({"nodes": [0, 1], "edges": [[0]], "terminals": [0, 1]}, r"edges\[0\]"),
        ({"nodes": [0, 1], "edges": [[0, 1]], "terminals": [0, 1], "inputs": {"a": "0"}}, "keys"),
        ({"nodes": [0, 1], "edges": [[0, 1]], "terminals": [0, 1], "inputs": {"0": "2", "1": "0"}}, "bit string"),
        ({"nodes": [0, 1, 2], "edges": [[0, 1]], "terminals": [0, 1]}, "connected"),
        ({"nodes": [0, 1], "terminals": [0, 1]}, "missing field 'edges'"),
    ])
    def test_errors(self, doc, msg):
        with pytest.raises(ConfigError, match=msg):
            network_from_json(doc)


class TestReports:
    def test_normalize(self):
        out = normalize({"accept_probability": 1 / 3, "seen_by": [np.int64(2), np.bool_(True)],
                         "bad": float("nan"), 3: "x"})
        assert out == {"acceptProbability": 0.333333333333, "seenBy": [2, True], "bad": None, "3": "x"}

    def test_report_round_trip(self):
        text = dumps_report("path-report", {"b_value": 0.1 + 0.2, "a": 1})
        assert text.endswith("\n") and text.index('"kind"') < text.index('"report"')
        doc = loads_report(text, "path-report")
        assert doc["schemaVersion"] == SCHEMA_VERSION
        assert doc["report"] == {"a": 1, "bValue": 0.3}

    def test_report_errors(self):
        with pytest.raises(ConfigError, match="schemaVersion"):
            loads_report('{"kind": "x", "report": {}}')
        with pytest.raises(ConfigError, match="kind"):
            loads_report(dumps_report("a", {}), "b")
        with pytest.raises(ConfigError, match="report"):
            loads_report('{"schemaVersion": 1, "kind": "a", "report": 3}')

    def test_json_error_location(self):
        with pytest.raises(ConfigError, match="line 2, column 8"):
            loads('{\n  "a": ,\n}')

    def test_field_types(self):
        assert field({"k": 3}, "k", int) == 3
        assert field({}, "k", int, default=None) is None
        with pytest.raises(ConfigError, match="integer"):
            field({"k": True}, "k", int)
        with pytest.raises(ConfigError, match="number"):
            field({"k": "1"}, "k", float)
        with pytest.raises(ConfigError, match="str"):
            field({"k": 1}, "k", str)

    @given(st.dictionaries(st.text(alphabet="abc", min_size=1, max_size=6),
                           st.floats(allow_nan=False, allow_infinity=False), max_size=5))
    def test_dumps_is_stable(self, payload):
        assert dumps_report("k", payload) == dumps_report("k", dict(reversed(list(payload.items()))))
