import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from dqma.tree import (DisconnectedGraphError, MalformedLabelError, Network, Primed, TreeLabel,
                       build_cert_tree, label_bits, label_tree, single_field_corruptions,
                       terminal_radius_and_center, verify_labels)


def path_net(n, terminals):
    return Network(tuple(range(n)), tuple((i, i + 1) for i in range(n - 1)), terminals)


def star_net():
    # hub 0 with three spokes of length 2; terminals at the spoke ends
    edges = ((0, 1), (1, 2), (0, 3), (3, 4), (0, 5), (5, 6))
    return Network(tuple(range(7)), edges, (2, 4, 6))


def random_network(seed, n_min=3, n_max=9):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    while True:
        g = nx.gnp_random_graph(n, float(rng.uniform(0.25, 0.7)), seed=int(rng.integers(1 << 30)))
        if nx.is_connected(g):
            break
    t = int(rng.integers(2, n + 1))
    terminals = tuple(sorted(int(v) for v in rng.choice(n, size=t, replace=False)))
    return g, Network(tuple(g.nodes), tuple(g.edges), terminals)


def all_ok(net, labels):
    return all(verify_labels(net, labels).values())


class TestRadius:
    @pytest.mark.parametrize("net,expected", [
        (path_net(4, (0, 3)), (3, 0)),
        (path_net(2, (0, 1)), (1, 0)),
        (path_net(5, (0, 2, 4)), (2, 2)),
        (star_net(), (4, 2)),
    ])
    def test_examples(self, net, expected):
        assert terminal_radius_and_center(net) == expected

    @pytest.mark.parametrize("seed", range(40))
    def test_against_networkx(self, seed):
        g, net = random_network(seed)
        lengths = dict(nx.all_pairs_shortest_path_length(g))
        ecc = {u: max(lengths[u][v] for v in net.terminals) for u in net.terminals}
        r = min(ecc.values())
        assert terminal_radius_and_center(net) == (r, min(u for u in net.terminals if ecc[u] == r))


class TestCertTree:
    def test_internal_root_terminal_is_primed(self):
        tree = build_cert_tree(path_net(3, (0, 2)))
        assert tree.root == 0
        assert tree.path_to_root(2) == [2, 1, Primed(0), 0]
        assert tree.height == 3

    def test_internal_terminal_becomes_leaf(self):
        tree = build_cert_tree(path_net(5, (0, 2, 4)))
        assert tree.root == 2
        assert tree.children[2] == [Primed(2)]
        assert set(tree.children[Primed(2)]) == {1, 3}
        assert tree.is_leaf(0) and tree.is_leaf(4)
        tree = build_cert_tree(path_net(7, (0, 1, 3, 6)))
        assert tree.root == 3
        assert tree.is_leaf(1) and tree.parent[1] == Primed(1)
        assert tree.emulated_by[Primed(1)] == 1

    def test_star(self):
        tree = build_cert_tree(star_net())
        assert tree.radius == 4
        assert tree.height == 5
        assert tree.max_degree == 3

    @pytest.mark.parametrize("seed", range(60))
    def test_structure_on_random_graphs(self, seed):
        g, net = random_network(seed)
        tree = build_cert_tree(net)
        r = tree.radius
        leaves = [v for v in tree.nodes if tree.is_leaf(v)]
        assert sorted(leaves + [tree.root]) == sorted(net.terminals)
        assert tree.root in net.terminals and len(tree.children[tree.root]) == 1
        assert tree.height <= r + 1
        assert tree.max_degree <= min(len(net.terminals), max(d for _, d in g.degree) + 1)
        for v in tree.nodes:
            orig = tree.emulated_by.get(v, v)
            if v != tree.root:
                p = tree.emulated_by.get(tree.parent[v], tree.parent[v])
                assert p == orig or g.has_edge(p, orig)
        assert len(tree.nodes) == len(set(tree.nodes))


class TestLabels:
    @pytest.mark.parametrize("seed", range(40))
    def test_honest_accepted(self, seed):
        _, net = random_network(seed)
        assert all_ok(net, label_tree(net, build_cert_tree(net)))

    @pytest.mark.parametrize("seed", range(12))
    def test_single_field_corruptions_detected(self, seed):
        _, net = random_network(seed, n_max=7)
        honest = label_tree(net, build_cert_tree(net))
        for v, name, bad in single_field_corruptions(honest, net):
            assert not all_ok(net, bad), (v, name, bad[v])

    @given(st.data())
    def test_only_honest_labeling_accepted(self, data):
        seed = data.draw(st.integers(0, 200))
        _, net = random_network(seed, n_max=6)
        honest = label_tree(net, build_cert_tree(net))
        n = len(net.nodes)
        labels = dict(honest)
        for v in data.draw(st.lists(st.sampled_from(net.nodes), min_size=1, max_size=3, unique=True)):
            in_tree = data.draw(st.booleans())
            labels[v] = TreeLabel(
                root_id=data.draw(st.sampled_from(net.terminals)),
                depth=data.draw(st.integers(0, n)),
                in_tree=in_tree,
                parent_id=data.draw(st.sampled_from(net.nodes)) if in_tree else None,
                dist_to_tree=0 if in_tree else data.draw(st.integers(1, n)))
        if all_ok(net, labels):
            assert labels == honest

    def test_parent_cycle_rejected(self):
        net = Network(tuple(range(4)), ((0, 1), (1, 2), (2, 3), (3, 0)), (0, 2))
        honest = label_tree(net, build_cert_tree(net))
        cyc = dict(honest)
        for v, p in ((1, 2), (2, 3), (3, 1)):
            cyc[v] = TreeLabel(0, honest[v].depth, True, p, 0)
        assert not all_ok(net, cyc)

    def test_malformed(self):
        net = path_net(3, (0, 2))
        honest = label_tree(net, build_cert_tree(net))
        with pytest.raises(MalformedLabelError):
            verify_labels(net, {0: honest[0], 1: honest[1]})
        with pytest.raises(MalformedLabelError):
            verify_labels(net, {**honest, 1: (0, 1, True, 0, 0)})
        with pytest.raises(MalformedLabelError):
            verify_labels(net, {**honest, 1: TreeLabel(0, "1", True, 0, 0)})
        with pytest.raises(MalformedLabelError):
            verify_labels(net, {**honest, 1: TreeLabel(0, 1, 1, 0, 0)})

    def test_label_size_logarithmic(self):
        sizes = [label_bits(path_net(n, (0, n - 1))) for n in (8, 64, 512)]
        assert sizes[1] - sizes[0] == sizes[2] - sizes[1]


class TestNetwork:
    def test_disconnected(self):
        with pytest.raises(DisconnectedGraphError):
            Network((0, 1, 2, 3), ((0, 1), (2, 3)), (0, 3))

    @pytest.mark.parametrize("kwargs", [
        dict(nodes=(0, 1), edges=((0, 0),), terminals=(0, 1)),
        dict(nodes=(0, 1), edges=((0, 2),), terminals=(0, 1)),
        dict(nodes=(0, 1), edges=((0, 1), (1, 0)), terminals=(0, 1)),
        dict(nodes=(0, 1), edges=((0, 1),), terminals=(0,)),
        dict(nodes=(0, 1), edges=((0, 1),), terminals=(0, 5)),
        dict(nodes=(0, 0), edges=(), terminals=(0, 1)),
        dict(nodes=(0, 1), edges=((0, 1),), terminals=(0, 1), inputs={0: "01", 1: "0"}),
        dict(nodes=(0, 1), edges=((0, 1),), terminals=(0, 1), inputs={0: "01"}),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            Network(**kwargs)

    def test_canonical_edges(self):
        net = Network((2, 0, 1), ((1, 0), (2, 1)), (0, 2))
        assert net.nodes == (0, 1, 2) and net.edges == ((0, 1), (1, 2))
        assert list(itertools.chain(net.neighbors(1))) == [0, 2]
