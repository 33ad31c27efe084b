"""Reduction from a general graph to a terminal-leaf tree, plus its labeling scheme.

The certification tree is a BFS tree from the most central terminal u_1,
truncated to the union of root-to-terminal paths. Every terminal that is
not a leaf, including u_1, is replaced in place by a fresh node u'_i and
re-attached below it as a leaf. The result is re-rooted at u_1 so the root
has degree 1. Primed nodes are emulated by their original node.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping


class DisconnectedGraphError(ValueError):
    pass


class MalformedLabelError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Primed:
    """The fresh node u'_i standing in for an internal terminal u_i."""

    node: int

    def __str__(self):
        return f"{self.node}'"


@dataclass(frozen=True, eq=False)
class Network:
    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    terminals: tuple[int, ...]
    inputs: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        nodes = tuple(sorted(int(v) for v in self.nodes))
        if len(set(nodes)) != len(nodes):
            raise ValueError("node ids must be unique")
        node_set = set(nodes)
        edges = []
        seen = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at {u}")
            if u not in node_set or v not in node_set:
                raise ValueError(f"edge ({u}, {v}) references an unknown node")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            edges.append(key)
        terminals = tuple(int(t) for t in self.terminals)
        if len(terminals) < 2:
            raise ValueError("need at least two terminals")
        if len(set(terminals)) != len(terminals):
            raise ValueError("terminals must be distinct")
        if not set(terminals) <= node_set:
            raise ValueError("terminal is not a node")
        inputs = {int(k): v for k, v in dict(self.inputs).items()}
        if inputs and set(inputs) != set(terminals):
            raise ValueError("inputs must be given for exactly the terminals")
        if inputs and len({len(v) for v in inputs.values()}) != 1:
            raise ValueError("all inputs must have the same length")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", tuple(sorted(edges)))
        object.__setattr__(self, "terminals", terminals)
        object.__setattr__(self, "inputs", inputs)
        adj = {v: [] for v in nodes}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "_adj", {v: tuple(sorted(ns)) for v, ns in adj.items()})
        if len(bfs_distances(self, nodes[0])) != len(nodes):
            raise DisconnectedGraphError("graph is not connected")

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def is_terminal(self, v) -> bool:
        return v in self.terminals


def bfs_distances(net: Network, source: int) -> dict[int, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in net.neighbors(u):
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def terminal_radius_and_center(net: Network) -> tuple[int, int]:
    """``(r, center)`` with r = min_i max_j dist(u_i, u_j); ties go to the smallest id."""
    best = None
    for u in net.terminals:
        dist = bfs_distances(net, u)
        ecc = max(dist[v] for v in net.terminals)
        if best is None or (ecc, u) < best:
            best = (ecc, u)
    return best


@dataclass(frozen=True, eq=False)
class CertTree:
    root: int
    parent: Mapping                   # node -> parent (root absent)
    children: Mapping                 # node -> sorted children
    terminals: tuple[int, ...]
    radius: int
    emulated_by: Mapping              # primed node -> original node
    bfs_parent: Mapping               # the truncated BFS tree in G (before priming)
    bfs_depth: Mapping

    @property
    def nodes(self) -> list:
        return [self.root] + sorted(self.parent, key=_node_key)

    def depth(self, v) -> int:
        d = 0
        while v != self.root:
            v = self.parent[v]
            d += 1
        return d

    @property
    def height(self) -> int:
        return max(self.depth(v) for v in self.nodes)

    def degree(self, v) -> int:
        return len(self.children.get(v, ())) + (0 if v == self.root else 1)

    @property
    def max_degree(self) -> int:
        return max(self.degree(v) for v in self.nodes)

    def is_leaf(self, v) -> bool:
        return not self.children.get(v)

    def path_to_root(self, v) -> list:
        out = [v]
        while v != self.root:
            v = self.parent[v]
            out.append(v)
        return out


def _node_key(v):
    return (v.node, 1) if isinstance(v, Primed) else (v, 0)


def build_cert_tree(net: Network) -> CertTree:
    r, center = terminal_radius_and_center(net)
    dist = bfs_distances(net, center)
    # parent = smallest-id neighbour one level closer to the center
    bfs_parent = {v: min(w for w in net.neighbors(v) if dist[w] == dist[v] - 1)
                  for v in net.nodes if v != center}
    keep = {center}
    for t in net.terminals:
        v = t
        while v != center and v not in keep:
            keep.add(v)
            v = bfs_parent[v]
    truncated = {v: bfs_parent[v] for v in keep if v != center}
    kids: dict = {v: [] for v in keep}
    for v, p in truncated.items():
        kids[p].append(v)

    internal_terminals = {t for t in net.terminals if kids[t]} | {center}

    def name(v):
        return Primed(v) if v in internal_terminals else v

    parent: dict = {}
    for v, p in truncated.items():
        parent[name(v)] = name(p)
    for t in internal_terminals:
        if t != center:
            parent[t] = Primed(t)
    # re-root at the center: u_1 -> u'_1 -> rest
    parent[Primed(center)] = center
    children: dict = {}
    for v, p in parent.items():
        children.setdefault(p, []).append(v)
    children = {p: sorted(cs, key=_node_key) for p, cs in children.items()}
    return CertTree(
        root=center, parent=parent, children=children, terminals=net.terminals,
        radius=r, emulated_by={Primed(t): t for t in internal_terminals},
        bfs_parent=truncated, bfs_depth={v: dist[v] for v in keep})


# -- proof-labeling scheme ---------------------------------------------------

@dataclass(frozen=True)
class TreeLabel:
    """Classical certificate of one node.

    Tree nodes carry ``parent_id`` (their own id at the root) and
    ``dist_to_tree == 0``; other nodes carry ``parent_id is None`` and their
    distance to the tree. Every node carries the root id and its BFS depth
    from the root.
    """

    root_id: int
    depth: int
    in_tree: bool
    parent_id: int | None
    dist_to_tree: int


def label_tree(net: Network, tree: CertTree) -> dict[int, TreeLabel]:
    dist = bfs_distances(net, tree.root)
    in_tree = set(tree.bfs_depth)
    to_tree = {v: 0 for v in in_tree}
    queue = deque(sorted(in_tree))
    while queue:
        u = queue.popleft()
        for w in net.neighbors(u):
            if w not in to_tree:
                to_tree[w] = to_tree[u] + 1
                queue.append(w)
    labels = {}
    for v in net.nodes:
        if v in in_tree:
            pid = tree.root if v == tree.root else tree.bfs_parent[v]
            labels[v] = TreeLabel(tree.root, dist[v], True, pid, 0)
        else:
            labels[v] = TreeLabel(tree.root, dist[v], False, None, to_tree[v])
    return labels


def label_bits(net: Network) -> int:
    """Bit budget of one label: O(log |V|)."""
    id_bits = max(1, math.ceil(math.log2(max(net.nodes) + 2)))
    count_bits = max(1, math.ceil(math.log2(len(net.nodes) + 1)))
    return 2 * id_bits + 2 * count_bits + 2


def _check_label(v, lab) -> None:
    if not isinstance(lab, TreeLabel):
        raise MalformedLabelError(f"node {v}: label is not a TreeLabel")
    for name in ("root_id", "depth", "dist_to_tree"):
        if not isinstance(getattr(lab, name), int) or isinstance(getattr(lab, name), bool):
            raise MalformedLabelError(f"node {v}: field {name} must be an integer")
    if not isinstance(lab.in_tree, bool):
        raise MalformedLabelError(f"node {v}: in_tree must be a boolean")
    if lab.parent_id is not None and (not isinstance(lab.parent_id, int) or isinstance(lab.parent_id, bool)):
        raise MalformedLabelError(f"node {v}: parent_id must be an integer or None")


def verify_node(net: Network, labels: Mapping[int, TreeLabel], v: int) -> bool:
    """Local decision of node v from its own and its neighbours' labels."""
    me = labels[v]
    nbrs = [labels[w] for w in net.neighbors(v)]
    if any(n.root_id != me.root_id for n in nbrs):
        return False
    if me.depth < 0 or me.dist_to_tree < 0:
        return False
    # BFS depth from the claimed root
    if v == me.root_id:
        if me.depth != 0 or not me.in_tree or me.parent_id != v or not net.is_terminal(v):
            return False
    else:
        if me.depth == 0 or me.depth != 1 + min(n.depth for n in nbrs):
            return False
    children = [w for w in net.neighbors(v) if labels[w].in_tree and labels[w].parent_id == v]
    if me.in_tree:
        if me.dist_to_tree != 0:
            return False
        if v != me.root_id:
            closer = [w for w in net.neighbors(v) if labels[w].depth == me.depth - 1]
            if me.parent_id != min(closer):
                return False
            par = labels[me.parent_id]
            if not par.in_tree or par.depth != me.depth - 1:
                return False
        if not net.is_terminal(v) and not children:
            return False
    else:
        if net.is_terminal(v) or me.parent_id is not None:
            return False
        if me.dist_to_tree != 1 + min(n.dist_to_tree for n in nbrs):
            return False
    return True


def verify_labels(net: Network, labels: Mapping[int, TreeLabel]) -> dict[int, bool]:
    if set(labels) != set(net.nodes):
        raise MalformedLabelError("every node needs exactly one label")
    for v, lab in labels.items():
        _check_label(v, lab)
    return {v: verify_node(net, labels, v) for v in net.nodes}


def single_field_corruptions(labels: Mapping[int, TreeLabel], net: Network):
    """Yield ``(node, field, labels')`` for every one-field change of one label.

    Integer fields range over node ids, depths and distances up to |V| plus
    one id absent from the graph; ``parent_id`` also takes None.
    """
    ids = list(net.nodes) + [max(net.nodes) + 1]
    counts = list(range(len(net.nodes) + 1))
    domains = {
        "root_id": ids,
        "depth": counts,
        "in_tree": [False, True],
        "parent_id": ids + [None],
        "dist_to_tree": counts,
    }
    for v in net.nodes:
        for fname, domain in domains.items():
            for value in domain:
                if getattr(labels[v], fname) == value and type(getattr(labels[v], fname)) is type(value):
                    continue
                changed = dict(labels)
                changed[v] = TreeLabel(**{**labels[v].__dict__, fname: value})
                yield v, fname, changed
