"""Causal DAG structure, graph surgery, d-separation and identifiability.

Nodes carry explicit, ordered state labels. Dense integer indices used by the
probability code always follow declaration order, both for nodes and for the
states of a node.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from infocause.errors import (
    CyclicGraph,
    ModelError,
    OverlappingSets,
    RoleMismatch,
    TooManyCovariates,
    UnknownNode,
    UnknownState,
)

MAX_SEARCH_COVARIATES = 16


@dataclass(frozen=True)
class Node:
    name: str
    states: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(str(s) for s in self.states))
        if not self.name:
            raise ModelError("node name must be non-empty")
        if not self.states:
            raise ModelError(f"node {self.name!r} has no states")
        if len(set(self.states)) != len(self.states):
            raise ModelError(f"node {self.name!r} has duplicate state labels")

    @property
    def cardinality(self) -> int:
        return len(self.states)


def _toposort(names: Sequence[str], edges: Iterable[tuple[str, str]]) -> list[str]:
    order = {n: i for i, n in enumerate(names)}
    indegree = {n: 0 for n in names}
    children: dict[str, list[str]] = {n: [] for n in names}
    for parent, child in edges:
        indegree[child] += 1
        children[parent].append(child)
    heap = [order[n] for n in names if indegree[n] == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        n = names[heapq.heappop(heap)]
        out.append(n)
        for c in children[n]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(heap, order[c])
    if len(out) != len(names):
        stuck = [n for n in names if indegree[n] > 0]
        raise CyclicGraph(f"graph has a cycle through {stuck}")
    return out


@dataclass(frozen=True)
class CausalDag:
    """Immutable DAG over named categorical nodes.

    ``edges`` may be given as any iterable of ``(parent, child)`` pairs; it is
    stored as a tuple in the given order (duplicates are rejected).
    """

    nodes: tuple[Node, ...]
    edges: tuple[tuple[str, str], ...] = ()
    _index: dict = field(init=False, repr=False, compare=False)
    _order: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        nodes = tuple(n if isinstance(n, Node) else Node(*n) for n in self.nodes)
        edges = tuple((str(p), str(c)) for p, c in self.edges)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        index = {}
        for i, n in enumerate(nodes):
            if n.name in index:
                raise ModelError(f"duplicate node {n.name!r}")
            index[n.name] = i
        object.__setattr__(self, "_index", index)
        if len(set(edges)) != len(edges):
            raise ModelError("duplicate edge")
        for p, c in edges:
            for end in (p, c):
                if end not in index:
                    raise UnknownNode(f"edge {p}->{c} names undeclared node {end!r}")
            if p == c:
                raise CyclicGraph(f"self-loop on {p!r}")
        order = _toposort(self.names, edges)
        object.__setattr__(self, "_order", tuple(order))

    @classmethod
    def from_spec(cls, states: dict, edges: Iterable[tuple[str, str]] = ()) -> "CausalDag":
        """Build from ``{name: states}`` (declaration order is dict order)."""
        return cls(tuple(Node(n, s) for n, s in states.items()), tuple(edges))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    def __contains__(self, name) -> bool:
        return name in self._index

    def node(self, name: str) -> Node:
        try:
            return self.nodes[self._index[name]]
        except KeyError:
            raise UnknownNode(f"unknown node {name!r}") from None

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownNode(f"unknown node {name!r}") from None

    def states(self, name: str) -> tuple[str, ...]:
        return self.node(name).states

    def cardinality(self, name: str) -> int:
        return self.node(name).cardinality

    def state_index(self, name: str, state) -> int:
        states = self.states(name)
        try:
            return states.index(str(state))
        except ValueError:
            raise UnknownState(f"node {name!r} has no state {state!r}; states are {list(states)}") from None

    def parents(self, name: str) -> tuple[str, ...]:
        self.index(name)
        ps = {p for p, c in self.edges if c == name}
        return tuple(n for n in self.names if n in ps)

    def children(self, name: str) -> tuple[str, ...]:
        self.index(name)
        cs = {c for p, c in self.edges if p == name}
        return tuple(n for n in self.names if n in cs)

    def ancestors(self, names: Iterable[str]) -> set[str]:
        """Nodes with a directed path into ``names``, including ``names``."""
        parents = {n: [] for n in self.names}
        for p, c in self.edges:
            parents[c].append(p)
        seen = set()
        stack = [self.node(n).name for n in names]
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(parents[n])
        return seen

    def descendants(self, names: Iterable[str]) -> set[str]:
        children = {n: [] for n in self.names}
        for p, c in self.edges:
            children[p].append(c)
        seen = set()
        stack = [self.node(n).name for n in names]
        while stack:
            n = stack.pop()
            if n in seen:
                continue
            seen.add(n)
            stack.extend(children[n])
        return seen

    def without_edges(self, removed: Iterable[tuple[str, str]]) -> "CausalDag":
        removed = set(removed)
        return CausalDag(self.nodes, tuple(e for e in self.edges if e not in removed))


def topological_sort(dag: CausalDag) -> list[str]:
    """Parents-first order; ties broken by declaration order."""
    return list(dag._order)


def cut_edges(dag: CausalDag, node: str, mode: str) -> CausalDag:
    """Remove all edges into (``"incoming"``) or out of (``"outgoing"``) a node."""
    dag.index(node)
    if mode == "incoming":
        return dag.without_edges(e for e in dag.edges if e[1] == node)
    if mode == "outgoing":
        return dag.without_edges(e for e in dag.edges if e[0] == node)
    raise ValueError(f"mode must be 'incoming' or 'outgoing', got {mode!r}")


def _as_set(dag: CausalDag, names) -> frozenset:
    if isinstance(names, str):
        names = (names,)
    out = frozenset(names)
    for n in out:
        dag.index(n)
    return out


def d_separated(dag: CausalDag, a, b, c=()) -> bool:
    """Test whether ``a`` and ``b`` are d-separated by ``c``.

    Uses the ancestral-moral-graph construction: restrict to ancestors of
    a | b | c, marry co-parents, delete c, and look for any undirected path
    from a to b.
    """
    a, b, c = _as_set(dag, a), _as_set(dag, b), _as_set(dag, c)
    if not a or not b:
        raise ModelError("d_separated needs nonempty a and b")
    if a & b or a & c or b & c:
        raise OverlappingSets("a, b and c must be pairwise disjoint")

    keep = dag.ancestors(a | b | c)
    adj: dict[str, set[str]] = {n: set() for n in keep}
    parents_of: dict[str, list[str]] = {n: [] for n in keep}
    for p, ch in dag.edges:
        if p in keep and ch in keep:
            adj[p].add(ch)
            adj[ch].add(p)
            parents_of[ch].append(p)
    for ps in parents_of.values():
        for u, v in itertools.combinations(ps, 2):
            adj[u].add(v)
            adj[v].add(u)

    seen = set(a)
    frontier = list(a)
    while frontier:
        n = frontier.pop()
        for nb in adj[n]:
            if nb in c or nb in seen:
                continue
            if nb in b:
                return False
            seen.add(nb)
            frontier.append(nb)
    return True


def rule2_condition(dag: CausalDag, y, z, x=(), w=()) -> bool:
    """Whether observing ``z`` may replace doing ``z`` in p(y | do(x), do(z), w)."""
    y, z, x, w = (_as_set(dag, s) for s in (y, z, x, w))
    sets = [y, z, x, w]
    for s1, s2 in itertools.combinations(sets, 2):
        if s1 & s2:
            raise OverlappingSets("y, z, x and w must be pairwise disjoint")
    g = dag
    for n in sorted(x, key=dag.index):
        g = cut_edges(g, n, "incoming")
    for n in sorted(z, key=dag.index):
        g = cut_edges(g, n, "outgoing")
    return d_separated(g, y, z, x | w)


@dataclass(frozen=True)
class NodeRoleSpec:
    """Assignment of DAG nodes to the roles of a mediation query.

    Nodes not named here are the unobserved covariates.
    """

    cause: str
    effect: str
    mediators: tuple[str, ...] = ()
    observed_covariates: tuple[str, ...] = ()

    def __post_init__(self):
        for attr in ("mediators", "observed_covariates"):
            v = getattr(self, attr)
            object.__setattr__(self, attr, (v,) if isinstance(v, str) else tuple(v))

    def validate(self, dag: CausalDag) -> None:
        named = [self.cause, self.effect, *self.mediators, *self.observed_covariates]
        for n in named:
            dag.index(n)
        if self.cause == self.effect:
            raise RoleMismatch("cause and effect must differ")
        if len(set(named)) != len(named):
            raise RoleMismatch(f"roles overlap: {named}")

    def unobserved(self, dag: CausalDag) -> tuple[str, ...]:
        named = {self.cause, self.effect, *self.mediators, *self.observed_covariates}
        return tuple(n for n in dag.names if n not in named)


@dataclass(frozen=True)
class IdentifiabilityReport:
    identifiable: bool
    witness_u1: Optional[tuple[str, ...]]
    witness_u2: Optional[tuple[str, ...]]
    checked_subsets: int
    mediation_shape: bool
    note: str = ""


def is_mediation_shaped(dag: CausalDag, roles: NodeRoleSpec) -> bool:
    """True when the roles fit X -> Z -> Y, X -> Y with covariates only upstream.

    Covariates may not have X, Z or Y as parents, X's parents are covariates,
    Z's parents are in {X} | covariates (mediators may also feed each other),
    and Y has no children among the other roles.
    """
    x, y = roles.cause, roles.effect
    zs = set(roles.mediators)
    us = set(dag.names) - zs - {x, y}
    for p, c in dag.edges:
        if c in us and p not in us:
            return False
        if c == x and p not in us:
            return False
        if c in zs and p == y:
            return False
    return True


def check_identifiability(dag: CausalDag, roles: NodeRoleSpec) -> IdentifiabilityReport:
    """Search observed-covariate subsets that license observational estimation.

    Looks for the smallest subsets U1, U2 of the observed covariates (first in
    declaration order among equal sizes) with X _||_ Y | U1 and X _||_ Z | U2 in
    the graph with X's outgoing edges removed. With no mediators only the
    first condition is checked.
    """
    roles.validate(dag)
    observed = sorted(roles.observed_covariates, key=dag.index)
    if len(observed) > MAX_SEARCH_COVARIATES:
        raise TooManyCovariates(
            f"{len(observed)} observed covariates exceeds the search bound {MAX_SEARCH_COVARIATES}"
        )
    g = cut_edges(dag, roles.cause, "outgoing")
    shaped = is_mediation_shaped(dag, roles)
    checked = 0

    def first_witness(target) -> Optional[tuple[str, ...]]:
        nonlocal checked
        for size in range(len(observed) + 1):
            for subset in itertools.combinations(observed, size):
                checked += 1
                if d_separated(g, {roles.cause}, target, subset):
                    return subset
        return None

    u1 = first_witness({roles.effect})
    u2 = first_witness(set(roles.mediators)) if roles.mediators else None
    ok = u1 is not None and (not roles.mediators or u2 is not None)
    note = "" if shaped else (
        "roles do not match the mediation shape; the identifiability guarantee "
        "only covers mediation-shaped graphs"
    )
    return IdentifiabilityReport(ok, u1, u2, checked, shaped, note)
