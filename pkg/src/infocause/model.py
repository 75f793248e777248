"""Discrete structural causal models and exact inference by enumeration.

Reproducible sampling
---------------------
:func:`sample` draws row ``i`` from its own counter-based substream: a
``numpy.random.Philox`` generator keyed by ``seed`` with its counter set to
``i * ceil(k / 4)``, where ``k`` is the number of nodes. The row uses the first
``k`` doubles of that block (``Generator.random``), one per node in
topological order, and maps each to a state by inverse-CDF lookup on the
node's CPT row. Because each row owns a fixed counter block, any split of the
rows into batches produces the same dataset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from infocause.data import Dataset
from infocause.errors import (
    ModelError,
    StateSpaceTooLarge,
    UnknownEdge,
    ValidationError,
)
from infocause.graph import CausalDag, topological_sort
from infocause.prob import NORM_TOL, JointTable, Pmf

MAX_JOINT_ENTRIES = 10**7

Intervention = Mapping[str, object]


@dataclass(frozen=True, eq=False)
class Cpt:
    """p(child | parents); ``table[pa_1, ..., pa_k, child_state]``.

    Flattened, rows follow mixed-radix order over ``parents`` with the first
    parent most significant.
    """

    child: str
    parents: tuple[str, ...]
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        t = np.array(self.table, dtype=float)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        if t.ndim != len(self.parents) + 1:
            raise ValidationError(
                f"CPT for {self.child!r} has {t.ndim} axes, expected {len(self.parents) + 1}"
            )
        if np.any(~np.isfinite(t)) or np.any(t < 0):
            raise ValidationError(f"CPT for {self.child!r} has negative or non-finite entries")
        sums = t.sum(axis=-1).reshape(-1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > NORM_TOL)
        if bad.size:
            raise ValidationError(
                f"CPT for {self.child!r}: row {int(bad[0])} sums to {sums[bad[0]]!r}, not 1"
            )

    def row(self, parent_states: Sequence[int]) -> np.ndarray:
        return self.table[tuple(parent_states)]


@dataclass(frozen=True, eq=False)
class CausalModel:
    dag: CausalDag
    cpts: Mapping[str, Cpt]

    def __post_init__(self):
        cpts = dict(self.cpts)
        object.__setattr__(self, "cpts", cpts)
        for name in self.dag.names:
            if name not in cpts:
                raise ValidationError(f"node {name!r} has no CPT")
        for name, cpt in cpts.items():
            if name not in self.dag:
                raise ValidationError(f"CPT given for undeclared node {name!r}")
            if cpt.child != name:
                raise ValidationError(f"CPT keyed {name!r} is for {cpt.child!r}")
            if set(cpt.parents) != set(self.dag.parents(name)) or len(set(cpt.parents)) != len(cpt.parents):
                raise ValidationError(
                    f"CPT parents {list(cpt.parents)} of {name!r} do not match DAG parents "
                    f"{list(self.dag.parents(name))}"
                )
            shape = tuple(self.dag.cardinality(p) for p in cpt.parents) + (self.dag.cardinality(name),)
            if cpt.table.shape != shape:
                raise ValidationError(f"CPT for {name!r} has shape {cpt.table.shape}, expected {shape}")

    @classmethod
    def from_tables(cls, dag: CausalDag, tables: Mapping[str, tuple[Sequence[str], object]]) -> "CausalModel":
        """Build from ``{child: (parents, rows)}`` with rows in mixed-radix order."""
        cpts = {}
        for child, (parents, rows) in tables.items():
            shape = tuple(dag.cardinality(p) for p in parents) + (dag.cardinality(child),)
            arr = np.asarray(rows, dtype=float)
            if arr.size != math.prod(shape):
                raise ValidationError(f"CPT for {child!r} has {arr.size} entries, expected {math.prod(shape)}")
            cpts[child] = Cpt(child, tuple(parents), arr.reshape(shape))
        return cls(dag, cpts)

    @property
    def names(self) -> tuple[str, ...]:
        return self.dag.names

    def state_space_size(self) -> int:
        return math.prod(n.cardinality for n in self.dag.nodes)


def _broadcast_factor(cpt: Cpt, dag: CausalDag) -> np.ndarray:
    axes = [dag.index(p) for p in cpt.parents] + [dag.index(cpt.child)]
    order = np.argsort(axes)
    t = np.transpose(cpt.table, order)
    shape = [1] * len(dag.nodes)
    for a in axes:
        shape[a] = dag.cardinality(dag.names[a])
    return t.reshape(shape)


def joint_distribution(m: CausalModel) -> JointTable:
    """Dense joint as the product of all CPT factors."""
    size = m.state_space_size()
    if size > MAX_JOINT_ENTRIES:
        raise StateSpaceTooLarge(f"joint has {size} entries, limit is {MAX_JOINT_ENTRIES}")
    shape = tuple(n.cardinality for n in m.dag.nodes)
    p = np.ones(shape)
    for name in topological_sort(m.dag):
        p = p * _broadcast_factor(m.cpts[name], m.dag)
    return JointTable(m.dag.names, tuple(n.states for n in m.dag.nodes), p)


def intervene(m: CausalModel, iv: Intervention) -> CausalModel:
    """Truncated factorization: do(node = state) for every assignment in ``iv``."""
    if not iv:
        return m
    removed = set()
    cpts = dict(m.cpts)
    for name, state in iv.items():
        k = m.dag.state_index(name, state)
        removed |= {e for e in m.dag.edges if e[1] == name}
        row = np.zeros(m.dag.cardinality(name))
        row[k] = 1.0
        cpts[name] = Cpt(name, (), row)
    return CausalModel(m.dag.without_edges(removed), cpts)


def _check_names(m: CausalModel, names: Iterable[str]):
    for n in names:
        m.dag.index(n)


def query(
    m: CausalModel,
    target,
    interventions: Optional[Intervention] = None,
    observations: Optional[Mapping[str, object]] = None,
):
    """p(target | do(interventions), observations), computed exactly.

    Returns a :class:`Pmf` for a single target name, else a :class:`JointTable`
    over the targets in the given order.
    """
    interventions = dict(interventions or {})
    observations = dict(observations or {})
    single = isinstance(target, str)
    targets = (target,) if single else tuple(target)
    _check_names(m, (*targets, *interventions, *observations))
    if set(targets) & (set(interventions) | set(observations)):
        raise ModelError("query targets must be disjoint from intervened and observed nodes")
    if set(interventions) & set(observations):
        raise ModelError("a node cannot be both intervened on and observed")
    joint = joint_distribution(intervene(m, interventions))
    table = joint.condition(observations).marginal(targets)
    return table.pmf() if single else table


def node_marginal(m: CausalModel, name: str) -> Pmf:
    return query(m, name)


def post_cutting(m: CausalModel, cut: Iterable[tuple[str, str]]) -> JointTable:
    """Joint in which each cut edge feeds its child the source node's marginal.

    For child ``j`` with cut parents ``S_j`` the factor becomes
    ``sum_{pa in S_j} p(v_j | kept parents, pa) * prod_{v in S_j} p(v)``.
    """
    cut = [tuple(e) for e in cut]
    edges = set(m.dag.edges)
    for e in cut:
        if e not in edges:
            raise UnknownEdge(f"{e[0]}->{e[1]} is not an edge of the DAG")
    if not cut:
        return joint_distribution(m)
    cut_set = set(cut)
    marginals = {p: node_marginal(m, p).probs for p, _ in cut}
    cpts = dict(m.cpts)
    for child in {c for _, c in cut}:
        cpt = m.cpts[child]
        t = cpt.table
        kept = []
        for axis, parent in enumerate(cpt.parents):
            if (parent, child) in cut_set:
                shape = [1] * t.ndim
                shape[axis] = len(marginals[parent])
                t = t * marginals[parent].reshape(shape)
            else:
                kept.append(axis)
        drop = tuple(a for a in range(len(cpt.parents)) if a not in kept)
        t = t.sum(axis=drop)
        cpts[child] = Cpt(child, tuple(cpt.parents[a] for a in kept), t)
    return joint_distribution(CausalModel(m.dag.without_edges(cut_set), cpts))


def _row_uniforms(seed: int, k: int, start: int, count: int) -> np.ndarray:
    blocks = -(-k // 4)
    bitgen = np.random.Philox(key=seed, counter=start * blocks)
    return np.random.Generator(bitgen).random((count, 4 * blocks))[:, :k]


def _cumulative(table: np.ndarray) -> np.ndarray:
    cum = np.cumsum(table, axis=-1)
    cum = cum / cum[..., -1:]
    # states after the last positive one must be unreachable
    tail = np.cumsum(table[..., ::-1], axis=-1)[..., ::-1]
    later = np.concatenate([tail[..., 1:], np.zeros(table.shape[:-1] + (1,))], axis=-1)
    return np.where(later > 0, cum, 1.0)


def sample(m: CausalModel, n: int, seed: int, chunk_size: int = 1 << 16) -> Dataset:
    """Ancestral sampling with per-row substreams (see module docstring)."""
    if n < 1:
        raise ModelError("n must be >= 1")
    if seed < 0:
        raise ModelError("seed must be a nonnegative integer")
    order = topological_sort(m.dag)
    k = len(order)
    cums = {name: _cumulative(m.cpts[name].table) for name in order}
    codes = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk_size):
        count = min(chunk_size, n - start)
        u = _row_uniforms(seed, k, start, count)
        for j, name in enumerate(order):
            cpt = m.cpts[name]
            col = m.dag.index(name)
            if cpt.parents:
                pa = tuple(codes[start:start + count, m.dag.index(p)] for p in cpt.parents)
                cum = cums[name][pa]
            else:
                cum = np.broadcast_to(cums[name], (count, cums[name].shape[-1]))
            states = (u[:, j:j + 1] >= cum[:, :-1]).sum(axis=1)
            codes[start:start + count, col] = states
    return Dataset(m.dag.names, tuple(nd.states for nd in m.dag.nodes), codes)
