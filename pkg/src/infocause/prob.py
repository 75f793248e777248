"""Finite distributions and information measures, all in bits.

Zero-probability terms are skipped (0 log 0 = 0). A KL divergence whose first
argument puts mass where the second has none is ``math.inf``; infinity is an
ordinary return value here, never an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from infocause.errors import (
    ModelError,
    NumericalInconsistency,
    OverlappingSets,
    SupportMismatch,
    UnknownNode,
    UnknownState,
    ZeroProbabilityConditioning,
)

NORM_TOL = 1e-9
CLAMP_TOL = 1e-12


def clamp_nonnegative(value: float, what: str = "quantity") -> float:
    """Snap rounding noise in a nonnegative quantity to zero."""
    if value < 0.0:
        if value < -CLAMP_TOL:
            raise NumericalInconsistency(f"{what} is {value!r}, expected >= 0")
        return 0.0
    return value


@dataclass(frozen=True, eq=False)
class Pmf:
    support: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        support = tuple(str(s) for s in self.support)
        probs = np.array(self.probs, dtype=float).reshape(-1)
        probs.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)
        if len(support) != len(probs):
            raise ModelError(f"{len(support)} labels but {len(probs)} probabilities")
        if len(set(support)) != len(support):
            raise ModelError("support labels must be unique")
        if np.any(~np.isfinite(probs)) or np.any(probs < 0):
            raise ModelError(f"probabilities must be finite and nonnegative: {probs}")
        if abs(probs.sum() - 1.0) > NORM_TOL:
            raise ModelError(f"probabilities sum to {probs.sum()!r}, not 1")

    def __getitem__(self, state) -> float:
        try:
            return float(self.probs[self.support.index(str(state))])
        except ValueError:
            raise UnknownState(f"{state!r} not in support {list(self.support)}") from None

    def __len__(self):
        return len(self.support)

    def __repr__(self):
        body = ", ".join(f"{s}: {p:.6g}" for s, p in zip(self.support, self.probs))
        return f"Pmf({{{body}}})"

    def allclose(self, other: "Pmf", atol: float = 1e-9) -> bool:
        return self.support == other.support and bool(np.allclose(self.probs, other.probs, atol=atol, rtol=0))


def bern(alpha: float) -> Pmf:
    """Two-state pmf on ("0", "1") with P(1) = alpha."""
    return Pmf(("0", "1"), (1.0 - alpha, alpha))


def point_mass(support: Sequence[str], state) -> Pmf:
    support = tuple(str(s) for s in support)
    probs = np.zeros(len(support))
    probs[support.index(str(state))] = 1.0
    return Pmf(support, probs)


def _entropy_array(p: np.ndarray) -> float:
    nz = p[p > 0]
    return clamp_nonnegative(float(-(nz * np.log2(nz)).sum()), "entropy")


def entropy(p: Pmf) -> float:
    return _entropy_array(p.probs)


def kl_divergence(p: Pmf, q: Pmf) -> float:
    if p.support != q.support:
        raise SupportMismatch(f"supports differ: {list(p.support)} vs {list(q.support)}")
    return kl_arrays(p.probs, q.probs)


def kl_arrays(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    if np.any(q[mask] <= 0):
        return math.inf
    pm = p[mask]
    return clamp_nonnegative(float((pm * np.log2(pm / q[mask])).sum()), "KL divergence")


@dataclass(frozen=True, eq=False)
class JointTable:
    """Dense joint pmf; axis i is ``variables[i]``, first variable most significant."""

    variables: tuple[str, ...]
    states: tuple[tuple[str, ...], ...]
    probs: np.ndarray

    def __post_init__(self):
        variables = tuple(self.variables)
        states = tuple(tuple(str(s) for s in st) for st in self.states)
        probs = np.array(self.probs, dtype=float)
        shape = tuple(len(s) for s in states)
        if len(variables) != len(states):
            raise ModelError("one state list per variable required")
        if len(set(variables)) != len(variables):
            raise ModelError("duplicate variable")
        probs = probs.reshape(shape)
        probs.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "probs", probs)
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > NORM_TOL:
            raise ModelError(f"joint table not normalized (sum {probs.sum()!r})")

    def axis(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise UnknownNode(f"{name!r} not in joint over {list(self.variables)}") from None

    def state_index(self, name: str, state) -> int:
        states = self.states[self.axis(name)]
        try:
            return states.index(str(state))
        except ValueError:
            raise UnknownState(f"{name!r} has no state {state!r}") from None

    def marginal(self, names: Iterable[str]) -> "JointTable":
        """Marginal over ``names`` in the given order."""
        names = tuple(names)
        axes = [self.axis(n) for n in names]
        drop = tuple(i for i in range(len(self.variables)) if i not in axes)
        m = self.probs.sum(axis=drop)
        kept = [i for i in range(len(self.variables)) if i in axes]
        m = np.transpose(m, [kept.index(a) for a in axes])
        return JointTable(names, tuple(self.states[a] for a in axes), m)

    def condition(self, observations: Mapping[str, object]) -> "JointTable":
        """Condition on ``{name: state}`` and drop the observed variables."""
        if not observations:
            return self
        index = [slice(None)] * len(self.variables)
        for name, state in observations.items():
            index[self.axis(name)] = self.state_index(name, state)
        sub = self.probs[tuple(index)]
        total = sub.sum()
        if total <= 0:
            raise ZeroProbabilityConditioning(
                "conditioning event " + ", ".join(f"{k}={v}" for k, v in observations.items())
                + " has probability 0"
            )
        rest = [i for i in range(len(self.variables)) if self.variables[i] not in observations]
        return JointTable(
            tuple(self.variables[i] for i in rest),
            tuple(self.states[i] for i in rest),
            sub / total,
        )

    def pmf(self, name: str | None = None) -> Pmf:
        """Pmf of a single variable (the only one, if ``name`` is omitted)."""
        if name is None:
            if len(self.variables) != 1:
                raise ModelError("pmf() without a name needs a one-variable table")
            name = self.variables[0]
        m = self.marginal([name])
        return Pmf(m.states[0], m.probs)


def _check_disjoint(*sets):
    seen = set()
    for s in sets:
        if seen & set(s):
            raise OverlappingSets("variable sets must be pairwise disjoint")
        seen |= set(s)


def _as_tuple(names) -> tuple[str, ...]:
    if isinstance(names, str):
        return (names,)
    return tuple(names)


def joint_entropy(joint: JointTable, names) -> float:
    names = _as_tuple(names)
    if not names:
        return 0.0
    return _entropy_array(joint.marginal(names).probs.reshape(-1))


def conditional_entropy(joint: JointTable, target, given=()) -> float:
    """H(target | given): expected entropy of the conditional over ``given``."""
    target, given = _as_tuple(target), _as_tuple(given)
    _check_disjoint(target, given)
    for n in (*target, *given):
        joint.axis(n)
    h = joint_entropy(joint, target + given) - joint_entropy(joint, given)
    return clamp_nonnegative(h, "conditional entropy")


def mutual_information(joint: JointTable, a, b, given=()) -> float:
    """I(A; B | C) = H(A | C) - H(A | B, C)."""
    a, b, given = _as_tuple(a), _as_tuple(b), _as_tuple(given)
    _check_disjoint(a, b, given)
    mi = conditional_entropy(joint, a, given) - conditional_entropy(joint, a, b + given)
    return clamp_nonnegative(mi, "mutual information")


def specific_mi(joint: JointTable, x_node: str, x_value, target: str) -> tuple[float, float]:
    """Value-specific mutual information of ``x_node = x_value`` about ``target``.

    Returns ``(i1, i2)`` with i1 = D(p(Y | x) || p(Y)) (never negative) and
    i2 = H(Y) - H(Y | X = x), which can be negative. Both average to I(X; Y)
    under p(x).
    """
    pair = joint.marginal([x_node, target])
    px = pair.marginal([x_node]).probs[pair.state_index(x_node, x_value)]
    if px <= 0:
        raise ZeroProbabilityConditioning(f"p({x_node}={x_value}) = 0")
    p_y = pair.pmf(target)
    p_y_x = pair.condition({x_node: x_value}).pmf()
    i1 = kl_divergence(p_y_x, p_y)
    i2 = entropy(p_y) - entropy(p_y_x)
    return i1, i2
