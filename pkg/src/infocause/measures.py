"""Specific causal effect measures computed exactly on a :class:`CausalModel`.

Every measure is a KL divergence (bits) between the effect's distribution
under do(X = x) and a "course of nature" mixture in which X, and for the
natural effects the mediators, are left to vary. Interventional terms are
always obtained by exact truncated-factorization inference, so the values
are correct whether or not the measure would be identifiable from data.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np

from infocause.errors import ModelError, RoleMismatch
from infocause.graph import NodeRoleSpec
from infocause.model import CausalModel, joint_distribution, post_cutting, query
from infocause.prob import Pmf, entropy, kl_arrays


class Kind(str, Enum):
    STE = "STE"
    SCDE = "SCDE"
    SNDE = "SNDE"
    SNIE = "SNIE"
    IF = "IF"
    COND_IF = "COND_IF"
    CS = "CS"

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ModelError(f"unknown measure kind {value!r}") from None

    @property
    def specific(self) -> bool:
        return self in (Kind.STE, Kind.SCDE, Kind.SNDE, Kind.SNIE)


@dataclass(frozen=True)
class MeasureSpec:
    """What to measure.

    ``conditioning`` is the observed covariate assignment; covariates that
    are observed but not listed there are marginalized. ``local_baseline=False``
    weights the baseline by p(x') instead of p(x' | conditioning).
    ``imposed`` (COND_IF) and ``cut`` (CS) only apply to the systemic measures.
    """

    kind: Kind
    roles: NodeRoleSpec
    cause_value: Optional[str] = None
    mediator_value: Optional[Mapping[str, str]] = None
    conditioning: Mapping[str, str] = field(default_factory=dict)
    normalized: bool = False
    local_baseline: bool = True
    imposed: tuple[str, ...] = ()
    cut: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        object.__setattr__(self, "conditioning", {k: str(v) for k, v in dict(self.conditioning).items()})
        if self.cause_value is not None:
            object.__setattr__(self, "cause_value", str(self.cause_value))
        mv = self.mediator_value
        if mv is not None and not isinstance(mv, Mapping):
            if len(self.roles.mediators) != 1:
                raise RoleMismatch("a bare mediator value needs exactly one mediator")
            mv = {self.roles.mediators[0]: mv}
        if mv is not None:
            mv = {k: str(v) for k, v in mv.items()}
        object.__setattr__(self, "mediator_value", mv)
        object.__setattr__(self, "imposed", tuple(self.imposed))
        object.__setattr__(self, "cut", tuple(tuple(e) for e in self.cut))

        kind = self.kind
        if kind.specific and self.cause_value is None:
            raise RoleMismatch(f"{kind.value} needs a cause value")
        if kind in (Kind.SCDE, Kind.SNDE, Kind.SNIE) and not self.roles.mediators:
            raise RoleMismatch(f"{kind.value} needs at least one mediator")
        if kind is Kind.SCDE:
            if self.mediator_value is None or set(self.mediator_value) != set(self.roles.mediators):
                raise RoleMismatch("SCDE needs a value for every mediator")
        elif self.mediator_value is not None:
            raise RoleMismatch("mediator values only apply to SCDE")
        extra = set(self.conditioning) - set(self.roles.observed_covariates)
        if extra:
            raise RoleMismatch(f"conditioning on {sorted(extra)} which are not observed covariates")
        if self.normalized and not kind.specific:
            raise RoleMismatch("normalization is defined for the specific measures only")

    @classmethod
    def make(
        cls,
        kind,
        cause: str,
        effect: str,
        value=None,
        *,
        mediators=(),
        mediator_value=None,
        condition: Optional[Mapping[str, object]] = None,
        covariates=(),
        **kwargs,
    ) -> "MeasureSpec":
        """Convenience constructor; conditioned nodes become observed covariates."""
        condition = dict(condition or {})
        if isinstance(mediators, str):
            mediators = (mediators,)
        if isinstance(covariates, str):
            covariates = (covariates,)
        observed = tuple(dict.fromkeys([*covariates, *condition]))
        roles = NodeRoleSpec(cause, effect, tuple(mediators), observed)
        return cls(Kind.parse(kind), roles, value, mediator_value, condition, **kwargs)

    def describe(self) -> dict:
        r = self.roles
        return {
            "kind": self.kind.value,
            "cause": r.cause,
            "cause_value": self.cause_value,
            "effect": r.effect,
            "mediators": list(r.mediators),
            "mediator_value": dict(self.mediator_value) if self.mediator_value else None,
            "observed_covariates": list(r.observed_covariates),
            "conditioning": dict(self.conditioning),
            "normalized": self.normalized,
            "local_baseline": self.local_baseline,
            "imposed": list(self.imposed),
            "cut": [list(e) for e in self.cut],
        }


@dataclass(frozen=True)
class MeasureValue:
    bits: float
    normalized: Optional[float] = None
    components: Mapping[str, object] = field(default_factory=dict)


def normalize(raw: float, residual_entropy: float) -> float:
    """raw / (raw + residual), with 0 -> 0 and inf or zero residual -> 1."""
    if raw < 0 or residual_entropy < 0:
        raise ValueError("normalize needs nonnegative inputs")
    if raw == 0:
        return 0.0
    if math.isinf(raw) or residual_entropy == 0:
        return 1.0
    return raw / (raw + residual_entropy)


def _validate(m: CausalModel, spec: MeasureSpec) -> None:
    spec.roles.validate(m.dag)
    r = spec.roles
    if spec.cause_value is not None:
        m.dag.state_index(r.cause, spec.cause_value)
    for name, state in spec.conditioning.items():
        m.dag.state_index(name, state)
    for name, state in (spec.mediator_value or {}).items():
        m.dag.state_index(name, state)


def _cause_weights(m: CausalModel, spec: MeasureSpec) -> Pmf:
    x = spec.roles.cause
    if spec.local_baseline:
        return query(m, x, observations=spec.conditioning)
    return query(m, x)


def _mediator_configs(m: CausalModel, mediators):
    states = [m.dag.states(z) for z in mediators]
    for combo in itertools.product(*[range(len(s)) for s in states]):
        yield combo, {z: states[i][c] for i, (z, c) in enumerate(zip(mediators, combo))}


def _finish(spec: MeasureSpec, first: Pmf, baseline: np.ndarray, components: dict) -> MeasureValue:
    bits = kl_arrays(first.probs, baseline)
    components = {"first": first, "baseline": Pmf(first.support, baseline / baseline.sum()), **components}
    norm = normalize(bits, entropy(first)) if spec.normalized else None
    return MeasureValue(bits, norm, components)


def _mixture(support_size: int, terms) -> np.ndarray:
    out = np.zeros(support_size)
    for w, pmf in terms:
        out += w * pmf.probs
    return out


def ste(m: CausalModel, spec: MeasureSpec) -> MeasureValue:
    """Specific total effect D(p(Y | do(x), u) || sum_x' p(x' | u) p(Y | do(x'), u))."""
    _validate(m, spec)
    x, y, u = spec.roles.cause, spec.roles.effect, spec.conditioning
    first = query(m, y, {x: spec.cause_value}, u)
    w = _cause_weights(m, spec)
    terms = ((wx, query(m, y, {x: xs}, u)) for xs, wx in zip(w.support, w.probs) if wx > 0)
    return _finish(spec, first, _mixture(len(first), terms), {"cause_weights": w})


def scde(m: CausalModel, spec: MeasureSpec) -> MeasureValue:
    """Specific controlled direct effect with mediators held at ``mediator_value``."""
    _validate(m, spec)
    x, y, u = spec.roles.cause, spec.roles.effect, spec.conditioning
    zdo = dict(spec.mediator_value)
    first = query(m, y, {x: spec.cause_value, **zdo}, u)
    w = _cause_weights(m, spec)
    terms = ((wx, query(m, y, {x: xs, **zdo}, u)) for xs, wx in zip(w.support, w.probs) if wx > 0)
    return _finish(spec, first, _mixture(len(first), terms), {"cause_weights": w})


def _natural(m: CausalModel, spec: MeasureSpec, direct: bool) -> MeasureValue:
    _validate(m, spec)
    r = spec.roles
    x, y, u, zs = r.cause, r.effect, spec.conditioning, r.mediators
    xv = spec.cause_value
    first = query(m, y, {x: xv}, u)
    w = _cause_weights(m, spec)
    pz_do_x = query(m, zs, {x: xv}, u).probs
    baseline = np.zeros(len(first))
    for xs, wx in zip(w.support, w.probs):
        if wx <= 0:
            continue
        if direct:
            # mediators distributed as under do(x), Y evaluated under do(x')
            z_weights, y_cause = pz_do_x, xs
        else:
            # mediators distributed as under do(x'), Y evaluated under do(x)
            z_weights, y_cause = query(m, zs, {x: xs}, u).probs, xv
        for combo, zobs in _mediator_configs(m, zs):
            wz = z_weights[combo]
            if wz <= 0:
                continue
            baseline += wx * wz * query(m, y, {x: y_cause}, {**u, **zobs}).probs
    return _finish(spec, first, baseline, {"cause_weights": w})


def snde(m: CausalModel, spec: MeasureSpec) -> MeasureValue:
    """Specific natural direct effect."""
    return _natural(m, spec, direct=True)


def snie(m: CausalModel, spec: MeasureSpec) -> MeasureValue:
    """Specific natural indirect effect."""
    return _natural(m, spec, direct=False)


def information_flow(m: CausalModel, x: str, y: str, imposed=()) -> MeasureValue:
    """Information flow from ``x`` to ``y``, optionally imposing ``imposed``.

    The imposed form averages over the observational p(v) and weights causes
    by p(x | do(v)).
    """
    if isinstance(imposed, str):
        imposed = (imposed,)
    imposed = tuple(imposed)
    for n in (x, y, *imposed):
        m.dag.index(n)
    if len({x, y, *imposed}) != 2 + len(imposed):
        raise RoleMismatch("x, y and imposed nodes must be distinct")

    def flow(vdo: dict) -> float:
        px = query(m, x, vdo)
        conds = {xs: query(m, y, {x: xs, **vdo}) for xs, w in zip(px.support, px.probs) if w > 0}
        mix = _mixture(m.dag.cardinality(y), ((px[xs], pmf) for xs, pmf in conds.items()))
        return sum(px[xs] * kl_arrays(pmf.probs, mix) for xs, pmf in conds.items())

    if not imposed:
        return MeasureValue(flow({}))
    pv = query(m, imposed) if len(imposed) > 1 else None
    total = 0.0
    for combo, vdo in _mediator_configs(m, imposed):
        weight = pv.probs[combo] if pv is not None else query(m, imposed[0]).probs[combo[0]]
        if weight > 0:
            total += weight * flow(vdo)
    return MeasureValue(total)


def causal_strength(m: CausalModel, cut) -> MeasureValue:
    """KL divergence from the joint to the post-cutting joint for edge set ``cut``."""
    p = joint_distribution(m).probs.reshape(-1)
    q = post_cutting(m, cut).probs.reshape(-1)
    return MeasureValue(kl_arrays(p, q))


def compute(m: CausalModel, spec: MeasureSpec) -> MeasureValue:
    """Dispatch on ``spec.kind``."""
    kind = spec.kind
    r = spec.roles
    if kind is Kind.STE:
        return ste(m, spec)
    if kind is Kind.SCDE:
        return scde(m, spec)
    if kind is Kind.SNDE:
        return snde(m, spec)
    if kind is Kind.SNIE:
        return snie(m, spec)
    if kind is Kind.IF:
        return information_flow(m, r.cause, r.effect, spec.imposed)
    if kind is Kind.COND_IF:
        return information_flow(m, r.cause, r.effect, spec.imposed or r.mediators)
    return causal_strength(m, spec.cut or ((r.cause, r.effect),))
