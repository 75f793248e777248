"""Plug-in estimation from observational data, plus series preprocessing.

The specific measures are estimated by replacing every interventional
distribution with its maximum likelihood conditional, which is only
justified when the identifiability check passes. Estimates are computed from
a single joint count tensor over the variables a measure touches, so the
result does not depend on row order and resampled replicates only need a new
count tensor.

Cells with no data are an error, never smoothed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from infocause.data import Dataset
from infocause.errors import (
    ModelError,
    NotIdentifiable,
    SeriesTooShort,
    UndefinedConditional,
    ValidationError,
)
from infocause.graph import CausalDag, NodeRoleSpec, check_identifiability, rule2_condition
from infocause.measures import Kind, MeasureSpec, MeasureValue, compute, normalize
from infocause.model import CausalModel, Cpt
from infocause.prob import Pmf, entropy, kl_arrays

__all__ = [
    "Dataset",
    "TimeSeries",
    "PlugInEstimator",
    "mle_conditional",
    "mle_model",
    "estimate_measure",
    "detrend_harmonics",
    "block_means",
    "tertile_thresholds",
    "quantize_blocks",
    "BlockQuantization",
    "lagged_dataset",
]


def _fmt(assign: Mapping[str, object]) -> str:
    return ", ".join(f"{k}={v}" for k, v in assign.items())


def mle_conditional(d: Dataset, target: str, given: Optional[Mapping[str, object]] = None) -> Pmf:
    """Empirical p(target | given) as a ratio of counts."""
    given = dict(given or {})
    mask = np.ones(d.n, dtype=bool)
    for name, state in given.items():
        mask &= d.column(name) == d.state_index(name, state)
    total = int(mask.sum())
    if total == 0:
        raise UndefinedConditional(f"no rows match {_fmt(given)}; p({target} | {_fmt(given)}) is undefined")
    states = d.states[d.column_index(target)]
    counts = np.bincount(d.column(target)[mask], minlength=len(states))
    return Pmf(states, counts / total)


def mle_model(d: Dataset, dag: CausalDag) -> CausalModel:
    """Causal model whose CPTs are the empirical conditionals of ``d``.

    Every parent configuration must occur in the data.
    """
    tables = {}
    for name in dag.names:
        parents = dag.parents(name)
        cols = [d.column_index(p) for p in (*parents, name)]
        shape = tuple(dag.cardinality(p) for p in parents) + (dag.cardinality(name),)
        _check_states(d, dag, (*parents, name))
        flat = np.ravel_multi_index(tuple(d.codes[:, c] for c in cols), shape)
        counts = np.bincount(flat, minlength=math.prod(shape)).reshape(shape)
        totals = counts.sum(axis=-1, keepdims=True)
        if np.any(totals == 0):
            idx = np.argwhere(totals[..., 0] == 0)[0]
            where = {p: dag.states(p)[i] for p, i in zip(parents, idx)}
            raise UndefinedConditional(f"no rows with {_fmt(where)}; p({name} | parents) is undefined")
        tables[name] = Cpt(name, parents, counts / totals)
    return CausalModel(dag, tables)


def _check_states(d: Dataset, dag: CausalDag, names):
    for n in names:
        if d.states[d.column_index(n)] != dag.states(n):
            raise ValidationError(f"column {n!r} states {d.states[d.column_index(n)]} differ from DAG states {dag.states(n)}")


def _gate(dag: CausalDag, spec: MeasureSpec):
    """Identifiability evidence for the hat-removed formulas."""
    r = spec.roles
    cond = tuple(n for n in dag.names if n in spec.conditioning)
    if spec.kind is Kind.SCDE:
        ok = rule2_condition(dag, {r.effect}, {r.cause, *r.mediators}, (), cond)
        return ok, {"rule2": ok, "conditioning": list(cond)}
    report = check_identifiability(dag, NodeRoleSpec(r.cause, r.effect, r.mediators, cond))
    return report.identifiable, report


class PlugInEstimator:
    """Prepared plug-in estimate of one specific measure on one dataset layout.

    Validation and the identifiability gate run once; :meth:`from_counts`
    then evaluates the estimate on any joint count tensor over
    ``self.variables`` (X, mediators, conditioned covariates, Y).
    """

    def __init__(self, d: Dataset, spec: MeasureSpec, dag: CausalDag, acknowledge_confounding: bool = False):
        if not spec.kind.specific:
            raise ModelError(f"{spec.kind.value} is estimated through mle_model, not the plug-in formulas")
        spec.roles.validate(dag)
        r = spec.roles
        self.spec = spec
        self.dag = dag
        cond = tuple(n for n in dag.names if n in spec.conditioning)
        self.variables = (r.cause, *r.mediators, *cond, r.effect)
        _check_states(d, dag, self.variables)
        self.columns = [d.column_index(n) for n in self.variables]
        self.shape = tuple(dag.cardinality(n) for n in self.variables)
        self.size = math.prod(self.shape)
        self.radix = np.array([math.prod(self.shape[i + 1:]) for i in range(len(self.shape))], dtype=np.int64)
        self.x_index = dag.state_index(r.cause, spec.cause_value)
        self.cond_index = tuple(dag.state_index(n, spec.conditioning[n]) for n in cond)
        self.n_mediators = len(r.mediators)
        self.z_index = None
        if spec.kind is Kind.SCDE:
            zi = [dag.state_index(z, spec.mediator_value[z]) for z in r.mediators]
            self.z_index = int(np.ravel_multi_index(zi, self.shape[1:1 + self.n_mediators]))
        ok, evidence = _gate(dag, spec)
        self.identifiability = evidence
        if not ok and not acknowledge_confounding:
            raise NotIdentifiable(
                f"{spec.kind.value} of {r.cause} on {r.effect} is not identifiable from observational "
                "data for this DAG and conditioning set"
            )
        self.causal = ok
        self.flat = self.flat_codes(d.codes)

    def flat_codes(self, codes: np.ndarray) -> np.ndarray:
        return codes[:, self.columns] @ self.radix

    def counts(self, flat: np.ndarray, weights: Optional[np.ndarray] = None) -> np.ndarray:
        return np.bincount(flat, weights=weights, minlength=self.size).reshape(self.shape)

    def from_counts(self, counts: np.ndarray, details: bool = False) -> MeasureValue:
        spec = self.spec
        r = spec.roles
        nz = self.n_mediators
        cx, cy = self.shape[0], self.shape[-1]
        cz = math.prod(self.shape[1:1 + nz])
        full = counts.reshape(cx, cz, -1, cy)
        # full[x, z, u, y]: conditioning covariates flattened into one axis
        ncond = len(self.cond_index)
        if ncond:
            u = int(np.ravel_multi_index(self.cond_index, self.shape[1 + nz:1 + nz + ncond]))
        else:
            u = 0
        c = full[:, :, u, :]
        cond_desc = _fmt(spec.conditioning)
        sep = ", " if cond_desc else ""
        total = c.sum()
        if total == 0:
            raise UndefinedConditional(f"no rows with {cond_desc}")
        n_x = c.sum(axis=(1, 2))
        if spec.local_baseline:
            w = n_x / total
        else:
            n_all = full.sum(axis=(1, 2, 3))
            w = n_all / n_all.sum()
        x = self.x_index
        xs = self.dag.states(r.cause)
        used = {}

        def cond_y(xi, zi=None):
            if zi is None:
                row, label = c[xi].sum(axis=0), f"{r.effect} | {r.cause}={xs[xi]}{sep}{cond_desc}"
            else:
                row = c[xi, zi]
                label = f"{r.effect} | {r.cause}={xs[xi]}, {self._zlabel(zi)}{sep}{cond_desc}"
            n = row.sum()
            if n == 0:
                raise UndefinedConditional(f"no rows with {label.split(' | ')[1]}; p({label}) is undefined")
            if details:
                used[label] = int(n)
            return row / n

        def cond_z(xi):
            row = c[xi].sum(axis=1)
            n = row.sum()
            if n == 0:
                raise UndefinedConditional(f"no rows with {r.cause}={xs[xi]}{sep}{cond_desc}")
            return row / n

        kind = spec.kind
        baseline = np.zeros(cy)
        if kind is Kind.STE:
            first = cond_y(x)
            for xi in np.flatnonzero(w):
                baseline += w[xi] * cond_y(xi)
        elif kind is Kind.SCDE:
            first = cond_y(x, self.z_index)
            for xi in np.flatnonzero(w):
                baseline += w[xi] * cond_y(xi, self.z_index)
        elif kind is Kind.SNDE:
            first = cond_y(x)
            pz = cond_z(x)
            for xi in np.flatnonzero(w):
                for zi in np.flatnonzero(pz):
                    baseline += w[xi] * pz[zi] * cond_y(xi, zi)
        else:
            first = cond_y(x)
            for xi in np.flatnonzero(w):
                pz = cond_z(xi)
                for zi in np.flatnonzero(pz):
                    baseline += w[xi] * pz[zi] * cond_y(x, zi)
        bits = kl_arrays(first, baseline)
        norm = normalize(bits, entropy(Pmf(self.dag.states(r.effect), first))) if spec.normalized else None
        components = {}
        if details:
            ys = self.dag.states(r.effect)
            components = {
                "first": Pmf(ys, first),
                "baseline": Pmf(ys, baseline / baseline.sum()),
                "counts": used,
                "identifiability": self.identifiability,
                "causal_interpretation": self.causal,
            }
        return MeasureValue(bits, norm, components)

    def _zlabel(self, zi: int) -> str:
        r = self.spec.roles
        idx = np.unravel_index(zi, self.shape[1:1 + self.n_mediators])
        return ", ".join(f"{z}={self.dag.states(z)[i]}" for z, i in zip(r.mediators, idx))

    def statistic(self, value: MeasureValue) -> float:
        return value.normalized if self.spec.normalized else value.bits

    def estimate(self, details: bool = True) -> MeasureValue:
        return self.from_counts(self.counts(self.flat), details=details)


def estimate_measure(
    d: Dataset, spec: MeasureSpec, dag: CausalDag, acknowledge_confounding: bool = False
) -> MeasureValue:
    """Plug-in estimate of ``spec`` from observational data.

    The specific measures use the empirical conditionals directly. The
    systemic measures (IF, COND_IF, CS) are evaluated exactly on the model
    whose CPTs are the empirical conditionals, which needs every DAG node in
    the data.

    With ``acknowledge_confounding`` a measure failing the identifiability
    check is still estimated; ``components["causal_interpretation"]`` is then
    False and the value should be read as predictive, not causal.
    """
    if spec.kind.specific:
        return PlugInEstimator(d, spec, dag, acknowledge_confounding).estimate()
    value = compute(mle_model(d, dag), spec)
    return replace(value, components={"causal_interpretation": True})


@dataclass(frozen=True, eq=False)
class TimeSeries:
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValidationError("timestamps and values must be 1-D and equal length")
        if np.any(np.isnan(v)) or np.any(np.isnan(t)):
            raise ValidationError("time series contains NaN")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValidationError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


def detrend_harmonics(ts: TimeSeries, period_days: float = 365.25, k: int = 6) -> TimeSeries:
    """Remove the mean and the first ``k`` harmonics of the annual cycle.

    Least-squares fit of an intercept plus cos/sin pairs at periods
    ``period_days / j``; returns the residuals (anomalies).
    """
    if len(ts) <= 2 * k + 1:
        raise SeriesTooShort(f"need more than {2 * k + 1} samples to fit {k} harmonics, got {len(ts)}")
    t = ts.timestamps
    cols = [np.ones_like(t)]
    for j in range(1, k + 1):
        arg = 2 * np.pi * j * t / period_days
        cols += [np.cos(arg), np.sin(arg)]
    design = np.column_stack(cols)
    beta, *_ = np.linalg.lstsq(design, ts.values, rcond=None)
    return TimeSeries(t, ts.values - design @ beta)


def block_means(values: np.ndarray, block_days: int) -> np.ndarray:
    """Means of consecutive non-overlapping blocks; a partial last block is dropped."""
    values = np.asarray(values, dtype=float)
    nblocks = values.size // block_days
    return values[: nblocks * block_days].reshape(nblocks, block_days).mean(axis=1)


def tertile_thresholds(values: np.ndarray) -> tuple[float, float]:
    """Order statistics at ranks ceil(n/3) and ceil(2n/3) (1-based)."""
    s = np.sort(np.asarray(values, dtype=float))
    n = s.size
    return float(s[math.ceil(n / 3) - 1]), float(s[math.ceil(2 * n / 3) - 1])


def quantize(values: np.ndarray, low: float, high: float) -> np.ndarray:
    """-1 for value <= low, +1 for value >= high, 0 otherwise."""
    values = np.asarray(values, dtype=float)
    return np.where(values <= low, -1, np.where(values >= high, 1, 0)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class BlockQuantization:
    labels: np.ndarray
    block_means: np.ndarray
    thresholds: tuple[float, float]


def quantize_blocks(ts: TimeSeries, block_days: int = 14, thresholds="empirical-tertiles") -> BlockQuantization:
    """Average over ``block_days`` blocks and map each mean to {-1, 0, 1}.

    In ``"empirical-tertiles"`` mode the thresholds come from the raw
    (pre-averaging) series so that a third of days fall in each category.
    """
    if block_days < 1:
        raise ValidationError("block_days must be >= 1")
    if len(ts) < block_days:
        raise SeriesTooShort(f"series of {len(ts)} samples is shorter than one {block_days}-day block")
    if isinstance(thresholds, str):
        if thresholds != "empirical-tertiles":
            raise ValidationError(f"unknown threshold mode {thresholds!r}")
        low, high = tertile_thresholds(ts.values)
    else:
        low, high = (float(v) for v in thresholds)
        if low > high:
            raise ValidationError("low threshold exceeds high threshold")
    means = block_means(ts.values, block_days)
    return BlockQuantization(quantize(means, low, high), means, (low, high))


TERNARY = ("-1", "0", "1")


def lagged_dataset(
    effect: Sequence[int],
    cause: Optional[Sequence[int]] = None,
    names: tuple[str, str, str] = ("E", "S", "T"),
    states: Sequence[str] = TERNARY,
) -> Dataset:
    """Rows (E, S = T[i-1], T = T[i]) from a quantized series.

    ``cause`` holds the cause label aligned with each effect entry; without
    it only the (S, T) columns are emitted.
    """
    effect = [str(v) for v in effect]
    if len(effect) < 2:
        raise SeriesTooShort("need at least two blocks to form lagged pairs")
    e_name, s_name, t_name = names
    rows = []
    for i in range(1, len(effect)):
        row = [effect[i - 1], effect[i]]
        if cause is not None:
            row.insert(0, str(cause[i]))
        rows.append(row)
    cols = [s_name, t_name] if cause is None else [e_name, s_name, t_name]
    return Dataset.from_labels(cols, [states] * len(cols), rows)
