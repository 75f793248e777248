"""Bootstrap confidence intervals and grouped permutation tests.

Random streams
--------------
Every replicate draws from its own generator,
``numpy.random.default_rng(numpy.random.SeedSequence(seed, spawn_key=key))``,
with ``key = (BOOT_TAG, b)`` for bootstrap replicate ``b`` and
``key = (PERM_TAG, b, g)`` for the shuffle of group ``g`` (the group's state
index, or 0 when ungrouped) in permutation replicate ``b``; ``b`` counts from
1. Replicate results therefore do not depend on how replicates are scheduled
across worker threads, and aggregation always runs in replicate order.

Percentiles are nearest-rank order statistics: the q-quantile of ``m``
values is the ``ceil(q * m)``-th smallest (1-based, at least 1).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from infocause.data import Dataset
from infocause.errors import (
    AllReplicatesFailed,
    ModelError,
    UndefinedConditional,
    UnknownLink,
    ValidationError,
)
from infocause.estimate import PlugInEstimator, estimate_measure
from infocause.graph import CausalDag
from infocause.measures import Kind, MeasureSpec, MeasureValue

BOOT_TAG = 0x626F6F74  # "boot"
PERM_TAG = 0x7065726D  # "perm"
FAILED_WARNING_FRACTION = 0.01


@dataclass(frozen=True)
class ResamplePlan:
    replicates: int = 10000
    seed: int = 0
    ci_levels: tuple[float, float] = (0.05, 0.95)
    null_cutoff: float = 0.95

    def __post_init__(self):
        lo, hi = self.ci_levels
        if self.replicates < 1:
            raise ValidationError("replicates must be >= 1")
        if not (0 < lo < hi < 1):
            raise ValidationError(f"ci_levels must satisfy 0 < low < high < 1, got {self.ci_levels}")
        if not (0 < self.null_cutoff < 1):
            raise ValidationError("null_cutoff must lie in (0, 1)")
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")

    @classmethod
    def from_alpha(cls, alpha: float, replicates: int, seed: int) -> "ResamplePlan":
        return cls(replicates, seed, (alpha, 1 - alpha), 1 - alpha)


@dataclass(frozen=True)
class TestReport:
    point: MeasureValue
    statistic: float
    plan: ResamplePlan
    ci: Optional[tuple[float, float]] = None
    null_threshold: Optional[float] = None
    null_samples_summary: Optional[tuple[float, ...]] = None
    significant: Optional[bool] = None
    failed_replicates: int = 0
    bootstrap_failed: int = 0
    permutation_failed: int = 0
    warnings: tuple[str, ...] = ()
    bootstrap_samples: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    null_samples: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    __test__ = False  # not a pytest class


def nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    m = len(sorted_values)
    k = math.ceil(Fraction(repr(float(q))) * m)
    return float(sorted_values[min(max(k, 1), m) - 1])


def _summary(sorted_values: np.ndarray) -> tuple[float, ...]:
    return (
        float(sorted_values[0]),
        nearest_rank(sorted_values, 0.25),
        nearest_rank(sorted_values, 0.5),
        nearest_rank(sorted_values, 0.75),
        float(sorted_values[-1]),
    )


def replicate_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def bootstrap_rows(n: int, seed: int, b: int) -> np.ndarray:
    """Row indices (with replacement) of bootstrap replicate ``b``."""
    return replicate_rng(seed, BOOT_TAG, b).integers(0, n, size=n)


def row_groups(d: Dataset, group_by: Optional[str]) -> list[tuple[int, np.ndarray]]:
    """(state index, row indices) for each nonempty group of ``group_by``."""
    if group_by is None:
        return [(0, np.arange(d.n))]
    g = d.column(group_by)
    groups = [(k, np.flatnonzero(g == k)) for k in range(len(d.states[d.column_index(group_by)]))]
    return [(k, rows) for k, rows in groups if rows.size]


def shuffle_within_groups(col: np.ndarray, groups, seed: int, b: int) -> np.ndarray:
    """Column ``col`` with each group's entries permuted for replicate ``b``."""
    out = np.array(col)
    for k, rows in groups:
        out[rows] = col[rows][replicate_rng(seed, PERM_TAG, b, k).permutation(rows.size)]
    return out


class _Statistic:
    """Evaluates the resampled statistic (bits, or normalized if requested)."""

    def __init__(self, d: Dataset, spec: MeasureSpec, dag: CausalDag, acknowledge_confounding: bool):
        self.d = d
        self.spec = spec
        self.dag = dag
        self.ack = acknowledge_confounding
        self.fast = PlugInEstimator(d, spec, dag, acknowledge_confounding) if spec.kind.specific else None

    def point(self) -> MeasureValue:
        if self.fast is not None:
            return self.fast.estimate()
        return estimate_measure(self.d, self.spec, self.dag, self.ack)

    def value(self, v: MeasureValue) -> float:
        return v.normalized if self.spec.normalized else v.bits

    def on_weights(self, weights: np.ndarray) -> float:
        if self.fast is not None:
            return self.value(self.fast.from_counts(self.fast.counts(self.fast.flat, weights)))
        rows = np.repeat(np.arange(self.d.n), weights.astype(np.int64))
        return self.value(estimate_measure(self.d.take(rows), self.spec, self.dag, self.ack))

    def on_column(self, col_index: int, new_col: np.ndarray) -> float:
        if self.fast is not None:
            f = self.fast
            if col_index in f.columns:
                pos = f.columns.index(col_index)
                old = self.d.codes[:, col_index]
                flat = f.flat + (new_col - old) * f.radix[pos]
            else:
                flat = f.flat
            return self.value(f.from_counts(f.counts(flat)))
        return self.value(estimate_measure(self.d.with_column(self.d.columns[col_index], new_col),
                                           self.spec, self.dag, self.ack))


def _run_replicates(fn: Callable[[int], float], count: int, workers: int) -> np.ndarray:
    """Evaluate ``fn(b)`` for b = 1..count; NaN marks a failed replicate."""

    def safe(b: int) -> float:
        try:
            return fn(b)
        except UndefinedConditional:
            return math.nan

    if workers <= 1:
        return np.array([safe(b) for b in range(1, count + 1)], dtype=float)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(safe, range(1, count + 1), chunksize=64)), dtype=float)


def _successful(values: np.ndarray, what: str) -> tuple[np.ndarray, int]:
    ok = values[~np.isnan(values)]
    failed = int(values.size - ok.size)
    if ok.size == 0:
        raise AllReplicatesFailed(f"all {values.size} {what} replicates hit an empty conditional")
    return np.sort(ok), failed


def _failure_warning(failed: int, total: int, what: str) -> tuple[str, ...]:
    if failed > FAILED_WARNING_FRACTION * total:
        return (f"{failed} of {total} {what} replicates failed (empty conditional cells) and were excluded",)
    return ()


def bootstrap_ci(
    d: Dataset,
    spec: MeasureSpec,
    dag: CausalDag,
    plan: ResamplePlan,
    workers: int = 1,
    acknowledge_confounding: bool = False,
) -> TestReport:
    """Percentile bootstrap interval over ``plan.replicates`` row resamples."""
    stat = _Statistic(d, spec, dag, acknowledge_confounding)
    point = stat.point()
    n = d.n

    def replicate(b: int) -> float:
        rows = bootstrap_rows(n, plan.seed, b)
        return stat.on_weights(np.bincount(rows, minlength=n).astype(float))

    values = _run_replicates(replicate, plan.replicates, workers)
    ok, failed = _successful(values, "bootstrap")
    lo, hi = (nearest_rank(ok, q) for q in plan.ci_levels)
    return TestReport(
        point=point,
        statistic=stat.value(point),
        plan=plan,
        ci=(lo, hi),
        failed_replicates=failed,
        bootstrap_failed=failed,
        warnings=_failure_warning(failed, plan.replicates, "bootstrap"),
        bootstrap_samples=values,
    )


def default_null_design(spec: MeasureSpec) -> tuple[tuple[str, str], Optional[str]]:
    """Link to break and grouping node for the null of ``spec``.

    Direct effects (SNDE, SCDE) break X -> Y within mediator groups; the
    indirect effect breaks Z -> Y within cause groups; total effects break
    X -> Y within groups of a single conditioned covariate, or globally.
    """
    r = spec.roles
    kind = spec.kind
    if kind in (Kind.SNDE, Kind.SCDE, Kind.COND_IF):
        if len(r.mediators) != 1:
            raise ModelError("the default null design needs exactly one mediator")
        return (r.cause, r.effect), r.mediators[0]
    if kind is Kind.SNIE:
        if len(r.mediators) != 1:
            raise ModelError("the default null design needs exactly one mediator")
        return (r.mediators[0], r.effect), r.cause
    if len(spec.conditioning) == 1:
        return (r.cause, r.effect), next(iter(spec.conditioning))
    if spec.conditioning:
        raise ModelError("give group_by explicitly when conditioning on several covariates")
    return (r.cause, r.effect), None


def permutation_test(
    d: Dataset,
    spec: MeasureSpec,
    dag: CausalDag,
    broken_link: Optional[tuple[str, str]] = None,
    group_by: Optional[str] = None,
    plan: ResamplePlan = ResamplePlan(),
    shuffle: str = "cause",
    workers: int = 1,
    acknowledge_confounding: bool = False,
) -> TestReport:
    """Null distribution from within-group shuffles that break ``broken_link``.

    Rows are split by the value of ``group_by`` (one group if None) and the
    link's cause-side column (``shuffle="effect"``: its effect side) is
    permuted independently inside each group, preserving every link that
    runs through the grouping node. The null threshold is the
    ``plan.null_cutoff`` percentile of the replicate estimates.
    """
    if broken_link is None:
        broken_link, group_by = default_null_design(spec)
    broken_link = tuple(broken_link)
    if broken_link not in set(dag.edges):
        raise UnknownLink(f"{broken_link[0]}->{broken_link[1]} is not an edge of the DAG")
    if shuffle not in ("cause", "effect"):
        raise ValidationError("shuffle must be 'cause' or 'effect'")
    shuffled = broken_link[0] if shuffle == "cause" else broken_link[1]
    if group_by is not None and group_by == shuffled:
        raise ValidationError("group_by must differ from the shuffled column")

    stat = _Statistic(d, spec, dag, acknowledge_confounding)
    point = stat.point()
    col_index = d.column_index(shuffled)
    col = d.codes[:, col_index]
    groups = row_groups(d, group_by)

    def replicate(b: int) -> float:
        return stat.on_column(col_index, shuffle_within_groups(col, groups, plan.seed, b))

    values = _run_replicates(replicate, plan.replicates, workers)
    ok, failed = _successful(values, "permutation")
    threshold = max(nearest_rank(ok, plan.null_cutoff), 0.0)
    value = stat.value(point)
    return TestReport(
        point=point,
        statistic=value,
        plan=plan,
        null_threshold=threshold,
        null_samples_summary=_summary(ok),
        significant=bool(value > threshold),
        failed_replicates=failed,
        permutation_failed=failed,
        warnings=_failure_warning(failed, plan.replicates, "permutation"),
        null_samples=values,
    )


def run_test(
    d: Dataset,
    spec: MeasureSpec,
    dag: CausalDag,
    plan: ResamplePlan,
    broken_link: Optional[tuple[str, str]] = None,
    group_by: Optional[str] = None,
    shuffle: str = "cause",
    workers: int = 1,
    acknowledge_confounding: bool = False,
) -> TestReport:
    """Bootstrap interval and permutation null for one measure, merged."""
    boot = bootstrap_ci(d, spec, dag, plan, workers, acknowledge_confounding)
    perm = permutation_test(d, spec, dag, broken_link, group_by, plan, shuffle, workers, acknowledge_confounding)
    return TestReport(
        point=boot.point,
        statistic=boot.statistic,
        plan=plan,
        ci=boot.ci,
        null_threshold=perm.null_threshold,
        null_samples_summary=perm.null_samples_summary,
        significant=perm.significant,
        failed_replicates=boot.failed_replicates + perm.failed_replicates,
        bootstrap_failed=boot.bootstrap_failed,
        permutation_failed=perm.permutation_failed,
        warnings=boot.warnings + perm.warnings,
        bootstrap_samples=boot.bootstrap_samples,
        null_samples=perm.null_samples,
    )
