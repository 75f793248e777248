import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infocause.data import Dataset
from infocause.errors import AllReplicatesFailed, UnknownLink, ValidationError
from infocause.fixtures import caused_uncertainty, random_mediation_model
from infocause.graph import CausalDag
from infocause.measures import MeasureSpec, compute
from infocause.model import CausalModel, sample
from infocause.stats import (
    ResamplePlan,
    bootstrap_ci,
    bootstrap_rows,
    default_null_design,
    nearest_rank,
    permutation_test,
    row_groups,
    run_test,
    shuffle_within_groups,
)

B = ("0", "1")
MED = CausalDag.from_spec({"X": B, "Z": B, "Y": B}, [("X", "Z"), ("X", "Y"), ("Z", "Y")])
STE_X0_Z0 = MeasureSpec.make("STE", "X", "Y", "0", condition={"Z": "0"})


def null_model(p_x=0.5):
    # X -> Y is an edge of the DAG but Y's table ignores X
    dag = CausalDag.from_spec({"X": B, "Y": B}, [("X", "Y")])
    return CausalModel.from_tables(dag, {"X": ((), [1 - p_x, p_x]), "Y": (("X",), [[0.7, 0.3], [0.7, 0.3]])})


def test_plan_validation():
    with pytest.raises(ValidationError):
        ResamplePlan(replicates=0)
    with pytest.raises(ValidationError):
        ResamplePlan(ci_levels=(0.9, 0.1))
    with pytest.raises(ValidationError):
        ResamplePlan(null_cutoff=1.0)
    assert ResamplePlan.from_alpha(0.05, 10, 1).ci_levels == (0.05, 0.95)


def test_nearest_rank():
    v = np.arange(1.0, 11.0)
    assert nearest_rank(v, 0.05) == 1.0
    assert nearest_rank(v, 0.95) == 10.0
    assert nearest_rank(v, 0.5) == 5.0
    # 0.95 * 20 must be exactly 19, not 19.000000000000004
    assert nearest_rank(np.arange(1.0, 21.0), 0.95) == 19.0
    assert nearest_rank(np.array([3.0]), 0.05) == 3.0


def test_identical_rows_ci_is_zero():
    d = Dataset.from_labels(("X", "Z", "Y"), (B, B, B), [("1", "0", "1")] * 40)
    r = bootstrap_ci(d, MeasureSpec.make("STE", "X", "Y", "1"), MED, ResamplePlan(200, 3))
    assert r.ci == (0.0, 0.0)


def test_single_replicate_ci():
    m = random_mediation_model(6)
    d = sample(m, 3000, 1)
    s = MeasureSpec.make("STE", "X", "Y", "0")
    r = bootstrap_ci(d, s, m.dag, ResamplePlan(1, 9))
    v1 = r.bootstrap_samples[0]
    assert r.ci == (v1, v1)


def test_bootstrap_rows_have_n_rows():
    for n in (1, 7, 1000):
        for b in (1, 2, 50):
            rows = bootstrap_rows(n, 11, b)
            assert rows.size == n and rows.min() >= 0 and rows.max() < n


@given(st.integers(0, 2**32), st.integers(1, 200))
@settings(max_examples=50, deadline=None)
def test_shuffle_preserves_group_multisets(seed, b):
    d = sample(random_mediation_model(8), 600, 4)
    groups = row_groups(d, "Z")
    col = d.column("X")
    out = shuffle_within_groups(col, groups, seed, b)
    for _, rows in groups:
        assert sorted(out[rows]) == sorted(col[rows])
    assert sum(rows.size for _, rows in groups) == d.n


def test_determinism_across_workers():
    m = random_mediation_model(2)
    d = sample(m, 5000, 12)
    s = MeasureSpec.make("SNDE", "X", "Y", "1", mediators="Z", normalized=True)
    plan = ResamplePlan(300, 7)
    a = run_test(d, s, m.dag, plan, workers=1)
    b = run_test(d, s, m.dag, plan, workers=4)
    assert a.ci == b.ci and a.null_threshold == b.null_threshold and a.significant == b.significant
    assert np.array_equal(a.bootstrap_samples, b.bootstrap_samples, equal_nan=True)
    assert np.array_equal(a.null_samples, b.null_samples, equal_nan=True)


def test_constant_effect_not_significant():
    d = Dataset.from_labels(("X", "Z", "Y"), (B, B, B), [(x, z, "0") for x in B for z in B] * 10)
    r = permutation_test(d, MeasureSpec.make("STE", "X", "Y", "1"), MED, plan=ResamplePlan(100, 1))
    assert r.null_threshold == 0.0 and r.statistic == 0.0 and r.significant is False


def test_unknown_link_and_bad_group():
    m = random_mediation_model(2)
    d = sample(m, 500, 1)
    s = MeasureSpec.make("STE", "X", "Y", "0")
    with pytest.raises(UnknownLink):
        permutation_test(d, s, m.dag, broken_link=("Y", "X"), plan=ResamplePlan(10, 1))
    with pytest.raises(ValidationError):
        permutation_test(d, s, m.dag, broken_link=("X", "Y"), group_by="X", plan=ResamplePlan(10, 1))


def test_failed_replicates_counted_and_warned():
    rows = [("0", "0", "0"), ("0", "1", "1"), ("1", "0", "1"), ("1", "1", "0")]
    d = Dataset.from_labels(("X", "Z", "Y"), (B, B, B), rows)
    s = MeasureSpec.make("SNDE", "X", "Y", "0", mediators="Z")
    r = bootstrap_ci(d, s, MED, ResamplePlan(200, 1))
    assert r.failed_replicates == np.isnan(r.bootstrap_samples).sum() > 0.01 * 200
    assert r.warnings


def test_all_replicates_failed():
    d = Dataset.from_labels(("X", "Z", "Y"), (B, B, B), [("0", "0", "1"), ("1", "0", "1")])
    # a seed whose only replicate never draws the X=0 row
    seed = next(k for k in range(100) if 0 not in bootstrap_rows(2, k, 1))
    with pytest.raises(AllReplicatesFailed):
        bootstrap_ci(d, MeasureSpec.make("STE", "X", "Y", "0"), MED, ResamplePlan(1, seed))


def test_default_null_designs():
    assert default_null_design(MeasureSpec.make("SNDE", "X", "Y", "0", mediators="Z")) == (("X", "Y"), "Z")
    assert default_null_design(MeasureSpec.make("SNIE", "X", "Y", "0", mediators="Z")) == (("Z", "Y"), "X")
    assert default_null_design(STE_X0_Z0) == (("X", "Y"), "Z")
    assert default_null_design(MeasureSpec.make("STE", "X", "Y", "0")) == (("X", "Y"), None)


def test_strong_link_significant_seed42():
    m = caused_uncertainty()
    d = sample(m, 50_000, 42)
    r = permutation_test(d, STE_X0_Z0, m.dag, plan=ResamplePlan(500, 42))
    assert r.significant is True
    assert r.statistic > 0.4 and r.null_threshold < 0.01


def test_null_link_usually_not_significant():
    m = null_model()
    s = MeasureSpec.make("STE", "X", "Y", "1")
    hits = sum(
        permutation_test(sample(m, 2000, seed), s, m.dag, plan=ResamplePlan(200, seed)).significant
        for seed in range(40)
    )
    assert hits <= 6


@pytest.mark.xfail(strict=True, reason="this seed's estimate sits 1.8 sd above the exact value; "
                   "coverage over many seeds is checked below")
def test_caused_uncertainty_ci_seed42_brackets_exact():
    m = caused_uncertainty()
    d = sample(m, 200_000, 42)
    r = bootstrap_ci(d, STE_X0_Z0, m.dag, ResamplePlan(2000, 42))
    exact = compute(m, STE_X0_Z0).bits
    assert r.ci[0] <= exact <= r.ci[1]


def test_caused_uncertainty_ci_coverage():
    m = caused_uncertainty()
    exact = compute(m, STE_X0_Z0).bits
    covered = 0
    for seed in range(40):
        d = sample(m, 20_000, 1000 + seed)
        lo, hi = bootstrap_ci(d, STE_X0_Z0, m.dag, ResamplePlan(400, seed)).ci
        assert lo <= hi
        covered += lo <= exact <= hi
    # nominal 90% two-sided interval
    assert covered >= 30
