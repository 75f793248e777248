"""Specific information-theoretic causal effects on discrete causal DAGs."""

from infocause.errors import InfocauseError, ModelError, StatisticalError
from infocause.graph import (
    CausalDag,
    IdentifiabilityReport,
    Node,
    NodeRoleSpec,
    check_identifiability,
    cut_edges,
    d_separated,
    rule2_condition,
    topological_sort,
)
from infocause.prob import (
    JointTable,
    Pmf,
    bern,
    conditional_entropy,
    entropy,
    kl_divergence,
    mutual_information,
    specific_mi,
)
from infocause.model import (
    CausalModel,
    Cpt,
    intervene,
    joint_distribution,
    post_cutting,
    query,
    sample,
)
from infocause.measures import (
    MeasureSpec,
    MeasureValue,
    causal_strength,
    compute,
    information_flow,
    normalize,
    scde,
    snde,
    snie,
    ste,
)
from infocause.estimate import (
    Dataset,
    TimeSeries,
    detrend_harmonics,
    estimate_measure,
    mle_conditional,
    quantize_blocks,
)
from infocause.stats import ResamplePlan, TestReport, bootstrap_ci, permutation_test

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
