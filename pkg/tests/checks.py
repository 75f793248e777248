"""Check routines shared by the unit tests and the acceptance suite."""

from __future__ import annotations

from infocause.measures import MeasureSpec, causal_strength, compute, information_flow
from infocause.model import query


def identity_gaps(m, x="X", y="Y", z="Z", include_cs=True):
    """Absolute gaps of the three expectation identities on one model.

    ste_mean: E_x STE = IF; scde_product_mean: sum p(x)p(z) SCDE = IF imposing Z;
    scde_joint_mean: sum p(x,z) SCDE = CS of X -> Y (only meaningful without covariates).
    """
    px = query(m, x)
    pz = query(m, z)
    pxz = query(m, (x, z)).probs
    ste_avg = sum(
        w * compute(m, MeasureSpec.make("STE", x, y, xv)).bits for xv, w in zip(px.support, px.probs)
    )
    gap1 = abs(ste_avg - information_flow(m, x, y).bits)
    scde = {}
    for i, xv in enumerate(px.support):
        for k, zv in enumerate(pz.support):
            spec = MeasureSpec.make("SCDE", x, y, xv, mediators=z, mediator_value=zv)
            scde[i, k] = compute(m, spec).bits
    a = sum(px.probs[i] * pz.probs[k] * v for (i, k), v in scde.items())
    gap2a = abs(a - information_flow(m, x, y, imposed=(z,)).bits)
    gaps = {"ste_mean": gap1, "scde_product_mean": gap2a}
    if include_cs:
        b = sum(pxz[i, k] * v for (i, k), v in scde.items())
        gaps["scde_joint_mean"] = abs(b - causal_strength(m, [(x, y)]).bits)
    return gaps


def shared_responsibility_ste(m, n, x1, k1):
    """STE of X1 = x1 on Y given that k1 of the other inhibitors are active."""
    condition = {f"X{i}": ("1" if i - 2 < k1 else "0") for i in range(2, n + 1)}
    return compute(m, MeasureSpec.make("STE", "X1", "Y", x1, condition=condition)).bits
