"""Command-line interface: ``infocause <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 3 statistically undefined result.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from infocause import io
from infocause.errors import InfocauseError
from infocause.estimate import (
    detrend_harmonics,
    estimate_measure,
    lagged_dataset,
    quantize_blocks,
)
from infocause.graph import NodeRoleSpec, check_identifiability, d_separated
from infocause.measures import Kind, MeasureSpec, compute
from infocause.model import sample
from infocause.stats import ResamplePlan, run_test


def _split(values) -> list[str]:
    out = []
    for v in values or []:
        out += [s.strip() for s in v.split(",") if s.strip()]
    return out


def _pairs(values, flag: str) -> dict[str, str]:
    out = {}
    for item in _split(values):
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"{flag} expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _params(args) -> dict[str, float]:
    try:
        return {k: float(v) for k, v in _pairs(args.param, "--param").items()}
    except ValueError:
        raise argparse.ArgumentTypeError("--param values must be numbers") from None


def _edge(text: str) -> tuple[str, str]:
    if "->" not in text:
        raise argparse.ArgumentTypeError(f"expected an edge A->B, got {text!r}")
    a, b = text.split("->", 1)
    return a.strip(), b.strip()


def _measure_spec(args) -> MeasureSpec:
    mediators = _split(args.mediator)
    condition = _pairs(args.condition, "--condition")
    mediator_value = None
    if args.mediator_value:
        mv = _split(args.mediator_value)
        mediator_value = _pairs(mv, "--mediator-value") if any("=" in v for v in mv) else mv[0]
    kind = Kind.parse(args.measure)
    extra = {}
    if kind in (Kind.IF, Kind.COND_IF):
        extra["imposed"] = tuple(_split(args.imposed))
    if kind is Kind.CS:
        extra["cut"] = tuple(_edge(e) for e in _split(args.cut))
    return MeasureSpec.make(
        kind,
        args.cause,
        args.effect,
        args.value,
        mediators=mediators,
        mediator_value=mediator_value,
        condition=condition,
        covariates=_split(args.covariates),
        normalized=args.normalized,
        local_baseline=args.local_baseline == "on",
        **extra,
    )


def _add_measure_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("measure")
    g.add_argument("--measure", required=True, choices=["ste", "scde", "snde", "snie", "if", "cond_if", "cs"],
                   type=str.lower)
    g.add_argument("--cause", required=True)
    g.add_argument("--value", help="cause state for the specific measures")
    g.add_argument("--effect", required=True)
    g.add_argument("--mediator", action="append", help="mediator node(s); repeat or comma-separate")
    g.add_argument("--mediator-value", action="append",
                   help="SCDE mediator state, or name=state per mediator")
    g.add_argument("--covariates", action="append", help="observed covariate node(s)")
    g.add_argument("--condition", nargs="+", action="extend", help="covariate assignments name=state")
    g.add_argument("--normalized", action="store_true")
    g.add_argument("--local-baseline", choices=["on", "off"], default="on")
    g.add_argument("--imposed", action="append", help="imposed nodes for if/cond_if")
    g.add_argument("--cut", action="append", help="edges A->B to cut for cs")


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument("--output", help="write to this path instead of standard output")


def _emit(args, text: str) -> None:
    if getattr(args, "output", None):
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _value_fields(spec: MeasureSpec, value) -> dict:
    comps = value.components or {}
    return {
        "spec": spec.describe(),
        "value_bits": value.bits,
        "normalized": value.normalized,
        "identifiability": io.identifiability_doc(comps.get("identifiability")),
        "causal_interpretation": comps.get("causal_interpretation"),
    }


def cmd_compute(args) -> int:
    model = io.parse_model(args.model, _params(args))
    spec = _measure_spec(args)
    value = compute(model, spec)
    _emit(args, io.dump_report(io.make_report("compute", **_value_fields(spec, value))))
    return 0


def _load_data(args):
    dag = io.parse_dag(args.dag)
    return io.read_dataset(args.data, dag), dag


def cmd_estimate(args) -> int:
    d, dag = _load_data(args)
    spec = _measure_spec(args)
    value = estimate_measure(d, spec, dag, args.acknowledge_confounding)
    fields = _value_fields(spec, value)
    warnings = []
    if value.components.get("causal_interpretation") is False:
        warnings.append("identifiability check failed; the value is predictive, not causal")
    _emit(args, io.dump_report(io.make_report("estimate", warnings=warnings, **fields)))
    return 0


def cmd_test(args) -> int:
    d, dag = _load_data(args)
    spec = _measure_spec(args)
    plan = ResamplePlan.from_alpha(args.alpha, args.replicates, args.seed)
    link = _edge(args.break_link) if args.break_link else None
    if link is None and args.group_by:
        raise argparse.ArgumentTypeError("--group-by needs --break")
    rep = run_test(d, spec, dag, plan, link, args.group_by or None, args.shuffle, args.workers,
                   args.acknowledge_confounding)
    fields = _value_fields(spec, rep.point)
    warnings = list(rep.warnings)
    if rep.point.components.get("causal_interpretation") is False:
        warnings.append("identifiability check failed; the value is predictive, not causal")
    report = io.make_report(
        "test",
        statistic_scale="normalized" if spec.normalized else "bits",
        ci=rep.ci,
        null_threshold=rep.null_threshold,
        null_samples_summary=rep.null_samples_summary,
        significant=rep.significant,
        replicates=plan.replicates,
        failed_replicates=rep.failed_replicates,
        seed=plan.seed,
        warnings=warnings,
        **fields,
    )
    _emit(args, io.dump_report(report))
    return 0


def cmd_simulate(args) -> int:
    model = io.parse_model(args.model, _params(args))
    _emit(args, sample(model, args.n, args.seed).to_csv())
    return 0


def _graph(args):
    if args.model:
        return io.parse_dag(args.model)
    if args.dag:
        return io.parse_dag(args.dag)
    raise argparse.ArgumentTypeError("give --model or --dag")


def cmd_dsep(args) -> int:
    dag = _graph(args)
    a, b, c = _split(args.a), _split(args.b), _split(args.given)
    result = d_separated(dag, a, b, c)
    _emit(args, json.dumps({"a": a, "b": b, "given": c, "d_separated": result}, indent=2) + "\n")
    return 0


def cmd_identify(args) -> int:
    dag = _graph(args)
    roles = NodeRoleSpec(args.cause, args.effect, tuple(_split(args.mediator)), tuple(_split(args.covariates)))
    rep = check_identifiability(dag, roles)
    doc = {"cause": roles.cause, "effect": roles.effect, "mediators": list(roles.mediators),
           "observed_covariates": list(roles.observed_covariates), **io.identifiability_doc(rep)}
    _emit(args, json.dumps(doc, indent=2) + "\n")
    return 0


def _thresholds(text: str):
    if text == "empirical-tertiles":
        return text
    try:
        low, high = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("--thresholds is 'empirical-tertiles' or 'low,high'") from None
    return low, high


def cmd_pipeline(args) -> int:
    ts = detrend_harmonics(io.read_series(args.data), args.period, args.harmonics)
    q = quantize_blocks(ts, args.block_days, _thresholds(args.thresholds))
    if args.lagged:
        cause = None
        if args.cause_series:
            cs = detrend_harmonics(io.read_series(args.cause_series), args.period, args.harmonics)
            cause = quantize_blocks(cs, args.block_days, _thresholds(args.thresholds)).labels
            if len(cause) != len(q.labels):
                raise argparse.ArgumentTypeError("cause and effect series give different block counts")
        text = lagged_dataset(q.labels, cause).to_csv()
    else:
        lines = [args.name] + [str(int(v)) for v in q.labels]
        text = "\n".join(lines) + "\n"
    _emit(args, text)
    low, high = q.thresholds
    print(f"thresholds: low={low!r} high={high!r}; blocks={len(q.labels)}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infocause", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="exact measure on a model file")
    p.add_argument("--model", required=True, help="model JSON path or fixture:NAME")
    p.add_argument("--param", action="append", help="override model params, name=value")
    _add_measure_args(p)
    _add_output(p)
    p.set_defaults(func=cmd_compute)

    for name, helptext in (("estimate", "plug-in estimate from a CSV"),
                           ("test", "bootstrap interval and permutation test")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--data", required=True)
        p.add_argument("--dag", required=True, help="DAG or model JSON declaring states")
        p.add_argument("--acknowledge-confounding", action="store_true",
                       help="estimate even when the identifiability check fails")
        _add_measure_args(p)
        _add_output(p)
        if name == "test":
            p.add_argument("--replicates", type=int, default=10000)
            p.add_argument("--seed", type=int, required=True)
            p.add_argument("--alpha", type=float, default=0.05)
            p.add_argument("--workers", type=int, default=1)
            p.add_argument("--break", dest="break_link", help="link A->B broken under the null")
            p.add_argument("--group-by", help="node whose groups are shuffled separately")
            p.add_argument("--shuffle", choices=["cause", "effect"], default="cause",
                           help="which end of the broken link to permute")
            p.set_defaults(func=cmd_test)
        else:
            p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("simulate", help="sample a model to CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--param", action="append")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    _add_output(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dsep", help="d-separation query")
    p.add_argument("--model")
    p.add_argument("--dag")
    p.add_argument("--a", action="append", required=True)
    p.add_argument("--b", action="append", required=True)
    p.add_argument("--given", action="append")
    _add_output(p)
    p.set_defaults(func=cmd_dsep)

    p = sub.add_parser("identify", help="identifiability witnesses for a role assignment")
    p.add_argument("--model")
    p.add_argument("--dag")
    p.add_argument("--cause", required=True)
    p.add_argument("--effect", required=True)
    p.add_argument("--mediator", action="append")
    p.add_argument("--covariates", action="append")
    _add_output(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("pipeline", help="detrend, block-average and quantize a day,value series")
    p.add_argument("--data", required=True)
    p.add_argument("--block-days", type=int, default=14)
    p.add_argument("--harmonics", type=int, default=6)
    p.add_argument("--period", type=float, default=365.25)
    p.add_argument("--thresholds", default="empirical-tertiles")
    p.add_argument("--name", default="value", help="column name for the categorical output")
    p.add_argument("--lagged", action="store_true", help="emit (S, T) lag pairs, or (E, S, T) with --cause-series")
    p.add_argument("--cause-series", help="second day,value CSV quantized as the cause E")
    _add_output(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfocauseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except argparse.ArgumentTypeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
