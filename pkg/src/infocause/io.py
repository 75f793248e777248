"""Model, dataset and report files.

Model files are JSON::

    {"params": {"eps": 0.1},
     "nodes": [{"name": "X", "states": ["0", "1"], "parents": [],
                "cpt": [[0.5, 0.5]]},
               {"name": "Y", "states": ["0", "1"], "parents": ["X"],
                "cpt": [["1 - eps", "eps"], ["eps", "1 - eps"]]}]}

CPT rows follow mixed-radix order over ``parents`` (first parent most
significant). Entries are numbers or arithmetic expressions over ``params``.
A DAG file is the same layout with ``cpt`` omitted.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np

from infocause.data import Dataset
from infocause.errors import ParseError, UnknownNode, ValidationError
from infocause.graph import CausalDag, IdentifiabilityReport, Node
from infocause.model import CausalModel, Cpt
from infocause.prob import NORM_TOL

FIXTURE_PREFIX = "fixture:"

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def eval_expression(text: str, params: Mapping[str, float]) -> float:
    """Evaluate ``+ - * / **`` over numbers and named params, nothing else."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in params:
                raise ParseError(f"unknown parameter {node.id!r} in {text!r}")
            return float(params[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ParseError(f"unsupported expression {text!r}")

    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError:
        raise ParseError(f"cannot parse expression {text!r}") from None
    try:
        return ev(tree)
    except ZeroDivisionError:
        raise ParseError(f"division by zero in {text!r}") from None


def resolve_path(path: Union[str, Path]) -> Path:
    """Plain paths pass through; ``fixture:NAME`` names a bundled model."""
    s = str(path)
    if s.startswith(FIXTURE_PREFIX):
        from infocause.fixtures import bundled_names, fixture_path

        name = s[len(FIXTURE_PREFIX):]
        if name not in bundled_names():
            raise ParseError(f"no bundled fixture {name!r}; available: {', '.join(bundled_names())}")
        return fixture_path(name)
    return Path(s)


def _load_json(source) -> dict:
    if isinstance(source, Mapping):
        return dict(source)
    path = resolve_path(source)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"file not found: {path}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    return doc


def _node_entries(doc: dict) -> list[dict]:
    nodes = doc.get("nodes")
    if not isinstance(nodes, list) or not nodes:
        raise ParseError("model needs a nonempty 'nodes' list")
    for i, nd in enumerate(nodes):
        if not isinstance(nd, dict) or "name" not in nd or "states" not in nd:
            raise ParseError(f"node entry {i} needs 'name' and 'states'")
        if not isinstance(nd["states"], list) or not nd["states"]:
            raise ParseError(f"node {nd['name']!r}: 'states' must be a nonempty list")
        if not isinstance(nd.get("parents", []), list):
            raise ParseError(f"node {nd['name']!r}: 'parents' must be a list")
    return nodes


def _dag_from_doc(doc: dict) -> CausalDag:
    nodes = _node_entries(doc)
    names = {str(nd["name"]) for nd in nodes}
    edges = []
    for nd in nodes:
        for p in nd.get("parents", []):
            if str(p) not in names:
                raise UnknownNode(f"node {nd['name']!r} lists undeclared parent {p!r}")
            edges.append((str(p), str(nd["name"])))
    return CausalDag(tuple(Node(str(nd["name"]), tuple(nd["states"])) for nd in nodes), tuple(edges))


def parse_dag(source) -> CausalDag:
    """DAG from a model or DAG file (CPTs, if present, are ignored)."""
    return _dag_from_doc(_load_json(source))


def parse_model(source, params: Optional[Mapping[str, float]] = None) -> CausalModel:
    """Validated model from a file path, ``fixture:NAME`` or a parsed dict.

    ``params`` overrides the file's ``params`` block.
    """
    doc = _load_json(source)
    file_params = doc.get("params", {}) or {}
    if not isinstance(file_params, dict):
        raise ParseError("'params' must be an object")
    env = {str(k): float(v) for k, v in {**file_params, **(params or {})}.items()}
    dag = _dag_from_doc(doc)
    cpts = {}
    for nd in _node_entries(doc):
        name = str(nd["name"])
        parents = tuple(str(p) for p in nd.get("parents", []))
        if "cpt" not in nd:
            raise ParseError(f"node {name!r} has no 'cpt'")
        rows = nd["cpt"]
        if rows and not isinstance(rows[0], list):
            rows = [rows]
        n_rows = math.prod(dag.cardinality(p) for p in parents)
        card = dag.cardinality(name)
        if len(rows) != n_rows:
            raise ValidationError(f"node {name!r}: {len(rows)} CPT rows, expected {n_rows}")
        table = np.empty((n_rows, card))
        for r, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != card:
                raise ValidationError(f"node {name!r} row {r}: expected {card} entries")
            for j, v in enumerate(row):
                try:
                    table[r, j] = eval_expression(v, env) if isinstance(v, str) else float(v)
                except (TypeError, ValueError):
                    raise ParseError(f"node {name!r} row {r} entry {j}: not a number: {v!r}") from None
            if np.any(table[r] < 0) or not np.all(np.isfinite(table[r])):
                raise ValidationError(f"node {name!r} row {r}: entries must be finite and nonnegative")
            if abs(table[r].sum() - 1.0) > NORM_TOL:
                raise ValidationError(f"node {name!r} row {r} sums to {table[r].sum()!r}, not 1")
        shape = tuple(dag.cardinality(p) for p in parents) + (card,)
        cpts[name] = Cpt(name, parents, table.reshape(shape))
    return CausalModel(dag, cpts)


def model_to_doc(m: CausalModel, params: Optional[Mapping[str, float]] = None) -> dict:
    nodes = []
    for node in m.dag.nodes:
        cpt = m.cpts[node.name]
        rows = cpt.table.reshape(-1, node.cardinality).tolist()
        nodes.append({"name": node.name, "states": list(node.states), "parents": list(cpt.parents), "cpt": rows})
    doc = {"params": dict(params)} if params else {}
    doc["nodes"] = nodes
    return doc


def read_dataset(path, dag: CausalDag) -> Dataset:
    """CSV with a header of node names; state labels as declared in ``dag``."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"file not found: {path}") from None
    return Dataset.from_csv(text, {n.name: n.states for n in dag.nodes})


def read_series(path):
    """Raw ``day,value`` CSV as a :class:`TimeSeries`."""
    import csv

    from infocause.estimate import TimeSeries

    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ParseError(f"file not found: {path}") from None
    rows = list(csv.reader(text.splitlines()))
    if not rows or [h.strip() for h in rows[0]][:2] != ["day", "value"]:
        raise ParseError("series CSV needs a 'day,value' header")
    days, values = [], []
    for i, r in enumerate(rows[1:], start=1):
        if not r:
            continue
        if len(r) < 2 or r[0].strip() == "" or r[1].strip() == "":
            raise ValidationError(f"series row {i} has a missing cell")
        try:
            days.append(float(r[0]))
            values.append(float(r[1]))
        except ValueError:
            raise ParseError(f"series row {i}: non-numeric cell") from None
    return TimeSeries(np.array(days), np.array(values))


def encode_number(v):
    """Floats keep their shortest round-trip repr; infinities become strings."""
    if v is None:
        return None
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return v


def decode_number(v):
    if isinstance(v, str):
        return float(v)
    return v


def identifiability_doc(evidence) -> Optional[dict]:
    if evidence is None:
        return None
    if isinstance(evidence, IdentifiabilityReport):
        return {
            "identifiable": evidence.identifiable,
            "witness_u1": None if evidence.witness_u1 is None else list(evidence.witness_u1),
            "witness_u2": None if evidence.witness_u2 is None else list(evidence.witness_u2),
            "checked_subsets": evidence.checked_subsets,
            "mediation_shape": evidence.mediation_shape,
            "note": evidence.note,
        }
    return dict(evidence)


REPORT_KEYS = (
    "tool",
    "version",
    "command",
    "spec",
    "value_bits",
    "normalized",
    "statistic_scale",
    "ci",
    "null_threshold",
    "null_samples_summary",
    "significant",
    "replicates",
    "failed_replicates",
    "seed",
    "identifiability",
    "causal_interpretation",
    "warnings",
)


def make_report(command: str, **fields) -> dict:
    """Report dict with every key present, in fixed order."""
    from infocause import __version__

    unknown = set(fields) - set(REPORT_KEYS)
    if unknown:
        raise ValueError(f"unknown report fields {sorted(unknown)}")
    base = {k: None for k in REPORT_KEYS}
    base.update(tool="infocause", version=__version__, command=command, warnings=[])
    for k, v in fields.items():
        base[k] = v
    for k in ("value_bits", "normalized", "null_threshold"):
        base[k] = encode_number(base[k])
    if base["ci"] is not None:
        base["ci"] = [encode_number(v) for v in base["ci"]]
    if base["null_samples_summary"] is not None:
        base["null_samples_summary"] = [encode_number(v) for v in base["null_samples_summary"]]
    return base


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def load_report(text: str) -> dict:
    doc = json.loads(text)
    for k in ("value_bits", "normalized", "null_threshold"):
        doc[k] = decode_number(doc.get(k))
    if doc.get("ci") is not None:
        doc["ci"] = [decode_number(v) for v in doc["ci"]]
    return doc
