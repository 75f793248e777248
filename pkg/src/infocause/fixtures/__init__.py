"""Reference models: the worked examples and seeded random mediation models.

The bundled JSON files in this directory hold the same models in the model
file layout read by :func:`infocause.io.parse_model`.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

from infocause.graph import CausalDag, Node
from infocause.model import CausalModel

BINARY = ("0", "1")


def fixture_path(name: str) -> Path:
    """Path of a bundled model file, e.g. ``fixture_path("chain")``."""
    return Path(str(resources.files(__name__).joinpath(f"{name}.json")))


def bundled_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__name__).iterdir() if p.name.endswith(".json"))


def example1() -> CausalModel:
    """X -> Y with X ~ Bern(1/7), Y | X=0 ~ Bern(1/10), Y | X=1 ~ Bern(8/10)."""
    dag = CausalDag.from_spec({"X": BINARY, "Y": BINARY}, [("X", "Y")])
    return CausalModel.from_tables(dag, {
        "X": ((), [6 / 7, 1 / 7]),
        "Y": (("X",), [[0.9, 0.1], [0.2, 0.8]]),
    })


def chain(eps: float) -> CausalModel:
    """Binary message X -> Z -> Y, flipped at each hop with probability ``eps``."""
    dag = CausalDag.from_spec({"X": BINARY, "Z": BINARY, "Y": BINARY}, [("X", "Z"), ("Z", "Y")])
    flip = [[1 - eps, eps], [eps, 1 - eps]]
    return CausalModel.from_tables(dag, {
        "X": ((), [0.5, 0.5]),
        "Z": (("X",), flip),
        "Y": (("Z",), flip),
    })


def caused_uncertainty() -> CausalModel:
    """X -> Y <- Z; Z = 1 makes Y a fair coin regardless of X."""
    dag = CausalDag.from_spec({"X": BINARY, "Z": BINARY, "Y": BINARY}, [("X", "Y"), ("Z", "Y")])
    return CausalModel.from_tables(dag, {
        "X": ((), [0.5, 0.5]),
        "Z": ((), [0.9, 0.1]),
        # rows (x, z): (0,0), (0,1), (1,0), (1,1)
        "Y": (("X", "Z"), [[0.9, 0.1], [0.5, 0.5], [0.1, 0.9], [0.5, 0.5]]),
    })


def shared_responsibility(n: int, eps: float) -> CausalModel:
    """n iid Bern(eps) inhibitors X1..Xn with Y ~ Bern(2**-K), K = sum of X."""
    names = [f"X{i}" for i in range(1, n + 1)]
    dag = CausalDag.from_spec({**{x: BINARY for x in names}, "Y": BINARY}, [(x, "Y") for x in names])
    tables = {x: ((), [1 - eps, eps]) for x in names}
    k = np.indices((2,) * n).reshape(n, -1).sum(axis=0)
    p1 = 0.5 ** k
    tables["Y"] = (tuple(names), np.stack([1 - p1, p1], axis=-1))
    return CausalModel.from_tables(dag, tables)


def random_mediation_model(
    seed: int,
    max_card: int = 3,
    covariate: bool = False,
    direct_edge: bool = True,
    mediator_edge: bool = True,
    concentration: float = 1.0,
) -> CausalModel:
    """Seeded X -> Z -> Y, X -> Y model with Dirichlet rows.

    Cardinalities are drawn from 2..max_card. With ``covariate=True`` a root
    U feeds X, Z and Y. ``direct_edge`` / ``mediator_edge`` drop X -> Y /
    X -> Z respectively.
    """
    rng = np.random.default_rng(seed)
    names = (["U"] if covariate else []) + ["X", "Z", "Y"]
    cards = {n: int(rng.integers(2, max_card + 1)) for n in names}
    edges = []
    if covariate:
        edges += [("U", "X"), ("U", "Z"), ("U", "Y")]
    if mediator_edge:
        edges.append(("X", "Z"))
    if direct_edge:
        edges.append(("X", "Y"))
    edges.append(("Z", "Y"))
    dag = CausalDag(tuple(Node(n, tuple(str(s) for s in range(cards[n]))) for n in names), tuple(edges))
    tables = {}
    for n in names:
        parents = dag.parents(n)
        shape = tuple(cards[p] for p in parents)
        rows = rng.dirichlet(np.full(cards[n], concentration), size=shape or None)
        tables[n] = (parents, rows)
    return CausalModel.from_tables(dag, tables)
