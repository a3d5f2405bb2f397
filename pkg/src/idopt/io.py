"""Instance JSON serialization.

Format (exact keys):
    {"vertices": [{"id": int, "label": str, "kind": "chance"|"decision"|"utility",
                   "card": int}],
     "arcs": [[int, int]],
     "cpts": {"<id>": [flat row-major floats]},
     "rewards": {"<id>": [floats]}}
"""

from __future__ import annotations

import json
from typing import TextIO, Union

import numpy as np

from .diagram import InfluenceDiagram, Parametrization
from .errors import InvalidInstance
from .graphs import DiGraph


def dumps_instance(id_: InfluenceDiagram, p: Parametrization) -> str:
    obj = {
        "vertices": [
            {"id": v, "label": id_.label(v), "kind": id_.kind(v),
             "card": p.card(v)}
            for v in id_.vertices
        ],
        "arcs": [[u, v] for u, v in id_.graph.arcs],
        "cpts": {str(v): [float(x) for x in p.cpts[v].reshape(-1)]
                 for v in id_.stochastic},
        "rewards": {str(v): [float(x) for x in p.rewards[v]]
                    for v in id_.utilities},
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def loads_instance(text: str) -> tuple[InfluenceDiagram, Parametrization]:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidInstance(f"not valid JSON: {e}") from e
    for key in ("vertices", "arcs", "cpts", "rewards"):
        if key not in obj:
            raise InvalidInstance(f"missing key {key!r}")
    ids = [int(rec["id"]) for rec in obj["vertices"]]
    if len(set(ids)) != len(ids):
        raise InvalidInstance("duplicate vertex ids")
    labels = {int(rec["id"]): str(rec["label"]) for rec in obj["vertices"]}
    if len(set(labels.values())) != len(labels):
        raise InvalidInstance("vertex labels must be unique")
    kinds = {int(rec["id"]): str(rec["kind"]) for rec in obj["vertices"]}
    cards = {int(rec["id"]): int(rec["card"]) for rec in obj["vertices"]}
    graph = DiGraph(ids, [(int(u), int(v)) for u, v in obj["arcs"]], labels)
    id_ = InfluenceDiagram(graph, kinds)
    p = Parametrization(
        cards,
        {int(k): np.asarray(v, dtype=float) for k, v in obj["cpts"].items()},
        {int(k): np.asarray(v, dtype=float) for k, v in obj["rewards"].items()})
    p.validate(id_)
    return id_, p


def save_instance(path_or_file: Union[str, TextIO], id_: InfluenceDiagram,
                  p: Parametrization) -> None:
    text = dumps_instance(id_, p)
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as f:
            f.write(text)


def load_instance(path_or_file: Union[str, TextIO]) -> tuple[InfluenceDiagram, Parametrization]:
    if hasattr(path_or_file, "read"):
        return loads_instance(path_or_file.read())
    with open(path_or_file) as f:
        return loads_instance(f.read())
