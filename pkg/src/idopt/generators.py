"""Random instance generators for the mdp, pomdp_lm and chess families.

Graph shapes follow the corresponding figures stage by stage. State-space
sizes follow the experiment convention: vertices in fa(decisions) get
cardinality omega_a, everything else omega_s. CPT rows are drawn iid
uniform on [0,1] and normalized; rewards are uniform on [0,10].

Randomness is reproducible across runs and platforms: every vertex draws
from its own PCG64 stream keyed as SeedSequence(entropy=seed,
spawn_key=(vertex_id,)), CPT rows first (row-major), then the reward
vector for utility vertices.
"""

from __future__ import annotations

import numpy as np

from .diagram import (CHANCE, DECISION, UTILITY, InfluenceDiagram,
                      Parametrization)
from .errors import InvalidInstance
from .graphs import DiGraph
from .inference import deterministic_policy_count

FAMILIES = ("mdp", "pomdp_lm", "chess")


class _Builder:
    def __init__(self):
        self.labels: dict[int, str] = {}
        self.kinds: dict[int, str] = {}
        self.ids: dict[str, int] = {}
        self.arcs: list[tuple[int, int]] = []

    def add(self, name: str, kind: str, parents: tuple[str, ...] = ()) -> int:
        i = len(self.labels)
        self.labels[i] = name
        self.kinds[i] = kind
        self.ids[name] = i
        self.arcs.extend((self.ids[p], i) for p in parents)
        return i

    def diagram(self) -> InfluenceDiagram:
        g = DiGraph(range(len(self.labels)), self.arcs, self.labels)
        return InfluenceDiagram(g, self.kinds)


def _mdp_graph(horizon: int) -> _Builder:
    b = _Builder()
    b.add("s1", CHANCE)
    for t in range(1, horizon + 1):
        b.add(f"a{t}", DECISION, (f"s{t}",))
        b.add(f"s{t + 1}", CHANCE, (f"s{t}", f"a{t}"))
        b.add(f"r{t}", UTILITY, (f"s{t}", f"a{t}", f"s{t + 1}"))
    return b


def _pomdp_lm_graph(horizon: int) -> _Builder:
    b = _Builder()
    b.add("s1", CHANCE)
    for t in range(1, horizon + 1):
        b.add(f"o{t}", CHANCE, (f"s{t}",))
        b.add(f"a{t}", DECISION, (f"o{t}",))
        b.add(f"r{t}", UTILITY, (f"s{t}", f"a{t}"))
        b.add(f"s{t + 1}", CHANCE, (f"s{t}", f"a{t}"))
    b.add(f"o{horizon + 1}", CHANCE, (f"s{horizon + 1}",))
    return b


def _chess_graph(horizon: int) -> _Builder:
    b = _Builder()
    b.add("s1", CHANCE)
    for t in range(1, horizon + 1):
        b.add(f"o{t}", CHANCE, (f"s{t}",))
        b.add(f"u{t}", CHANCE, (f"o{t}",))
        b.add(f"a{t}", DECISION, (f"u{t}",))
        b.add(f"v{t}", CHANCE, (f"o{t}", f"a{t}"))
        b.add(f"r{t}", UTILITY, (f"v{t}",))
        b.add(f"s{t + 1}", CHANCE, (f"s{t}", f"v{t}"))
    return b


_GRAPHS = {"mdp": _mdp_graph, "pomdp_lm": _pomdp_lm_graph, "chess": _chess_graph}


def _vertex_rng(seed: int, vid: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=(vid,))))


def parametrize(id_: InfluenceDiagram, cards: dict[int, int],
                seed: int) -> Parametrization:
    """Draw CPTs (uniform rows, normalized) and rewards (uniform [0,10])."""
    cpts = {}
    rewards = {}
    for v in id_.vertices:
        rng = _vertex_rng(seed, v)
        if id_.kind(v) != DECISION:
            rows = 1
            for u in id_.graph.parents(v):
                rows *= cards[u]
            t = rng.uniform(size=(rows, cards[v]))
            cpts[v] = t / t.sum(axis=1, keepdims=True)
        if id_.kind(v) == UTILITY:
            rewards[v] = rng.uniform(0.0, 10.0, size=cards[v])
    p = Parametrization(cards, cpts, rewards)
    p.validate(id_)
    return p


def generate(family: str, omega_s: int, omega_a: int, horizon: int,
             seed: int) -> tuple[InfluenceDiagram, Parametrization]:
    if family not in FAMILIES:
        raise InvalidInstance(f"unknown family {family!r}; pick from {FAMILIES}")
    if omega_s < 1 or omega_a < 1 or horizon < 1:
        raise InvalidInstance("omega_s, omega_a and horizon must be >= 1")
    id_ = _GRAPHS[family](horizon).diagram()
    fa_dec = set()
    for v in id_.decisions:
        fa_dec |= set(id_.graph.family(v))
    cards = {v: (omega_a if v in fa_dec else omega_s) for v in id_.vertices}
    return id_, parametrize(id_, cards, seed)


def policy_count(id_: InfluenceDiagram, p: Parametrization) -> int:
    return deterministic_policy_count(id_, p)
