"""Influence-diagram data model and the graph queries built on top of it.

Vertices are partitioned into chance, decision and utility kinds. Utility
vertices are modeled exactly like chance vertices with an attached reward
vector: they carry a conditional probability table and their state feeds
the objective through the reward.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from . import tables
from .errors import InvalidInstance, NotDecisionVertex
from .graphs import DiGraph, d_separated, topological_sort

CHANCE = "chance"
DECISION = "decision"
UTILITY = "utility"
KINDS = (CHANCE, DECISION, UTILITY)

CPT_ROW_TOL = 1e-9


class InfluenceDiagram:
    """A DAG plus a kind map partitioning its vertices."""

    def __init__(self, graph: DiGraph, kinds: Mapping[int, str]):
        self.graph = graph
        self.kinds = {int(v): str(k) for v, k in kinds.items()}
        if sorted(self.kinds) != list(graph.vertices):
            raise InvalidInstance("kind map must cover exactly the vertex set")
        for v, k in self.kinds.items():
            if k not in KINDS:
                raise InvalidInstance(f"unknown kind {k!r} for vertex {v}")
            if k == UTILITY and graph.children(v):
                raise InvalidInstance(
                    f"utility vertex {graph.label(v)} has children")
        topological_sort(graph)  # raises CyclicGraph

    @property
    def vertices(self) -> tuple[int, ...]:
        return self.graph.vertices

    def kind(self, v: int) -> str:
        return self.kinds[v]

    @property
    def decisions(self) -> tuple[int, ...]:
        return tuple(v for v in self.vertices if self.kinds[v] == DECISION)

    @property
    def chance_vertices(self) -> tuple[int, ...]:
        return tuple(v for v in self.vertices if self.kinds[v] == CHANCE)

    @property
    def utilities(self) -> tuple[int, ...]:
        return tuple(v for v in self.vertices if self.kinds[v] == UTILITY)

    @property
    def stochastic(self) -> tuple[int, ...]:
        """Chance plus utility vertices (the ones carrying CPTs)."""
        return tuple(v for v in self.vertices if self.kinds[v] != DECISION)

    def label(self, v: int) -> str:
        return self.graph.label(v)

    def by_label(self, label: str) -> int:
        for v in self.vertices:
            if self.graph.label(v) == label:
                return v
        raise KeyError(label)

    def with_graph(self, graph: DiGraph) -> "InfluenceDiagram":
        return InfluenceDiagram(graph, {v: self.kinds[v] for v in graph.vertices})

    def __repr__(self) -> str:
        return (f"InfluenceDiagram({len(self.vertices)} vertices: "
                f"{len(self.chance_vertices)} chance, "
                f"{len(self.decisions)} decision, {len(self.utilities)} utility)")


@dataclass
class Parametrization:
    """State-space sizes, CPTs for chance/utility vertices, reward vectors.

    CPTs have shape (prod of parent cards, card of the vertex), rows
    row-major over the parents sorted by id.
    """

    cards: dict[int, int]
    cpts: dict[int, np.ndarray]
    rewards: dict[int, np.ndarray]

    def __post_init__(self):
        self.cards = {int(v): int(c) for v, c in self.cards.items()}
        self.cpts = {int(v): np.asarray(t, dtype=float) for v, t in self.cpts.items()}
        self.rewards = {int(v): np.asarray(r, dtype=float)
                        for v, r in self.rewards.items()}

    def card(self, v: int) -> int:
        return self.cards[v]

    def n_parent_rows(self, id_: InfluenceDiagram, v: int) -> int:
        n = 1
        for u in id_.graph.parents(v):
            n *= self.cards[u]
        return n

    def validate(self, id_: InfluenceDiagram) -> None:
        """Check every structural and numerical invariant; raise on failure.

        Rows failing the 1e-9 sum tolerance are rejected, not renormalized.
        """
        if sorted(self.cards) != list(id_.vertices):
            raise InvalidInstance("cards must cover exactly the vertex set")
        for v, c in self.cards.items():
            if c < 1:
                raise InvalidInstance(f"vertex {id_.label(v)} has card {c} < 1")
        if sorted(self.cpts) != sorted(id_.stochastic):
            raise InvalidInstance("cpts must cover exactly chance+utility vertices")
        if sorted(self.rewards) != sorted(id_.utilities):
            raise InvalidInstance("rewards must cover exactly utility vertices")
        for v in id_.stochastic:
            rows = self.n_parent_rows(id_, v)
            t = self.cpts[v].reshape(-1)
            if t.size != rows * self.cards[v]:
                raise InvalidInstance(
                    f"cpt of {id_.label(v)} has size {t.size}, "
                    f"expected {rows * self.cards[v]}")
            t = t.reshape(rows, self.cards[v])
            self.cpts[v] = t
            if np.any(t < 0):
                raise InvalidInstance(f"cpt of {id_.label(v)} has negative entries")
            bad = np.abs(t.sum(axis=1) - 1.0) > CPT_ROW_TOL
            if np.any(bad):
                raise InvalidInstance(
                    f"cpt rows of {id_.label(v)} do not sum to 1 "
                    f"(worst |sum-1| = {np.max(np.abs(t.sum(axis=1) - 1.0)):.3e})")
        for v in id_.utilities:
            if self.rewards[v].shape != (self.cards[v],):
                raise InvalidInstance(f"reward vector of {id_.label(v)} has wrong size")

    def factor(self, id_: InfluenceDiagram, v: int) -> np.ndarray:
        """CPT of v reshaped as a table over sorted(fa(v))."""
        return tables.factor_from_cpt(
            self.cpts[v], id_.graph.parents(v), v, self.cards)

    def restrict(self, keep: Iterable[int]) -> "Parametrization":
        keep = set(keep)
        return Parametrization(
            {v: c for v, c in self.cards.items() if v in keep},
            {v: t.copy() for v, t in self.cpts.items() if v in keep},
            {v: r.copy() for v, r in self.rewards.items() if v in keep})


@dataclass
class Policy:
    """Per-decision conditional tables delta_{v|pa(v)}.

    Tables have the CPT layout: (parent rows, card of v). ``deterministic``
    declares that every row is a Dirac.
    """

    tables: dict[int, np.ndarray]
    deterministic: bool = False

    def __post_init__(self):
        self.tables = {int(v): np.asarray(t, dtype=float)
                       for v, t in self.tables.items()}

    def validate(self, id_: InfluenceDiagram, p: Parametrization) -> None:
        if sorted(self.tables) != sorted(id_.decisions):
            raise InvalidInstance("policy must cover exactly the decision vertices")
        for v, t in self.tables.items():
            rows = p.n_parent_rows(id_, v)
            if t.shape != (rows, p.card(v)):
                raise InvalidInstance(f"policy table of {id_.label(v)} has wrong shape")
            if np.any(t < 0) or np.any(np.abs(t.sum(axis=1) - 1.0) > CPT_ROW_TOL):
                raise InvalidInstance(f"policy rows of {id_.label(v)} are not distributions")
            if self.deterministic and not np.all((t == 0.0) | (t == 1.0)):
                raise InvalidInstance(f"policy of {id_.label(v)} is not deterministic")

    def table(self, v: int) -> np.ndarray:
        return self.tables[v]

    @staticmethod
    def uniform(id_: InfluenceDiagram, p: Parametrization) -> "Policy":
        tabs = {}
        for v in id_.decisions:
            rows = p.n_parent_rows(id_, v)
            tabs[v] = np.full((rows, p.card(v)), 1.0 / p.card(v))
        return Policy(tabs, deterministic=False)

    @staticmethod
    def random(id_: InfluenceDiagram, p: Parametrization, rng) -> "Policy":
        tabs = {}
        for v in id_.decisions:
            rows = p.n_parent_rows(id_, v)
            t = rng.uniform(size=(rows, p.card(v)))
            tabs[v] = t / t.sum(axis=1, keepdims=True)
        return Policy(tabs, deterministic=False)


@dataclass(frozen=True)
class AugmentedGraph:
    """The diagram's graph with one parameter vertex added per decision."""

    graph: DiGraph
    theta: dict[int, int]  # decision id -> theta vertex id

    @property
    def theta_ids(self) -> tuple[int, ...]:
        return tuple(self.theta[v] for v in sorted(self.theta))


@dataclass(frozen=True)
class FreeSplit:
    """Split of a cluster into its policy-invariant part and its blanket."""

    cluster: frozenset[int]
    free: frozenset[int]       # B(C)
    blanket: frozenset[int]    # M(C) = C \ B(C)


def augment(id_: InfluenceDiagram) -> AugmentedGraph:
    """Add one parentless theta vertex with a single arc into each decision."""
    base = max(id_.vertices) + 1 if id_.vertices else 0
    theta = {}
    extra_vertices = []
    extra_arcs = []
    for i, v in enumerate(id_.decisions):
        t = base + i
        theta[v] = t
        extra_vertices.append((t, f"theta[{id_.label(v)}]"))
        extra_arcs.append((t, v))
    return AugmentedGraph(id_.graph.with_arcs(extra_arcs, extra_vertices), theta)


def prune_irrelevant(id_: InfluenceDiagram,
                     p: Parametrization) -> tuple[InfluenceDiagram, Parametrization]:
    """Restrict to vertices that are utilities or have a utility descendant.

    The expected utility of any policy is unchanged on the restriction.
    """
    keep = id_.graph.ancestral_closure(id_.utilities)
    if keep == set(id_.vertices):
        return id_, p
    return id_.with_graph(id_.graph.subgraph(keep)), p.restrict(keep)


def s_reachable(id_: InfluenceDiagram, u: int, v: int,
                aug: Optional[AugmentedGraph] = None) -> bool:
    """True iff decision u is s-reachable from decision v.

    That is, theta_u is not d-separated from dsc(v) given fa(v) in the
    augmented graph.
    """
    if id_.kinds.get(u) != DECISION or id_.kinds.get(v) != DECISION:
        raise NotDecisionVertex(f"{u} and {v} must be decision vertices")
    aug = aug or augment(id_)
    dsc = id_.graph.descendants(v)
    if not dsc:
        return False
    return not d_separated(aug.graph, {aug.theta[u]}, dsc, id_.graph.family(v))


def relevance_graph(id_: InfluenceDiagram) -> DiGraph:
    """Digraph over the decisions with an arc (v,u) when u is s-reachable from v."""
    aug = augment(id_)
    arcs = []
    for v in id_.decisions:
        for u in id_.decisions:
            if u != v and s_reachable(id_, u, v, aug):
                arcs.append((v, u))
    return DiGraph(id_.decisions, arcs, {v: id_.label(v) for v in id_.decisions})


def is_soluble(id_: InfluenceDiagram) -> bool:
    """True iff the relevance graph is acyclic."""
    from .errors import CyclicGraph
    try:
        topological_sort(relevance_graph(id_))
    except CyclicGraph:
        return False
    return True


def free_split(id_: InfluenceDiagram, cluster: Iterable[int],
               aug: Optional[AugmentedGraph] = None) -> FreeSplit:
    """Compute B(C): the vertices of C d-separated from all theta vertices
    given the rest of C, in the augmented graph. M(C) is the complement.

    Cross-checks that B(C) is jointly d-separated from the theta vertices
    given M(C) (the Markov-blanket property of the split).
    """
    cluster = frozenset(cluster)
    aug = aug or augment(id_)
    thetas = frozenset(aug.theta.values())
    if not thetas:
        return FreeSplit(cluster, cluster, frozenset())
    free = frozenset(
        v for v in cluster
        if d_separated(aug.graph, {v}, thetas, cluster - {v}))
    blanket = cluster - free
    if free and not d_separated(aug.graph, free, thetas, blanket):
        raise AssertionError(
            "free part is not d-separated from the parameter vertices "
            "given the blanket; free_split is inconsistent")
    return FreeSplit(cluster, free, blanket)
