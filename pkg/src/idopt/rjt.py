"""Rooted junction trees: construction, validation, normalization.

A rooted junction tree (rooted tree of clusters) satisfies:
  (i) the underlying undirected cluster graph is a junction tree (running
      intersection property),
 (ii) fa(v) is contained in C_v, the root of the subtree of clusters
      containing v.

The builders sweep the graph in reverse topological order, growing each
cluster from the vertex's family plus the residuals of already-built child
clusters, and attach each cluster to the latest vertex of its residual.
Their output has singleton offspring (one cluster per vertex, keyed by it)
and minimal clusters for the given order.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .diagram import DECISION, InfluenceDiagram
from .errors import InvalidSeed, NotSoluble, NotTopological
from .graphs import DiGraph, is_topological, topological_sort


@dataclass
class RootedJunctionTree:
    """Forest of rooted cluster trees over the vertices of a digraph.

    clusters[i] is a vertex set; parents[i] the index of its parent cluster
    (None for roots); order is the vertex topological order the tree was
    built with (also used to sequence offspring during normalization).
    """

    clusters: tuple[frozenset[int], ...]
    parents: tuple[Optional[int], ...]
    order: tuple[int, ...]

    _root_clique: dict[int, Optional[int]] = field(init=False, repr=False)
    _children: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        self.clusters = tuple(frozenset(c) for c in self.clusters)
        self.parents = tuple(self.parents)
        self.order = tuple(self.order)
        kids = [[] for _ in self.clusters]
        for i, pi in enumerate(self.parents):
            if pi is not None:
                kids[pi].append(i)
        self._children = tuple(tuple(sorted(k)) for k in kids)
        self._root_clique = {}
        for v in self.order:
            containing = [i for i, c in enumerate(self.clusters) if v in c]
            roots = [i for i in containing
                     if self.parents[i] is None or v not in self.clusters[self.parents[i]]]
            self._root_clique[v] = roots[0] if len(roots) == 1 else None

    # -- structure queries ---------------------------------------------------

    def children(self, i: int) -> tuple[int, ...]:
        return self._children[i]

    def root_clique_index(self, v: int) -> int:
        i = self._root_clique.get(v)
        if i is None:
            raise ValueError(f"vertex {v} has no unique root clique")
        return i

    def cluster_of(self, v: int) -> frozenset[int]:
        return self.clusters[self.root_clique_index(v)]

    def residual(self, v: int) -> frozenset[int]:
        """The set C_v minus v itself."""
        return self.cluster_of(v) - {v}

    def offspring(self, i: int) -> tuple[int, ...]:
        return tuple(v for v in self.order if self._root_clique.get(v) == i)

    @property
    def is_normalized(self) -> bool:
        return all(len(self.offspring(i)) == 1 for i in range(len(self.clusters)))

    def tree_order(self) -> list[int]:
        """Cluster indices, every parent before its children."""
        indeg = [0 if p is None else 1 for p in self.parents]
        ready = [i for i, d in enumerate(indeg) if d == 0]
        heapq.heapify(ready)
        out = []
        while ready:
            i = heapq.heappop(ready)
            out.append(i)
            for j in self._children[i]:
                heapq.heappush(ready, j)
        if len(out) != len(self.clusters):
            raise ValueError("cluster parent relation is not a forest")
        return out

    def cluster_reaches(self, i: int, j: int) -> bool:
        """True iff there is a directed cluster path from i to j."""
        while j is not None:
            if i == j:
                return True
            j = self.parents[j]
        return False

    # -- rendering -----------------------------------------------------------

    def format_cluster(self, i: int, labels: Mapping[int, str]) -> str:
        pos = {v: k for k, v in enumerate(self.order)}
        off = set(self.offspring(i))
        resid = sorted(self.clusters[i] - off, key=lambda v: pos.get(v, v))
        offs = sorted(off, key=lambda v: pos.get(v, v))
        left = " ".join(labels[v] for v in resid)
        right = " ".join(labels[v] for v in offs)
        return f"{left} - {right}".strip()

    def to_dot(self, labels: Mapping[int, str]) -> str:
        lines = ["digraph rjt {", "  node [shape=box, style=rounded];"]
        for i in range(len(self.clusters)):
            lines.append(f'  c{i} [label="{self.format_cluster(i, labels)}"];')
        for i, pi in enumerate(self.parents):
            if pi is not None:
                lines.append(f"  c{pi} -> c{i};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _build(id_: InfluenceDiagram, order: list[int],
           seeds: Mapping[int, Iterable[int]]) -> RootedJunctionTree:
    """Reverse-order sweep shared by all builders.

    C_v starts from fa(v) (plus seeds), absorbs the residual of every child
    cluster, and attaches to the order-maximal vertex of its residual.
    """
    g = id_.graph
    if not is_topological(g, order):
        raise NotTopological("order is not a topological order of the graph")
    pos = {v: i for i, v in enumerate(order)}
    seed_sets: dict[int, frozenset[int]] = {}
    for v, s in seeds.items():
        s = frozenset(s)
        if v not in pos:
            raise InvalidSeed(f"seed key {v} is not a vertex")
        for u in s:
            if u not in pos:
                raise InvalidSeed(f"seed vertex {u} is not a vertex")
            if pos[u] >= pos[v]:
                raise InvalidSeed(
                    f"seed vertex {g.label(u)} does not precede {g.label(v)}")
        seed_sets[v] = s

    csets: dict[int, frozenset[int]] = {}
    cluster_children: dict[int, list[int]] = {v: [] for v in order}
    parent_vertex: dict[int, Optional[int]] = {}
    for v in reversed(order):
        c = set(g.family(v)) | set(seed_sets.get(v, ()))
        for w in cluster_children[v]:
            c |= csets[w] - {w}
        csets[v] = frozenset(c)
        resid = csets[v] - {v}
        if resid:
            u = max(resid, key=lambda x: pos[x])
            parent_vertex[v] = u
            cluster_children[u].append(v)
        else:
            parent_vertex[v] = None

    clusters = tuple(csets[v] for v in order)
    parents = tuple(
        None if parent_vertex[v] is None else pos[parent_vertex[v]]
        for v in order)
    return RootedJunctionTree(clusters, parents, tuple(order))


def build_rjt(id_: InfluenceDiagram, order: Iterable[int]) -> RootedJunctionTree:
    """Build the minimal rooted junction tree for a given topological order."""
    return _build(id_, list(order), {})


def build_rjt_seeded(id_: InfluenceDiagram, order: Iterable[int],
                     seeds: Mapping[int, Iterable[int]]) -> RootedJunctionTree:
    """Like build_rjt but C_v is seeded with extra (strictly earlier) vertices.

    Seeding grows clusters, which can expose nonempty free parts B(C_v) and
    hence stronger independence cuts.
    """
    return _build(id_, list(order), dict(seeds))


def build_rjt_auto(id_: InfluenceDiagram) -> RootedJunctionTree:
    """Build an rjt without a caller-supplied order.

    The reverse topological order is computed online by repeatedly removing
    a sink, taking decision sinks first (smallest id on ties). On soluble
    diagrams this yields a tree whose decision clusters have their blanket
    inside fa(v). Equivalent to build_rjt with the computed order.
    """
    g = id_.graph
    outdeg = {v: len(g.children(v)) for v in g.vertices}
    dec_heap = [v for v in g.vertices if outdeg[v] == 0 and id_.kind(v) == DECISION]
    oth_heap = [v for v in g.vertices if outdeg[v] == 0 and id_.kind(v) != DECISION]
    heapq.heapify(dec_heap)
    heapq.heapify(oth_heap)
    removal: list[int] = []
    while dec_heap or oth_heap:
        v = heapq.heappop(dec_heap) if dec_heap else heapq.heappop(oth_heap)
        removal.append(v)
        for u in g.parents(v):
            outdeg[u] -= 1
            if outdeg[u] == 0:
                heapq.heappush(
                    dec_heap if id_.kind(u) == DECISION else oth_heap, u)
    if len(removal) != len(g.vertices):
        from .errors import CyclicGraph
        raise CyclicGraph("graph contains a directed cycle")
    return _build(id_, list(reversed(removal)), {})


def build_soluble_rjt(id_: InfluenceDiagram) -> RootedJunctionTree:
    """Build an rjt with M(C_v) inside fa(v) for every decision v.

    Only possible for soluble diagrams: the elimination order is derived
    from a topological order of the relevance graph, completed first over
    decision pairs and then with all chance vertices a decision could
    observe without creating a cycle.
    """
    from .diagram import is_soluble, relevance_graph

    if not is_soluble(id_):
        raise NotSoluble("relevance graph is cyclic")
    g = id_.graph
    decisions = id_.decisions
    h_order = topological_sort(relevance_graph(id_))
    h_pos = {v: i for i, v in enumerate(h_order)}
    e1 = set(g.arcs)
    for u in decisions:
        for v in decisions:
            if u != v and h_pos[u] < h_pos[v]:
                e1.add((u, v))
    g1 = DiGraph(g.vertices, e1, g.labels)
    e2 = set(g.arcs)
    for v in decisions:
        dsc = g1.descendants(v)
        for u in id_.stochastic:
            if u not in dsc:
                e2.add((u, v))
    g2 = DiGraph(g.vertices, e2, g.labels)
    return _build(id_, topological_sort(g2), {})


def normalize_offspring(rjt: RootedJunctionTree) -> RootedJunctionTree:
    """Rewrite the tree so every cluster has exactly one offspring vertex.

    Clusters with several offspring v_1,...,v_k (in order) are split into
    the chain C\\{v_2..v_k} -> ... -> C; clusters with empty offspring are
    spliced out (their content is always present in their parent).
    """
    pos = {v: i for i, v in enumerate(rjt.order)}
    old_order = rjt.tree_order()
    offspring = {i: sorted(rjt.offspring(i), key=lambda v: pos[v])
                 for i in old_order}

    new_vertices: list[int] = []
    new_clusters: list[frozenset[int]] = []
    new_parents: list[Optional[int]] = []
    tail: dict[int, Optional[int]] = {}  # old cluster index -> new tail index

    def nearest_tail(old_i: Optional[int]) -> Optional[int]:
        while old_i is not None and tail.get(old_i) is None:
            old_i = rjt.parents[old_i]
        return None if old_i is None else tail[old_i]

    for i in old_order:
        off = offspring[i]
        if not off:
            tail[i] = None
            continue
        attach = nearest_tail(rjt.parents[i])
        cluster = rjt.clusters[i]
        for j, v in enumerate(off):
            sub = cluster - set(off[j + 1:])
            new_vertices.append(v)
            new_clusters.append(sub)
            new_parents.append(attach)
            attach = len(new_clusters) - 1
        tail[i] = attach

    if len(new_vertices) != len(rjt.order):
        raise ValueError("input tree does not cover every vertex exactly once")
    return RootedJunctionTree(tuple(new_clusters), tuple(new_parents),
                              tuple(new_vertices))


def _undirected_component(g: DiGraph, start: int, allowed: frozenset[int]) -> frozenset[int]:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for u in g.parents(v) + g.children(v):
            if u in allowed and u not in seen:
                seen.add(u)
                stack.append(u)
    return frozenset(seen)


def validate_rjt(id_: InfluenceDiagram, rjt: RootedJunctionTree,
                 minimal: bool = False) -> list[str]:
    """Check the rooted-junction-tree invariants; return violations as text.

    With minimal=True additionally requires the given-order builder's
    characterization: reachable clusters are exactly the trail-connected
    later vertices, and each cluster contains exactly the earlier vertices
    with a child among those.
    """
    g = id_.graph
    out: list[str] = []
    n = len(rjt.clusters)

    for i, pi in enumerate(rjt.parents):
        if pi is not None and not (0 <= pi < n):
            out.append(f"cluster {i}: parent index {pi} out of range")
            return out
    try:
        rjt.tree_order()
    except ValueError:
        out.append("cluster parent relation contains a cycle")
        return out

    if sorted(rjt.order) != list(g.vertices):
        out.append("stored order does not enumerate the vertex set")
        return out
    if not is_topological(g, rjt.order):
        out.append("stored order is not topological on the graph")
    pos = {v: i for i, v in enumerate(rjt.order)}

    for v in g.vertices:
        containing = [i for i, c in enumerate(rjt.clusters) if v in c]
        if not containing:
            out.append(f"vertex {g.label(v)} appears in no cluster")
            continue
        roots = [i for i in containing
                 if rjt.parents[i] is None or v not in rjt.clusters[rjt.parents[i]]]
        if len(roots) != 1:
            out.append(f"clusters containing {g.label(v)} do not form a rooted "
                       f"subtree (running intersection fails)")
            continue
        cv = rjt.clusters[roots[0]]
        if not g.family(v) <= cv:
            out.append(f"family of {g.label(v)} not contained in its root clique")
        for u in cv:
            if pos[u] > pos[v]:
                out.append(f"cluster of {g.label(v)} contains the later vertex "
                           f"{g.label(u)}")

    offspring_ok = True
    for i in range(n):
        off = rjt.offspring(i)
        if len(off) != 1:
            out.append(f"cluster {i} ({sorted(rjt.clusters[i])}) has offspring "
                       f"of size {len(off)}, expected a singleton")
            offspring_ok = False

    if offspring_ok:
        for i in range(n):
            (v,) = rjt.offspring(i)
            pi = rjt.parents[i]
            if pi is not None:
                if not (rjt.clusters[i] - {v}) <= rjt.clusters[pi]:
                    out.append(f"residual of {g.label(v)} not contained in the "
                               f"parent cluster")
                (u,) = rjt.offspring(pi)
                if pos[u] > pos[v]:
                    out.append("order is not topological on the cluster tree")

    if minimal and offspring_ok and not out:
        later = {v: frozenset(u for u in g.vertices if pos[u] >= pos[v])
                 for v in g.vertices}
        for v in g.vertices:
            t_v = _undirected_component(g, v, later[v])
            iv = rjt.root_clique_index(v)
            reach = frozenset(
                rjt.offspring(j)[0] for j in range(n) if rjt.cluster_reaches(iv, j))
            if t_v != reach:
                out.append(f"descendant clusters of {g.label(v)} do not match its "
                           f"trail-connected later vertices")
            expected = {v} | {u for u in g.vertices
                              if pos[u] <= pos[v] and set(g.children(u)) & t_v}
            if set(rjt.clusters[iv]) != expected:
                out.append(f"cluster of {g.label(v)} is not minimal for the order")
    return out
