"""Directed-graph machinery: DiGraph, topological sort, d-separation."""

from __future__ import annotations

from collections import deque
from typing import Iterable, Mapping, Optional

from .errors import CyclicGraph, OverlappingSets


class DiGraph:
    """Immutable directed graph over integer vertex ids with string labels.

    Arc, parent and child listings are kept sorted by id, so every
    derived ordering in the package is reproducible.
    """

    def __init__(self, vertices: Iterable[int], arcs: Iterable[tuple[int, int]],
                 labels: Optional[Mapping[int, str]] = None):
        self._vertices = tuple(sorted(set(int(v) for v in vertices)))
        vset = set(self._vertices)
        aset = set()
        for u, v in arcs:
            u, v = int(u), int(v)
            if u not in vset or v not in vset:
                raise ValueError(f"arc ({u},{v}) references unknown vertex")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            aset.add((u, v))
        self._arcs = tuple(sorted(aset))
        labels = dict(labels or {})
        self._labels = {v: str(labels.get(v, f"v{v}")) for v in self._vertices}
        self._parents = {v: [] for v in self._vertices}
        self._children = {v: [] for v in self._vertices}
        for u, v in self._arcs:
            self._parents[v].append(u)
            self._children[u].append(v)
        for v in self._vertices:
            self._parents[v] = tuple(sorted(self._parents[v]))
            self._children[v] = tuple(sorted(self._children[v]))

    @property
    def vertices(self) -> tuple[int, ...]:
        return self._vertices

    @property
    def arcs(self) -> tuple[tuple[int, int], ...]:
        return self._arcs

    def label(self, v: int) -> str:
        return self._labels[v]

    @property
    def labels(self) -> dict[int, str]:
        return dict(self._labels)

    def parents(self, v: int) -> tuple[int, ...]:
        return self._parents[v]

    def children(self, v: int) -> tuple[int, ...]:
        return self._children[v]

    def family(self, v: int) -> frozenset[int]:
        return frozenset(self._parents[v]) | {v}

    def _reach(self, start: Iterable[int], step) -> frozenset[int]:
        seen: set[int] = set()
        stack = list(start)
        while stack:
            v = stack.pop()
            for u in step(v):
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return frozenset(seen)

    def ancestors(self, v: int) -> frozenset[int]:
        return self._reach([v], lambda x: self._parents[x])

    def descendants(self, v: int) -> frozenset[int]:
        return self._reach([v], lambda x: self._children[x])

    def ancestors_of(self, vs: Iterable[int]) -> frozenset[int]:
        """Ancestors of a set, the set itself excluded unless reached."""
        return self._reach(vs, lambda x: self._parents[x])

    def ancestral_closure(self, vs: Iterable[int]) -> frozenset[int]:
        vs = frozenset(vs)
        return vs | self.ancestors_of(vs)

    def subgraph(self, keep: Iterable[int]) -> "DiGraph":
        keep = set(keep)
        return DiGraph(keep,
                       [(u, v) for u, v in self._arcs if u in keep and v in keep],
                       {v: self._labels[v] for v in keep})

    def with_arcs(self, extra: Iterable[tuple[int, int]],
                  extra_vertices: Iterable[tuple[int, str]] = ()) -> "DiGraph":
        labels = dict(self._labels)
        verts = list(self._vertices)
        for v, lab in extra_vertices:
            verts.append(v)
            labels[v] = lab
        return DiGraph(verts, list(self._arcs) + list(extra), labels)

    def __contains__(self, v: int) -> bool:
        return v in self._labels

    def __repr__(self) -> str:
        return f"DiGraph({len(self._vertices)} vertices, {len(self._arcs)} arcs)"


def topological_sort(g: DiGraph) -> list[int]:
    """Kahn's algorithm with smallest-id tie-breaking.

    Raises CyclicGraph when no topological order exists.
    """
    import heapq

    indeg = {v: len(g.parents(v)) for v in g.vertices}
    ready = [v for v in g.vertices if indeg[v] == 0]
    heapq.heapify(ready)
    out: list[int] = []
    while ready:
        v = heapq.heappop(ready)
        out.append(v)
        for w in g.children(v):
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, w)
    if len(out) != len(g.vertices):
        raise CyclicGraph("graph contains a directed cycle")
    return out


def is_topological(g: DiGraph, order: Iterable[int]) -> bool:
    order = list(order)
    if sorted(order) != list(g.vertices):
        return False
    pos = {v: i for i, v in enumerate(order)}
    return all(pos[u] < pos[v] for u, v in g.arcs)


def d_separated(g: DiGraph, a: Iterable[int], b: Iterable[int],
                z: Iterable[int]) -> bool:
    """Decide whether vertex sets ``a`` and ``b`` are d-separated by ``z``.

    Reachability formulation: a breadth-first search over (vertex,
    travel-direction) states, where a trail may pass a collider only if
    the collider has a descendant in ``z`` (precomputed as the ancestral
    closure of ``z``). Runs in O(|V| + |E|) per query.
    """
    a, b, z = frozenset(a), frozenset(b), frozenset(z)
    if a & b or a & z or b & z:
        raise OverlappingSets("A, B and Z must be pairwise disjoint")
    for v in a | b | z:
        if v not in g:
            raise ValueError(f"vertex {v} not in graph")
    if not a or not b:
        return True

    an_z = g.ancestral_closure(z)
    # direction: True when the trail enters v from a child ("up"), False
    # when it enters from a parent ("down"); sources start as "up".
    queue = deque((v, True) for v in a)
    visited: set[tuple[int, bool]] = set()
    while queue:
        v, up = queue.popleft()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        if v not in z and v in b:
            return False
        if up:
            if v not in z:
                for u in g.parents(v):
                    queue.append((u, True))
                for w in g.children(v):
                    queue.append((w, False))
        else:
            if v not in z:
                for w in g.children(v):
                    queue.append((w, False))
            if v in an_z:
                # v-structure: the collider or one of its descendants is in z
                for u in g.parents(v):
                    queue.append((u, True))
    return True
