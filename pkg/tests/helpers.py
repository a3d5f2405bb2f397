"""Shared instance builders for the test suite."""

from __future__ import annotations

import numpy as np

from idopt.diagram import (CHANCE, DECISION, UTILITY, InfluenceDiagram,
                           Parametrization, Policy)
from idopt.graphs import DiGraph


def build_id(rows):
    """rows: (label, kind, parent-labels). Returns (diagram, label->id)."""
    labels, kinds, arcs = {}, {}, []
    ids: dict[str, int] = {}
    for label, kind, parents in rows:
        i = len(labels)
        labels[i] = label
        kinds[i] = kind
        ids[label] = i
        arcs.extend((ids[q], i) for q in parents)
    g = DiGraph(range(len(labels)), arcs, labels)
    return InfluenceDiagram(g, kinds), ids


def parametrize_random(id_, cards, rng, reward_range=(0.0, 10.0)):
    cpts, rewards = {}, {}
    for v in id_.vertices:
        if id_.kind(v) != DECISION:
            rows = 1
            for u in id_.graph.parents(v):
                rows *= cards[u]
            t = rng.uniform(size=(rows, cards[v]))
            cpts[v] = t / t.sum(axis=1, keepdims=True)
        if id_.kind(v) == UTILITY:
            rewards[v] = rng.uniform(*reward_range, size=cards[v])
    p = Parametrization(dict(cards), cpts, rewards)
    p.validate(id_)
    return p


def random_dag_id(rng, n, p_arc=0.4, max_card=2, n_decisions=None):
    """Random acyclic diagram over ids 0..n-1 (arcs only i -> j with i < j).

    The last vertex is always a utility (it is a sink); other sinks become
    utilities with probability 1/2. Decisions are drawn among the rest.
    """
    arcs = [(i, j) for i in range(n) for j in range(i + 1, n)
            if rng.uniform() < p_arc]
    has_child = {i for i, _ in arcs}
    kinds = {}
    for v in range(n):
        if v == n - 1 or (v not in has_child and rng.uniform() < 0.5):
            kinds[v] = UTILITY
        else:
            kinds[v] = CHANCE
    non_utility = [v for v in range(n) if kinds[v] == CHANCE]
    if n_decisions is None:
        n_decisions = int(rng.integers(0, max(1, len(non_utility) // 2) + 1))
    for v in rng.permutation(non_utility)[:n_decisions]:
        kinds[int(v)] = DECISION
    g = DiGraph(range(n), arcs, {v: f"x{v}" for v in range(n)})
    id_ = InfluenceDiagram(g, kinds)
    cards = {v: int(rng.integers(2, max_card + 1)) for v in range(n)}
    return id_, cards


def random_instance(rng, n, p_arc=0.4, max_card=2, n_decisions=None):
    id_, cards = random_dag_id(rng, n, p_arc, max_card, n_decisions)
    return id_, parametrize_random(id_, cards, rng)


def cut_chain_instance():
    """The five-vertex chain with two decisions whose decision cluster
    C = {a, u, v, b} has free part {u}; cards (1, 2, 1, 2, 2)."""
    id_, ids = build_id([
        ("a", DECISION, ()),
        ("u", CHANCE, ("a",)),
        ("v", CHANCE, ("u",)),
        ("b", DECISION, ("v",)),
        ("w", UTILITY, ("a", "u", "b")),
    ])
    cards = {ids["a"]: 1, ids["u"]: 2, ids["v"]: 1, ids["b"]: 2, ids["w"]: 2}
    cpts = {
        ids["u"]: np.array([[0.5, 0.5]]),
        ids["v"]: np.array([[1.0], [1.0]]),
        ids["w"]: np.array([[0.2, 0.8], [0.7, 0.3], [0.6, 0.4], [0.1, 0.9]]),
    }
    rewards = {ids["w"]: np.array([0.0, 1.0])}
    p = Parametrization(cards, cpts, rewards)
    p.validate(id_)
    return id_, p, ids


def coordination_instance():
    """Two-player coordination game with two local optima.

    Player a picks which die face to watch; player b sees only the match
    flag and plays 1, 2 or a joker. Watching face 2 and playing it is the
    global optimum (2/3); watching face 1 is a strict local optimum (1/3).
    Non-soluble: each decision is s-reachable from the other.
    """
    id_, ids = build_id([
        ("s0", CHANCE, ()),
        ("a", DECISION, ()),
        ("t", CHANCE, ("s0", "a")),
        ("b", DECISION, ("t",)),
        ("w", UTILITY, ("s0", "b")),
    ])
    cards = {ids["s0"]: 3, ids["a"]: 2, ids["t"]: 2, ids["b"]: 3, ids["w"]: 4}
    third = 1.0 / 3.0
    t_rows = []  # rows over (s0, a), row-major
    for s0 in range(3):
        for a in range(2):
            match = 1.0 if s0 == a else 0.0
            t_rows.append([1.0 - match, match])
    w_rows = []  # rows over (s0, b): 0 joker, 1 win-face-1, 2 win-face-2, 3 lose
    for s0 in range(3):
        for b in range(3):
            w = np.zeros(4)
            if b == 0:
                w[0] = 1.0
            elif b - 1 == s0:
                w[b] = 1.0
            else:
                w[3] = 1.0
            w_rows.append(w)
    cpts = {ids["s0"]: np.array([[third, third, third]]),
            ids["t"]: np.array(t_rows),
            ids["w"]: np.array(w_rows)}
    rewards = {ids["w"]: np.array([0.0, 1.0, 2.0, -10.0])}
    p = Parametrization(cards, cpts, rewards)
    p.validate(id_)
    return id_, p, ids


def coordination_local_optimum(id_, p, ids):
    """The inferior local optimum: watch face 1, play it on a match."""
    b_rows = np.zeros((2, 3))
    b_rows[0, 0] = 1.0  # no match -> joker
    b_rows[1, 1] = 1.0  # match -> play face 1
    return Policy({ids["a"]: np.array([[1.0, 0.0]]), ids["b"]: b_rows},
                  deterministic=True)


def perfect_recall_pomdp(rng, horizon=2, card=2):
    """POMDP where each decision sees all past observations and decisions:
    soluble by construction."""
    rows = [("s1", CHANCE, ())]
    obs_hist: list[str] = []
    for t in range(1, horizon + 1):
        rows.append((f"o{t}", CHANCE, (f"s{t}",)))
        parents = tuple(obs_hist) + (f"o{t}",)
        rows.append((f"a{t}", DECISION, parents))
        rows.append((f"r{t}", UTILITY, (f"s{t}", f"a{t}")))
        if t < horizon:
            rows.append((f"s{t + 1}", CHANCE, (f"s{t}", f"a{t}")))
        obs_hist.extend([f"o{t}", f"a{t}"])
    id_, ids = build_id(rows)
    cards = {v: card for v in id_.vertices}
    return id_, parametrize_random(id_, cards, rng), ids
