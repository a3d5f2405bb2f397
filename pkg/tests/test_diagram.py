import numpy as np
import pytest

from idopt.diagram import (CHANCE, DECISION, UTILITY, InfluenceDiagram,
                           Parametrization, augment, free_split,
                           is_soluble, prune_irrelevant, relevance_graph,
                           s_reachable)
from idopt.errors import InvalidInstance, NotDecisionVertex
from idopt.generators import generate
from idopt.graphs import DiGraph, d_separated, topological_sort
from idopt.inference import brute_force_meu
from idopt.rjt import build_rjt_seeded

from helpers import (build_id, coordination_instance, cut_chain_instance,
                     parametrize_random, random_instance)


def test_kinds_must_partition():
    g = DiGraph([0, 1], [(0, 1)])
    with pytest.raises(InvalidInstance):
        InfluenceDiagram(g, {0: CHANCE})
    with pytest.raises(InvalidInstance):
        InfluenceDiagram(g, {0: CHANCE, 1: "other"})


def test_utility_must_be_sink():
    g = DiGraph([0, 1], [(0, 1)])
    with pytest.raises(InvalidInstance):
        InfluenceDiagram(g, {0: UTILITY, 1: CHANCE})


def test_cpt_row_sum_rejected_not_renormalized():
    id_, ids = build_id([("x", CHANCE, ()), ("r", UTILITY, ("x",))])
    p = Parametrization({0: 2, 1: 2},
                        {0: np.array([[0.6, 0.41]]),
                         1: np.array([[0.5, 0.5], [0.5, 0.5]])},
                        {1: np.array([1.0, 2.0])})
    with pytest.raises(InvalidInstance):
        p.validate(id_)


def test_augment_no_decisions():
    id_, _ = build_id([("x", CHANCE, ()), ("r", UTILITY, ("x",))])
    aug = augment(id_)
    assert aug.theta == {}
    assert aug.graph.vertices == id_.graph.vertices


def test_augment_adds_one_theta_per_decision():
    for family, horizon, expected in (("pomdp_lm", 3, 3), ("chess", 2, 2)):
        id_, p = generate(family, 2, 2, horizon, seed=0)
        aug = augment(id_)
        assert len(aug.theta) == expected
        assert len(aug.graph.vertices) == len(id_.vertices) + expected
        for v, t in aug.theta.items():
            assert aug.graph.parents(t) == ()
            assert aug.graph.children(t) == (v,)
        assert set(aug.graph.arcs) >= set(id_.graph.arcs)


def test_prune_removes_isolated_chance_vertex():
    id_, ids = build_id([("w", CHANCE, ()), ("x", CHANCE, ()),
                         ("r", UTILITY, ("x",))])
    rng = np.random.default_rng(0)
    p = parametrize_random(id_, {v: 2 for v in id_.vertices}, rng)
    pruned, pp = prune_irrelevant(id_, p)
    assert ids["w"] not in pruned.vertices
    assert sorted(pruned.vertices) == [ids["x"], ids["r"]]


def test_prune_mdp_unchanged_chess_drops_tail():
    id_, p = generate("mdp", 2, 2, 3, seed=1)
    pruned, _ = prune_irrelevant(id_, p)
    assert pruned.vertices == id_.vertices  # casc(utilities) covers everything

    id_, p = generate("chess", 2, 2, 3, seed=1)
    pruned, _ = prune_irrelevant(id_, p)
    dropped = set(id_.vertices) - set(pruned.vertices)
    assert {id_.label(v) for v in dropped} == {"s4"}

    id_, p = generate("pomdp_lm", 2, 2, 3, seed=1)
    pruned, _ = prune_irrelevant(id_, p)
    dropped = set(id_.vertices) - set(pruned.vertices)
    assert {id_.label(v) for v in dropped} == {"s4", "o4"}


def test_prune_preserves_brute_force_meu():
    rng = np.random.default_rng(3)
    done = 0
    while done < 10:
        id_, p = random_instance(rng, 7, p_arc=0.35)
        pruned, pp = prune_irrelevant(id_, p)
        if len(pruned.vertices) == len(id_.vertices):
            continue
        _, v1 = brute_force_meu(id_, p)
        _, v2 = brute_force_meu(pruned, pp)
        assert abs(v1 - v2) <= 1e-9
        done += 1


def test_cut_chain_d_separation_and_free_split():
    id_, p, ids = cut_chain_instance()
    aug = augment(id_)
    thetas = set(aug.theta.values())
    cluster = {ids["a"], ids["u"], ids["v"], ids["b"]}
    assert d_separated(aug.graph, {ids["u"]}, thetas, cluster - {ids["u"]})
    split = free_split(id_, cluster)
    assert split.free == {ids["u"]}
    assert split.blanket == {ids["a"], ids["v"], ids["b"]}


def test_free_split_no_chance_vertices():
    id_, p, ids = cut_chain_instance()
    split = free_split(id_, {ids["a"], ids["b"]})
    assert split.free == frozenset()


def test_free_split_blanket_minimality():
    """Moving any blanket vertex into the free part breaks the separation
    (exhaustive over random clusters of size <= 6)."""
    rng = np.random.default_rng(11)
    tried = 0
    while tried < 40:
        id_, p = random_instance(rng, 7, p_arc=0.45)
        if not id_.decisions:
            continue
        aug = augment(id_)
        thetas = frozenset(aug.theta.values())
        k = int(rng.integers(2, 7))
        cluster = frozenset(int(v) for v in
                            rng.choice(id_.vertices, size=min(k, len(id_.vertices)),
                                       replace=False))
        split = free_split(id_, cluster)
        for m in split.blanket:
            assert not d_separated(aug.graph, split.free | {m}, thetas,
                                   split.blanket - {m})
        tried += 1


def test_s_reachable_requires_decisions():
    id_, p, ids = cut_chain_instance()
    with pytest.raises(NotDecisionVertex):
        s_reachable(id_, ids["u"], ids["b"])


def test_s_reachable_descendant_direction():
    """A descendant decision is always s-reachable from its ancestor."""
    id_, p = generate("mdp", 2, 2, 3, seed=0)
    a = [v for v in id_.decisions]
    assert s_reachable(id_, a[1], a[0])  # later reachable from earlier
    assert not s_reachable(id_, a[0], a[1])
    rel = relevance_graph(id_)
    assert (a[0], a[1]) in rel.arcs
    assert (a[1], a[0]) not in rel.arcs
    assert is_soluble(id_)


def test_relevance_arcs_cover_descendants():
    rng = np.random.default_rng(5)
    for _ in range(20):
        id_, p = random_instance(rng, 7, p_arc=0.4, n_decisions=2)
        rel = relevance_graph(id_)
        for v in id_.decisions:
            for u in id_.decisions:
                if u != v and u in id_.graph.descendants(v):
                    assert (v, u) in rel.arcs


def test_single_decision_soluble():
    id_, p, ids = cut_chain_instance()
    sub = {ids["a"]: DECISION}  # the cut chain has two decisions; build a one-decision diagram
    id1, _ = build_id([("s", CHANCE, ()), ("a", DECISION, ("s",)),
                       ("r", UTILITY, ("s", "a"))])
    assert relevance_graph(id1).arcs == ()
    assert is_soluble(id1)


def test_chess_not_soluble():
    id_, p = generate("chess", 2, 2, 3, seed=0)
    a = list(id_.decisions)
    # the earlier decision is s-reachable from the later one
    assert s_reachable(id_, a[0], a[1])
    assert not is_soluble(id_)
    id2, _ = generate("pomdp_lm", 2, 2, 3, seed=0)
    assert not is_soluble(id2)


def test_coordination_instance_not_soluble():
    id_, p, ids = coordination_instance()
    rel = relevance_graph(id_)
    assert (ids["a"], ids["b"]) in rel.arcs and (ids["b"], ids["a"]) in rel.arcs
    assert not is_soluble(id_)


def test_pomdp_extended_cluster_free_split():
    id_, p = generate("pomdp_lm", 2, 2, 3, seed=0)
    by_label = {id_.label(v): v for v in id_.vertices}
    order = topological_sort(id_.graph)
    seeds = {by_label[f"a{t}"]: [by_label[f"s{t-1}"], by_label[f"a{t-1}"],
                                 by_label[f"s{t}"]] for t in (2, 3)}
    rjt = build_rjt_seeded(id_, order, seeds)
    for t in (2, 3):
        a = by_label[f"a{t}"]
        cluster = rjt.cluster_of(a)
        assert cluster == {by_label[f"s{t-1}"], by_label[f"a{t-1}"],
                           by_label[f"s{t}"], by_label[f"o{t}"], a}
        split = free_split(id_, cluster)
        assert split.free == {by_label[f"s{t}"]}
