import numpy as np
import pytest

from idopt.diagram import CHANCE, DECISION, UTILITY, Policy, free_split
from idopt.errors import InvalidSeed, NotSoluble, NotTopological
from idopt.generators import generate
from idopt.graphs import topological_sort
from idopt.inference import policy_moments
from idopt.rjt import (RootedJunctionTree, build_rjt, build_rjt_auto,
                       build_rjt_seeded, build_soluble_rjt,
                       normalize_offspring, validate_rjt)

from helpers import build_id, perfect_recall_pomdp, random_instance
from oracles import joint_table


def labels_of(id_, cluster):
    return {id_.label(v) for v in cluster}


def test_single_vertex():
    id_, _ = build_id([("r", UTILITY, ())])
    rjt = build_rjt(id_, [0])
    assert rjt.clusters == (frozenset({0}),)
    assert rjt.parents == (None,)
    assert validate_rjt(id_, rjt, minimal=True) == []


def test_rejects_non_topological_order():
    id_, ids = build_id([("x", CHANCE, ()), ("r", UTILITY, ("x",))])
    with pytest.raises(NotTopological):
        build_rjt(id_, [ids["r"], ids["x"]])


def test_chess_clusters_stage_pattern():
    id_, p = generate("chess", 2, 2, 2, seed=0)
    by = {id_.label(v): v for v in id_.vertices}
    rjt = build_rjt(id_, topological_sort(id_.graph))
    expect = {
        "s1": {"s1"}, "o1": {"s1", "o1"}, "u1": {"s1", "o1", "u1"},
        "a1": {"s1", "o1", "u1", "a1"}, "v1": {"s1", "o1", "a1", "v1"},
        "r1": {"v1", "r1"}, "s2": {"s1", "v1", "s2"},
        "o2": {"s2", "o2"}, "u2": {"s2", "o2", "u2"},
        "a2": {"s2", "o2", "u2", "a2"}, "v2": {"s2", "o2", "a2", "v2"},
        "r2": {"v2", "r2"}, "s3": {"s2", "v2", "s3"},
    }
    for lab, want in expect.items():
        assert labels_of(id_, rjt.cluster_of(by[lab])) == want
    assert validate_rjt(id_, rjt, minimal=True) == []


def test_two_branch_graph_clusters():
    rows = [("s", CHANCE, ()), ("t", CHANCE, ()), ("u", CHANCE, ("s",)),
            ("v", CHANCE, ("t",)), ("w", CHANCE, ("v", "u")),
            ("x", CHANCE, ("v", "u")), ("y", UTILITY, ("w",)),
            ("z", UTILITY, ("x",))]
    id_, ids = build_id(rows)
    order = [ids[c] for c in "stuvwxyz"]
    rjt = build_rjt(id_, order)
    got = {id_.label(rjt.offspring(i)[0]): labels_of(id_, rjt.clusters[i])
           for i in range(len(rjt.clusters))}
    assert got == {"s": {"s"}, "t": {"s", "t"}, "u": {"s", "t", "u"},
                   "v": {"t", "u", "v"}, "w": {"u", "v", "w"},
                   "x": {"u", "v", "x"}, "y": {"w", "y"}, "z": {"x", "z"}}
    # drawn arcs: st -> st-u -> tu-v -> {uv-w -> w-y, uv-x -> x-z}
    def parent_label(c):
        i = rjt.root_clique_index(ids[c])
        pi = rjt.parents[i]
        return None if pi is None else id_.label(rjt.offspring(pi)[0])
    assert parent_label("u") == "t" and parent_label("v") == "u"
    assert parent_label("w") == "v" and parent_label("x") == "v"
    assert parent_label("y") == "w" and parent_label("z") == "x"
    assert parent_label("t") == "s" and parent_label("s") is None


def test_builder_output_is_forest_on_disconnected_graphs():
    id_, ids = build_id([("x", CHANCE, ()), ("r", UTILITY, ("x",)),
                         ("y", CHANCE, ()), ("q", UTILITY, ("y",))])
    rjt = build_rjt(id_, topological_sort(id_.graph))
    assert sum(1 for q in rjt.parents if q is None) == 2
    assert validate_rjt(id_, rjt, minimal=True) == []


def test_auto_builder_matches_given_order_builder_invariants():
    rng = np.random.default_rng(2)
    for _ in range(50):
        id_, p = random_instance(rng, int(rng.integers(2, 10)), p_arc=0.4)
        rjt = build_rjt_auto(id_)
        assert validate_rjt(id_, rjt, minimal=True) == []


def test_auto_builder_pomdp_natural_clusters():
    id_, p = generate("pomdp_lm", 2, 2, 2, seed=0)
    by = {id_.label(v): v for v in id_.vertices}
    rjt = build_rjt_auto(id_)
    assert labels_of(id_, rjt.cluster_of(by["a2"])) == {"s2", "o2", "a2"}
    assert labels_of(id_, rjt.cluster_of(by["r2"])) == {"s2", "a2", "r2"}
    assert labels_of(id_, rjt.cluster_of(by["s2"])) == {"s1", "a1", "s2"}
    # without seeding the decision clusters carry no free part
    assert free_split(id_, rjt.cluster_of(by["a2"])).free == frozenset()


def test_auto_builder_mdp_cluster_sizes():
    id_, p = generate("mdp", 2, 2, 3, seed=0)
    rjt = build_rjt_auto(id_)
    for i, c in enumerate(rjt.clusters):
        (v,) = rjt.offspring(i)
        if id_.kind(v) == UTILITY:
            assert len(c) == 4  # {s_t, a_t, s_{t+1}, r_t}
        else:
            assert len(c) <= 3
    assert validate_rjt(id_, rjt, minimal=True) == []


def test_soluble_builder_blanket_in_family():
    rng = np.random.default_rng(3)
    id_, p = generate("mdp", 2, 2, 3, seed=0)
    for diagram in (id_, perfect_recall_pomdp(rng, horizon=2)[0]):
        rjt = build_soluble_rjt(diagram)
        assert validate_rjt(diagram, rjt) == []
        for v in diagram.decisions:
            split = free_split(diagram, rjt.cluster_of(v))
            assert split.blanket <= diagram.graph.family(v)


def test_soluble_builder_single_decision():
    id_, ids = build_id([("s", CHANCE, ()), ("a", DECISION, ("s",)),
                         ("r", UTILITY, ("s", "a"))])
    rjt = build_soluble_rjt(id_)
    split = free_split(id_, rjt.cluster_of(ids["a"]))
    assert split.blanket <= id_.graph.family(ids["a"])


def test_soluble_builder_rejects_non_soluble():
    id_, p = generate("chess", 2, 2, 2, seed=0)
    with pytest.raises(NotSoluble):
        build_soluble_rjt(id_)


def test_auto_builder_on_soluble_gives_free_graph_equal_graph():
    """On soluble inputs the online builder leaves every decision blanket
    inside the family, i.e. the cut-relaxation graph equals the graph."""
    id_, p = generate("mdp", 3, 2, 3, seed=4)
    rjt = build_rjt_auto(id_)
    for v in id_.decisions:
        split = free_split(id_, rjt.cluster_of(v))
        assert split.blanket <= id_.graph.family(v)


def test_seeded_empty_equals_plain():
    id_, p = generate("chess", 2, 2, 2, seed=0)
    order = topological_sort(id_.graph)
    a = build_rjt(id_, order)
    b = build_rjt_seeded(id_, order, {})
    assert a.clusters == b.clusters and a.parents == b.parents


def test_seeded_pomdp_extended_clusters():
    id_, p = generate("pomdp_lm", 2, 2, 2, seed=0)
    by = {id_.label(v): v for v in id_.vertices}
    order = topological_sort(id_.graph)
    rjt = build_rjt_seeded(id_, order,
                           {by["a2"]: [by["s1"], by["a1"], by["s2"]]})
    assert labels_of(id_, rjt.cluster_of(by["s1"])) == {"s1"}
    assert labels_of(id_, rjt.cluster_of(by["o1"])) == {"s1", "o1"}
    assert labels_of(id_, rjt.cluster_of(by["a1"])) == {"s1", "o1", "a1"}
    assert labels_of(id_, rjt.cluster_of(by["r1"])) == {"s1", "a1", "r1"}
    assert labels_of(id_, rjt.cluster_of(by["s2"])) == {"s1", "a1", "s2"}
    assert labels_of(id_, rjt.cluster_of(by["o2"])) == {"s1", "a1", "s2", "o2"}
    assert labels_of(id_, rjt.cluster_of(by["a2"])) == {"s1", "a1", "s2", "o2", "a2"}
    assert validate_rjt(id_, rjt) == []


def test_seeded_rejects_forward_seed():
    id_, p = generate("pomdp_lm", 2, 2, 2, seed=0)
    by = {id_.label(v): v for v in id_.vertices}
    order = topological_sort(id_.graph)
    with pytest.raises(InvalidSeed):
        build_rjt_seeded(id_, order, {by["a1"]: [by["s2"]]})


def test_seeded_clusters_contain_plain_clusters():
    rng = np.random.default_rng(9)
    for _ in range(20):
        id_, p = random_instance(rng, 7, p_arc=0.4)
        order = topological_sort(id_.graph)
        pos = {v: i for i, v in enumerate(order)}
        seeds = {}
        for v in id_.vertices:
            before = [u for u in id_.vertices if pos[u] < pos[v]]
            if before and rng.uniform() < 0.4:
                seeds[v] = [int(rng.choice(before))]
        plain = build_rjt(id_, order)
        seeded = build_rjt_seeded(id_, order, seeds)
        for v in id_.vertices:
            assert plain.cluster_of(v) <= seeded.cluster_of(v)
        assert validate_rjt(id_, seeded) == []


def test_validator_flags_single_cluster():
    id_, p = generate("mdp", 2, 2, 1, seed=0)
    whole = RootedJunctionTree((frozenset(id_.vertices),), (None,),
                               tuple(topological_sort(id_.graph)))
    violations = validate_rjt(id_, whole)
    assert any("offspring" in v for v in violations)


def test_validator_flags_broken_running_intersection():
    id_, ids = build_id([("x", CHANCE, ()), ("y", CHANCE, ("x",)),
                         ("r", UTILITY, ("y",))])
    # x appears in two clusters that are not adjacent: RIP fails
    bad = RootedJunctionTree(
        (frozenset({ids["x"]}), frozenset({ids["x"], ids["y"]}),
         frozenset({ids["x"], ids["y"], ids["r"]})),
        (None, 0, 1), (ids["x"], ids["y"], ids["r"]))
    ok = validate_rjt(id_, bad)
    assert ok == []  # this one is actually fine
    bad2 = RootedJunctionTree(
        (frozenset({ids["x"], ids["y"]}), frozenset({ids["y"]}),
         frozenset({ids["x"], ids["y"], ids["r"]})),
        (None, 0, 1), (ids["x"], ids["y"], ids["r"]))
    violations = validate_rjt(id_, bad2)
    assert any("running intersection" in v for v in violations)


def test_validator_passes_on_random_builders():
    rng = np.random.default_rng(1)
    for _ in range(100):
        id_, p = random_instance(rng, int(rng.integers(1, 11)), p_arc=0.45)
        rjt = build_rjt(id_, topological_sort(id_.graph))
        assert validate_rjt(id_, rjt, minimal=True) == []


def test_normalize_offspring_splits_single_cluster():
    id_, p = generate("mdp", 2, 2, 1, seed=0)
    order = topological_sort(id_.graph)
    whole = RootedJunctionTree((frozenset(id_.vertices),), (None,), tuple(order))
    norm = normalize_offspring(whole)
    assert len(norm.clusters) == len(id_.vertices)
    assert validate_rjt(id_, norm) == []
    assert norm.clusters[-1] == frozenset(id_.vertices)


def test_normalize_offspring_idempotent():
    id_, p = generate("chess", 2, 2, 2, seed=0)
    rjt = build_rjt_auto(id_)
    norm = normalize_offspring(rjt)
    assert norm.clusters == rjt.clusters
    assert norm.parents == rjt.parents


def test_normalize_split_example():
    """A cluster with offspring {v1, v2} becomes C\\{v2} -> C."""
    id_, ids = build_id([("x", CHANCE, ()), ("y", CHANCE, ("x",)),
                         ("r", UTILITY, ("x", "y"))])
    whole = RootedJunctionTree(
        (frozenset({ids["x"], ids["y"]}), frozenset(id_.vertices)),
        (None, 0), (ids["x"], ids["y"], ids["r"]))
    norm = normalize_offspring(whole)
    assert norm.clusters[0] == frozenset({ids["x"]})
    assert norm.clusters[1] == frozenset({ids["x"], ids["y"]})
    assert norm.clusters[2] == frozenset(id_.vertices)
    assert validate_rjt(id_, norm) == []


def test_path_lifting_property():
    rng = np.random.default_rng(8)
    for _ in range(20):
        id_, p = random_instance(rng, 8, p_arc=0.4)
        rjt = build_rjt_auto(id_)
        g = id_.graph
        for u in g.vertices:
            for v in g.descendants(u):
                iu = rjt.root_clique_index(u)
                iv = rjt.root_clique_index(v)
                assert rjt.cluster_reaches(iu, iv)


def test_moment_reconstruction_round_trip():
    """Cluster moments reconstruct the exact joint through the conditional
    quotients q_{v|pa} (factorization property of rooted junction trees)."""
    import itertools

    rng = np.random.default_rng(12)
    for _ in range(5):
        id_, p = random_instance(rng, 8, p_arc=0.4)
        rjt = build_rjt_auto(id_)
        pol = Policy.random(id_, p, rng)
        mv = policy_moments(id_, p, rjt, pol)
        ref = joint_table(id_, p, pol)
        verts = list(id_.vertices)
        pos = {v: i for i, v in enumerate(verts)}
        recon = np.zeros_like(ref)
        for assign in itertools.product(*[range(p.card(v)) for v in verts]):
            prob = 1.0
            for v in verts:
                scope = sorted(rjt.cluster_of(v))
                fa = sorted(id_.graph.family(v))
                pa = sorted(id_.graph.parents(v))
                t = mv.cluster[v]
                num = t
                for ax, u in reversed(list(enumerate(scope))):
                    if u not in fa:
                        num = num.sum(axis=ax)
                    else:
                        num = np.take(num, assign[pos[u]], axis=ax)
                den = t
                for ax, u in reversed(list(enumerate(scope))):
                    if u not in pa:
                        den = den.sum(axis=ax)
                    else:
                        den = np.take(den, assign[pos[u]], axis=ax)
                prob *= float(num) / float(den) if float(den) > 0 else 0.0
            recon[assign] = prob
        assert np.max(np.abs(recon - ref)) <= 1e-9
