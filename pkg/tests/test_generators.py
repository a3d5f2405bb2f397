import pytest

from idopt.diagram import DECISION, UTILITY
from idopt.errors import InvalidInstance
from idopt.generators import generate, policy_count
from idopt.io import dumps_instance, loads_instance


def arcs_by_label(id_):
    return {(id_.label(u), id_.label(v)) for u, v in id_.graph.arcs}


def test_chess_t1_shape():
    id_, p = generate("chess", 2, 2, 1, seed=0)
    labels = {id_.label(v) for v in id_.vertices}
    assert labels == {"s1", "o1", "u1", "a1", "v1", "r1", "s2"}
    assert arcs_by_label(id_) == {("s1", "o1"), ("o1", "u1"), ("u1", "a1"),
                                  ("o1", "v1"), ("a1", "v1"), ("v1", "r1"),
                                  ("s1", "s2"), ("v1", "s2")}
    kinds = {id_.label(v): id_.kind(v) for v in id_.vertices}
    assert kinds["a1"] == DECISION and kinds["r1"] == UTILITY


def test_pomdp_lm_t1_shape():
    id_, p = generate("pomdp_lm", 2, 2, 1, seed=0)
    assert arcs_by_label(id_) == {("s1", "o1"), ("o1", "a1"), ("s1", "r1"),
                                  ("a1", "r1"), ("s1", "s2"), ("a1", "s2"),
                                  ("s2", "o2")}
    a1 = id_.by_label("a1")
    assert id_.graph.parents(a1) == (id_.by_label("o1"),)


def test_mdp_shape():
    id_, p = generate("mdp", 2, 2, 2, seed=0)
    assert arcs_by_label(id_) == {("s1", "a1"), ("s1", "s2"), ("a1", "s2"),
                                  ("s1", "r1"), ("a1", "r1"), ("s2", "r1"),
                                  ("s2", "a2"), ("s2", "s3"), ("a2", "s3"),
                                  ("s2", "r2"), ("a2", "r2"), ("s3", "r2")}


def test_cards_follow_decision_family_rule():
    id_, p = generate("chess", 3, 2, 2, seed=0)
    for v in id_.vertices:
        lab = id_.label(v)
        if lab.startswith(("u", "a")):
            assert p.card(v) == 2
        else:
            assert p.card(v) == 3


def test_same_seed_identical_different_seed_not():
    a = dumps_instance(*generate("chess", 2, 3, 2, seed=4))
    b = dumps_instance(*generate("chess", 2, 3, 2, seed=4))
    c = dumps_instance(*generate("chess", 2, 3, 2, seed=5))
    assert a == b and a != c


def test_policy_count_formula():
    for family, ws, wa, horizon in (("chess", 3, 2, 2), ("pomdp_lm", 2, 3, 2),
                                    ("mdp", 3, 2, 3)):
        id_, p = generate(family, ws, wa, horizon, seed=0)
        expect = 1
        for v in id_.decisions:
            rows = 1
            for u in id_.graph.parents(v):
                rows *= p.card(u)
            expect *= p.card(v) ** rows
        assert policy_count(id_, p) == expect


def test_generated_instances_pass_loader():
    for family in ("mdp", "pomdp_lm", "chess"):
        text = dumps_instance(*generate(family, 3, 2, 2, seed=1))
        id_, p = loads_instance(text)  # loader revalidates everything
        assert len(id_.utilities) >= 1


def test_bad_parameters_rejected():
    with pytest.raises(InvalidInstance):
        generate("mdp", 0, 2, 2, seed=0)
    with pytest.raises(InvalidInstance):
        generate("nope", 2, 2, 2, seed=0)
