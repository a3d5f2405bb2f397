"""Linear and mixed-integer models over rooted-junction-tree moments.

The moment variables mu[C_v] live on cluster assignments; mud[v] are the
residual marginals; muv[v] are per-vertex marginals used by the objective.
Four model variants combine the fixed-conditional polytope with optional
independence cuts and with trivial (b=1) or dynamic-programming McCormick
bounds:

    qbar1   fixed conditionals only, b = 1
    qbarb   fixed conditionals, DP bounds
    qperp1  fixed conditionals + independence cuts, b = 1
    qperpb  fixed conditionals + independence cuts, DP bounds
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from . import tables
from .diagram import (DECISION, InfluenceDiagram, Parametrization, free_split)
from .errors import InvalidInstance
from .inference import conditional_b_given_m
from .model import EQ, GE, LE, LinearModel
from .rjt import RootedJunctionTree

VARIANTS = ("qbar1", "qbarb", "qperp1", "qperpb")

Block = list[tuple[str, dict, str, float]]


def _fmt(assign: Iterable[int]) -> str:
    return ",".join(str(int(x)) for x in assign)


def mu_name(label: str, assign) -> str:
    return f"mu[{label}][{_fmt(assign)}]"


def mud_name(label: str, assign) -> str:
    return f"mud[{label}][{_fmt(assign)}]"


def muv_name(label: str, x: int) -> str:
    return f"muv[{label}][{int(x)}]"


def delta_name(label: str, pa_assign, xv: int) -> str:
    return f"delta[{label}][{_fmt(pa_assign)}][{int(xv)}]"


def _labels(id_: InfluenceDiagram) -> dict[int, str]:
    return id_.graph.labels


def local_polytope_constraints(rjt: RootedJunctionTree,
                               cards: Mapping[int, int],
                               labels: Optional[Mapping[int, str]] = None) -> Block:
    """Nonnegativity, cluster normalization, residual marginalization, and
    arc consistency between adjacent clusters (through the shared residual)."""
    labels = labels or {v: f"v{v}" for v in rjt.order}
    rows: Block = []
    for i in rjt.tree_order():
        (v,) = rjt.offspring(i)
        lab = labels[v]
        scope = tables.scope_of(rjt.clusters[i])
        resid = tables.scope_of(rjt.residual(v))
        for x in tables.assignments(scope, cards):
            rows.append((f"nn[{lab}][{_fmt(x)}]",
                         {mu_name(lab, x): 1.0}, GE, 0.0))
        rows.append((f"norm[{lab}]",
                     {mu_name(lab, x): 1.0
                      for x in tables.assignments(scope, cards)}, EQ, 1.0))
        if resid:
            v_pos = scope.index(v)
            for y in tables.assignments(resid, cards):
                terms = {mud_name(lab, y): -1.0}
                for xv in range(cards[v]):
                    full = list(y)
                    full.insert(v_pos, xv)
                    terms[mu_name(lab, full)] = 1.0
                rows.append((f"resdef[{lab}][{_fmt(y)}]", terms, EQ, 0.0))
        pi = rjt.parents[i]
        if pi is not None and resid:
            (u,) = rjt.offspring(pi)
            pscope = tables.scope_of(rjt.clusters[pi])
            for y in tables.assignments(resid, cards):
                terms: dict[str, float] = {mud_name(lab, y): -1.0}
                for xp in tables.assignments(pscope, cards):
                    if tables.sub_assignment(pscope, xp, resid) == tuple(y):
                        name = mu_name(labels[u], xp)
                        terms[name] = terms.get(name, 0.0) + 1.0
                rows.append((f"arc[{lab}][{_fmt(y)}]", terms, EQ, 0.0))
    return rows


def pbar_constraints(id_: InfluenceDiagram, p: Parametrization,
                     rjt: RootedJunctionTree) -> Block:
    """Fixed-conditional equalities mu_{C_v} = mu_{resid} * p_{v|pa(v)} for
    every chance and utility vertex."""
    labels = _labels(id_)
    rows: Block = []
    for v in id_.stochastic:
        lab = labels[v]
        scope = tables.scope_of(rjt.cluster_of(v))
        resid = tables.scope_of(rjt.residual(v))
        pa = tables.scope_of(id_.graph.parents(v))
        cpt = p.cpts[v]
        for x in tables.assignments(scope, p.cards):
            xv = x[scope.index(v)]
            row_idx = tables.flat_index(pa, p.cards,
                                        tables.sub_assignment(scope, x, pa))
            prob = float(cpt[row_idx, xv])
            if resid:
                y = tables.sub_assignment(scope, x, resid)
                terms = {mu_name(lab, x): 1.0, mud_name(lab, y): -prob}
                rows.append((f"pbar[{lab}][{_fmt(x)}]", terms, EQ, 0.0))
            else:
                rows.append((f"pbar[{lab}][{_fmt(x)}]",
                             {mu_name(lab, x): 1.0}, EQ, prob))
    return rows


def valid_cut_constraints(id_: InfluenceDiagram, p: Parametrization,
                          rjt: RootedJunctionTree) -> Block:
    """Independence cuts mu_{C_v} = p_{B|M} * sum_B mu_{C_v} for each
    decision cluster with a nonempty free part.

    The conditional is policy-invariant; it is extracted from one uniform
    inference pass. Cut rows are emitted even where the blanket assignment
    has zero mass (both sides vanish for feasible moments).
    """
    labels = _labels(id_)
    rows: Block = []
    for v in id_.decisions:
        cond = conditional_b_given_m(id_, p, rjt, v)
        if cond.size == 0:
            continue
        lab = labels[v]
        split = free_split(id_, rjt.cluster_of(v))
        scope = tables.scope_of(split.cluster)
        free = tables.scope_of(split.free)
        free_pos = [scope.index(u) for u in free]
        for x in tables.assignments(scope, p.cards):
            coef = float(cond[tuple(x)])
            terms: dict[str, float] = {mu_name(lab, x): 1.0}
            for xb in tables.assignments(free, p.cards):
                other = list(x)
                for pos, val in zip(free_pos, xb):
                    other[pos] = val
                name = mu_name(lab, other)
                terms[name] = terms.get(name, 0.0) - coef
            rows.append((f"cut[{lab}][{_fmt(x)}]", terms, EQ, 0.0))
    return rows


@dataclass
class BoundVector:
    """Cluster bound tables and the per-decision residual bounds they induce."""

    btilde: dict[int, np.ndarray]            # vertex -> table over C_v
    residual_bounds: dict[int, np.ndarray]   # decision -> table over resid(v)

    def max_entry(self) -> float:
        return max(float(t.max()) for t in self.btilde.values())


def mccormick_bounds(id_: InfluenceDiagram, p: Parametrization,
                     rjt: RootedJunctionTree) -> BoundVector:
    """Upper bounds on cluster moments via the order-two recursion.

    Walking the tree root-first with parent C_j and grandparent C_i of the
    current cluster C_k, new chance factors are multiplied in, decisions
    outside C_i u C_k that root in C_j are maximized out row-wise, and the
    remainder is summed out. The root bound is the product of its chance
    factors. Bounds dominate every achievable cluster moment.
    """
    g = id_.graph
    decisions = set(id_.decisions)
    btilde: dict[int, np.ndarray] = {}
    for i in rjt.tree_order():
        (v,) = rjt.offspring(i)
        ck = rjt.clusters[i]
        scope_k = tables.scope_of(ck)
        pi = rjt.parents[i]
        if pi is None:
            arr = np.ones(tables.shape_of(scope_k, p.cards))
            for w in sorted(ck - decisions):
                fa = tables.scope_of(g.family(w))
                arr = arr * tables.expand(p.factor(id_, w), fa, scope_k)
            btilde[v] = arr
            continue
        j = pi
        (vj,) = rjt.offspring(j)
        pj = rjt.parents[j]
        i2 = pj if pj is not None else j
        (vi,) = rjt.offspring(i2)
        ci, cj = rjt.clusters[i2], rjt.clusters[j]
        union = tables.scope_of(ci | cj | ck)
        f = tables.expand(btilde[vi], tables.scope_of(ci), union)
        f = np.broadcast_to(f, tables.shape_of(union, p.cards)).copy()
        for w in sorted((cj | ck) - ci):
            if w not in decisions:
                fa = tables.scope_of(g.family(w))
                f = f * tables.expand(p.factor(id_, w), fa, union)
        cja = (cj - (ci | ck)) & decisions
        fa_cja = set(cja)
        for w in cja:
            fa_cja |= set(g.parents(w))
        inner_keep = tables.scope_of(set(ck) | fa_cja)
        f = tables.marginalize(f, union, inner_keep)
        if cja:
            axes = tuple(k for k, u in enumerate(inner_keep) if u in cja)
            f = f.max(axis=axes)
            mid = tuple(u for u in inner_keep if u not in cja)
        else:
            mid = inner_keep
        f = tables.marginalize(f, mid, scope_k)
        btilde[v] = np.minimum(f, 1.0)

    residual_bounds = {}
    for v in id_.decisions:
        scope = tables.scope_of(rjt.cluster_of(v))
        residual_bounds[v] = tables.marginalize(btilde[v], scope,
                                                rjt.residual(v))
        residual_bounds[v] = np.minimum(residual_bounds[v], 1.0)
    return BoundVector(btilde, residual_bounds)


def trivial_bounds(id_: InfluenceDiagram, p: Parametrization,
                   rjt: RootedJunctionTree) -> BoundVector:
    """The b = 1 bound vector."""
    btilde = {}
    residual_bounds = {}
    for v in id_.vertices:
        scope = tables.scope_of(rjt.cluster_of(v))
        btilde[v] = np.ones(tables.shape_of(scope, p.cards))
        if id_.kind(v) == DECISION:
            resid = tables.scope_of(rjt.residual(v))
            residual_bounds[v] = np.ones(tables.shape_of(resid, p.cards))
    return BoundVector(btilde, residual_bounds)


def mccormick_constraints(id_: InfluenceDiagram, p: Parametrization,
                          rjt: RootedJunctionTree, v: int,
                          bound: np.ndarray) -> Block:
    """Two inequalities per cluster assignment linearizing
    mu_{C_v} = delta_{v|pa} * mu_{resid}; exact once delta is binary.
    The third product inequality is implied by residual marginalization."""
    labels = _labels(id_)
    lab = labels[v]
    scope = tables.scope_of(rjt.cluster_of(v))
    resid = tables.scope_of(rjt.residual(v))
    pa = tables.scope_of(id_.graph.parents(v))
    rows: Block = []
    for x in tables.assignments(scope, p.cards):
        xv = x[scope.index(v)]
        xpa = tables.sub_assignment(scope, x, pa)
        dname = delta_name(lab, xpa, xv)
        if resid:
            y = tables.sub_assignment(scope, x, resid)
            b = float(bound[y])
            rows.append((f"mcl[{lab}][{_fmt(x)}]",
                         {mu_name(lab, x): 1.0, mud_name(lab, y): -1.0,
                          dname: -b}, GE, -b))
            rows.append((f"mcu[{lab}][{_fmt(x)}]",
                         {mu_name(lab, x): 1.0, dname: -b}, LE, 0.0))
        else:
            b = float(np.asarray(bound).reshape(-1)[0]) if np.asarray(bound).size else 1.0
            rows.append((f"mcl[{lab}][{_fmt(x)}]",
                         {mu_name(lab, x): 1.0, dname: -b}, GE, 1.0 - b))
            rows.append((f"mcu[{lab}][{_fmt(x)}]",
                         {mu_name(lab, x): 1.0, dname: -b}, LE, 0.0))
    return rows


def policy_simplex_constraints(id_: InfluenceDiagram, p: Parametrization) -> Block:
    """Row normalization of every decision table. Implied by the other
    constraints wherever the residual has mass, but keeping them tightens
    the relaxation on zero-mass rows and helps branching."""
    labels = _labels(id_)
    rows: Block = []
    pa_scopes = {v: tables.scope_of(id_.graph.parents(v)) for v in id_.decisions}
    for v in id_.decisions:
        lab = labels[v]
        for xpa in tables.assignments(pa_scopes[v], p.cards):
            rows.append((f"drow[{lab}][{_fmt(xpa)}]",
                         {delta_name(lab, xpa, xv): 1.0
                          for xv in range(p.card(v))}, EQ, 1.0))
    return rows


def objective_marginal_constraints(id_: InfluenceDiagram, p: Parametrization,
                                   rjt: RootedJunctionTree) -> Block:
    """Defining equalities of the per-utility-vertex marginals muv."""
    labels = _labels(id_)
    rows: Block = []
    for v in id_.utilities:
        lab = labels[v]
        scope = tables.scope_of(rjt.cluster_of(v))
        v_pos = scope.index(v)
        for xv in range(p.card(v)):
            terms = {muv_name(lab, xv): -1.0}
            for x in tables.assignments(scope, p.cards):
                if x[v_pos] == xv:
                    terms[mu_name(lab, x)] = 1.0
            rows.append((f"margdef[{lab}][{xv}]", terms, EQ, 0.0))
    return rows


def assemble(id_: InfluenceDiagram, p: Parametrization, rjt: RootedJunctionTree,
             variant: str = "qperpb", integral: bool = True) -> LinearModel:
    """Build one of the four model variants.

    integral=True marks the decision variables binary (there is always a
    deterministic optimal policy); relaxing them gives the corresponding
    linear relaxation.
    """
    if variant not in VARIANTS:
        raise InvalidInstance(f"unknown variant {variant!r}; pick from {VARIANTS}")
    if not rjt.is_normalized:
        raise InvalidInstance("assemble requires a normalized rooted junction tree")
    labels = _labels(id_)
    model = LinearModel(name=f"{variant}-{'milp' if integral else 'lp'}")

    for i in rjt.tree_order():
        (v,) = rjt.offspring(i)
        lab = labels[v]
        scope = tables.scope_of(rjt.clusters[i])
        for x in tables.assignments(scope, p.cards):
            model.add_variable(mu_name(lab, x))
        resid = tables.scope_of(rjt.residual(v))
        if resid:
            for y in tables.assignments(resid, p.cards):
                model.add_variable(mud_name(lab, y))
    for v in id_.utilities:
        for xv in range(p.card(v)):
            model.add_variable(muv_name(labels[v], xv))
    for v in id_.decisions:
        pa = tables.scope_of(id_.graph.parents(v))
        for xpa in tables.assignments(pa, p.cards):
            for xv in range(p.card(v)):
                model.add_variable(delta_name(labels[v], xpa, xv),
                                   binary=integral)

    model.add_block(local_polytope_constraints(rjt, p.cards, labels))
    model.add_block(pbar_constraints(id_, p, rjt))
    if variant in ("qperp1", "qperpb"):
        model.add_block(valid_cut_constraints(id_, p, rjt))
    bounds = (mccormick_bounds(id_, p, rjt) if variant in ("qbarb", "qperpb")
              else trivial_bounds(id_, p, rjt))
    for v in id_.decisions:
        model.add_block(mccormick_constraints(id_, p, rjt, v,
                                              bounds.residual_bounds[v]))
    model.add_block(policy_simplex_constraints(id_, p))
    model.add_block(objective_marginal_constraints(id_, p, rjt))

    model.set_objective({muv_name(labels[v], xv): float(p.rewards[v][xv])
                         for v in id_.utilities for xv in range(p.card(v))})
    return model


def moments_assignment(id_: InfluenceDiagram, p: Parametrization,
                       rjt: RootedJunctionTree, moments, delta) -> dict[str, float]:
    """Full variable assignment (mu, mud, muv, delta) for a policy's moments;
    feasible for every variant when the policy is deterministic."""
    labels = _labels(id_)
    out: dict[str, float] = {}
    for v in id_.vertices:
        lab = labels[v]
        scope = tables.scope_of(rjt.cluster_of(v))
        table = moments.cluster[v]
        for x in tables.assignments(scope, p.cards):
            out[mu_name(lab, x)] = float(table[tuple(x)])
        resid = tables.scope_of(rjt.residual(v))
        if resid:
            rt = moments.residual[v]
            for y in tables.assignments(resid, p.cards):
                out[mud_name(lab, y)] = float(rt[tuple(y)])
    for v in id_.utilities:
        marg = moments.vertex_marginal(v)
        for xv in range(p.card(v)):
            out[muv_name(labels[v], xv)] = float(marg[xv])
    for v in id_.decisions:
        t = delta.tables[v]
        pa = tables.scope_of(id_.graph.parents(v))
        for r, xpa in enumerate(tables.assignments(pa, p.cards)):
            for xv in range(p.card(v)):
                out[delta_name(labels[v], xpa, xv)] = float(t[r, xv])
    return out


def soluble_relaxation_graphs(
        id_: InfluenceDiagram,
        rjt: RootedJunctionTree) -> tuple[InfluenceDiagram, InfluenceDiagram]:
    """The two enlarged diagrams whose exact MEU values equal the linear
    relaxation values: decisions gain all of C_v \\ fa(v) as parents in the
    first, only the blanket part M(C_v) \\ fa(v) in the second."""
    bar_arcs = []
    free_arcs = []
    for v in id_.decisions:
        fam = id_.graph.family(v)
        cluster = rjt.cluster_of(v)
        split = free_split(id_, cluster)
        bar_arcs.extend((u, v) for u in sorted(cluster - fam))
        free_arcs.extend((u, v) for u in sorted(split.blanket - fam))
    g_bar = id_.graph.with_arcs(bar_arcs)
    g_free = id_.graph.with_arcs(free_arcs)
    return id_.with_graph(g_bar), id_.with_graph(g_free)


@dataclass
class FlatMDP:
    """Finite-horizon MDP: stages 1..horizon, transitions for t < horizon."""

    transition: np.ndarray   # (S, A, S') rows summing to 1
    reward: np.ndarray       # (S, A, S')
    horizon: int
    initial_state: int = 0

    def __post_init__(self):
        self.transition = np.asarray(self.transition, dtype=float)
        self.reward = np.asarray(self.reward, dtype=float)
        s, a, s2 = self.transition.shape
        if s != s2 or self.reward.shape != self.transition.shape:
            raise InvalidInstance("transition and reward must be (S, A, S)")
        if np.any(np.abs(self.transition.sum(axis=2) - 1.0) > 1e-9):
            raise InvalidInstance("transition rows must sum to 1")
        if self.horizon < 2:
            raise InvalidInstance("horizon must be at least 2 (one transition)")
        if not (0 <= self.initial_state < s):
            raise InvalidInstance("initial state out of range")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


def mdp_lp(mdp: FlatMDP) -> LinearModel:
    """The classical occupancy-measure LP for a finite-horizon MDP.

    Variables are the per-stage state, state-action and transition
    occupancies; the relaxation to [0,1] is integral, so the LP value is
    the optimal expected reward.
    """
    model = LinearModel(name="mdp-lp")
    S, A, T = mdp.n_states, mdp.n_actions, mdp.horizon

    def ms(t, s):
        return f"mus[{t}][{s}]"

    def msa(t, s, a):
        return f"musa[{t}][{s},{a}]"

    def msas(t, s, a, s2):
        return f"musas[{t}][{s},{a},{s2}]"

    for t in range(1, T + 1):
        for s in range(S):
            model.add_variable(ms(t, s))
    for t in range(1, T):
        for s in range(S):
            for a in range(A):
                model.add_variable(msa(t, s, a))
        for s in range(S):
            for a in range(A):
                for s2 in range(S):
                    model.add_variable(msas(t, s, a, s2))

    for s in range(S):
        model.add_constraint(f"init[{s}]", {ms(1, s): 1.0}, EQ,
                             1.0 if s == mdp.initial_state else 0.0)
    for t in range(1, T):
        for s in range(S):
            for a in range(A):
                for s2 in range(S):
                    model.add_constraint(
                        f"dyn[{t}][{s},{a},{s2}]",
                        {msas(t, s, a, s2): 1.0,
                         msa(t, s, a): -float(mdp.transition[s, a, s2])},
                        EQ, 0.0)
        for s in range(S):
            model.add_constraint(
                f"salink[{t}][{s}]",
                {**{msa(t, s, a): 1.0 for a in range(A)}, ms(t, s): -1.0},
                EQ, 0.0)
        for s2 in range(S):
            model.add_constraint(
                f"flow[{t}][{s2}]",
                {**{msas(t, s, a, s2): 1.0 for s in range(S) for a in range(A)},
                 ms(t + 1, s2): -1.0},
                EQ, 0.0)
    for t in range(1, T + 1):
        model.add_constraint(f"snorm[{t}]",
                             {ms(t, s): 1.0 for s in range(S)}, EQ, 1.0)

    model.set_objective({msas(t, s, a, s2): float(mdp.reward[s, a, s2])
                         for t in range(1, T)
                         for s in range(S) for a in range(A) for s2 in range(S)})
    return model


def mdp_lp_policy(mdp: FlatMDP, assignment: Mapping[str, float]) -> np.ndarray:
    """Deterministic policy (horizon-1, S) extracted from an LP solution by
    the per-state argmax of the state-action occupancies."""
    T, S, A = mdp.horizon, mdp.n_states, mdp.n_actions
    pol = np.zeros((T - 1, S), dtype=int)
    for t in range(1, T):
        for s in range(S):
            occ = [assignment.get(f"musa[{t}][{s},{a}]", 0.0) for a in range(A)]
            pol[t - 1, s] = int(np.argmax(occ))
    return pol
