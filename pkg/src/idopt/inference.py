"""Exact inference on rooted junction trees, SPU, and policy enumeration.

The forward pass computes every cluster moment of the distribution induced
by a policy: the root cluster carries its offspring factor, and each
following cluster multiplies the parent moment's marginal on the residual
by the offspring's conditional factor. All routines support a leading
batch axis over policies; the brute-force oracle and best responses are
chunked batched passes.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from . import tables
from .diagram import (DECISION, InfluenceDiagram, Parametrization, Policy,
                      free_split, is_soluble, relevance_graph)
from .errors import IncompletePolicy, NotDecisionVertex, TooManyPolicies
from .graphs import topological_sort
from .rjt import RootedJunctionTree

MOMENT_TOL = 1e-9


class MomentVector:
    """Per-cluster probability tables plus the residual marginals.

    Tables are keyed by the cluster's offspring vertex; axes follow the
    sorted cluster scope.
    """

    def __init__(self, rjt: RootedJunctionTree, cards: dict[int, int],
                 cluster_tables: dict[int, np.ndarray]):
        self.rjt = rjt
        self.cards = cards
        self.cluster = cluster_tables
        self.residual = {}
        for v, table in cluster_tables.items():
            scope = tables.scope_of(rjt.cluster_of(v))
            self.residual[v] = tables.marginalize(table, scope, rjt.residual(v))

    def scope(self, v: int) -> tuple[int, ...]:
        return tables.scope_of(self.rjt.cluster_of(v))

    def vertex_marginal(self, v: int) -> np.ndarray:
        return tables.marginalize(self.cluster[v], self.scope(v), (v,))

    def marginal(self, v: int, onto: Iterable[int]) -> np.ndarray:
        return tables.marginalize(self.cluster[v], self.scope(v),
                                  tables.scope_of(onto))

    def validate(self, tol: float = MOMENT_TOL) -> list[str]:
        """Nonnegativity, normalization, and local consistency across arcs."""
        out = []
        for v, t in self.cluster.items():
            if t.min() < -tol:
                out.append(f"cluster table of {v} has negative entries")
            if abs(t.sum() - 1.0) > tol:
                out.append(f"cluster table of {v} does not sum to 1")
        for i, pi in enumerate(self.rjt.parents):
            if pi is None:
                continue
            (v,) = self.rjt.offspring(i)
            (u,) = self.rjt.offspring(pi)
            shared = tables.scope_of(self.rjt.clusters[i] & self.rjt.clusters[pi])
            a = tables.marginalize(self.cluster[v], self.scope(v), shared)
            b = tables.marginalize(self.cluster[u], self.scope(u), shared)
            if np.max(np.abs(a - b)) > tol:
                out.append(f"arc ({u},{v}): marginals on the intersection disagree")
        return out


def _require_normalized(rjt: RootedJunctionTree) -> None:
    if not rjt.is_normalized:
        raise ValueError("rooted junction tree must have singleton offspring; "
                         "apply normalize_offspring first")


def _decision_factor(table: np.ndarray, id_: InfluenceDiagram,
                     p: Parametrization, v: int, batch_ndim: int) -> np.ndarray:
    """Reshape a (batch..., rows, card) decision table over sorted(fa(v))."""
    pa = tables.scope_of(id_.graph.parents(v))
    batch_shape = table.shape[:batch_ndim]
    arr = table.reshape(batch_shape + tables.shape_of(pa, p.cards) + (p.card(v),))
    axes_now = list(pa) + [v]
    target = tables.scope_of(axes_now)
    perm = list(range(batch_ndim)) + [batch_ndim + axes_now.index(u) for u in target]
    return arr.transpose(perm)


def _forward(id_: InfluenceDiagram, p: Parametrization, rjt: RootedJunctionTree,
             dec_tables: dict[int, np.ndarray],
             batch_ndim: int = 0) -> dict[int, np.ndarray]:
    """Cluster moments for every vertex, in the cluster tree order.

    dec_tables[v] is (batch..., rows, card_v); it need not be row-stochastic
    (the pass is linear in it), which best-response extraction exploits.
    """
    _require_normalized(rjt)
    cards = p.cards
    factors: dict[int, np.ndarray] = {}
    for v in id_.vertices:
        if id_.kind(v) == DECISION:
            factors[v] = _decision_factor(dec_tables[v], id_, p, v, batch_ndim)
        else:
            factors[v] = p.factor(id_, v)

    moments: dict[int, np.ndarray] = {}
    for i in rjt.tree_order():
        (v,) = rjt.offspring(i)
        scope = tables.scope_of(rjt.clusters[i])
        fa_scope = tables.scope_of(id_.graph.family(v))
        f = factors[v]
        f_bn = batch_ndim if id_.kind(v) == DECISION else 0
        pi = rjt.parents[i]
        if pi is None:
            # root clusters are singletons {v} for normalized trees
            if scope != (v,):
                raise ValueError("root cluster is not a singleton")
            moments[v] = f if f_bn else np.broadcast_to(
                f, (1,) * batch_ndim + f.shape) if batch_ndim else f
            continue
        (u,) = rjt.offspring(pi)
        par_scope = tables.scope_of(rjt.clusters[pi])
        resid = tables.scope_of(rjt.residual(v))
        m = tables.marginalize(moments[u], par_scope, resid,
                               batch_ndim=batch_ndim)
        m = tables.expand(m, resid, scope, batch_ndim=batch_ndim)
        fx = tables.expand(f, fa_scope, scope, batch_ndim=f_bn)
        if batch_ndim and f_bn == 0:
            fx = fx.reshape((1,) * batch_ndim + fx.shape)
        moments[v] = m * fx
    return moments


def policy_moments(id_: InfluenceDiagram, p: Parametrization,
                   rjt: RootedJunctionTree, delta: Policy) -> MomentVector:
    """Exact cluster marginals of the distribution induced by the policy."""
    missing = set(id_.decisions) - set(delta.tables)
    if missing:
        raise IncompletePolicy(
            f"policy lacks tables for {sorted(id_.label(v) for v in missing)}")
    moments = _forward(id_, p, rjt, delta.tables)
    return MomentVector(rjt, p.cards, moments)


def _utility_value(id_: InfluenceDiagram, p: Parametrization,
                   rjt: RootedJunctionTree, moments: dict[int, np.ndarray],
                   batch_ndim: int = 0):
    total = 0.0
    for v in id_.utilities:
        scope = tables.scope_of(rjt.cluster_of(v))
        mv = tables.marginalize(moments[v], scope, (v,), batch_ndim=batch_ndim)
        total = total + mv @ p.rewards[v]
    return total


def expected_utility(id_: InfluenceDiagram, p: Parametrization,
                     rjt: RootedJunctionTree, delta: Policy) -> float:
    """Expected total reward of the policy: sum_v <r_v, mu_v>."""
    mv = policy_moments(id_, p, rjt, delta)
    return float(sum(float(mv.vertex_marginal(v) @ p.rewards[v])
                     for v in id_.utilities))


def conditional_b_given_m(id_: InfluenceDiagram, p: Parametrization,
                          rjt: RootedJunctionTree, v: int) -> np.ndarray:
    """Policy-invariant conditional p_{B(C_v)|M(C_v)} as a table over C_v.

    Computed by one inference pass under the uniform policy; entries with a
    zero-probability blanket assignment are set to 0. Returns an empty
    array when B(C_v) is empty.
    """
    split = free_split(id_, rjt.cluster_of(v))
    if not split.free:
        return np.empty(0)
    mv = policy_moments(id_, p, rjt, Policy.uniform(id_, p))
    scope = tables.scope_of(split.cluster)
    mu = mv.cluster[v]
    mu_m = tables.marginalize(mu, scope, split.blanket)
    mu_m = tables.expand(mu_m, tables.scope_of(split.blanket), scope)
    cond = np.divide(mu, np.broadcast_to(mu_m, mu.shape),
                     out=np.zeros_like(mu),
                     where=np.broadcast_to(mu_m, mu.shape) > 0)
    return cond


def _policy_space(id_: InfluenceDiagram, p: Parametrization):
    decisions = list(id_.decisions)
    rows = {v: p.n_parent_rows(id_, v) for v in decisions}
    counts = {v: p.card(v) ** rows[v] for v in decisions}
    total = math.prod(counts.values()) if decisions else 1
    return decisions, rows, counts, total


def deterministic_policy_count(id_: InfluenceDiagram, p: Parametrization) -> int:
    """|Delta_det| = prod_v card(v) ** (number of parent assignments)."""
    return _policy_space(id_, p)[3]


def _choice_tables(v_card: int, n_rows: int, choices: np.ndarray) -> np.ndarray:
    """Deterministic tables (len(choices), n_rows, card) for choice indices.

    A choice index encodes the per-row actions as base-card digits, row 0
    most significant, so smaller indices are lexicographically smaller
    policies.
    """
    acts = np.empty((len(choices), n_rows), dtype=np.int64)
    for r in range(n_rows):
        power = v_card ** (n_rows - 1 - r)
        acts[:, r] = (choices // power) % v_card
    return np.eye(v_card)[acts]


def brute_force_meu(id_: InfluenceDiagram, p: Parametrization,
                    cap: int = 10_000_000,
                    rjt: Optional[RootedJunctionTree] = None,
                    chunk: int = 4096) -> tuple[Policy, float]:
    """Enumerate all deterministic policies and return the best one.

    Evaluation runs as chunked batched forward passes on a rooted junction
    tree; ties resolve to the lexicographically smallest policy.
    """
    decisions, rows, counts, total = _policy_space(id_, p)
    if total > cap:
        raise TooManyPolicies(f"{total} deterministic policies exceeds cap {cap}")
    if rjt is None:
        from .rjt import build_rjt_auto
        rjt = build_rjt_auto(id_)
    _require_normalized(rjt)

    if not decisions:
        val = expected_utility(id_, p, rjt, Policy({}, deterministic=True))
        return Policy({}, deterministic=True), val

    radices = [counts[v] for v in decisions]
    best_val = -np.inf
    best_idx = -1
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        dec_tables = {}
        # row-major decomposition over decisions (first decision most significant)
        div = total
        for v, radix in zip(decisions, radices):
            div //= radix
            digit = (idx // div) % radix
            dec_tables[v] = _choice_tables(p.card(v), rows[v], digit)
        moments = _forward(id_, p, rjt, dec_tables, batch_ndim=1)
        vals = np.broadcast_to(
            np.asarray(_utility_value(id_, p, rjt, moments, batch_ndim=1)),
            (len(idx),))
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = float(vals[k])
            best_idx = start + k

    div = total
    tabs = {}
    for v, radix in zip(decisions, radices):
        div //= radix
        digit = (best_idx // div) % radix
        tabs[v] = _choice_tables(p.card(v), rows[v], np.array([digit]))[0]
    return Policy(tabs, deterministic=True), best_val


def best_response(id_: InfluenceDiagram, p: Parametrization,
                  rjt: RootedJunctionTree, delta: Policy, v: int) -> np.ndarray:
    """Exact argmax local table for decision v, others held fixed.

    The expected utility is linear in the local table, so its coefficients
    are read off from one batched forward pass over the basis tables
    (one indicator per (parent row, action)). Ties break toward the
    smallest action index.
    """
    if id_.kinds.get(v) != DECISION:
        raise NotDecisionVertex(f"{v} is not a decision vertex")
    n_rows = p.n_parent_rows(id_, v)
    card = p.card(v)
    n = n_rows * card
    basis = np.eye(n).reshape(n, n_rows, card)
    dec_tables = {}
    for u in id_.decisions:
        if u == v:
            dec_tables[u] = basis
        else:
            t = delta.tables[u]
            dec_tables[u] = np.broadcast_to(t, (n,) + t.shape)
    moments = _forward(id_, p, rjt, dec_tables, batch_ndim=1)
    coeff = np.asarray(_utility_value(id_, p, rjt, moments, batch_ndim=1))
    coeff = np.broadcast_to(coeff, (n,)).copy().reshape(n_rows, card)
    table = np.zeros((n_rows, card))
    table[np.arange(n_rows), np.argmax(coeff, axis=1)] = 1.0
    return table


class SpuResult(NamedTuple):
    policy: Policy
    value: float
    sweeps: int


def spu(id_: InfluenceDiagram, p: Parametrization, rjt: RootedJunctionTree,
        delta0: Policy, sweep_order: Optional[Sequence[int]] = None,
        max_sweeps: int = 100, tol: float = 1e-9) -> SpuResult:
    """Single policy update: coordinate ascent over per-decision best responses.

    Sweeps repeat until no replacement improves the value by more than tol
    or max_sweeps is reached; the value sequence is nondecreasing. On a
    soluble diagram with the default order (reverse topological for the
    relevance graph) one sweep reaches the optimum.
    """
    missing = set(id_.decisions) - set(delta0.tables)
    if missing:
        raise IncompletePolicy(
            f"policy lacks tables for {sorted(id_.label(v) for v in missing)}")
    if sweep_order is None:
        if is_soluble(id_):
            sweep_order = list(reversed(topological_sort(relevance_graph(id_))))
        else:
            full = topological_sort(id_.graph)
            sweep_order = [v for v in reversed(full) if id_.kind(v) == DECISION]
    tabs = {v: t.copy() for v, t in delta0.tables.items()}
    value = expected_utility(id_, p, rjt, Policy(tabs))
    sweeps = 0
    for _ in range(max_sweeps):
        sweeps += 1
        improved = False
        for v in sweep_order:
            cand = best_response(id_, p, rjt, Policy(tabs), v)
            new_tabs = dict(tabs)
            new_tabs[v] = cand
            new_val = expected_utility(id_, p, rjt, Policy(new_tabs))
            if new_val > value + tol:
                tabs = new_tabs
                value = new_val
                improved = True
        if not improved:
            break
    deterministic = all(np.all((t == 0.0) | (t == 1.0)) for t in tabs.values())
    return SpuResult(Policy(tabs, deterministic=deterministic), value, sweeps)
