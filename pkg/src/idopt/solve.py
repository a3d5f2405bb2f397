"""LP solving, best-first branch and bound over binary decision variables,
and the LP-file round trip through an external solver process.

The LP kernel is HiGHS dual simplex (through scipy), which returns optimal
basic solutions deterministically for a fixed model ordering. Branch and
bound fixes one binary variable per branch, explores nodes best-bound
first, and prunes against the incumbent.
"""

from __future__ import annotations

import heapq
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .diagram import InfluenceDiagram, Policy
from .errors import (FractionalSolution, InfeasibleModel, SolutionParseError,
                     SolverProcessFailed, UnboundedModel)
from .model import EQ, LE, LinearModel, read_solution

OPTIMAL = "optimal"
TIME_LIMIT = "time_limit"

FEAS_TOL = 1e-6
INT_TOL = 1e-6


@dataclass
class SolveResult:
    status: str
    value: float
    assignment: dict[str, float]
    bound: float
    nodes: int = 0
    wall_time: float = 0.0

    def gap(self) -> float:
        return abs(self.bound - self.value) / max(1.0, abs(self.value))


@dataclass
class _Matrices:
    c: np.ndarray
    a_ub: Optional[sp.csr_matrix]
    b_ub: np.ndarray
    a_eq: Optional[sp.csr_matrix]
    b_eq: np.ndarray


def _matrices(model: LinearModel) -> _Matrices:
    n = len(model.variables)
    c = np.zeros(n)
    for i, coef in model.objective:
        c[i] += coef
    rows_ub, cols_ub, vals_ub, b_ub = [], [], [], []
    rows_eq, cols_eq, vals_eq, b_eq = [], [], [], []
    for con in model.constraints:
        if con.sense == EQ:
            r = len(b_eq)
            for i, coef in con.terms:
                rows_eq.append(r)
                cols_eq.append(i)
                vals_eq.append(coef)
            b_eq.append(con.rhs)
        else:
            sign = 1.0 if con.sense == LE else -1.0
            r = len(b_ub)
            for i, coef in con.terms:
                rows_ub.append(r)
                cols_ub.append(i)
                vals_ub.append(sign * coef)
            b_ub.append(sign * con.rhs)
    a_ub = (sp.csr_matrix((vals_ub, (rows_ub, cols_ub)), shape=(len(b_ub), n))
            if b_ub else None)
    a_eq = (sp.csr_matrix((vals_eq, (rows_eq, cols_eq)), shape=(len(b_eq), n))
            if b_eq else None)
    return _Matrices(c, a_ub, np.asarray(b_ub), a_eq, np.asarray(b_eq))


def _solve_relaxation(mats: _Matrices, bounds: list[tuple[float, float]]):
    res = linprog(-mats.c, A_ub=mats.a_ub, b_ub=mats.b_ub if mats.a_ub is not None else None,
                  A_eq=mats.a_eq, b_eq=mats.b_eq if mats.a_eq is not None else None,
                  bounds=bounds, method="highs-ds")
    if res.status == 2:
        return None
    if res.status == 3:
        raise UnboundedModel("LP relaxation is unbounded; the model is malformed")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    return res.x, float(-res.fun)


def solve_lp(model: LinearModel) -> SolveResult:
    """Solve the linear relaxation (binary flags ignored).

    Returns an optimal basic solution; raises InfeasibleModel or
    UnboundedModel otherwise.
    """
    start = time.perf_counter()
    mats = _matrices(model)
    bounds = [(v.lb, v.ub) for v in model.variables]
    sol = _solve_relaxation(mats, bounds)
    if sol is None:
        raise InfeasibleModel("LP is infeasible")
    x, value = sol
    violations = model.check(x, tol=FEAS_TOL)
    if violations:
        raise RuntimeError("solver returned an infeasible point: "
                           + "; ".join(violations[:3]))
    return SolveResult(OPTIMAL, value, model.to_assignment(x), bound=value,
                       nodes=0, wall_time=time.perf_counter() - start)


def _is_integral(x: np.ndarray, binaries: list[int]) -> bool:
    return all(min(x[i], 1.0 - x[i]) <= INT_TOL for i in binaries)


def solve_milp(model: LinearModel, warm: Optional[Mapping[str, float]] = None,
               time_limit: Optional[float] = None) -> SolveResult:
    """Best-first branch and bound on the model's binary variables.

    Branches on the most fractional binary (ties by registration order);
    a feasible warm start provides the initial incumbent. On time limit
    the incumbent and the best remaining bound are returned.
    """
    start = time.perf_counter()
    mats = _matrices(model)
    base_bounds = [(v.lb, v.ub) for v in model.variables]
    binaries = model.binary_indices

    inc_val = -np.inf
    inc_x: Optional[np.ndarray] = None
    if warm is not None:
        xw = model.to_vector(warm)
        if not model.check(xw, tol=FEAS_TOL) and _is_integral(xw, binaries):
            inc_val = model.objective_value(xw)
            inc_x = xw

    def prune_tol(v: float) -> float:
        return 1e-8 * max(1.0, abs(v))

    root = _solve_relaxation(mats, base_bounds)
    if root is None:
        raise InfeasibleModel("root LP is infeasible")
    nodes_solved = 0
    counter = 0
    heap: list[tuple[float, int, dict[int, float], np.ndarray, float]] = []
    x0, bound0 = root
    heap.append((-bound0, counter, {}, x0, bound0))

    def timed_out() -> bool:
        return time_limit is not None and time.perf_counter() - start > time_limit

    status = OPTIMAL
    while heap:
        neg_bound, _, fixes, x, bound = heapq.heappop(heap)
        if bound <= inc_val + prune_tol(inc_val):
            heap.clear()
            break
        if _is_integral(x, binaries):
            if bound > inc_val:
                inc_val = bound
                inc_x = x
            continue
        if timed_out():
            status = TIME_LIMIT
            heapq.heappush(heap, (neg_bound, counter + 10 ** 9, fixes, x, bound))
            break
        frac_scores = [(min(x[i], 1.0 - x[i]), i) for i in binaries
                       if i not in fixes]
        score, branch_var = max(frac_scores, key=lambda t: (t[0], -t[1]))
        for val in (0.0, 1.0):
            child = dict(fixes)
            child[branch_var] = val
            child_bounds = list(base_bounds)
            for i, fv in child.items():
                child_bounds[i] = (fv, fv)
            sol = _solve_relaxation(mats, child_bounds)
            nodes_solved += 1
            counter += 1
            if sol is None:
                continue
            cx, cval = sol
            if cval <= inc_val + prune_tol(inc_val):
                continue
            if _is_integral(cx, binaries):
                if cval > inc_val:
                    inc_val = cval
                    inc_x = cx
            else:
                heapq.heappush(heap, (-cval, counter, child, cx, cval))

    best_open = max((-h[0] for h in heap), default=-np.inf)
    global_bound = max(inc_val, best_open) if status == TIME_LIMIT else inc_val
    if inc_x is None:
        if status == TIME_LIMIT:
            return SolveResult(TIME_LIMIT, -np.inf, {}, bound=global_bound,
                               nodes=nodes_solved,
                               wall_time=time.perf_counter() - start)
        raise InfeasibleModel("no integral solution exists")
    violations = model.check(inc_x, tol=FEAS_TOL)
    if violations:
        raise RuntimeError("incumbent violates the model: "
                           + "; ".join(violations[:3]))
    return SolveResult(status, float(inc_val), model.to_assignment(inc_x),
                       bound=float(global_bound), nodes=nodes_solved,
                       wall_time=time.perf_counter() - start)


def extract_policy(id_: InfluenceDiagram, result: SolveResult,
                   p=None) -> Policy:
    """Read the delta variables of an integral solve into a deterministic
    policy. Raises FractionalSolution when any entry is not within 1e-6 of
    {0,1} or a row does not select exactly one action."""
    from . import tables as tb
    from .formulation import delta_name

    if p is None:
        raise ValueError("parametrization required to shape the policy tables")
    tabs = {}
    for v in id_.decisions:
        lab = id_.label(v)
        pa = tb.scope_of(id_.graph.parents(v))
        rows = p.n_parent_rows(id_, v)
        t = np.zeros((rows, p.card(v)))
        for r, xpa in enumerate(tb.assignments(pa, p.cards)):
            for xv in range(p.card(v)):
                val = result.assignment.get(delta_name(lab, xpa, xv))
                if val is None:
                    raise FractionalSolution(
                        f"missing variable {delta_name(lab, xpa, xv)}")
                if min(val, 1.0 - val) > INT_TOL:
                    raise FractionalSolution(
                        f"{delta_name(lab, xpa, xv)} = {val} is fractional")
                t[r, xv] = round(val)
        if np.any(t.sum(axis=1) != 1.0):
            raise FractionalSolution(
                f"decision {lab} has a row not selecting exactly one action")
        tabs[v] = t
    return Policy(tabs, deterministic=True)


def roundtrip_external(model: LinearModel, solver_command: str,
                       workdir: Optional[str] = None) -> SolveResult:
    """Export the model, run `solver_command <lp> <sol>`, parse and check.

    The command gets the LP file path and the solution output path as its
    two arguments; the solution file holds one `<name> <value>` line per
    variable (omitted variables read as 0).
    """
    start = time.perf_counter()
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        lp_path = os.path.join(tmp, "model.lp")
        sol_path = os.path.join(tmp, "model.sol")
        model.write_lp(lp_path)
        cmd = shlex.split(solver_command) + [lp_path, sol_path]
        try:
            proc = subprocess.run(cmd, capture_output=True, text=True)
        except OSError as e:
            raise SolverProcessFailed(f"cannot run {solver_command!r}: {e}") from e
        if proc.returncode != 0:
            raise SolverProcessFailed(
                f"{solver_command!r} exited with {proc.returncode}: "
                f"{proc.stderr.strip()[:500]}")
        values = read_solution(sol_path)
    unknown = [k for k in values if not model.has_variable(k)]
    if unknown:
        raise SolutionParseError(f"solution names unknown variables: {unknown[:3]}")
    x = model.to_vector(values)
    violations = model.check(x, tol=FEAS_TOL)
    if violations:
        raise SolutionParseError("external solution violates the model: "
                                 + "; ".join(violations[:3]))
    value = model.objective_value(x)
    return SolveResult(OPTIMAL, value, model.to_assignment(x), bound=value,
                       nodes=0, wall_time=time.perf_counter() - start)
