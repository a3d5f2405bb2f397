"""Abstract linear models and CPLEX-LP-format text export/import.

Variable names follow the scheme mu[<offspring>][x,...], mud[<v>][x,...],
muv[<v>][x], delta[<v>][xpa][xv]; registration order is deterministic, so
two assemblies of the same model produce byte-identical LP files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import SolutionParseError

LE, EQ, GE = "<=", "=", ">="
_SENSES = (LE, EQ, GE)


@dataclass
class Variable:
    name: str
    lb: float = 0.0
    ub: float = 1.0
    binary: bool = False


@dataclass
class Constraint:
    name: str
    terms: tuple[tuple[int, float], ...]  # (variable index, coefficient)
    sense: str
    rhs: float


class LinearModel:
    """Variables with bounds/integrality flags, linear constraints, and a
    maximization objective."""

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: list[Variable] = []
        self._index: dict[str, int] = {}
        self.constraints: list[Constraint] = []
        self.objective: tuple[tuple[int, float], ...] = ()

    # -- construction ---------------------------------------------------------

    def add_variable(self, name: str, lb: float = 0.0, ub: float = 1.0,
                     binary: bool = False) -> int:
        if name in self._index:
            raise ValueError(f"duplicate variable name {name!r}")
        self.variables.append(Variable(name, lb, ub, binary))
        self._index[name] = len(self.variables) - 1
        return self._index[name]

    def index(self, name: str) -> int:
        return self._index[name]

    def has_variable(self, name: str) -> bool:
        return name in self._index

    def _resolve(self, terms: Union[Mapping[str, float],
                                    Iterable[tuple[str, float]]]):
        items = terms.items() if hasattr(terms, "items") else terms
        out = []
        for name, coef in items:
            if coef != 0.0:
                out.append((self._index[name], float(coef)))
        return tuple(out)

    def add_constraint(self, name: str, terms, sense: str, rhs: float) -> None:
        if sense not in _SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        self.constraints.append(
            Constraint(name, self._resolve(terms), sense, float(rhs)))

    def add_block(self, block: Iterable[tuple[str, dict, str, float]]) -> None:
        for name, terms, sense, rhs in block:
            self.add_constraint(name, terms, sense, rhs)

    def set_objective(self, terms) -> None:
        self.objective = self._resolve(terms)

    @property
    def binary_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.binary]

    # -- evaluation -----------------------------------------------------------

    def to_vector(self, assignment: Mapping[str, float]) -> np.ndarray:
        x = np.zeros(len(self.variables))
        for name, val in assignment.items():
            x[self._index[name]] = val
        return x

    def to_assignment(self, x: Sequence[float]) -> dict[str, float]:
        return {v.name: float(x[i]) for i, v in enumerate(self.variables)}

    def objective_value(self, x: Sequence[float]) -> float:
        return float(sum(c * x[i] for i, c in self.objective))

    def check(self, x: Sequence[float], tol: float = 1e-6) -> list[str]:
        """Constraint and bound violations of a point, as text."""
        out = []
        for i, v in enumerate(self.variables):
            if x[i] < v.lb - tol or x[i] > v.ub + tol:
                out.append(f"bound violated: {v.name} = {x[i]}")
        for c in self.constraints:
            lhs = sum(coef * x[i] for i, coef in c.terms)
            if c.sense == LE and lhs > c.rhs + tol:
                out.append(f"{c.name}: {lhs} <= {c.rhs} violated")
            elif c.sense == GE and lhs < c.rhs - tol:
                out.append(f"{c.name}: {lhs} >= {c.rhs} violated")
            elif c.sense == EQ and abs(lhs - c.rhs) > tol:
                out.append(f"{c.name}: {lhs} = {c.rhs} violated")
        return out

    # -- LP text format ---------------------------------------------------------

    @staticmethod
    def _num(x: float) -> str:
        return repr(float(x))

    def _expr(self, terms) -> str:
        parts = []
        for i, coef in terms:
            name = self.variables[i].name
            sign = "-" if coef < 0 else "+"
            parts.append(f"{sign} {self._num(abs(coef))} {name}")
        if not parts:
            return "0"
        first = parts[0]
        if first.startswith("+ "):
            first = first[2:]
        return " ".join([first] + parts[1:])

    def lp_string(self) -> str:
        lines = ["Maximize", f" obj: {self._expr(self.objective)}", "Subject To"]
        for c in self.constraints:
            lines.append(f" {c.name}: {self._expr(c.terms)} {c.sense} {self._num(c.rhs)}")
        lines.append("Bounds")
        for v in self.variables:
            lines.append(f" {self._num(v.lb)} <= {v.name} <= {self._num(v.ub)}")
        binaries = [v.name for v in self.variables if v.binary]
        if binaries:
            lines.append("Binaries")
            for name in binaries:
                lines.append(f" {name}")
        lines.append("End")
        return "\n".join(lines) + "\n"

    def write_lp(self, path: str) -> None:
        with open(path, "w") as f:
            f.write(self.lp_string())


_NUM_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _is_number(tok: str) -> bool:
    return bool(_NUM_RE.match(tok))


def _parse_expr(tokens: list[str]) -> list[tuple[str, float]]:
    terms = []
    sign = 1.0
    coef: Optional[float] = None
    for tok in tokens:
        if tok == "+":
            sign, coef = 1.0, None
        elif tok == "-":
            sign, coef = -1.0, None
        elif _is_number(tok):
            coef = float(tok)
        else:
            terms.append((tok, sign * (1.0 if coef is None else coef)))
            sign, coef = 1.0, None
    return terms


def parse_lp(text: str) -> LinearModel:
    """Parse the LP subset emitted by lp_string back into a LinearModel."""
    model = LinearModel()
    section = None
    obj_tokens: list[str] = []
    rows: list[tuple[str, list[str]]] = []
    bounds: list[list[str]] = []
    binaries: list[str] = []
    for raw in text.splitlines():
        line = raw.split("\\")[0].strip()
        if not line:
            continue
        low = line.lower()
        if low in ("maximize", "maximise", "max"):
            section = "obj"
            continue
        if low in ("subject to", "st", "s.t.", "such that"):
            section = "rows"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low in ("binaries", "binary", "bin"):
            section = "bin"
            continue
        if low == "end":
            break
        if low in ("minimize", "minimise", "min"):
            raise SolutionParseError("only maximization models are supported")
        if section == "obj":
            if ":" in line:
                line = line.split(":", 1)[1]
            obj_tokens.extend(line.split())
        elif section == "rows":
            if ":" in line:
                name, rest = line.split(":", 1)
                rows.append((name.strip(), rest.split()))
            else:
                if not rows:
                    raise SolutionParseError("constraint continuation before any row")
                rows[-1][1].extend(line.split())
        elif section == "bounds":
            bounds.append(line.split())
        elif section == "bin":
            binaries.extend(line.split())
        else:
            raise SolutionParseError(f"unexpected line outside any section: {raw!r}")

    seen: dict[str, tuple[float, float]] = {}

    def note(name):
        if name not in seen:
            seen[name] = (0.0, 1.0)

    obj_terms = _parse_expr(obj_tokens)
    for name, _ in obj_terms:
        note(name)
    parsed_rows = []
    for name, toks in rows:
        sense = next((s for s in (LE, GE, EQ) if s in toks), None)
        if sense is None:
            raise SolutionParseError(f"row {name!r} has no sense")
        k = toks.index(sense)
        lhs, rhs = toks[:k], toks[k + 1:]
        if len(rhs) != 1 or not _is_number(rhs[0]):
            raise SolutionParseError(f"row {name!r} has a malformed right-hand side")
        terms = _parse_expr(lhs)
        for nm, _ in terms:
            note(nm)
        parsed_rows.append((name, terms, sense, float(rhs[0])))
    for toks in bounds:
        # forms: "lb <= name <= ub", "name <= ub", "name = v"
        if len(toks) == 5 and toks[1] == LE and toks[3] == LE:
            name = toks[2]
            note(name)
            seen[name] = (float(toks[0]), float(toks[4]))
        elif len(toks) == 3 and toks[1] in (LE, EQ) and _is_number(toks[2]):
            name = toks[0]
            note(name)
            lo = seen[name][0] if toks[1] == LE else float(toks[2])
            seen[name] = (lo, float(toks[2]))
        else:
            raise SolutionParseError(f"unsupported bound line: {' '.join(toks)}")
    for name in binaries:
        note(name)

    for name, (lb, ub) in seen.items():
        model.add_variable(name, lb=lb, ub=ub, binary=name in binaries)
    model.set_objective(obj_terms)
    for name, terms, sense, rhs in parsed_rows:
        model.add_constraint(name, terms, sense, rhs)
    return model


def write_solution(path: str, assignment: Mapping[str, float]) -> None:
    """Solution file format: one `<varname> <value>` line per variable."""
    with open(path, "w") as f:
        for name, val in assignment.items():
            f.write(f"{name} {repr(float(val))}\n")


def read_solution(path: str) -> dict[str, float]:
    out: dict[str, float] = {}
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise SolutionParseError(f"cannot read solution file: {e}") from e
    for k, raw in enumerate(text.splitlines()):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2 or not _is_number(parts[1]):
            raise SolutionParseError(f"malformed solution line {k + 1}: {raw!r}")
        out[parts[0]] = float(parts[1])
    return out
