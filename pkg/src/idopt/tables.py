"""Dense table helpers shared by inference and model assembly.

A table over a *scope* (a sorted tuple of vertex ids) is an ndarray whose
axes follow the scope order, axis i having size ``cards[scope[i]]``.
Assignments enumerate in C order (row-major), which fixes every flat index
used in variable names, CPT layouts and LP export.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np


def scope_of(vertices: Iterable[int]) -> tuple[int, ...]:
    return tuple(sorted(vertices))


def shape_of(scope: Sequence[int], cards: Mapping[int, int]) -> tuple[int, ...]:
    return tuple(cards[v] for v in scope)


def assignments(scope: Sequence[int], cards: Mapping[int, int]):
    """Iterate assignments of ``scope`` in row-major order."""
    return np.ndindex(*shape_of(scope, cards))


def factor_from_cpt(cpt: np.ndarray, parents: Iterable[int], v: int,
                    cards: Mapping[int, int]) -> np.ndarray:
    """Reshape a (n_parent_rows, card_v) CPT into a table over fa(v).

    CPT rows are row-major over the parents sorted by id, matching the
    instance JSON layout.
    """
    pa = scope_of(parents)
    arr = np.asarray(cpt, dtype=float).reshape(shape_of(pa, cards) + (cards[v],))
    axes_now = list(pa) + [v]
    target = scope_of(axes_now)
    perm = [axes_now.index(u) for u in target]
    return arr.transpose(perm)


def expand(table: np.ndarray, scope: Sequence[int], target: Sequence[int],
           batch_ndim: int = 0) -> np.ndarray:
    """View ``table`` (over ``scope``) as broadcastable over ``target``.

    ``scope`` must be a subset of ``target``; both sorted. Leading
    ``batch_ndim`` axes are preserved.
    """
    shape = list(table.shape[:batch_ndim])
    pos = {v: i for i, v in enumerate(scope)}
    for v in target:
        if v in pos:
            shape.append(table.shape[batch_ndim + pos[v]])
        else:
            shape.append(1)
    return table.reshape(shape)


def marginalize(table: np.ndarray, scope: Sequence[int], keep: Sequence[int],
                batch_ndim: int = 0) -> np.ndarray:
    """Sum out the scope axes not in ``keep``; result follows sorted ``keep``."""
    keep_set = set(keep)
    axes = tuple(batch_ndim + i for i, v in enumerate(scope) if v not in keep_set)
    return table.sum(axis=axes) if axes else table


def flat_index(scope: Sequence[int], cards: Mapping[int, int],
               assignment: Sequence[int]) -> int:
    idx = 0
    for v, x in zip(scope, assignment):
        idx = idx * cards[v] + int(x)
    return idx


def sub_assignment(scope: Sequence[int], assignment: Sequence[int],
                   sub: Sequence[int]) -> tuple[int, ...]:
    pos = {v: i for i, v in enumerate(scope)}
    return tuple(int(assignment[pos[v]]) for v in sub)
