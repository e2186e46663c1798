"""Minimum-cost linear sum assignment with deterministic tie-breaking.

A classic O(n^3) Hungarian solver over the square-padded matrix yields the
optimal value and dual potentials; a second pass canonicalizes the returned
pairing to the lexicographically smallest optimal one (lowest row index,
then lowest column index) by walking the zero-reduced-cost graph. Matrices
here are small - a node's children or a sign's FSUs - so clarity wins over
asymptotics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class NonFiniteEntryError(ValueError):
    """Raised when a cost matrix contains NaN or infinity."""


@dataclass(frozen=True)
class AssignmentResult:
    min_sum: float
    pairs: tuple[tuple[int, int], ...]


def _validate(matrix: Sequence[Sequence[float]]) -> tuple[int, int]:
    rows = len(matrix)
    cols = len(matrix[0]) if rows else 0
    for i, row in enumerate(matrix):
        if len(row) != cols:
            raise ValueError(f"row {i} has {len(row)} entries, expected {cols}")
        for j, entry in enumerate(row):
            if not math.isfinite(entry):
                raise NonFiniteEntryError(f"non-finite entry at ({i}, {j}): {entry!r}")
            if entry < 0:
                raise ValueError(f"negative entry at ({i}, {j}): {entry!r}")
    return rows, cols


def _solve_square(cost: list[list[float]], n: int) -> tuple[list[int], list[float], list[float]]:
    """Potential-based Hungarian on an n x n matrix.

    Returns (col_of_row, u, v) where u/v are the 1-indexed dual potentials
    satisfying complementary slackness with the returned matching.
    """
    INF = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j] = row matched to column j (1-indexed, 0 = free)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = cost[i0 - 1][j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of_row = [0] * n
    for j in range(1, n + 1):
        if p[j]:
            col_of_row[p[j] - 1] = j - 1
    return col_of_row, u, v


def _try_augment(
    row: int,
    tight: list[list[bool]],
    match_col: list[int],
    fixed_cols: set[int],
    visited: list[bool],
) -> bool:
    """Kuhn augmenting step over tight edges, skipping fixed columns."""
    n = len(tight)
    for j in range(n):
        if j in fixed_cols or visited[j] or not tight[row][j]:
            continue
        visited[j] = True
        if match_col[j] < 0 or _try_augment(match_col[j], tight, match_col, fixed_cols, visited):
            match_col[j] = row
            return True
    return False


def _canonical_pairs(
    cost: list[list[float]],
    n: int,
    rows: int,
    cols: int,
    col_of_row: list[int],
    u: list[float],
    v: list[float],
) -> list[tuple[int, int]]:
    """Pick the lexicographically smallest optimal pairing.

    Every optimal matching uses only edges whose reduced cost is zero, and
    any perfect matching of such edges is optimal, so it suffices to search
    the tight graph. Rows are fixed in order to their smallest feasible
    column (real columns preferred over padding).
    """
    scale = max((abs(x) for row in cost for x in row), default=1.0)
    eps = 1e-9 * max(1.0, scale)
    tight = [
        [abs(cost[i][j] - u[i + 1] - v[j + 1]) <= eps for j in range(n)] for i in range(n)
    ]
    match_col = [-1] * n
    for i, j in enumerate(col_of_row):
        match_col[j] = i

    fixed_cols: set[int] = set()
    pairs: list[tuple[int, int]] = []
    for i in range(rows):
        # Real columns first so a row prefers being matched over padded out.
        candidates = [j for j in range(cols) if j not in fixed_cols and tight[i][j]]
        candidates += [j for j in range(cols, n) if j not in fixed_cols and tight[i][j]]
        chosen = -1
        for j in candidates:
            current = next(c for c, r in enumerate(match_col) if r == i)
            if current == j:
                chosen = j
                break
            displaced = match_col[j]
            match_col[j] = i
            match_col[current] = -1
            visited = [False] * n
            visited[j] = True
            if displaced < 0 or _try_augment(displaced, tight, match_col, fixed_cols, visited):
                chosen = j
                break
            match_col[j] = displaced  # revert
            match_col[current] = i
        assert chosen >= 0, "current matching column is always feasible"
        fixed_cols.add(chosen)
        if chosen < cols:
            pairs.append((i, chosen))
    return pairs


def linear_sum_assignment(matrix: Sequence[Sequence[float]]) -> AssignmentResult:
    """Minimum-cost maximum-cardinality matching of a rectangular matrix.

    Returns min(M, N) pairs; surplus rows or columns stay unmatched. Among
    equal-cost matchings the pairing with the lowest row index, then lowest
    column index, is returned.
    """
    rows, cols = _validate(matrix)
    if rows == 0 or cols == 0:
        return AssignmentResult(min_sum=0.0, pairs=())
    n = max(rows, cols)
    padded = [
        [float(matrix[i][j]) if i < rows and j < cols else 0.0 for j in range(n)]
        for i in range(n)
    ]
    col_of_row, u, v = _solve_square(padded, n)
    pairs = _canonical_pairs(padded, n, rows, cols, col_of_row, u, v)
    min_sum = float(sum(matrix[i][j] for i, j in pairs))
    return AssignmentResult(min_sum=min_sum, pairs=tuple(pairs))
