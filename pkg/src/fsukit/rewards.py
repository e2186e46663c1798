"""Tree edit distance and the reward stack built on it.

The distance recursion compares nodes bottom-up: leaf pairs cost 0/1/2
(equal / same name different value / different name), a leaf against a
subtree costs size + 1, and internal nodes pay 1 for a name change plus the
cost of matching their children. Unordered children are matched by
minimum-cost assignment including the delete/insert penalty of whatever
stays unmatched, which keeps the result well-defined and symmetric when
several pairings tie. Ordered children (Lane groups) align by position.

The scalar training reward gates the activated distance behind the two
binary format rewards, so malformed output always scores zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .assignment import linear_sum_assignment
from .parsing import parse_response
from .schema import SignDecomposition
from .tree import ORDERED, TreeNode, build_tree


@dataclass(frozen=True)
class RewardConfig:
    """Activation shape: reward = 1 - (sigma1 * tanh(x / sigma2) + sigma3)."""

    sigma1: float = 0.5
    sigma2: float = 5.0
    sigma3: float = 0.5

    def __post_init__(self) -> None:
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if not 0.0 <= self.sigma3 <= 1.0:
            raise ValueError("sigma3 must be within [0, 1]")
        if self.sigma1 < 0:
            raise ValueError("sigma1 must be nonnegative")


@dataclass(frozen=True)
class RewardBreakdown:
    """Per-sample rewards: the two binary gates, the raw distance (present
    only when both gates pass), the activated distance, and their product."""

    r_cfsu: int
    r_fsu: int
    ted: Optional[int]
    r_ted: float
    r_mixed: float


def distance_to_reward(distance: float, cfg: RewardConfig = RewardConfig()) -> float:
    """Squash a nonnegative distance into (1 - sigma1 - sigma3, 1 - sigma3]."""
    return 1.0 - (cfg.sigma1 * math.tanh(distance / cfg.sigma2) + cfg.sigma3)


def _unordered_children_cost(c1: tuple[TreeNode, ...], c2: tuple[TreeNode, ...]) -> int:
    m, n = len(c1), len(c2)
    delete_pen = [c.size + 1 for c in c1]
    insert_pen = [c.size + 1 for c in c2]
    dist = [[tree_edit_distance(a, b) for b in c2] for a in c1]

    # Fold the surplus side's unmatched penalty into the matrix (shifted to
    # stay nonnegative) so the assignment minimizes matched cost plus
    # penalties, not matched cost alone; ties then cannot change the total.
    if m == n:
        adjusted = [[float(dist[i][j]) for j in range(n)] for i in range(m)]
    elif m < n:
        top = max(insert_pen)
        adjusted = [[dist[i][j] + top - insert_pen[j] for j in range(n)] for i in range(m)]
    else:
        top = max(delete_pen)
        adjusted = [[dist[i][j] + top - delete_pen[i] for j in range(n)] for i in range(m)]

    result = linear_sum_assignment(adjusted)
    matched_rows = {r for r, _ in result.pairs}
    matched_cols = {c for _, c in result.pairs}
    total = sum(dist[r][c] for r, c in result.pairs)
    total += sum(delete_pen[i] for i in range(m) if i not in matched_rows)
    total += sum(insert_pen[j] for j in range(n) if j not in matched_cols)
    return total


def tree_edit_distance(a: TreeNode, b: TreeNode) -> int:
    """Minimum edit cost between two sign trees."""
    if a.is_leaf and b.is_leaf:
        if a.name != b.name:
            return 2
        return 0 if a.value == b.value else 1
    if a.is_leaf:
        return b.size + 1
    if b.is_leaf:
        return a.size + 1

    cost = 0 if a.name == b.name else 1
    if a.policy == ORDERED and b.policy == ORDERED:
        k = min(len(a.children), len(b.children))
        cost += sum(tree_edit_distance(a.children[i], b.children[i]) for i in range(k))
        cost += sum(c.size + 1 for c in a.children[k:])
        cost += sum(c.size + 1 for c in b.children[k:])
        return cost
    return cost + _unordered_children_cost(a.children, b.children)


def reward_mixed(
    raw: str,
    gt: SignDecomposition,
    cfg: RewardConfig = RewardConfig(),
    *,
    lenient_format: bool = False,
) -> RewardBreakdown:
    """Score one raw response against a ground-truth decomposition.

    Total: any text yields a breakdown. The distance is computed only when
    the response is both well-formed and parsable; otherwise the activated
    reward is zero and so is the product.
    """
    response = parse_response(raw, lenient_format=lenient_format)
    r_cfsu = int(response.format_ok)
    r_fsu = int(response.parse_ok)
    if r_cfsu and r_fsu and response.decomposition is not None:
        distance = tree_edit_distance(build_tree(response.decomposition), build_tree(gt))
        r_ted = distance_to_reward(distance, cfg)
        return RewardBreakdown(
            r_cfsu=r_cfsu, r_fsu=r_fsu, ted=distance, r_ted=r_ted, r_mixed=r_ted
        )
    return RewardBreakdown(r_cfsu=r_cfsu, r_fsu=r_fsu, ted=None, r_ted=0.0, r_mixed=0.0)
