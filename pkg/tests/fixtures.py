"""Shared fixtures: reference responses, independent oracles, and a
deterministic synthetic benchmark generator."""

from __future__ import annotations

import random
from itertools import permutations
from typing import Optional

from fsukit import (
    AttrValue,
    BenchmarkSample,
    FsuEntry,
    FsuGroup,
    FunctionType,
    GlobalAttributes,
    SignDecomposition,
    canonical_serialize,
)
from fsukit.tree import ORDERED, TreeNode

# Reference Direction response: two route entries, declared count two,
# "Blurriness" spelling exercising the alias table.
DIRECTION_FSU_TEXT = (
    '{"Traffic Sign": "Yes", "Electronic Sign": "No", "Obstruction": "Yes", '
    '"Truncation": "No", "Blurriness": "No", "Function Type": "Direction", '
    '"Number of Direction Information": "2", '
    '"Direction Information 1": {"Direction": "Go Straight", "Via": "Li Yang Road", '
    '"Destination": " [The Bund, Haining Road] "}, '
    '"Direction Information 2": {"Direction": "Turn Right", "Via": "Li Yang Road", '
    '"Destination": "Obstruction"}}'
)
DIRECTION_FSU_RESPONSE = f"<FSU>{DIRECTION_FSU_TEXT}</FSU>"
GOLDEN_CAPTION = (
    "A blue rectangular direction sign with a white crossroad symbol and two "
    "route rows pointing straight ahead and right."
)
GOLDEN_RESPONSE = f"<caption>{GOLDEN_CAPTION}</caption>{DIRECTION_FSU_RESPONSE}"

# Three-entry variant with the alternate global spellings
# (Blocked/Truncated/Blurred) and list destinations.
THREE_ENTRY_FSU_TEXT = (
    '{"Traffic Sign": "Yes", "Electronic Sign": "No", "Blocked": "No", '
    '"Truncated": "No", "Blurred": "No", "Function Type": "Direction", '
    '"Number of Direction Information": "3", '
    '"Direction Information 1": {"Direction": "Straight Ahead", '
    '"Destination": " [Fulong Road, Fulong Rd] "}, '
    '"Direction Information 2": {"Direction": "Left Turn", '
    '"Destination": " [Mingle Road, Mingle Rd] "}, '
    '"Direction Information 3": {"Direction": "Right Turn", '
    '"Destination": " [Yangtaishan Road, Yangtaishan Rd] "}}'
)
THREE_ENTRY_RESPONSE = (
    "<caption>A blue crossroad sign listing three roads with their turn "
    f"directions.</caption><FSU>{THREE_ENTRY_FSU_TEXT}</FSU>"
)

TURNS = (
    "Go Straight",
    "Turn Left",
    "Turn Right",
    "U-Turn",
    "Left or Straight",
    "Right or Straight",
    "Left or U-Turn",
    "Merge Left",
    "Merge Right",
)
ROADS = (
    "Fulong Rd",
    "Mingle Rd",
    "Yangtaishan Rd",
    "Li Yang Road",
    "Haining Road",
    "The Bund",
    "Renmin Ave",
    "Nanjing Rd",
    "Huaihai Rd",
    "Zhongshan Rd",
    "Airport Expressway",
    "North Ring Rd",
)
SPEEDS = ("40", "60", "80", "100", "120")
TIMES = ("7:00-9:00", "17:00-19:00", "0:00-24:00", "22:00-6:00")
VEHICLES = ("Trucks", "Buses", "Motorcycles", "All Vehicles", "Taxis")
LOCATIONS = ("Leftmost Lane", "Middle Lane", "Rightmost Lane", "Lane 1", "Lane 2")
SITES = ("Ahead 500 Meters", "Next Exit", "East Section", "Bridge Approach")
DETOURS = ("Follow Detour Signs", "Use Left Lane", "Exit At North Ring Rd")
DISTANCES = ("200m", "500m", "1km", "2km")


def _direction_entry(rng: random.Random, index: int) -> FsuEntry:
    attrs = [("Direction", AttrValue.scalar(rng.choice(TURNS)))]
    if rng.random() < 0.4:
        attrs.append(("Via", AttrValue.scalar(rng.choice(ROADS))))
    if rng.random() < 0.5:
        attrs.append(
            ("Destination", AttrValue.list_of(rng.sample(ROADS, rng.randint(1, 3))))
        )
    else:
        attrs.append(("Destination", AttrValue.scalar(rng.choice(ROADS))))
    if rng.random() < 0.3:
        attrs.append(("Distance", AttrValue.scalar(rng.choice(DISTANCES))))
    return FsuEntry(function=FunctionType.DIRECTION, attrs=tuple(attrs), index=index)


def _lane_entry(rng: random.Random, index: int) -> FsuEntry:
    attrs = [("Turn", AttrValue.scalar(rng.choice(TURNS)))]
    if rng.random() < 0.4:
        attrs.append(("Electronic Sign", AttrValue.scalar(rng.choice(("Yes", "No")))))
    if rng.random() < 0.5:
        attrs.append(("Location", AttrValue.scalar(rng.choice(LOCATIONS))))
    if rng.random() < 0.3:
        attrs.append(("Speed", AttrValue.scalar(rng.choice(SPEEDS))))
    return FsuEntry(function=FunctionType.LANE, attrs=tuple(attrs), index=index)


def _notice_entry(rng: random.Random, index: int) -> FsuEntry:
    attrs = [("Vehicle Type", AttrValue.scalar(rng.choice(VEHICLES)))]
    if rng.random() < 0.5:
        attrs.append(("Time", AttrValue.scalar(rng.choice(TIMES))))
    if rng.random() < 0.4:
        attrs.append(("Speed", AttrValue.scalar(rng.choice(SPEEDS))))
    if rng.random() < 0.2:
        attrs.append(("Road Range", AttrValue.scalar(rng.choice(SITES))))
    return FsuEntry(function=FunctionType.NOTICE, attrs=tuple(attrs), index=index)


def _construction_entry(rng: random.Random, index: int) -> FsuEntry:
    attrs = [
        ("Construction Site", AttrValue.scalar(rng.choice(SITES))),
        ("Detour Information", AttrValue.scalar(rng.choice(DETOURS))),
    ]
    if rng.random() < 0.3:
        attrs.append(("Other Information", AttrValue.scalar("Slow Down")))
    return FsuEntry(function=FunctionType.CONSTRUCTION, attrs=tuple(attrs), index=index)


_ENTRY_BUILDERS = {
    FunctionType.DIRECTION: _direction_entry,
    FunctionType.LANE: _lane_entry,
    FunctionType.NOTICE: _notice_entry,
    FunctionType.CONSTRUCTION: _construction_entry,
}


def make_decomposition(
    rng: random.Random,
    function: FunctionType,
    *,
    entry_count: Optional[int] = None,
) -> SignDecomposition:
    """One realistic single-function decomposition with a consistent count."""
    if entry_count is None:
        entry_count = rng.randint(1, 4 if function == FunctionType.LANE else 3)
    entries = tuple(
        _ENTRY_BUILDERS[function](rng, i + 1) for i in range(entry_count)
    )
    globals_ = GlobalAttributes(
        traffic_sign="Yes",
        electronic_sign=rng.choice(("Yes", "No")),
        obstruction=rng.choice(("No", "No", "Yes")),
        truncation=rng.choice(("No", "No", "Yes")),
        blur=rng.choice(("No", "No", "Yes")),
        other_global_info="Overhead Gantry" if rng.random() < 0.2 else None,
    )
    group = FsuGroup(function=function, declared_count=entry_count, entries=entries)
    return SignDecomposition(globals=globals_, groups=(group,))


BENCHMARK_COUNTS = {
    FunctionType.DIRECTION: 34,
    FunctionType.NOTICE: 21,
    FunctionType.LANE: 50,
    FunctionType.CONSTRUCTION: 14,
}


def make_benchmark(seed: int = 7, counts=None) -> list[BenchmarkSample]:
    """Synthetic benchmark whose raw prediction is each GT's own text."""
    rng = random.Random(seed)
    samples = []
    for function, n in (counts or BENCHMARK_COUNTS).items():
        for i in range(n):
            gt = make_decomposition(rng, function)
            samples.append(
                BenchmarkSample(
                    id=f"{function.value.lower()}-{i:03d}",
                    category=function,
                    raw=canonical_serialize(gt),
                    gt=gt,
                )
            )
    return samples


# --- independent oracles -----------------------------------------------------


def count_nodes(node: TreeNode) -> int:
    return 1 + sum(count_nodes(c) for c in node.children)


def ted_oracle(a: TreeNode, b: TreeNode) -> int:
    """Brute-force edit distance: enumerate every child pairing at unordered
    nodes instead of solving an assignment."""
    a_leaf = not a.children
    b_leaf = not b.children
    if a_leaf and b_leaf:
        if a.name != b.name:
            return 2
        return 0 if a.value == b.value else 1
    if a_leaf:
        return count_nodes(b) + 1
    if b_leaf:
        return count_nodes(a) + 1

    cost = 0 if a.name == b.name else 1
    c1, c2 = a.children, b.children
    if a.policy == ORDERED and b.policy == ORDERED:
        k = min(len(c1), len(c2))
        cost += sum(ted_oracle(c1[i], c2[i]) for i in range(k))
        cost += sum(count_nodes(c) + 1 for c in c1[k:])
        cost += sum(count_nodes(c) + 1 for c in c2[k:])
        return cost

    m, n = len(c1), len(c2)
    delete_pen = [count_nodes(c) + 1 for c in c1]
    insert_pen = [count_nodes(c) + 1 for c in c2]
    dist = [[ted_oracle(x, y) for y in c2] for x in c1]
    best = None
    if m <= n:
        for chosen in permutations(range(n), m):
            total = sum(dist[i][chosen[i]] for i in range(m))
            total += sum(insert_pen[j] for j in range(n) if j not in chosen)
            best = total if best is None else min(best, total)
    else:
        for chosen in permutations(range(m), n):
            total = sum(dist[chosen[j]][j] for j in range(n))
            total += sum(delete_pen[i] for i in range(m) if i not in chosen)
            best = total if best is None else min(best, total)
    return cost + best


def assignment_oracle(matrix) -> float:
    """Exhaustive minimum assignment cost over all maximum matchings."""
    m = len(matrix)
    n = len(matrix[0]) if m else 0
    if m == 0 or n == 0:
        return 0.0
    if m <= n:
        return min(
            sum(matrix[i][cols[i]] for i in range(m))
            for cols in permutations(range(n), m)
        )
    return min(
        sum(matrix[rows[j]][j] for j in range(n))
        for rows in permutations(range(m), n)
    )


_TREE_NAMES = ("alpha", "beta", "gamma", "delta")
_TREE_VALUES = ("one", "two", "three")


def random_tree(rng: random.Random, max_nodes: int) -> TreeNode:
    """Random FSU-shaped tree with at most ``max_nodes`` nodes."""

    def grow(budget: int, depth: int) -> tuple[TreeNode, int]:
        if budget <= 1 or depth >= 3 or rng.random() < 0.4:
            return (
                TreeNode(name=rng.choice(_TREE_NAMES), value=rng.choice(_TREE_VALUES)),
                1,
            )
        used = 1
        children = []
        want = rng.randint(1, 3)
        for _ in range(want):
            if used >= budget:
                break
            child, spent = grow(budget - used, depth + 1)
            children.append(child)
            used += spent
        if not children:
            return (
                TreeNode(name=rng.choice(_TREE_NAMES), value=rng.choice(_TREE_VALUES)),
                1,
            )
        policy = ORDERED if rng.random() < 0.3 else "unordered"
        return (
            TreeNode(name=rng.choice(_TREE_NAMES), children=tuple(children), policy=policy),
            used,
        )

    node, _ = grow(max_nodes, 0)
    return node
