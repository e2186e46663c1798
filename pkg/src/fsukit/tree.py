"""Tree form of a sign decomposition for edit-distance scoring.

The root is one unordered "sign" node. Present globals, the Function Type
text, and each group's declared count become leaves under the root; each
group becomes an internal node (ordered for Lane, since lanes read left to
right) whose children are one unordered node per FSU with one leaf per
attribute. List values collapse to a single comma-joined leaf. Entry node
names drop the ordinal so matching is not biased by labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .schema import (
    FUNCTION_TYPE_KEY,
    FunctionType,
    KeyRegistry,
    SignDecomposition,
    canonical_attr_order,
)

ORDERED = "ordered"
UNORDERED = "unordered"

ROOT_NAME = "sign"


@dataclass(frozen=True)
class TreeNode:
    """Immutable tree node with a cached subtree size.

    A node is a leaf iff it has no children; only leaves carry a value.
    ``policy`` controls how the children of an internal node are matched.
    """

    name: str
    value: Optional[str] = None
    children: tuple["TreeNode", ...] = ()
    policy: str = UNORDERED
    size: int = field(init=False, compare=False, default=0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "size", 1 + sum(c.size for c in self.children))

    @property
    def is_leaf(self) -> bool:
        return not self.children


def leaf(name: str, value: str) -> TreeNode:
    return TreeNode(name=name, value=value)


def subtree_size(node: TreeNode) -> int:
    """Recount the subtree; always equals the cached ``size`` field."""
    return 1 + sum(subtree_size(c) for c in node.children)


def build_tree(d: SignDecomposition, registry: Optional[KeyRegistry] = None) -> TreeNode:
    """Convert a decomposition to its tree form.

    Attribute leaves come out in canonical key order, so decompositions that
    differ only in attr insertion order build identical trees.
    """
    children: list[TreeNode] = []
    for key, value in d.globals.present_items():
        children.append(leaf(key, value))

    function_type = d.function_type_text()
    if function_type is not None:
        children.append(leaf(FUNCTION_TYPE_KEY, function_type))

    for group in d.groups:
        gname = f"{group.function.value} Information"
        if group.declared_count is not None:
            children.append(leaf(f"Number of {gname}", str(group.declared_count)))
        entry_nodes = []
        for entry in group.entries:
            attr_leaves = tuple(
                leaf(k, v.joined()) for k, v in canonical_attr_order(entry, registry)
            )
            entry_nodes.append(TreeNode(name=gname, children=attr_leaves, policy=UNORDERED))
        policy = ORDERED if group.function == FunctionType.LANE else UNORDERED
        children.append(TreeNode(name=gname, children=tuple(entry_nodes), policy=policy))

    return TreeNode(name=ROOT_NAME, children=tuple(children), policy=UNORDERED)


def dump_tree(node: TreeNode, depth: int = 0) -> str:
    """Indented one-node-per-line dump: depth, name, value, policy, size."""
    value = "" if node.value is None else f" = {node.value!r}"
    policy = "" if node.is_leaf else f" [{node.policy}]"
    lines = [f"{'  ' * depth}{node.name}{value}{policy} (size={node.size})"]
    for child in node.children:
        lines.append(dump_tree(child, depth + 1))
    return "\n".join(lines)
