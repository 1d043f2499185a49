"""UPGMA phylogenetic trees over distance matrices, threshold cuts, Newick export.

The clustering follows the simple average-linkage recipe: repeatedly merge
the two clusters at minimal distance, place the merge node at that distance
(not half of it), and set the new cluster's distance to every other cluster
x to (d[x][i] + d[x][j]) / 2. A size-weighted update is available behind
the ``size_weighted`` switch for the textbook variant. Ties on the minimal
distance are broken by the lexicographically smallest pair of cluster
representatives (a cluster is represented by its smallest leaf label), so
results are reproducible across runs and platforms.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

from .similarity import DistanceMatrix


@dataclass(frozen=True)
class PhyloNode:
    """Tree node: a leaf (height 0, no children) or a merge of two nodes."""

    id: int
    height: float
    children: tuple[int, int] | None
    members: frozenset[str]

    @property
    def is_leaf(self) -> bool:
        return self.children is None


@dataclass(frozen=True)
class PhyloTree:
    """Merge tree with n leaves (ids 0..n-1) and n-1 internal nodes.

    nodes is indexed by id in creation order, so a node's children always
    appear before it.
    """

    nodes: tuple[PhyloNode, ...]
    root: int

    def node(self, node_id: int) -> PhyloNode:
        return self.nodes[node_id]

    @property
    def leaf_count(self) -> int:
        return sum(1 for node in self.nodes if node.is_leaf)

    def parents(self) -> dict[int, int]:
        """Map of node id to parent node id (the root is absent)."""
        out: dict[int, int] = {}
        for node in self.nodes:
            if node.children is not None:
                for child in node.children:
                    out[child] = node.id
        return out

    def leaf_labels(self, node_id: int | None = None) -> tuple[str, ...]:
        """Leaf labels of a subtree in left-to-right order."""
        start = self.root if node_id is None else node_id
        labels: list[str] = []
        stack = [start]
        while stack:
            node = self.nodes[stack.pop()]
            if node.children is None:
                labels.append(next(iter(node.members)))
            else:
                stack.extend(reversed(node.children))
        return tuple(labels)


@dataclass(frozen=True)
class Grouping:
    """Partition of the leaf labels produced by cutting a tree at a threshold."""

    threshold: float
    groups: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(tuple(group) for group in self.groups))
        seen: set[str] = set()
        for group in self.groups:
            if not group:
                raise ValueError("groups must be non-empty")
            for label in group:
                if label in seen:
                    raise ValueError(f"label {label!r} appears in more than one group")
                seen.add(label)

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(label for group in self.groups for label in group)

    def group_of(self, label: str) -> int:
        for index, group in enumerate(self.groups):
            if label in group:
                return index
        raise ValueError(f"unknown label {label!r}")

    def to_json(self) -> str:
        data = {"threshold": self.threshold, "groups": [list(group) for group in self.groups]}
        return json.dumps(data, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Grouping":
        data = json.loads(text)
        try:
            return cls(float(data["threshold"]), tuple(tuple(group) for group in data["groups"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"invalid grouping JSON: {exc}") from None


def _pair_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def upgma(matrix: DistanceMatrix, *, size_weighted: bool = False) -> PhyloTree:
    """Build the merge tree for a distance matrix.

    Merge heights are checked to be non-decreasing while the tree is built;
    with the average update rule this holds by construction.
    """
    n = matrix.size
    nodes = [PhyloNode(i, 0.0, None, frozenset({matrix.labels[i]})) for i in range(n)]
    if n == 1:
        return PhyloTree(tuple(nodes), 0)

    rep = {i: matrix.labels[i] for i in range(n)}
    sizes = {i: 1 for i in range(n)}
    dist: dict[tuple[int, int], float] = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = matrix.entries[i][j]
    active = set(range(n))

    last_height = 0.0
    while len(active) > 1:
        best_key = None
        best_pair = None
        for (a, b), value in dist.items():
            ra, rb = rep[a], rep[b]
            key = (value, (ra, rb) if ra < rb else (rb, ra))
            if best_key is None or key < best_key:
                best_key = key
                best_pair = (a, b)
        a, b = best_pair
        height = best_key[0]
        assert height >= last_height - 1e-12, "merge heights must be non-decreasing"
        last_height = height

        new_id = len(nodes)
        first, second = (a, b) if rep[a] < rep[b] else (b, a)
        nodes.append(
            PhyloNode(new_id, height, (first, second), nodes[a].members | nodes[b].members)
        )
        active.discard(a)
        active.discard(b)
        del dist[_pair_key(a, b)]
        for x in active:
            da = dist.pop(_pair_key(x, a))
            db = dist.pop(_pair_key(x, b))
            if size_weighted:
                merged = (sizes[a] * da + sizes[b] * db) / (sizes[a] + sizes[b])
            else:
                merged = (da + db) / 2
            dist[_pair_key(x, new_id)] = merged
        active.add(new_id)
        rep[new_id] = min(rep[a], rep[b])
        sizes[new_id] = sizes[a] + sizes[b]

    return PhyloTree(tuple(nodes), len(nodes) - 1)


def cut_tree(tree: PhyloTree, threshold: float) -> Grouping:
    """Split leaves into groups: two leaves share a group iff their lowest
    common ancestor sits strictly below the threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold!r}")
    groups: list[tuple[str, ...]] = []
    stack = [tree.root]
    while stack:
        node = tree.nodes[stack.pop()]
        if node.is_leaf or node.height < threshold:
            groups.append(tree.leaf_labels(node.id))
        else:
            stack.extend(reversed(node.children))
    return Grouping(threshold, tuple(groups))


def _format_length(value: float) -> str:
    rounded = round(value, 10)
    if rounded == int(rounded):
        return str(int(rounded))
    return repr(rounded)


def _quote_label(label: str) -> str:
    if any(ch in label for ch in "(),:;'\" \t\n"):
        return "'" + label.replace("'", "''") + "'"
    return label


def to_newick(tree: PhyloTree) -> str:
    """Newick text with branch lengths parent.height - child.height."""
    root = tree.nodes[tree.root]
    if root.is_leaf:
        return f"{_quote_label(next(iter(root.members)))}:0;"
    rendered: dict[int, str] = {}
    for node in tree.nodes:  # children always precede their parent
        if node.is_leaf:
            rendered[node.id] = _quote_label(next(iter(node.members)))
        else:
            inner = ",".join(
                f"{rendered[child]}:{_format_length(node.height - tree.nodes[child].height)}"
                for child in node.children
            )
            rendered[node.id] = f"({inner})"
    return rendered[tree.root] + ";"


def _as_partition(value: "Grouping | Iterable[Iterable[str]]") -> list[frozenset[str]]:
    groups = value.groups if isinstance(value, Grouping) else value
    return [frozenset(group) for group in groups]


def rand_index(a: "Grouping | Iterable[Iterable[str]]", b: "Grouping | Iterable[Iterable[str]]") -> float:
    """Fraction of label pairs on which two partitions agree (both together
    or both apart). 1.0 means identical partitions."""
    part_a = _as_partition(a)
    part_b = _as_partition(b)
    assign_a: dict[str, int] = {}
    assign_b: dict[str, int] = {}
    for index, group in enumerate(part_a):
        for label in group:
            assign_a[label] = index
    for index, group in enumerate(part_b):
        for label in group:
            assign_b[label] = index
    if set(assign_a) != set(assign_b):
        raise ValueError("partitions cover different label sets")
    n = len(assign_a)
    total = n * (n - 1) // 2
    if total == 0:
        return 1.0

    def pairs(items) -> int:
        return sum(c * (c - 1) // 2 for c in Counter(items).values())

    labels = sorted(assign_a)
    same_a = pairs(assign_a[l] for l in labels)
    same_b = pairs(assign_b[l] for l in labels)
    same_both = pairs((assign_a[l], assign_b[l]) for l in labels)
    agreements = total + 2 * same_both - same_a - same_b
    return agreements / total
