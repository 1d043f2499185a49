"""Per-group characteristic element sets and classification of new profiles.

A group's common set holds the elements shared by (almost) all of its
members; the endurance fraction alpha tolerates a few outliers. Its
distinct set is what remains after subtracting the common set of the
group's parent node in the tree, i.e. the behavior that separates the
group from its nearest relatives.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .phylo import Grouping, PhyloTree
from .profile import ElementSet


@dataclass(frozen=True)
class EnduranceConfig:
    """alpha: outlier tolerance for common sets; min_score: classification cutoff."""

    alpha: float = 0.1
    min_score: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha!r}")
        if not 0.0 <= self.min_score <= 1.0:
            raise ValueError(f"min_score must be in [0, 1], got {self.min_score!r}")


@dataclass(frozen=True)
class GroupCharacteristics:
    group_id: int
    common: frozenset
    distinct: frozenset
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("group size must be at least 1")
        if not self.distinct <= self.common:
            raise ValueError("distinct characteristics must be a subset of the common set")


def common_set(member_sets: Sequence[ElementSet], alpha: float) -> frozenset:
    """Elements present in at least a (1 - alpha) fraction of the members.

    alpha=0 is the plain intersection. The boundary counts: an element held
    by exactly (1 - alpha) * n members is included.
    """
    members = list(member_sets)
    if not members:
        raise ValueError("common_set needs at least one member")
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha!r}")
    counts: Counter = Counter()
    for member in members:
        counts.update(member)
    needed = (1.0 - alpha) * len(members)
    return frozenset(element for element, count in counts.items() if count >= needed)


def _subtree_root(tree: PhyloTree, members: frozenset) -> int:
    """Lowest tree node whose leaf set contains all of the given members."""
    node_id = tree.root
    while True:
        node = tree.nodes[node_id]
        if node.children is None:
            return node_id
        for child in node.children:
            if members <= tree.nodes[child].members:
                node_id = child
                break
        else:
            return node_id


def distinct_characteristics(
    tree: PhyloTree,
    grouping: Grouping,
    members: Mapping[str, ElementSet],
    config: EnduranceConfig,
) -> dict[int, GroupCharacteristics]:
    """Common and distinct sets for every group of a tree cut.

    The distinct set subtracts the common set of the group's parent node
    (the lowest node strictly containing the group's subtree). A group
    covering the whole tree keeps its common set unchanged.
    """
    for group in grouping.groups:
        for label in group:
            if label not in members:
                raise ValueError(f"no element set for label {label!r}")
    parents = tree.parents()
    result: dict[int, GroupCharacteristics] = {}
    for group_id, group in enumerate(grouping.groups):
        group_labels = frozenset(group)
        common = common_set([members[label] for label in group], config.alpha)
        root_id = _subtree_root(tree, group_labels)
        if root_id == tree.root:
            distinct = common
        else:
            parent = tree.nodes[parents[root_id]]
            parent_common = common_set(
                [members[label] for label in sorted(parent.members)], config.alpha
            )
            distinct = common - parent_common
        result[group_id] = GroupCharacteristics(group_id, common, distinct, len(group))
    return result


def classification_scores(
    sample: ElementSet, characteristics: Mapping[int, GroupCharacteristics]
) -> dict[int, float]:
    """Containment score per group: |sample & distinct| / |distinct|."""
    scores: dict[int, float] = {}
    for group_id, chars in characteristics.items():
        if not chars.distinct:
            scores[group_id] = 0.0
        else:
            scores[group_id] = len(sample & chars.distinct) / len(chars.distinct)
    return scores


def classify(
    sample: ElementSet,
    characteristics: Mapping[int, GroupCharacteristics],
    config: EnduranceConfig,
) -> int | None:
    """Most similar group by distinct-set containment, or None when no
    group reaches min_score. Ties go to the smallest group id."""
    if not characteristics:
        raise ValueError("no group characteristics to classify against")
    scores = classification_scores(sample, characteristics)
    best_id = min(scores, key=lambda group_id: (-scores[group_id], group_id))
    if scores[best_id] >= config.min_score:
        return best_id
    return None


def characteristics_report(
    characteristics: Mapping[int, GroupCharacteristics],
    grouping: Grouping,
    *,
    sample_size: int = 5,
    include_sets: bool = False,
) -> list[dict]:
    """Rows of {id, size, members, common/distinct counts, sample tokens}.

    include_sets adds the full sorted token sets, which makes the report
    usable as a classifier input file.
    """
    rows = []
    for group_id in sorted(characteristics):
        chars = characteristics[group_id]
        distinct_sorted = sorted(chars.distinct)
        row = {
            "id": chars.group_id,
            "size": chars.size,
            "members": list(grouping.groups[group_id]),
            "common_count": len(chars.common),
            "distinct_count": len(chars.distinct),
            "distinct_samples": distinct_sorted[:sample_size],
        }
        if include_sets:
            row["common"] = sorted(chars.common)
            row["distinct"] = distinct_sorted
        rows.append(row)
    return rows


def characteristics_from_report(rows: Sequence[Mapping]) -> dict[int, GroupCharacteristics]:
    """Rebuild group characteristics from a report written with include_sets."""
    result: dict[int, GroupCharacteristics] = {}
    for row in rows:
        try:
            chars = GroupCharacteristics(
                int(row["id"]),
                frozenset(row["common"]),
                frozenset(row["distinct"]),
                int(row["size"]),
            )
        except KeyError as exc:
            raise ValueError(f"characteristics report row missing field {exc.args[0]!r}") from None
        result[chars.group_id] = chars
    return result
