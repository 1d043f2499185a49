"""Pairwise classification scoring of labeling engines, plus baseline engines.

Engines assign family labels to malware samples; different engines use
different naming schemes, so engines are compared on pairs of samples
instead of on raw names. For one engine and one pair, the indicator is +1
when the engine puts both samples in the same family, -1 when it separates
them, and 0 when it missed (did not detect) either sample.

An engine's score is its detection coverage times the average, over all
engines (itself included), of the approval rate: the probability that a
peer agrees with the engine's same-family pairs plus the probability that
the peer agrees with its different-family pairs. Scores live in [0, 2].
"""

from __future__ import annotations

import csv
import io
import json
import re
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .phylo import Grouping

_TOKEN_SPLIT = re.compile(r"[^a-z0-9_]+")
_HEX_RE = re.compile(r"[0-9a-f]+\Z")


@dataclass(frozen=True)
class FamilyNormalizer:
    """Extracts a comparable family name from an engine's detection string.

    Pipeline: lowercase, split on non-alphanumeric runs (underscores stay,
    so multi-word stop words like troj_gen survive), drop stop words and
    pure-hex / pure-numeric tokens, keep the longest remaining token.
    """

    stop_words: frozenset = frozenset({"win32", "variant", "troj_gen"})

    def tokenize(self, text: str) -> list[str]:
        return [token for token in _TOKEN_SPLIT.split(text.lower()) if token]


def normalize_family(detection_string: str, normalizer: FamilyNormalizer | None = None) -> str | None:
    """Family name for a detection string, or None when nothing usable remains."""
    nz = normalizer or FamilyNormalizer()
    kept = [
        token
        for token in nz.tokenize(detection_string)
        if token not in nz.stop_words and not _HEX_RE.match(token) and not token.isdigit()
    ]
    if not kept:
        return None
    return max(kept, key=len)


@dataclass(frozen=True)
class EngineLabelTable:
    """n samples x m engines of optional family names (None = not detected)."""

    malware_ids: tuple[str, ...]
    engines: tuple[str, ...]
    labels: tuple[tuple[str | None, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "malware_ids", tuple(self.malware_ids))
        object.__setattr__(self, "engines", tuple(self.engines))
        object.__setattr__(self, "labels", tuple(tuple(row) for row in self.labels))
        if len(set(self.malware_ids)) != len(self.malware_ids):
            raise ValueError("malware ids must be unique")
        if len(set(self.engines)) != len(self.engines):
            raise ValueError("engine names must be unique")
        if len(self.labels) != len(self.malware_ids):
            raise ValueError(
                f"expected {len(self.malware_ids)} label rows, got {len(self.labels)}"
            )
        for row in self.labels:
            if len(row) != len(self.engines):
                raise ValueError(f"label row has {len(row)} cells for {len(self.engines)} engines")
            for cell in row:
                if cell is not None and not isinstance(cell, str):
                    raise ValueError(f"label cells must be text or None, got {cell!r}")

    @property
    def sample_count(self) -> int:
        return len(self.malware_ids)

    def engine_index(self, engine: str) -> int:
        try:
            return self.engines.index(engine)
        except ValueError:
            raise ValueError(f"unknown engine {engine!r}") from None

    def malware_index(self, malware_id: str) -> int:
        try:
            return self.malware_ids.index(malware_id)
        except ValueError:
            raise ValueError(f"unknown malware id {malware_id!r}") from None

    def column(self, engine: str) -> tuple[str | None, ...]:
        index = self.engine_index(engine)
        return tuple(row[index] for row in self.labels)

    def with_engine(self, name: str, labels_by_id: Mapping[str, str | None]) -> "EngineLabelTable":
        """New table with one extra engine column; ids missing from the
        mapping are marked not-detected."""
        if name in self.engines:
            raise ValueError(f"engine {name!r} already present")
        rows = tuple(
            row + (labels_by_id.get(malware_id),)
            for malware_id, row in zip(self.malware_ids, self.labels)
        )
        return EngineLabelTable(self.malware_ids, self.engines + (name,), rows)

    def normalized(self, normalizer: FamilyNormalizer | None = None) -> "EngineLabelTable":
        """Run every cell through the family normalizer."""
        nz = normalizer or FamilyNormalizer()
        rows = tuple(
            tuple(None if cell is None else normalize_family(cell, nz) for cell in row)
            for row in self.labels
        )
        return EngineLabelTable(self.malware_ids, self.engines, rows)

    def to_json(self) -> str:
        data = {
            "malwares": list(self.malware_ids),
            "engines": list(self.engines),
            "labels": [list(row) for row in self.labels],
        }
        return json.dumps(data, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EngineLabelTable":
        data = json.loads(text)
        try:
            return cls(
                tuple(data["malwares"]),
                tuple(data["engines"]),
                tuple(tuple(row) for row in data["labels"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"invalid label table JSON: {exc}") from None

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["malware_id", *self.engines])
        for malware_id, row in zip(self.malware_ids, self.labels):
            writer.writerow([malware_id, *("" if cell is None else cell for cell in row)])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EngineLabelTable":
        rows = [row for row in csv.reader(io.StringIO(text)) if row]
        if len(rows) < 2:
            raise ValueError("label table CSV needs a header row and at least one sample row")
        engines = tuple(rows[0][1:])
        ids = []
        labels = []
        for row in rows[1:]:
            if len(row) != len(engines) + 1:
                raise ValueError(f"row for {row[0]!r} has {len(row) - 1} cells for {len(engines)} engines")
            ids.append(row[0])
            labels.append(tuple(cell if cell else None for cell in row[1:]))
        return cls(tuple(ids), engines, tuple(labels))


def _pair_value(a: str | None, b: str | None) -> int:
    if a is None or b is None:
        return 0
    return 1 if a == b else -1


def indicator(table: EngineLabelTable, engine: str, i: str, j: str) -> int:
    """Same-family indicator for one engine and one pair of samples."""
    if i == j:
        raise ValueError("indicator requires two distinct malware ids")
    column = table.column(engine)
    return _pair_value(column[table.malware_index(i)], column[table.malware_index(j)])


def engine_weight(table: EngineLabelTable, engine: str) -> float:
    """Fraction of the samples the engine detected."""
    column = table.column(engine)
    return sum(1 for cell in column if cell is not None) / len(column)


def _pair_vector(column: Sequence[str | None]) -> list[int]:
    n = len(column)
    return [_pair_value(column[i], column[j]) for i in range(n) for j in range(i + 1, n)]


def _approval_from_vectors(vx: Sequence[int], vy: Sequence[int]) -> float:
    plus_num = plus_den = minus_num = minus_den = 0
    for a, b in zip(vx, vy):
        if a == 1:
            plus_den += 1
            if b == 1:
                plus_num += 1
        elif a == -1:
            minus_den += 1
            if b == -1:
                minus_num += 1
    value = plus_num / plus_den if plus_den else 0.0
    value += minus_num / minus_den if minus_den else 0.0
    return value


def _require_pairs(table: EngineLabelTable) -> None:
    if table.sample_count < 2:
        raise ValueError("pair scoring needs at least 2 malware samples")


def approval(table: EngineLabelTable, engine_x: str, engine_y: str) -> float:
    """Approval rate of engine_x by engine_y, in [0, 2].

    Sum of two conditional agreement probabilities over all sample pairs:
    P(y says same | x says same) + P(y says different | x says different).
    Pairs where y failed to detect stay in the denominator; a conditional
    whose condition never occurs contributes 0.
    """
    _require_pairs(table)
    return _approval_from_vectors(
        _pair_vector(table.column(engine_x)), _pair_vector(table.column(engine_y))
    )


def pcs_score(table: EngineLabelTable, engine: str) -> float:
    """Detection weight times the mean approval rate over all engines."""
    _require_pairs(table)
    vx = _pair_vector(table.column(engine))
    total = 0.0
    for other in table.engines:
        total += _approval_from_vectors(vx, _pair_vector(table.column(other)))
    return engine_weight(table, engine) * total / len(table.engines)


class PairwiseIndicator:
    """Same-family indicator backed by description similarity.

    Callable with two malware ids; returns +1 / 0 / -1. Ids whose
    description is empty (or all stop words) behave as not detected:
    any pair touching them scores 0.
    """

    def __init__(self, vectors: Mapping[str, Mapping[str, int] | None], threshold: float):
        self._vectors = dict(vectors)
        self.threshold = float(threshold)
        self.detected = frozenset(key for key, vec in self._vectors.items() if vec)

    @property
    def ids(self) -> frozenset:
        return frozenset(self._vectors)

    def __call__(self, i: str, j: str) -> int:
        if i == j:
            raise ValueError("indicator requires two distinct malware ids")
        try:
            a = self._vectors[i]
            b = self._vectors[j]
        except KeyError as exc:
            raise ValueError(f"unknown malware id {exc.args[0]!r}") from None
        if not a or not b:
            return 0
        dot = sum(count * b.get(token, 0) for token, count in a.items())
        norm_a = sum(count * count for count in a.values())
        norm_b = sum(count * count for count in b.values())
        # cosine >= threshold, compared without square roots (counts are ints)
        return 1 if dot * dot >= self.threshold * self.threshold * norm_a * norm_b else -1


def text_mining_grouping(
    descriptions: Mapping[str, str],
    normalizer: FamilyNormalizer | None = None,
    threshold: float = 0.7,
) -> PairwiseIndicator:
    """Bag-of-words cosine grouping over per-sample text descriptions.

    Two samples count as same-family when the cosine similarity of their
    term-frequency vectors (after stop-word removal) reaches the threshold.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold!r}")
    nz = normalizer or FamilyNormalizer()
    vectors: dict[str, Counter | None] = {}
    for malware_id, text in descriptions.items():
        tokens = [token for token in nz.tokenize(text) if token not in nz.stop_words]
        vectors[malware_id] = Counter(tokens) if tokens else None
    return PairwiseIndicator(vectors, threshold)


def grouping_to_labels(grouping: Grouping) -> dict[str, str]:
    """Synthetic engine column for a grouping: members of group k get
    family name 'g<k>'; every member counts as detected."""
    labels: dict[str, str] = {}
    for index, group in enumerate(grouping.groups):
        for label in group:
            labels[label] = f"g{index}"
    return labels


def pcs_report(
    table: EngineLabelTable,
    extra_indicators: Sequence[tuple[str, PairwiseIndicator]] = (),
) -> list[dict]:
    """Score every engine (and any extra pairwise-indicator engines, which
    participate as peers too). Rows {engine, detected, weight, pcs} sorted
    by descending score."""
    _require_pairs(table)
    names = list(table.engines) + [name for name, _ in extra_indicators]
    if len(set(names)) != len(names):
        raise ValueError("duplicate engine name in report")
    n = table.sample_count
    ids = table.malware_ids
    pair_index = [(i, j) for i in range(n) for j in range(i + 1, n)]

    vectors: list[list[int]] = [_pair_vector(table.column(engine)) for engine in table.engines]
    detected: list[int] = [
        sum(1 for cell in table.column(engine) if cell is not None) for engine in table.engines
    ]
    for _, indicator_fn in extra_indicators:
        vectors.append([indicator_fn(ids[i], ids[j]) for i, j in pair_index])
        detected.append(sum(1 for malware_id in ids if malware_id in indicator_fn.detected))

    m = len(vectors)
    rows = []
    for x in range(m):
        weight = detected[x] / n
        total = 0.0
        for y in range(m):
            total += _approval_from_vectors(vectors[x], vectors[y])
        rows.append(
            {
                "engine": names[x],
                "detected": detected[x],
                "weight": weight,
                "pcs": weight * total / m,
            }
        )
    rows.sort(key=lambda row: (-row["pcs"], row["engine"]))
    return rows
