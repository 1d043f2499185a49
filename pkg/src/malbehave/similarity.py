"""Jaccard distances between element sets and corpus distance matrices."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

from .profile import ElementSet, FeatureConfig, Profile, extract_elements


def jaccard_distance(x: ElementSet, y: ElementSet) -> float:
    """1 - |x & y| / |x | y|. Two empty sets are identical (distance 0)."""
    if not x and not y:
        return 0.0
    return 1.0 - len(x & y) / len(x | y)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric pairwise distance matrix with zero diagonal, values in [0, 1]."""

    labels: tuple[str, ...]
    entries: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "entries", tuple(tuple(float(v) for v in row) for row in self.entries))
        n = len(self.labels)
        if n == 0:
            raise ValueError("distance matrix needs at least one label")
        if len(set(self.labels)) != n:
            raise ValueError("matrix labels must be unique")
        if len(self.entries) != n or any(len(row) != n for row in self.entries):
            raise ValueError(f"matrix must be {n}x{n} to match its labels")
        for i in range(n):
            if self.entries[i][i] != 0.0:
                raise ValueError(f"diagonal entry ({i},{i}) must be 0, got {self.entries[i][i]!r}")
            for j in range(n):
                value = self.entries[i][j]
                if not 0.0 <= value <= 1.0:
                    raise ValueError(f"entry ({i},{j}) out of range [0,1]: {value!r}")
                if value != self.entries[j][i]:
                    raise ValueError(f"matrix is asymmetric at ({i},{j})")

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise ValueError(f"unknown label {label!r}") from None

    def get(self, a: str, b: str) -> float:
        return self.entries[self.index(a)][self.index(b)]

    def to_csv(self) -> str:
        """Header row of labels, then one row of distances per profile."""
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(self.labels)
        for row in self.entries:
            writer.writerow([f"{value:.6f}" for value in row])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DistanceMatrix":
        rows = [row for row in csv.reader(io.StringIO(text)) if row]
        if not rows:
            raise ValueError("empty distance matrix CSV")
        labels = tuple(rows[0])
        if len(rows) != len(labels) + 1:
            raise ValueError(f"expected {len(labels)} data rows, got {len(rows) - 1}")
        try:
            entries = tuple(tuple(float(cell) for cell in row) for row in rows[1:])
        except ValueError as exc:
            raise ValueError(f"non-numeric distance cell: {exc}") from None
        return cls(labels, entries)


def distance_matrix(
    profiles: Sequence[Profile],
    config: FeatureConfig,
    labels: Iterable[str] | None = None,
) -> DistanceMatrix:
    """Pairwise Jaccard distance matrix over the profiles' element sets.

    Labels default to the profiles' hashes; pass explicit labels when one
    sample contributes several process profiles.
    """
    profiles = list(profiles)
    if not profiles:
        raise ValueError("at least one profile is required")
    labels = [p.hash for p in profiles] if labels is None else list(labels)
    if len(labels) != len(profiles):
        raise ValueError(f"got {len(labels)} labels for {len(profiles)} profiles")
    seen = set()
    for label in labels:
        if label in seen:
            raise ValueError(f"duplicate profile identifier {label!r}")
        seen.add(label)

    element_sets = [extract_elements(p, config) for p in profiles]
    n = len(profiles)
    rows = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            d = jaccard_distance(element_sets[i], element_sets[j])
            rows[i][j] = d
            rows[j][i] = d
    return DistanceMatrix(tuple(labels), tuple(tuple(row) for row in rows))
