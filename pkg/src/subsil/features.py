"""Temporal, spatial, and spatiotemporal features of class sequences.

A class sequence is the per-subtitle line-count (or silhouette height class)
labels of a clip, each in 1..3. The three features partition clip sets at
increasing granularity: sequence length, per-class occurrence counts, and the
full rank-indexed vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

FEATURE_TEMPORAL = "temporal"
FEATURE_SPATIAL = "spatial"
FEATURE_SPATIOTEMPORAL = "spatiotemporal"
FEATURES = (FEATURE_TEMPORAL, FEATURE_SPATIAL, FEATURE_SPATIOTEMPORAL)


class FeatureError(ValueError):
    """Invalid feature-extraction input."""


def _validated(labels: Sequence[int]) -> list[int]:
    normalized = [int(label) for label in labels]
    if not normalized:
        raise FeatureError("class sequence must be non-empty")
    for label in normalized:
        if not 1 <= label <= 3:
            raise FeatureError(f"class labels must be in 1..3, got {label}")
    return normalized


@dataclass(frozen=True)
class SpatioTemporalVector:
    """Rank-indexed class labels: distinct classes sorted ascending map to 1..r."""

    indices: tuple[int, ...]
    r: int


def spatiotemporal_vector(labels: Sequence[int]) -> SpatioTemporalVector:
    """Map a class sequence onto indices of its ascending distinct classes.

    The classes present are sorted ascending and indexed from 1; each element
    becomes the index of its class. Length, per-class counts, and class order
    all survive the mapping.
    """
    labels = _validated(labels)
    present = sorted(set(labels))
    rank = {cls: position for position, cls in enumerate(present, start=1)}
    return SpatioTemporalVector(tuple(rank[cls] for cls in labels), len(present))


def height_similarity(labels: Sequence[int]) -> tuple[int, ...]:
    """Occurrence counts per distinct class, in ascending class order."""
    labels = _validated(labels)
    return tuple(labels.count(cls) for cls in sorted(set(labels)))


def sequence_length(labels: Sequence[int]) -> int:
    return len(labels)


def _feature_key(labels: Sequence[int], feature: str):
    if feature == FEATURE_TEMPORAL:
        return len(labels)
    if feature == FEATURE_SPATIAL:
        return height_similarity(labels)
    if feature == FEATURE_SPATIOTEMPORAL:
        return spatiotemporal_vector(labels).indices
    raise FeatureError(f"unknown feature {feature!r}; expected one of {FEATURES}")


def uniqueness_score(clips: Iterable[Sequence[int]], feature: str) -> float:
    """Equivalence classes under the feature, divided by the clip count.

    Scores near 1 mean the feature separates nearly every clip; the
    spatiotemporal vector always scores at least as high as the other two
    because its partition refines theirs.
    """
    keys = set()
    total = 0
    for clip in clips:
        keys.add(_feature_key(clip, feature))
        total += 1
    if total == 0:
        raise FeatureError("uniqueness_score needs at least one clip")
    return len(keys) / total
