"""Silhouette masks and the same-subtitle separation tests.

A silhouette is a boolean pixel mask inside a pre-processed grayscale frame
region. Two consecutive frames show the same subtitle when their masks are
near-identical (IoU test) and the frame pixels under the shared mask differ
less than a per-pixel allowance (similarity-ratio test).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

DEFAULT_IOU_THRESHOLD = 0.93
DEFAULT_PIXEL_ALLOWANCE = 1.5


class GeometryError(ValueError):
    """Operands do not share pixel geometry."""


class SilhouetteError(ValueError):
    """Invalid silhouette-level input."""


@dataclass(frozen=True)
class SeparationConfig:
    """Thresholds for the two-stage same-subtitle decision."""

    iou_threshold: float = DEFAULT_IOU_THRESHOLD
    t0: float = DEFAULT_PIXEL_ALLOWANCE

    def __post_init__(self) -> None:
        if not 0.0 < self.iou_threshold <= 1.0:
            raise SilhouetteError(f"iou_threshold must be in (0, 1], got {self.iou_threshold}")
        if self.t0 <= 0:
            raise SilhouetteError(f"t0 must be positive, got {self.t0}")


@dataclass(frozen=True)
class FrameRegion:
    """Grayscale pixels (uint8, row-major) of a cropped subtitle area."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise SilhouetteError("pixels must be a non-empty 2-D grid")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise SilhouetteError("intensities must lie in 0..255")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def geometry(self) -> tuple[int, int]:
        return self.pixels.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class SilhouetteMask:
    """Boolean pixel mask marking silhouette membership within a frame region."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.bits)
        if arr.ndim != 2 or arr.size == 0:
            raise SilhouetteError("bits must be a non-empty 2-D grid")
        object.__setattr__(self, "bits", arr.astype(bool))

    @property
    def geometry(self) -> tuple[int, int]:
        return self.bits.shape  # type: ignore[return-value]

    @property
    def is_empty(self) -> bool:
        return not bool(self.bits.any())

    @property
    def pixel_count(self) -> int:
        return int(self.bits.sum())

    def bounding_box_height(self) -> int:
        """Height in pixels of the rows spanned by the mask; 0 when empty."""
        rows = np.flatnonzero(self.bits.any(axis=1))
        if rows.size == 0:
            return 0
        return int(rows[-1] - rows[0] + 1)


def _require_same_geometry(*geometries: tuple[int, int]) -> None:
    if len(set(geometries)) > 1:
        raise GeometryError(f"geometry mismatch: {geometries}")


# ---------------------------------------------------------------------------
# Separation tests
# ---------------------------------------------------------------------------


def mask_iou(s1: SilhouetteMask, s2: SilhouetteMask) -> float:
    """Intersection over union of two masks; 1.0 when both are empty."""
    _require_same_geometry(s1.geometry, s2.geometry)
    union = int(np.bitwise_or(s1.bits, s2.bits).sum())
    if union == 0:
        return 1.0
    intersection = int(np.bitwise_and(s1.bits, s2.bits).sum())
    return intersection / union


def similarity_ratio(
    a1: FrameRegion,
    a2: FrameRegion,
    intersection: SilhouetteMask,
    cfg: SeparationConfig = SeparationConfig(),
) -> float:
    """Summed absolute pixel difference under the mask, over its allowance.

    Values at most 1 are consistent with the same subtitle; values above 1
    indicate different subtitles with near-identical silhouettes.
    """
    _require_same_geometry(a1.geometry, a2.geometry, intersection.geometry)
    n = intersection.pixel_count
    if n == 0:
        raise SilhouetteError("similarity_ratio needs a non-empty intersection")
    diff = np.abs(
        a1.pixels.astype(np.int16) - a2.pixels.astype(np.int16)
    )[intersection.bits]
    p = int(diff.sum())
    return p / (cfg.t0 * n)


def same_subtitle(
    f1: tuple[FrameRegion, SilhouetteMask],
    f2: tuple[FrameRegion, SilhouetteMask],
    cfg: SeparationConfig = SeparationConfig(),
) -> bool:
    """Decide whether two frames show the same subtitle.

    Masks that diverge (IoU below threshold) are different subtitles. Masks
    that coincide defer to the similarity ratio of the frame pixels beneath
    the shared area. Two subtitle-free frames count as the same.
    """
    region1, mask1 = f1
    region2, mask2 = f2
    _require_same_geometry(region1.geometry, mask1.geometry, region2.geometry, mask2.geometry)
    if mask1.is_empty and mask2.is_empty:
        return True
    if mask_iou(mask1, mask2) < cfg.iou_threshold:
        return False
    shared = SilhouetteMask(np.bitwise_and(mask1.bits, mask2.bits))
    return similarity_ratio(region1, region2, shared, cfg) <= 1.0


# ---------------------------------------------------------------------------
# Sequence segmentation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SilhouetteEvent:
    """A run of consecutive frames showing one subtitle."""

    height_px: int
    first_frame: int
    last_frame: int

    @property
    def frame_count(self) -> int:
        return self.last_frame - self.first_frame + 1


@dataclass(frozen=True)
class SilhouetteSequence:
    """Ordered silhouette events extracted from a frame stream."""

    events: tuple[SilhouetteEvent, ...]
    frame_count: int

    def __len__(self) -> int:
        return len(self.events)

    @property
    def heights(self) -> list[int]:
        return [e.height_px for e in self.events]

    def class_labels(self, unit_height_px: float | None = None) -> list[int]:
        """Line-count classes per event.

        With a known unit line height each event maps directly; otherwise the
        unit is estimated from the heights via :func:`cluster_heights`.
        """
        if unit_height_px is not None:
            if unit_height_px <= 0:
                raise SilhouetteError("unit_height_px must be positive")
            return [_round_class(h / unit_height_px) for h in self.heights]
        return cluster_heights(self.heights)


def segment_sequence(
    frames: Sequence[tuple[FrameRegion, SilhouetteMask]],
    cfg: SeparationConfig = SeparationConfig(),
) -> SilhouetteSequence:
    """Collapse a time-ordered frame stream into silhouette events.

    Consecutive frames merge while :func:`same_subtitle` holds; frames with
    empty masks close the current event and emit none of their own. Event
    height is the bounding-box height of the first frame's mask.
    """
    events: list[SilhouetteEvent] = []
    current_start: int | None = None
    current_height = 0
    previous: tuple[FrameRegion, SilhouetteMask] | None = None

    def close(last_index: int) -> None:
        nonlocal current_start
        if current_start is not None:
            events.append(SilhouetteEvent(current_height, current_start, last_index))
            current_start = None

    for position, frame in enumerate(frames):
        _, mask = frame
        if mask.is_empty:
            close(position - 1)
            previous = None
            continue
        if previous is not None and current_start is not None:
            if not same_subtitle(previous, frame, cfg):
                close(position - 1)
        if current_start is None:
            current_start = position
            current_height = mask.bounding_box_height()
        previous = frame
    close(len(frames) - 1)
    return SilhouetteSequence(tuple(events), len(frames))


# ---------------------------------------------------------------------------
# Height clustering
# ---------------------------------------------------------------------------

# Heights within a line-count class vary by measurement noise; classes sit at
# integer multiples of the unit line height, so inter-class ratios are >= 1.5.
_SPLIT_RATIO = 4 / 3


def _round_class(value: float) -> int:
    half_up = math.floor(value + 0.5)
    return min(max(half_up, 1), 3)


def _split_clusters(sorted_heights: np.ndarray) -> list[np.ndarray]:
    breaks = np.flatnonzero(sorted_heights[1:] > _SPLIT_RATIO * sorted_heights[:-1]) + 1
    clusters = np.split(sorted_heights, breaks)
    while len(clusters) > 3:
        ratios = [
            float(np.mean(clusters[i + 1]) / np.mean(clusters[i]))
            for i in range(len(clusters) - 1)
        ]
        merge_at = int(np.argmin(ratios))
        clusters[merge_at : merge_at + 2] = [
            np.concatenate(clusters[merge_at : merge_at + 2])
        ]
    return clusters


def estimate_unit_height(heights: Sequence[float]) -> float:
    """Estimate the one-line silhouette height from observed heights.

    Heights are grouped into at most three clusters, each cluster is assigned
    a line count (an ascending subset of {1, 2, 3}), and the unit is the
    least-squares fit over all points under the best-fitting assignment. Ties
    prefer the smallest line counts, so a single cluster reads as one line.
    """
    arr = np.asarray(sorted(heights), dtype=float)
    if arr.size == 0 or arr[0] <= 0:
        raise SilhouetteError("heights must be positive and non-empty")
    clusters = _split_clusters(arr)
    r = len(clusters)
    sizes = [c.size for c in clusters]
    sums = [float(c.sum()) for c in clusters]
    squares = [float(np.square(c).sum()) for c in clusters]

    best_unit = 0.0
    best_sse = math.inf
    # Tolerance scales with the data so ties resolve identically under
    # uniform scaling (ties prefer the earlier, smaller assignment).
    tolerance = 1e-9 * sum(squares)
    for assignment in combinations((1, 2, 3), r):
        unit = sum(k * s for k, s in zip(assignment, sums)) / sum(
            k * k * n for k, n in zip(assignment, sizes)
        )
        sse = sum(
            sq - 2 * k * unit * s + k * k * unit * unit * n
            for k, s, sq, n in zip(assignment, sums, squares, sizes)
        )
        if sse < best_sse - tolerance:
            best_sse = sse
            best_unit = unit
    return best_unit


def cluster_heights(heights: Sequence[float]) -> list[int]:
    """Map silhouette heights to absolute line-count classes in 1..3.

    Labels depend only on height ratios, so they are invariant under uniform
    scaling. An empty input yields an empty label list.
    """
    if len(heights) == 0:
        return []
    if any(h <= 0 for h in heights):
        raise SilhouetteError("heights must be positive")
    unit = estimate_unit_height(heights)
    return [_round_class(h / unit) for h in heights]


# ---------------------------------------------------------------------------
# Frame-dump persistence
# ---------------------------------------------------------------------------

FRAME_DUMP_FORMAT = "subsil-frames"
FRAME_DUMP_VERSION = 1


def save_frames(
    frames: Sequence[tuple[FrameRegion, SilhouetteMask]], path: Path | str
) -> None:
    """Persist a frame stream as an ``.npz`` archive (regions + masks)."""
    if not frames:
        raise SilhouetteError("cannot save an empty frame stream")
    geometry = frames[0][0].geometry
    for region, mask in frames:
        _require_same_geometry(geometry, region.geometry, mask.geometry)
    np.savez_compressed(
        Path(path),
        format=np.array(FRAME_DUMP_FORMAT),
        version=np.array(FRAME_DUMP_VERSION),
        regions=np.stack([r.pixels for r, _ in frames]),
        masks=np.stack([m.bits for _, m in frames]),
    )


def load_frames(path: Path | str) -> list[tuple[FrameRegion, SilhouetteMask]]:
    with np.load(Path(path)) as archive:
        if str(archive["format"]) != FRAME_DUMP_FORMAT:
            raise SilhouetteError(f"{path}: not a {FRAME_DUMP_FORMAT} archive")
        if int(archive["version"]) != FRAME_DUMP_VERSION:
            raise SilhouetteError(f"{path}: unsupported frame-dump version")
        regions = archive["regions"]
        masks = archive["masks"]
    return [
        (FrameRegion(regions[i]), SilhouetteMask(masks[i])) for i in range(regions.shape[0])
    ]
