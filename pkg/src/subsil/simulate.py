"""Ground-truth observation generation and synthetic silhouette frames.

This module stands in for a camera and extraction pipeline: it computes which
subtitles a recording interval would show, injects extraction errors, models
pauses, seeks, and multi-clip captures, and can render a subtitle window into
synthetic (frame, mask) streams for the silhouette pipeline.

A subtitle is observed when its display interval intersects the recording
interval at all, both taken as closed ranges; ``min_overlap_ms`` tightens
that to a minimum overlap where needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus, Subtitle, SubtitleTrack
from .matcher import Observation, SEEK_FAST_FORWARD, SEEK_REWIND
from .silhouette import FrameRegion, SilhouetteMask


class SimulationError(ValueError):
    """Scenario inconsistent with the track or with itself."""


# ---------------------------------------------------------------------------
# Specs and results
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorSpec:
    """Extraction errors to inject, in the order substitution, deletion, insertion.

    Substitutions shift a class by ``shift`` (staying within 1..3); deletions
    drop observed elements; insertions add spurious classes drawn uniformly
    from 1..3. ``seed`` makes every draw reproducible.
    """

    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    shift: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.substitutions, self.deletions, self.insertions) < 0:
            raise SimulationError("error counts must be non-negative")
        if self.shift not in (1, 2):
            raise SimulationError("substitution shift must be 1 or 2")


@dataclass(frozen=True)
class ScenarioSpec:
    """One recording scenario against a known track.

    ``pauses`` are wall-clock (offset, length) pairs inside the recording.
    ``seeks`` holds at most one (at_ms, to_ms) video-time jump, which splits
    the capture in two. ``clip_gaps`` are (gap_ms, duration_ms) pairs for
    additional clips after the first (line-of-sight interruptions).
    """

    video_id: str
    start_ms: int
    duration_ms: int
    pauses: tuple[tuple[int, int], ...] = ()
    seeks: tuple[tuple[int, int], ...] = ()
    clip_gaps: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "pauses", tuple((int(a), int(b)) for a, b in self.pauses))
        object.__setattr__(self, "seeks", tuple((int(a), int(b)) for a, b in self.seeks))
        object.__setattr__(
            self, "clip_gaps", tuple((int(a), int(b)) for a, b in self.clip_gaps)
        )
        if self.start_ms < 0 or self.duration_ms <= 0:
            raise SimulationError("scenario needs start_ms >= 0 and duration_ms > 0")
        if len(self.seeks) > 1:
            raise SimulationError("at most one seek per scenario is modeled")
        if self.seeks and (self.pauses or self.clip_gaps):
            raise SimulationError("seeks cannot be combined with pauses or clip gaps")
        if self.clip_gaps and self.pauses:
            raise SimulationError("pauses are modeled for single-clip scenarios only")


@dataclass(frozen=True)
class GroundTruth:
    """What the generator actually showed, for recall checks."""

    video_id: str
    windows: tuple[tuple[int, int], ...]
    true_classes: tuple[tuple[int, ...], ...]
    injected: tuple[tuple[int, int, int], ...]
    seek_kind: str | None = None
    gaps_ms: tuple[int, ...] = ()


@dataclass(frozen=True)
class RenderResult:
    observations: tuple[Observation, ...]
    gaps_ms: tuple[int, ...]
    seek_kind: str | None
    ground_truth: GroundTruth

    @property
    def observation(self) -> Observation:
        if len(self.observations) != 1:
            raise SimulationError("scenario produced multiple observations")
        return self.observations[0]


# ---------------------------------------------------------------------------
# Window visibility
# ---------------------------------------------------------------------------


def visible_window(
    track: SubtitleTrack, start_ms: int, end_ms: int, *, min_overlap_ms: int = 0
) -> tuple[int, int] | None:
    """(first 0-based index, length) of subtitles visible in [start, end].

    Returns ``None`` when no subtitle overlaps the interval by at least
    ``min_overlap_ms`` (0 counts mere touching).
    """
    if end_ms < start_ms:
        raise SimulationError("interval end precedes start")
    starts = track.start_ms_array
    ends = track.end_ms_array
    lo = int(np.searchsorted(ends, start_ms, side="left"))
    hi = int(np.searchsorted(starts, end_ms, side="right")) - 1
    if min_overlap_ms > 0:
        while lo <= hi and _overlap(track.subtitles[lo], start_ms, end_ms) < min_overlap_ms:
            lo += 1
        while lo <= hi and _overlap(track.subtitles[hi], start_ms, end_ms) < min_overlap_ms:
            hi -= 1
    if lo > hi:
        return None
    return lo, hi - lo + 1


def _overlap(sub: Subtitle, start_ms: int, end_ms: int) -> int:
    return min(sub.end_ms, end_ms) - max(sub.start_ms, start_ms)


def clip_spans(
    track: SubtitleTrack, start_ms: int, end_ms: int, *, min_overlap_ms: int = 0
) -> tuple[tuple[int, int, int], ...]:
    """Visible subtitles as (class, start, end) clamped to recording-relative ms."""
    window = visible_window(track, start_ms, end_ms, min_overlap_ms=min_overlap_ms)
    if window is None:
        return ()
    j, m = window
    spans = []
    for offset in range(m):
        sub = track.subtitles[j + offset]
        spans.append(
            (
                int(track.class_array[j + offset]),
                max(sub.start_ms - start_ms, 0),
                min(sub.end_ms - start_ms, end_ms - start_ms),
            )
        )
    return tuple(spans)


# ---------------------------------------------------------------------------
# Observation rendering
# ---------------------------------------------------------------------------


def _apply_errors(
    classes: list[int], errors: ErrorSpec, rng: np.random.Generator
) -> tuple[list[int], tuple[int, int, int]]:
    observed = list(classes)

    eligible = [
        k
        for k, c in enumerate(observed)
        if (1 <= c - errors.shift <= 3) or (1 <= c + errors.shift <= 3)
    ]
    n_subs = min(errors.substitutions, len(eligible))
    if n_subs:
        for k in rng.choice(len(eligible), size=n_subs, replace=False):
            position = eligible[int(k)]
            current = observed[position]
            targets = [
                t for t in (current - errors.shift, current + errors.shift) if 1 <= t <= 3
            ]
            observed[position] = int(targets[int(rng.integers(len(targets)))])

    if errors.deletions >= len(observed):
        raise SimulationError(
            f"cannot delete {errors.deletions} of {len(observed)} silhouettes"
        )
    if errors.deletions:
        drop = sorted(
            int(k) for k in rng.choice(len(observed), size=errors.deletions, replace=False)
        )
        for position in reversed(drop):
            del observed[position]

    for _ in range(errors.insertions):
        position = int(rng.integers(len(observed) + 1))
        observed.insert(position, int(rng.integers(1, 4)))

    return observed, (n_subs, errors.deletions, errors.insertions)


def _clip_intervals(
    track: SubtitleTrack, scenario: ScenarioSpec
) -> tuple[list[tuple[int, int, int]], list[int], str | None]:
    """(video_start, video_end, wall_duration) per clip, observed gaps, seek kind."""
    if scenario.seeks:
        at_ms, to_ms = scenario.seeks[0]
        first_wall = at_ms - scenario.start_ms
        if not 0 < first_wall < scenario.duration_ms:
            raise SimulationError("seek point must fall inside the recording")
        remaining = scenario.duration_ms - first_wall
        if to_ms < 0 or to_ms + remaining > track.duration_ms:
            raise SimulationError("seek target leaves the video")
        kind = SEEK_REWIND if to_ms < at_ms else SEEK_FAST_FORWARD
        return (
            [
                (scenario.start_ms, at_ms, first_wall),
                (to_ms, to_ms + remaining, remaining),
            ],
            [to_ms - at_ms],
            kind,
        )

    if scenario.clip_gaps:
        intervals = [(scenario.start_ms, scenario.start_ms + scenario.duration_ms, scenario.duration_ms)]
        gaps = []
        cursor = scenario.start_ms + scenario.duration_ms
        for gap_ms, duration_ms in scenario.clip_gaps:
            if gap_ms <= 0 or duration_ms <= 0:
                raise SimulationError("clip gaps and durations must be positive")
            cursor += gap_ms
            intervals.append((cursor, cursor + duration_ms, duration_ms))
            gaps.append(gap_ms)
            cursor += duration_ms
        if cursor > track.duration_ms:
            raise SimulationError("multi-clip scenario runs past the video end")
        return intervals, gaps, None

    active = scenario.duration_ms - sum(length for _, length in scenario.pauses)
    if active <= 0:
        raise SimulationError("pauses consume the entire recording")
    end_ms = scenario.start_ms + active
    if end_ms > track.duration_ms:
        raise SimulationError("scenario runs past the video end")
    return [(scenario.start_ms, end_ms, scenario.duration_ms)], [], None


def render_observation(
    track: SubtitleTrack,
    scenario: ScenarioSpec,
    errors: ErrorSpec = ErrorSpec(),
    *,
    min_overlap_ms: int = 0,
) -> RenderResult:
    """Compute the observation(s) a recording of this scenario would yield.

    Pauses stretch the recording without advancing the video; a seek splits
    the capture into two observations; clip gaps produce one observation per
    clip plus the observed inter-sequence intervals. Errors are injected per
    clip with the spec's seeded generator, and the returned ground truth
    records the true windows and applied error counts.
    """
    if scenario.video_id != track.video_id:
        raise SimulationError(
            f"scenario targets {scenario.video_id!r}, track is {track.video_id!r}"
        )
    for at_ms, length in scenario.pauses:
        if at_ms + length > scenario.duration_ms:
            raise SimulationError("pause extends past the recording")

    rng = np.random.default_rng(errors.seed)
    intervals, gaps, seek_kind = _clip_intervals(track, scenario)
    for video_start, video_end, _ in intervals:
        if video_start < 0 or video_end > track.duration_ms:
            raise SimulationError("scenario plays outside the video")

    observations = []
    windows = []
    true_classes = []
    injected = []
    for position, (video_start, video_end, wall_ms) in enumerate(intervals):
        window = visible_window(track, video_start, video_end, min_overlap_ms=min_overlap_ms)
        if window is None:
            raise SimulationError(f"clip {position} shows no subtitles")
        j, m = window
        truth = [int(c) for c in track.class_array[j : j + m]]
        observed, counts = _apply_errors(truth, errors, rng)
        if not observed:
            raise SimulationError(f"clip {position} lost every silhouette to errors")
        pauses = scenario.pauses if len(intervals) == 1 else ()
        observations.append(Observation(tuple(observed), wall_ms, pauses))
        windows.append((j, m))
        true_classes.append(tuple(truth))
        injected.append(counts)

    ground_truth = GroundTruth(
        video_id=track.video_id,
        windows=tuple(windows),
        true_classes=tuple(true_classes),
        injected=tuple(injected),
        seek_kind=seek_kind,
        gaps_ms=tuple(gaps),
    )
    return RenderResult(tuple(observations), tuple(gaps), seek_kind, ground_truth)


def sample_scenario(
    track: SubtitleTrack,
    duration_ms: int,
    rng: np.random.Generator,
    *,
    edge_margin_ms: int = 0,
    max_tries: int = 200,
) -> ScenarioSpec:
    """Draw a random single-clip scenario whose window is non-empty.

    ``edge_margin_ms`` additionally requires the first and last visible
    subtitles to overlap the recording by at least that long, which keeps
    every visible subtitle long enough on screen to be sampled by a
    finite-fps frame stream.
    """
    upper = track.duration_ms - duration_ms
    if upper < 0:
        raise SimulationError(
            f"{track.video_id}: track shorter than the requested {duration_ms} ms"
        )
    for _ in range(max_tries):
        start_ms = int(rng.integers(0, upper + 1))
        window = visible_window(track, start_ms, start_ms + duration_ms)
        if window is None:
            continue
        if edge_margin_ms > 0:
            j, m = window
            end_ms = start_ms + duration_ms
            if _overlap(track.subtitles[j], start_ms, end_ms) < edge_margin_ms:
                continue
            if _overlap(track.subtitles[j + m - 1], start_ms, end_ms) < edge_margin_ms:
                continue
        return ScenarioSpec(track.video_id, start_ms, duration_ms)
    raise SimulationError(
        f"{track.video_id}: no usable {duration_ms} ms window found in {max_tries} tries"
    )


# ---------------------------------------------------------------------------
# Synthetic frame rendering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthGeometry:
    """Pixel geometry for the synthetic renderer."""

    width: int = 96
    height: int = 36
    line_height_px: int = 6
    fps: int = 10
    margin_px: int = 2

    def __post_init__(self) -> None:
        if min(self.width, self.height, self.line_height_px) < 1 or self.fps < 1:
            raise SimulationError("geometry dimensions and fps must be positive")
        if self.margin_px < 0 or 3 * self.line_height_px + self.margin_px > self.height:
            raise SimulationError("three subtitle lines must fit above the margin")
        if self.width < 10:
            raise SimulationError("width must allow visible width variation")


_BACKGROUND = 16
_TEXTURE_LOW, _TEXTURE_HIGH = 150, 256


def synth_frames(
    spans: Sequence[tuple[int, int, int]],
    duration_ms: int,
    geometry: SynthGeometry = SynthGeometry(),
    seed: int = 0,
) -> list[tuple[FrameRegion, SilhouetteMask]]:
    """Render (class, start_ms, end_ms) spans into a frame/mask stream.

    Each subtitle becomes a bottom-anchored filled block, ``lines *
    line_height_px`` tall, horizontally centered with a per-subtitle width.
    Frames of one subtitle share a texture plus per-frame noise below the
    same-subtitle allowance; distinct subtitles get independent textures so
    the similarity ratio exceeds 1 even when their masks coincide.
    """
    if duration_ms <= 0:
        raise SimulationError("frame stream duration must be positive")
    previous_end = 0
    for cls, start_ms, end_ms in spans:
        if not 1 <= cls <= 3 or start_ms < previous_end or end_ms < start_ms:
            raise SimulationError(f"bad span ({cls}, {start_ms}, {end_ms})")
        previous_end = end_ms

    rng = np.random.default_rng(seed)
    shape = (geometry.height, geometry.width)
    rendered = []
    for cls, start_ms, end_ms in spans:
        block_h = cls * geometry.line_height_px
        row_hi = geometry.height - geometry.margin_px
        row_lo = row_hi - block_h
        half = max(2, int(geometry.width * rng.uniform(0.4, 0.9) / 2))
        col_lo = max(0, geometry.width // 2 - half)
        col_hi = min(geometry.width, geometry.width // 2 + half)
        texture = rng.integers(
            _TEXTURE_LOW, _TEXTURE_HIGH, size=(block_h, col_hi - col_lo), dtype=np.int16
        )
        rendered.append((start_ms, end_ms, (row_lo, row_hi, col_lo, col_hi), texture))

    frame_count = max(1, -(-duration_ms * geometry.fps // 1000))
    frames = []
    for f in range(frame_count):
        t = f * 1000 // geometry.fps
        base = np.full(shape, _BACKGROUND, dtype=np.int16)
        bits = np.zeros(shape, dtype=bool)
        for start_ms, end_ms, (r0, r1, c0, c1), texture in rendered:
            if start_ms <= t < end_ms:
                base[r0:r1, c0:c1] = texture
                bits[r0:r1, c0:c1] = True
                break
        noise = rng.integers(-1, 2, size=shape)
        region = np.clip(base + noise, 0, 255).astype(np.uint8)
        frames.append((FrameRegion(region), SilhouetteMask(bits)))
    return frames


# ---------------------------------------------------------------------------
# Synthetic corpus generation
# ---------------------------------------------------------------------------

_SYLLABLES = (
    "ba be bo da de do ka ke ko la le lo ma me mo na ne no ra re ro sa se so "
    "ta te to va ve vo"
).split()

# Deterministic pseudo-word pool; tracks draw indices into it in bulk.
_WORD_POOL = tuple(
    a + b for a in _SYLLABLES for b in _SYLLABLES
)


def _words(rng: np.random.Generator, count: int) -> list[str]:
    return [_WORD_POOL[int(k)] for k in rng.integers(len(_WORD_POOL), size=count)]


@dataclass(frozen=True)
class SynthCorpusSpec:
    """Knobs for the synthetic track generator.

    Dialog regimes emit closely spaced subtitles; sparse regimes model scenes
    without speech via long gaps. A per-track lognormal gap multiplier spreads
    overall subtitle density across the corpus the way real movies spread
    (dialog-heavy dramas against sparse action films), which keeps short
    recordings ambiguous at realistic rates. ``quantum_ms`` snaps all times
    onto a grid.
    """

    duration_range_ms: tuple[int, int] = (45 * 60_000, 110 * 60_000)
    subtitle_duration_range_ms: tuple[int, int] = (800, 3_800)
    dialog_gap_range_ms: tuple[int, int] = (100, 1_800)
    sparse_gap_range_ms: tuple[int, int] = (6_000, 18_000)
    sparse_enter_prob: float = 0.015
    sparse_exit_prob: float = 0.65
    gap_spread_sigma: float = 0.95
    gap_spread_limits: tuple[float, float] = (0.5, 10.0)
    line_probs: tuple[float, float, float] = (0.55, 0.37, 0.08)
    quantum_ms: int = 1


def synth_track(
    video_id: str,
    rng: np.random.Generator,
    spec: SynthCorpusSpec = SynthCorpusSpec(),
    title: str | None = None,
) -> SubtitleTrack:
    """Generate one deterministic pseudo-movie subtitle track."""
    q = spec.quantum_ms

    def snap(value: int) -> int:
        return max(q, int(value) // q * q)

    duration_ms = snap(int(rng.integers(*spec.duration_range_ms)))
    if title is None:
        title = " ".join(w.capitalize() for w in _words(rng, 2))

    density = float(
        np.clip(np.exp(rng.normal(0.0, spec.gap_spread_sigma)), *spec.gap_spread_limits)
    )

    # Upper bound on how many subtitles can fit, then bulk-draw everything.
    cap = duration_ms // (spec.subtitle_duration_range_ms[0] + q) + 2
    lengths = rng.integers(*spec.subtitle_duration_range_ms, size=cap)
    dialog_gaps = (rng.integers(*spec.dialog_gap_range_ms, size=cap) * density).astype(np.int64)
    sparse_gaps = rng.integers(*spec.sparse_gap_range_ms, size=cap)
    line_counts = 1 + rng.choice(3, size=cap, p=spec.line_probs)
    transitions = rng.random(size=cap)
    words_per_line = rng.integers(3, 7, size=3 * cap)
    word_indices = rng.integers(len(_WORD_POOL), size=int(words_per_line.sum()))

    subtitles = []
    cursor = snap(int(dialog_gaps[0])) + q
    sparse = False
    line_cursor = 0
    word_cursor = 0
    for i in range(cap):
        length = snap(int(lengths[i]))
        if cursor + length + q > duration_ms:
            break
        lines = []
        for _ in range(int(line_counts[i])):
            n_words = int(words_per_line[line_cursor])
            line_cursor += 1
            chunk = word_indices[word_cursor : word_cursor + n_words]
            word_cursor += n_words
            lines.append(" ".join(_WORD_POOL[int(k)] for k in chunk))
        subtitles.append(Subtitle(i + 1, cursor, cursor + length, tuple(lines)))
        gap = sparse_gaps[i] if sparse else dialog_gaps[i]
        cursor += length + max(q, snap(int(gap)))
        if sparse:
            if transitions[i] < spec.sparse_exit_prob:
                sparse = False
        elif transitions[i] < spec.sparse_enter_prob:
            sparse = True
    if not subtitles:
        raise SimulationError("track duration too short to hold any subtitles")
    return SubtitleTrack(video_id, title, duration_ms, tuple(subtitles))


def synth_corpus(
    n_tracks: int,
    seed: int = 0,
    spec: SynthCorpusSpec = SynthCorpusSpec(),
    id_prefix: str = "vid",
) -> Corpus:
    """Generate a deterministic corpus of ``n_tracks`` pseudo-movies."""
    root = np.random.default_rng(seed)
    streams = root.spawn(n_tracks)
    width = max(3, len(str(n_tracks - 1)))
    tracks = tuple(
        synth_track(f"{id_prefix}{i:0{width}d}", streams[i], spec) for i in range(n_tracks)
    )
    return Corpus(tracks)
