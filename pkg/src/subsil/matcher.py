"""Corpus-scale spatiotemporal correlation with error-tolerant alignment.

An observation is a sequence of silhouette line-count classes plus the
recording duration. Matching slides a window of the observation's length over
every track, keeps windows whose subtitle timing can exhibit the sequence
within the recording span, and compares class vectors under a squared-distance
budget. Deletion and insertion hypotheses align the observation to candidate
windows of nearby lengths using wildcard slots and element removals.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, combinations_with_replacement
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .corpus import Corpus, SubtitleTrack

log = logging.getLogger(__name__)

# Keep pattern-by-window distance broadcasts under ~32M cells per chunk.
_CHUNK_CELLS = 32_000_000


class MatchError(ValueError):
    """Invalid matching input (empty corpus, bad windows, bad observations)."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Observation:
    """An observed silhouette class sequence over a recording of known span.

    ``pauses`` are (start_offset_ms, length_ms) playback pauses detected in
    the recording; they inflate ``duration_ms`` without advancing the video.
    """

    classes: tuple[int, ...]
    duration_ms: int
    pauses: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))
        object.__setattr__(
            self, "pauses", tuple((int(a), int(b)) for a, b in self.pauses)
        )
        if len(self.classes) == 0:
            raise MatchError("observation needs at least one silhouette")
        if any(not 1 <= c <= 3 for c in self.classes):
            raise MatchError("observation classes must be in 1..3")
        if self.duration_ms <= 0:
            raise MatchError("observation duration must be positive")
        cursor = 0
        for start, length in sorted(self.pauses):
            if start < cursor or length <= 0 or start + length > self.duration_ms:
                raise MatchError(f"invalid pause ({start}, {length})")
            cursor = start + length

    def __len__(self) -> int:
        return len(self.classes)


@dataclass(frozen=True)
class ToleranceConfig:
    """Error-tolerance knobs for vector matching.

    ``d0_coeff`` scales the squared-distance substitution budget,
    ceil(d0_coeff * length), evaluated per aligned hypothesis length.
    ``max_deletions``/``max_insertions`` bound the hypothesis search; both
    default to 0 and values above 2 grow the search combinatorially.
    """

    d0_coeff: float = 0.1
    max_deletions: int = 0
    max_insertions: int = 0

    def __post_init__(self) -> None:
        if self.d0_coeff < 0:
            raise MatchError("d0_coeff must be non-negative")
        if self.max_deletions < 0 or self.max_insertions < 0:
            raise MatchError("deletion/insertion bounds must be non-negative")

    def budget(self, length: int) -> int:
        # Fraction keeps ceil exact: math.ceil(0.1 * 30) is 4 in binary floats.
        return math.ceil(Fraction(str(self.d0_coeff)) * length)


@dataclass(frozen=True)
class CandidateClip:
    """A subtitle window that can exhibit the observed sequence.

    Subtitle indices are 1-based and inclusive. The recording start lies in
    ``(start_bounds[0], start_bounds[1]]`` and the recording end in
    ``[end_bounds[0], end_bounds[1]]``, in track milliseconds.
    """

    video_id: str
    title: str
    first_index: int
    last_index: int
    start_bounds: tuple[int, int]
    end_bounds: tuple[int, int]

    @property
    def start_offset(self) -> int:
        """0-based index of the window's first subtitle."""
        return self.first_index - 1

    @property
    def length(self) -> int:
        return self.last_index - self.first_index + 1

    @property
    def start_point(self) -> float:
        """Midpoint of the feasible recording-start range."""
        return (self.start_bounds[0] + self.start_bounds[1]) / 2

    @property
    def end_point(self) -> float:
        """Midpoint of the feasible recording-end range."""
        return (self.end_bounds[0] + self.end_bounds[1]) / 2

    def sort_key(self) -> tuple[str, int, int]:
        return (self.video_id, self.first_index, self.last_index)


@dataclass(frozen=True)
class AlignmentHypothesis:
    """One error hypothesis: observed elements removed, wildcards inserted.

    ``pattern`` is the aligned comparison vector; ``None`` slots match any
    candidate class. ``removed`` holds the observation indices dropped as
    presumed insertions; ``wildcards`` the pattern slots covering presumed
    deletions.
    """

    pattern: tuple[Optional[int], ...]
    removed: tuple[int, ...]
    wildcards: tuple[int, ...]

    @property
    def aligned_length(self) -> int:
        return len(self.pattern)


# ---------------------------------------------------------------------------
# Core predicates
# ---------------------------------------------------------------------------


def adjust_for_pause(obs: Observation) -> int:
    """Recording duration minus total pause time (the effective video span)."""
    total = sum(length for _, length in obs.pauses)
    effective = obs.duration_ms - total
    if effective <= 0:
        raise MatchError("pauses consume the entire recording")
    return effective


def feasible_window(track: SubtitleTrack, j: int, m: int, duration_ms: int) -> bool:
    """Can some ``duration_ms`` interval show exactly subtitles j+1..j+m?

    ``j`` counts the subtitles before the window (0-based window start). The
    sentinel end time before the first subtitle is 0 and the sentinel start
    time after the last is the video duration.
    """
    w = track.subtitle_count
    if m < 1 or j < 0 or j + m > w:
        raise MatchError(f"window j={j}, m={m} out of range for {w} subtitles")
    starts = track.start_ms_array
    ends = track.end_ms_array
    prev_end = int(ends[j - 1]) if j > 0 else 0
    next_start = int(starts[j + m]) if j + m < w else track.duration_ms
    inner_last_start = int(starts[j + m - 1])
    inner_first_end = int(ends[j])
    return (next_start - prev_end >= duration_ms) and (
        inner_last_start - inner_first_end <= duration_ms
    )


def match_vectors(
    v_o: Sequence[Optional[int]],
    v_c: Sequence[int],
    cfg: ToleranceConfig = ToleranceConfig(),
) -> bool:
    """Squared-distance comparison with wildcard slots contributing zero."""
    if len(v_o) != len(v_c):
        raise MatchError(f"vector lengths differ: {len(v_o)} vs {len(v_c)}")
    d_sq = sum((a - b) ** 2 for a, b in zip(v_o, v_c) if a is not None)
    return d_sq <= cfg.budget(len(v_o))


def tolerate_errors(
    obs: Observation, cfg: ToleranceConfig = ToleranceConfig()
) -> list[AlignmentHypothesis]:
    """Enumerate alignment hypotheses for up to D deletions and I insertions.

    For each insertion count i, every i-subset of observed elements is
    removed; for each deletion count d, d wildcard slots go into every gap
    multiset of the remainder. The exact observation is always hypothesis 0.
    """
    m = len(obs.classes)
    hypotheses: list[AlignmentHypothesis] = []
    for d in range(cfg.max_deletions + 1):
        for i in range(cfg.max_insertions + 1):
            for removed in combinations(range(m), i):
                base = [c for k, c in enumerate(obs.classes) if k not in removed]
                if not base and d == 0:
                    continue
                for gaps in combinations_with_replacement(range(len(base) + 1), d):
                    pattern: list[Optional[int]] = []
                    wildcards = []
                    for position in range(len(base) + 1):
                        for gap in gaps:
                            if gap == position:
                                wildcards.append(len(pattern))
                                pattern.append(None)
                        if position < len(base):
                            pattern.append(base[position])
                    hypotheses.append(
                        AlignmentHypothesis(tuple(pattern), removed, tuple(wildcards))
                    )
    return hypotheses


# ---------------------------------------------------------------------------
# Corpus correlation
# ---------------------------------------------------------------------------


def _pattern_groups(
    hypotheses: Iterable[AlignmentHypothesis],
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Distinct patterns grouped by aligned length, as value/mask matrices."""
    by_length: dict[int, list[tuple[Optional[int], ...]]] = {}
    seen: set[tuple[Optional[int], ...]] = set()
    for hyp in hypotheses:
        if hyp.pattern not in seen:
            seen.add(hyp.pattern)
            by_length.setdefault(hyp.aligned_length, []).append(hyp.pattern)
    groups = {}
    for length, patterns in by_length.items():
        values = np.array(
            [[0 if c is None else c for c in p] for p in patterns], dtype=np.int16
        )
        mask = np.array([[c is not None for c in p] for p in patterns], dtype=bool)
        groups[length] = (values, mask)
    return groups


def _feasible_starts(track: SubtitleTrack, n: int, duration_ms: int) -> np.ndarray:
    """All 0-based window starts of length ``n`` passing the time constraints."""
    w = track.subtitle_count
    starts = track.start_ms_array
    ends = track.end_ms_array
    count = w - n + 1
    prev_end = np.empty(count, dtype=np.int64)
    prev_end[0] = 0
    if count > 1:
        prev_end[1:] = ends[: count - 1]
    next_start = np.empty(count, dtype=np.int64)
    next_start[:-1] = starts[n:]
    next_start[-1] = track.duration_ms
    outer_ok = next_start - prev_end >= duration_ms
    inner_ok = starts[n - 1 :] - ends[:count] <= duration_ms
    return np.flatnonzero(outer_ok & inner_ok)


def _scan_track(
    track: SubtitleTrack,
    groups: dict[int, tuple[np.ndarray, np.ndarray]],
    duration_ms: int,
    cfg: ToleranceConfig,
) -> list[CandidateClip]:
    found = []
    for n in sorted(groups):
        if n < 1 or n > track.subtitle_count:
            continue
        js = _feasible_starts(track, n, duration_ms)
        if js.size == 0:
            continue
        windows = sliding_window_view(track.class_array, n)[js]
        values, mask = groups[n]
        budget = cfg.budget(n)
        matched = np.zeros(js.size, dtype=bool)
        step = max(1, _CHUNK_CELLS // max(1, js.size * n))
        for lo in range(0, values.shape[0], step):
            chunk_values = values[lo : lo + step, None, :]
            chunk_mask = mask[lo : lo + step, None, :]
            diff = windows[None, :, :].astype(np.int32) - chunk_values
            np.multiply(diff, chunk_mask, out=diff)  # wildcard slots contribute 0
            np.square(diff, out=diff)
            matched |= (diff.sum(axis=2) <= budget).any(axis=0)
            if matched.all():
                break
        for j in js[matched]:
            found.append(_make_candidate(track, int(j), n))
    return found


def _make_candidate(track: SubtitleTrack, j: int, n: int) -> CandidateClip:
    starts = track.start_ms_array
    ends = track.end_ms_array
    w = track.subtitle_count
    prev_end = int(ends[j - 1]) if j > 0 else 0
    next_start = int(starts[j + n]) if j + n < w else track.duration_ms
    return CandidateClip(
        video_id=track.video_id,
        title=track.title,
        first_index=j + 1,
        last_index=j + n,
        start_bounds=(prev_end, int(ends[j])),
        end_bounds=(int(starts[j + n - 1]), next_start),
    )


def correlate(
    obs: Observation,
    corpus: Corpus,
    cfg: ToleranceConfig = ToleranceConfig(),
    *,
    jobs: int = 1,
) -> list[CandidateClip]:
    """All corpus windows matching the observation under the tolerance config.

    Every track is scanned with a sliding window per hypothesis length;
    windows failing the time-feasibility constraints are skipped, the rest
    are compared as class vectors against every alignment hypothesis.
    Candidates are reported once per window, ordered by (video_id, window
    start, window length). Tracks are read-only, so scans run in parallel
    when ``jobs`` exceeds one; the merge order is deterministic either way.
    """
    if corpus.K == 0:
        raise MatchError("cannot correlate against an empty corpus")
    duration_ms = adjust_for_pause(obs)
    groups = _pattern_groups(tolerate_errors(obs, cfg))
    max_subtitles = max(t.subtitle_count for t in corpus.tracks)
    if min(groups) > max_subtitles:
        log.warning(
            "observation of %d silhouettes exceeds the largest track (%d subtitles)",
            len(obs.classes),
            max_subtitles,
        )
        return []

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_track = list(
                pool.map(lambda t: _scan_track(t, groups, duration_ms, cfg), corpus.tracks)
            )
    else:
        per_track = [_scan_track(t, groups, duration_ms, cfg) for t in corpus.tracks]

    candidates = [c for chunk in per_track for c in chunk]
    candidates.sort(key=CandidateClip.sort_key)
    return candidates


# ---------------------------------------------------------------------------
# Multi-clip demodulation
# ---------------------------------------------------------------------------


def _gap_consistent(
    corpus: Corpus, earlier: CandidateClip, later: CandidateClip, gap_ms: int
) -> bool:
    """Inter-clip gap check: |gap - (start(later) - end(earlier))| <= slack.

    Candidate start/end times are the midpoints of their bound ranges. The
    slack is delta, the sum of the durations of the earlier window's last
    subtitle and the later window's first subtitle, widened by the midpoint
    uncertainty (half of each bound range), so a chain whose true recording
    times lie anywhere in the bounds is never discarded.
    """
    track = corpus.get(earlier.video_id)
    last_sub = track.subtitles[earlier.last_index - 1]
    first_sub = corpus.get(later.video_id).subtitles[later.first_index - 1]
    delta = last_sub.duration_ms + first_sub.duration_ms
    slack = (
        delta
        + (later.start_bounds[1] - later.start_bounds[0]) / 2
        + (earlier.end_bounds[1] - earlier.end_bounds[0]) / 2
    )
    return abs(gap_ms - (later.start_point - earlier.end_point)) <= slack


def joint_demodulate(
    clips: Sequence[Observation],
    intervals_ms: Sequence[int],
    corpus: Corpus,
    cfg: ToleranceConfig = ToleranceConfig(),
    *,
    jobs: int = 1,
) -> list[tuple[CandidateClip, ...]]:
    """Chain per-clip candidates across discontinuous observations.

    Adjacent chain members must come from the same video and their video-time
    spacing must agree with the observed inter-sequence interval within the
    subtitle-duration slack. Returns every surviving chain, one candidate per
    clip, deterministically ordered.
    """
    if len(clips) < 2:
        raise MatchError("joint demodulation needs at least two clips")
    if len(intervals_ms) != len(clips) - 1:
        raise MatchError(
            f"expected {len(clips) - 1} inter-sequence intervals, got {len(intervals_ms)}"
        )
    per_clip = []
    for position, clip in enumerate(clips):
        candidates = correlate(clip, corpus, cfg, jobs=jobs)
        if not candidates:
            log.warning("joint demodulation: clip %d produced no candidates", position)
            return []
        per_clip.append(candidates)

    chains: list[tuple[CandidateClip, ...]] = [(c,) for c in per_clip[0]]
    for position in range(1, len(clips)):
        gap_ms = intervals_ms[position - 1]
        extended = []
        for chain in chains:
            for candidate in per_clip[position]:
                if candidate.video_id != chain[-1].video_id:
                    continue
                if not _gap_consistent(corpus, chain[-1], candidate, gap_ms):
                    continue
                extended.append(chain + (candidate,))
        chains = extended
        if not chains:
            break
    chains.sort(key=lambda chain: tuple(c.sort_key() for c in chain))
    return chains


SEEK_REWIND = "rewind"
SEEK_FAST_FORWARD = "fast_forward"


def demodulate_with_seek(
    clip1: Observation,
    clip2: Observation,
    kind: str,
    corpus: Corpus,
    cfg: ToleranceConfig = ToleranceConfig(),
    *,
    jobs: int = 1,
) -> list[tuple[CandidateClip, CandidateClip]]:
    """Pair candidates across a rewind or fast-forward.

    The inter-sequence interval is meaningless across a seek, so only the
    same-video constraint and the ordering of the second clip's start against
    the first clip's end apply: earlier for a rewind, later for a
    fast-forward. Ordering is tested against the candidates' bound ranges
    (can the second clip start before/after the first one ends anywhere in
    its range), so true pairs are never discarded.
    """
    if kind not in (SEEK_REWIND, SEEK_FAST_FORWARD):
        raise MatchError(f"unknown seek kind {kind!r}")
    first = correlate(clip1, corpus, cfg, jobs=jobs)
    second = correlate(clip2, corpus, cfg, jobs=jobs)
    if not first or not second:
        log.warning("seek demodulation: a clip produced no candidates")
        return []
    pairs = []
    for c1 in first:
        for c2 in second:
            if c1.video_id != c2.video_id:
                continue
            if kind == SEEK_REWIND and c2.start_bounds[0] < c1.end_bounds[1]:
                pairs.append((c1, c2))
            elif kind == SEEK_FAST_FORWARD and c2.start_bounds[1] > c1.end_bounds[0]:
                pairs.append((c1, c2))
    pairs.sort(key=lambda pair: (pair[0].sort_key(), pair[1].sort_key()))
    return pairs


def candidate_titles(candidates: Iterable[CandidateClip]) -> list[str]:
    """Distinct video ids among candidates, in report order."""
    seen: dict[str, None] = {}
    for candidate in candidates:
        seen.setdefault(candidate.video_id, None)
    return list(seen)
