"""Quantitative metrics: top-k accuracy, entropy, window populations, open world.

Every runner here is deterministic given its seed and configuration, so
reports regenerate byte-identically.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, SubtitleTrack
from .features import FEATURES, spatiotemporal_vector, uniqueness_score
from .matcher import Observation, ToleranceConfig, candidate_titles, correlate
from .simulate import (
    SimulationError,
    clip_spans,
    render_observation,
    sample_scenario,
    visible_window,
)

log = logging.getLogger(__name__)


class EvalError(ValueError):
    """Invalid evaluation input."""


# ---------------------------------------------------------------------------
# Formula-level metrics
# ---------------------------------------------------------------------------


def top_k_accuracy(candidate_count: int, k: int, *, target_present: bool = True) -> float:
    """Probability that k guesses from the candidate set contain the target.

    1 when k exceeds the candidate count, k/N otherwise; trials whose
    candidate set misses the target score 0.
    """
    if k < 1:
        raise EvalError("k must be at least 1")
    if not target_present:
        return 0.0
    if candidate_count < 1:
        raise EvalError("target cannot be present among zero candidates")
    if k > candidate_count:
        return 1.0
    return k / candidate_count


def entropy(multiplicities: Iterable[int]) -> float:
    """Shannon entropy, in bits, of an empirical class-size distribution."""
    counts = np.asarray(list(multiplicities), dtype=np.float64)
    if counts.size == 0:
        raise EvalError("entropy needs a non-empty population")
    if (counts < 1).any():
        raise EvalError("multiplicities must be at least 1")
    p = counts / counts.sum()
    return float(-(p * np.log2(p)).sum())


def enumerate_windows(
    corpus: Corpus,
    window_ms: int,
    stride_ms: int = 1000,
    *,
    dedupe: bool = False,
) -> list[tuple[int, ...]]:
    """Class sequences of every sliding window start across the corpus.

    A track of duration T0 contributes (T0 - T) // stride + 1 windows;
    subtitle-free windows appear as empty tuples. ``dedupe`` keeps the first
    occurrence of each distinct sequence instead of all starts.
    """
    if window_ms <= 0:
        raise EvalError("window_ms must be positive")
    if stride_ms < 1:
        raise EvalError("stride_ms must be at least 1")
    population: list[tuple[int, ...]] = []
    for track in corpus.tracks:
        if window_ms > track.duration_ms:
            continue
        starts = track.start_ms_array
        ends = track.end_ms_array
        classes = track.class_array
        ts = np.arange(0, track.duration_ms - window_ms + 1, stride_ms, dtype=np.int64)
        lows = np.searchsorted(ends, ts, side="left")
        highs = np.searchsorted(starts, ts + window_ms, side="right") - 1
        for lo, hi in zip(lows, highs):
            population.append(tuple(int(c) for c in classes[lo : hi + 1]) if hi >= lo else ())
    if not population:
        log.warning("no track is at least %d ms long; empty window population", window_ms)
        return []
    if dedupe:
        return list(dict.fromkeys(population))
    return population


def vector_class_sizes(population: Iterable[tuple[int, ...]]) -> list[int]:
    """Cluster sequences by spatiotemporal vector; return class sizes."""
    counter: Counter = Counter()
    for sequence in population:
        key = spatiotemporal_vector(sequence).indices if sequence else ()
        counter[key] += 1
    return sorted(counter.values(), reverse=True)


# ---------------------------------------------------------------------------
# Closed-world trials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialResult:
    """One recognition attempt against the full corpus."""

    video_id: str
    window: tuple[int, int]
    title_count: int
    clip_count: int
    title_hit: bool
    clip_hit: bool


def _window_hit(candidates, truth_video: str, truth_window: tuple[int, int]) -> bool:
    j, m = truth_window
    return any(
        c.video_id == truth_video and c.start_offset == j and c.length == m
        for c in candidates
    )


def closed_world_trials(
    corpus: Corpus,
    duration_ms: int,
    n_trials: int,
    cfg: ToleranceConfig = ToleranceConfig(),
    seed: int = 0,
    *,
    jobs: int = 1,
) -> list[TrialResult]:
    """Run error-free recognition trials with uniformly sampled clips."""
    if corpus.K == 0:
        raise EvalError("closed-world trials need a non-empty corpus")
    rng = np.random.default_rng(seed)
    usable = [t for t in corpus.tracks if t.duration_ms >= duration_ms]
    if not usable:
        raise EvalError(f"no track is at least {duration_ms} ms long")
    results = []
    while len(results) < n_trials:
        track = usable[int(rng.integers(len(usable)))]
        try:
            scenario = sample_scenario(track, duration_ms, rng)
        except SimulationError:
            continue
        rendered = render_observation(track, scenario)
        candidates = correlate(rendered.observation, corpus, cfg, jobs=jobs)
        truth = rendered.ground_truth
        results.append(
            TrialResult(
                video_id=track.video_id,
                window=truth.windows[0],
                title_count=len(candidate_titles(candidates)),
                clip_count=len(candidates),
                title_hit=any(c.video_id == track.video_id for c in candidates),
                clip_hit=_window_hit(candidates, track.video_id, truth.windows[0]),
            )
        )
    return results


def top_k_table(
    results: Sequence[TrialResult], ks: Sequence[int] = (1, 5, 10, 20, 50)
) -> dict[int, tuple[float, float]]:
    """Mean top-k accuracy per k, at title and clip level."""
    if not results:
        raise EvalError("top_k_table needs at least one trial")
    table = {}
    for k in ks:
        titles = [top_k_accuracy(r.title_count, k, target_present=r.title_hit) for r in results]
        clips = [top_k_accuracy(r.clip_count, k, target_present=r.clip_hit) for r in results]
        table[k] = (float(np.mean(titles)), float(np.mean(clips)))
    return table


def prefix_counts(
    track: SubtitleTrack,
    corpus: Corpus,
    start_ms: int,
    duration_ms: int,
    cfg: ToleranceConfig = ToleranceConfig(),
    *,
    jobs: int = 1,
    max_points: int | None = None,
) -> list[tuple[int, int, int]]:
    """(observed length, title count, clip count) as the recording grows.

    Replays the recording prefix ending at each visible subtitle's clamped
    end, mirroring how candidate counts evolve while silhouettes arrive; the
    final row is always the complete recording.
    """
    spans = clip_spans(track, start_ms, start_ms + duration_ms)
    if not spans:
        raise EvalError("recording shows no subtitles")
    points = sorted({end_rel for _, _, end_rel in spans if end_rel > 0})
    if max_points is not None and len(points) > max_points - 1:
        idx = np.linspace(0, len(points) - 1, max_points - 1).round().astype(int)
        points = [points[i] for i in sorted(set(int(i) for i in idx))]
    if points[-1] != duration_ms:
        points.append(duration_ms)
    rows = []
    for prefix_ms in points:
        window = visible_window(track, start_ms, start_ms + prefix_ms)
        if window is None:
            continue
        j, m = window
        obs = Observation(tuple(int(c) for c in track.class_array[j : j + m]), prefix_ms)
        candidates = correlate(obs, corpus, cfg, jobs=jobs)
        rows.append((m, len(candidate_titles(candidates)), len(candidates)))
    return rows


# ---------------------------------------------------------------------------
# Open world
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OpenWorldRow:
    """False-positive statistics for one recording duration."""

    duration_ms: int
    trials: int
    fp_count: int
    fp_rate: float
    mean_matched_clips: float | None
    mean_matched_titles: float | None


def split_folds(corpus: Corpus, n_folds: int, seed: int = 0) -> list[tuple[Corpus, Corpus]]:
    """Shuffle tracks into n folds; yield (target, library) per fold."""
    if n_folds < 2 or n_folds > corpus.K:
        raise EvalError(f"need 2..{corpus.K} folds, got {n_folds}")
    rng = np.random.default_rng(seed)
    order = list(corpus.tracks)
    rng.shuffle(order)  # type: ignore[arg-type]
    folds: list[list] = [order[i::n_folds] for i in range(n_folds)]
    out = []
    for i, fold in enumerate(folds):
        rest = [t for k, f in enumerate(folds) if k != i for t in f]
        out.append((Corpus(tuple(fold)), Corpus(tuple(rest))))
    return out


def open_world_eval(
    target: Corpus,
    library: Corpus,
    durations_ms: Sequence[int],
    *,
    clips_per_video: int = 1,
    cfg: ToleranceConfig = ToleranceConfig(),
    seed: int = 0,
    jobs: int = 1,
) -> list[OpenWorldRow]:
    """False-positive rates for target clips matched against a disjoint library.

    A trial is a false positive when the candidate set is non-empty; matched
    clip/title means are reported over false positives only and omitted when
    there are none.
    """
    shared = {t.video_id for t in target.tracks} & {t.video_id for t in library.tracks}
    if shared:
        raise EvalError(f"target and library overlap: {sorted(shared)[:5]}")
    if library.K == 0:
        raise EvalError("open-world library is empty")
    rng = np.random.default_rng(seed)
    rows = []
    for duration_ms in durations_ms:
        trials = 0
        fp_clip_counts: list[int] = []
        fp_title_counts: list[int] = []
        for track in target.tracks:
            if track.duration_ms < duration_ms:
                continue
            for _ in range(clips_per_video):
                try:
                    scenario = sample_scenario(track, duration_ms, rng)
                except SimulationError:
                    continue
                rendered = render_observation(track, scenario)
                candidates = correlate(rendered.observation, library, cfg, jobs=jobs)
                trials += 1
                if candidates:
                    fp_clip_counts.append(len(candidates))
                    fp_title_counts.append(len(candidate_titles(candidates)))
        if trials == 0:
            raise EvalError(f"no usable target clips at {duration_ms} ms")
        fp = len(fp_clip_counts)
        rows.append(
            OpenWorldRow(
                duration_ms=duration_ms,
                trials=trials,
                fp_count=fp,
                fp_rate=fp / trials,
                mean_matched_clips=float(np.mean(fp_clip_counts)) if fp else None,
                mean_matched_titles=float(np.mean(fp_title_counts)) if fp else None,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Uniqueness experiments
# ---------------------------------------------------------------------------


def sample_clips(
    corpus: Corpus, duration_ms: int, count: int, seed: int = 0
) -> list[tuple[int, ...]]:
    """Random non-empty window class sequences, one per sampled clip."""
    rng = np.random.default_rng(seed)
    usable = [t for t in corpus.tracks if t.duration_ms >= duration_ms]
    if not usable:
        raise EvalError(f"no track is at least {duration_ms} ms long")
    clips = []
    while len(clips) < count:
        track = usable[int(rng.integers(len(usable)))]
        try:
            scenario = sample_scenario(track, duration_ms, rng)
        except SimulationError:
            continue
        j, m = visible_window(track, scenario.start_ms, scenario.start_ms + duration_ms)
        clips.append(tuple(int(c) for c in track.class_array[j : j + m]))
    return clips


def uniqueness_rows(
    corpus: Corpus,
    durations_ms: Sequence[int],
    clips_per_duration: int,
    seed: int = 0,
) -> list[tuple[int, str, float]]:
    """(duration_ms, feature, uniqueness score) over sampled clip sets."""
    rows = []
    for duration_ms in durations_ms:
        clips = sample_clips(corpus, duration_ms, clips_per_duration, seed)
        for feature in FEATURES:
            rows.append((duration_ms, feature, uniqueness_score(clips, feature)))
    return rows
