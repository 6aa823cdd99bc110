"""Shared fixtures and small track-building helpers."""

from __future__ import annotations

import pytest

from subsil.corpus import Corpus, Subtitle, SubtitleTrack


def make_track(
    spans,
    video_id: str = "vid",
    title: str = "Title",
    duration_ms: int | None = None,
):
    """Build a track from (start_ms, end_ms, line_class) spans."""
    subtitles = tuple(
        Subtitle(i + 1, start, end, ("x",) * lines)
        for i, (start, end, lines) in enumerate(spans)
    )
    if duration_ms is None:
        duration_ms = subtitles[-1].end_ms + 5000 if subtitles else 5000
    return SubtitleTrack(video_id, title, duration_ms, subtitles)


def make_corpus(*tracks) -> Corpus:
    return Corpus(tuple(tracks))


@pytest.fixture
def simple_track():
    return make_track([(1000, 2000, 1), (3000, 4000, 2), (10000, 11000, 1)])
