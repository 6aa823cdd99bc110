"""SubRip (.srt) corpus: parsing, overlap repair, manifests, index persistence.

All times are integer milliseconds. Tracks and corpora are immutable after
construction and safe for concurrent read-only use.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)

INDEX_FORMAT = "subsil-index"
INDEX_VERSION = 1

# Tail appended after the last subtitle when the manifest omits a duration;
# the matcher needs a finite end-of-video sentinel time.
DURATION_TAIL_MS = 5000

MAX_LINE_CLASS = 3

MANIFEST_COLUMNS = ("video_id", "title", "filename", "duration_ms")


class CorpusError(Exception):
    """Invalid corpus input: parse failures, bad manifests, bad metadata."""


class SrtParseError(CorpusError):
    """Malformed .srt content; carries the 1-based source line number."""

    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyTrackError(CorpusError):
    """A subtitle file yielded no usable subtitles."""


class DuplicateVideoError(CorpusError):
    """Two corpus entries share a video id."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Subtitle:
    """One subtitle cue: file index, display interval, text lines."""

    index: int
    start_ms: int
    end_ms: int
    lines: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.index < 1:
            raise CorpusError(f"subtitle index must be positive, got {self.index}")
        if self.start_ms < 0 or self.end_ms <= self.start_ms:
            raise CorpusError(
                f"subtitle {self.index}: need 0 <= start < end, "
                f"got {self.start_ms}..{self.end_ms}"
            )
        if not self.lines or any(not line for line in self.lines):
            raise CorpusError(f"subtitle {self.index}: lines must be non-empty")

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


def line_count(subtitle: Subtitle) -> int:
    """Line-count class in 1..3; cues with more lines clamp to 3."""
    return min(len(subtitle.lines), MAX_LINE_CLASS)


@dataclass(frozen=True)
class SubtitleTrack:
    """One video's time-ordered, non-overlapping subtitle sequence."""

    video_id: str
    title: str
    duration_ms: int
    subtitles: tuple[Subtitle, ...]

    def __post_init__(self) -> None:
        if not self.video_id:
            raise CorpusError("video_id must be non-empty")
        prev = None
        for sub in self.subtitles:
            if prev is not None:
                if sub.start_ms < prev.start_ms:
                    raise CorpusError(
                        f"{self.video_id}: subtitles out of order at index {sub.index}"
                    )
                if prev.end_ms > sub.start_ms:
                    raise CorpusError(
                        f"{self.video_id}: subtitles {prev.index} and {sub.index} overlap"
                    )
            prev = sub
        if self.subtitles and self.duration_ms < self.subtitles[-1].end_ms:
            raise CorpusError(
                f"{self.video_id}: duration {self.duration_ms} ms ends before the "
                f"last subtitle ({self.subtitles[-1].end_ms} ms)"
            )

    @property
    def subtitle_count(self) -> int:
        return len(self.subtitles)

    @cached_property
    def start_ms_array(self) -> np.ndarray:
        return np.fromiter((s.start_ms for s in self.subtitles), np.int64, len(self.subtitles))

    @cached_property
    def end_ms_array(self) -> np.ndarray:
        return np.fromiter((s.end_ms for s in self.subtitles), np.int64, len(self.subtitles))

    @cached_property
    def class_array(self) -> np.ndarray:
        """Per-subtitle line-count classes (1..3) as an int16 vector."""
        return np.fromiter((line_count(s) for s in self.subtitles), np.int16, len(self.subtitles))


@dataclass(frozen=True)
class Corpus:
    """Immutable collection of tracks keyed by video id."""

    tracks: tuple[SubtitleTrack, ...]

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.tracks, key=lambda t: t.video_id))
        object.__setattr__(self, "tracks", ordered)
        seen: set[str] = set()
        for track in ordered:
            if track.video_id in seen:
                raise DuplicateVideoError(f"duplicate video_id {track.video_id!r}")
            seen.add(track.video_id)

    @property
    def K(self) -> int:
        return len(self.tracks)

    def __len__(self) -> int:
        return len(self.tracks)

    def __iter__(self) -> Iterator[SubtitleTrack]:
        return iter(self.tracks)

    @cached_property
    def _by_id(self) -> dict[str, SubtitleTrack]:
        return {t.video_id: t for t in self.tracks}

    def __contains__(self, video_id: str) -> bool:
        return video_id in self._by_id

    def get(self, video_id: str) -> SubtitleTrack:
        try:
            return self._by_id[video_id]
        except KeyError:
            raise CorpusError(f"unknown video_id {video_id!r}") from None


# ---------------------------------------------------------------------------
# Timecodes
# ---------------------------------------------------------------------------

# Canonical grammar is HH:MM:SS,mmm with two-digit hours; a period is accepted
# as the fraction separator and hours may widen past 99.
_TIMECODE_RE = re.compile(r"^(\d{2,4}):([0-5]\d):([0-5]\d)[,.](\d{3})$")
_ARROW_RE = re.compile(r"^(.+?)\s+-->\s+(.+?)$")


def parse_timecode(text: str) -> int:
    """Parse ``HH:MM:SS,mmm`` (or ``.mmm``) into milliseconds."""
    m = _TIMECODE_RE.match(text.strip())
    if not m:
        raise ValueError(f"malformed timecode {text.strip()!r}")
    hh, mm, ss, ms = (int(g) for g in m.groups())
    return ((hh * 60 + mm) * 60 + ss) * 1000 + ms


def format_timecode(ms: int) -> str:
    """Render milliseconds in the canonical zero-padded comma form."""
    if ms < 0:
        raise ValueError("timecode must be non-negative")
    ss, frac = divmod(ms, 1000)
    mm, ss = divmod(ss, 60)
    hh, mm = divmod(mm, 60)
    return f"{hh:02d}:{mm:02d}:{ss:02d},{frac:03d}"


# ---------------------------------------------------------------------------
# SRT parsing
# ---------------------------------------------------------------------------


def _iter_blocks(lines: list[str]) -> Iterator[tuple[int, list[str]]]:
    """Yield (1-based first line number, block lines) for blank-separated blocks."""
    block: list[str] = []
    first = 0
    for number, raw in enumerate(lines, start=1):
        if raw.strip():
            if not block:
                first = number
            block.append(raw)
        elif block:
            yield first, block
            block = []
    if block:
        yield first, block


def parse_srt(
    data: bytes | str,
    video_id: str,
    title: str,
    duration_ms: int | None = None,
    *,
    warnings: list[str] | None = None,
) -> SubtitleTrack:
    """Parse raw SRT content into a repaired, time-ordered track.

    Overlapping cues are repaired by truncating the earlier end time to the
    later start time; cues that become empty are dropped with a warning.
    Hard failures (malformed index or timecode) raise :class:`SrtParseError`
    with the offending line number. ``warnings``, when given, collects
    messages about skipped or repaired cues.
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8-sig")
    else:
        text = data.lstrip("﻿")

    def warn(message: str) -> None:
        if warnings is not None:
            warnings.append(message)
        log.debug("%s: %s", video_id, message)

    entries: list[Subtitle] = []
    for first_line, block in _iter_blocks(text.splitlines()):
        if len(block) < 2:
            raise SrtParseError("incomplete subtitle block", first_line)
        index_text = block[0].strip()
        if not index_text.isdigit() or int(index_text) < 1:
            raise SrtParseError(f"subtitle index expected, got {index_text!r}", first_line)
        arrow = _ARROW_RE.match(block[1].strip())
        if not arrow:
            raise SrtParseError(f"timecode arrow expected, got {block[1].strip()!r}", first_line + 1)
        try:
            start_ms = parse_timecode(arrow.group(1))
            end_ms = parse_timecode(arrow.group(2))
        except ValueError as exc:
            raise SrtParseError(str(exc), first_line + 1) from None
        if end_ms <= start_ms:
            warn(f"block {index_text}: end {end_ms} ms <= start {start_ms} ms, skipped")
            continue
        text_lines = tuple(line.strip() for line in block[2:] if line.strip())
        if not text_lines:
            warn(f"block {index_text}: no text lines, skipped")
            continue
        entries.append(Subtitle(int(index_text), start_ms, end_ms, text_lines))

    if not entries:
        raise EmptyTrackError(f"{video_id}: no usable subtitles")

    entries.sort(key=lambda s: (s.start_ms, s.end_ms, s.index))

    # Repair: each cue may only be truncated by its immediate successor, so a
    # single pass restores end(i) <= start(i+1) everywhere.
    repaired: list[Subtitle] = []
    for position, sub in enumerate(entries):
        end_ms = sub.end_ms
        if position + 1 < len(entries):
            end_ms = min(end_ms, entries[position + 1].start_ms)
        if end_ms <= sub.start_ms:
            warn(f"block {sub.index}: emptied by overlap repair, dropped")
            continue
        if end_ms != sub.end_ms:
            warn(f"block {sub.index}: end truncated {sub.end_ms} -> {end_ms} ms")
            sub = Subtitle(sub.index, sub.start_ms, end_ms, sub.lines)
        repaired.append(sub)

    if not repaired:
        raise EmptyTrackError(f"{video_id}: all subtitles dropped during repair")

    if duration_ms is None:
        duration_ms = repaired[-1].end_ms + DURATION_TAIL_MS
    return SubtitleTrack(video_id, title, duration_ms, tuple(repaired))


def track_to_srt(track: SubtitleTrack) -> str:
    """Render a track back into SRT text with canonical timecodes."""
    blocks = []
    for sub in track.subtitles:
        timing = f"{format_timecode(sub.start_ms)} --> {format_timecode(sub.end_ms)}"
        blocks.append("\n".join([str(sub.index), timing, *sub.lines]))
    return "\n\n".join(blocks) + "\n"


# ---------------------------------------------------------------------------
# Manifest and directory loading
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    title: str
    filename: str
    duration_ms: int | None


@dataclass(frozen=True)
class LoadReport:
    """What a directory load skipped or repaired; empty tuples when clean."""

    skipped: tuple[tuple[str, str], ...]
    warnings: tuple[tuple[str, str], ...]


def read_manifest(path: Path | str) -> tuple[ManifestEntry, ...]:
    """Read the tab-separated manifest: video_id, title, filename, duration_ms.

    Lines starting with ``#`` and a literal header row are ignored. The
    duration column may be empty or ``-`` to request the fallback duration.
    """
    entries = []
    for number, raw in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        line = raw.strip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cells = line.split("\t")
        if tuple(cell.strip() for cell in cells) == MANIFEST_COLUMNS:
            continue
        if len(cells) != len(MANIFEST_COLUMNS):
            raise CorpusError(
                f"{path}: line {number}: expected {len(MANIFEST_COLUMNS)} tab-separated "
                f"columns, got {len(cells)}"
            )
        video_id, title, filename, duration_text = (cell.strip() for cell in cells)
        if not video_id or not filename:
            raise CorpusError(f"{path}: line {number}: video_id and filename are required")
        duration: int | None = None
        if duration_text not in ("", "-"):
            try:
                duration = int(duration_text)
            except ValueError:
                raise CorpusError(
                    f"{path}: line {number}: bad duration_ms {duration_text!r}"
                ) from None
        entries.append(ManifestEntry(video_id, title, filename, duration))
    return tuple(entries)


def write_manifest(entries: Sequence[ManifestEntry], path: Path | str) -> None:
    lines = ["\t".join(MANIFEST_COLUMNS)]
    for e in entries:
        duration = "" if e.duration_ms is None else str(e.duration_ms)
        lines.append("\t".join((e.video_id, e.title, e.filename, duration)))
    Path(path).write_text("\n".join(lines) + "\n", "utf-8")


def load_corpus(
    directory: Path | str,
    manifest: Path | str | Sequence[ManifestEntry],
) -> tuple[Corpus, LoadReport]:
    """Load every manifest-listed SRT file under ``directory``.

    Files listed in the manifest but absent on disk, and ``.srt`` files on
    disk that the manifest does not mention, end up in the skipped-files
    report. A manifest-listed file that fails to parse is a hard error.
    """
    directory = Path(directory)
    if isinstance(manifest, (str, Path)):
        entries = read_manifest(manifest)
    else:
        entries = tuple(manifest)

    skipped: list[tuple[str, str]] = []
    collected: list[tuple[str, str]] = []
    tracks = []
    listed = {e.filename for e in entries}
    for entry in entries:
        path = directory / entry.filename
        if not path.is_file():
            skipped.append((entry.filename, "file missing"))
            continue
        file_warnings: list[str] = []
        try:
            track = parse_srt(
                path.read_bytes(),
                entry.video_id,
                entry.title,
                entry.duration_ms,
                warnings=file_warnings,
            )
        except EmptyTrackError:
            raise
        except SrtParseError as exc:
            raise CorpusError(f"{entry.filename}: {exc}") from exc
        collected.extend((entry.filename, message) for message in file_warnings)
        tracks.append(track)

    for path in sorted(directory.glob("*.srt")):
        if path.name not in listed:
            skipped.append((path.name, "not in manifest"))

    if not tracks:
        collected.append(("", "corpus is empty"))
        log.warning("load_corpus(%s): corpus is empty", directory)

    return Corpus(tuple(tracks)), LoadReport(tuple(skipped), tuple(collected))


# ---------------------------------------------------------------------------
# Index persistence
# ---------------------------------------------------------------------------


def save_index(corpus: Corpus, path: Path | str) -> None:
    """Write the versioned JSON index; ``load_index`` restores it exactly."""
    payload = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "tracks": [
            {
                "video_id": t.video_id,
                "title": t.title,
                "duration_ms": t.duration_ms,
                "subtitles": [
                    [s.index, s.start_ms, s.end_ms, list(s.lines)] for s in t.subtitles
                ],
            }
            for t in corpus.tracks
        ],
    }
    Path(path).write_text(json.dumps(payload, separators=(",", ":")), "utf-8")


def load_index(path: Path | str) -> Corpus:
    try:
        payload = json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: not a valid index file: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != INDEX_FORMAT:
        raise CorpusError(f"{path}: not a {INDEX_FORMAT} file")
    if payload.get("version") != INDEX_VERSION:
        raise CorpusError(f"{path}: unsupported index version {payload.get('version')!r}")
    tracks = []
    for raw in payload["tracks"]:
        subtitles = tuple(
            Subtitle(index, start, end, tuple(lines))
            for index, start, end, lines in raw["subtitles"]
        )
        tracks.append(
            SubtitleTrack(raw["video_id"], raw["title"], raw["duration_ms"], subtitles)
        )
    return Corpus(tuple(tracks))
