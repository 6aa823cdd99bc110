"""External file formats: observations, scenarios, ground truth, reports.

Every record is a small versioned JSON document so runs reproduce exactly and
other tools can consume them. Field layouts are documented in the README.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .matcher import CandidateClip, Observation
from .simulate import ErrorSpec, GroundTruth, RenderResult, ScenarioSpec

OBSERVATION_FORMAT = "subsil-observation"
SCENARIO_FORMAT = "subsil-scenario"
TRUTH_FORMAT = "subsil-ground-truth"
MATCH_REPORT_FORMAT = "subsil-match-report"
EVAL_REPORT_FORMAT = "subsil-eval-report"
RECORD_VERSION = 1

KIND_SINGLE = "single"
KIND_MULTI = "multi"
KIND_SEEK = "seek"


class RecordError(ValueError):
    """A record file is malformed or of the wrong format."""


@dataclass(frozen=True)
class ObservationBundle:
    """A capture: one or more observations plus their inter-clip structure."""

    kind: str
    clips: tuple[Observation, ...]
    gaps_ms: tuple[int, ...] = ()
    seek: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in (KIND_SINGLE, KIND_MULTI, KIND_SEEK):
            raise RecordError(f"unknown observation kind {self.kind!r}")
        if self.kind == KIND_SINGLE and len(self.clips) != 1:
            raise RecordError("single observations hold exactly one clip")
        if self.kind == KIND_MULTI and len(self.clips) != len(self.gaps_ms) + 1:
            raise RecordError("multi-clip bundles need one gap between adjacent clips")
        if self.kind == KIND_SEEK and (len(self.clips) != 2 or self.seek is None):
            raise RecordError("seek bundles hold two clips and a seek kind")


def bundle_from_render(result: RenderResult) -> ObservationBundle:
    if result.seek_kind is not None:
        return ObservationBundle(KIND_SEEK, result.observations, (), result.seek_kind)
    if len(result.observations) > 1:
        return ObservationBundle(KIND_MULTI, result.observations, result.gaps_ms)
    return ObservationBundle(KIND_SINGLE, result.observations)


def _load(path: Path | str, expected_format: str) -> dict[str, Any]:
    try:
        payload = json.loads(Path(path).read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RecordError(f"{path}: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != expected_format:
        raise RecordError(f"{path}: expected a {expected_format} record")
    if payload.get("version") != RECORD_VERSION:
        raise RecordError(f"{path}: unsupported version {payload.get('version')!r}")
    return payload


def _dump(payload: dict[str, Any], path: Path | str) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")


# ---------------------------------------------------------------------------
# Observations
# ---------------------------------------------------------------------------


def write_observation(bundle: ObservationBundle, path: Path | str, *, seed: int | None = None) -> None:
    payload = {
        "format": OBSERVATION_FORMAT,
        "version": RECORD_VERSION,
        "kind": bundle.kind,
        "clips": [
            {
                "classes": list(o.classes),
                "duration_ms": o.duration_ms,
                "pauses": [list(p) for p in o.pauses],
            }
            for o in bundle.clips
        ],
        "gaps_ms": list(bundle.gaps_ms),
        "seek": bundle.seek,
        "seed": seed,
    }
    _dump(payload, path)


def read_observation(path: Path | str) -> ObservationBundle:
    payload = _load(path, OBSERVATION_FORMAT)
    try:
        clips = tuple(
            Observation(
                tuple(c["classes"]),
                c["duration_ms"],
                tuple(tuple(p) for p in c.get("pauses", [])),
            )
            for c in payload["clips"]
        )
        return ObservationBundle(
            payload["kind"], clips, tuple(payload.get("gaps_ms", [])), payload.get("seek")
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Scenarios and ground truth
# ---------------------------------------------------------------------------


def write_scenario(scenario: ScenarioSpec, errors: ErrorSpec, path: Path | str) -> None:
    payload = {
        "format": SCENARIO_FORMAT,
        "version": RECORD_VERSION,
        "video_id": scenario.video_id,
        "start_ms": scenario.start_ms,
        "duration_ms": scenario.duration_ms,
        "pauses": [list(p) for p in scenario.pauses],
        "seeks": [list(s) for s in scenario.seeks],
        "clip_gaps": [list(g) for g in scenario.clip_gaps],
        "errors": {
            "substitutions": errors.substitutions,
            "deletions": errors.deletions,
            "insertions": errors.insertions,
            "shift": errors.shift,
            "seed": errors.seed,
        },
    }
    _dump(payload, path)


def read_scenario(path: Path | str) -> tuple[ScenarioSpec, ErrorSpec]:
    payload = _load(path, SCENARIO_FORMAT)
    try:
        scenario = ScenarioSpec(
            video_id=payload["video_id"],
            start_ms=payload["start_ms"],
            duration_ms=payload["duration_ms"],
            pauses=tuple(tuple(p) for p in payload.get("pauses", [])),
            seeks=tuple(tuple(s) for s in payload.get("seeks", [])),
            clip_gaps=tuple(tuple(g) for g in payload.get("clip_gaps", [])),
        )
        raw = payload.get("errors", {})
        errors = ErrorSpec(
            substitutions=raw.get("substitutions", 0),
            deletions=raw.get("deletions", 0),
            insertions=raw.get("insertions", 0),
            shift=raw.get("shift", 1),
            seed=raw.get("seed", 0),
        )
        return scenario, errors
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordError(f"{path}: {exc}") from None


def write_ground_truth(truth: GroundTruth, path: Path | str) -> None:
    payload = {
        "format": TRUTH_FORMAT,
        "version": RECORD_VERSION,
        "video_id": truth.video_id,
        "windows": [list(w) for w in truth.windows],
        "true_classes": [list(c) for c in truth.true_classes],
        "injected": [list(i) for i in truth.injected],
        "seek": truth.seek_kind,
        "gaps_ms": list(truth.gaps_ms),
    }
    _dump(payload, path)


def read_ground_truth(path: Path | str) -> GroundTruth:
    payload = _load(path, TRUTH_FORMAT)
    try:
        return GroundTruth(
            video_id=payload["video_id"],
            windows=tuple(tuple(w) for w in payload["windows"]),
            true_classes=tuple(tuple(c) for c in payload["true_classes"]),
            injected=tuple(tuple(i) for i in payload["injected"]),
            seek_kind=payload.get("seek"),
            gaps_ms=tuple(payload.get("gaps_ms", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def candidate_payload(candidate: CandidateClip) -> dict[str, Any]:
    return {
        "video_id": candidate.video_id,
        "title": candidate.title,
        "first_index": candidate.first_index,
        "last_index": candidate.last_index,
        "start_bounds": list(candidate.start_bounds),
        "end_bounds": list(candidate.end_bounds),
    }


def write_match_report(body: dict[str, Any], path: Path | str) -> None:
    payload = {"format": MATCH_REPORT_FORMAT, "version": RECORD_VERSION, **body}
    _dump(payload, path)


def write_eval_report(body: dict[str, Any], path: Path | str) -> None:
    payload = {"format": EVAL_REPORT_FORMAT, "version": RECORD_VERSION, **body}
    _dump(payload, path)
