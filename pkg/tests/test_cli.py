"""End-to-end CLI tests: ingest, simulate, match, eval, exit codes."""

from __future__ import annotations

import json

import numpy as np
import pytest

from subsil import records
from subsil.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from subsil.corpus import ManifestEntry, load_index, save_index, track_to_srt, write_manifest
from subsil.matcher import Observation
from subsil.simulate import (
    ErrorSpec,
    ScenarioSpec,
    SynthCorpusSpec,
    sample_scenario,
    synth_corpus,
)

SPEC = SynthCorpusSpec(duration_range_ms=(240_000, 420_000))


@pytest.fixture(scope="module")
def corpus():
    return synth_corpus(6, seed=101, spec=SPEC)


@pytest.fixture
def index_path(tmp_path, corpus):
    path = tmp_path / "index.json"
    save_index(corpus, path)
    return path


def run(*argv):
    return main([str(a) for a in argv])


# ---------------------------------------------------------------------------
# ingest
# ---------------------------------------------------------------------------


def test_ingest_round_trip(tmp_path, corpus, capsys):
    srt_dir = tmp_path / "srt"
    srt_dir.mkdir()
    entries = []
    for track in corpus.tracks:
        (srt_dir / f"{track.video_id}.srt").write_text(track_to_srt(track), "utf-8")
        entries.append(
            ManifestEntry(track.video_id, track.title, f"{track.video_id}.srt", track.duration_ms)
        )
    write_manifest(entries, tmp_path / "manifest.tsv")
    out = tmp_path / "index.json"
    assert run("ingest", "--dir", srt_dir, "--manifest", tmp_path / "manifest.tsv", "--out", out) == EXIT_OK
    printed = capsys.readouterr().out
    assert f"K={corpus.K}" in printed
    assert load_index(out) == corpus


def test_ingest_corrupt_file_named(tmp_path, capsys):
    srt_dir = tmp_path / "srt"
    srt_dir.mkdir()
    (srt_dir / "bad.srt").write_text("1\nnot-a-timecode\nhello\n", "utf-8")
    write_manifest([ManifestEntry("bad", "Bad", "bad.srt", 60_000)], tmp_path / "manifest.tsv")
    code = run("ingest", "--dir", srt_dir, "--manifest", tmp_path / "manifest.tsv", "--out", tmp_path / "x.json")
    assert code == EXIT_DATA
    assert "bad.srt" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# simulate + match
# ---------------------------------------------------------------------------


def _write_scenario(tmp_path, corpus, seed=3, **kwargs):
    track = corpus.tracks[0]
    rng = np.random.default_rng(seed)
    base = sample_scenario(track, kwargs.pop("duration_ms", 90_000), rng)
    scenario = ScenarioSpec(
        base.video_id, base.start_ms, base.duration_ms, **kwargs
    )
    path = tmp_path / "scenario.json"
    records.write_scenario(scenario, ErrorSpec(seed=seed), path)
    return scenario, path


def test_simulate_then_match_finds_truth(tmp_path, corpus, index_path, capsys):
    _, scenario_path = _write_scenario(tmp_path, corpus)
    obs_path = tmp_path / "obs.json"
    report_path = tmp_path / "report.json"
    assert run("simulate", "--index", index_path, "--scenario", scenario_path, "--out", obs_path) == EXIT_OK
    truth = records.read_ground_truth(f"{obs_path}.truth.json")
    assert truth.video_id == corpus.tracks[0].video_id

    assert run("match", "--index", index_path, "--obs", obs_path, "--out", report_path) == EXIT_OK
    report = json.loads(report_path.read_text("utf-8"))
    assert report["format"] == "subsil-match-report"
    found = [
        (c["video_id"], c["first_index"] - 1, c["last_index"] - c["first_index"] + 1)
        for c in report["candidates"]
    ]
    assert (truth.video_id, *truth.windows[0]) in found
    assert report["counts"]["clips"] >= 1


def test_simulate_deterministic_under_seed(tmp_path, corpus, index_path):
    _, scenario_path = _write_scenario(tmp_path, corpus)
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("simulate", "--index", index_path, "--scenario", scenario_path, "--out", a, "--truth", tmp_path / "ta.json") == EXIT_OK
    assert run("simulate", "--index", index_path, "--scenario", scenario_path, "--out", b, "--truth", tmp_path / "tb.json") == EXIT_OK
    assert a.read_text() == b.read_text()


def test_simulate_multi_clip_bundle(tmp_path, corpus, index_path):
    track = corpus.tracks[0]
    scenario = ScenarioSpec(track.video_id, 10_000, 45_000, clip_gaps=((20_000, 45_000),))
    scenario_path = tmp_path / "scenario.json"
    records.write_scenario(scenario, ErrorSpec(), scenario_path)
    obs_path = tmp_path / "obs.json"
    assert run("simulate", "--index", index_path, "--scenario", scenario_path, "--out", obs_path) == EXIT_OK
    bundle = records.read_observation(obs_path)
    assert bundle.kind == "multi"
    assert len(bundle.clips) == 2
    assert len(bundle.gaps_ms) == 1

    report_path = tmp_path / "report.json"
    assert run("match", "--index", index_path, "--obs", obs_path, "--out", report_path) == EXIT_OK
    report = json.loads(report_path.read_text("utf-8"))
    assert "chains" in report
    truth = records.read_ground_truth(f"{obs_path}.truth.json")
    found = any(
        chain[0]["video_id"] == truth.video_id
        and chain[0]["first_index"] - 1 == truth.windows[0][0]
        and chain[1]["first_index"] - 1 == truth.windows[1][0]
        for chain in report["chains"]
    )
    assert found


def test_simulate_seek_bundle(tmp_path, corpus, index_path):
    track = corpus.tracks[0]
    scenario = ScenarioSpec(track.video_id, 30_000, 60_000, seeks=((60_000, 5_000),))
    scenario_path = tmp_path / "scenario.json"
    records.write_scenario(scenario, ErrorSpec(), scenario_path)
    obs_path = tmp_path / "obs.json"
    assert run("simulate", "--index", index_path, "--scenario", scenario_path, "--out", obs_path) == EXIT_OK
    bundle = records.read_observation(obs_path)
    assert bundle.kind == "seek"
    assert bundle.seek == "rewind"
    report_path = tmp_path / "report.json"
    assert run("match", "--index", index_path, "--obs", obs_path, "--out", report_path) == EXIT_OK
    report = json.loads(report_path.read_text("utf-8"))
    assert "pairs" in report


def test_simulate_frame_dump(tmp_path, corpus, index_path):
    _, scenario_path = _write_scenario(tmp_path, corpus, duration_ms=30_000)
    obs_path = tmp_path / "obs.json"
    frames_path = tmp_path / "frames.npz"
    assert (
        run(
            "simulate", "--index", index_path, "--scenario", scenario_path,
            "--out", obs_path, "--frames-out", frames_path,
        )
        == EXIT_OK
    )
    from subsil.silhouette import load_frames

    assert len(load_frames(frames_path)) >= 1


def test_match_with_errors_keeps_ground_truth(tmp_path, corpus, index_path):
    # The CLI chain simulate -> match must retain the true clip when injected
    # errors stay within the configured tolerance.
    track = corpus.tracks[2]
    rng = np.random.default_rng(8)
    base = sample_scenario(track, 90_000, rng)
    scenario_path = tmp_path / "scenario.json"
    records.write_scenario(base, ErrorSpec(substitutions=1, deletions=1, seed=4), scenario_path)
    obs_path = tmp_path / "obs.json"
    report_path = tmp_path / "report.json"
    assert run("simulate", "--index", index_path, "--scenario", scenario_path, "--out", obs_path) == EXIT_OK
    truth = records.read_ground_truth(f"{obs_path}.truth.json")
    assert truth.injected[0][:2] == (1, 1)
    assert (
        run("match", "--index", index_path, "--obs", obs_path, "--out", report_path, "-D", 1)
        == EXIT_OK
    )
    report = json.loads(report_path.read_text("utf-8"))
    found = [
        (c["video_id"], c["first_index"] - 1, c["last_index"] - c["first_index"] + 1)
        for c in report["candidates"]
    ]
    assert (truth.video_id, *truth.windows[0]) in found


def test_match_empty_result_still_ok(tmp_path, index_path):
    obs_path = tmp_path / "obs.json"
    bundle = records.ObservationBundle(
        "single", (Observation((3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3), 30_000),)
    )
    records.write_observation(bundle, obs_path)
    assert run("match", "--index", index_path, "--obs", obs_path, "--d0-coeff", 0) == EXIT_OK


def test_match_rejects_malformed_observation(tmp_path, index_path, capsys):
    obs_path = tmp_path / "obs.json"
    obs_path.write_text('{"format": "something-else"}', "utf-8")
    assert run("match", "--index", index_path, "--obs", obs_path) == EXIT_DATA


def test_usage_errors():
    assert run("match") == EXIT_USAGE
    assert run("definitely-not-a-command") == EXIT_USAGE
    assert run() == EXIT_USAGE


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def test_eval_suite(tmp_path, corpus, index_path, capsys):
    suite = {
        "format": "subsil-suite",
        "seed": 5,
        "closed_world": {"durations_s": [60], "trials_per_duration": 6, "ks": [1, 5]},
        "uniqueness": {"durations_s": [60], "clips": 60},
        "entropy": {"window_s": 60, "stride_s": 5},
    }
    suite_path = tmp_path / "suite.json"
    suite_path.write_text(json.dumps(suite), "utf-8")
    out = tmp_path / "report.json"
    assert run("eval", "--index", index_path, "--suite", suite_path, "--out", out, "--jobs", 1) == EXIT_OK
    report = json.loads(out.read_text("utf-8"))
    assert report["format"] == "subsil-eval-report"
    assert report["config"]["seed"] == 5
    assert "closed_world" in report["sections"]
    assert "uniqueness" in report["sections"]
    assert report["sections"]["entropy"]["vector_classes"] >= 1
    assert report["violations"] == []


def test_eval_report_deterministic(tmp_path, corpus, index_path):
    suite = {
        "format": "subsil-suite",
        "seed": 9,
        "uniqueness": {"durations_s": [60], "clips": 40},
    }
    suite_path = tmp_path / "suite.json"
    suite_path.write_text(json.dumps(suite), "utf-8")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run("eval", "--index", index_path, "--suite", suite_path, "--out", a, "--jobs", 1) == EXIT_OK
    assert run("eval", "--index", index_path, "--suite", suite_path, "--out", b, "--jobs", 2) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_eval_threshold_violation_exit_code(tmp_path, corpus, index_path, capsys):
    suite = {
        "format": "subsil-suite",
        "seed": 5,
        "closed_world": {
            "durations_s": [60],
            "trials_per_duration": 4,
            "ks": [1],
            "min_top1_title": 1.01,
        },
    }
    suite_path = tmp_path / "suite.json"
    suite_path.write_text(json.dumps(suite), "utf-8")
    out = tmp_path / "report.json"
    assert run("eval", "--index", index_path, "--suite", suite_path, "--out", out, "--jobs", 1) == EXIT_DATA
    assert "threshold violation" in capsys.readouterr().err
