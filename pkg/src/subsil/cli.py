"""Command-line front end: ingest, simulate, match, eval.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error. Every
output file embeds the configuration and seed that produced it.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import traceback
from pathlib import Path
from typing import Any, Sequence

from . import corpus as corpus_mod
from . import evaluation, records
from .features import FeatureError
from .matcher import (
    MatchError,
    SEEK_FAST_FORWARD,
    SEEK_REWIND,
    ToleranceConfig,
    candidate_titles,
    correlate,
    demodulate_with_seek,
    joint_demodulate,
)
from .silhouette import SeparationConfig, SilhouetteError, save_frames, segment_sequence
from .simulate import SimulationError, clip_spans, render_observation, synth_frames

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_DATA_ERRORS = (
    corpus_mod.CorpusError,
    MatchError,
    SimulationError,
    SilhouetteError,
    FeatureError,
    evaluation.EvalError,
    records.RecordError,
    FileNotFoundError,
    json.JSONDecodeError,
)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="subsil", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", help="parse an SRT directory into an index file")
    ingest.add_argument("--dir", required=True, help="directory of .srt files")
    ingest.add_argument("--manifest", required=True, help="tab-separated manifest file")
    ingest.add_argument("--out", required=True, help="index file to write")

    simulate = sub.add_parser("simulate", help="render observations from a scenario")
    simulate.add_argument("--index", required=True)
    simulate.add_argument("--scenario", required=True, help="scenario record (JSON)")
    simulate.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    simulate.add_argument("--out", required=True, help="observation record to write")
    simulate.add_argument("--truth", default=None, help="ground-truth record (default: OUT.truth.json)")
    simulate.add_argument(
        "--frames-out",
        default=None,
        help="optionally render the first clip to a synthetic frame dump (.npz)",
    )
    simulate.add_argument("--iou-threshold", type=float, default=SeparationConfig().iou_threshold)
    simulate.add_argument("--t0", type=float, default=SeparationConfig().t0)

    match = sub.add_parser("match", help="correlate an observation against an index")
    match.add_argument("--index", required=True)
    match.add_argument("--obs", required=True, help="observation record (JSON)")
    match.add_argument("--out", default=None, help="match report to write")
    match.add_argument("-D", "--max-deletions", type=int, default=0)
    match.add_argument("-I", "--max-insertions", type=int, default=0)
    match.add_argument("--d0-coeff", type=float, default=0.1)
    match.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    evaluate = sub.add_parser("eval", help="run an evaluation suite")
    evaluate.add_argument("--index", required=True)
    evaluate.add_argument("--suite", required=True, help="suite spec (JSON)")
    evaluate.add_argument("--out", required=True, help="evaluation report to write")
    evaluate.add_argument("--seed", type=int, default=None, help="override the suite seed")
    evaluate.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_ingest(args: argparse.Namespace) -> int:
    corpus, report = corpus_mod.load_corpus(args.dir, args.manifest)
    corpus_mod.save_index(corpus, args.out)
    print(f"K={corpus.K}")
    for track in corpus.tracks:
        print(
            f"  {track.video_id}\tsubtitles={track.subtitle_count}"
            f"\tduration_ms={track.duration_ms}"
        )
    for filename, reason in report.skipped:
        print(f"skipped: {filename}: {reason}", file=sys.stderr)
    for filename, message in report.warnings:
        print(f"warning: {filename}: {message}", file=sys.stderr)
    print(f"index written to {args.out}")
    return EXIT_OK


def _cmd_simulate(args: argparse.Namespace) -> int:
    corpus = corpus_mod.load_index(args.index)
    scenario, errors = records.read_scenario(args.scenario)
    if args.seed is not None:
        errors = records.ErrorSpec(
            errors.substitutions, errors.deletions, errors.insertions, errors.shift, args.seed
        )
    track = corpus.get(scenario.video_id)
    result = render_observation(track, scenario, errors)

    bundle = records.bundle_from_render(result)
    records.write_observation(bundle, args.out, seed=errors.seed)
    truth_path = args.truth or f"{args.out}.truth.json"
    records.write_ground_truth(result.ground_truth, truth_path)
    print(
        f"{bundle.kind} observation: {len(bundle.clips)} clip(s), "
        f"m={[len(o.classes) for o in bundle.clips]}"
    )
    print(f"observation written to {args.out}; ground truth to {truth_path}")

    if args.frames_out:
        cfg = SeparationConfig(iou_threshold=args.iou_threshold, t0=args.t0)
        first = result.observations[0]
        span_ms = _video_span(first)
        spans = clip_spans(track, scenario.start_ms, scenario.start_ms + span_ms)
        frames = synth_frames(spans, span_ms, seed=errors.seed)
        save_frames(frames, args.frames_out)
        extracted = segment_sequence(frames, cfg)
        truth_classes = result.ground_truth.true_classes[0]
        if len(extracted) != len(truth_classes):
            print(
                f"warning: frame extraction found {len(extracted)} events, "
                f"window has {len(truth_classes)} subtitles",
                file=sys.stderr,
            )
        print(f"frame dump written to {args.frames_out} ({len(frames)} frames)")
    return EXIT_OK


def _video_span(observation) -> int:
    """Video-time span of an observation (recording minus pauses)."""
    return observation.duration_ms - sum(length for _, length in observation.pauses)


def _cmd_match(args: argparse.Namespace) -> int:
    corpus = corpus_mod.load_index(args.index)
    bundle = records.read_observation(args.obs)
    cfg = ToleranceConfig(
        d0_coeff=args.d0_coeff,
        max_deletions=args.max_deletions,
        max_insertions=args.max_insertions,
    )
    config_payload: dict[str, Any] = {
        "index": str(args.index),
        "observation": str(args.obs),
        "d0_coeff": cfg.d0_coeff,
        "max_deletions": cfg.max_deletions,
        "max_insertions": cfg.max_insertions,
        "jobs": args.jobs,
        "kind": bundle.kind,
    }

    body: dict[str, Any] = {"config": config_payload}
    if bundle.kind == records.KIND_SINGLE:
        candidates = correlate(bundle.clips[0], corpus, cfg, jobs=args.jobs)
        body["candidates"] = [records.candidate_payload(c) for c in candidates]
        body["counts"] = {
            "clips": len(candidates),
            "titles": len(candidate_titles(candidates)),
        }
        print(f"candidates: {len(candidates)} clip(s), {body['counts']['titles']} title(s)")
        for c in candidates[:20]:
            print(f"  {c.video_id}\t{c.title}\tsubtitles {c.first_index}..{c.last_index}")
        if len(candidates) > 20:
            print(f"  ... {len(candidates) - 20} more")
    elif bundle.kind == records.KIND_MULTI:
        chains = joint_demodulate(bundle.clips, bundle.gaps_ms, corpus, cfg, jobs=args.jobs)
        body["chains"] = [[records.candidate_payload(c) for c in chain] for chain in chains]
        titles = sorted({chain[0].video_id for chain in chains})
        body["counts"] = {"chains": len(chains), "titles": len(titles)}
        print(f"chains: {len(chains)} across {len(titles)} title(s)")
    else:
        kind = bundle.seek or SEEK_REWIND
        if kind not in (SEEK_REWIND, SEEK_FAST_FORWARD):
            raise records.RecordError(f"bad seek kind {kind!r}")
        pairs = demodulate_with_seek(
            bundle.clips[0], bundle.clips[1], kind, corpus, cfg, jobs=args.jobs
        )
        body["pairs"] = [
            [records.candidate_payload(a), records.candidate_payload(b)] for a, b in pairs
        ]
        titles = sorted({a.video_id for a, _ in pairs})
        body["counts"] = {"pairs": len(pairs), "titles": len(titles)}
        print(f"seek pairs: {len(pairs)} across {len(titles)} title(s)")

    if args.out:
        records.write_match_report(body, args.out)
        print(f"report written to {args.out}")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    corpus = corpus_mod.load_index(args.index)
    suite = json.loads(Path(args.suite).read_text("utf-8"))
    if suite.get("format") != "subsil-suite":
        raise records.RecordError(f"{args.suite}: expected a subsil-suite record")
    seed = args.seed if args.seed is not None else int(suite.get("seed", 0))
    cfg = ToleranceConfig(
        d0_coeff=float(suite.get("d0_coeff", 0.1)),
        max_deletions=int(suite.get("max_deletions", 0)),
        max_insertions=int(suite.get("max_insertions", 0)),
    )
    body: dict[str, Any] = {
        "config": {"suite": str(args.suite), "seed": seed, "d0_coeff": cfg.d0_coeff,
                   "max_deletions": cfg.max_deletions, "max_insertions": cfg.max_insertions},
        "sections": {},
    }
    violations: list[str] = []

    if "closed_world" in suite:
        spec = suite["closed_world"]
        rows = []
        for duration_s in spec.get("durations_s", [120]):
            try:
                results = evaluation.closed_world_trials(
                    corpus,
                    duration_s * 1000,
                    int(spec.get("trials_per_duration", 50)),
                    cfg,
                    seed,
                    jobs=args.jobs,
                )
                table = evaluation.top_k_table(results, spec.get("ks", [1, 5, 10, 20, 50]))
                rows.append(
                    {
                        "duration_s": duration_s,
                        "trials": [
                            {
                                "video_id": r.video_id,
                                "window": list(r.window),
                                "title_count": r.title_count,
                                "clip_count": r.clip_count,
                                "title_hit": r.title_hit,
                                "clip_hit": r.clip_hit,
                            }
                            for r in results
                        ],
                        "top_k": {str(k): {"title": t, "clip": c} for k, (t, c) in table.items()},
                    }
                )
                print(f"closed world {duration_s}s: " + ", ".join(
                    f"top-{k} title {t:.3f}" for k, (t, _) in sorted(table.items())
                ))
                threshold = spec.get("min_top1_title")
                if threshold is not None and table[1][0] < threshold:
                    violations.append(
                        f"closed world {duration_s}s: top-1 title {table[1][0]:.3f} < {threshold}"
                    )
            except Exception as exc:  # per-row isolation, run continues
                rows.append({"duration_s": duration_s, "error": str(exc)})
                log.warning("closed-world row failed: %s", exc)
        body["sections"]["closed_world"] = rows

    if "open_world" in suite:
        spec = suite["open_world"]
        folds = evaluation.split_folds(corpus, int(spec.get("folds", 10)), seed)
        durations_ms = [int(s) * 1000 for s in spec.get("durations_s", [60, 90, 120, 150, 180])]
        totals = {d: [0, 0] for d in durations_ms}
        for fold_index, (target, library) in enumerate(folds):
            rows = evaluation.open_world_eval(
                target,
                library,
                durations_ms,
                clips_per_video=int(spec.get("clips_per_video", 1)),
                cfg=cfg,
                seed=seed + fold_index,
                jobs=args.jobs,
            )
            for row in rows:
                totals[row.duration_ms][0] += row.trials
                totals[row.duration_ms][1] += row.fp_count
        section = [
            {
                "duration_s": d // 1000,
                "trials": trials,
                "fp_count": fp,
                "fp_rate": fp / trials if trials else None,
            }
            for d, (trials, fp) in sorted(totals.items())
        ]
        body["sections"]["open_world"] = section
        for row in section:
            print(
                f"open world {row['duration_s']}s: FP {row['fp_count']}/{row['trials']}"
                f" ({100 * row['fp_rate']:.1f}%)"
            )

    if "uniqueness" in suite:
        spec = suite["uniqueness"]
        rows = evaluation.uniqueness_rows(
            corpus,
            [int(s) * 1000 for s in spec.get("durations_s", [60, 90, 120, 150, 180])],
            int(spec.get("clips", 1000)),
            seed,
        )
        body["sections"]["uniqueness"] = [
            {"duration_s": d // 1000, "feature": f, "score": s} for d, f, s in rows
        ]
        for duration_ms, feature, score in rows:
            print(f"uniqueness {duration_ms // 1000}s {feature}: {score:.4f}")

    if "entropy" in suite:
        spec = suite["entropy"]
        population = evaluation.enumerate_windows(
            corpus,
            int(spec.get("window_s", 120)) * 1000,
            int(spec.get("stride_s", 1)) * 1000,
            dedupe=True,
        )
        sizes = evaluation.vector_class_sizes(population)
        stats = {
            "distinct_sequences": len(population),
            "vector_classes": len(sizes),
            "largest_class": sizes[0] if sizes else 0,
            "max_entropy_bits": math.log2(sizes[0]) if sizes else None,
            "min_entropy_bits": 0.0,
            "distribution_entropy_bits": evaluation.entropy(sizes) if sizes else None,
        }
        body["sections"]["entropy"] = stats
        print(
            f"entropy: {stats['vector_classes']} classes over "
            f"{stats['distinct_sequences']} sequences, largest {stats['largest_class']}"
        )

    body["violations"] = violations
    records.write_eval_report(body, args.out)
    print(f"report written to {args.out}")
    if violations:
        for message in violations:
            print(f"threshold violation: {message}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "ingest": _cmd_ingest,
    "simulate": _cmd_simulate,
    "match": _cmd_match,
    "eval": _cmd_eval,
}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
