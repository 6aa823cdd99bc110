"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s``. The corpus-scale criteria
share one seeded 300-track synthetic corpus; the oracle-equivalence criterion
builds its own 200 small corpora on a 100 ms time grid (see notes in
tests/oracle.py for the boundary analysis behind the grid).
"""

from __future__ import annotations

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from oracle import brute_force_candidates, candidate_set
from subsil.evaluation import (
    entropy,
    open_world_eval,
    prefix_counts,
    split_folds,
    top_k_accuracy,
)
from subsil.features import uniqueness_score, height_similarity
from subsil.matcher import ToleranceConfig, correlate
from subsil.silhouette import (
    FrameRegion,
    SeparationConfig,
    SilhouetteMask,
    same_subtitle,
    segment_sequence,
    similarity_ratio,
)
from subsil.simulate import (
    ErrorSpec,
    SimulationError,
    SynthCorpusSpec,
    SynthGeometry,
    clip_spans,
    render_observation,
    sample_scenario,
    synth_corpus,
    synth_frames,
)

CORPUS_SEED = 20250808


def report(criterion: str, detail: str) -> None:
    print(f"\n[acceptance] {criterion}: PASS ({detail})")


@pytest.fixture(scope="module")
def corpus300():
    return synth_corpus(300, seed=CORPUS_SEED)


# ---------------------------------------------------------------------------
# C1: top-k formula exactness
# ---------------------------------------------------------------------------


def test_c01_top_k_formula_exact():
    started = time.perf_counter()
    for n in range(1, 101):
        for k in (1, 5, 10, 20, 50):
            value = top_k_accuracy(n, k)
            expected = 1.0 if k > n else k / n
            assert value == expected
            assert Fraction(value) == (Fraction(1) if k > n else Fraction(k, n)) or k <= n
            if k > n:
                assert value == 1.0
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    report("C1 top-k formula", f"500 grid points exact in {elapsed:.3f}s")


# ---------------------------------------------------------------------------
# C2: separation case 4 fixture
# ---------------------------------------------------------------------------


def _case4_frames(difference_total: int):
    """Two frames whose masks overlap near IoU 0.95 on 11,430 shared pixels."""
    shape = (100, 127)
    bits_a = np.zeros(shape, dtype=bool)
    bits_a[:90, :] = True  # 90 * 127 = 11,430
    bits_b = np.zeros(shape, dtype=bool)
    bits_b[:95, :] = True
    region_a = np.zeros(shape, dtype=np.uint8)
    region_b = np.zeros(shape, dtype=np.uint8)
    # Spread the difference budget over the intersection with values <= 2.
    twos, ones = divmod(difference_total, 2)
    flat = region_b[:90, :].reshape(-1)
    assert twos <= flat.size
    flat[:twos] = 2
    if ones:
        flat[twos] = 1
    region_b[:90, :] = flat.reshape(90, 127)
    return (FrameRegion(region_a), SilhouetteMask(bits_a)), (
        FrameRegion(region_b),
        SilhouetteMask(bits_b),
    )


def test_c02_separation_case4():
    cfg = SeparationConfig()
    assert cfg.t0 * 11_430 == 17_145  # the allowance behind the fixture

    frame_a, frame_b = _case4_frames(20_298)
    shared = SilhouetteMask(np.bitwise_and(frame_a[1].bits, frame_b[1].bits))
    assert shared.pixel_count == 11_430
    ratio = similarity_ratio(frame_a[0], frame_b[0], shared, cfg)
    assert ratio == 20_298 / 17_145
    assert same_subtitle(frame_a, frame_b, cfg) is False

    frame_a2, frame_b2 = _case4_frames(17_145)  # exactly the allowance: same
    assert same_subtitle(frame_a2, frame_b2, cfg) is True
    report("C2 separation case 4", "P=20,298 vs T=17,145 resolves to different; P<=T to same")


# ---------------------------------------------------------------------------
# C3: feature fixtures
# ---------------------------------------------------------------------------


def _distinct_rank_patterns(length: int, count: int) -> list[tuple[int, ...]]:
    """Deterministic class sequences with pairwise distinct rank vectors."""
    out = []
    value = 1  # skip all-ones (0) so every sequence holds both classes
    while len(out) < count:
        bits = [(value >> k) & 1 for k in range(length)]
        if any(bits) and not all(bits):
            out.append(tuple(1 + b for b in bits))
        value += 1
    return out


def test_c03_feature_fixtures():
    assert height_similarity([2, 2, 1, 2, 1]) == (2, 3)

    lengths = [[1] * (i % 94 + 1) for i in range(10_000)]
    temporal = uniqueness_score(lengths, "temporal")
    assert temporal == 94 / 10_000 == 0.0094

    patterns = _distinct_rank_patterns(14, 9_271)
    population = patterns + [patterns[0]] * (10_000 - len(patterns))
    spatiotemporal = uniqueness_score(population, "spatiotemporal")
    assert spatiotemporal == 9_271 / 10_000 == 0.9271
    report("C3 feature fixtures", "[2,2,1,2,1] -> (2,3); scores 0.0094 and 0.9271 exact")


# ---------------------------------------------------------------------------
# C4: refinement chain
# ---------------------------------------------------------------------------


def test_c04_refinement_chain():
    started = time.perf_counter()
    rng = np.random.default_rng(404)
    violations = 0
    for _ in range(1000):
        clip_count = int(rng.integers(1, 50))
        clips = [
            [int(c) for c in rng.integers(1, 4, size=int(rng.integers(1, 25)))]
            for _ in range(clip_count)
        ]
        st_score = uniqueness_score(clips, "spatiotemporal")
        sp_score = uniqueness_score(clips, "spatial")
        tp_score = uniqueness_score(clips, "temporal")
        if not st_score >= sp_score >= tp_score:
            violations += 1
    elapsed = time.perf_counter() - started
    assert violations == 0
    assert elapsed < 10.0
    report("C4 refinement chain", f"1000 clip sets, 0 violations in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# C5: matcher oracle equivalence
# ---------------------------------------------------------------------------

# 100 ms grid with recording durations at 50 mod 100: on-grid subtitle times
# make the feasibility formula and the millisecond start-time scan provably
# identical, removing the 1-2 ms boundary band where the paper's closed
# inequalities and any single pointwise visibility rule disagree.
ORACLE_SPEC = SynthCorpusSpec(
    duration_range_ms=(240_000, 520_000),
    quantum_ms=100,
)


def test_c05_matcher_oracle_equivalence():
    started = time.perf_counter()
    rng = np.random.default_rng(505)
    mismatches = 0
    checked = 0
    for corpus_index in range(200):
        n_tracks = 3 + corpus_index % 8
        corpus = synth_corpus(n_tracks, seed=50_000 + corpus_index, spec=ORACLE_SPEC)
        assert corpus.K <= 10
        assert all(t.subtitle_count <= 200 for t in corpus.tracks)
        for _ in range(2):
            track = corpus.tracks[int(rng.integers(corpus.K))]
            duration = int(rng.integers(300, 1795)) * 100 + 50
            assert 30_000 <= duration <= 180_000
            try:
                scenario = sample_scenario(track, duration, rng)
            except SimulationError:
                continue
            obs = render_observation(track, scenario).observation
            mine = candidate_set(correlate(obs, corpus))
            oracle = brute_force_candidates(obs, corpus)
            if mine != oracle:
                mismatches += 1
            checked += 1
    elapsed = time.perf_counter() - started
    assert mismatches == 0
    assert checked >= 350
    assert elapsed < 300.0
    report(
        "C5 oracle equivalence",
        f"{checked} observations over 200 corpora, 0 mismatches in {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# C6: error-tolerance recall
# ---------------------------------------------------------------------------


def test_c06_error_tolerance_recall():
    started = time.perf_counter()
    corpus = synth_corpus(20, seed=606)
    rng = np.random.default_rng(607)
    base_cfg = ToleranceConfig()
    # (substitution request, deletions, insertions, duration_ms, trials);
    # (2,2) hypothesis spaces explode combinatorially, so they run on short
    # windows, which is also where deletions and insertions bite hardest.
    plan = [
        (0, 0, 0, 120_000, 150),
        (3, 0, 0, 120_000, 200),
        (1, 1, 0, 90_000, 150),
        (1, 0, 1, 90_000, 150),
        (0, 2, 0, 60_000, 100),
        (0, 0, 2, 60_000, 100),
        (1, 1, 1, 60_000, 100),
        (1, 2, 2, 35_000, 50),
    ]
    assert sum(count for *_, count in plan) == 1000
    misses = 0
    trials = 0
    for subs_requested, dels, ins, duration, count in plan:
        done = 0
        while done < count:
            track = corpus.tracks[int(rng.integers(corpus.K))]
            try:
                scenario = sample_scenario(track, duration, rng)
            except SimulationError:
                continue
            n = render_observation(track, scenario).ground_truth.windows[0][1]
            if dels >= n or (dels == 2 and ins == 2 and n > 12):
                continue
            errors = ErrorSpec(
                substitutions=min(subs_requested, base_cfg.budget(n)),
                deletions=dels,
                insertions=ins,
                seed=int(rng.integers(1 << 31)),
            )
            rendered = render_observation(track, scenario, errors)
            s_applied, d_applied, i_applied = rendered.ground_truth.injected[0]
            cfg = ToleranceConfig(max_deletions=d_applied, max_insertions=i_applied)
            found = (track.video_id, *rendered.ground_truth.windows[0]) in candidate_set(
                correlate(rendered.observation, corpus, cfg)
            )
            misses += not found
            done += 1
            trials += 1
    elapsed = time.perf_counter() - started
    assert trials == 1000
    assert misses == 0
    report("C6 error-tolerance recall", f"1000 observations, 0 misses in {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# C7: candidate-count convergence
# ---------------------------------------------------------------------------


def test_c07_convergence_trend(corpus300):
    started = time.perf_counter()
    assert corpus300.K >= 100
    rng = np.random.default_rng(707)
    curves = []
    finals = []
    for _ in range(60):
        track = corpus300.tracks[int(rng.integers(corpus300.K))]
        scenario = sample_scenario(track, 120_000, rng)
        rows = prefix_counts(
            track, corpus300, scenario.start_ms, scenario.duration_ms, max_points=12
        )
        titles = [t for _, t, _ in rows]
        finals.append(titles[-1])
        # Resample each trial's curve onto 12 shared positions so the mean
        # trend is comparable across recordings of different silhouette counts.
        positions = np.linspace(0, len(titles) - 1, 12)
        curves.append(np.interp(positions, np.arange(len(titles)), titles))

    unique_fraction = sum(1 for f in finals if f == 1) / len(finals)
    assert unique_fraction >= 0.80

    means = np.mean(curves, axis=0)
    for earlier, later in zip(means, means[1:]):
        assert later <= earlier + max(0.5, 0.02 * earlier), means.round(2).tolist()
    assert means[0] > 50 * means[-1]  # large-scale collapse of the candidate set
    elapsed = time.perf_counter() - started
    report(
        "C7 convergence trend",
        f"mean title curve {means[0]:.0f} -> {means[-1]:.2f} non-increasing; "
        f"{100 * unique_fraction:.0f}% of 2-minute observations unique in {elapsed:.0f}s",
    )


# ---------------------------------------------------------------------------
# C8: open-world false-positive trend
# ---------------------------------------------------------------------------


def test_c08_open_world_trend(corpus300):
    started = time.perf_counter()
    durations = [60_000, 90_000, 120_000, 150_000, 180_000]
    totals = {d: [0, 0] for d in durations}
    for fold_index, (target, library) in enumerate(split_folds(corpus300, 10, seed=77)):
        rows = open_world_eval(
            target, library, durations, clips_per_video=3, seed=1000 + fold_index
        )
        for row in rows:
            totals[row.duration_ms][0] += row.trials
            totals[row.duration_ms][1] += row.fp_count
    rates = []
    for duration in durations:
        trials, fp = totals[duration]
        rates.append(fp / trials)
    for earlier, later in zip(rates, rates[1:]):
        assert later < earlier, rates
    elapsed = time.perf_counter() - started
    pretty = " > ".join(f"{100 * r:.1f}%" for r in rates)
    report("C8 open-world trend", f"FP rates strictly decrease ({pretty}) in {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# C9: entropy bounds
# ---------------------------------------------------------------------------


def test_c09_entropy_bounds():
    started = time.perf_counter()
    assert entropy([14_370]) == 0.0
    uniform = entropy([1] * 14_370)
    assert abs(uniform - math.log2(14_370)) < 1e-9
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    report("C9 entropy bounds", f"0 bits and log2(14370)={uniform:.6f} bits in {elapsed:.3f}s")


# ---------------------------------------------------------------------------
# C10: simulator/extractor round trip
# ---------------------------------------------------------------------------


def test_c10_frame_round_trip():
    started = time.perf_counter()
    corpus = synth_corpus(6, seed=1010)
    geometry = SynthGeometry(width=80, height=30, line_height_px=5, fps=5, margin_px=2)
    frame_period_ms = 1000 // geometry.fps
    rng = np.random.default_rng(1011)
    exact = 0
    for trial in range(500):
        track = corpus.tracks[int(rng.integers(corpus.K))]
        duration = int(rng.integers(8_000, 20_000))
        try:
            scenario = sample_scenario(
                track, duration, rng, edge_margin_ms=2 * frame_period_ms + 100
            )
        except SimulationError:
            continue
        rendered = render_observation(track, scenario)
        spans = clip_spans(track, scenario.start_ms, scenario.start_ms + duration)
        frames = synth_frames(spans, duration, geometry, seed=trial)
        sequence = segment_sequence(frames)
        labels = sequence.class_labels(unit_height_px=geometry.line_height_px)
        exact += tuple(labels) == rendered.observation.classes
    elapsed = time.perf_counter() - started
    assert exact == 500
    assert elapsed < 60.0
    report("C10 frame round trip", f"500/500 exact reconstructions in {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# C11: matching performance
# ---------------------------------------------------------------------------


def test_c11_matching_performance(corpus300):
    rng = np.random.default_rng(1)
    observation = None
    truth = None
    for _ in range(400):
        track = corpus300.tracks[int(rng.integers(corpus300.K))]
        try:
            scenario = sample_scenario(track, 120_000, rng)
        except SimulationError:
            continue
        rendered = render_observation(track, scenario)
        if len(rendered.observation.classes) == 30:
            observation = rendered.observation
            truth = (track.video_id, *rendered.ground_truth.windows[0])
            break
    assert observation is not None

    started = time.perf_counter()
    exact = correlate(observation, corpus300, jobs=1)
    exact_elapsed = time.perf_counter() - started
    assert exact_elapsed < 5.0
    assert truth in candidate_set(exact)

    started = time.perf_counter()
    tolerant = correlate(
        observation,
        corpus300,
        ToleranceConfig(max_deletions=1, max_insertions=1),
        jobs=1,
    )
    tolerant_elapsed = time.perf_counter() - started
    assert tolerant_elapsed < 60.0
    assert truth in candidate_set(tolerant)
    report(
        "C11 matching performance",
        f"m=30 vs 300 tracks: D=I=0 in {exact_elapsed:.2f}s, D=I=1 in {tolerant_elapsed:.2f}s",
    )
