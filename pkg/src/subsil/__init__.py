"""Identify video titles and clips from contentless subtitle-silhouette sequences."""

from .corpus import (
    Corpus,
    CorpusError,
    Subtitle,
    SubtitleTrack,
    line_count,
    load_corpus,
    load_index,
    parse_srt,
    save_index,
)
from .features import height_similarity, sequence_length, spatiotemporal_vector, uniqueness_score
from .matcher import (
    CandidateClip,
    Observation,
    ToleranceConfig,
    adjust_for_pause,
    correlate,
    demodulate_with_seek,
    feasible_window,
    joint_demodulate,
    match_vectors,
    tolerate_errors,
)
from .silhouette import (
    FrameRegion,
    SeparationConfig,
    SilhouetteMask,
    SilhouetteSequence,
    cluster_heights,
    mask_iou,
    same_subtitle,
    segment_sequence,
    similarity_ratio,
)
from .simulate import (
    ErrorSpec,
    ScenarioSpec,
    SynthGeometry,
    render_observation,
    sample_scenario,
    synth_corpus,
    synth_frames,
)
from .evaluation import (
    enumerate_windows,
    entropy,
    open_world_eval,
    top_k_accuracy,
)

__version__ = "0.1.0"
