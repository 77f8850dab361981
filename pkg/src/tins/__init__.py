"""Tracked instance search: IVF-PQ face retrieval with temporal query
expansion, score fusion, and pooled mAP evaluation."""

from .dataset import Dataset, FaceDetection, FrameRecord, Shot, ingest, load, save
from .errors import ConfigError, DataError, TinsError
from .evaluation import (
    EvalReport,
    GroundTruth,
    average_precision,
    delta_report,
    evaluate_run,
    mean_ap,
    pooled_ground_truth,
)
from .fusion import ShotRanking, combine_examples, frames_to_shots, merge_cue, vosc1, vosc2
from .index import (
    Index,
    IndexConfig,
    RankedList,
    build,
    exact_search,
    load_index,
    save_index,
    search,
    train_pq,
)
from .kmeans import KMeansResult, kmeans, train_coarse
from .synthgen import SynthConfig, SynthResult, generate
from .tracking import QueryExample, TrackConfig, TrackCue, sample_offsets, track

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "TinsError",
    "Dataset", "FaceDetection", "FrameRecord", "Shot", "ingest", "load", "save",
    "Index", "IndexConfig", "RankedList", "build", "exact_search",
    "load_index", "save_index", "search", "train_pq",
    "KMeansResult", "kmeans", "train_coarse",
    "QueryExample", "TrackConfig", "TrackCue", "sample_offsets", "track",
    "ShotRanking", "combine_examples", "frames_to_shots", "merge_cue",
    "vosc1", "vosc2",
    "EvalReport", "GroundTruth", "average_precision", "delta_report",
    "evaluate_run", "mean_ap", "pooled_ground_truth",
    "SynthConfig", "SynthResult", "generate",
    "__version__",
]
