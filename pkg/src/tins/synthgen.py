"""Deterministic synthetic video-embedding corpus.

Identity centers are uniform directions on the unit sphere.  Each shot
casts a few identities; a cast member's embedding at frame t of the shot
is normalize(center + per-face gaussian + random walk accumulated over the
shot's frames), so faces of one identity drift apart with temporal gap and
the walk resets at shot boundaries.  A configurable fraction of faces are
distractors: fresh i.i.d. directions with no identity label.  Topics are
queried identities; each topic's given examples are drawn from distinct
videos.

Everything is keyed by per-entity RNG streams derived from (seed, domain,
entity ids), so output is a pure function of the config.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, FaceDetection, FrameRecord
from .errors import ConfigError
from .evaluation import GroundTruth
from .tracking import ExampleRef

_MASK = (1 << 64) - 1
_DOMAIN_IDENTITY = 0
_DOMAIN_SHOT = 1
_DOMAIN_TOPICS = 2


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    dimension: int = 128
    num_identities: int = 20
    num_videos: int = 8
    shots_per_video: int = 40
    frames_per_shot: tuple[int, int] = (8, 30)
    faces_per_frame: tuple[int, int] = (0, 3)
    identity_noise: float = 0.05
    drift_per_frame: float = 0.03
    distractor_rate: float = 0.5
    topics: int = 10
    examples_per_topic: int = 4

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError(f"dimension must be >= 1, got {self.dimension}")
        for name in ("num_identities", "num_videos", "shots_per_video",
                     "topics", "examples_per_topic"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        lo, hi = self.frames_per_shot
        if not 1 <= lo <= hi:
            raise ConfigError(f"frames_per_shot range {lo}..{hi} is empty or invalid")
        lo, hi = self.faces_per_frame
        if not 0 <= lo <= hi:
            raise ConfigError(f"faces_per_frame range {lo}..{hi} is empty or invalid")
        if self.identity_noise < 0 or self.drift_per_frame < 0:
            raise ConfigError("noise levels must be >= 0")
        if not 0.0 <= self.distractor_rate <= 1.0:
            raise ConfigError(
                f"distractor_rate must be in [0, 1], got {self.distractor_rate}")
        if self.topics > self.num_identities:
            raise ConfigError(
                f"topics={self.topics} exceeds num_identities={self.num_identities}")
        if self.examples_per_topic > self.num_videos:
            raise ConfigError(
                f"examples_per_topic={self.examples_per_topic} exceeds "
                f"num_videos={self.num_videos} (examples come from distinct videos)")


@dataclass
class SynthResult:
    dataset: Dataset
    queries: list[tuple[str, list[ExampleRef]]] = field(default_factory=list)
    truth: GroundTruth = field(default_factory=lambda: GroundTruth({}))


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & _MASK, *key]))


def _unit(vec: np.ndarray) -> np.ndarray:
    norm = float(np.sqrt(vec @ vec))
    if norm == 0.0:
        raise ConfigError("degenerate zero vector while sampling embeddings")
    return vec / norm


def _identity_label(i: int) -> str:
    return f"person{i:03d}"


def generate(config: SynthConfig) -> SynthResult:
    """Build the dataset, the per-topic given examples, and the true ground truth."""
    dim = config.dimension
    centers = np.stack([
        _unit(_rng(config.seed, _DOMAIN_IDENTITY, i).standard_normal(dim))
        for i in range(config.num_identities)
    ])

    frames: list[FrameRecord] = []
    shots_by_identity: dict[int, set[str]] = {i: set() for i in range(config.num_identities)}
    occurrences: dict[int, dict[str, list[ExampleRef]]] = {
        i: {} for i in range(config.num_identities)}

    f_lo, f_hi = config.frames_per_shot
    k_lo, k_hi = config.faces_per_frame
    max_cast = min(3, config.num_identities)

    for v in range(config.num_videos):
        video_id = f"v{v:02d}"
        cursor = 0
        for s in range(config.shots_per_video):
            shot_id = f"{video_id}_s{s:03d}"
            rng = _rng(config.seed, _DOMAIN_SHOT, v, s)
            n_frames = int(rng.integers(f_lo, f_hi + 1))
            cast_size = int(rng.integers(1, max_cast + 1))
            cast = np.sort(rng.choice(config.num_identities, size=cast_size,
                                      replace=False))
            walks = {int(i): np.zeros(dim) for i in cast}
            for t in range(n_frames):
                if t > 0:
                    for i in walks:
                        walks[i] = walks[i] + rng.normal(0.0, config.drift_per_frame, dim)
                frame_index = cursor + t
                faces: list[FaceDetection] = []
                n_faces = int(rng.integers(k_lo, k_hi + 1))
                for k in range(n_faces):
                    if rng.random() < config.distractor_rate:
                        emb = _unit(rng.standard_normal(dim))
                        faces.append(FaceDetection(k, emb.astype(np.float32), None))
                    else:
                        ident = int(cast[rng.integers(cast_size)])
                        raw = (centers[ident]
                               + rng.normal(0.0, config.identity_noise, dim)
                               + walks[ident])
                        emb = _unit(raw)
                        faces.append(FaceDetection(k, emb.astype(np.float32),
                                                   _identity_label(ident)))
                        shots_by_identity[ident].add(shot_id)
                        occurrences[ident].setdefault(video_id, []).append(
                            ExampleRef(video_id, shot_id, frame_index, k))
                frames.append(FrameRecord(video_id, shot_id, frame_index, faces))
            cursor += n_frames

    dataset = Dataset.from_frames(frames, dim)

    rng = _rng(config.seed, _DOMAIN_TOPICS)
    chosen = sorted(int(i) for i in rng.choice(config.num_identities,
                                               size=config.topics, replace=False))
    queries: list[tuple[str, list[ExampleRef]]] = []
    relevant: dict[str, set[str]] = {}
    for ident in chosen:
        label = _identity_label(ident)
        by_video = occurrences[ident]
        videos = sorted(by_video)
        if len(videos) < config.examples_per_topic:
            raise ConfigError(
                f"identity {label} occurs in {len(videos)} videos, fewer than "
                f"examples_per_topic={config.examples_per_topic}; use a larger corpus")
        picks = sorted(int(j) for j in rng.choice(len(videos),
                                                  size=config.examples_per_topic,
                                                  replace=False))
        examples = []
        for j in picks:
            occs = by_video[videos[j]]
            examples.append(occs[int(rng.integers(len(occs)))])
        queries.append((label, examples))
        relevant[label] = set(shots_by_identity[ident])

    return SynthResult(dataset=dataset, queries=queries,
                       truth=GroundTruth(relevant=relevant, provenance="true"))
