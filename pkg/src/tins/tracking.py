"""Temporal query expansion: track one given example through its shot.

From a given example at frame t, candidate frames are sampled at offsets
r * [-w..w].  In each in-shot candidate frame the face nearest (Euclidean)
to the given example's embedding is kept iff its distance is at or below
the threshold, yielding at most one expansion per offset and at most
2w + 1 examples overall.  The comparison anchor is always the offset-0
embedding; an accepted expansion contributes its own matched embedding as
a new query.  Frames outside the shot, missing frames, and frames with no
faces contribute nothing.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import ConfigError, DataError


@dataclass(frozen=True)
class TrackConfig:
    window: int = 0      # half-width in sampled steps, 0 = no tracking
    rate: int = 1        # frames per step
    threshold: float = 1.0  # max Euclidean distance to the given example

    def __post_init__(self):
        if self.window < 0:
            raise ConfigError(f"window must be >= 0, got {self.window}")
        if self.rate < 1:
            raise ConfigError(f"rate must be >= 1, got {self.rate}")
        if not self.threshold > 0:
            raise ConfigError(f"threshold must be > 0, got {self.threshold}")


@dataclass(eq=False)
class QueryExample:
    video_id: str
    shot_id: str
    frame_index: int
    face_index: int
    embedding: np.ndarray
    offset: int = 0
    source: str = "given"  # given | backward | forward


@dataclass(eq=False)
class TrackCue:
    original: QueryExample
    expansions: list[QueryExample] = field(default_factory=list)

    def examples(self) -> list[QueryExample]:
        """All examples in ascending offset order (original at offset 0)."""
        return sorted([self.original, *self.expansions], key=lambda e: e.offset)

    def __len__(self) -> int:
        return 1 + len(self.expansions)


def sample_offsets(window: int, rate: int) -> list[int]:
    """The 2w+1 signed offsets rate * j for j in -window..window, ascending."""
    if window < 0:
        raise ConfigError(f"window must be >= 0, got {window}")
    if rate < 1:
        raise ConfigError(f"rate must be >= 1, got {rate}")
    return [rate * j for j in range(-window, window + 1)]


def track(dataset: Dataset, original: QueryExample, config: TrackConfig) -> TrackCue:
    """Expand one given example inside its shot."""
    shot = dataset.shots.get(original.shot_id)
    if shot is None or shot.video_id != original.video_id:
        raise ValueError(
            f"unknown shot {original.shot_id!r} for video {original.video_id!r}")
    home = dataset.frames.get((original.video_id, original.frame_index))
    if home is None or home.shot_id != original.shot_id:
        raise ValueError(
            f"example frame {original.video_id}:{original.frame_index} "
            f"not found in shot {original.shot_id!r}")

    anchor = np.asarray(original.embedding, dtype=np.float64)
    expansions: list[QueryExample] = []
    for offset in sample_offsets(config.window, config.rate):
        if offset == 0:
            continue
        target = original.frame_index + offset
        if target < shot.start or target > shot.end:
            continue
        rec = dataset.frames.get((original.video_id, target))
        if rec is None or not rec.faces:
            continue
        best_face = None
        best_dist = math.inf
        for face in sorted(rec.faces, key=lambda f: f.face_index):
            diff = face.embedding.astype(np.float64) - anchor
            dist = math.sqrt(float(diff @ diff))
            if dist < best_dist:
                best_face = face
                best_dist = dist
        if best_dist <= config.threshold:
            expansions.append(QueryExample(
                video_id=original.video_id,
                shot_id=original.shot_id,
                frame_index=target,
                face_index=best_face.face_index,
                embedding=best_face.embedding,
                offset=offset,
                source="backward" if offset < 0 else "forward",
            ))
    return TrackCue(original, expansions)


# --- query files ----------------------------------------------------------

@dataclass(frozen=True)
class ExampleRef:
    video_id: str
    shot_id: str
    frame_index: int
    face_index: int


def read_query_file(path) -> list[tuple[str, list[ExampleRef]]]:
    """Topics with their given-example references, in file order."""
    topics: list[tuple[str, list[ExampleRef]]] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                topic = obj["topic"]
                refs = [ExampleRef(e["video"], e["shot"], int(e["frame"]),
                                   int(e["face_k"]))
                        for e in obj["examples"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"line {lineno}: malformed query record ({exc})") from None
            if topic in seen:
                raise DataError(f"line {lineno}: duplicate topic {topic!r}")
            seen.add(topic)
            topics.append((topic, refs))
    return topics


def write_query_file(topics, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for topic, refs in topics:
            obj = {"topic": topic,
                   "examples": [{"video": r.video_id, "shot": r.shot_id,
                                 "frame": r.frame_index, "face_k": r.face_index}
                                for r in refs]}
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def resolve_queries(dataset: Dataset,
                    topics: list[tuple[str, list[ExampleRef]]],
                    ) -> dict[str, list[QueryExample]]:
    """Look up each referenced face in the dataset and attach its embedding."""
    resolved: dict[str, list[QueryExample]] = {}
    for topic, refs in topics:
        examples = []
        for ref in refs:
            rec = dataset.frames.get((ref.video_id, ref.frame_index))
            if rec is None:
                raise DataError(
                    f"topic {topic!r}: unknown frame {ref.video_id}:{ref.frame_index}")
            if rec.shot_id != ref.shot_id:
                raise DataError(
                    f"topic {topic!r}: frame {ref.video_id}:{ref.frame_index} "
                    f"belongs to shot {rec.shot_id!r}, not {ref.shot_id!r}")
            face = next((f for f in rec.faces if f.face_index == ref.face_index), None)
            if face is None:
                raise DataError(
                    f"topic {topic!r}: no face {ref.face_index} in frame "
                    f"{ref.video_id}:{ref.frame_index}")
            examples.append(QueryExample(ref.video_id, ref.shot_id, ref.frame_index,
                                         ref.face_index, face.embedding))
        resolved[topic] = examples
    return resolved
