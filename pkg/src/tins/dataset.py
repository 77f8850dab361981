"""Video/shot/frame/face data model, ingestion, and persistence.

A dataset is a flat collection of frames sampled from videos at a fixed
rate.  Each frame belongs to exactly one shot and carries zero or more
detected faces, each with a fixed-dimension embedding and an optional
ground-truth identity label.  Shot frame ranges are derived from the
observed frames, never declared separately.

The on-disk format is line-oriented JSON: one frame per line with fields
``video``, ``shot``, ``frame``, ``faces`` (each face ``{"k", "emb",
"id"?}``).  Files written by :func:`save` start with a header record
carrying a format version and frame count so truncation and version skew
are detectable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import DataError

FrameRef = tuple[str, int]

FORMAT_NAME = "tins-dataset"
FORMAT_VERSION = 1

# |norm - 1| at or below this is treated as already normalized, which keeps
# re-ingestion of our own output bit-exact.
_UNIT_TOL = 1e-6


@dataclass(eq=False)
class FaceDetection:
    """One detected face: index within its frame, embedding, optional label."""

    face_index: int
    embedding: np.ndarray  # (D,) float32
    identity: str | None = None


@dataclass(eq=False)
class FrameRecord:
    video_id: str
    shot_id: str
    frame_index: int
    faces: list[FaceDetection] = field(default_factory=list)


@dataclass(frozen=True)
class Shot:
    """Inclusive frame-index range [start, end] of one shot of one video."""

    shot_id: str
    video_id: str
    start: int
    end: int


class Dataset:
    """Immutable collection of frames and derived shots.

    Construct via :meth:`from_frames`, :func:`ingest`, or :func:`load`.
    """

    def __init__(self, dimension: int, frames: dict[FrameRef, FrameRecord],
                 shots: dict[str, Shot]):
        self.dimension = dimension
        self.frames = frames
        self.shots = shots
        self._face_cache: tuple[list[tuple[str, int, int]], np.ndarray] | None = None

    @classmethod
    def from_frames(cls, frames: Iterable[FrameRecord], dimension: int) -> "Dataset":
        """Build a dataset from in-memory frame records.

        Validates uniqueness of (video, frame), embedding dimensions and
        finiteness, shot/video consistency, and disjointness of the derived
        shot ranges.  Embeddings are taken as-is (no normalization).
        """
        frame_map: dict[FrameRef, FrameRecord] = {}
        shot_videos: dict[str, str] = {}
        shot_frames: dict[str, list[int]] = {}
        for rec in frames:
            ref = (rec.video_id, rec.frame_index)
            if ref in frame_map:
                raise DataError(f"duplicate frame {ref[0]}:{ref[1]}")
            if rec.frame_index < 0:
                raise DataError(f"negative frame index {rec.frame_index} in {rec.video_id}")
            for face in rec.faces:
                emb = face.embedding
                if emb.shape != (dimension,):
                    raise DataError(
                        f"embedding dimension {emb.shape} != ({dimension},) "
                        f"at {rec.video_id}:{rec.frame_index}")
                if not np.all(np.isfinite(emb)):
                    raise DataError(
                        f"non-finite embedding at {rec.video_id}:{rec.frame_index}")
            seen_video = shot_videos.setdefault(rec.shot_id, rec.video_id)
            if seen_video != rec.video_id:
                raise DataError(
                    f"shot {rec.shot_id!r} used by videos {seen_video!r} and {rec.video_id!r}")
            frame_map[ref] = rec
            shot_frames.setdefault(rec.shot_id, []).append(rec.frame_index)

        shots = {
            sid: Shot(sid, shot_videos[sid], min(idxs), max(idxs))
            for sid, idxs in shot_frames.items()
        }
        _check_disjoint_ranges(shots)
        return cls(dimension, frame_map, shots)

    def __len__(self) -> int:
        return len(self.frames)

    def num_faces(self) -> int:
        return sum(len(f.faces) for f in self.frames.values())

    def iter_frames(self) -> Iterator[FrameRecord]:
        """Frames in canonical (video_id, frame_index) order."""
        for ref in sorted(self.frames):
            yield self.frames[ref]

    def frame(self, video_id: str, frame_index: int) -> FrameRecord:
        try:
            return self.frames[(video_id, frame_index)]
        except KeyError:
            raise DataError(f"unknown frame {video_id}:{frame_index}") from None

    def shot_of(self, video_id: str, frame_index: int) -> str:
        """Shot id of an ingested frame."""
        return self.frame(video_id, frame_index).shot_id

    def face_refs_and_matrix(self) -> tuple[list[tuple[str, int, int]], np.ndarray]:
        """All faces as ((video, frame, face_index), ...) plus an (N, D) float32 matrix.

        Canonical order: ascending (video_id, frame_index, face_index).
        Cached after first call.
        """
        if self._face_cache is None:
            refs: list[tuple[str, int, int]] = []
            rows: list[np.ndarray] = []
            for rec in self.iter_frames():
                for face in sorted(rec.faces, key=lambda f: f.face_index):
                    refs.append((rec.video_id, rec.frame_index, face.face_index))
                    rows.append(face.embedding)
            matrix = (np.stack(rows).astype(np.float32, copy=False)
                      if rows else np.zeros((0, self.dimension), np.float32))
            self._face_cache = (refs, matrix)
        return self._face_cache

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.dimension != other.dimension or self.shots != other.shots:
            return False
        if set(self.frames) != set(other.frames):
            return False
        for ref, rec in self.frames.items():
            orec = other.frames[ref]
            if rec.shot_id != orec.shot_id or len(rec.faces) != len(orec.faces):
                return False
            for f, of in zip(rec.faces, orec.faces):
                if (f.face_index != of.face_index or f.identity != of.identity
                        or f.embedding.dtype != of.embedding.dtype
                        or not np.array_equal(f.embedding, of.embedding)):
                    return False
        return True


def _check_disjoint_ranges(shots: dict[str, Shot]) -> None:
    by_video: dict[str, list[Shot]] = {}
    for shot in shots.values():
        by_video.setdefault(shot.video_id, []).append(shot)
    for video_id, group in by_video.items():
        group.sort(key=lambda s: s.start)
        for prev, cur in zip(group, group[1:]):
            if cur.start <= prev.end:
                raise DataError(
                    f"overlapping shots {prev.shot_id!r} and {cur.shot_id!r} "
                    f"in video {video_id!r}")


def _parse_frame_record(obj: dict, dimension: int | None, lineno: int,
                        normalize: bool) -> tuple[FrameRecord, int]:
    try:
        video = obj["video"]
        shot = obj["shot"]
        frame = obj["frame"]
        faces_raw = obj["faces"]
        if not isinstance(video, str) or not isinstance(shot, str):
            raise TypeError("video/shot must be strings")
        if not isinstance(frame, int) or isinstance(frame, bool):
            raise TypeError("frame must be an integer")
        if not isinstance(faces_raw, list):
            raise TypeError("faces must be an array")
        faces = []
        for f in faces_raw:
            emb = np.asarray(f["emb"], dtype=np.float64)
            if emb.ndim != 1:
                raise TypeError("emb must be a flat array")
            if dimension is None:
                dimension = emb.shape[0]
            if emb.shape[0] != dimension:
                raise DataError(
                    f"line {lineno}: embedding dimension {emb.shape[0]} != {dimension}")
            if not np.all(np.isfinite(emb)):
                raise DataError(f"line {lineno}: non-finite embedding value")
            if normalize:
                norm = math.sqrt(float(emb @ emb))
                if norm == 0.0:
                    raise DataError(f"line {lineno}: zero embedding cannot be normalized")
                if abs(norm - 1.0) > _UNIT_TOL:
                    emb = emb / norm
            faces.append(FaceDetection(int(f["k"]), emb.astype(np.float32),
                                       f.get("id")))
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"line {lineno}: malformed frame record ({exc})") from None
    if dimension is None:
        raise DataError(f"line {lineno}: cannot infer dimension from empty faces")
    return FrameRecord(video, shot, frame, faces), dimension


def _read_records(path, normalize: bool,
                  require_header: bool) -> tuple[list[FrameRecord], int, dict | None]:
    frames: list[FrameRecord] = []
    dimension: int | None = None
    header: dict | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: invalid record ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DataError(f"line {lineno}: expected an object")
            if lineno == 1 and obj.get("format") == FORMAT_NAME:
                header = obj
                if obj.get("version") != FORMAT_VERSION:
                    raise DataError(
                        f"unsupported dataset version {obj.get('version')!r}, "
                        f"expected {FORMAT_VERSION}")
                dim = obj.get("dimension")
                if isinstance(dim, int) and dim > 0:
                    dimension = dim
                continue
            rec, dimension = _parse_frame_record(obj, dimension, lineno, normalize)
            frames.append(rec)
    if require_header and header is None:
        raise DataError("missing dataset header record")
    if header is not None:
        expected = header.get("frames")
        if isinstance(expected, int) and expected != len(frames):
            raise DataError(
                f"truncated dataset: header declares {expected} frames, found {len(frames)}")
    if dimension is None:
        dimension = 0
    return frames, dimension, header


def ingest(path) -> Dataset:
    """Read a dataset file, normalizing embeddings to unit L2 norm.

    Accepts raw third-party files as well as files written by :func:`save`
    (whose header line is recognized and checked).  Malformed lines are
    reported with their line number.
    """
    frames, dimension, _ = _read_records(path, normalize=True, require_header=False)
    return Dataset.from_frames(frames, dimension)


def save(dataset: Dataset, path) -> None:
    """Write a dataset; output is byte-deterministic for equal datasets."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"format": FORMAT_NAME, "version": FORMAT_VERSION,
                  "dimension": dataset.dimension, "frames": len(dataset.frames)}
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for rec in dataset.iter_frames():
            faces = []
            for face in sorted(rec.faces, key=lambda f: f.face_index):
                obj: dict = {"k": face.face_index,
                             "emb": [float(x) for x in face.embedding]}
                if face.identity is not None:
                    obj["id"] = face.identity
                faces.append(obj)
            row = {"video": rec.video_id, "shot": rec.shot_id,
                   "frame": rec.frame_index, "faces": faces}
            fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def load(path) -> Dataset:
    """Read back a file produced by :func:`save`, bit-exact, no renormalization."""
    frames, dimension, _ = _read_records(path, normalize=False, require_header=True)
    return Dataset.from_frames(frames, dimension)
