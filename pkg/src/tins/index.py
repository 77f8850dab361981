"""IVF-PQ retrieval over per-frame face embeddings.

Faces are partitioned by a k-means coarse quantizer into inverted lists;
each face's residual against its coarse centroid is product-quantized to
one byte per subspace.  A query probes the `nprobe` nearest coarse
centroids and scores every face in the probed lists by asymmetric distance
(per-subspace lookup tables on the query residual).  Distances map to
similarities via s = 1/(1+d); a frame scores as the maximum similarity of
its scanned faces, and the result is a ranked list of frames.

`exact_mode` stores raw embeddings next to the codes and scores probed
faces by exact Euclidean distance, so with nprobe equal to the cluster
count the same query path reproduces :func:`exact_search` bit for bit.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace
from typing import ClassVar, Sequence

import numpy as np

from .dataset import Dataset, FrameRef
from .errors import ConfigError, DataError
from .kmeans import kmeans

MAGIC = b"TINS"
FORMAT_VERSION = 1
_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class IndexConfig:
    """Build/search parameters for the IVF-PQ index."""

    num_clusters: int = 64
    nprobe: int = 8
    num_subspaces: int = 8
    kmeans_iters: int = 25
    seed: int = 0
    exact_mode: bool = False

    CODES_PER_SUBSPACE: ClassVar[int] = 256

    def __post_init__(self):
        if self.num_clusters < 1:
            raise ConfigError(f"num_clusters must be >= 1, got {self.num_clusters}")
        if not 1 <= self.nprobe <= self.num_clusters:
            raise ConfigError(
                f"nprobe must be in [1, {self.num_clusters}], got {self.nprobe}")
        if self.num_subspaces < 1:
            raise ConfigError(f"num_subspaces must be >= 1, got {self.num_subspaces}")
        if self.kmeans_iters < 1:
            raise ConfigError(f"kmeans_iters must be >= 1, got {self.kmeans_iters}")


@dataclass(eq=False)
class RankedList:
    """Frames ordered by descending score, ties by ascending (video, frame).

    `example_index` and `offset` record which query example produced the
    list (the given example's position and its tracking offset).
    """

    entries: list[tuple[FrameRef, float]]
    example_index: int = 0
    offset: int = 0


@dataclass(eq=False)
class InvertedList:
    video_ids: list[str] = field(default_factory=list)
    frame_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint32))
    face_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint16))
    codes: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), np.uint8))
    embeddings: np.ndarray | None = None  # (n, D) float32, exact_mode only

    def __len__(self) -> int:
        return len(self.video_ids)


class Index:
    def __init__(self, config: IndexConfig, dimension: int,
                 coarse_centroids: np.ndarray, codebooks: np.ndarray,
                 lists: list[InvertedList]):
        self.config = config
        self.dimension = dimension
        self.coarse_centroids = coarse_centroids  # (C, D) float32
        self.codebooks = codebooks                # (m, 256, D/m) float32
        self.lists = lists

    @property
    def num_clusters(self) -> int:
        return self.coarse_centroids.shape[0]

    def num_entries(self) -> int:
        return sum(len(lst) for lst in self.lists)

    def probe_order(self, query: np.ndarray) -> np.ndarray:
        """Cluster ids by ascending distance to the query, ties by id."""
        q = _check_query(query, self.dimension)
        d2 = ((self.coarse_centroids.astype(np.float64) - q) ** 2).sum(axis=1)
        return np.argsort(d2, kind="stable")


def _check_query(query: np.ndarray, dimension: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (dimension,):
        raise ValueError(f"query shape {q.shape} does not match dimension {dimension}")
    return q


def _subspace_slices(dimension: int, num_subspaces: int) -> list[slice]:
    if dimension % num_subspaces != 0:
        raise ConfigError(
            f"num_subspaces={num_subspaces} does not divide dimension {dimension}")
    sub = dimension // num_subspaces
    return [slice(i * sub, (i + 1) * sub) for i in range(num_subspaces)]


def _train_codebooks(residuals: np.ndarray, num_subspaces: int, iters: int,
                     seed: int) -> np.ndarray:
    """Per-subspace 256-centroid codebooks, (m, 256, D/m) float32.

    Tolerates samples smaller than 256 (centroids then repeat points);
    the public wrapper enforces the minimum sample size.
    """
    slices = _subspace_slices(residuals.shape[1], num_subspaces)
    k = IndexConfig.CODES_PER_SUBSPACE
    books = np.empty((num_subspaces, k, residuals.shape[1] // num_subspaces),
                     dtype=np.float32)
    for i, sl in enumerate(slices):
        result = kmeans(residuals[:, sl], k, iters, seed + i)
        books[i] = result.centroids.astype(np.float32)
    return books


def train_pq(residuals: np.ndarray, num_subspaces: int, seed: int = 0,
             iters: int = 25) -> np.ndarray:
    """Train PQ codebooks on residual vectors (needs at least 256 of them)."""
    residuals = np.asarray(residuals)
    if residuals.ndim != 2:
        raise ValueError("residuals must be a 2D array")
    if residuals.shape[0] < IndexConfig.CODES_PER_SUBSPACE:
        raise ValueError(
            f"sample of {residuals.shape[0]} residuals is too small; "
            f"need at least {IndexConfig.CODES_PER_SUBSPACE}")
    return _train_codebooks(residuals, num_subspaces, iters, seed)


def _encode(residuals: np.ndarray, codebooks: np.ndarray) -> np.ndarray:
    """Nearest-codeword index per subspace, (n, m) uint8."""
    n = residuals.shape[0]
    m = codebooks.shape[0]
    codes = np.empty((n, m), dtype=np.uint8)
    slices = _subspace_slices(residuals.shape[1], m)
    for i, sl in enumerate(slices):
        block = residuals[:, sl]
        book = codebooks[i].astype(np.float64)
        d2 = (
            (block * block).sum(axis=1)[:, None]
            - 2.0 * block @ book.T
            + (book * book).sum(axis=1)[None, :]
        )
        codes[:, i] = d2.argmin(axis=1)
    return codes


def build(dataset: Dataset, config: IndexConfig) -> Index:
    """Cluster all faces, PQ-encode their residuals, fill inverted lists.

    Deterministic given (dataset, config).  The cluster count is clamped to
    the number of faces; an empty dataset is only allowed in exact_mode.
    """
    refs, matrix = dataset.face_refs_and_matrix()
    dimension = dataset.dimension
    slices = _subspace_slices(dimension, config.num_subspaces)
    sub = dimension // config.num_subspaces
    n = len(refs)

    if n == 0:
        if not config.exact_mode:
            raise ValueError("cannot build an index over a dataset with no faces")
        cfg = replace(config, num_clusters=1, nprobe=1)
        centroids = np.zeros((1, dimension), np.float32)
        books = np.zeros((config.num_subspaces, IndexConfig.CODES_PER_SUBSPACE, sub),
                         np.float32)
        empty = InvertedList(codes=np.zeros((0, config.num_subspaces), np.uint8),
                             embeddings=np.zeros((0, dimension), np.float32))
        return Index(cfg, dimension, centroids, books, [empty])

    effective_c = min(config.num_clusters, n)
    cfg = replace(config, num_clusters=effective_c,
                  nprobe=min(config.nprobe, effective_c))

    points = matrix.astype(np.float64)
    coarse = kmeans(points, effective_c, config.kmeans_iters, config.seed)
    centroids = coarse.centroids.astype(np.float32)

    # assign against the stored float32 centroids so searches on a
    # reloaded index see exactly the geometry the build used
    cent64 = centroids.astype(np.float64)
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ cent64.T
        + (cent64 * cent64).sum(axis=1)[None, :]
    )
    assignment = d2.argmin(axis=1)
    residuals = points - cent64[assignment]

    books = _train_codebooks(residuals, config.num_subspaces,
                             config.kmeans_iters, config.seed)
    codes = _encode(residuals, books)

    lists = []
    for c in range(effective_c):
        member = np.flatnonzero(assignment == c)  # ascending: canonical face order
        lst = InvertedList(
            video_ids=[refs[i][0] for i in member],
            frame_indices=np.array([refs[i][1] for i in member], np.uint32),
            face_indices=np.array([refs[i][2] for i in member], np.uint16),
            codes=codes[member],
            embeddings=matrix[member].copy() if config.exact_mode else None,
        )
        lists.append(lst)
    return Index(cfg, dimension, centroids, books, lists)


def _rank_frames(best: dict[FrameRef, float], top_n: int) -> list[tuple[FrameRef, float]]:
    items = sorted(best.items(), key=lambda kv: (-kv[1], kv[0][0], kv[0][1]))
    return items[:top_n]


def _accumulate(best: dict[FrameRef, float], video_ids: Sequence[str],
                frame_indices: np.ndarray, distances: np.ndarray) -> None:
    scores = 1.0 / (1.0 + distances)
    for video, frame, score in zip(video_ids, frame_indices, scores):
        ref = (video, int(frame))
        prev = best.get(ref)
        if prev is None or score > prev:
            best[ref] = float(score)


def search(index: Index, query: np.ndarray, top_n: int,
           nprobe: int | None = None) -> RankedList:
    """Ranked frames for a query embedding.

    Frames absent from every probed list are absent from the result (no
    zero-score padding).  `nprobe` overrides the build-time default.
    """
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    q = _check_query(query, index.dimension)
    if nprobe is None:
        nprobe = index.config.nprobe
    if not 1 <= nprobe <= index.num_clusters:
        raise ValueError(f"nprobe must be in [1, {index.num_clusters}], got {nprobe}")

    probe = index.probe_order(q)[:nprobe]
    m = index.codebooks.shape[0]
    sub = index.dimension // m
    best: dict[FrameRef, float] = {}
    for c in probe:
        lst = index.lists[int(c)]
        if len(lst) == 0:
            continue
        if index.config.exact_mode:
            diff = lst.embeddings.astype(np.float64) - q
            dist = np.sqrt((diff * diff).sum(axis=1))
        else:
            residual = q - index.coarse_centroids[int(c)].astype(np.float64)
            table = ((index.codebooks.astype(np.float64)
                      - residual.reshape(m, 1, sub)) ** 2).sum(axis=2)
            d2 = table[np.arange(m)[None, :], lst.codes].sum(axis=1)
            dist = np.sqrt(d2)
        _accumulate(best, lst.video_ids, lst.frame_indices, dist)
    return RankedList(_rank_frames(best, top_n))


def exact_search(dataset: Dataset, query: np.ndarray, top_n: int) -> RankedList:
    """Brute-force oracle: exhaustive Euclidean scan over every face."""
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    q = _check_query(query, dataset.dimension)
    refs, matrix = dataset.face_refs_and_matrix()
    best: dict[FrameRef, float] = {}
    if refs:
        diff = matrix.astype(np.float64) - q
        dist = np.sqrt((diff * diff).sum(axis=1))
        videos = [r[0] for r in refs]
        frames = np.array([r[1] for r in refs], np.uint32)
        _accumulate(best, videos, frames, dist)
    return RankedList(_rank_frames(best, top_n))


def save_index(index: Index, path) -> None:
    """Binary little-endian index file; byte-identical for equal builds."""
    buf = io.BytesIO()
    cfg = index.config
    buf.write(struct.pack("<4sIIIIBQ", MAGIC, FORMAT_VERSION, index.dimension,
                          index.num_clusters, cfg.num_subspaces,
                          int(cfg.exact_mode), cfg.seed & _SEED_MASK))
    buf.write(index.coarse_centroids.astype("<f4").tobytes())
    buf.write(index.codebooks.astype("<f4").tobytes())
    for lst in index.lists:
        buf.write(struct.pack("<Q", len(lst)))
        for i in range(len(lst)):
            video = lst.video_ids[i].encode("utf-8")
            if len(video) > 0xFFFF:
                raise DataError(f"video id too long to store: {lst.video_ids[i]!r}")
            buf.write(struct.pack("<H", len(video)))
            buf.write(video)
            buf.write(struct.pack("<IH", int(lst.frame_indices[i]),
                                  int(lst.face_indices[i])))
            buf.write(lst.codes[i].astype("<u1").tobytes())
            if cfg.exact_mode:
                buf.write(lst.embeddings[i].astype("<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, count: int) -> bytes:
        end = self.pos + count
        if end > len(self.data):
            raise DataError("truncated index file")
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_index(path) -> Index:
    with open(path, "rb") as fh:
        reader = _Reader(fh.read())
    magic, version, dimension, num_clusters, m, exact, seed = reader.unpack("<4sIIIIBQ")
    if magic != MAGIC:
        raise DataError(f"not an index file (bad magic {magic!r})")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported index version {version}, expected {FORMAT_VERSION}")
    if m < 1 or dimension % m != 0:
        raise DataError(f"corrupt index header: m={m}, dimension={dimension}")
    sub = dimension // m
    k = IndexConfig.CODES_PER_SUBSPACE
    exact_mode = bool(exact)

    centroids = np.frombuffer(reader.take(num_clusters * dimension * 4),
                              dtype="<f4").reshape(num_clusters, dimension).copy()
    codebooks = np.frombuffer(reader.take(m * k * sub * 4),
                              dtype="<f4").reshape(m, k, sub).copy()
    lists = []
    for _ in range(num_clusters):
        (count,) = reader.unpack("<Q")
        videos: list[str] = []
        frames = np.empty(count, np.uint32)
        faces = np.empty(count, np.uint16)
        codes = np.empty((count, m), np.uint8)
        embeddings = np.empty((count, dimension), np.float32) if exact_mode else None
        for i in range(count):
            (vlen,) = reader.unpack("<H")
            videos.append(reader.take(vlen).decode("utf-8"))
            frames[i], faces[i] = reader.unpack("<IH")
            codes[i] = np.frombuffer(reader.take(m), dtype="<u1")
            if exact_mode:
                embeddings[i] = np.frombuffer(reader.take(dimension * 4), dtype="<f4")
        lists.append(InvertedList(videos, frames, faces, codes, embeddings))
    if reader.pos != len(reader.data):
        raise DataError("trailing bytes after index payload")

    # nprobe and the k-means budget are not persisted; default to a full
    # probe so a bare load is exact, callers override per search
    config = IndexConfig(num_clusters=num_clusters, nprobe=num_clusters,
                         num_subspaces=m, seed=seed, exact_mode=exact_mode)
    return Index(config, dimension, centroids, codebooks, lists)
