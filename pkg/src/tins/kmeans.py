"""Seeded Lloyd k-means with k-means++ initialization.

Written against numpy directly (rather than delegating to sklearn/scipy)
because the index build needs bit-reproducible centroids for a given seed,
a fixed iteration budget with early stop on unchanged assignments, and
empty-cluster reseeding from the farthest-assigned point.  All arithmetic
is float64; callers cast the result to their storage dtype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class KMeansResult:
    centroids: np.ndarray        # (k, D) float64
    labels: np.ndarray           # (n,) int64, final assignment
    inertia: list[float]         # sum of squared distances, one per iteration


def _dist2_matrix(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (n, k).  Clipped at 0 against rounding."""
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    np.maximum(d2, 0.0, out=d2)
    return d2


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    idx = int(rng.integers(n))
    centers[0] = points[idx]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # all points coincide with chosen centers; duplicates are fine
            idx = int(rng.integers(n))
        centers[i] = points[idx]
        np.minimum(d2, ((points - centers[i]) ** 2).sum(axis=1), out=d2)
    return centers


def kmeans(points: np.ndarray, k: int, iters: int, seed: int) -> KMeansResult:
    """Lloyd's algorithm for exactly `iters` iterations or until assignments stop changing.

    Accepts k > n (the surplus centroids collapse onto duplicated points);
    public wrappers enforce stricter sample-size requirements.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a non-empty 2D array")
    if not np.all(np.isfinite(points)):
        raise ValueError("points contain non-finite values")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if iters < 1:
        raise ValueError(f"iters must be >= 1, got {iters}")

    n = points.shape[0]
    rng = np.random.default_rng(int(seed) & ((1 << 64) - 1))
    centers = _kmeans_pp_init(points, k, rng)

    prev_labels: np.ndarray | None = None
    labels = np.zeros(n, dtype=np.int64)
    history: list[float] = []
    for _ in range(iters):
        d2 = _dist2_matrix(points, centers)
        labels = d2.argmin(axis=1)
        assigned_d2 = d2[np.arange(n), labels]
        history.append(float(assigned_d2.sum()))
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        prev_labels = labels

        sums = np.zeros_like(centers)
        np.add.at(sums, labels, points)
        counts = np.bincount(labels, minlength=k)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]

        empties = np.flatnonzero(~nonempty)
        if empties.size:
            # farthest points from their assigned centroids, one per empty
            # cluster, distinct, in deterministic order
            order = np.argsort(-assigned_d2, kind="stable")
            for slot, point_idx in zip(empties, order):
                centers[slot] = points[point_idx]

    return KMeansResult(centroids=centers, labels=labels, inertia=history)


def train_coarse(embeddings: np.ndarray, num_clusters: int, iters: int = 25,
                 seed: int = 0) -> np.ndarray:
    """Coarse-quantizer centroids, (C, D) float32.

    The training sample must contain at least `num_clusters` vectors.
    """
    embeddings = np.asarray(embeddings)
    if embeddings.ndim != 2:
        raise ValueError("embeddings must be a 2D array")
    if embeddings.shape[0] < num_clusters:
        raise ValueError(
            f"sample of {embeddings.shape[0]} vectors is smaller than "
            f"num_clusters={num_clusters}")
    result = kmeans(embeddings, num_clusters, iters, seed)
    return result.centroids.astype(np.float32)
