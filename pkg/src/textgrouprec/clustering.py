"""Spectral clustering over a similarity matrix, the shared k-means core,
silhouette-based selection of the cluster count, and user-level labels.

Determinism: all randomness flows through numpy's default_rng (PCG64)
seeded by the caller, so a given seed always reproduces the same labels
within this implementation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import ReviewRecord
from .embedding import SimilarityMatrix
from .errors import NumericalError


@dataclass
class ClusterAssignment:
    """Instance-level labels plus (optionally) user-level majority labels."""

    instance_labels: list[int]
    user_labels: dict[str, int] = field(default_factory=dict)
    n_clusters: int = 0


@dataclass
class SilhouetteReport:
    """Mean silhouette per candidate cluster count and the argmax choice."""

    per_k: dict[int, float]
    chosen_k: int


def _assign_and_repair(points: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels; empty clusters take over the point farthest
    from its current centroid (ties to the smallest point index)."""
    k = centroids.shape[0]
    dist2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    labels = dist2.argmin(axis=1)
    sizes = np.bincount(labels, minlength=k)
    if (sizes == 0).any():
        centroids = centroids.copy()
        point_dist = dist2[np.arange(len(points)), labels].copy()
        for empty in np.flatnonzero(sizes == 0):
            # never steal a cluster's only member
            stealable = sizes[labels] > 1
            candidates = np.where(stealable, point_dist, -np.inf)
            chosen = int(candidates.argmax())
            sizes[labels[chosen]] -= 1
            labels[chosen] = empty
            sizes[empty] = 1
            centroids[empty] = points[chosen]
            point_dist[chosen] = 0.0
    return labels, centroids


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Standard k-means++ seeding: each new center drawn with probability
    proportional to squared distance from the nearest existing center."""
    m = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(m)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(m))
        else:
            r = rng.random() * total
            idx = int(min(np.searchsorted(np.cumsum(d2), r, side="right"), m - 1))
        centroids[j] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    return centroids


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding, Euclidean metric.

    Stops when labels stabilize, the maximum centroid shift drops below
    ``tol``, or ``max_iter`` is reached; the returned labels are always a
    fresh nearest-centroid assignment against the final centroids.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D matrix")
    m = points.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= {m}, got k={k}")
    if k == 1:
        return np.zeros(m, dtype=int)

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(points, k, rng)
    labels, centroids = _assign_and_repair(points, centroids)
    for _ in range(max_iter):
        new_centroids = np.array([points[labels == j].mean(axis=0) for j in range(k)])
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        new_labels, centroids = _assign_and_repair(points, centroids)
        stable = bool(np.array_equal(new_labels, labels))
        labels = new_labels
        if stable or shift < tol:
            break
    return labels.astype(int)


def spectral_cluster(sim: SimilarityMatrix, k: int, seed: int) -> ClusterAssignment:
    """Normalized spectral clustering of the similarity matrix.

    Negative affinities are clipped to zero, the symmetric normalized
    Laplacian I - D^(-1/2) A D^(-1/2) is eigendecomposed (zero-degree rows
    use 0 in place of D^(-1/2)), the k eigenvectors with smallest
    eigenvalues are sign-fixed and row-normalized, and k-means with the
    given seed labels the rows.
    """
    values = np.asarray(sim.values, dtype=float)
    m = values.shape[0]
    if values.ndim != 2 or values.shape[1] != m:
        raise ValueError("similarity matrix must be square")
    if not np.allclose(values, values.T, atol=1e-12):
        raise ValueError("similarity matrix is not symmetric")
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > m:
        raise ValueError(f"k={k} exceeds the number of instances {m}")

    affinity = np.clip(values, 0.0, None)
    degree = affinity.sum(axis=1)
    inv_sqrt = np.where(degree > 0, 1.0 / np.sqrt(np.where(degree > 0, degree, 1.0)), 0.0)
    laplacian = np.eye(m) - inv_sqrt[:, None] * affinity * inv_sqrt[None, :]
    laplacian = (laplacian + laplacian.T) / 2.0

    try:
        eigenvalues, eigenvectors = np.linalg.eigh(laplacian)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}")
    embedding = eigenvectors[:, :k].copy()
    # deterministic sign: first component above noise level made positive
    for j in range(k):
        column = embedding[:, j]
        nonzero = np.flatnonzero(np.abs(column) > 1e-12)
        if nonzero.size and column[nonzero[0]] < 0:
            embedding[:, j] = -column
    norms = np.linalg.norm(embedding, axis=1)
    rows_nonzero = norms > 0
    embedding[rows_nonzero] /= norms[rows_nonzero, None]

    labels = kmeans(embedding, k, seed)
    return ClusterAssignment(instance_labels=labels.tolist(), n_clusters=k)


def silhouette_mean(dist: np.ndarray, labels: Sequence[int]) -> float:
    """Mean silhouette s = (y - x) / max(x, y) over all points.

    x is the mean distance to the other members of the point's cluster and
    y the smallest mean distance to any other cluster. Points in singleton
    clusters contribute 0, as do points with x = y = 0.
    """
    dist = np.asarray(dist, dtype=float)
    labels = np.asarray(labels, dtype=int)
    m = labels.shape[0]
    if dist.shape != (m, m):
        raise ValueError("distance matrix shape does not match labels")
    unique = np.unique(labels)
    if unique.size < 2:
        raise ValueError("silhouette needs at least 2 clusters")

    onehot = (labels[:, None] == unique[None, :]).astype(float)
    sizes = onehot.sum(axis=0)
    cluster_sums = dist @ onehot  # [i, c] = total distance from i to cluster c
    own_col = np.searchsorted(unique, labels)

    scores = np.zeros(m)
    for i in range(m):
        own = own_col[i]
        if sizes[own] < 2:
            continue
        x = cluster_sums[i, own] / (sizes[own] - 1)
        other = [c for c in range(unique.size) if c != own]
        y = (cluster_sums[i, other] / sizes[other]).min()
        top = max(x, y)
        scores[i] = 0.0 if top == 0 else (y - x) / top
    return float(scores.mean())


def select_k(sim: SimilarityMatrix, k_range: Iterable[int], seed: int) -> SilhouetteReport:
    """Mean silhouette of spectral clustering for each candidate k, using
    distance 1 - similarity; the chosen k maximizes the mean (ties go to
    the smallest k)."""
    candidates = sorted(set(int(k) for k in k_range))
    if not candidates:
        raise ValueError("empty k range")
    m = sim.values.shape[0]
    for k in candidates:
        if not 2 <= k <= m - 1:
            raise ValueError(f"k={k} outside the legal range [2, {m - 1}]")

    distance = 1.0 - sim.values
    np.fill_diagonal(distance, 0.0)

    per_k: dict[int, float] = {}
    chosen_k, best = None, None
    for k in candidates:
        assignment = spectral_cluster(sim, k, seed)
        score = silhouette_mean(distance, assignment.instance_labels)
        per_k[k] = score
        if best is None or score > best:
            chosen_k, best = k, score
    return SilhouetteReport(per_k=per_k, chosen_k=chosen_k)


def assign_users(
    records: Sequence[ReviewRecord], instance_labels: Sequence[int]
) -> ClusterAssignment:
    """User labels by majority vote over the user's instance labels,
    ties resolved to the smallest cluster id."""
    if len(records) != len(instance_labels):
        raise ValueError("labels length does not match records length")
    votes: dict[str, dict[int, int]] = {}
    order: list[str] = []
    for record, label in zip(records, instance_labels):
        if record.user_id not in votes:
            votes[record.user_id] = {}
            order.append(record.user_id)
        counts = votes[record.user_id]
        counts[int(label)] = counts.get(int(label), 0) + 1
    user_labels = {
        user: min(counts, key=lambda c: (-counts[c], c)) for user, counts in votes.items()
    }
    user_labels = {user: user_labels[user] for user in order}
    n_clusters = max(instance_labels) + 1 if len(instance_labels) else 0
    return ClusterAssignment(
        instance_labels=[int(l) for l in instance_labels],
        user_labels=user_labels,
        n_clusters=int(n_clusters),
    )
