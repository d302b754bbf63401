"""Predict & Cluster baseline: fill the utility matrix with user-based
collaborative filtering, then group users by k-means on their rating rows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusterAssignment, kmeans
from .corpus import UtilityMatrix
from .errors import DataError

RATING_MIN, RATING_MAX = 1.0, 5.0


@dataclass
class DenseRatingMatrix:
    """Observed ratings plus predictions for every empty cell."""

    users: list[str]
    items: list[str]
    values: np.ndarray


def _pearson_similarities(ratings: np.ndarray, observed: np.ndarray, min_overlap: int) -> np.ndarray:
    """User-user Pearson correlation over co-rated items.

    Pairs with fewer than ``min_overlap`` co-rated items, or with zero
    variance on the overlap, get similarity 0. The diagonal is 0 so a user
    is never its own neighbor.
    """
    filled = np.where(observed, ratings, 0.0)
    mask = observed.astype(float)

    n = mask @ mask.T
    sum_x = filled @ mask.T         # user u's rating total over items co-rated with v
    sum_xx = (filled ** 2) @ mask.T
    sum_xy = filled @ filled.T

    with np.errstate(invalid="ignore", divide="ignore"):
        cov = sum_xy - sum_x * sum_x.T / n
        var_x = np.maximum(sum_xx - sum_x ** 2 / n, 0.0)
        var_y = var_x.T
        sim = cov / np.sqrt(var_x * var_y)
    sim[~np.isfinite(sim)] = 0.0
    sim[n < min_overlap] = 0.0
    np.fill_diagonal(sim, 0.0)
    return np.clip(sim, -1.0, 1.0)


def predict_ratings(
    um: UtilityMatrix, neighbors: int = 20, min_overlap: int = 2
) -> DenseRatingMatrix:
    """Complete the utility matrix with user-based neighborhood predictions.

    Each empty cell gets r̄_u plus the similarity-weighted mean-centered
    ratings of the top-``neighbors`` users (by |similarity|) that rated
    the item; with no usable neighbor it falls back to the user's mean,
    then the global mean. Predictions are clamped to the rating scale and
    observed cells are kept exactly.
    """
    if not um.entries:
        raise DataError("utility matrix has no ratings")
    n_users, n_items = um.n_users, um.n_items
    ratings = np.zeros((n_users, n_items))
    observed = np.zeros((n_users, n_items), dtype=bool)
    for (u, i), value in um.entries.items():
        ratings[u, i] = float(value)
        observed[u, i] = True

    counts = observed.sum(axis=1)
    global_mean = float(ratings[observed].mean())
    user_mean = np.where(counts > 0, ratings.sum(axis=1) / np.maximum(counts, 1), global_mean)

    sim = _pearson_similarities(ratings, observed, min_overlap)
    raters = [np.flatnonzero(observed[:, i]) for i in range(n_items)]

    values = ratings.copy()
    for u in range(n_users):
        for i in np.flatnonzero(~observed[u]):
            candidates = raters[i]
            candidates = candidates[candidates != u]
            sims = sim[u, candidates]
            usable = sims != 0
            candidates, sims = candidates[usable], sims[usable]
            if candidates.size == 0:
                prediction = user_mean[u]
            else:
                # strongest |similarity| first, index order on ties
                top = np.lexsort((candidates, -np.abs(sims)))[:neighbors]
                vs, ws = candidates[top], sims[top]
                numerator = float((ws * (ratings[vs, i] - user_mean[vs])).sum())
                denominator = float(np.abs(ws).sum())
                prediction = user_mean[u] + numerator / denominator
            values[u, i] = min(max(prediction, RATING_MIN), RATING_MAX)
    return DenseRatingMatrix(users=list(um.users), items=list(um.items), values=values)


def cluster_users(m: DenseRatingMatrix, k: int = 2, seed: int = 0) -> ClusterAssignment:
    """Group users by k-means over their completed rating rows (Euclidean);
    each user is one point, so user labels are direct."""
    if k > len(m.users):
        raise ValueError(f"k={k} exceeds the number of users {len(m.users)}")
    labels = kmeans(m.values, k, seed)
    return ClusterAssignment(
        instance_labels=labels.tolist(),
        user_labels={user: int(label) for user, label in zip(m.users, labels)},
        n_clusters=k,
    )
