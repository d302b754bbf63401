"""Order-aware group recommendation.

A member's satisfaction with a recommendation list rewards every
recommended item the member also ranked, with exponential decay in the
positional gap: an item at preference position q placed at list position
p contributes base^(-|q - p| / scale). Four consensus functions turn the
members' ordered preferences into one list of ``budget`` items:

lmm   least misery: the currently least satisfied member places an item
lmmp  least misery with a priority tie-break among equally unhappy members
gram  per-position greedy over the group score matrix
ham   optimal position-to-item assignment of the group score matrix
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import PreferenceProfile

METHODS = ("lmm", "lmmp", "gram", "ham")

# relative slack when testing whether a candidate keeps an assignment optimal
_ASSIGNMENT_RTOL = 1e-9


@dataclass(frozen=True)
class ScoringParams:
    """Satisfaction-scoring knobs: list length and the decay's base/scale."""

    budget: int
    decay_base: float = 2.0
    decay_scale: float = 1.0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.decay_base <= 1:
            raise ValueError("decay_base must be > 1")
        if self.decay_scale <= 0:
            raise ValueError("decay_scale must be > 0")


@dataclass
class Group:
    """A set of members, each carrying an ordered preference list."""

    group_id: int
    members: list[PreferenceProfile]

    def __post_init__(self):
        if not self.members:
            raise ValueError("a group needs at least one member")
        ids = [m.user_id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate member user ids")


@dataclass(frozen=True)
class RecommendationVector:
    """The ordered recommendation list; exactly ``budget`` distinct items."""

    items: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.items)) != len(self.items):
            raise ValueError("recommendation contains duplicate items")


@dataclass
class SatisfactionReport:
    method: str
    per_user: dict[str, float]
    group_score: float


def uso_score(
    profile: PreferenceProfile, rec: Sequence[str] | RecommendationVector, params: ScoringParams
) -> float:
    """Satisfaction of one member with a recommendation list.

    Sums base^(-|q - p| / scale) over recommendation positions p (1-based)
    whose item appears at position q of the member's preference list;
    items the member never ranked contribute 0.
    """
    items = rec.items if isinstance(rec, RecommendationVector) else rec
    positions = {item: q for q, item in enumerate(profile.items, start=1)}
    total = 0.0
    for p, item in enumerate(items, start=1):
        q = positions.get(item)
        if q is not None:
            total += params.decay_base ** (-abs(q - p) / params.decay_scale)
    return total


def _check_catalog(group: Group, catalog: Sequence[str]) -> None:
    catalog_set = set(catalog)
    if len(catalog_set) != len(catalog):
        raise ValueError("catalog contains duplicate items")
    for member in group.members:
        missing = [item for item in member.items if item not in catalog_set]
        if missing:
            raise ValueError(
                f"member {member.user_id} prefers items outside the catalog: {missing}"
            )


def position_score_matrix(
    group: Group, catalog: Sequence[str], params: ScoringParams
) -> np.ndarray:
    """Group score matrix W: W[p-1, j] is the total satisfaction gained
    across members by placing catalog[j] at list position p."""
    _check_catalog(group, catalog)
    k = params.budget
    column = {item: j for j, item in enumerate(catalog)}
    p_axis = np.arange(1, k + 1, dtype=float)
    weights = np.zeros((k, len(catalog)))
    for member in group.members:
        for q, item in enumerate(member.items, start=1):
            weights[:, column[item]] += params.decay_base ** (
                -np.abs(q - p_axis) / params.decay_scale
            )
    return weights


def greedy_assignment(weights: np.ndarray) -> list[int]:
    """Column per row, chosen row by row as the best unused column
    (ties go to the lowest column index)."""
    weights = np.asarray(weights, dtype=float)
    k, n = weights.shape
    if k > n:
        raise ValueError(f"cannot place {k} positions with only {n} items")
    chosen: list[int] = []
    used: set[int] = set()
    for p in range(k):
        best_j, best_w = None, None
        for j in range(n):
            if j in used:
                continue
            if best_w is None or weights[p, j] > best_w:
                best_j, best_w = j, weights[p, j]
        chosen.append(best_j)
        used.add(best_j)
    return chosen


def max_weight_assignment(
    weights: np.ndarray, tie_order: Sequence[int] | None = None
) -> list[int]:
    """Column per row maximizing the total weight over injective
    row-to-column assignments (Hungarian-style exact optimum).

    Among equally optimal assignments the result prefers, position by
    position, the earliest column in ``tie_order`` (column index order by
    default): the chosen sequence is the lexicographically smallest
    optimal one under that ordering.
    """
    weights = np.asarray(weights, dtype=float)
    k, n = weights.shape
    if k > n:
        raise ValueError(f"cannot place {k} positions with only {n} items")
    order = list(tie_order) if tie_order is not None else list(range(n))
    if sorted(order) != list(range(n)):
        raise ValueError("tie_order must be a permutation of the column indices")

    def optimum(rows_from: int, free: list[int]) -> float:
        if rows_from == k:
            return 0.0
        sub = weights[np.ix_(range(rows_from, k), free)]
        r, c = linear_sum_assignment(sub, maximize=True)
        return float(sub[r, c].sum())

    chosen: list[int] = []
    used: set[int] = set()
    for p in range(k):
        free = [j for j in range(n) if j not in used]
        target = optimum(p, free)
        slack = _ASSIGNMENT_RTOL * max(1.0, abs(target))
        for j in order:
            if j in used:
                continue
            rest = optimum(p + 1, [c for c in free if c != j])
            if weights[p, j] + rest >= target - slack:
                chosen.append(j)
                used.add(j)
                break
    return chosen


def evaluate(
    group: Group,
    rec: Sequence[str] | RecommendationVector,
    params: ScoringParams,
    method: str = "manual",
) -> SatisfactionReport:
    """Per-member satisfaction with ``rec`` plus the group score: the mean
    over members of satisfaction normalized by the budget."""
    items = rec.items if isinstance(rec, RecommendationVector) else tuple(rec)
    if len(items) != params.budget:
        raise ValueError(f"recommendation length {len(items)} != budget {params.budget}")
    per_user = {m.user_id: uso_score(m, items, params) for m in group.members}
    group_score = sum(per_user.values()) / len(per_user) / params.budget
    return SatisfactionReport(method=method, per_user=per_user, group_score=group_score)


def _least_misery(
    group: Group, catalog: Sequence[str], params: ScoringParams, with_priority: bool
) -> tuple[RecommendationVector, SatisfactionReport]:
    _check_catalog(group, catalog)
    k = params.budget
    if len(catalog) < k:
        raise ValueError(f"catalog of {len(catalog)} items cannot fill a budget of {k}")
    weights = position_score_matrix(group, catalog, params)
    column = {item: j for j, item in enumerate(catalog)}

    satisfaction = {m.user_id: 0.0 for m in group.members}
    placed_count = {m.user_id: 0 for m in group.members}
    rec: list[str] = []
    in_rec: set[str] = set()

    for p in range(1, k + 1):
        if with_priority:
            ranked = sorted(
                group.members,
                key=lambda m: (satisfaction[m.user_id], placed_count[m.user_id], m.user_id),
            )
        else:
            ranked = sorted(
                group.members, key=lambda m: (satisfaction[m.user_id], m.user_id)
            )
        # the least satisfied member contributes an item; members with an
        # exhausted list fall through to the next least satisfied one
        chosen_item = None
        for member in ranked:
            best_w = None
            for item in member.items:
                if item in in_rec:
                    continue
                w = weights[p - 1, column[item]]
                if best_w is None or w > best_w:
                    chosen_item, best_w = item, w
            if chosen_item is not None:
                break
        if chosen_item is None:
            chosen_item = next(item for item in catalog if item not in in_rec)

        rec.append(chosen_item)
        in_rec.add(chosen_item)
        for member in group.members:
            if chosen_item in member.items:
                q = member.items.index(chosen_item) + 1
                satisfaction[member.user_id] += params.decay_base ** (
                    -abs(q - p) / params.decay_scale
                )
                placed_count[member.user_id] += 1

    vector = RecommendationVector(items=tuple(rec))
    method = "lmmp" if with_priority else "lmm"
    return vector, evaluate(group, vector, params, method=method)


def lmm(
    group: Group, catalog: Sequence[str], params: ScoringParams
) -> tuple[RecommendationVector, SatisfactionReport]:
    """Least misery: each position is filled from the preference list of the
    currently least satisfied member (ties to the smallest user id) with
    that member's item adding the most to the group score (ties to the
    member's own preference order)."""
    return _least_misery(group, catalog, params, with_priority=False)


def lmmp(
    group: Group, catalog: Sequence[str], params: ScoringParams
) -> tuple[RecommendationVector, SatisfactionReport]:
    """Least misery with priority: like lmm, but members tied on
    satisfaction are ordered by how many of their preferred items are
    already in the list (fewer first), then by user id."""
    return _least_misery(group, catalog, params, with_priority=True)


def gram(
    group: Group, catalog: Sequence[str], params: ScoringParams
) -> tuple[RecommendationVector, SatisfactionReport]:
    """Greedy aggregation: position by position, append the unused item
    with the highest group score matrix entry (ties to catalog order)."""
    _check_catalog(group, catalog)
    if len(catalog) < params.budget:
        raise ValueError(
            f"catalog of {len(catalog)} items cannot fill a budget of {params.budget}"
        )
    weights = position_score_matrix(group, catalog, params)
    chosen = greedy_assignment(weights)
    vector = RecommendationVector(items=tuple(catalog[j] for j in chosen))
    return vector, evaluate(group, vector, params, method="gram")


def ham(
    group: Group, catalog: Sequence[str], params: ScoringParams
) -> tuple[RecommendationVector, SatisfactionReport]:
    """Optimal aggregation: positions are matched to distinct items so the
    total group score matrix weight is maximal (exact assignment optimum);
    among optima the lexicographically smallest item sequence wins."""
    _check_catalog(group, catalog)
    if len(catalog) < params.budget:
        raise ValueError(
            f"catalog of {len(catalog)} items cannot fill a budget of {params.budget}"
        )
    weights = position_score_matrix(group, catalog, params)
    by_item_id = sorted(range(len(catalog)), key=lambda j: catalog[j])
    chosen = max_weight_assignment(weights, tie_order=by_item_id)
    vector = RecommendationVector(items=tuple(catalog[j] for j in chosen))
    return vector, evaluate(group, vector, params, method="ham")


CONSENSUS_FUNCTIONS = {"lmm": lmm, "lmmp": lmmp, "gram": gram, "ham": ham}
