"""Review-dataset ingestion, preprocessing, and preference extraction.

Two source formats are supported: JSON-lines (one review object per line,
Amazon-style attribute names by default) and RFC-4180 CSV with a header
row (Modcloth-style names by default). Attribute names are remappable via
a field map so other datasets can be ingested without code changes.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .errors import DataError

log = logging.getLogger(__name__)

# attribute-name defaults per format
JSONL_FIELD_MAP = {
    "user": "reviewerID",
    "item": "asin",
    "rating": "overall",
    "review": "reviewText",
}
CSV_FIELD_MAP = {
    "user": "user_id",
    "item": "item_id",
    "rating": "quality",
    "review": "review_text",
}

# stand-in text for reviews that are missing entirely (JSON-lines mode)
DEFAULT_PLACEHOLDER = "the"

# CSV cells treated as an absent review
_MISSING_CSV_VALUES = {"", "nan"}


@dataclass(frozen=True)
class ReviewRecord:
    """One (user, item, rating, review text) interaction.

    ``seq`` is the appearance order among retained records; it doubles as
    the instance id everywhere downstream.
    """

    user_id: str
    item_id: str
    rating: int
    review_text: str
    seq: int


@dataclass
class UtilityMatrix:
    """Sparse user-by-item rating matrix with first-appearance ordering."""

    users: list[str]
    items: list[str]
    entries: dict[tuple[int, int], int]

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class PreferenceProfile:
    """A user's item ids in the order the user reviewed them, first
    occurrence kept, duplicates dropped."""

    user_id: str
    items: tuple[str, ...]


def _resolve_field_map(field_map: Mapping[str, str] | None, defaults: Mapping[str, str]) -> dict:
    resolved = dict(defaults)
    if field_map:
        unknown = set(field_map) - set(defaults)
        if unknown:
            raise DataError(f"unknown field-map keys: {sorted(unknown)}")
        resolved.update(field_map)
    return resolved


def _coerce_rating(raw) -> int | None:
    """Rating as an int in [1, 5], or None when out of range / non-integral."""
    if isinstance(raw, bool):
        return None
    if isinstance(raw, int):
        value = raw
    elif isinstance(raw, float):
        if not raw.is_integer():
            return None
        value = int(raw)
    elif isinstance(raw, str):
        try:
            value = int(float(raw))
            if float(raw) != value:
                return None
        except ValueError:
            return None
    else:
        return None
    return value if 1 <= value <= 5 else None


def ingest_jsonl(
    path: str | Path,
    field_map: Mapping[str, str] | None = None,
    placeholder: str = DEFAULT_PLACEHOLDER,
) -> list[ReviewRecord]:
    """Read a JSON-lines review file into records, in file order.

    Reviews that are absent or blank are replaced by ``placeholder`` so
    every record still carries some text. Records whose rating is not an
    integer in [1, 5] are dropped with a warning; structurally broken
    lines (bad JSON, missing user/item/rating attributes) abort with the
    offending line number. Files must be valid UTF-8.
    """
    fields = _resolve_field_map(field_map, JSONL_FIELD_MAP)
    records: list[ReviewRecord] = []
    rejected = 0
    try:
        with open(path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}: line {line_no}: invalid JSON ({exc.msg})")
                if not isinstance(obj, dict):
                    raise DataError(f"{path}: line {line_no}: expected a JSON object")
                missing = [
                    fields[key] for key in ("user", "item", "rating") if fields[key] not in obj
                ]
                if missing:
                    raise DataError(
                        f"{path}: line {line_no}: missing attribute(s) {missing}"
                    )
                rating = _coerce_rating(obj[fields["rating"]])
                if rating is None:
                    rejected += 1
                    log.warning(
                        "%s: line %d: rating %r outside [1,5]; record dropped",
                        path, line_no, obj[fields["rating"]],
                    )
                    continue
                review = obj.get(fields["review"])
                if review is None or not str(review).strip():
                    review = placeholder
                records.append(
                    ReviewRecord(
                        user_id=str(obj[fields["user"]]),
                        item_id=str(obj[fields["item"]]),
                        rating=rating,
                        review_text=str(review),
                        seq=len(records),
                    )
                )
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8: {exc}")
    if rejected:
        log.warning("%s: dropped %d record(s) with invalid ratings", path, rejected)
    return records


def ingest_csv_dropping_empty(
    path: str | Path, field_map: Mapping[str, str] | None = None
) -> list[ReviewRecord]:
    """Read a CSV review file, omitting rows whose review text is empty.

    Retained rows get consecutive ``seq`` values. A mapped column that is
    absent from the header is fatal; rows with unusable user/item/rating
    cells are dropped with a warning.
    """
    fields = _resolve_field_map(field_map, CSV_FIELD_MAP)
    records: list[ReviewRecord] = []
    rejected = 0
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None:
                raise DataError(f"{path}: empty file, no header row")
            for column in fields.values():
                if column not in reader.fieldnames:
                    raise DataError(f"{path}: missing column {column!r}")
            for row_no, row in enumerate(reader, start=2):
                review = row.get(fields["review"])
                if review is None or review.strip().lower() in _MISSING_CSV_VALUES:
                    continue
                user = (row.get(fields["user"]) or "").strip()
                item = (row.get(fields["item"]) or "").strip()
                rating = _coerce_rating(row.get(fields["rating"]))
                if not user or not item or rating is None:
                    rejected += 1
                    log.warning("%s: row %d: unusable user/item/rating; dropped", path, row_no)
                    continue
                records.append(
                    ReviewRecord(
                        user_id=user,
                        item_id=item,
                        rating=rating,
                        review_text=review,
                        seq=len(records),
                    )
                )
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8: {exc}")
    if rejected:
        log.warning("%s: dropped %d unusable row(s)", path, rejected)
    return records


def build_utility_matrix(records: Sequence[ReviewRecord]) -> UtilityMatrix:
    """Sparse rating matrix; users/items in first-appearance order,
    duplicate (user, item) pairs resolved last-write-wins."""
    users: list[str] = []
    items: list[str] = []
    user_idx: dict[str, int] = {}
    item_idx: dict[str, int] = {}
    entries: dict[tuple[int, int], int] = {}
    for record in records:
        if record.user_id not in user_idx:
            user_idx[record.user_id] = len(users)
            users.append(record.user_id)
        if record.item_id not in item_idx:
            item_idx[record.item_id] = len(items)
            items.append(record.item_id)
        entries[(user_idx[record.user_id], item_idx[record.item_id])] = record.rating
    return UtilityMatrix(users=users, items=items, entries=entries)


def preference_profiles(
    records: Sequence[ReviewRecord], max_items: int | None = None
) -> list[PreferenceProfile]:
    """Ordered per-user preference lists from appearance order.

    Items are de-duplicated keeping the first occurrence. ``max_items``
    truncates each list to its first entries (the flexible-length mode);
    None keeps full lists.
    """
    if max_items is not None and max_items < 1:
        raise ValueError("max_items must be >= 1")
    seen: dict[str, list[str]] = {}
    order: list[str] = []
    for record in sorted(records, key=lambda r: r.seq):
        if record.user_id not in seen:
            seen[record.user_id] = []
            order.append(record.user_id)
        if record.item_id not in seen[record.user_id]:
            seen[record.user_id].append(record.item_id)
    profiles = []
    for user in order:
        items = seen[user] if max_items is None else seen[user][:max_items]
        profiles.append(PreferenceProfile(user_id=user, items=tuple(items)))
    return profiles


def sample_first_users(records: Sequence[ReviewRecord], n: int) -> list[ReviewRecord]:
    """All records belonging to the first ``n`` distinct users in file order.

    Deterministic stand-in for unspecified user sampling; record seq
    values are kept as-is so instance ids stay stable.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    kept: set[str] = set()
    for record in records:
        if record.user_id not in kept:
            if len(kept) == n:
                break
            kept.add(record.user_id)
    return [r for r in records if r.user_id in kept]


def mini_corpus_path() -> Path:
    """Path of the bundled 30-review planted-topic corpus (JSON-lines)."""
    return Path(str(resources.files("textgrouprec").joinpath("data/mini_reviews.jsonl")))
