"""End-to-end orchestration: ingest, embed, cluster, recommend, compare.

All report files are written deterministically (sorted JSON keys, floats
fixed to 6 decimals, LF newlines) so identical configurations produce
byte-identical outputs. No filesystem paths are embedded in reports.
"""

from __future__ import annotations

import json
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import baseline as baseline_pc
from .clustering import ClusterAssignment, assign_users, select_k, spectral_cluster
from .consensus import CONSENSUS_FUNCTIONS, METHODS, Group, ScoringParams
from .corpus import (
    PreferenceProfile,
    ReviewRecord,
    build_utility_matrix,
    ingest_csv_dropping_empty,
    ingest_jsonl,
    preference_profiles,
    sample_first_users,
)
from .embedding import cosine_similarity_matrix, embed_tfidf, load_vectors
from .errors import ConfigError, DataError, StageError
from .validation import contingency, metrics_report

BASELINE_TAG = "predict_and_cluster"


@dataclass
class PipelineConfig:
    dataset: str = ""
    format: str = "jsonl"
    field_map: dict | None = None
    placeholder: str = "the"
    sample_n: int = 500
    embedding: str = "tfidf"
    vectors: str | None = None
    k_range: tuple[int, int] = (2, 4)
    budget: int = 3
    decay_base: float = 2.0
    decay_scale: float = 1.0
    methods: tuple[str, ...] = METHODS
    flexible: bool = False
    baseline: bool = True
    baseline_k: int = 2
    baseline_seed: int = 0
    neighbors: int = 20
    min_overlap: int = 2
    seed: int = 0
    out: str = "out"
    sweep_budgets: tuple[int, ...] = (3, 5, 7, 10)
    sweep_items: tuple[int, ...] = (10, 20, 50)

    def validate(self) -> None:
        if not self.dataset:
            raise ConfigError("a dataset path is required")
        if self.format not in ("jsonl", "csv"):
            raise ConfigError(f"unknown format {self.format!r} (expected jsonl or csv)")
        if self.embedding not in ("tfidf", "vectors"):
            raise ConfigError(f"unknown embedding {self.embedding!r} (expected tfidf or vectors)")
        if self.embedding == "vectors" and not self.vectors:
            raise ConfigError("embedding=vectors requires a vectors file path")
        if self.sample_n < 2:
            raise ConfigError("sample_n must be >= 2")
        if self.budget < 1:
            raise ConfigError("budget must be >= 1")
        lo, hi = self.k_range
        if lo < 2 or hi < lo:
            raise ConfigError(f"invalid k range {lo}:{hi} (need 2 <= lo <= hi)")
        if self.decay_base <= 1:
            raise ConfigError("a (decay base) must be > 1")
        if self.decay_scale <= 0:
            raise ConfigError("c (decay scale) must be > 0")
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ConfigError(f"unknown methods {unknown}; choose from {list(METHODS)}")
        if not self.methods:
            raise ConfigError("at least one consensus method is required")
        if self.baseline and self.baseline_k < 1:
            raise ConfigError("baseline k must be >= 1")
        if not self.sweep_budgets or min(self.sweep_budgets) < 1:
            raise ConfigError("sweep budgets must be positive")
        if not self.sweep_items or min(self.sweep_items) < 1:
            raise ConfigError("sweep item counts must be positive")


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc)


# ---------------------------------------------------------------------------
# deterministic serialization

def render_json(obj, indent: int = 0) -> str:
    """JSON text with sorted keys and floats fixed to 6 decimal places."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, float):
        return f"{obj:.6f}"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        keys = sorted(obj, key=_key_order)
        parts = [f"{inner}{json.dumps(str(k))}: {render_json(obj[k], indent + 1)}" for k in keys]
        return "{\n" + ",\n".join(parts) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        parts = [f"{inner}{render_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(parts) + f"\n{pad}]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _key_order(key):
    # numeric keys sort numerically so per-k maps read naturally
    if isinstance(key, int):
        return (0, key, "")
    text = str(key)
    return (0, int(text), "") if text.isdigit() else (1, 0, text)


def write_json(path: Path, obj) -> None:
    path.write_text(render_json(obj) + "\n", encoding="utf-8", newline="\n")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    def cell(value) -> str:
        if isinstance(value, float):
            return f"{value:.6f}"
        return str(value)

    lines = [",".join(header)]
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_records_jsonl(records: Sequence[ReviewRecord], path: Path) -> None:
    """Normalized record dump used to hand data between subcommands."""
    lines = [
        json.dumps(
            {
                "user_id": r.user_id,
                "item_id": r.item_id,
                "rating": r.rating,
                "review_text": r.review_text,
                "seq": r.seq,
            },
            sort_keys=True,
        )
        for r in records
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8", newline="\n")


def read_records_jsonl(path: str | Path) -> list[ReviewRecord]:
    records = []
    try:
        with open(path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    records.append(
                        ReviewRecord(
                            user_id=str(obj["user_id"]),
                            item_id=str(obj["item_id"]),
                            rating=int(obj["rating"]),
                            review_text=str(obj["review_text"]),
                            seq=int(obj["seq"]),
                        )
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise DataError(f"{path}: line {line_no}: bad record ({exc})")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    return records


def align_embedding(emb, ids: Sequence[int]):
    """Reorder embedding rows to follow ``ids``; the id sets must match."""
    if set(emb.ids) != set(ids):
        raise DataError(
            "embedding/id-mismatch: vector ids do not match the corpus instance ids"
        )
    lookup = {vid: row for vid, row in zip(emb.ids, emb.rows)}
    emb.rows = np.array([lookup[i] for i in ids])
    emb.ids = list(ids)
    return emb


# ---------------------------------------------------------------------------
# group construction and catalogs

def item_appearance_order(records: Sequence[ReviewRecord]) -> list[str]:
    seen: list[str] = []
    known: set[str] = set()
    for record in records:
        if record.item_id not in known:
            known.add(record.item_id)
            seen.append(record.item_id)
    return seen


def make_groups(
    user_labels: dict[str, int], profiles: Sequence[PreferenceProfile]
) -> list[Group]:
    """One group per cluster id, members in profile (appearance) order."""
    members: dict[int, list[PreferenceProfile]] = {}
    for profile in profiles:
        if profile.user_id in user_labels:
            members.setdefault(user_labels[profile.user_id], []).append(profile)
    return [Group(group_id=label, members=ms) for label, ms in sorted(members.items())]


def preferred_items(group: Group) -> list[str]:
    """Union of the members' preference items, in member-appearance order."""
    union: list[str] = []
    known: set[str] = set()
    for member in group.members:
        for item in member.items:
            if item not in known:
                known.add(item)
                union.append(item)
    return union


def group_catalog(group: Group, size: int, global_items: Sequence[str]) -> list[str]:
    """The group's preferred items cut to ``size`` entries, padded from the
    global item list when the union falls short."""
    catalog = preferred_items(group)
    known = set(catalog)
    for item in global_items:
        if len(catalog) >= size:
            break
        if item not in known:
            known.add(item)
            catalog.append(item)
    return catalog[:size]


def _restrict_members(
    group: Group, catalog: Sequence[str], budget: int, truncate: bool
) -> Group | None:
    allowed = set(catalog)
    members = []
    for member in group.members:
        items = tuple(item for item in member.items if item in allowed)
        if truncate:
            items = items[:budget]
        if items:
            members.append(PreferenceProfile(user_id=member.user_id, items=items))
    if not members:
        return None
    return Group(group_id=group.group_id, members=members)


def recommend_for_groups(
    groups: Sequence[Group],
    global_items: Sequence[str],
    methods: Sequence[str],
    params: ScoringParams,
) -> list[dict]:
    """One report per (group, method) at the configured budget."""
    reports = []
    for group in groups:
        union = preferred_items(group)
        catalog = group_catalog(group, max(params.budget, len(union)), global_items)
        if len(catalog) < params.budget:
            raise DataError(
                f"group {group.group_id}: only {len(catalog)} items available "
                f"for a budget of {params.budget}"
            )
        for method in methods:
            vector, report = CONSENSUS_FUNCTIONS[method](group, catalog, params)
            reports.append(
                {
                    "group_id": group.group_id,
                    "method": method,
                    "k": params.budget,
                    "items": list(vector.items),
                    "per_user": report.per_user,
                    "group_score": report.group_score,
                }
            )
    return reports


def sweep_table(
    groups: Sequence[Group],
    global_items: Sequence[str],
    methods: Sequence[str],
    budgets: Sequence[int],
    item_counts: Sequence[int],
    decay_base: float,
    decay_scale: float,
    truncate: bool,
) -> list[tuple[str, int, int, float]]:
    """Mean group score per (method, budget k, catalog size m).

    Each group's catalog is its preferred-item union cut (or padded from
    the global list) to max(m, k) entries; member lists are intersected
    with the catalog, and members left empty sit the cell out. Cells that
    cannot field a big enough catalog or any member are skipped.
    """
    rows = []
    for method in methods:
        for k in budgets:
            params = ScoringParams(budget=k, decay_base=decay_base, decay_scale=decay_scale)
            for m in item_counts:
                scores = []
                for group in groups:
                    catalog = group_catalog(group, max(m, k), global_items)
                    if len(catalog) < k:
                        continue
                    restricted = _restrict_members(group, catalog, k, truncate)
                    if restricted is None:
                        continue
                    _, report = CONSENSUS_FUNCTIONS[method](restricted, catalog, params)
                    scores.append(report.group_score)
                if scores:
                    rows.append((method, k, m, sum(scores) / len(scores)))
    return rows


def compare_partitions(
    a: ClusterAssignment, b: ClusterAssignment, alt_recall: bool = False
) -> dict:
    """Pair-counting metrics of partition ``a`` against ``b`` over the
    shared user universe."""
    if set(a.user_labels) != set(b.user_labels):
        only_a = sorted(set(a.user_labels) - set(b.user_labels))[:5]
        only_b = sorted(set(b.user_labels) - set(a.user_labels))[:5]
        raise DataError(f"user-set mismatch (a-only {only_a}, b-only {only_b})")
    users = sorted(a.user_labels)
    pred = [a.user_labels[u] for u in users]
    true = [b.user_labels[u] for u in users]
    return metrics_report(contingency(pred, true), alt_recall=alt_recall)


# ---------------------------------------------------------------------------
# the full run

def run_pipeline(config: PipelineConfig) -> dict:
    """Execute every stage and write all report files into config.out.

    Returns a small summary dict. Any stage failure is re-raised as a
    StageError naming the stage.
    """
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    with _stage("ingest"):
        if config.format == "jsonl":
            records = ingest_jsonl(config.dataset, config.field_map, config.placeholder)
        else:
            records = ingest_csv_dropping_empty(config.dataset, config.field_map)
        if not records:
            raise DataError("no usable records in the dataset")

    with _stage("sample"):
        sampled = sample_first_users(records, config.sample_n)

    with _stage("embedding"):
        ids = [r.seq for r in sampled]
        if config.embedding == "tfidf":
            emb = embed_tfidf([r.review_text for r in sampled], ids=ids)
        else:
            emb = align_embedding(load_vectors(config.vectors), ids)

    with _stage("similarity"):
        sim = cosine_similarity_matrix(emb)

    with _stage("select_k"):
        lo, hi = config.k_range
        hi = min(hi, sim.n_instances - 1)
        if hi < lo:
            raise DataError(
                f"k range {config.k_range} infeasible with {sim.n_instances} instances"
            )
        silhouette = select_k(sim, range(lo, hi + 1), config.seed)

    with _stage("cluster"):
        instance_assignment = spectral_cluster(sim, silhouette.chosen_k, config.seed)

    with _stage("assign"):
        assignment = assign_users(sampled, instance_assignment.instance_labels)

    with _stage("recommend"):
        profiles = preference_profiles(
            sampled, max_items=config.budget if config.flexible else None
        )
        groups = make_groups(assignment.user_labels, profiles)
        global_items = item_appearance_order(sampled)
        params = ScoringParams(
            budget=config.budget,
            decay_base=config.decay_base,
            decay_scale=config.decay_scale,
        )
        recommendations = recommend_for_groups(groups, global_items, config.methods, params)
        sweep_rows = sweep_table(
            groups,
            global_items,
            config.methods,
            config.sweep_budgets,
            config.sweep_items,
            config.decay_base,
            config.decay_scale,
            config.flexible,
        )

    baseline_assignment = None
    metrics = None
    method_scores = None
    if config.baseline:
        with _stage("baseline"):
            um = build_utility_matrix(sampled)
            dense = baseline_pc.predict_ratings(
                um, neighbors=config.neighbors, min_overlap=config.min_overlap
            )
            baseline_k = min(config.baseline_k, len(dense.users))
            baseline_assignment = baseline_pc.cluster_users(
                dense, k=baseline_k, seed=config.baseline_seed
            )
        with _stage("compare"):
            metrics = compare_partitions(assignment, baseline_assignment)
            baseline_groups = make_groups(baseline_assignment.user_labels, profiles)
            baseline_recs = recommend_for_groups(
                baseline_groups, global_items, config.methods, params
            )
            method_scores = {}
            for method in config.methods:
                ours = [r["group_score"] for r in recommendations if r["method"] == method]
                theirs = [r["group_score"] for r in baseline_recs if r["method"] == method]
                method_scores[method] = {
                    "text_groups": sum(ours) / len(ours),
                    "baseline_groups": sum(theirs) / len(theirs),
                }

    with _stage("write"):
        write_csv(
            out / "clusters.csv",
            ("instance_id", "user_id", "cluster"),
            (
                (r.seq, r.user_id, label)
                for r, label in zip(sampled, assignment.instance_labels)
            ),
        )
        write_csv(
            out / "users.csv",
            ("user_id", "cluster"),
            ((u, c) for u, c in assignment.user_labels.items()),
        )
        write_json(
            out / "silhouette.json",
            {"per_k": {k: v for k, v in silhouette.per_k.items()}, "chosen_k": silhouette.chosen_k},
        )
        write_json(out / "recommendations.json", recommendations)
        write_csv(out / "sweep.csv", ("method", "k", "m", "group_score"), sweep_rows)
        if baseline_assignment is not None:
            write_csv(
                out / "baseline_users.csv",
                ("user_id", "cluster", "method"),
                ((u, c, BASELINE_TAG) for u, c in baseline_assignment.user_labels.items()),
            )
            write_json(out / "metrics.json", metrics)
            write_json(out / "method_comparison.json", method_scores)

    return {
        "records": len(records),
        "sampled_records": len(sampled),
        "users": len(assignment.user_labels),
        "chosen_k": silhouette.chosen_k,
        "groups": len(groups),
        "out": str(out),
    }
