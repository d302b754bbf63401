"""Command-line entry points.

Subcommands: ingest, embed, cluster, validate, recommend, baseline,
run (full pipeline), compare. A TOML-style key=value config file can
seed the full run; command-line flags override it.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .baseline import cluster_users, predict_ratings
from .clustering import ClusterAssignment, assign_users, select_k, spectral_cluster
from .consensus import METHODS, ScoringParams
from .corpus import (
    build_utility_matrix,
    ingest_csv_dropping_empty,
    ingest_jsonl,
    preference_profiles,
)
from .embedding import cosine_similarity_matrix, embed_tfidf, load_vectors
from .errors import ConfigError, DataError, NumericalError, StageError
from .pipeline import (
    BASELINE_TAG,
    PipelineConfig,
    align_embedding,
    compare_partitions,
    make_groups,
    item_appearance_order,
    read_records_jsonl,
    recommend_for_groups,
    render_json,
    run_pipeline,
    sweep_table,
    write_csv,
    write_json,
    write_records_jsonl,
)
from .validation import contingency, metrics_report


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the contract wants 1
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# value parsing helpers

def _parse_range(value) -> tuple[int, int]:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ConfigError(f"range needs two values, got {value!r}")
        return int(value[0]), int(value[1])
    text = str(value)
    for sep in (":", "-"):
        if sep in text:
            lo, _, hi = text.partition(sep)
            try:
                return int(lo), int(hi)
            except ValueError:
                raise ConfigError(f"bad range {text!r}")
    try:
        k = int(text)
    except ValueError:
        raise ConfigError(f"bad range {text!r}")
    return k, k


def _parse_int_list(value) -> tuple[int, ...]:
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    try:
        return tuple(int(part) for part in str(value).split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"bad integer list {value!r}")


def _parse_methods(value) -> tuple[str, ...]:
    if isinstance(value, (list, tuple)):
        methods = tuple(str(v) for v in value)
    else:
        methods = tuple(part.strip() for part in str(value).split(",") if part.strip())
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ConfigError(f"unknown methods {unknown}; choose from {list(METHODS)}")
    return methods


def parse_config_file(path: str) -> dict:
    """Flat key = value file; values are JSON scalars/lists or bare strings."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {line_no}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        try:
            values[key] = json.loads(value)
        except json.JSONDecodeError:
            values[key] = value.strip("\"'")
    return values


def _field_map_from(args) -> dict | None:
    overrides = {}
    for key, flag in (
        ("user", "user_field"),
        ("item", "item_field"),
        ("rating", "rating_field"),
        ("review", "review_field"),
    ):
        value = getattr(args, flag, None)
        if value:
            overrides[key] = value
    return overrides or None


def _labels_to_ints(raw: dict[str, str]) -> dict[str, int]:
    try:
        return {key: int(value) for key, value in raw.items()}
    except ValueError:
        mapping = {label: i for i, label in enumerate(sorted(set(raw.values())))}
        return {key: mapping[value] for key, value in raw.items()}


def _read_label_csv(path: str) -> dict[str, str]:
    """First two columns of a headered CSV as an id -> label map."""
    labels: dict[str, str] = {}
    try:
        with open(path, encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or len(header) < 2:
                raise DataError(f"{path}: expected a header with at least two columns")
            for row_no, row in enumerate(reader, start=2):
                if len(row) < 2:
                    raise DataError(f"{path}: row {row_no}: too few columns")
                if row[0] in labels:
                    raise DataError(f"{path}: duplicate id {row[0]!r}")
                labels[row[0]] = row[1]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    if not labels:
        raise DataError(f"{path}: no rows")
    return labels


def _ingest(args):
    field_map = _field_map_from(args)
    if args.format == "jsonl":
        return ingest_jsonl(args.dataset, field_map, args.placeholder)
    return ingest_csv_dropping_empty(args.dataset, field_map)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands

def cmd_ingest(args) -> int:
    records = _ingest(args)
    out = _outdir(args)
    write_records_jsonl(records, out / "records.jsonl")
    users = {r.user_id for r in records}
    items = {r.item_id for r in records}
    print(f"ingested {len(records)} records ({len(users)} users, {len(items)} items)")
    print(f"wrote {out / 'records.jsonl'}")
    return 0


def cmd_embed(args) -> int:
    records = read_records_jsonl(args.records)
    if not records:
        raise DataError("no records to embed")
    ids = [r.seq for r in records]
    if args.embedding == "tfidf":
        emb = embed_tfidf([r.review_text for r in records], ids=ids)
    else:
        if not args.vectors:
            raise ConfigError("--embedding vectors requires --vectors")
        emb = align_embedding(load_vectors(args.vectors), ids)
    out = _outdir(args)
    lines = [
        json.dumps({"id": i, "vector": row.tolist()}) for i, row in zip(emb.ids, emb.rows)
    ]
    (out / "vectors.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"embedded {emb.n_instances} instances at dim {emb.dim}")
    print(f"wrote {out / 'vectors.jsonl'}")
    return 0


def cmd_cluster(args) -> int:
    records = read_records_jsonl(args.records)
    emb = align_embedding(load_vectors(args.vectors), [r.seq for r in records])
    sim = cosine_similarity_matrix(emb)
    out = _outdir(args)

    if args.k:
        chosen_k = args.k
        report = None
    else:
        lo, hi = _parse_range(args.k_range)
        report = select_k(sim, range(lo, hi + 1), args.seed)
        chosen_k = report.chosen_k
        write_json(out / "silhouette.json", {"per_k": report.per_k, "chosen_k": chosen_k})

    instance_assignment = spectral_cluster(sim, chosen_k, args.seed)
    assignment = assign_users(records, instance_assignment.instance_labels)
    write_csv(
        out / "clusters.csv",
        ("instance_id", "user_id", "cluster"),
        ((r.seq, r.user_id, c) for r, c in zip(records, assignment.instance_labels)),
    )
    write_csv(
        out / "users.csv",
        ("user_id", "cluster"),
        assignment.user_labels.items(),
    )
    print(f"clustered {sim.n_instances} instances into k={chosen_k}")
    if report:
        print("silhouette per k:", {k: round(v, 4) for k, v in report.per_k.items()})
    print(f"wrote {out / 'clusters.csv'} and {out / 'users.csv'}")
    return 0


def cmd_validate(args) -> int:
    pred = _read_label_csv(args.pred)
    truth = _read_label_csv(args.truth)
    if set(pred) != set(truth):
        raise DataError("id mismatch between --pred and --truth")
    ids = sorted(pred)
    counts = contingency([pred[i] for i in ids], [truth[i] for i in ids])
    report = metrics_report(counts, alt_recall=args.alt_recall)
    text = render_json(report)
    print(text)
    if args.out:
        out = _outdir(args)
        write_json(out / "metrics.json", report)
        print(f"wrote {out / 'metrics.json'}")
    return 0


def cmd_recommend(args) -> int:
    records = read_records_jsonl(args.records)
    user_labels = _labels_to_ints(_read_label_csv(args.users))
    methods = _parse_methods(args.methods)
    params = ScoringParams(budget=args.budget, decay_base=args.a, decay_scale=args.c)
    profiles = preference_profiles(records, max_items=args.budget if args.flexible else None)
    groups = make_groups(user_labels, profiles)
    if not groups:
        raise DataError("no groups: user labels match none of the records' users")
    global_items = item_appearance_order(records)
    reports = recommend_for_groups(groups, global_items, methods, params)
    rows = sweep_table(
        groups,
        global_items,
        methods,
        _parse_int_list(args.sweep_budgets),
        _parse_int_list(args.sweep_items),
        args.a,
        args.c,
        args.flexible,
    )
    out = _outdir(args)
    write_json(out / "recommendations.json", reports)
    write_csv(out / "sweep.csv", ("method", "k", "m", "group_score"), rows)
    for entry in reports:
        print(
            f"group {entry['group_id']} {entry['method']}: "
            f"score {entry['group_score']:.4f} items {entry['items']}"
        )
    print(f"wrote {out / 'recommendations.json'} and {out / 'sweep.csv'}")
    return 0


def cmd_baseline(args) -> int:
    records = read_records_jsonl(args.records)
    if not records:
        raise DataError("no records")
    um = build_utility_matrix(records)
    dense = predict_ratings(um, neighbors=args.neighbors, min_overlap=args.min_overlap)
    assignment = cluster_users(dense, k=args.k, seed=args.seed)
    out = _outdir(args)
    write_csv(
        out / "baseline_users.csv",
        ("user_id", "cluster", "method"),
        ((u, c, BASELINE_TAG) for u, c in assignment.user_labels.items()),
    )
    print(f"baseline grouped {len(dense.users)} users into k={args.k}")
    print(f"wrote {out / 'baseline_users.csv'}")
    return 0


def cmd_compare(args) -> int:
    a = ClusterAssignment([], _labels_to_ints(_read_label_csv(args.a_users)))
    b = ClusterAssignment([], _labels_to_ints(_read_label_csv(args.b_users)))
    report = compare_partitions(a, b, alt_recall=args.alt_recall)
    print(render_json(report))
    if args.out:
        out = _outdir(args)
        write_json(out / "metrics.json", report)
        print(f"wrote {out / 'metrics.json'}")
    return 0


_RUN_KEY_ALIASES = {"a": "decay_base", "c": "decay_scale"}
_RUN_PARSERS = {
    "k_range": _parse_range,
    "methods": _parse_methods,
    "sweep_budgets": _parse_int_list,
    "sweep_items": _parse_int_list,
    "sample_n": int,
    "budget": int,
    "baseline_k": int,
    "baseline_seed": int,
    "neighbors": int,
    "min_overlap": int,
    "seed": int,
    "decay_base": float,
    "decay_scale": float,
    "baseline": bool,
    "flexible": bool,
}


def build_run_config(args) -> PipelineConfig:
    config = PipelineConfig()
    values: dict = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for flag in (
        "dataset", "format", "placeholder", "sample_n", "embedding", "vectors",
        "k_range", "budget", "a", "c", "methods", "seed", "out",
        "baseline_k", "baseline_seed", "neighbors", "min_overlap",
        "sweep_budgets", "sweep_items",
    ):
        value = getattr(args, flag, None)
        if value is not None:
            values[flag] = value
    if args.no_baseline:
        values["baseline"] = False
    if args.flexible:
        values["flexible"] = True
    field_map = _field_map_from(args)
    if field_map:
        values["field_map"] = field_map

    for key, value in values.items():
        key = _RUN_KEY_ALIASES.get(key, key)
        if not hasattr(config, key):
            raise ConfigError(f"unknown config key {key!r}")
        parser = _RUN_PARSERS.get(key)
        try:
            setattr(config, key, parser(value) if parser else value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})")
    return config


def cmd_run(args) -> int:
    config = build_run_config(args)
    summary = run_pipeline(config)
    print(
        f"pipeline done: {summary['sampled_records']} instances, "
        f"{summary['users']} users, chosen k={summary['chosen_k']}, "
        f"{summary['groups']} group(s)"
    )
    print(f"reports in {summary['out']}")
    return 0


# ---------------------------------------------------------------------------
# argument wiring

def _add_ingest_flags(p):
    p.add_argument("--dataset", required=True, help="input review file")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--user-field", dest="user_field")
    p.add_argument("--item-field", dest="item_field")
    p.add_argument("--rating-field", dest="rating_field")
    p.add_argument("--review-field", dest="review_field")
    p.add_argument("--placeholder", default="the",
                   help="stand-in text for missing reviews (jsonl mode)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="textgrouprec",
        description="Detect user groups from review-text similarity and "
                    "generate order-aware group recommendations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse a dataset into normalized records")
    _add_ingest_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="embed record texts (tfidf or vectors file)")
    p.add_argument("--records", required=True, help="records.jsonl from ingest")
    p.add_argument("--embedding", choices=("tfidf", "vectors"), default="tfidf")
    p.add_argument("--vectors", help="JSON-lines {id, vector} file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("cluster", help="spectral-cluster embedded instances")
    p.add_argument("--records", required=True)
    p.add_argument("--vectors", required=True, help="vectors.jsonl from embed")
    p.add_argument("--k", type=int, help="fixed cluster count (skips selection)")
    p.add_argument("--k-range", dest="k_range", default="2:4")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("validate", help="pair-counting metrics of two labelings")
    p.add_argument("--pred", required=True, help="CSV with id,label columns")
    p.add_argument("--truth", required=True, help="CSV with id,label columns")
    p.add_argument("--alt-recall", dest="alt_recall", action="store_true",
                   help="recall = TP/(TP+TN) instead of TP/(TP+FN)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("recommend", help="consensus recommendations per group")
    p.add_argument("--records", required=True)
    p.add_argument("--users", required=True, help="users.csv with user_id,cluster")
    p.add_argument("--budget", type=int, default=3)
    p.add_argument("--a", type=float, default=2.0, help="score decay base")
    p.add_argument("--c", type=float, default=1.0, help="score decay scale")
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--flexible", action="store_true",
                   help="truncate preference lists to the budget")
    p.add_argument("--sweep-budgets", dest="sweep_budgets", default="3,5,7,10")
    p.add_argument("--sweep-items", dest="sweep_items", default="10,20,50")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("baseline", help="Predict & Cluster user grouping")
    p.add_argument("--records", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--neighbors", type=int, default=20)
    p.add_argument("--min-overlap", dest="min_overlap", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("compare", help="compare two user partitions")
    p.add_argument("--a-users", dest="a_users", required=True)
    p.add_argument("--b-users", dest="b_users", required=True)
    p.add_argument("--alt-recall", dest="alt_recall", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("run", help="full pipeline")
    p.add_argument("--config", help="TOML-style key=value config file")
    p.add_argument("--dataset")
    p.add_argument("--format", choices=("jsonl", "csv"))
    p.add_argument("--user-field", dest="user_field")
    p.add_argument("--item-field", dest="item_field")
    p.add_argument("--rating-field", dest="rating_field")
    p.add_argument("--review-field", dest="review_field")
    p.add_argument("--placeholder")
    p.add_argument("--sample-n", dest="sample_n", type=int)
    p.add_argument("--embedding", choices=("tfidf", "vectors"))
    p.add_argument("--vectors")
    p.add_argument("--k-range", dest="k_range")
    p.add_argument("--budget", type=int)
    p.add_argument("--a", type=float, help="score decay base")
    p.add_argument("--c", type=float, help="score decay scale")
    p.add_argument("--methods")
    p.add_argument("--flexible", action="store_true")
    p.add_argument("--no-baseline", dest="no_baseline", action="store_true")
    p.add_argument("--baseline-k", dest="baseline_k", type=int)
    p.add_argument("--baseline-seed", dest="baseline_seed", type=int)
    p.add_argument("--neighbors", type=int)
    p.add_argument("--min-overlap", dest="min_overlap", type=int)
    p.add_argument("--sweep-budgets", dest="sweep_budgets")
    p.add_argument("--sweep-items", dest="sweep_items")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # bare contract violations surface as bad parameter usage
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, NumericalError):
            return 3
        if isinstance(exc.cause, ConfigError):
            return 1
        return 2


if __name__ == "__main__":
    sys.exit(main())
