"""Instance embeddings and the cosine similarity matrix over them.

The built-in embedder is a deterministic TF-IDF over the corpus
vocabulary; externally produced sentence vectors (any fixed dimension,
e.g. 512) can be supplied through a JSON-lines file instead.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

_TOKEN_SPLIT = re.compile(r"[^a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on runs of non-alphanumeric characters, no stemming."""
    return [tok for tok in _TOKEN_SPLIT.split(text.lower()) if tok]


@dataclass
class EmbeddingMatrix:
    """One vector per instance; ``ids`` are the instance (record seq) ids."""

    ids: list[int]
    rows: np.ndarray

    @property
    def n_instances(self) -> int:
        return int(self.rows.shape[0])

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])


@dataclass
class SimilarityMatrix:
    """Symmetric instance-by-instance cosine affinity in [-1, 1]."""

    ids: list[int]
    values: np.ndarray

    @property
    def n_instances(self) -> int:
        return int(self.values.shape[0])


def embed_tfidf(texts: Sequence[str], ids: Sequence[int] | None = None) -> EmbeddingMatrix:
    """L2-normalized TF-IDF rows over the corpus vocabulary.

    Term frequency is the raw in-text count; idf is the smoothed form
    ln((1+m)/(1+df)) + 1. The vocabulary is sorted, so the same corpus
    always yields a bit-identical matrix. Texts with no tokens produce
    all-zero rows.
    """
    if not texts:
        raise ValueError("texts must be a non-empty list")
    if ids is None:
        ids = list(range(len(texts)))
    elif len(ids) != len(texts):
        raise ValueError("ids and texts length mismatch")

    tokenized = [tokenize(t) for t in texts]
    vocabulary = sorted({tok for toks in tokenized for tok in toks})
    if not vocabulary:
        raise DataError("no tokens found in any text; cannot build a vocabulary")
    index = {term: j for j, term in enumerate(vocabulary)}

    m = len(texts)
    counts = np.zeros((m, len(vocabulary)))
    for i, toks in enumerate(tokenized):
        for tok in toks:
            counts[i, index[tok]] += 1.0

    df = (counts > 0).sum(axis=0)
    idf = np.log((1.0 + m) / (1.0 + df)) + 1.0
    weighted = counts * idf
    norms = np.linalg.norm(weighted, axis=1)
    nonzero = norms > 0
    weighted[nonzero] /= norms[nonzero, None]
    return EmbeddingMatrix(ids=list(ids), rows=weighted)


def load_vectors(path: str | Path) -> EmbeddingMatrix:
    """Read precomputed instance vectors from a JSON-lines file.

    Each line is {"id": <int>, "vector": [floats]}. All vectors must share
    one length, be finite, and carry distinct ids; rows keep file order.
    """
    ids: list[int] = []
    rows: list[list[float]] = []
    dim: int | None = None
    try:
        with open(path, encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}: line {line_no}: invalid JSON ({exc.msg})")
                if not isinstance(obj, dict) or "id" not in obj or "vector" not in obj:
                    raise DataError(f"{path}: line {line_no}: expected {{id, vector}}")
                vector = obj["vector"]
                if not isinstance(vector, list) or not vector:
                    raise DataError(f"{path}: line {line_no}: vector must be a non-empty list")
                if dim is None:
                    dim = len(vector)
                elif len(vector) != dim:
                    raise DataError(
                        f"{path}: line {line_no}: vector length {len(vector)} != {dim}"
                    )
                ids.append(int(obj["id"]))
                rows.append([float(v) for v in vector])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}")
    if not rows:
        raise DataError(f"{path}: no vectors")
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate vector ids")
    matrix = np.array(rows, dtype=float)
    if not np.isfinite(matrix).all():
        raise DataError(f"{path}: non-finite vector values")
    return EmbeddingMatrix(ids=ids, rows=matrix)


def cosine_similarity_matrix(emb: EmbeddingMatrix) -> SimilarityMatrix:
    """Pairwise cosine similarity of the embedding rows.

    All-zero rows get similarity 0 against everything, including
    themselves, so downstream clustering never sees NaN. Each off-diagonal
    value is evaluated once and stored to both mirror cells.
    """
    rows = emb.rows
    if not np.isfinite(rows).all():
        raise ValueError("embedding contains non-finite values")
    norms = np.linalg.norm(rows, axis=1)
    nonzero = norms > 0
    normalized = np.zeros_like(rows, dtype=float)
    normalized[nonzero] = rows[nonzero] / norms[nonzero, None]

    values = normalized @ normalized.T
    np.clip(values, -1.0, 1.0, out=values)
    # mirror the upper triangle so symmetry is exact, then pin the diagonal
    upper = np.triu(values, k=1)
    values = upper + upper.T
    values[np.diag_indices_from(values)] = np.where(nonzero, 1.0, 0.0)
    return SimilarityMatrix(ids=list(emb.ids), values=values)
