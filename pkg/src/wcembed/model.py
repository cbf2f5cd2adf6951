"""Embedding tables, the pair scorer, classification loss and its gradients."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit as sigmoid

from .corpus import Vocabulary


@dataclass
class EmbeddingTable:
    """A dense V x d matrix of real-valued rows."""

    values: np.ndarray

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.values.copy())


def init_tables(
    vocab_size: int, dim: int, rng: np.random.Generator
) -> tuple[EmbeddingTable, EmbeddingTable]:
    """Word rows uniform in [-0.5/d, 0.5/d]; context rows zero."""
    f = EmbeddingTable(rng.uniform(-0.5 / dim, 0.5 / dim, size=(vocab_size, dim)))
    g = EmbeddingTable(np.zeros((vocab_size, dim)))
    return f, g


@dataclass
class LabeledBatch:
    """Positive pairs (data) and negative pairs (noise), as (n, 2) id arrays."""

    positives: np.ndarray
    negatives: np.ndarray

    def __post_init__(self):
        self.positives = np.asarray(self.positives, dtype=np.int64).reshape(-1, 2)
        self.negatives = np.asarray(self.negatives, dtype=np.int64).reshape(-1, 2)


def log_sigmoid(s: np.ndarray) -> np.ndarray:
    # log sigma(s) = -softplus(-s), stable for large |s|
    return -np.logaddexp(0.0, -np.asarray(s, dtype=float))


def score(f: EmbeddingTable, g: EmbeddingTable, x: int, y: int) -> float:
    if f.dim != g.dim:
        raise ValueError("embedding tables must share dim")
    return float(f.values[x] @ g.values[y])


def pair_scores(f: EmbeddingTable, g: EmbeddingTable, pairs: np.ndarray) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.einsum("ij,ij->i", f.values[pairs[:, 0]], g.values[pairs[:, 1]])


def batch_loss(f: EmbeddingTable, g: EmbeddingTable, batch: LabeledBatch) -> float:
    """Cross-entropy: -sum log sigma(s) over positives -sum log sigma(-s) over negatives."""
    if len(batch.positives) + len(batch.negatives) == 0:
        raise ValueError("empty batch")
    loss = 0.0
    if len(batch.positives):
        loss -= log_sigmoid(pair_scores(f, g, batch.positives)).sum()
    if len(batch.negatives):
        loss -= log_sigmoid(-pair_scores(f, g, batch.negatives)).sum()
    return float(loss)


@dataclass
class SparseGrads:
    """Per-row gradient updates for the touched rows of f and g."""

    f_rows: np.ndarray
    f_vals: np.ndarray
    g_rows: np.ndarray
    g_vals: np.ndarray


def batch_gradients(
    f: EmbeddingTable, g: EmbeddingTable, batch: LabeledBatch
) -> SparseGrads:
    """Analytic gradients of :func:`batch_loss` for the touched rows.

    A positive pair contributes (sigma(s) - 1) and a negative pair sigma(s)
    as the coefficient multiplying the opposite table's row. Duplicate rows
    inside the batch accumulate before application.
    """
    if len(batch.positives) + len(batch.negatives) == 0:
        raise ValueError("empty batch")
    pairs = np.concatenate([batch.positives, batch.negatives])
    labels = np.concatenate(
        [np.ones(len(batch.positives)), np.zeros(len(batch.negatives))]
    )
    s = pair_scores(f, g, pairs)
    coef = sigmoid(s) - labels

    xs, ys = pairs[:, 0], pairs[:, 1]
    f_rows, f_inv = np.unique(xs, return_inverse=True)
    g_rows, g_inv = np.unique(ys, return_inverse=True)
    f_vals = np.zeros((len(f_rows), f.dim))
    g_vals = np.zeros((len(g_rows), g.dim))
    np.add.at(f_vals, f_inv, coef[:, None] * g.values[ys])
    np.add.at(g_vals, g_inv, coef[:, None] * f.values[xs])
    return SparseGrads(f_rows, f_vals, g_rows, g_vals)


def sgd_apply(
    f: EmbeddingTable, g: EmbeddingTable, grads: SparseGrads, lr: float
) -> None:
    """In-place SGD step on the touched rows."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    for rows, vals, name in (
        (grads.f_rows, grads.f_vals, "f"),
        (grads.g_rows, grads.g_vals, "g"),
    ):
        bad = ~np.isfinite(vals).all(axis=1)
        if bad.any():
            row = int(rows[np.argmax(bad)])
            raise FloatingPointError(f"non-finite gradient for {name} row {row}")
    f.values[grads.f_rows] -= lr * grads.f_vals
    g.values[grads.g_rows] -= lr * grads.g_vals


def export_embeddings(
    path: str | Path, vocab: Vocabulary, table: EmbeddingTable
) -> None:
    """word2vec text format: header "V d", then "word v1 ... vd" per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{table.rows} {table.dim}\n")
        for i, word in enumerate(vocab.words):
            vec = " ".join(f"{v:.8g}" for v in table.values[i])
            fh.write(f"{word} {vec}\n")


class EmbeddingParseError(ValueError):
    pass


def load_embeddings(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingParseError(f"{path}:1: malformed header")
        try:
            rows, dim = int(header[0]), int(header[1])
        except ValueError as exc:
            raise EmbeddingParseError(f"{path}:1: malformed header") from exc
        words: list[str] = []
        values = np.zeros((rows, dim))
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise EmbeddingParseError(
                    f"{path}:{lineno}: expected {dim + 1} fields, got {len(parts)}"
                )
            i = lineno - 2
            if i >= rows:
                raise EmbeddingParseError(f"{path}:{lineno}: more rows than header")
            words.append(parts[0])
            try:
                values[i] = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise EmbeddingParseError(f"{path}:{lineno}: bad float") from exc
    if len(words) != rows:
        raise EmbeddingParseError(f"{path}: header promised {rows} rows, got {len(words)}")
    return words, values
