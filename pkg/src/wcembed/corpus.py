"""Corpus handling: preprocessing, vocabulary, subsampling and window pairs."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

# Preprocessing rule: lower-case, replace anything outside [a-z0-9] by a space.
_NON_LEXICAL = re.compile(r"[^a-z0-9]+")


class EmptyVocabularyError(ValueError):
    """No word survived the min-count filter."""


def preprocess(text: str) -> list[str]:
    """Lower-case, strip non-lexical characters, split on whitespace."""
    return _NON_LEXICAL.sub(" ", text.lower()).split()


class Vocabulary:
    """Dense token<->id map, ids assigned by descending raw frequency.

    Ties in frequency are broken by first occurrence in the token stream so
    builds are deterministic.
    """

    def __init__(self, words: Iterable[str], freqs: Iterable[int]):
        self.words: list[str] = list(words)
        self.freq = np.asarray(list(freqs), dtype=np.int64)
        if len(self.words) != len(self.freq):
            raise ValueError("words and freqs length mismatch")
        self.id_of: dict[str, int] = {w: i for i, w in enumerate(self.words)}

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.id_of

    @property
    def total_count(self) -> int:
        return int(self.freq.sum())

    @classmethod
    def from_tokens(cls, tokens: Iterable[str], min_count: int = 5) -> "Vocabulary":
        counts = Counter(tokens)
        kept = [(w, c) for w, c in counts.items() if c >= min_count]
        if not kept:
            raise EmptyVocabularyError(
                f"empty vocabulary: no word appears at least {min_count} times"
            )
        # Counter preserves first-occurrence order; stable sort keeps it on ties.
        kept.sort(key=lambda wc: -wc[1])
        return cls([w for w, _ in kept], [c for _, c in kept])

    def encode(self, tokens: Iterable[str]) -> np.ndarray:
        """Map tokens to ids, silently dropping out-of-vocabulary tokens."""
        ids = [self.id_of[t] for t in tokens if t in self.id_of]
        return np.asarray(ids, dtype=np.int64)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for w, c in zip(self.words, self.freq):
                fh.write(f"{w}\t{int(c)}\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        words, freqs = [], []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                w, c = line.rstrip("\n").split("\t")
                words.append(w)
                freqs.append(int(c))
        return cls(words, freqs)


def subsample(
    ids: np.ndarray, vocab: Vocabulary, t: float, rng: np.random.Generator
) -> np.ndarray:
    """Randomly drop frequent words from an encoded token stream.

    Each occurrence of word w with relative frequency f is kept independently
    with probability min(1, sqrt(t/f) + t/f).
    """
    if not 0 < t:
        raise ValueError("subsampling threshold must be positive")
    rel = vocab.freq / vocab.total_count
    keep = np.minimum(1.0, np.sqrt(t / rel) + t / rel)
    if len(ids) == 0:
        return ids
    return ids[rng.random(len(ids)) < keep[ids]]


def keep_probability(vocab: Vocabulary, t: float) -> np.ndarray:
    """Analytic per-word keep probability used by :func:`subsample`."""
    rel = vocab.freq / vocab.total_count
    return np.minimum(1.0, np.sqrt(t / rel) + t / rel)


def extract_pairs(ids: np.ndarray, window: int) -> np.ndarray:
    """Emit (center, context) pairs from a sliding window of radius `window`.

    Returns an (N, 2) int array in corpus order: for each position i, the
    neighbours j with 0 < |i - j| <= window, j ascending.
    """
    if window < 1:
        raise ValueError("window radius must be >= 1")
    ids = np.asarray(ids, dtype=np.int64)
    n = len(ids)
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    offsets = np.concatenate([np.arange(-window, 0), np.arange(1, window + 1)])
    j = np.arange(n)[:, None] + offsets[None, :]
    valid = (j >= 0) & (j < n)
    centers = np.repeat(ids, valid.sum(axis=1))
    contexts = ids[j[valid]]
    return np.column_stack([centers, contexts])


@dataclass
class EmpiricalDistribution:
    """Sparse joint counts over (x, y) pairs with marginals.

    Counts are floats so exact (fractional) reference distributions can be
    represented alongside integer tallies.
    """

    joint: dict[tuple[int, int], float] = field(default_factory=dict)
    n_total: float = 0.0
    marginal_x: dict[int, float] = field(default_factory=dict)
    marginal_y: dict[int, float] = field(default_factory=dict)

    @classmethod
    def from_pairs(cls, pairs: np.ndarray) -> "EmpiricalDistribution":
        dist = cls()
        for x, y in np.asarray(pairs, dtype=np.int64).reshape(-1, 2):
            dist.add(int(x), int(y), 1.0)
        return dist

    @classmethod
    def from_matrix(cls, counts: np.ndarray) -> "EmpiricalDistribution":
        dist = cls()
        counts = np.asarray(counts, dtype=float)
        for x, y in zip(*np.nonzero(counts)):
            dist.add(int(x), int(y), float(counts[x, y]))
        return dist

    def add(self, x: int, y: int, count: float = 1.0) -> None:
        self.joint[(x, y)] = self.joint.get((x, y), 0.0) + count
        self.marginal_x[x] = self.marginal_x.get(x, 0.0) + count
        self.marginal_y[y] = self.marginal_y.get(y, 0.0) + count
        self.n_total += count

    def prob(self, x: int, y: int) -> float:
        if self.n_total <= 0:
            raise ValueError("probability query on an empty distribution")
        return self.joint.get((x, y), 0.0) / self.n_total

    def matrix(self, nx: int, ny: int) -> np.ndarray:
        """Dense count matrix of shape (nx, ny)."""
        out = np.zeros((nx, ny))
        for (x, y), c in self.joint.items():
            out[x, y] = c
        return out

    def shape(self) -> tuple[int, int]:
        """Smallest (nx, ny) able to hold all observed ids."""
        if not self.joint:
            return (0, 0)
        return (
            max(x for x, _ in self.joint) + 1,
            max(y for _, y in self.joint) + 1,
        )


def tally(pairs: np.ndarray) -> EmpiricalDistribution:
    """Exact joint counts of a pair stream."""
    dist = EmpiricalDistribution()
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if len(pairs) == 0:
        return dist
    uniq, counts = np.unique(pairs, axis=0, return_counts=True)
    for (x, y), c in zip(uniq, counts):
        dist.add(int(x), int(y), float(c))
    return dist


def merge_tallies(parts: Iterable[EmpiricalDistribution]) -> EmpiricalDistribution:
    """Merge shard tallies by exact count addition."""
    out = EmpiricalDistribution()
    for part in parts:
        for (x, y), c in part.joint.items():
            out.add(x, y, c)
    return out
