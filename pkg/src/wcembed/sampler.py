"""Fixed categorical noise distributions and O(1) alias-method draws."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Vocabulary

KINDS = ("uniform", "unigram", "pow-unigram")


@dataclass(frozen=True)
class FixedNoiseSpec:
    """A non-adaptive noise distribution over contexts.

    kind is one of "uniform", "unigram", "pow-unigram"; the vanilla
    negative-sampling choice is pow-unigram with exponent 0.75.
    """

    kind: str
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "pow-unigram" and not 0 < self.exponent <= 1:
            raise ValueError("pow-unigram exponent must be in (0, 1]")

    @classmethod
    def parse(cls, text: str) -> "FixedNoiseSpec":
        """Parse a config string: "uniform" | "unigram" | "pow-unigram:<e>"."""
        if text.startswith("pow-unigram:"):
            return cls("pow-unigram", float(text.split(":", 1)[1]))
        if text == "pow-unigram":
            return cls("pow-unigram", 0.75)
        return cls(text)


class CategoricalSampler:
    """Vose alias table over a fixed probability vector.

    Construction is O(V); each draw is O(1).
    """

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 1 or len(probs) == 0:
            raise ValueError("probs must be a non-empty vector")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("probs must sum to 1")
        self.probs = probs
        self.prob, self.alias = _build_alias(probs)

    def draw(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draw i.i.d. word ids; scalar when size is None."""
        n = len(self.probs)
        k = rng.integers(n, size=size)
        u = rng.random(size)
        out = np.where(u < self.prob[k], k, self.alias[k])
        return out if size is not None else int(out)

    def reconstructed(self) -> np.ndarray:
        """Probabilities implied by the alias table; equals probs exactly."""
        n = len(self.probs)
        out = self.prob.copy()
        np.add.at(out, self.alias, 1.0 - self.prob)
        return out / n


def _build_alias(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(probs)
    scaled = probs * n
    prob = np.ones(n)
    alias = np.arange(n)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = (scaled[l] + scaled[s]) - 1.0
        if scaled[l] < 1.0:
            small.append(l)
        else:
            large.append(l)
    # leftovers are exactly 1 up to rounding
    for i in small + large:
        prob[i] = 1.0
        alias[i] = i
    return prob, alias


def noise_probs(vocab: Vocabulary, spec: FixedNoiseSpec) -> np.ndarray:
    freq = vocab.freq.astype(float)
    if spec.kind == "uniform":
        p = np.ones(len(vocab))
    elif spec.kind == "unigram":
        p = freq
    else:
        p = freq**spec.exponent
    return p / p.sum()


def build_fixed_sampler(vocab: Vocabulary, spec: FixedNoiseSpec) -> CategoricalSampler:
    if len(vocab) == 0:
        raise ValueError("vocabulary is empty")
    return CategoricalSampler(noise_probs(vocab, spec))


def distribution_entropy(probs: np.ndarray) -> float:
    """Shannon entropy in nats, 0 log 0 = 0."""
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())
