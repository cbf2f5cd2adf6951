import numpy as np
import pytest

from wcembed import corpus
from wcembed.trainer import TrainConfig

CLUSTER_SIZE = 20
CLUSTER_TOKENS = 200_000


def make_cluster_corpus(rng: np.random.Generator, n_tokens: int = CLUSTER_TOKENS):
    """Two disjoint topic blocks of 20 words each, skewed within-cluster unigram.

    Blocks of 50 tokens are drawn from one cluster at a time, so sliding
    windows almost always stay inside a cluster.
    """
    words = [f"a{i}" for i in range(CLUSTER_SIZE)] + [
        f"b{i}" for i in range(CLUSTER_SIZE)
    ]
    weights = 1.0 / np.arange(1, CLUSTER_SIZE + 1)
    weights /= weights.sum()
    tokens = []
    while len(tokens) < n_tokens:
        cluster = rng.integers(2)
        draw = rng.choice(CLUSTER_SIZE, size=50, p=weights) + CLUSTER_SIZE * cluster
        tokens.extend(words[i] for i in draw)
    return tokens[:n_tokens]


def cluster_of(word: str) -> int:
    return 0 if word.startswith("a") else 1


def separation(f_values: np.ndarray, vocab: corpus.Vocabulary) -> float:
    """Mean within-cluster cosine minus mean cross-cluster cosine."""
    labels = np.array([cluster_of(w) for w in vocab.words])
    normed = f_values / np.linalg.norm(f_values, axis=1, keepdims=True)
    sims = normed @ normed.T
    same = labels[:, None] == labels[None, :]
    np.fill_diagonal(sims, np.nan)
    return float(np.nanmean(sims[same]) - np.nanmean(sims[~same]))


@pytest.fixture(scope="session")
def cluster_corpus():
    rng = np.random.default_rng(42)
    tokens = make_cluster_corpus(rng)
    vocab = corpus.Vocabulary.from_tokens(tokens, min_count=1)
    pairs = corpus.extract_pairs(vocab.encode(tokens), window=2)
    return vocab, pairs


def cluster_train_config(k: int, **kwargs) -> TrainConfig:
    defaults = dict(
        dim=16,
        window=2,
        min_count=1,
        subsample_t=1.0,
        lr_classifier=1.0,
        lr_sampler=0.05,
        batch_size=512,
        epochs=20,
        negatives=k,
        n_critic=5,
        alpha=10,
        latent_dim=16,
        hidden_dim=64,
        seed=1,
    )
    defaults.update(kwargs)
    return TrainConfig(**defaults)
