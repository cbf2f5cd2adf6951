"""Mini-batched SGD training over positive pairs with k negatives each.

Fixed samplers train the classifier alone (minimization); adaptive
generators alternate n_critic classifier steps with one generator ascent
step, GAN style.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import generator as gen
from .corpus import Vocabulary
from .model import (
    EmbeddingTable,
    LabeledBatch,
    batch_gradients,
    init_tables,
    pair_scores,
    sgd_apply,
)
from .sampler import FixedNoiseSpec, build_fixed_sampler

THREADS_ENV = "WCEMBED_THREADS"


@dataclass
class TrainConfig:
    dim: int = 100
    window: int = 5
    min_count: int = 5
    subsample_t: float = 1e-5
    lr_classifier: float = 1.0
    lr_sampler: float = 0.05
    batch_size: int = 128
    epochs: int = 20
    negatives: int = 5  # k noise pairs per positive
    n_critic: int = 1
    alpha: float = 20000.0
    latent_dim: int = 100
    hidden_dim: int = 512
    seed: int = 1
    mode: str = "deterministic"
    eval_every: int = 10000

    def validate(self) -> None:
        positive = (
            "dim", "window", "min_count", "subsample_t", "lr_classifier",
            "batch_size", "epochs", "negatives", "n_critic", "alpha",
            "latent_dim", "hidden_dim", "eval_every",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"config key {name} must be positive")
        if self.lr_sampler < 0:
            raise ValueError("config key lr_sampler must be >= 0")
        if self.mode not in ("deterministic", "performance"):
            raise ValueError("config key mode must be deterministic or performance")


class MetricLog:
    """Append-only rows of (iteration, metric, value)."""

    def __init__(self):
        self.rows: list[tuple[int, str, float]] = []
        self._last_iter = -1

    def append(self, iteration: int, metric: str, value: float) -> None:
        if iteration < self._last_iter:
            raise ValueError("iterations must be nondecreasing")
        self._last_iter = iteration
        self.rows.append((int(iteration), metric, float(value)))

    def save(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "metric", "value"])
            writer.writerows(self.rows)

    @classmethod
    def load(cls, path: str | Path) -> "MetricLog":
        log = cls()
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader)
            for it, metric, value in reader:
                log.rows.append((int(it), metric, float(value)))
        if log.rows:
            log._last_iter = log.rows[-1][0]
        return log


def lr_schedule(step: int, total_steps: int, lr0: float) -> float:
    """Linear decay with a 1e-4 * lr0 floor."""
    if not 0 <= step <= total_steps:
        raise ValueError("step outside [0, total_steps]")
    return lr0 * max(1e-4, 1.0 - step / total_steps)


Hook = Callable[[int, EmbeddingTable, EmbeddingTable, MetricLog], None]


def _thread_count() -> int:
    return max(1, int(os.environ.get(THREADS_ENV, os.cpu_count() or 1)))


def _classifier_step(f, g, positives, neg_contexts, k, lr):
    negatives = np.column_stack(
        [np.repeat(positives[:, 0], k), neg_contexts]
    )
    batch = LabeledBatch(positives, negatives)
    # lr applies to the mean batch loss, so it stays batch-size invariant
    step = lr / (len(batch.positives) + len(batch.negatives))
    sgd_apply(f, g, batch_gradients(f, g, batch), step)
    return negatives


def train_fixed(
    positives: np.ndarray,
    vocab: Vocabulary,
    spec: FixedNoiseSpec,
    cfg: TrainConfig,
    hooks: Sequence[Hook] = (),
) -> tuple[EmbeddingTable, EmbeddingTable, MetricLog]:
    """SGD over shuffled positives with k fixed-sampler negatives per positive."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    f, g = init_tables(len(vocab), cfg.dim, rng)
    sampler = build_fixed_sampler(vocab, spec)
    log = MetricLog()
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
    n = len(positives)
    batches_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = max(1, cfg.epochs * batches_per_epoch)
    k = cfg.negatives
    it = n_pos = n_neg = 0

    if cfg.mode == "performance":
        return _train_fixed_parallel(positives, vocab, sampler, cfg, f, g, log, hooks)

    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch_pos = positives[perm[start:start + cfg.batch_size]]
            neg_y = sampler.draw(rng, size=k * len(batch_pos))
            lr = lr_schedule(it, total_steps, cfg.lr_classifier)
            _classifier_step(f, g, batch_pos, neg_y, k, lr)
            it += 1
            n_pos += len(batch_pos)
            n_neg += k * len(batch_pos)
            if it % cfg.eval_every == 0:
                for hook in hooks:
                    hook(it, f, g, log)
    log.append(it, "total_positives", n_pos)
    log.append(it, "total_negatives", n_neg)
    for hook in hooks:
        hook(it, f, g, log)
    return f, g, log


def _train_fixed_parallel(positives, vocab, sampler, cfg, f, g, log, hooks):
    """Lock-free sharded variant: workers race on shared rows (tolerated)."""
    n = len(positives)
    k = cfg.negatives
    total_steps = max(1, cfg.epochs * math.ceil(n / cfg.batch_size))
    workers = _thread_count()
    master = np.random.default_rng(cfg.seed)
    step_counter = [0]

    def run_shard(shard, worker_idx):
        rng = np.random.default_rng((cfg.seed, worker_idx))
        for start in range(0, len(shard), cfg.batch_size):
            batch_pos = shard[start:start + cfg.batch_size]
            neg_y = sampler.draw(rng, size=k * len(batch_pos))
            lr = lr_schedule(min(step_counter[0], total_steps), total_steps, cfg.lr_classifier)
            _classifier_step(f, g, batch_pos, neg_y, k, lr)
            step_counter[0] += 1  # racy, used only for the lr schedule

    n_pos = n_neg = 0
    for _ in range(cfg.epochs):
        perm = master.permutation(n)
        shards = np.array_split(positives[perm], workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(run_shard, shard, i) for i, shard in enumerate(shards)
            ]
            for fut in futures:
                fut.result()
        n_pos += n
        n_neg += k * n
    it = step_counter[0]
    log.append(it, "total_positives", n_pos)
    log.append(it, "total_negatives", n_neg)
    for hook in hooks:
        hook(it, f, g, log)
    return f, g, log


def train_adaptive(
    positives: np.ndarray,
    vocab: Vocabulary,
    topology: str,
    cfg: TrainConfig,
    hooks: Sequence[Hook] = (),
) -> tuple[EmbeddingTable, EmbeddingTable, gen.GeneratorNet, MetricLog]:
    """Alternating min-max: n_critic classifier steps, then one generator step.

    Classifier negatives are drawn from the current generator conditional;
    the generator ascends its mean reward minus the entropy penalty by
    REINFORCE with an EMA baseline.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    f, g = init_tables(len(vocab), cfg.dim, rng)
    net = gen.GeneratorNet(
        topology,
        vocab_size=len(vocab),
        embed_dim=cfg.dim,
        hidden_dim=cfg.hidden_dim,
        latent_dim=cfg.latent_dim,
        rng=rng,
    )
    log = MetricLog()
    log.append(0, "n_critic", cfg.n_critic)
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
    n = len(positives)
    total_steps = max(1, cfg.epochs * math.ceil(n / cfg.batch_size))
    k = cfg.negatives
    it = n_pos = n_neg = 0
    baseline: float | None = None
    critic_since_gen = 0
    last_sample: gen.GeneratorSampleBatch | None = None

    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            batch_pos = positives[perm[start:start + cfg.batch_size]]
            centers = np.repeat(batch_pos[:, 0], k)
            sample = gen.generate(net, f, centers, rng)
            lr = lr_schedule(it, total_steps, cfg.lr_classifier)
            _classifier_step(f, g, batch_pos, sample.contexts, k, lr)
            it += 1
            n_pos += len(batch_pos)
            n_neg += k * len(batch_pos)
            last_sample = sample
            critic_since_gen += 1
            if critic_since_gen >= cfg.n_critic:
                critic_since_gen = 0
                # reward against the freshly updated classifier
                pairs = np.column_stack([last_sample.centers, last_sample.contexts])
                rewards = gen.reward(pair_scores(f, g, pairs))
                if cfg.lr_sampler > 0:
                    baseline = gen.reinforce_step(
                        net, last_sample, rewards, baseline, cfg.lr_sampler, cfg.alpha
                    )
                if it % cfg.eval_every == 0:
                    log.append(
                        it,
                        "gen_objective",
                        gen.generator_objective(last_sample, pair_scores(f, g, pairs), cfg.alpha),
                    )
                    log.append(it, "gen_entropy", float(last_sample.entropy.mean()))
            if it % cfg.eval_every == 0:
                for hook in hooks:
                    hook(it, f, g, log)
    log.append(it, "total_positives", n_pos)
    log.append(it, "total_negatives", n_neg)
    for hook in hooks:
        hook(it, f, g, log)
    return f, g, net, log


CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    vocab: Vocabulary,
    f: EmbeddingTable,
    g: EmbeddingTable,
    net: gen.GeneratorNet | None = None,
) -> None:
    """Versioned binary checkpoint (npz); layout documented in the README."""
    arrays = {
        "version": np.array(CHECKPOINT_VERSION),
        "words": np.array(vocab.words, dtype=object),
        "freq": vocab.freq,
        "f": f.values,
        "g": g.values,
    }
    if net is not None:
        arrays["generator_topology"] = np.array(net.topology)
        arrays["generator_dims"] = np.array(
            [net.vocab_size, net.embed_dim, net.hidden_dim, net.latent_dim]
        )
        for name, value in net.params.items():
            arrays[f"generator_param_{name}"] = value
    np.savez(path, **arrays)


def load_checkpoint(path: str | Path):
    """Returns (vocab, f, g, net-or-None)."""
    data = np.load(path, allow_pickle=True)
    version = int(data["version"])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    vocab = Vocabulary([str(w) for w in data["words"]], data["freq"])
    f = EmbeddingTable(data["f"])
    g = EmbeddingTable(data["g"])
    net = None
    if "generator_topology" in data:
        v, d, h, z = (int(x) for x in data["generator_dims"])
        net = gen.GeneratorNet(
            str(data["generator_topology"]), v, d, hidden_dim=h, latent_dim=z
        )
        for key in data.files:
            if key.startswith("generator_param_"):
                net.params[key[len("generator_param_"):]] = data[key]
    return vocab, f, g, net
