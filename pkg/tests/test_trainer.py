import numpy as np
import pytest

from wcembed import corpus, trainer
from wcembed.generator import TOPOLOGIES
from wcembed.sampler import FixedNoiseSpec


def tiny_setup(n_pairs=400, V=8, seed=0):
    rng = np.random.default_rng(seed)
    vocab = corpus.Vocabulary([f"w{i}" for i in range(V)], rng.integers(1, 50, V))
    pairs = rng.integers(0, V, (n_pairs, 2))
    return vocab, pairs


def tiny_config(**kwargs):
    defaults = dict(
        dim=4, window=2, min_count=1, subsample_t=1.0, lr_classifier=0.5,
        lr_sampler=0.05, batch_size=32, epochs=2, negatives=3, n_critic=2,
        alpha=4, latent_dim=4, hidden_dim=8, seed=7, eval_every=5,
    )
    defaults.update(kwargs)
    return trainer.TrainConfig(**defaults)


class TestConfig:
    def test_defaults_valid(self):
        trainer.TrainConfig().validate()

    @pytest.mark.parametrize("key", ["dim", "epochs", "negatives", "batch_size"])
    def test_nonpositive_rejected(self, key):
        cfg = trainer.TrainConfig(**{key: 0})
        with pytest.raises(ValueError, match=f"config key {key}"):
            cfg.validate()

    def test_bad_mode(self):
        with pytest.raises(ValueError, match="mode"):
            trainer.TrainConfig(mode="fast").validate()

    def test_lr_sampler_zero_allowed(self):
        trainer.TrainConfig(lr_sampler=0.0).validate()


class TestMetricLog:
    def test_roundtrip(self, tmp_path):
        log = trainer.MetricLog()
        log.append(0, "loss", 1.5)
        log.append(10, "loss", 0.5)
        path = tmp_path / "metrics.csv"
        log.save(path)
        assert path.read_text().splitlines()[0] == "iteration,metric,value"
        loaded = trainer.MetricLog.load(path)
        assert loaded.rows == log.rows

    def test_decreasing_iteration_rejected(self):
        log = trainer.MetricLog()
        log.append(5, "loss", 1.0)
        with pytest.raises(ValueError):
            log.append(4, "loss", 1.0)


class TestLrSchedule:
    def test_linear_decay(self):
        assert trainer.lr_schedule(0, 100, 1.0) == 1.0
        assert trainer.lr_schedule(50, 100, 1.0) == pytest.approx(0.5)

    def test_floor(self):
        assert trainer.lr_schedule(100, 100, 2.0) == pytest.approx(2e-4)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            trainer.lr_schedule(101, 100, 1.0)


class TestTrainFixed:
    def test_negative_bookkeeping(self):
        vocab, pairs = tiny_setup(n_pairs=100)
        cfg = tiny_config(epochs=3, negatives=5)
        _, _, log = trainer.train_fixed(pairs, vocab, FixedNoiseSpec("uniform"), cfg)
        totals = {m: v for _, m, v in log.rows}
        assert totals["total_positives"] == 300
        assert totals["total_negatives"] == 1500

    def test_seed_determinism_bit_identical(self):
        vocab, pairs = tiny_setup()
        runs = [
            trainer.train_fixed(
                pairs, vocab, FixedNoiseSpec("unigram"), tiny_config()
            )
            for _ in range(2)
        ]
        assert np.array_equal(runs[0][0].values, runs[1][0].values)
        assert np.array_equal(runs[0][1].values, runs[1][1].values)

    def test_different_seed_differs(self):
        vocab, pairs = tiny_setup()
        a, _, _ = trainer.train_fixed(
            pairs, vocab, FixedNoiseSpec("unigram"), tiny_config(seed=1)
        )
        b, _, _ = trainer.train_fixed(
            pairs, vocab, FixedNoiseSpec("unigram"), tiny_config(seed=2)
        )
        assert not np.array_equal(a.values, b.values)

    def test_hooks_fire_on_cadence(self):
        vocab, pairs = tiny_setup(n_pairs=320)
        cfg = tiny_config(epochs=1, batch_size=32, eval_every=5)
        seen = []
        trainer.train_fixed(
            pairs, vocab, FixedNoiseSpec("uniform"), cfg,
            hooks=[lambda it, f, g, log: seen.append(it)],
        )
        assert seen == [5, 10, 10]  # cadence hits plus the final hook

    def test_loss_decreases(self):
        # mean batch loss over the first vs the last epoch must drop
        vocab, pairs = tiny_setup(n_pairs=2000, V=6, seed=3)
        # make the pair distribution non-uniform so there is signal
        pairs = np.column_stack([pairs[:, 0], (pairs[:, 0] + 1) % 6])
        from wcembed.model import batch_loss, LabeledBatch

        losses = []

        def hook(it, f, g, log):
            neg = np.random.default_rng(0).integers(0, 6, (600, 2))
            losses.append(batch_loss(f, g, LabeledBatch(pairs[:600], neg)))

        cfg = tiny_config(epochs=5, eval_every=50, lr_classifier=1.0)
        trainer.train_fixed(pairs, vocab, FixedNoiseSpec("uniform"), cfg, hooks=[hook])
        assert losses[-1] < losses[0]

    def test_performance_mode_smoke(self, monkeypatch):
        monkeypatch.setenv(trainer.THREADS_ENV, "2")
        vocab, pairs = tiny_setup(n_pairs=600)
        cfg = tiny_config(mode="performance", epochs=2)
        f, g, log = trainer.train_fixed(pairs, vocab, FixedNoiseSpec("uniform"), cfg)
        assert np.isfinite(f.values).all() and np.isfinite(g.values).all()
        totals = {m: v for _, m, v in log.rows}
        assert totals["total_positives"] == 1200


class TestTrainAdaptive:
    @pytest.mark.parametrize("topology", TOPOLOGIES)
    def test_smoke_all_topologies(self, topology):
        vocab, pairs = tiny_setup(n_pairs=200)
        f, g, net, log = trainer.train_adaptive(
            pairs, vocab, topology, tiny_config(epochs=1)
        )
        assert np.isfinite(f.values).all()
        for value in net.params.values():
            assert np.isfinite(value).all()

    def test_n_critic_logged(self):
        vocab, pairs = tiny_setup(n_pairs=100)
        _, _, _, log = trainer.train_adaptive(
            pairs, vocab, "ace", tiny_config(epochs=1, n_critic=3)
        )
        assert (0, "n_critic", 3.0) in log.rows

    def test_frozen_generator_when_lr_zero(self):
        vocab, pairs = tiny_setup(n_pairs=200)
        cfg = tiny_config(lr_sampler=0.0, epochs=1)
        _, _, net, _ = trainer.train_adaptive(pairs, vocab, "ace", cfg)
        # output layer was zero-initialized and must remain untouched
        assert np.abs(net.params["W2"]).max() == 0.0
        assert np.abs(net.params["b2"]).max() == 0.0

    def test_generator_moves_when_training(self):
        vocab, pairs = tiny_setup(n_pairs=400)
        cfg = tiny_config(lr_sampler=0.1, epochs=2)
        _, _, net, _ = trainer.train_adaptive(pairs, vocab, "ace", cfg)
        assert np.abs(net.params["W2"]).max() > 0.0

    def test_seed_determinism(self):
        vocab, pairs = tiny_setup(n_pairs=200)
        runs = [
            trainer.train_adaptive(pairs, vocab, "casgn2", tiny_config(epochs=1))
            for _ in range(2)
        ]
        assert np.array_equal(runs[0][0].values, runs[1][0].values)
        for name in runs[0][2].params:
            assert np.array_equal(runs[0][2].params[name], runs[1][2].params[name])

    def test_objective_logged_on_cadence(self):
        vocab, pairs = tiny_setup(n_pairs=640)
        cfg = tiny_config(epochs=1, batch_size=32, eval_every=4, n_critic=2)
        _, _, _, log = trainer.train_adaptive(pairs, vocab, "asgn", cfg)
        metrics = {m for _, m, _ in log.rows}
        assert {"gen_objective", "gen_entropy"} <= metrics


class TestCheckpoint:
    def test_roundtrip_fixed(self, tmp_path):
        vocab, pairs = tiny_setup(n_pairs=60)
        f, g, _ = trainer.train_fixed(
            pairs, vocab, FixedNoiseSpec("uniform"), tiny_config(epochs=1)
        )
        path = tmp_path / "ckpt.npz"
        trainer.save_checkpoint(path, vocab, f, g)
        v2, f2, g2, net2 = trainer.load_checkpoint(path)
        assert v2.words == vocab.words
        assert np.array_equal(f2.values, f.values)
        assert net2 is None

    def test_roundtrip_adaptive(self, tmp_path):
        vocab, pairs = tiny_setup(n_pairs=60)
        f, g, net, _ = trainer.train_adaptive(
            pairs, vocab, "casgn3", tiny_config(epochs=1)
        )
        path = tmp_path / "ckpt.npz"
        trainer.save_checkpoint(path, vocab, f, g, net)
        _, _, _, net2 = trainer.load_checkpoint(path)
        assert net2.topology == "casgn3"
        assert set(net2.params) == set(net.params)
        for name in net.params:
            assert np.array_equal(net2.params[name], net.params[name])

    def test_version_mismatch(self, tmp_path):
        vocab, pairs = tiny_setup(n_pairs=60)
        f, g, _ = trainer.train_fixed(
            pairs, vocab, FixedNoiseSpec("uniform"), tiny_config(epochs=1)
        )
        path = tmp_path / "ckpt.npz"
        trainer.save_checkpoint(path, vocab, f, g)
        data = dict(np.load(path, allow_pickle=True))
        data["version"] = np.array(99)
        np.savez(path, **data)
        with pytest.raises(ValueError, match="version 99"):
            trainer.load_checkpoint(path)
