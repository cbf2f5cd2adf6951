"""Command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click
import numpy as np

from . import corpus as corpus_mod
from . import evaluation as eval_mod
from . import generator as gen_mod
from . import plots as plots_mod
from . import trainer as trainer_mod
from . import verify as verify_mod
from .config import ConfigError, load_run_config, parse_overrides
from .model import (
    EmbeddingParseError,
    EmbeddingTable,
    export_embeddings,
    load_embeddings,
)
from .sampler import FixedNoiseSpec, build_fixed_sampler

ADAPTIVE_TOPOLOGIES = gen_mod.TOPOLOGIES


@click.group()
def main():
    """Word-context classification embedding toolkit."""


def _fail(message: str, code: int = 1):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@main.command()
@click.argument("corpus_path", type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), required=True)
@click.option("--min-count", default=5, show_default=True)
def vocab(corpus_path, output, min_count):
    """Build a vocabulary file ("word<TAB>count", frequency-descending)."""
    tokens = corpus_mod.preprocess(Path(corpus_path).read_text(encoding="utf-8"))
    try:
        vocabulary = corpus_mod.Vocabulary.from_tokens(tokens, min_count)
    except corpus_mod.EmptyVocabularyError as exc:
        _fail(str(exc))
    vocabulary.save(output)
    click.echo(f"vocabulary: {len(vocabulary)} words, {len(tokens)} corpus tokens")


def _prepare_pairs(run_cfg, vocabulary=None):
    tokens = corpus_mod.preprocess(Path(run_cfg.corpus).read_text(encoding="utf-8"))
    if vocabulary is None:
        if run_cfg.vocab:
            vocabulary = corpus_mod.Vocabulary.load(run_cfg.vocab)
        else:
            vocabulary = corpus_mod.Vocabulary.from_tokens(
                tokens, run_cfg.train.min_count
            )
    ids = vocabulary.encode(tokens)
    rng = np.random.default_rng(run_cfg.train.seed)
    ids = corpus_mod.subsample(ids, vocabulary, run_cfg.train.subsample_t, rng)
    pairs = corpus_mod.extract_pairs(ids, run_cfg.train.window)
    return vocabulary, pairs


@main.command(context_settings={"ignore_unknown_options": True})
@click.option("--config", "config_path", type=click.Path(), required=True)
@click.argument("overrides", nargs=-1, type=click.UNPROCESSED)
def train(config_path, overrides):
    """Train embeddings; writes embeddings, metrics CSV, figures, checkpoint.

    Any config key may be overridden with trailing "--key value" pairs.
    """
    try:
        if not Path(config_path).exists():
            raise ConfigError("config", f"file not found: {config_path}")
        run_cfg = load_run_config(config_path, parse_overrides(overrides))
        run_cfg.validate()
    except ConfigError as exc:
        _fail(str(exc), code=2)

    out_dir = Path(run_cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        vocabulary, pairs = _prepare_pairs(run_cfg)
    except corpus_mod.EmptyVocabularyError as exc:
        _fail(str(exc))
    click.echo(f"vocabulary {len(vocabulary)}, positive pairs {len(pairs)}")

    noise = run_cfg.noise
    net = None
    if noise in ADAPTIVE_TOPOLOGIES:
        f, g, net, log = trainer_mod.train_adaptive(
            pairs, vocabulary, noise, run_cfg.train
        )
    else:
        try:
            spec = FixedNoiseSpec.parse(noise)
        except ValueError as exc:
            _fail(f"config key 'noise': {exc}", code=2)
        f, g, log = trainer_mod.train_fixed(pairs, vocabulary, spec, run_cfg.train)

    export_embeddings(out_dir / "embeddings.txt", vocabulary, f)
    vocabulary.save(out_dir / "vocab.txt")
    log.save(out_dir / "metrics.csv")
    trainer_mod.save_checkpoint(out_dir / "checkpoint.npz", vocabulary, f, g, net)
    figures = plots_mod.render_metric_curves(log, out_dir / "figures")
    click.echo(f"wrote {out_dir}/embeddings.txt, metrics.csv, checkpoint.npz "
               f"and {len(figures)} figure(s)")


def _load_table(path):
    try:
        words, values = load_embeddings(path)
    except (OSError, EmbeddingParseError) as exc:
        _fail(str(exc))
    vocabulary = corpus_mod.Vocabulary(words, np.ones(len(words), dtype=np.int64))
    return vocabulary, EmbeddingTable(values)


def _write_eval_rows(output, rows):
    if output:
        new = not Path(output).exists()
        with open(output, "a", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            if new:
                writer.writerow(["dataset", "metric", "value", "covered"])
            writer.writerows(rows)
    for row in rows:
        click.echo(",".join(str(v) for v in row))


@main.command("eval-similarity")
@click.argument("embeddings_path", type=click.Path(exists=True))
@click.argument("datasets", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), default=None)
def eval_similarity(embeddings_path, datasets, output):
    """Spearman correlation on one or more similarity datasets."""
    vocabulary, table = _load_table(embeddings_path)
    rows = []
    for path in datasets:
        records = eval_mod.load_similarity(path)
        try:
            rho, covered = eval_mod.spearman_similarity(table, vocabulary, records)
        except ValueError as exc:
            _fail(f"{path}: {exc}")
        rows.append([Path(path).stem, "spearman_rho", f"{rho:.6f}", covered])
    _write_eval_rows(output, rows)


@main.command("eval-analogy")
@click.argument("embeddings_path", type=click.Path(exists=True))
@click.argument("datasets", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), default=None)
def eval_analogy(embeddings_path, datasets, output):
    """Vector-offset analogy accuracy (semantic / syntactic / total)."""
    vocabulary, table = _load_table(embeddings_path)
    rows = []
    for path in datasets:
        records = eval_mod.load_analogy(path)
        sem, syn, total = eval_mod.analogy_accuracy(table, vocabulary, records)
        name = Path(path).stem
        covered = sum(
            all(w in vocabulary for w in (r.w1, r.w2, r.w3, r.w4)) for r in records
        )
        rows.append([name, "analogy_semantic", f"{sem:.6f}", covered])
        rows.append([name, "analogy_syntactic", f"{syn:.6f}", covered])
        rows.append([name, "analogy_total", f"{total:.6f}", covered])
    _write_eval_rows(output, rows)


@main.command()
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--corpus", "corpus_path", type=click.Path(exists=True), required=True)
@click.option("--noise", default="generator", show_default=True,
              help='"generator", "uniform", "unigram" or "pow-unigram:<e>"')
@click.option("--window", default=5, show_default=True)
@click.option("--max-pairs", default=100_000, show_default=True)
@click.option("--seed", default=1, show_default=True)
def jsd(checkpoint, corpus_path, noise, window, max_pairs, seed):
    """Estimate the divergence between the noise and data pair distributions."""
    vocabulary, f, g, net = trainer_mod.load_checkpoint(checkpoint)
    tokens = corpus_mod.preprocess(Path(corpus_path).read_text(encoding="utf-8"))
    ids = vocabulary.encode(tokens)
    pairs = corpus_mod.extract_pairs(ids, window)
    if len(pairs) < 10_000:
        _fail(f"need at least 10000 positive pairs, got {len(pairs)}")
    rng = np.random.default_rng(seed)
    sel = rng.choice(len(pairs), size=min(max_pairs, len(pairs)), replace=False)
    pos = pairs[sel]
    centers = pos[:, 0]
    if noise == "generator":
        if net is None:
            _fail("checkpoint holds no generator; pass --noise explicitly", code=2)
        sample = gen_mod.generate(net, f, centers, rng)
        noise_pairs = np.column_stack([centers, sample.contexts])
    else:
        sampler = build_fixed_sampler(vocabulary, FixedNoiseSpec.parse(noise))
        noise_pairs = np.column_stack([centers, sampler.draw(rng, size=len(centers))])
    try:
        estimate = eval_mod.jsd_estimate(f, g, pos, noise_pairs)
    except eval_mod.ProbeConvergenceError as exc:
        _fail(str(exc))
    click.echo(f"jsd_estimate {estimate:.6f}")


@main.command("verify-theory")
@click.option("--sizes", default="4,8,16", show_default=True)
@click.option("--seeds", default=5, show_default=True)
@click.option("--check", "checks", multiple=True,
              type=click.Choice(verify_mod.CHECK_NAMES),
              help="restrict to specific checks (default: all)")
def verify_theory(sizes, seeds, checks):
    """Run the closed-form optimality checks on a grid of random instances."""
    size_list = tuple(int(s) for s in sizes.split(","))
    selected = checks or verify_mod.CHECK_NAMES
    results = verify_mod.run_checks(selected, sizes=size_list, seeds=seeds)
    for res in results:
        click.echo(res.line())
    failed = [r for r in results if not r.passed]
    click.echo(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if failed:
        sys.exit(1)


@main.command()
@click.argument("checkpoint", type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), required=True)
def export(checkpoint, output):
    """Export word embeddings from a checkpoint to word2vec text format."""
    vocabulary, f, _g, _net = trainer_mod.load_checkpoint(checkpoint)
    export_embeddings(output, vocabulary, f)
    click.echo(f"wrote {output} ({f.rows} x {f.dim})")


@main.command()
@click.argument("metrics_csv", type=click.Path(exists=True))
@click.option("-o", "--out-dir", type=click.Path(), required=True)
def report(metrics_csv, out_dir):
    """Render one PNG curve per metric from a metrics CSV."""
    log = trainer_mod.MetricLog.load(metrics_csv)
    written = plots_mod.render_metric_curves(log, out_dir)
    for path in written:
        click.echo(str(path))


if __name__ == "__main__":
    main()
