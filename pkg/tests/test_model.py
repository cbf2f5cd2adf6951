import math

import numpy as np
import pytest
from scipy.special import expit as sigmoid

from wcembed.corpus import Vocabulary
from wcembed.model import (
    EmbeddingParseError,
    EmbeddingTable,
    LabeledBatch,
    batch_gradients,
    batch_loss,
    export_embeddings,
    init_tables,
    load_embeddings,
    score,
    sgd_apply,
)


def tables_from(f_vals, g_vals):
    return EmbeddingTable(np.asarray(f_vals, float)), EmbeddingTable(
        np.asarray(g_vals, float)
    )


class TestScore:
    def test_zero_vector(self):
        f, g = tables_from([[0.0, 0.0]], [[3.0, 4.0]])
        assert score(f, g, 0, 0) == 0.0
        assert sigmoid(score(f, g, 0, 0)) == 0.5

    def test_inner_product(self):
        f, g = tables_from([[1.0, 0.0], [1.0, 2.0]], [[2.0, 0.0], [3.0, -1.0]])
        assert score(f, g, 0, 0) == 2.0
        assert score(f, g, 1, 1) == 1.0

    def test_dim_mismatch(self):
        f = EmbeddingTable(np.zeros((2, 3)))
        g = EmbeddingTable(np.zeros((2, 4)))
        with pytest.raises(ValueError):
            score(f, g, 0, 0)


class TestLoss:
    def test_single_positive_at_zero(self):
        f, g = tables_from([[0.0]], [[1.0]])
        batch = LabeledBatch(np.array([[0, 0]]), np.empty((0, 2)))
        assert batch_loss(f, g, batch) == pytest.approx(math.log(2), abs=1e-12)

    def test_saturated_positive_and_zero_negative(self):
        f, g = tables_from([[30.0], [0.0]], [[1.0], [1.0]])
        pos_only = LabeledBatch(np.array([[0, 0]]), np.empty((0, 2)))
        assert batch_loss(f, g, pos_only) < 1e-12
        both = LabeledBatch(np.array([[0, 0]]), np.array([[1, 1]]))
        assert batch_loss(f, g, both) == pytest.approx(math.log(2), abs=1e-12)

    def test_matches_unstabilized_reference(self):
        rng = np.random.default_rng(8)
        f = EmbeddingTable(rng.normal(0, 1, (6, 4)))
        g = EmbeddingTable(rng.normal(0, 1, (6, 4)))
        batch = LabeledBatch(rng.integers(0, 6, (3, 2)), rng.integers(0, 6, (2, 2)))
        # independent oracle: direct formula without the softplus rewrite
        ref = 0.0
        for x, y in batch.positives:
            ref -= math.log(1 / (1 + math.exp(-score(f, g, x, y))))
        for x, y in batch.negatives:
            ref -= math.log(1 / (1 + math.exp(score(f, g, x, y))))
        assert batch_loss(f, g, batch) == pytest.approx(ref, abs=1e-9)

    def test_empty_batch_raises(self):
        f, g = tables_from([[0.0]], [[0.0]])
        with pytest.raises(ValueError):
            batch_loss(f, g, LabeledBatch(np.empty((0, 2)), np.empty((0, 2))))

    def test_positive_negative_symmetry(self):
        # loss of a positive at score s equals loss of a negative at -s
        for s in (-3.0, -0.5, 0.0, 1.7, 12.0):
            f, g = tables_from([[s]], [[1.0]])
            as_pos = batch_loss(f, g, LabeledBatch(np.array([[0, 0]]), np.empty((0, 2))))
            f2, g2 = tables_from([[-s]], [[1.0]])
            as_neg = batch_loss(
                f2, g2, LabeledBatch(np.empty((0, 2)), np.array([[0, 0]]))
            )
            assert as_pos == pytest.approx(as_neg, abs=1e-12)


def numeric_gradient(f, g, batch, rows, table, h=1e-5):
    grads = np.zeros((len(rows), f.dim))
    values = table.values
    for i, row in enumerate(rows):
        for j in range(f.dim):
            old = values[row, j]
            values[row, j] = old + h
            up = batch_loss(f, g, batch)
            values[row, j] = old - h
            down = batch_loss(f, g, batch)
            values[row, j] = old
            grads[i, j] = (up - down) / (2 * h)
    return grads


class TestGradients:
    def test_positive_pair_coefficient(self):
        f, g = tables_from([[0.0, 0.0]], [[1.0, 0.0]])
        grads = batch_gradients(f, g, LabeledBatch(np.array([[0, 0]]), np.empty((0, 2))))
        assert grads.f_vals[0] == pytest.approx([-0.5, 0.0])

    @pytest.mark.parametrize("dim", [2, 10, 50])
    @pytest.mark.parametrize("seed", [0, 1])
    def test_matches_finite_differences(self, dim, seed):
        rng = np.random.default_rng(seed)
        f = EmbeddingTable(rng.normal(0, 1, (8, dim)))
        g = EmbeddingTable(rng.normal(0, 1, (8, dim)))
        batch = LabeledBatch(rng.integers(0, 8, (4, 2)), rng.integers(0, 8, (6, 2)))
        grads = batch_gradients(f, g, batch)
        num_f = numeric_gradient(f, g, batch, grads.f_rows, f)
        num_g = numeric_gradient(f, g, batch, grads.g_rows, g)
        for got, num in ((grads.f_vals, num_f), (grads.g_vals, num_g)):
            denom = np.maximum(np.abs(num), 1e-3)
            assert (np.abs(got - num) / denom).max() < 1e-4

    def test_aggregate_matches_per_cell_derivative(self):
        # summing per-pair score-gradients grouped by (x, y) must equal
        # sigma(s) (N- Q - exp(-s) N+ P) per cell
        rng = np.random.default_rng(4)
        f = EmbeddingTable(rng.normal(0, 0.5, (5, 3)))
        g = EmbeddingTable(rng.normal(0, 0.5, (5, 3)))
        pos = rng.integers(0, 5, (40, 2))
        neg = rng.integers(0, 5, (80, 2))
        n_plus, n_minus = len(pos), len(neg)

        cells = {}
        for x, y in pos:
            cells.setdefault((int(x), int(y)), [0, 0])[0] += 1
        for x, y in neg:
            cells.setdefault((int(x), int(y)), [0, 0])[1] += 1
        for (x, y), (cp, cn) in cells.items():
            s = score(f, g, x, y)
            summed = cp * (sigmoid(s) - 1) + cn * sigmoid(s)
            p_tilde = cp / n_plus
            q_tilde = cn / n_minus
            lemma = sigmoid(s) * (n_minus * q_tilde - math.exp(-s) * n_plus * p_tilde)
            assert summed == pytest.approx(lemma, abs=1e-8)


class TestSgdApply:
    def test_zero_gradient_no_change(self):
        rng = np.random.default_rng(0)
        f, g = init_tables(3, 2, rng)
        before = f.values.copy()
        grads = batch_gradients(
            f, g, LabeledBatch(np.array([[0, 0]]), np.empty((0, 2)))
        )
        grads.f_vals[:] = 0.0
        grads.g_vals[:] = 0.0
        sgd_apply(f, g, grads, lr=1.0)
        assert (f.values == before).all()

    def test_row_zeroed_when_grad_equals_row(self):
        f, g = tables_from([[2.0, -1.0]], [[0.0, 0.0]])
        grads = batch_gradients(f, g, LabeledBatch(np.array([[0, 0]]), np.empty((0, 2))))
        grads.f_vals = f.values[grads.f_rows].copy()
        sgd_apply(f, g, grads, lr=1.0)
        assert (f.values[0] == 0.0).all()

    def test_linearity(self):
        rng = np.random.default_rng(2)
        f1, g1 = init_tables(4, 3, rng)
        f2, g2 = EmbeddingTable(f1.values.copy()), EmbeddingTable(g1.values.copy())
        batch = LabeledBatch(np.array([[0, 1], [2, 3]]), np.array([[0, 2]]))
        grads = batch_gradients(f1, g1, batch)
        sgd_apply(f1, g1, grads, lr=0.1)
        sgd_apply(f1, g1, grads, lr=0.1)
        doubled = batch_gradients(f2, g2, batch)
        doubled.f_vals *= 2
        doubled.g_vals *= 2
        sgd_apply(f2, g2, doubled, lr=0.1)
        assert np.allclose(f1.values, f2.values, atol=1e-12)

    def test_non_finite_gradient_names_row(self):
        rng = np.random.default_rng(0)
        f, g = init_tables(3, 2, rng)
        grads = batch_gradients(f, g, LabeledBatch(np.array([[1, 0]]), np.empty((0, 2))))
        grads.f_vals[0, 0] = np.nan
        with pytest.raises(FloatingPointError, match="row 1"):
            sgd_apply(f, g, grads, lr=0.5)


class TestConvexity:
    def test_loss_convex_in_scores(self):
        # fixed empirical counts, loss evaluated on two random score matrices
        rng = np.random.default_rng(9)
        a = rng.integers(0, 20, (6, 6)).astype(float)
        c = rng.integers(1, 20, (6, 6)).astype(float)

        def loss(s):
            return float(
                (a * np.logaddexp(0, -s) + c * np.logaddexp(0, s)).sum()
            )

        for _ in range(100):
            s1 = rng.normal(0, 3, (6, 6))
            s2 = rng.normal(0, 3, (6, 6))
            lam = rng.uniform(0.05, 0.95)
            mix = loss(lam * s1 + (1 - lam) * s2)
            assert mix <= lam * loss(s1) + (1 - lam) * loss(s2) + 1e-9


class TestExport:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        vocab = Vocabulary(["alpha", "beta"], [5, 3])
        table = EmbeddingTable(rng.normal(0, 1, (2, 4)))
        path = tmp_path / "emb.txt"
        export_embeddings(path, vocab, table)
        words, values = load_embeddings(path)
        assert words == ["alpha", "beta"]
        assert np.abs(values - table.values).max() < 1e-6

    def test_parse_error_has_line_number(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 3\nalpha 1 2 3\nbeta 1 2\n")
        with pytest.raises(EmbeddingParseError, match=":3:"):
            load_embeddings(path)
