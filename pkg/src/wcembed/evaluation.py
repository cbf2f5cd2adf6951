"""Intrinsic evaluation: word similarity, word analogy, noise-vs-data JSD."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit as sigmoid
from scipy.stats import spearmanr

from .corpus import Vocabulary
from .model import EmbeddingTable, log_sigmoid


@dataclass
class SimilarityRecord:
    w1: str
    w2: str
    human_score: float


@dataclass
class AnalogyRecord:
    w1: str
    w2: str
    w3: str
    w4: str
    section: str  # "semantic" or "syntactic"


def load_similarity(path: str | Path) -> list[SimilarityRecord]:
    """Lines "w1<TAB>w2<TAB>score"; '#'-prefixed header lines are skipped."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            w1, w2, score = line.split("\t")
            records.append(SimilarityRecord(w1, w2, float(score)))
    return records


def load_analogy(path: str | Path) -> list[AnalogyRecord]:
    """Google analogy format: ": section" headers, then 4 words per line.

    Sections whose name starts with "gram" are syntactic, the rest semantic
    (the usual five-semantic-section layout).
    """
    records = []
    section = "semantic"
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith(":"):
                name = line[1:].strip()
                section = "syntactic" if name.startswith("gram") else "semantic"
                continue
            words = line.split()
            if len(words) != 4:
                continue
            records.append(AnalogyRecord(*words, section=section))
    return records


def spearman_similarity(
    f: EmbeddingTable, vocab: Vocabulary, records: list[SimilarityRecord]
) -> tuple[float, int]:
    """Spearman rho between cosine similarities and human scores.

    Records with any out-of-vocabulary word are skipped; the covered count is
    returned alongside rho. Ties get average ranks.
    """
    model_scores, human_scores = [], []
    for rec in records:
        if rec.w1 not in vocab or rec.w2 not in vocab:
            continue
        v1 = f.values[vocab.id_of[rec.w1]]
        v2 = f.values[vocab.id_of[rec.w2]]
        model_scores.append(_cosine(v1, v2))
        human_scores.append(rec.human_score)
    if len(model_scores) < 2:
        raise ValueError("fewer than 2 covered similarity records")
    rho = spearmanr(model_scores, human_scores).statistic
    return float(rho), len(model_scores)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(a @ b / (na * nb))


def analogy_accuracy(
    f: EmbeddingTable, vocab: Vocabulary, records: list[AnalogyRecord]
) -> tuple[float, float, float]:
    """Vector-offset analogy accuracy: (semantic, syntactic, total).

    Prediction is the argmax cosine between f(w2) - f(w1) + f(w3) and every
    vocabulary vector excluding the three query words.
    """
    norms = np.linalg.norm(f.values, axis=1)
    normed = f.values / np.where(norms == 0, 1.0, norms)[:, None]
    hits = {"semantic": 0, "syntactic": 0}
    totals = {"semantic": 0, "syntactic": 0}
    for rec in records:
        ids = []
        covered = True
        for w in (rec.w1, rec.w2, rec.w3, rec.w4):
            if w not in vocab:
                covered = False
                break
            ids.append(vocab.id_of[w])
        if not covered:
            continue
        i1, i2, i3, i4 = ids
        target = f.values[i2] - f.values[i1] + f.values[i3]
        tn = np.linalg.norm(target)
        sims = normed @ (target / (tn if tn > 0 else 1.0))
        sims[[i1, i2, i3]] = -np.inf
        totals[rec.section] += 1
        if int(np.argmax(sims)) == i4:
            hits[rec.section] += 1
    def acc(kind):
        return hits[kind] / totals[kind] if totals[kind] else 0.0
    total = sum(totals.values())
    total_acc = sum(hits.values()) / total if total else 0.0
    return acc("semantic"), acc("syntactic"), total_acc


class ProbeConvergenceError(RuntimeError):
    pass


def jsd_estimate(
    f: EmbeddingTable,
    g: EmbeddingTable,
    pos_pairs: np.ndarray,
    noise_pairs: np.ndarray,
    lr: float = 0.05,
    max_iter: int = 4000,
    rel_tol: float = 1e-7,
) -> float:
    """Jensen-Shannon divergence estimate between data and noise pairs.

    Trains a fresh bilinear probe D(x,y) = sigma(f(x)^T W g(y) + b) over the
    frozen embeddings to maximize E_P[log D] + E_Q[log(1-D)]; the estimate is
    0.5 * V(D*) + log 2, which is 0 for identical distributions and log 2 for
    disjoint ones.
    """
    pos = np.asarray(pos_pairs, dtype=np.int64).reshape(-1, 2)
    neg = np.asarray(noise_pairs, dtype=np.int64).reshape(-1, 2)
    fp, gp = f.values[pos[:, 0]], g.values[pos[:, 1]]
    fn, gn = f.values[neg[:, 0]], g.values[neg[:, 1]]
    d = f.dim
    W = np.zeros((d, d))
    b = 0.0
    mW = np.zeros_like(W); vW = np.zeros_like(W)
    mb = vb = 0.0
    b1, b2, eps = 0.9, 0.999, 1e-8
    prev = -np.inf
    value = None
    for it in range(1, max_iter + 1):
        lp = np.einsum("ij,jk,ik->i", fp, W, gp) + b
        ln = np.einsum("ij,jk,ik->i", fn, W, gn) + b
        value = float(log_sigmoid(lp).mean() + log_sigmoid(-ln).mean())
        # gradient of V wrt logits
        cp = (1.0 - sigmoid(lp)) / len(lp)
        cn = -sigmoid(ln) / len(ln)
        gW = np.einsum("i,ij,ik->jk", cp, fp, gp) + np.einsum("i,ij,ik->jk", cn, fn, gn)
        gb = float(cp.sum() + cn.sum())
        mW = b1 * mW + (1 - b1) * gW
        vW = b2 * vW + (1 - b2) * gW * gW
        W += lr * (mW / (1 - b1**it)) / (np.sqrt(vW / (1 - b2**it)) + eps)
        mb = b1 * mb + (1 - b1) * gb
        vb = b2 * vb + (1 - b2) * gb * gb
        b += lr * (mb / (1 - b1**it)) / (np.sqrt(vb / (1 - b2**it)) + eps)
        if it % 100 == 0:
            if abs(value - prev) < rel_tol * max(1.0, abs(value)):
                return 0.5 * value + np.log(2.0)
            prev = value
    # flat objective near the boundary still counts as converged
    if prev > -np.inf and abs(value - prev) < 100 * rel_tol * max(1.0, abs(value)):
        return 0.5 * value + np.log(2.0)
    raise ProbeConvergenceError(
        f"JSD probe did not converge; final objective {value:.6f}"
    )
