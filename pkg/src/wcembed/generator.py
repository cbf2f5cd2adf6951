"""Adaptive noise generators: latent-variable MLPs over the context vocabulary.

Five topologies are supported, selected by a config string:

    asgn    z ~ N(0, I)                      -> MLP -> softmax   (ignores x)
    casgn1  concat(f(x), z), z ~ N(0, I)     -> MLP -> softmax
    casgn2  z ~ N(mu_x, diag sigma_x^2)      -> Linear -> softmax
    casgn3  concat(f(x), z), z as in casgn2  -> MLP -> softmax
    ace     f(x)                             -> MLP -> softmax   (no latent)

All forward/backward passes are explicit numpy; the categorical draw is
non-differentiable and trained with a score-function (REINFORCE) estimator,
while the Gaussian latent is reparameterized (z = mu + sigma * eps) so its
parameters receive pathwise gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit as sigmoid

from .model import EmbeddingTable

TOPOLOGIES = ("asgn", "casgn1", "casgn2", "casgn3", "ace")

# softplus(SIGMA_BIAS_INIT) == 1, so Gaussian scales start at 1
SIGMA_BIAS_INIT = float(np.log(np.e - 1.0))


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


class GeneratorNet:
    """Parameter container for one generator topology."""

    def __init__(
        self,
        topology: str,
        vocab_size: int,
        embed_dim: int,
        hidden_dim: int = 512,
        latent_dim: int = 100,
        rng: np.random.Generator | None = None,
    ):
        if topology not in TOPOLOGIES:
            raise ValueError(f"unknown generator topology {topology!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.topology = topology
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.hidden_dim = hidden_dim
        self.latent_dim = latent_dim
        self.params: dict[str, np.ndarray] = {}

        def hidden(name, out_dim, in_dim):
            self.params[f"W{name}"] = rng.normal(0.0, 1.0 / np.sqrt(in_dim), (out_dim, in_dim))
            self.params[f"b{name}"] = np.zeros(out_dim)

        def zero_out(name, out_dim, in_dim):
            # zero-initialized output layer -> uniform initial categorical
            self.params[f"W{name}"] = np.zeros((out_dim, in_dim))
            self.params[f"b{name}"] = np.zeros(out_dim)

        if topology == "asgn":
            hidden("1", hidden_dim, latent_dim)
            zero_out("2", vocab_size, hidden_dim)
        elif topology == "casgn1":
            hidden("1", hidden_dim, embed_dim + latent_dim)
            zero_out("2", vocab_size, hidden_dim)
        elif topology == "ace":
            hidden("1", hidden_dim, embed_dim)
            zero_out("2", vocab_size, hidden_dim)
        elif topology in ("casgn2", "casgn3"):
            hidden("s", hidden_dim, embed_dim)
            hidden("m", latent_dim, hidden_dim)
            hidden("v", latent_dim, hidden_dim)
            self.params["bv"] = np.full(latent_dim, SIGMA_BIAS_INIT)
            if topology == "casgn2":
                zero_out("o", vocab_size, latent_dim)
            else:
                hidden("1", hidden_dim, embed_dim + latent_dim)
                zero_out("2", vocab_size, hidden_dim)

    @property
    def uses_latent(self) -> bool:
        return self.topology != "ace"

    @property
    def uses_center(self) -> bool:
        return self.topology != "asgn"

    def copy(self) -> "GeneratorNet":
        clone = GeneratorNet.__new__(GeneratorNet)
        clone.__dict__.update(
            {k: v for k, v in self.__dict__.items() if k != "params"}
        )
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone


@dataclass
class GeneratorSampleBatch:
    """One forward pass: sampled contexts with everything needed for backprop."""

    centers: np.ndarray
    contexts: np.ndarray
    log_prob: np.ndarray
    entropy: np.ndarray
    probs: np.ndarray
    eps: np.ndarray | None
    z: np.ndarray | None
    cache: dict


def _forward(
    net: GeneratorNet, f_table: EmbeddingTable | None, centers: np.ndarray,
    eps: np.ndarray | None,
) -> tuple[np.ndarray, dict]:
    """Logits and the activation cache for one batch."""
    p = net.params
    cache: dict = {}
    if net.uses_center:
        if f_table is None:
            raise ValueError(f"{net.topology} requires the word embedding table")
        if f_table.dim != net.embed_dim:
            raise ValueError(
                f"embedding dim {f_table.dim} != generator embed_dim {net.embed_dim}"
            )
        fx = f_table.values[centers]
        cache["fx"] = fx

    if net.topology in ("casgn2", "casgn3"):
        fx = cache["fx"]
        s1 = fx @ p["Ws"].T + p["bs"]
        hs = np.maximum(s1, 0.0)
        mu = hs @ p["Wm"].T + p["bm"]
        sv = hs @ p["Wv"].T + p["bv"]
        sigma = softplus(sv)
        z = mu + sigma * eps
        cache.update(s1=s1, hs=hs, mu=mu, sv=sv, sigma=sigma, z=z)
        if net.topology == "casgn2":
            logits = z @ p["Wo"].T + p["bo"]
            return logits, cache
        inp = np.concatenate([fx, z], axis=1)
    elif net.topology == "asgn":
        inp = eps  # the latent draw is the input
        cache["z"] = eps
    elif net.topology == "casgn1":
        inp = np.concatenate([cache["fx"], eps], axis=1)
        cache["z"] = eps
    else:  # ace
        inp = cache["fx"]

    a1 = inp @ p["W1"].T + p["b1"]
    h = np.maximum(a1, 0.0)
    logits = h @ p["W2"].T + p["b2"]
    cache.update(inp=inp, a1=a1, h=h)
    return logits, cache


def generate(
    net: GeneratorNet,
    f_table: EmbeddingTable | None,
    centers: np.ndarray,
    rng: np.random.Generator,
    forced_contexts: np.ndarray | None = None,
    forced_eps: np.ndarray | None = None,
) -> GeneratorSampleBatch:
    """Sample one context per center from the generator's conditional.

    `forced_contexts` / `forced_eps` pin the stochastic draws; used by the
    enumeration and finite-difference test oracles.
    """
    centers = np.asarray(centers, dtype=np.int64)
    n = len(centers)
    eps = None
    if net.uses_latent:
        eps = forced_eps if forced_eps is not None else rng.standard_normal((n, net.latent_dim))
    logits, cache = _forward(net, f_table, centers, eps)
    logp = log_softmax(logits)
    probs = np.exp(logp)
    if forced_contexts is not None:
        contexts = np.asarray(forced_contexts, dtype=np.int64)
    else:
        cdf = np.cumsum(probs, axis=1)
        u = rng.random(n)
        contexts = np.minimum((cdf < u[:, None]).sum(axis=1), net.vocab_size - 1)
    entropy = -(probs * logp).sum(axis=1)
    log_prob = logp[np.arange(n), contexts]
    return GeneratorSampleBatch(
        centers=centers,
        contexts=contexts,
        log_prob=log_prob,
        entropy=entropy,
        probs=probs,
        eps=eps,
        z=cache.get("z"),
        cache=cache,
    )


def reward(scores: np.ndarray) -> np.ndarray:
    """Per-example generator reward: -log sigma(-s) = softplus(s)."""
    return softplus(np.asarray(scores, dtype=float))


def entropy_regularizer(entropy: np.ndarray | float, alpha: float) -> np.ndarray | float:
    """Penalty max(0, log(alpha) - H), active when the conditional is too sharp."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    return np.maximum(0.0, np.log(alpha) - entropy)


def generator_objective(
    sample: GeneratorSampleBatch, scores: np.ndarray, alpha: float
) -> float:
    """Mean reward minus mean entropy penalty; the generator ascends this."""
    r = reward(scores)
    pen = entropy_regularizer(sample.entropy, alpha)
    return float(r.mean() - np.mean(pen))


def reinforce_gradients(
    net: GeneratorNet,
    sample: GeneratorSampleBatch,
    rewards: np.ndarray,
    baseline: float,
    alpha: float,
) -> dict[str, np.ndarray]:
    """Parameter gradients of the ascent objective for one sampled batch.

    The categorical draw contributes (r - b) * grad log G(y | x, z); the
    entropy penalty and (for Gaussian topologies) the latent path contribute
    exact pathwise gradients through the same logits.
    """
    p = net.params
    cache = sample.cache
    n, V = sample.probs.shape
    probs = sample.probs
    w = (np.asarray(rewards, dtype=float) - baseline) / n

    # d objective / d logits
    dlogits = -w[:, None] * probs
    dlogits[np.arange(n), sample.contexts] += w
    gate = (sample.entropy < np.log(alpha)).astype(float) / n
    logp = np.log(np.clip(probs, 1e-300, None))
    dlogits += gate[:, None] * (-probs * (logp + sample.entropy[:, None]))

    grads: dict[str, np.ndarray] = {}

    def backprop_mlp(dout):
        grads["W2"] = dout.T @ cache["h"]
        grads["b2"] = dout.sum(axis=0)
        dh = dout @ p["W2"]
        da1 = dh * (cache["a1"] > 0)
        grads["W1"] = da1.T @ cache["inp"]
        grads["b1"] = da1.sum(axis=0)
        return da1 @ p["W1"]

    def backprop_gaussian(dz):
        # z = mu + softplus(sv) * eps; f(x) is held constant
        dmu = dz
        dsv = dz * sample.eps * sigmoid(cache["sv"])
        grads["Wm"] = dmu.T @ cache["hs"]
        grads["bm"] = dmu.sum(axis=0)
        grads["Wv"] = dsv.T @ cache["hs"]
        grads["bv"] = dsv.sum(axis=0)
        dhs = dmu @ p["Wm"] + dsv @ p["Wv"]
        ds1 = dhs * (cache["s1"] > 0)
        grads["Ws"] = ds1.T @ cache["fx"]
        grads["bs"] = ds1.sum(axis=0)

    if net.topology == "casgn2":
        grads["Wo"] = dlogits.T @ cache["z"]
        grads["bo"] = dlogits.sum(axis=0)
        backprop_gaussian(dlogits @ p["Wo"])
    elif net.topology == "casgn3":
        dinp = backprop_mlp(dlogits)
        backprop_gaussian(dinp[:, net.embed_dim:])
    else:
        # asgn/casgn1: latent has no learnable parameters; ace: no latent
        backprop_mlp(dlogits)

    for name, grad in grads.items():
        if not np.isfinite(grad).all():
            raise FloatingPointError(f"non-finite generator gradient for {name}")
    return grads


def reinforce_step(
    net: GeneratorNet,
    sample: GeneratorSampleBatch,
    rewards: np.ndarray,
    baseline: float | None,
    lr: float,
    alpha: float,
    baseline_decay: float = 0.99,
) -> float:
    """One ascent step; returns the updated reward baseline (EMA)."""
    rewards = np.asarray(rewards, dtype=float)
    if baseline is None:
        baseline = float(rewards.mean())
    grads = reinforce_gradients(net, sample, rewards, baseline, alpha)
    for name, grad in grads.items():
        net.params[name] += lr * grad
    return baseline_decay * baseline + (1.0 - baseline_decay) * float(rewards.mean())


def conditional_probs(
    net: GeneratorNet,
    f_table: EmbeddingTable | None,
    centers: np.ndarray,
    rng: np.random.Generator,
    n_latent_samples: int = 64,
) -> np.ndarray:
    """Marginal conditional Q(y | x) per center, Monte-Carlo over the latent.

    Exact (single pass) for the latent-free ace topology.
    """
    centers = np.asarray(centers, dtype=np.int64)
    if not net.uses_latent:
        logits, _ = _forward(net, f_table, centers, None)
        return np.exp(log_softmax(logits))
    acc = np.zeros((len(centers), net.vocab_size))
    for _ in range(n_latent_samples):
        eps = rng.standard_normal((len(centers), net.latent_dim))
        logits, _ = _forward(net, f_table, centers, eps)
        acc += np.exp(log_softmax(logits))
    return acc / n_latent_samples
