"""Dense networks with hand-written reverse-mode gradients, Adam, and
input normalizers. No external numerical runtime: plain numpy throughout.

Parameters are float32 by default so checkpoint roundtrips are bit-exact;
tests may build float64 nets for finite-difference probes.
"""

from __future__ import annotations

import numpy as np

LOG_STD_MIN = np.log(1e-3)
LOG_STD_MAX = np.log(2.0)


def orthogonal_init(n_in: int, n_out: int, rng: np.random.Generator, gain: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


class Mlp:
    """Feed-forward net: tanh hidden layers, linear output.

    `sigmoid_tail` trailing outputs are squashed by a logistic so they live
    in [0, 1] (used for the contact-probability slots of the estimator).
    """

    def __init__(
        self,
        sizes,
        rng: np.random.Generator,
        sigmoid_tail: int = 0,
        out_gain: float = 1.0,
        dtype=np.float32,
    ):
        self.sizes = list(sizes)
        self.sigmoid_tail = sigmoid_tail
        self.dtype = dtype
        self.weights = []
        self.biases = []
        n_layers = len(self.sizes) - 1
        for k in range(n_layers):
            gain = out_gain if k == n_layers - 1 else 1.0
            w = orthogonal_init(self.sizes[k], self.sizes[k + 1], rng, gain)
            self.weights.append(w.astype(dtype))
            self.biases.append(np.zeros(self.sizes[k + 1], dtype=dtype))

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.sizes[-1]

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_params(self, flat_list) -> None:
        it = iter(flat_list)
        for k in range(len(self.weights)):
            self.weights[k] = next(it).copy()
            self.biases[k] = next(it).copy()

    def forward(self, x: np.ndarray):
        """Returns (output, cache) for a batch (n, d_in) or a single (d_in,)."""
        squeeze = x.ndim == 1
        h = np.atleast_2d(x)
        if h.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {h.shape[1]} != expected {self.sizes[0]}")
        acts = [h]
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if k < last:
                h = np.tanh(h)
            acts.append(h)
        if self.sigmoid_tail:
            t = self.sigmoid_tail
            h = h.copy()
            h[:, -t:] = 1.0 / (1.0 + np.exp(-h[:, -t:]))
            acts[-1] = h
        out = h[0] if squeeze else h
        return out, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache, dout: np.ndarray):
        """Exact gradients of sum(dout * output) w.r.t. every parameter.

        `cache` is the activation list from forward; returns a list aligned
        with params(): [dW0, db0, dW1, db1, ...].
        """
        d = np.atleast_2d(dout).astype(float)
        if self.sigmoid_tail:
            t = self.sigmoid_tail
            s = cache[-1][:, -t:]
            d = d.copy()
            d[:, -t:] *= s * (1.0 - s)
        grads = [None] * (2 * len(self.weights))
        for k in range(len(self.weights) - 1, -1, -1):
            a_prev = cache[k]
            grads[2 * k] = a_prev.T @ d
            grads[2 * k + 1] = d.sum(axis=0)
            if k > 0:
                d = d @ self.weights[k].T
                d = d * (1.0 - cache[k] ** 2)  # tanh'
        return grads


class Adam:
    """Bias-corrected Adam over a list of parameter arrays."""

    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p, dtype=np.float64) for p in params]
        self.v = [np.zeros_like(p, dtype=np.float64) for p in params]

    def step(self, params, grads) -> None:
        self.step_count += 1
        b1t = 1.0 - self.beta1 ** self.step_count
        b2t = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            update = self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)
            p -= update.astype(p.dtype)


def clip_gradients(grads, max_norm: float) -> float:
    """Global-norm gradient clipping in place; returns the pre-clip norm."""
    total = np.sqrt(sum(float(np.sum(np.square(g))) for g in grads))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


def policy_sample(mean: np.ndarray, log_std: np.ndarray, rng: np.random.Generator,
                  deterministic: bool = False):
    """Diagonal-Gaussian action sample and its exact log density."""
    log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    std = np.exp(log_std)
    if deterministic:
        action = np.array(mean, copy=True)
    else:
        action = mean + std * rng.standard_normal(mean.shape)
    return action, gaussian_log_prob(action, mean, log_std)


def gaussian_log_prob(action, mean, log_std):
    log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    var = np.exp(2.0 * log_std)
    d = action - mean
    per_dim = -0.5 * d * d / var - log_std - 0.5 * np.log(2.0 * np.pi)
    return per_dim.sum(axis=-1)


def gaussian_entropy(log_std) -> float:
    log_std = np.clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    return float(np.sum(log_std + 0.5 * np.log(2.0 * np.pi * np.e)))


class GaussianPolicy:
    """Actor head: MLP mean plus state-independent log standard deviations."""

    def __init__(self, sizes, rng: np.random.Generator, init_std: float = 0.2, dtype=np.float32):
        self.mlp = Mlp(sizes, rng, out_gain=0.01, dtype=dtype)
        self.log_std = np.full(sizes[-1], np.log(init_std), dtype=dtype)

    def act(self, obs: np.ndarray, rng: np.random.Generator, deterministic: bool = False):
        mean = self.mlp(obs)
        return policy_sample(mean, self.log_std, rng, deterministic)

    def params(self):
        return self.mlp.params() + [self.log_std]

    def set_params(self, flat_list) -> None:
        self.mlp.set_params(flat_list[:-1])
        self.log_std = flat_list[-1].copy()


class RunningNormalizer:
    """Per-dimension running mean/variance (Chan's parallel update).

    normalize() maps to roughly zero mean / unit std and clamps to +-10;
    the std floor of 1e-3 keeps constant dimensions harmless.
    """

    def __init__(self, dim: int):
        self.count = 0.0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones_like(self.mean)
        return np.maximum(np.sqrt(self.m2 / self.count), 1e-3)

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(batch)
        n = batch.shape[0]
        b_mean = batch.mean(axis=0)
        b_m2 = ((batch - b_mean) ** 2).sum(axis=0)
        delta = b_mean - self.mean
        total = self.count + n
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + b_m2 + delta ** 2 * (self.count * n / total)
        self.count = total

    def normalize(self, x: np.ndarray) -> np.ndarray:
        if self.count < 2:
            return np.clip(x, -10.0, 10.0)
        return np.clip((x - self.mean) / self.std, -10.0, 10.0)

    def state(self) -> dict:
        return {"count": np.array([self.count]), "mean": self.mean, "m2": self.m2}

    @classmethod
    def from_state(cls, state: dict) -> "RunningNormalizer":
        out = cls(state["mean"].shape[0])
        out.count = float(state["count"][0])
        out.mean = state["mean"].copy()
        out.m2 = state["m2"].copy()
        return out
