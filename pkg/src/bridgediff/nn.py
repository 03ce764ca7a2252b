"""Minimal array-valued reverse-mode autodiff and the noise-prediction MLP.

Values are float64 numpy arrays; gradients accumulate on a dynamically
built tape covering just the handful of operations the predictor needs
(matmul, broadcast add/sub/mul, SiLU, mean). The predictor is a plain
fully connected net taking the state concatenated with a sinusoidal
embedding of the step index; the final layer is zero-initialized so a
fresh model predicts zero noise everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to the shape it was broadcast from."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Node in the reverse-mode graph."""

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    def _accumulate(self, g: np.ndarray) -> None:
        self.grad = g if self.grad is None else self.grad + g

    def __matmul__(self, other: "Tensor") -> "Tensor":
        out = Tensor(self.data @ other.data, (self, other))

        def backward():
            self._accumulate(out.grad @ other.data.T)
            other._accumulate(self.data.T @ out.grad)

        out._backward = backward
        return out

    def __add__(self, other: "Tensor") -> "Tensor":
        out = Tensor(self.data + other.data, (self, other))

        def backward():
            self._accumulate(_unbroadcast(out.grad, self.data.shape))
            other._accumulate(_unbroadcast(out.grad, other.data.shape))

        out._backward = backward
        return out

    def __sub__(self, other: "Tensor") -> "Tensor":
        out = Tensor(self.data - other.data, (self, other))

        def backward():
            self._accumulate(_unbroadcast(out.grad, self.data.shape))
            other._accumulate(_unbroadcast(-out.grad, other.data.shape))

        out._backward = backward
        return out

    def __mul__(self, other: "Tensor") -> "Tensor":
        out = Tensor(self.data * other.data, (self, other))

        def backward():
            self._accumulate(_unbroadcast(out.grad * other.data, self.data.shape))
            other._accumulate(_unbroadcast(out.grad * self.data, other.data.shape))

        out._backward = backward
        return out

    def silu(self) -> "Tensor":
        sig = 1.0 / (1.0 + np.exp(-self.data))
        out = Tensor(self.data * sig, (self,))

        def backward():
            self._accumulate(out.grad * sig * (1.0 + self.data * (1.0 - sig)))

        out._backward = backward
        return out

    def mean(self) -> "Tensor":
        out = Tensor(np.mean(self.data), (self,))

        def backward():
            self._accumulate(np.full_like(self.data, out.grad / self.data.size))

        out._backward = backward
        return out

    def backward(self) -> None:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()


def _embed_freqs(half: int) -> np.ndarray:
    # Geometric frequency ladder; the slowest component completes less than
    # one revolution over step indices up to ~2*pi*10000^((half-1)/half),
    # which keeps embeddings of distinct steps distinct.
    return np.exp(-math.log(10000.0) * np.arange(half) / half)


def time_embed(t: int, T: int, dim: int) -> np.ndarray:
    """Sinusoidal features of the step index; every entry lies in [-1, 1]."""
    if dim % 2 != 0 or dim <= 0:
        raise ValueError(f"embedding dimension must be positive and even, got {dim}")
    if not 0 <= t <= T:
        raise ValueError(f"step index {t} outside 0..{T}")
    angles = float(t) * _embed_freqs(dim // 2)
    return np.concatenate([np.sin(angles), np.cos(angles)])


def _time_embed_rows(ts: np.ndarray, dim: int) -> np.ndarray:
    angles = np.asarray(ts, dtype=np.float64)[:, None] * _embed_freqs(dim // 2)[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


@dataclass
class NoisePredictor:
    """Fully connected eps predictor over (state, step-embedding) inputs.

    The conditioning endpoint is deliberately not an input; at sampling
    time the only things the net sees are the current state and the step.
    ``state_scale``, when set, divides the state by a per-step constant
    before the first layer (the marginal state scale is known from the
    schedule, and standardized inputs keep the net out of its saturated
    tails at large variance scales). It participates in checkpoints so
    training and sampling always agree.
    """

    data_dim: int
    embed_dim: int
    hidden: tuple[int, ...]
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)
    activation: str = "silu"
    state_scale: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def create(
        cls,
        data_dim: int,
        hidden: tuple[int, ...],
        embed_dim: int,
        rng: np.random.Generator,
        state_scale: np.ndarray | None = None,
    ) -> "NoisePredictor":
        """Fan-in uniform init for hidden layers, zeros for the output layer."""
        if data_dim < 1 or embed_dim < 2 or embed_dim % 2 != 0:
            raise ValueError(f"bad sizes: data_dim={data_dim}, embed_dim={embed_dim}")
        hidden = tuple(int(h) for h in hidden)
        if not hidden or any(h < 1 for h in hidden):
            raise ValueError(f"need at least one positive hidden width, got {hidden}")
        if state_scale is not None:
            state_scale = np.asarray(state_scale, dtype=np.float64)
            if state_scale.ndim != 1 or np.any(state_scale <= 0):
                raise ValueError("state_scale must be a 1-D array of positive scales")
        sizes = [data_dim + embed_dim, *hidden, data_dim]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        weights[-1][:] = 0.0
        return cls(
            data_dim=data_dim,
            embed_dim=embed_dim,
            hidden=hidden,
            weights=weights,
            biases=biases,
            state_scale=state_scale,
        )

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.params())

    def params(self) -> list[np.ndarray]:
        """Trainable arrays, interleaved [W0, b0, W1, b1, ...]."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def copy_with(self, arrays: list[np.ndarray]) -> "NoisePredictor":
        """New predictor with the same sizes and the given parameter arrays."""
        expected = [a.shape for a in self.params()]
        got = [np.asarray(a).shape for a in arrays]
        if expected != got:
            raise ValueError(f"parameter shape mismatch: {got} vs {expected}")
        return NoisePredictor(
            data_dim=self.data_dim,
            embed_dim=self.embed_dim,
            hidden=self.hidden,
            weights=[np.array(arrays[i], dtype=np.float64) for i in range(0, len(arrays), 2)],
            biases=[np.array(arrays[i], dtype=np.float64) for i in range(1, len(arrays), 2)],
            activation=self.activation,
            state_scale=None if self.state_scale is None else self.state_scale.copy(),
        )

    def _normalize(self, x, t) -> tuple[np.ndarray, np.ndarray, bool]:
        xb = np.asarray(x, dtype=np.float64)
        single = xb.ndim == 1
        if single:
            xb = xb[None, :]
        if xb.ndim != 2 or xb.shape[1] != self.data_dim:
            raise ValueError(f"expected states of dimension {self.data_dim}, got shape {np.shape(x)}")
        tb = np.broadcast_to(np.asarray(t, dtype=np.float64), (xb.shape[0],))
        return xb, tb, single

    def _scaled(self, xb: np.ndarray, tb: np.ndarray) -> np.ndarray:
        if self.state_scale is None:
            return xb
        return xb / self.state_scale[tb.astype(np.intp)][:, None]

    def forward(self, x, t, T: int) -> np.ndarray:
        """Predict eps for one state (1-D) or a batch (2-D); deterministic."""
        xb, tb, single = self._normalize(x, t)
        if np.any(tb < 0) or np.any(tb > T):
            raise ValueError(f"step index outside 0..{T}")
        h = np.concatenate([self._scaled(xb, tb), _time_embed_rows(tb, self.embed_dim)], axis=1)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = h * (1.0 / (1.0 + np.exp(-h)))
        if not np.all(np.isfinite(h)):
            raise FloatingPointError("non-finite prediction (non-finite parameters?)")
        return h[0] if single else h

    def loss_and_grads(
        self, x, t, target, T: int, sample_weight: np.ndarray | None = None
    ) -> tuple[float, list[np.ndarray]]:
        """Mean-squared-error loss over the batch and its parameter gradients."""
        xb, tb, _ = self._normalize(x, t)
        tgt = np.asarray(target, dtype=np.float64)
        if tgt.ndim == 1:
            tgt = tgt[None, :]
        if tgt.shape != xb.shape:
            raise ValueError(f"target shape {tgt.shape} does not match input {xb.shape}")
        params = [Tensor(p) for p in self.params()]
        h = Tensor(np.concatenate([self._scaled(xb, tb), _time_embed_rows(tb, self.embed_dim)], axis=1))
        last = len(self.weights) - 1
        for i in range(len(self.weights)):
            h = h @ params[2 * i] + params[2 * i + 1]
            if i < last:
                h = h.silu()
        diff = h - Tensor(tgt)
        sq = diff * diff
        if sample_weight is not None:
            sq = sq * Tensor(np.asarray(sample_weight, dtype=np.float64))
        loss = sq.mean()
        if not np.isfinite(loss.data):
            raise FloatingPointError("non-finite training loss")
        loss.backward()
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
        return float(loss.data), grads

    def eps_fn(self, T: int):
        """Adapter with the (state, step) -> eps signature the samplers take."""
        return lambda x, t: self.forward(x, t, T)
