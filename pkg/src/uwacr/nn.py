"""Minimal float64 neural-network kit: flat parameters, manual backprop, Adam.

Everything lives in one flat vector so optimizers, checkpoints, and
finite-difference tests stay trivial. Layers are functional: forward
returns a cache, backward consumes it and writes gradients through the
same named views.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ParamStore",
    "Adam",
    "TwoStreamNet",
    "softmax",
    "softplus",
    "sigmoid",
]


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class ParamStore:
    """Named tensors packed into one contiguous float64 vector."""

    def __init__(self):
        self._shapes: dict[str, tuple[int, ...]] = {}
        self._slices: dict[str, slice] = {}
        self.vector = np.zeros(0, dtype=float)

    def add(self, name: str, array: np.ndarray) -> None:
        if name in self._shapes:
            raise ValueError(f"duplicate parameter {name!r}")
        array = np.asarray(array, dtype=float)
        start = self.vector.size
        self._shapes[name] = array.shape
        self._slices[name] = slice(start, start + array.size)
        self.vector = np.concatenate([self.vector, array.reshape(-1)])

    def get(self, name: str) -> np.ndarray:
        return self.vector[self._slices[name]].reshape(self._shapes[name])

    def set_vector(self, vector: np.ndarray) -> None:
        vector = np.asarray(vector, dtype=float)
        if vector.shape != self.vector.shape:
            raise ValueError("parameter vector size mismatch")
        self.vector = vector.copy()

    def new_grad(self) -> np.ndarray:
        return np.zeros_like(self.vector)

    def grad_view(self, grad: np.ndarray, name: str) -> np.ndarray:
        return grad[self._slices[name]].reshape(self._shapes[name])

    @property
    def size(self) -> int:
        return self.vector.size

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return dict(self._shapes)


class Adam:
    """Plain Adam with bias correction; updates the vector in place."""

    def __init__(self, size: int, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        mhat = self.m / (1 - self.beta1 ** self.t)
        vhat = self.v / (1 - self.beta2 ** self.t)
        params -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _xavier(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def conv_out_length(length: int, kernel: int, stride: int) -> int:
    if length < kernel:
        raise ValueError(f"signal length {length} shorter than kernel {kernel}")
    return (length - kernel) // stride + 1


class TwoStreamNet:
    """Conv stack over a (channels, length) signal, concat side features,
    tanh dense trunk, one linear head per requested output width.

    Stateless apart from the ParamStore; forward returns a cache that
    backward consumes, so batches can be processed independently.
    """

    def __init__(
        self,
        side_dim: int,
        in_channels: int,
        in_length: int,
        conv: tuple[tuple[int, int, int], ...],
        hidden: tuple[int, ...],
        head_dims: tuple[int, ...],
        rng: np.random.Generator,
    ):
        if not hidden:
            raise ValueError("need at least one dense hidden layer")
        if not head_dims:
            raise ValueError("need at least one head")
        self.side_dim = side_dim
        self.conv_spec = tuple(conv)
        self.hidden = tuple(hidden)
        self.head_dims = tuple(head_dims)
        self.params = ParamStore()

        c, length = in_channels, in_length
        for i, (c_out, k, s) in enumerate(self.conv_spec):
            self.params.add(f"conv{i}_W", _xavier(rng, (c_out, c, k), c * k, c_out * k))
            self.params.add(f"conv{i}_b", np.zeros(c_out))
            length = conv_out_length(length, k, s)
            c = c_out
        self.flat_dim = c * length

        width = self.flat_dim + side_dim
        for i, h in enumerate(self.hidden):
            self.params.add(f"fc{i}_W", _xavier(rng, (width, h), width, h))
            self.params.add(f"fc{i}_b", np.zeros(h))
            width = h
        for i, h in enumerate(self.head_dims):
            self.params.add(f"head{i}_W", _xavier(rng, (width, h), width, h))
            self.params.add(f"head{i}_b", np.zeros(h))

    # -- forward -----------------------------------------------------------

    def _conv_forward(self, x: np.ndarray, i: int) -> tuple[np.ndarray, dict]:
        _, k, s = self.conv_spec[i]
        W = self.params.get(f"conv{i}_W")
        b = self.params.get(f"conv{i}_b")
        cols = np.lib.stride_tricks.sliding_window_view(x, k, axis=2)[:, :, ::s, :]
        batch, c_in, lo, _ = cols.shape
        cols = cols.transpose(0, 2, 1, 3).reshape(batch, lo, c_in * k)
        pre = cols @ W.reshape(W.shape[0], -1).T + b
        out = np.tanh(pre)
        return out.transpose(0, 2, 1), {"cols": cols, "out": out, "in_shape": x.shape}

    def _conv_backward(self, gout: np.ndarray, cache: dict, i: int, grad: np.ndarray) -> np.ndarray:
        _, k, s = self.conv_spec[i]
        W = self.params.get(f"conv{i}_W")
        cols, out = cache["cols"], cache["out"]
        batch, c_in, length = cache["in_shape"]
        gpre = gout.transpose(0, 2, 1) * (1.0 - out * out)
        lo = gpre.shape[1]
        gW = self.params.grad_view(grad, f"conv{i}_W")
        gW += (gpre.reshape(-1, gpre.shape[2]).T @ cols.reshape(-1, cols.shape[2])).reshape(gW.shape)
        self.params.grad_view(grad, f"conv{i}_b")[:] += gpre.sum(axis=(0, 1))
        gcols = (gpre @ W.reshape(W.shape[0], -1)).reshape(batch, lo, c_in, k)
        gx = np.zeros((batch, c_in, length))
        starts = np.arange(lo) * s
        for j in range(k):
            # scatter-add; strided windows may overlap when s < k
            np.add.at(gx, (slice(None), slice(None), starts + j), gcols[:, :, :, j].transpose(0, 2, 1))
        return gx

    def forward(self, side: np.ndarray, signal: np.ndarray) -> tuple[list[np.ndarray], dict]:
        """side: (B, side_dim); signal: (B, C, L). Returns per-head linear
        outputs and the backprop cache."""
        side = np.asarray(side, dtype=float)
        x = np.asarray(signal, dtype=float)
        conv_caches = []
        for i in range(len(self.conv_spec)):
            x, cache = self._conv_forward(x, i)
            conv_caches.append(cache)
        flat = x.reshape(x.shape[0], -1)
        h = np.concatenate([flat, side], axis=1)
        fc_caches = []
        for i in range(len(self.hidden)):
            W = self.params.get(f"fc{i}_W")
            b = self.params.get(f"fc{i}_b")
            pre = h @ W + b
            out = np.tanh(pre)
            fc_caches.append({"in": h, "out": out})
            h = out
        heads = []
        for i in range(len(self.head_dims)):
            W = self.params.get(f"head{i}_W")
            b = self.params.get(f"head{i}_b")
            heads.append(h @ W + b)
        return heads, {
            "conv": conv_caches,
            "fc": fc_caches,
            "trunk_out": h,
            "conv_out_shape": x.shape,
        }

    def backward(self, cache: dict, ghead: list[np.ndarray]) -> np.ndarray:
        """ghead: one (B, head_dim) gradient per head (None to skip).
        Returns a flat gradient vector aligned with params.vector."""
        grad = self.params.new_grad()
        h = cache["trunk_out"]
        gh = np.zeros_like(h)
        for i, g in enumerate(ghead):
            if g is None:
                continue
            W = self.params.get(f"head{i}_W")
            self.params.grad_view(grad, f"head{i}_W")[:] += h.T @ g
            self.params.grad_view(grad, f"head{i}_b")[:] += g.sum(axis=0)
            gh += g @ W.T
        for i in reversed(range(len(self.hidden))):
            c = cache["fc"][i]
            gpre = gh * (1.0 - c["out"] * c["out"])
            W = self.params.get(f"fc{i}_W")
            self.params.grad_view(grad, f"fc{i}_W")[:] += c["in"].T @ gpre
            self.params.grad_view(grad, f"fc{i}_b")[:] += gpre.sum(axis=0)
            gh = gpre @ W.T
        gflat = gh[:, : self.flat_dim]
        gx = gflat.reshape(cache["conv_out_shape"])
        for i in reversed(range(len(self.conv_spec))):
            gx = self._conv_backward(gx, cache["conv"][i], i, grad)
        return grad
