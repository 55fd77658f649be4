"""Feed-forward layers with cached-activation analytic backprop.

Every layer follows the same protocol: ``forward(x)`` caches whatever the
gradient needs, ``backward(grad_out)`` accumulates into parameter ``.grad``
buffers and returns the gradient with respect to the input.  One forward may
be in flight per layer at a time.
"""

from __future__ import annotations

import numpy as np

from abaf.nn import kernels
from abaf.nn.params import Module, Parameter


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, shape)


class Linear(Module):
    """y = x @ W.T + b with W stored as (d_out, d_in)."""

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.weight = Parameter(_uniform_init(rng, (d_out, d_in), d_in))
        self.bias = Parameter(_uniform_init(rng, (d_out,), d_in)) if bias else None
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.weight.value.shape[1]:
            raise ValueError(
                f"expected {self.weight.value.shape[1]} input features, got {x.shape}"
            )
        self._x = x
        y = x @ self.weight.value.T
        if self.bias is not None:
            y += self.bias.value
        return y

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        self.weight.grad += grad_out.T @ self._x
        if self.bias is not None:
            self.bias.grad += grad_out.sum(axis=0)
        return grad_out @ self.weight.value


class Conv2d(Module):
    """3x3 cross-correlation, zero padding 1, stride 1 (spatial size kept)."""

    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        fan_in = c_in * 9
        self.kernel = Parameter(_uniform_init(rng, (c_out, c_in, 3, 3), fan_in))
        self.bias = Parameter(_uniform_init(rng, (c_out,), fan_in)) if bias else None
        self._x: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.kernel.value.shape[1]:
            raise ValueError(
                f"expected (N, {self.kernel.value.shape[1]}, H, W), got {x.shape}"
            )
        self._x = np.ascontiguousarray(x)
        out = kernels.conv2d_forward(self._x, self.kernel.value)
        if self.bias is not None:
            out += self.bias.value[None, :, None, None]
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_out = np.ascontiguousarray(grad_out)
        grad_x, grad_k = kernels.conv2d_backward(self._x, self.kernel.value, grad_out)
        self.kernel.grad += grad_k
        if self.bias is not None:
            self.bias.grad += grad_out.sum(axis=(0, 2, 3))
        return grad_x


class MaxPool2d(Module):
    """2x2 stride-2 max pooling; gradient goes to the first max per window."""

    def __init__(self):
        super().__init__()
        self._idx: np.ndarray | None = None
        self._in_hw: tuple[int, int] = (0, 0)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[2] % 2 or x.shape[3] % 2:
            raise ValueError(f"maxpool needs even spatial dims, got {x.shape}")
        self._in_hw = (x.shape[2], x.shape[3])
        out, self._idx = kernels.maxpool_forward(np.ascontiguousarray(x))
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        h, w = self._in_hw
        return kernels.maxpool_backward(np.ascontiguousarray(grad_out), self._idx, h, w)


class ReLU(Module):
    def __init__(self):
        super().__init__()
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0.0
        return x * self._mask

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out * self._mask


class Dropout(Module):
    """Inverted dropout: train-mode survivors scale by 1/(1-p); eval is identity."""

    def __init__(self, p: float, rng: np.random.Generator):
        super().__init__()
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {p}")
        self.p = p
        self.rng = rng
        self._mask: np.ndarray | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if not self.training or self.p == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.p
        self._mask = (self.rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return grad_out
        return grad_out * self._mask


class BatchNorm1d(Module):
    """Per-feature normalisation; population statistics throughout.

    Training mode uses batch statistics and folds them into running buffers
    with the given momentum; eval mode applies the stored running statistics.
    """

    def __init__(self, d: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.gamma = Parameter(np.ones(d))
        self.beta = Parameter(np.zeros(d))
        self.momentum = momentum
        self.eps = eps
        self.register_buffer("running_mean", np.zeros(d))
        self.register_buffer("running_var", np.ones(d))
        self._cache: tuple | None = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.gamma.value.size:
            raise ValueError(f"expected (N, {self.gamma.value.size}), got {x.shape}")
        if self.training:
            if x.shape[0] < 2:
                raise ValueError("batch norm needs N >= 2 in training mode")
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean) * inv_std
        self._cache = (x_hat, inv_std, self.training)
        return self.gamma.value * x_hat + self.beta.value

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x_hat, inv_std, was_training = self._cache
        self.gamma.grad += (grad_out * x_hat).sum(axis=0)
        self.beta.grad += grad_out.sum(axis=0)
        g_hat = grad_out * self.gamma.value
        if not was_training:
            return g_hat * inv_std
        n = grad_out.shape[0]
        return (
            inv_std
            / n
            * (n * g_hat - g_hat.sum(axis=0) - x_hat * (g_hat * x_hat).sum(axis=0))
        )
