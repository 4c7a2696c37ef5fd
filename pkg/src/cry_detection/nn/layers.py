# Network layers with explicit forward and backward passes. Image tensors use the
# (batch, channels, height, width) layout.

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor


class Layer:
    """
    Base class for layers. `forward` caches whatever `backward` needs; `backward` takes the
    gradient of the loss with respect to the layer output, accumulates parameter gradients
    and returns the gradient with respect to the layer input.
    """

    def forward(self, x, training=False):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def parameters(self):
        """Trainable tensors, keyed by short name."""
        return {}

    def buffers(self):
        """Non-trainable state that must be saved with the model (e.g. running statistics)."""
        return {}

    def __call__(self, x, training=False):
        return self.forward(x, training)


def he_uniform(rng, shape, fan_in, dtype):
    """He-uniform initialisation: U(-sqrt(6 / fan_in), sqrt(6 / fan_in))."""
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _strided(x, i, j, stride, out_h, out_w):
    # Input positions visited by kernel offset (i, j)
    return x[:, :, i:i + stride * (out_h - 1) + 1:stride, j:j + stride * (out_w - 1) + 1:stride]


class Conv2d(Layer):
    def __init__(self, in_channels, out_channels, kernel_size, stride=1, padding=0,
                 rng=None, dtype=np.float32):
        rng = np.random.default_rng(rng)
        fan_in = in_channels * kernel_size * kernel_size

        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding

        self.weight = Tensor(he_uniform(rng, (out_channels, in_channels, kernel_size, kernel_size),
                                        fan_in, dtype))
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype))
        self._cache = None

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def output_size(self, size):
        return (size + 2 * self.padding - self.kernel_size) // self.stride + 1

    def forward(self, x, training=False):
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ValueError(f"Conv2d expected (N, {self.in_channels}, H, W) input, got {x.shape}.")

        p, k, s = self.padding, self.kernel_size, self.stride
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p > 0 else x
        out_h, out_w = self.output_size(x.shape[2]), self.output_size(x.shape[3])

        if out_h < 1 or out_w < 1:
            raise ValueError(f"Input {x.shape[2:]} is too small for a {k}x{k} kernel.")

        w = self.weight.value
        out = np.zeros((x.shape[0], out_h, out_w, self.out_channels), dtype=w.dtype)

        # One tensordot per kernel offset keeps memory at the size of the output
        for i in range(k):
            for j in range(k):
                out += np.tensordot(_strided(xp, i, j, s, out_h, out_w), w[:, :, i, j],
                                    axes=([1], [1]))

        self._cache = (x.shape, xp)
        return out.transpose(0, 3, 1, 2) + self.bias.value[None, :, None, None]

    def backward(self, grad):
        x_shape, xp = self._cache
        p, k, s = self.padding, self.kernel_size, self.stride
        out_h, out_w = grad.shape[2], grad.shape[3]
        w = self.weight.value

        grad_t = grad.transpose(0, 2, 3, 1)
        grad_w = np.zeros_like(w)
        grad_xp = np.zeros(xp.shape, dtype=grad.dtype)

        for i in range(k):
            for j in range(k):
                window = _strided(xp, i, j, s, out_h, out_w)
                grad_w[:, :, i, j] = np.tensordot(grad_t, window, axes=([0, 1, 2], [0, 2, 3]))

                contribution = np.tensordot(grad_t, w[:, :, i, j], axes=([3], [0]))
                _strided(grad_xp, i, j, s, out_h, out_w)[...] += contribution.transpose(0, 3, 1, 2)

        self.weight.accumulate(grad_w)
        self.bias.accumulate(grad.sum(axis=(0, 2, 3)))

        return grad_xp[:, :, p:p + x_shape[2], p:p + x_shape[3]]


class MaxPool2d(Layer):
    def __init__(self, kernel_size=3, stride=2):
        self.kernel_size = kernel_size
        self.stride = stride
        self._cache = None

    def output_size(self, size):
        return (size - self.kernel_size) // self.stride + 1

    def forward(self, x, training=False):
        k, s = self.kernel_size, self.stride
        windows = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s]
        flat = windows.reshape(windows.shape[:4] + (k * k,))

        argmax = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, argmax[..., None], axis=-1)[..., 0]

        self._cache = (x.shape, x.dtype, argmax)
        return out

    def backward(self, grad):
        shape, dtype, argmax = self._cache
        k, s = self.kernel_size, self.stride
        out_h, out_w = grad.shape[2], grad.shape[3]
        grad_x = np.zeros(shape, dtype=dtype)

        # Gradient goes to the first maximum of each window; overlapping windows add up
        for index in range(k * k):
            i, j = divmod(index, k)
            _strided(grad_x, i, j, s, out_h, out_w)[...] += grad * (argmax == index)

        return grad_x


class BatchNorm(Layer):
    """
    Batch normalisation over the channel axis (axis 1) of 2-d or 4-d inputs. Training uses
    batch statistics and updates the running statistics as
    running = momentum * running + (1 - momentum) * batch; evaluation uses the running ones.
    """

    def __init__(self, num_features, momentum=0.9, eps=1e-5, dtype=np.float32):
        self.num_features = num_features
        self.momentum = momentum
        self.eps = eps

        self.gamma = Tensor(np.ones(num_features, dtype=dtype))
        self.beta = Tensor(np.zeros(num_features, dtype=dtype))
        self.running_mean = np.zeros(num_features, dtype=dtype)
        self.running_var = np.ones(num_features, dtype=dtype)
        self._cache = None

    def parameters(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def _axes(self, x):
        if x.ndim == 2:
            return (0,), (1, -1)

        if x.ndim == 4:
            return (0, 2, 3), (1, -1, 1, 1)

        raise ValueError(f"BatchNorm expects 2-d or 4-d input, got {x.ndim}-d.")

    def forward(self, x, training=False):
        axes, shape = self._axes(x)

        if x.shape[1] != self.num_features:
            raise ValueError(f"BatchNorm expected {self.num_features} channels, got {x.shape[1]}.")

        if training:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            count = x.size // self.num_features

            # A single value per channel leaves the running statistics unchanged
            if count > 1:
                unbiased = var * count / (count - 1)
                self.running_mean[...] = (self.momentum * self.running_mean
                                          + (1 - self.momentum) * mean)
                self.running_var[...] = (self.momentum * self.running_var
                                         + (1 - self.momentum) * unbiased)
        else:
            mean, var = self.running_mean, self.running_var

        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean.reshape(shape)) * inv_std.reshape(shape)

        self._cache = (x_hat, inv_std, axes, shape)
        return x_hat * self.gamma.value.reshape(shape) + self.beta.value.reshape(shape)

    def backward(self, grad):
        x_hat, inv_std, axes, shape = self._cache
        count = grad.size // self.num_features

        self.gamma.accumulate(np.sum(grad * x_hat, axis=axes))
        self.beta.accumulate(np.sum(grad, axis=axes))

        grad_hat = grad * self.gamma.value.reshape(shape)
        sum_grad = np.sum(grad_hat, axis=axes, keepdims=True)
        sum_grad_x = np.sum(grad_hat * x_hat, axis=axes, keepdims=True)

        return (inv_std.reshape(shape) / count) * (count * grad_hat - sum_grad - x_hat * sum_grad_x)


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, training=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0).astype(x.dtype, copy=False)

    def backward(self, grad):
        return grad * self._mask


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def forward(self, x, training=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Linear(Layer):
    def __init__(self, in_features, out_features, rng=None, dtype=np.float32):
        rng = np.random.default_rng(rng)

        self.in_features = in_features
        self.out_features = out_features
        self.weight = Tensor(he_uniform(rng, (in_features, out_features), in_features, dtype))
        self.bias = Tensor(np.zeros(out_features, dtype=dtype))
        self._input = None

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ValueError(f"Linear expected (N, {self.in_features}) input, got {x.shape}.")

        self._input = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad):
        self.weight.accumulate(self._input.T @ grad)
        self.bias.accumulate(grad.sum(axis=0))

        return grad @ self.weight.value.T


def softmax(logits):
    """Row-wise softmax."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """
    Mean softmax cross-entropy over a batch.

    Parameters
    ----------
    logits : numpy.ndarray
        Matrix of shape (N, n_classes).
    labels : numpy.ndarray
        Integer class of each row.

    Returns
    -------
    (float, numpy.ndarray)
        The loss and its gradient with respect to `logits`.
    """
    labels = np.asarray(labels, dtype=int)
    n = logits.shape[0]

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_prob = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -log_prob[np.arange(n), labels].mean()

    grad = np.exp(log_prob)
    grad[np.arange(n), labels] -= 1.0

    return float(loss), (grad / n).astype(logits.dtype, copy=False)
