# Mini-batch training of the CNN with Adam

import logging
from dataclasses import dataclass
from warnings import warn

import numpy as np

from ..exceptions import DataError, NumericError
from .layers import softmax_cross_entropy

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """
    Optimiser and schedule settings.

    Attributes
    ----------
    learning_rate, beta1, beta2, epsilon : float
        Adam parameters.
    epochs : int
        Passes over the training set.
    batch_size : int
        Images per update.
    rng_seed : int
        Seed for the per-epoch shuffles.
    """
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 50
    batch_size: int = 128
    rng_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ValueError("learning_rate and epsilon must be positive.")

        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1).")

        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1.")


class Adam:
    """Adam with bias-corrected moment estimates."""

    def __init__(self, parameters, learning_rate=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
        """
        Parameters
        ----------
        parameters : dict of str to Tensor
            Tensors to optimise.
        learning_rate, beta1, beta2, epsilon : float
            Adam parameters.
        """
        self.parameters = parameters
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.step_count = 0

        self.m = {name: np.zeros_like(t.value) for name, t in parameters.items()}
        self.v = {name: np.zeros_like(t.value) for name, t in parameters.items()}

    def step(self):
        """Apply one update from the gradients currently stored on the parameters."""
        self.step_count += 1
        t = self.step_count

        for name, tensor in self.parameters.items():
            if tensor.grad is None:
                continue

            g = tensor.grad
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g

            m_hat = self.m[name] / (1 - self.beta1 ** t)
            v_hat = self.v[name] / (1 - self.beta2 ** t)

            update = self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)
            tensor.value -= update.astype(tensor.value.dtype, copy=False)


def batch_slices(n, batch_size):
    """
    Start and stop indices of consecutive mini-batches over `n` items. A trailing batch of a
    single item is folded into the one before it; every batch holds at least two items when
    `n` > 1.
    """
    bounds = [(begin, min(begin + batch_size, n)) for begin in range(0, n, batch_size)]

    if len(bounds) > 1 and bounds[-1][1] - bounds[-1][0] == 1:
        bounds[-2:] = [(bounds[-2][0], n)]

    return bounds


def train(model, images, labels, cfg=TrainConfig()):
    """
    Train a CNN with softmax cross-entropy and Adam. The data are reshuffled every epoch with
    a generator seeded from `cfg.rng_seed`. Per-epoch mean losses are appended to
    `model.loss_history`.

    Parameters
    ----------
    model : CnnModel
        The network to train (modified in place).
    images : numpy.ndarray
        Mel images, shape (N, 225, 225).
    labels : array-like of bool or int
        1 / True for crying, 0 / False for not crying.
    cfg : TrainConfig, optional
        Optimiser settings.

    Returns
    -------
    CnnModel
        The trained model, switched to eval mode.
    """
    labels = np.asarray(labels, dtype=int)
    n = len(labels)

    if n == 0:
        raise DataError("Cannot train on an empty dataset.")

    if len(images) != n:
        raise DataError(f"Got {len(images)} images but {n} labels.")

    if np.unique(labels).size < 2:
        warn("Training set contains a single class; the network will only learn that class.",
             RuntimeWarning, stacklevel=2)

    rng = np.random.default_rng(cfg.rng_seed)
    optimizer = Adam(model.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)

    model.train()

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0

        for index, (begin, stop) in enumerate(batch_slices(n, cfg.batch_size)):
            batch = order[begin:stop]

            model.zero_grad()
            logits = model.forward(images[batch])
            loss, grad = softmax_cross_entropy(logits, labels[batch])

            if not np.isfinite(loss):
                raise NumericError(f"Non-finite loss in epoch {epoch + 1}.")

            model.backward(grad)
            optimizer.step()

            total += loss * len(batch)
            logger.debug("epoch %d batch %d: loss %.5f", epoch + 1, index, loss)

        model.loss_history.append(total / n)
        logger.info("epoch %d/%d: loss %.5f", epoch + 1, cfg.epochs, total / n)

    return model.eval()
