# A minimal tensor: a value array paired with an accumulated gradient

import numpy as np


class Tensor:
    """
    An array of values with an optional gradient of the same shape.

    Layers own their parameters as Tensors; the backward pass of a layer adds into
    `Tensor.grad`, and optimisers read it.
    """

    def __init__(self, value, dtype=None, requires_grad=True):
        """
        Parameters
        ----------
        value : array-like
            Initial values.
        dtype : numpy dtype, optional
            Storage type; defaults to the dtype of `value`.
        requires_grad : bool, optional
            Whether gradients are accumulated for this tensor.
        """
        self.value = np.array(value, dtype=dtype, copy=True)
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self):
        return self.value.size

    @property
    def dtype(self):
        return self.value.dtype

    def zero_grad(self):
        self.grad = None

    def accumulate(self, grad):
        """Add `grad` to the stored gradient."""
        if not self.requires_grad:
            return

        grad = np.asarray(grad, dtype=self.value.dtype)

        if grad.shape != self.value.shape:
            raise ValueError(f"Gradient shape {grad.shape} does not match tensor shape "
                             f"{self.value.shape}.")

        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype})"
