# The modified AlexNet used for end-to-end cry detection and deep spectrum features

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from lxml import objectify

from ..dsp import IMAGE_SIZE
from ..exceptions import DataError
from ..io import format_shape, parse_shape, read_blob, read_xml, write_blob, write_xml
from .layers import BatchNorm, Conv2d, Flatten, Linear, MaxPool2d, ReLU, softmax

# Output classes, in logit order
CLASSES = ("not_crying", "crying")

# Channel widths of conv1-conv5 and sizes of the two hidden fully-connected layers
PRESETS = {
    "full": (96, 256, 384, 384, 256, 4096, 1000),
    "desk": (12, 32, 48, 48, 32, 512, 1000),
}

DEEP_FEATURE_LAYER = "relu7"


@dataclass(frozen=True)
class Prediction:
    """
    Class decision for one image.

    Attributes
    ----------
    label : str
        "crying" or "not_crying".
    probabilities : tuple of float
        Softmax probabilities in `CLASSES` order.
    """
    label: str
    probabilities: tuple


def _architecture(widths):
    c1, c2, c3, c4, c5, f6, f7 = widths

    # (name, constructor); spatial sizes 225 -> 54 -> 26 -> 26 -> 12 -> 12 -> 12 -> 12 -> 5
    return [
        ("conv1", lambda rng, dt: Conv2d(1, c1, 11, stride=4, rng=rng, dtype=dt)),
        ("bn1", lambda rng, dt: BatchNorm(c1, dtype=dt)),
        ("relu1", lambda rng, dt: ReLU()),
        ("pool1", lambda rng, dt: MaxPool2d(3, 2)),
        ("conv2", lambda rng, dt: Conv2d(c1, c2, 5, padding=2, rng=rng, dtype=dt)),
        ("bn2", lambda rng, dt: BatchNorm(c2, dtype=dt)),
        ("relu2", lambda rng, dt: ReLU()),
        ("pool2", lambda rng, dt: MaxPool2d(3, 2)),
        ("conv3", lambda rng, dt: Conv2d(c2, c3, 3, padding=1, rng=rng, dtype=dt)),
        ("bn3", lambda rng, dt: BatchNorm(c3, dtype=dt)),
        ("relu3", lambda rng, dt: ReLU()),
        ("conv4", lambda rng, dt: Conv2d(c3, c4, 3, padding=1, rng=rng, dtype=dt)),
        ("bn4", lambda rng, dt: BatchNorm(c4, dtype=dt)),
        ("relu4", lambda rng, dt: ReLU()),
        ("conv5", lambda rng, dt: Conv2d(c4, c5, 3, padding=1, rng=rng, dtype=dt)),
        ("bn5", lambda rng, dt: BatchNorm(c5, dtype=dt)),
        ("relu5", lambda rng, dt: ReLU()),
        ("pool5", lambda rng, dt: MaxPool2d(3, 2)),
        ("flatten", lambda rng, dt: Flatten()),
        ("fc6", lambda rng, dt: Linear(5 * 5 * c5, f6, rng=rng, dtype=dt)),
        ("bn6", lambda rng, dt: BatchNorm(f6, dtype=dt)),
        ("relu6", lambda rng, dt: ReLU()),
        ("fc7", lambda rng, dt: Linear(f6, f7, rng=rng, dtype=dt)),
        ("bn7", lambda rng, dt: BatchNorm(f7, dtype=dt)),
        ("relu7", lambda rng, dt: ReLU()),
        ("fc8", lambda rng, dt: Linear(f7, len(CLASSES), rng=rng, dtype=dt)),
    ]


class CnnModel:
    """
    AlexNet adapted to 225x225x1 log-mel images and two output classes, with batch
    normalisation after every convolutional and hidden fully-connected layer and no dropout.
    """

    def __init__(self, preset="desk", seed=0, widths=None, dtype=np.float32):
        """
        Parameters
        ----------
        preset : str, optional
            "desk" (1/8 convolution widths, FC6 = 512) or "full" (canonical widths).
        seed : int, optional
            Seed for weight initialisation.
        widths : tuple of int, optional
            Explicit conv1-conv5, fc6, fc7 widths, overriding the preset.
        dtype : numpy dtype, optional
            Parameter and activation type.
        """
        if widths is None:
            if preset not in PRESETS:
                raise ValueError(f"Unknown network preset: {preset}")

            widths = PRESETS[preset]

        self.preset = preset
        self.seed = seed
        self.widths = tuple(int(w) for w in widths)
        self.dtype = np.dtype(dtype)
        self.training = False
        self.loss_history = []

        rng = np.random.default_rng(seed)
        self.layers = [(name, build(rng, self.dtype)) for name, build in _architecture(self.widths)]

    @property
    def deep_feature_size(self):
        return self.widths[-1]

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def parameters(self):
        """All trainable tensors, keyed as "<layer>.<name>", in layer order."""
        return {f"{layer_name}.{name}": tensor
                for layer_name, layer in self.layers
                for name, tensor in layer.parameters().items()}

    def buffers(self):
        return {f"{layer_name}.{name}": array
                for layer_name, layer in self.layers
                for name, array in layer.buffers().items()}

    def zero_grad(self):
        for tensor in self.parameters().values():
            tensor.zero_grad()

    def _as_batch(self, images):
        if isinstance(images, np.ndarray):
            batch = images
        else:
            batch = np.stack([getattr(image, "values", image) for image in images])

        if batch.ndim == 3:
            batch = batch[:, None, :, :]

        if batch.ndim != 4 or batch.shape[1:] != (1, IMAGE_SIZE, IMAGE_SIZE):
            raise ValueError(f"Expected images of shape {IMAGE_SIZE}x{IMAGE_SIZE}, got "
                             f"batch shape {batch.shape}.")

        return batch.astype(self.dtype, copy=False)

    def forward(self, images, until=None):
        """
        Run a batch of images through the network.

        Parameters
        ----------
        images : numpy.ndarray or list of MelImage
            Batch of shape (B, 225, 225) or (B, 1, 225, 225), or a list of images.
        until : str, optional
            Stop after the layer of this name and return its activations.

        Returns
        -------
        numpy.ndarray
            Logits of shape (B, 2), or the activations of layer `until`.
        """
        x = self._as_batch(images)

        for name, layer in self.layers:
            x = layer.forward(x, training=self.training)

            if name == until:
                return x

        if until is not None:
            raise ValueError(f"No layer named '{until}'.")

        return x

    def backward(self, grad):
        """Back-propagate the gradient of the loss with respect to the logits."""
        for _, layer in reversed(self.layers):
            grad = layer.backward(grad)

        return grad


def forward(model, images):
    """Logits of shape (B, 2) for a batch of mel images."""
    return model.forward(images)


def _check_eval(model):
    if model.training:
        raise ValueError("Model is in training mode; call model.eval() before inference.")


def predict_batch(model, images):
    """
    Classify a batch of images.

    Returns
    -------
    (numpy.ndarray, numpy.ndarray)
        Boolean crying decisions and the (B, 2) probability matrix. Equal logits resolve to
        not_crying.
    """
    _check_eval(model)

    probabilities = softmax(model.forward(images).astype(np.float64))
    return probabilities.argmax(axis=1) == CLASSES.index("crying"), probabilities


def predict(model, image):
    """
    Classify one mel image.

    Parameters
    ----------
    model : CnnModel
        Trained model in eval mode.
    image : MelImage or numpy.ndarray
        A 225 x 225 image.

    Returns
    -------
    Prediction
        Label and class probabilities.
    """
    crying, probabilities = predict_batch(model, [image])

    return Prediction("crying" if crying[0] else "not_crying",
                      tuple(float(p) for p in probabilities[0]))


def deep_features(model, images, batch_size=64):
    """
    Deep spectrum features: activations of the 1000-unit FC7 layer after batch normalisation
    and ReLU.

    Parameters
    ----------
    model : CnnModel
        Trained model in eval mode.
    images : list of MelImage or numpy.ndarray
        One image, or a batch of images.
    batch_size : int, optional
        Number of images per forward pass.

    Returns
    -------
    numpy.ndarray
        Shape (1000,) for a single image, otherwise (B, 1000).
    """
    _check_eval(model)

    single = getattr(images, "values", images)

    if isinstance(single, np.ndarray) and single.ndim == 2:
        return deep_features(model, [single], batch_size)[0]

    features = [model.forward(images[i:i + batch_size], until=DEEP_FEATURE_LAYER)
                for i in range(0, len(images), batch_size)]

    return np.concatenate(features).astype(np.float64)


def save_model(model, path, train_config=None):
    """
    Save a network as an XML descriptor (`<path>.xml`) plus a little-endian float32 weight
    blob (`<path>.bin`).

    Parameters
    ----------
    model : CnnModel
        The model to save.
    path : str or pathlib.Path
        Output path without extension.
    train_config : TrainConfig, optional
        Training settings to record in the descriptor.

    Returns
    -------
    None
    """
    path = Path(path)
    arrays = {name: tensor.value for name, tensor in model.parameters().items()}
    arrays.update(model.buffers())

    layout = write_blob(arrays, path.with_suffix(".bin"))

    root = objectify.Element("cnn_model", preset=model.preset, seed=str(model.seed),
                             widths=format_shape(model.widths),
                             blob=path.with_suffix(".bin").name)

    if train_config is not None:
        config = objectify.SubElement(root, "train_config")

        for name, value in vars(train_config).items():
            config.set(name, str(value))

    arrays_element = objectify.SubElement(root, "arrays")

    for name, offset, shape in layout:
        objectify.SubElement(arrays_element, "array", name=name, offset=str(offset),
                             shape=format_shape(shape))

    write_xml(root.getroottree(), path.with_suffix(".xml"))


def load_model(path):
    """
    Load a network written by `save_model`. The model is returned in eval mode.

    Parameters
    ----------
    path : str or pathlib.Path
        Path of the descriptor, with or without the ".xml" extension.

    Returns
    -------
    CnnModel
        The model.
    """
    path = Path(path).with_suffix(".xml")
    root = read_xml(path).getroot()

    if root.tag != "cnn_model":
        raise DataError(f"{path} does not describe a CNN model.")

    model = CnnModel(preset=root.get("preset"), seed=int(root.get("seed")),
                     widths=parse_shape(root.get("widths")))

    layout = [(a.get("name"), int(a.get("offset")), parse_shape(a.get("shape")))
              for a in root.arrays.iterchildren("array")]
    arrays = read_blob(path.parent / root.get("blob"), layout)

    parameters = model.parameters()
    buffers = model.buffers()

    for name, value in arrays.items():
        if name in parameters:
            target = parameters[name].value
        elif name in buffers:
            target = buffers[name]
        else:
            raise DataError(f"Unexpected array '{name}' in {path}.")

        if target.shape != value.shape:
            raise DataError(f"Array '{name}' has shape {value.shape}, expected {target.shape}.")

        target[...] = value

    return model.eval()
