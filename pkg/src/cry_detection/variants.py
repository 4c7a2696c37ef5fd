# The four detection models (acoustic-feature SVM, CNN, deep spectrum + acoustic SVM and
# embedding SVM) behind a common fit / predict_windows interface

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from lxml import objectify

from . import nn, svm
from .dsp import WINDOW_SECONDS, mel_image
from .exceptions import DataError, NumericError
from .features import aggregate_seconds, per_second_features, second_features
from .io import read_xml, write_xml
from .preprocess import WindowLabel

logger = logging.getLogger(__name__)

VARIANTS = ("af", "cnn", "dsf_af", "embed_svm")

# Images per forward pass at inference
INFERENCE_BATCH = 64


@dataclass
class ModelSpec:
    """
    A model variant and all of its settings.

    Attributes
    ----------
    variant : str
        One of "af", "cnn", "dsf_af" or "embed_svm".
    seed : int
        Seed for network initialisation and SVM tie-breaking.
    preset : str
        Network size, "desk" or "full".
    train_config : nn.TrainConfig
        Optimiser settings for the CNN.
    C, gamma, tol, cache_rows
        SVM settings (see `svm.fit`).
    embeddings : str, optional
        Embedding file, required by "embed_svm".
    """
    variant: str = "dsf_af"
    seed: int = 0
    preset: str = "desk"
    train_config: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    C: float = 1.0
    gamma: object = "scale"
    tol: float = 1e-3
    cache_rows: int = 512
    embeddings: str = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"Unknown model variant: {self.variant}")

        if self.preset not in nn.PRESETS:
            raise ValueError(f"Unknown network preset: {self.preset}")

        if self.variant == "embed_svm" and not self.embeddings:
            raise ValueError("The embed_svm variant needs an embedding file.")


class AcousticFeatureCache:
    """
    Per-second acoustic features of unaugmented windows, computed once per (recording, second).
    Overlapping windows share four of their five seconds, so each second is analysed once.
    """

    def __init__(self):
        self._rows = {}

    def per_second(self, window):
        if window.augmented or not window.recording_id:
            return per_second_features(window.samples, window.sample_rate)

        rate = window.sample_rate
        rows = []

        for k in range(WINDOW_SECONDS):
            key = (window.recording_id, window.start + k)

            if key not in self._rows:
                self._rows[key] = second_features(window.samples[k * rate:(k + 1) * rate], rate)

            rows.append(self._rows[key])

        return np.stack(rows)

    def window_matrix(self, windows):
        """102-d acoustic vectors of `windows`, stacked into an (n, 102) matrix."""
        matrix = np.stack([aggregate_seconds(self.per_second(w), w.start).values for w in windows])

        if not np.all(np.isfinite(matrix)):
            raise NumericError("Acoustic features contain non-finite values.")

        return matrix


def mel_batch(windows):
    """Log-mel images of `windows`, shape (n, 225, 225), float32."""
    return np.stack([mel_image(w.samples, w.start, w.sample_rate).values
                     for w in windows]).astype(np.float32)


def window_labels(windows):
    """Boolean crying targets of labelled training windows."""
    labels = [w.label for w in windows]
    invalid = {label.value for label in labels} - {WindowLabel.CRYING.value,
                                                    WindowLabel.NOT_CRYING.value}

    if invalid:
        raise DataError(f"Training windows must be crying or not_crying, got {sorted(invalid)}.")

    return np.array([label == WindowLabel.CRYING for label in labels])


class Detector:
    """
    Base class of the model variants. Subclasses implement `_fit` and `_predict`, taking the
    windows (and, for `_fit`, boolean crying targets).
    """
    variant = None

    def __init__(self, spec):
        self.spec = spec
        self.cnn = None
        self.svm = None

    def fit(self, windows):
        """
        Train on labelled windows (typically the output of `preprocess.balance`).

        Returns
        -------
        Detector
            self
        """
        if len(windows) == 0:
            raise DataError("No training windows.")

        labels = window_labels(windows)
        logger.info("training %s on %d windows (%d crying)", self.variant, len(windows),
                    int(labels.sum()))

        self._fit(windows, labels)
        return self

    def predict_windows(self, windows):
        """
        Classify windows.

        Returns
        -------
        numpy.ndarray
            One boolean per window; True means crying.
        """
        if len(windows) == 0:
            return np.zeros(0, dtype=bool)

        return np.asarray(self._predict(windows), dtype=bool)

    def _fit_svm(self, features, labels):
        self.svm = svm.fit(features, labels, C=self.spec.C, gamma=self.spec.gamma,
                           tol=self.spec.tol, rng_seed=self.spec.seed,
                           cache_rows=self.spec.cache_rows)
        logger.info("SVM: %d support vectors after %d SMO iterations",
                    self.svm.support_vectors.shape[0], self.svm.n_iter)

    def _predict_svm(self, features):
        crying, decision = svm.predict_batch(self.svm, features)

        if not np.all(np.isfinite(decision)):
            raise NumericError("SVM decision values are not finite.")

        return crying

    def _fit_cnn(self, images, labels):
        self.cnn = nn.CnnModel(preset=self.spec.preset, seed=self.spec.seed)
        nn.train(self.cnn, images, labels.astype(int), self.spec.train_config)

    def _predict_cnn(self, images):
        return np.concatenate([nn.predict_batch(self.cnn, images[i:i + INFERENCE_BATCH])[0]
                               for i in range(0, len(images), INFERENCE_BATCH)])

    def feature_table(self, windows):
        """SVM input features of `windows`, or None for variants without an SVM."""
        return None

    def save(self, directory):
        """
        Write the model files to `directory`: `detector.xml` plus `cnn.xml/.bin` and/or
        `svm.xml/.bin`.
        """
        directory = Path(directory)
        root = objectify.Element("detector", variant=self.variant, seed=str(self.spec.seed),
                                 preset=self.spec.preset)

        if self.cnn is not None:
            nn.save_model(self.cnn, directory / "cnn", self.spec.train_config)
            objectify.SubElement(root, "cnn", file="cnn.xml")

        if self.svm is not None:
            svm.save_svm(self.svm, directory / "svm")
            objectify.SubElement(root, "svm", file="svm.xml")

        write_xml(root.getroottree(), directory / "detector.xml")


class AfDetector(Detector):
    """RBF SVM on the 102-d acoustic feature vector."""
    variant = "af"

    def feature_table(self, windows):
        return AcousticFeatureCache().window_matrix(windows)

    def _fit(self, windows, labels):
        self._fit_svm(self.feature_table(windows), labels)

    def _predict(self, windows):
        return self._predict_svm(self.feature_table(windows))


class CnnDetector(Detector):
    """The modified AlexNet applied end to end to log-mel images."""
    variant = "cnn"

    def _fit(self, windows, labels):
        self._fit_cnn(mel_batch(windows), labels)

    def _predict(self, windows):
        return self._predict_cnn(mel_batch(windows))


class DsfAfDetector(Detector):
    """
    RBF SVM on deep spectrum features (the CNN's last hidden layer) concatenated with the
    acoustic feature vector. The CNN is trained on the same windows first.
    """
    variant = "dsf_af"

    def feature_table(self, windows, images=None):
        if images is None:
            images = mel_batch(windows)

        deep = nn.deep_features(self.cnn, images, INFERENCE_BATCH)
        return svm.concat_dsf_af(deep, AcousticFeatureCache().window_matrix(windows))

    def _fit(self, windows, labels):
        images = mel_batch(windows)
        self._fit_cnn(images, labels)
        self._fit_svm(self.feature_table(windows, images), labels)

    def _predict(self, windows):
        return self._predict_svm(self.feature_table(windows))


class EmbedSvmDetector(Detector):
    """RBF SVM on externally extracted 128-d embeddings, looked up by window key."""
    variant = "embed_svm"

    def feature_table(self, windows):
        _, values = svm.load_embeddings(self.spec.embeddings, [w.key for w in windows])
        return values

    def _fit(self, windows, labels):
        self._fit_svm(self.feature_table(windows), labels)

    def _predict(self, windows):
        return self._predict_svm(self.feature_table(windows))


DETECTORS = {cls.variant: cls for cls in (AfDetector, CnnDetector, DsfAfDetector,
                                          EmbedSvmDetector)}


def build_detector(spec):
    """Create an untrained detector for `spec.variant`."""
    return DETECTORS[spec.variant](spec)


def load_detector(directory, embeddings=None):
    """
    Load a detector written by `Detector.save`.

    Parameters
    ----------
    directory : str or pathlib.Path
        Model directory.
    embeddings : str, optional
        Embedding file holding the windows to be classified (embed_svm only).

    Returns
    -------
    Detector
        The fitted detector.
    """
    directory = Path(directory)
    descriptor = directory / "detector.xml"

    if not descriptor.exists():
        raise DataError(f"No detector found in {directory}.")

    root = read_xml(descriptor).getroot()
    spec = ModelSpec(variant=root.get("variant"), seed=int(root.get("seed")),
                     preset=root.get("preset"),
                     embeddings=embeddings if root.get("variant") == "embed_svm" else None)

    detector = build_detector(spec)

    if root.find("cnn") is not None:
        detector.cnn = nn.load_model(directory / root.cnn.get("file"))

    if root.find("svm") is not None:
        detector.svm = svm.load_svm(directory / root.svm.get("file"))

    return detector
