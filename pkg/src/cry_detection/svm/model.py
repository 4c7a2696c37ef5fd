# A fitted RBF-kernel SVM together with the feature scaler learned from its training data

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from lxml import objectify

from ..exceptions import DataError, NumericError
from ..io import format_shape, parse_shape, read_blob, read_xml, write_blob, write_xml
from .smo import rbf_kernel, smo_solve

DEEP_FEATURE_SIZE = 1000
ACOUSTIC_FEATURE_SIZE = 102


@dataclass(frozen=True)
class SvmPrediction:
    label: str
    decision: float


@dataclass(eq=False)
class SvmModel:
    """
    A trained SVM.

    Attributes
    ----------
    support_vectors : numpy.ndarray
        Standardised training points with non-zero dual coefficients, shape (n_sv, d).
    dual_coef : numpy.ndarray
        alpha_i * y_i for each support vector.
    bias : float
        Offset b of the decision function.
    gamma : float
        RBF kernel width.
    C : float
        Box constraint used in training.
    scaler_mean, scaler_std : numpy.ndarray
        Per-dimension training mean and standard deviation (1 for constant dimensions).
    n_iter : int
        SMO iterations used.
    objective : list of float
        Dual objective per iteration, if recorded.
    """
    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    gamma: float
    C: float
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    n_iter: int = 0
    objective: list = field(default_factory=list)

    @property
    def n_features(self):
        return self.scaler_mean.size

    def transform(self, features):
        """Standardise features with the training statistics."""
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))

        if features.shape[1] != self.n_features:
            raise ValueError(f"Expected {self.n_features} features, got {features.shape[1]}.")

        return (features - self.scaler_mean) / self.scaler_std

    def decision_function(self, features):
        """f(x) = sum_i alpha_i y_i K(x_i, x) + b for each row of `features`."""
        kernel = rbf_kernel(self.transform(features), self.support_vectors, self.gamma)
        return kernel @ self.dual_coef + self.bias


def fit_scaler(features):
    """
    Per-dimension mean and population standard deviation; zero-variance dimensions get a
    standard deviation of 1 so they pass through unscaled.
    """
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std[std == 0] = 1.0

    return mean, std


def fit(features, labels, C=1.0, gamma="scale", tol=1e-3, rng_seed=0, cache_rows=512,
        record_objective=False):
    """
    Train an RBF-kernel SVM with SMO on standardised features.

    Parameters
    ----------
    features : array-like
        Training matrix, shape (n, d).
    labels : array-like
        +1 (crying) / -1 (not crying), or booleans (True = crying).
    C : float, optional
        Box constraint (default: 1).
    gamma : float or "scale", optional
        Kernel width. "scale" uses 1 / (d * var(X)) of the standardised training matrix.
    tol : float, optional
        KKT tolerance.
    rng_seed : int, optional
        Seed for tie-breaking in working-set selection.
    cache_rows : int, optional
        Size of the kernel-row LRU cache.
    record_objective : bool, optional
        Keep the dual objective of every SMO iteration on the model.

    Returns
    -------
    SvmModel
        The fitted model.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)

    if labels.dtype == bool:
        labels = np.where(labels, 1.0, -1.0)
    else:
        labels = labels.astype(np.float64)

    if features.ndim != 2 or features.shape[0] != labels.size:
        raise DataError(f"Features of shape {features.shape} do not match {labels.size} labels.")

    if features.shape[0] < 2:
        raise DataError("At least two training points are needed.")

    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise DataError("Labels must be +1 or -1.")

    if np.unique(labels).size < 2:
        raise DataError("Both classes must be present to train an SVM.")

    if not np.all(np.isfinite(features)):
        raise NumericError("Training features contain non-finite values.")

    mean, std = fit_scaler(features)
    scaled = (features - mean) / std

    if gamma == "scale":
        variance = scaled.var()
        gamma = 1.0 / (scaled.shape[1] * variance) if variance > 0 else 1.0

    gamma = float(gamma)

    if gamma <= 0 or C <= 0:
        raise ValueError("C and gamma must be positive.")

    result = smo_solve(scaled, labels, C=C, gamma=gamma, tol=tol, rng_seed=rng_seed,
                       cache_rows=cache_rows, record_objective=record_objective)

    support = result.alpha > 0

    if not support.any():
        raise NumericError("SMO returned no support vectors.")

    return SvmModel(
        support_vectors=scaled[support],
        dual_coef=result.alpha[support] * labels[support],
        bias=-result.rho,
        gamma=gamma,
        C=float(C),
        scaler_mean=mean,
        scaler_std=std,
        n_iter=result.n_iter,
        objective=result.objective,
    )


def predict(model, feature_vector):
    """
    Classify one feature vector.

    Parameters
    ----------
    model : SvmModel
        Fitted model.
    feature_vector : array-like
        Features with the training dimension.

    Returns
    -------
    SvmPrediction
        Label ("crying" when f(x) > 0; f(x) = 0 resolves to "not_crying") and decision value.
    """
    feature_vector = np.asarray(feature_vector, dtype=np.float64)

    if feature_vector.ndim != 1:
        raise ValueError("Expected a single feature vector.")

    decision = float(model.decision_function(feature_vector)[0])

    return SvmPrediction("crying" if decision > 0 else "not_crying", decision)


def predict_batch(model, features):
    """Boolean crying decisions (f(x) > 0) and decision values for each row of `features`."""
    decision = model.decision_function(features)
    return decision > 0, decision


def concat_dsf_af(deep, acoustic):
    """
    Concatenate deep spectrum features (1000) and acoustic features (102), in that order.

    Parameters
    ----------
    deep : array-like
        Deep features, shape (1000,) or (n, 1000).
    acoustic : array-like
        Acoustic features, shape (102,) or (n, 102).

    Returns
    -------
    numpy.ndarray
        Shape (1102,) or (n, 1102).
    """
    deep = np.asarray(deep, dtype=np.float64)
    acoustic = np.asarray(acoustic, dtype=np.float64)

    if deep.shape[-1] != DEEP_FEATURE_SIZE or acoustic.shape[-1] != ACOUSTIC_FEATURE_SIZE:
        raise ValueError(f"Expected {DEEP_FEATURE_SIZE} deep and {ACOUSTIC_FEATURE_SIZE} acoustic "
                         f"features, got {deep.shape[-1]} and {acoustic.shape[-1]}.")

    if deep.shape[:-1] != acoustic.shape[:-1]:
        raise ValueError("Deep and acoustic features describe different numbers of windows.")

    return np.concatenate((deep, acoustic), axis=-1)


def save_svm(model, path):
    """
    Save a model as an XML descriptor (`<path>.xml`) plus a little-endian float64 blob
    (`<path>.bin`) holding support vectors, coefficients and scaler.
    """
    path = Path(path)
    arrays = {
        "support_vectors": model.support_vectors,
        "dual_coef": model.dual_coef,
        "scaler_mean": model.scaler_mean,
        "scaler_std": model.scaler_std,
    }

    layout = write_blob(arrays, path.with_suffix(".bin"), dtype="<f8")

    root = objectify.Element("svm_model", kernel="rbf", gamma=repr(model.gamma), C=repr(model.C),
                             bias=repr(model.bias), n_iter=str(model.n_iter),
                             blob=path.with_suffix(".bin").name)
    arrays_element = objectify.SubElement(root, "arrays")

    for name, offset, shape in layout:
        objectify.SubElement(arrays_element, "array", name=name, offset=str(offset),
                             shape=format_shape(shape))

    write_xml(root.getroottree(), path.with_suffix(".xml"))


def load_svm(path):
    """Load a model written by `save_svm`."""
    path = Path(path).with_suffix(".xml")
    root = read_xml(path).getroot()

    if root.tag != "svm_model":
        raise DataError(f"{path} does not describe an SVM model.")

    layout = [(a.get("name"), int(a.get("offset")), parse_shape(a.get("shape")))
              for a in root.arrays.iterchildren("array")]
    arrays = read_blob(path.parent / root.get("blob"), layout, dtype="<f8")

    return SvmModel(
        support_vectors=arrays["support_vectors"],
        dual_coef=arrays["dual_coef"],
        bias=float(root.get("bias")),
        gamma=float(root.get("gamma")),
        C=float(root.get("C")),
        scaler_mean=arrays["scaler_mean"],
        scaler_std=arrays["scaler_std"],
        n_iter=int(root.get("n_iter")),
    )
