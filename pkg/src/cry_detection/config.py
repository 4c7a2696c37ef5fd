# Run configuration: the packaged default XML, merged with a user file and command-line overrides

from copy import deepcopy
from pathlib import Path
from pkgutil import get_data

import numpy as np
from lxml.etree import XMLSyntaxError

from .detect import PipelineConfig
from .exceptions import ConfigError
from .io import from_string, write_xml
from .nn import PRESETS, TrainConfig
from .templating import update_from_template
from .utils import set_value
from .variants import VARIANTS, ModelSpec

DEFAULT_TEMPLATE = "templates/run_config.xml"


def _default_tree():
    return from_string(get_data(__name__, DEFAULT_TEMPLATE))


def parse_override(text):
    """
    Split a `section.key=value` override into its parts.

    Returns
    -------
    (str, str, str)
        Section, key and value.
    """
    target, sep, value = text.partition("=")
    section, dot, key = target.strip().partition(".")

    if not sep or not dot or not section or not key:
        raise ConfigError(f"Overrides must look like section.key=value, got '{text}'.")

    return section, key, value.strip()


class RunConfig:
    """
    The settings of one run, held as an XML tree with the layout of
    `templates/run_config.xml`. Typed accessors convert attribute values on demand;
    `validate` checks everything before any audio is read.
    """

    def __init__(self, tree):
        """
        Parameters
        ----------
        tree : lxml.etree.ElementTree
            A complete configuration tree (usually built by `RunConfig.load`).
        """
        self.tree = tree
        self.root = tree.getroot()

    @classmethod
    def load(cls, path=None, overrides=()):
        """
        Build a configuration from the packaged defaults, an optional user file and
        `section.key=value` overrides (applied last, in order).

        Parameters
        ----------
        path : str or pathlib.Path, optional
            User configuration XML with outer tag `<run_config>`.
        overrides : list of str, optional
            Overrides such as "svm.C=10".

        Returns
        -------
        RunConfig
            The (not yet validated) configuration.
        """
        tree = _default_tree()

        if path is not None:
            if not Path(path).is_file():
                raise ConfigError(f"Configuration file not found: {path}")

            try:
                update_from_template(tree, str(path))
            except XMLSyntaxError as e:
                raise ConfigError(f"Cannot parse configuration {path}: {e}") from e

        for override in overrides:
            section, key, value = parse_override(override)
            set_value(tree.getroot(), section, key, value)

        return cls(tree)

    def get(self, section, key):
        element = self.root.find(section)

        if element is None or element.get(key) is None:
            raise ConfigError(f"Missing configuration value {section}.{key}.")

        return element.get(key)

    def _typed(self, section, key, kind):
        text = self.get(section, key)

        try:
            return kind(text)
        except ValueError:
            raise ConfigError(f"{section}.{key} must be of type {kind.__name__}, "
                              f"got '{text}'.") from None

    def get_int(self, section, key):
        return self._typed(section, key, int)

    def get_float(self, section, key):
        value = self._typed(section, key, float)

        if not np.isfinite(value):
            raise ConfigError(f"{section}.{key} must be finite, got {value}.")

        return value

    def get_path(self, section, key):
        """A path setting, or None when empty."""
        text = self.get(section, key).strip()
        return Path(text) if text else None

    @property
    def variant(self):
        return self.get("run", "variant")

    @property
    def seed(self):
        return self.get_int("run", "seed")

    @property
    def jobs(self):
        return self.get_int("run", "jobs")

    @property
    def test_split(self):
        """Split tag of the manifest entries held out as a test corpus, or None."""
        return self.get("run", "test_split").strip() or None

    @property
    def output(self):
        return self.get_path("paths", "output")

    def gamma(self):
        text = self.get("svm", "gamma")
        return text if text == "scale" else self.get_float("svm", "gamma")

    def _check_keys(self):
        # Every section and attribute must exist in the packaged defaults
        defaults = _default_tree().getroot()

        for element in self.root.iterchildren():
            reference = defaults.find(element.tag)

            if reference is None:
                raise ConfigError(f"Unknown configuration section <{element.tag}>.")

            unknown = sorted(set(element.attrib) - set(reference.attrib))

            if unknown:
                raise ConfigError(f"Unknown keys in <{element.tag}>: {unknown}.")

    def validate(self, command="evaluate"):
        """
        Check types, ranges and required inputs for `command` ("train", "predict" or
        "evaluate"). Input files must exist.

        Returns
        -------
        RunConfig
            self
        """
        self._check_keys()

        if self.variant not in VARIANTS:
            raise ConfigError(f"run.variant must be one of {VARIANTS}, got '{self.variant}'.")

        if self.seed < 0:
            raise ConfigError("run.seed must be non-negative.")

        if self.jobs < 1:
            raise ConfigError("run.jobs must be at least 1.")

        if self.get("network", "preset") not in PRESETS:
            raise ConfigError(f"network.preset must be one of {list(PRESETS)}.")

        self.pipeline()
        self.model_spec()

        if self.output is None:
            raise ConfigError("paths.output must be set.")

        required = []

        if command in ("train", "evaluate"):
            required.append(("paths", "manifest"))

        if self.variant == "embed_svm":
            required.append(("paths", "embeddings"))

        for section, key in required:
            path = self.get_path(section, key)

            if path is None:
                raise ConfigError(f"{section}.{key} is required for '{command}' with variant "
                                  f"'{self.variant}'.")

            if not path.is_file():
                raise ConfigError(f"{section}.{key} file not found: {path}")

        test_manifest = self.get_path("paths", "test_manifest")

        if command == "evaluate" and test_manifest is not None and not test_manifest.is_file():
            raise ConfigError(f"paths.test_manifest file not found: {test_manifest}")

        if test_manifest is not None and self.test_split is not None:
            raise ConfigError("Set either paths.test_manifest or run.test_split, not both.")

        return self

    def pipeline(self):
        """Pre- and post-processing settings as a PipelineConfig."""
        cfg = PipelineConfig(
            threshold_db=self.get_float("preprocess", "threshold_db"),
            band_edge_hz=self.get_float("preprocess", "band_edge_hz"),
            max_mask_seconds=self.get_float("preprocess", "max_mask_seconds"),
            merge_gap_s=self.get_int("preprocess", "merge_gap_s"),
            min_run_s=self.get_int("preprocess", "min_run_s"),
            max_run_s=self.get_int("smoothing", "max_run_s"),
            seed=self.seed,
        )

        if not 0 < cfg.band_edge_hz < 11025:
            raise ConfigError(f"preprocess.band_edge_hz must lie in (0, 11025), got "
                              f"{cfg.band_edge_hz}.")

        if not 0 < cfg.max_mask_seconds <= 5:
            raise ConfigError("preprocess.max_mask_seconds must lie in (0, 5].")

        if cfg.merge_gap_s < 0 or cfg.min_run_s < 1 or cfg.max_run_s < 0:
            raise ConfigError("Smoothing lengths must be non-negative (min_run_s at least 1).")

        return cfg

    def model_spec(self):
        """The model variant and its settings as a ModelSpec."""
        gamma = self.gamma()
        C = self.get_float("svm", "C")
        tol = self.get_float("svm", "tol")
        cache_rows = self.get_int("svm", "cache_rows")

        if C <= 0 or tol <= 0 or cache_rows < 1 or (gamma != "scale" and gamma <= 0):
            raise ConfigError("svm.C, svm.tol, svm.gamma and svm.cache_rows must be positive.")

        try:
            train_config = TrainConfig(
                learning_rate=self.get_float("network", "learning_rate"),
                beta1=self.get_float("network", "beta1"),
                beta2=self.get_float("network", "beta2"),
                epsilon=self.get_float("network", "epsilon"),
                epochs=self.get_int("network", "epochs"),
                batch_size=self.get_int("network", "batch_size"),
                rng_seed=self.seed,
            )

            embeddings = self.get_path("paths", "embeddings")

            return ModelSpec(
                variant=self.variant,
                seed=self.seed,
                preset=self.get("network", "preset"),
                train_config=train_config,
                C=C,
                gamma=gamma,
                tol=tol,
                cache_rows=cache_rows,
                embeddings=str(embeddings) if embeddings is not None else None,
            )
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def write(self, path):
        """Write the resolved configuration as XML."""
        write_xml(deepcopy(self.tree), path)
