import pytest

from cry_detection.config import RunConfig, parse_override
from cry_detection.detect import PipelineConfig
from cry_detection.exceptions import ConfigError
from cry_detection.variants import ModelSpec


def _user_config(tmp_path, body, tag="run_config"):
    path = tmp_path / "config.xml"
    path.write_text(f"<{tag}>{body}</{tag}>")
    return path


def test_defaults():
    config = RunConfig.load()

    assert config.variant == "dsf_af"
    assert config.seed == 0
    assert config.jobs == 1
    assert config.test_split is None
    assert config.gamma() == "scale"
    assert config.pipeline() == PipelineConfig()
    assert config.model_spec() == ModelSpec()
    assert config.validate("predict") is config


def test_user_file_is_merged_over_defaults(tmp_path):
    config = RunConfig.load(_user_config(tmp_path, '<svm C="10"/><run variant="af"/>'))

    assert config.get_float("svm", "C") == 10.0
    assert config.gamma() == "scale"
    assert config.variant == "af"
    assert config.seed == 0


def test_overrides_win_over_user_file(tmp_path):
    config = RunConfig.load(_user_config(tmp_path, '<svm gamma="0.1"/>'),
                            ["svm.gamma=0.5", "run.seed = 3"])

    assert config.gamma() == 0.5
    assert config.seed == 3
    assert config.pipeline().seed == 3
    assert config.model_spec().train_config.rng_seed == 3


@pytest.mark.parametrize("text", ["svm.C", "svmC=1", "=1", ".C=1", "svm.=1"])
def test_malformed_overrides(text):
    with pytest.raises(ConfigError):
        parse_override(text)


def test_override_of_unknown_section():
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=["bogus.key=1"])


def test_unknown_keys_are_rejected(tmp_path):
    with pytest.raises(ConfigError, match="cost"):
        RunConfig.load(_user_config(tmp_path, '<svm cost="10"/>')).validate("predict")

    with pytest.raises(ConfigError):
        RunConfig.load(overrides=["svm.cost=10"]).validate("predict")

    with pytest.raises(ConfigError):
        RunConfig.load(_user_config(tmp_path, '<extras a="1"/>')).validate("predict")


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.xml")

    with pytest.raises(ConfigError):
        RunConfig.load(_user_config(tmp_path, "", tag="settings"))

    broken = tmp_path / "broken.xml"
    broken.write_text("<run_config><svm C='1'></run_config>")

    with pytest.raises(ConfigError):
        RunConfig.load(broken)


@pytest.mark.parametrize("override", [
    "run.variant=knn",
    "run.seed=-1",
    "run.seed=zero",
    "run.jobs=0",
    "network.preset=huge",
    "network.epochs=0",
    "network.beta1=1.5",
    "network.learning_rate=nan",
    "svm.C=0",
    "svm.gamma=-1",
    "preprocess.max_mask_seconds=6",
    "preprocess.band_edge_hz=20000",
    "paths.output=",
])
def test_invalid_values(override):
    with pytest.raises(ConfigError):
        RunConfig.load(overrides=[override]).validate("predict")


def test_required_inputs(tmp_path):
    with pytest.raises(ConfigError, match="manifest"):
        RunConfig.load().validate("train")

    with pytest.raises(ConfigError, match="not found"):
        RunConfig.load(overrides=[f"paths.manifest={tmp_path / 'none.csv'}"]).validate("evaluate")

    manifest = tmp_path / "manifest.csv"
    manifest.write_text("participant_id,recording_id,wav_path\n")
    config = RunConfig.load(overrides=[f"paths.manifest={manifest}"])

    assert config.validate("train") is config

    with pytest.raises(ConfigError, match="embedding"):
        RunConfig.load(overrides=[f"paths.manifest={manifest}", "run.variant=embed_svm"]) \
            .validate("train")

    with pytest.raises(ConfigError, match="test_manifest"):
        RunConfig.load(overrides=[f"paths.manifest={manifest}",
                                  f"paths.test_manifest={tmp_path / 'none.csv'}"]) \
            .validate("evaluate")

    with pytest.raises(ConfigError, match="test_split"):
        RunConfig.load(overrides=[f"paths.manifest={manifest}", f"paths.test_manifest={manifest}",
                                  "run.test_split=test"]).validate("evaluate")

    split = RunConfig.load(overrides=[f"paths.manifest={manifest}", "run.test_split= test "])

    assert split.validate("evaluate").test_split == "test"


def test_write_and_reload(tmp_path):
    config = RunConfig.load(overrides=["svm.C=4", "run.variant=cnn", "network.epochs=3"])
    config.write(tmp_path / "resolved.xml")

    reloaded = RunConfig.load(tmp_path / "resolved.xml")

    assert reloaded.get_float("svm", "C") == 4.0
    assert reloaded.variant == "cnn"
    assert reloaded.model_spec().train_config.epochs == 3
