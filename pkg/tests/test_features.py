import numpy as np
import pandas as pd
import pytest

from cry_detection.features import (FEATURE_NAMES, N_FEATURES, N_WINDOW_FEATURES, FeatureVector,
                                    aggregate_seconds, export_feature_table, per_second_features,
                                    second_features, short_term_features, window_features,
                                    zero_crossing_rate)

FRAME = 1102

ZCR, ENERGY, ENERGY_ENTROPY, CENTROID, SPREAD, SPECTRAL_ENTROPY, FLUX, ROLLOFF = range(8)
CHROMA = slice(21, 34)


def test_feature_roster():
    assert N_FEATURES == 34
    assert N_WINDOW_FEATURES == 102
    assert FEATURE_NAMES[8] == "mfcc_1"
    assert FEATURE_NAMES[-1] == "chroma_std"


def test_zcr_of_alternating_signal():
    assert zero_crossing_rate(np.tile([1.0, -1.0], FRAME // 2)) == 1.0
    assert zero_crossing_rate(np.ones(FRAME)) == 0.0


def test_silent_frame_is_finite():
    values, spectrum = short_term_features(np.zeros(FRAME))

    assert values.shape == (N_FEATURES,)
    assert np.all(np.isfinite(values))
    assert values[ENERGY] == 0.0
    assert values[ZCR] == 0.0
    assert spectrum.shape == (FRAME // 2 + 1,)


def test_centroid_of_tone(sine):
    values, _ = short_term_features(sine(450, FRAME / 22050))
    assert values[CENTROID] == pytest.approx(450, abs=50)


def test_flux_needs_previous_frame(rng):
    frame = rng.uniform(-0.5, 0.5, FRAME)
    first, spectrum = short_term_features(frame)
    second, _ = short_term_features(rng.uniform(-0.5, 0.5, FRAME), previous_spectrum=spectrum)

    assert first[FLUX] == 0.0
    assert second[FLUX] > 0.0


def test_amplitude_scaling(rng):
    frame = rng.uniform(-0.5, 0.5, FRAME)

    reference, _ = short_term_features(frame)
    scaled, _ = short_term_features(0.5 * frame)

    for index in (ZCR, ENERGY_ENTROPY, CENTROID, SPREAD, SPECTRAL_ENTROPY, ROLLOFF):
        assert scaled[index] == pytest.approx(reference[index], abs=1e-9)

    np.testing.assert_allclose(scaled[CHROMA], reference[CHROMA], atol=1e-9)
    assert scaled[ENERGY] == pytest.approx(0.25 * reference[ENERGY])


def test_short_term_rejects_empty_frame():
    with pytest.raises(ValueError):
        short_term_features(np.zeros(0))


def test_second_features_shape(rng):
    assert second_features(rng.uniform(-0.5, 0.5, 22050)).shape == (N_FEATURES,)

    with pytest.raises(ValueError):
        second_features(np.zeros(100))


def test_constant_signal_gives_identical_seconds():
    rows = per_second_features(np.full(110250, 0.3))

    assert rows.shape == (5, N_FEATURES)
    for row in rows[1:]:
        np.testing.assert_array_equal(row, rows[0])


def test_energy_follows_loud_second(sine):
    samples = np.concatenate((np.zeros(4 * 22050), sine(1000, 1.0)))
    rows = per_second_features(samples)

    assert np.all(rows[4, ENERGY] > rows[:4, ENERGY])


def test_aggregate_seconds():
    rows = np.zeros((5, N_FEATURES))
    rows[:, 0] = [1, 2, 3, 4, 5]

    vector = aggregate_seconds(rows, window_start=7)

    assert isinstance(vector, FeatureVector)
    assert vector.window_start == 7.0
    assert vector.values.shape == (N_WINDOW_FEATURES,)
    assert vector.values[0] == 3.0
    assert vector.values[N_FEATURES] == 3.0
    assert vector.values[2 * N_FEATURES] == pytest.approx(np.sqrt(2))


def test_aggregate_ignores_order_of_seconds(rng):
    rows = rng.standard_normal((5, N_FEATURES))
    shuffled = rows[rng.permutation(5)]

    np.testing.assert_allclose(aggregate_seconds(shuffled).values,
                               aggregate_seconds(rows).values, rtol=1e-12, atol=1e-12)


def test_aggregate_rejects_wrong_shape():
    with pytest.raises(ValueError):
        aggregate_seconds(np.zeros((4, N_FEATURES)))


def test_window_features_of_silence_are_finite():
    vector = window_features(np.zeros(110250))
    assert np.all(np.isfinite(vector.values))


def test_window_features_of_constant_signal():
    values = window_features(np.full(110250, 0.3), window_start=2).values

    np.testing.assert_allclose(values[:N_FEATURES], values[N_FEATURES:2 * N_FEATURES],
                               rtol=1e-12)
    np.testing.assert_allclose(values[2 * N_FEATURES:], 0.0, atol=1e-12)


def test_window_features_reject_wrong_length():
    with pytest.raises(ValueError):
        window_features(np.zeros(22050))


def test_export_feature_table(tmp_path):
    vectors = [FeatureVector(np.arange(102, dtype=float), 0.0),
               FeatureVector(np.ones(102), 1.0)]
    path = tmp_path / "features.csv"

    export_feature_table(["rec:0", "rec:1"], vectors, ["crying", "not_crying"], path)
    table = pd.read_csv(path)

    assert list(table.columns[:3]) == ["id", "start_s", "mean_zcr"]
    assert table.columns[-1] == "label"
    assert table.shape == (2, 105)
    assert table["mean_energy"].tolist() == [1.0, 1.0]
    assert table["label"].tolist() == ["crying", "not_crying"]


def test_export_unnamed_columns(tmp_path):
    matrix = np.zeros((3, 5))
    table = export_feature_table(["a:0", "a:1", "a:2"], matrix, ["crying"] * 3,
                                 tmp_path / "features.csv", starts=[0, 1, 2])

    assert list(table.columns) == ["id", "start_s", "f0", "f1", "f2", "f3", "f4", "label"]
