import numpy as np
import pandas as pd
import pytest

from cry_detection.audio_io import AudioClip
from cry_detection.detect import LabelTrack
from cry_detection.exceptions import DataError
from cry_detection.preprocess import (WindowInstance, WindowLabel, balance, band_level_db,
                                      drop_mixed, make_windows, silence_filter, smooth_mask,
                                      time_mask_augment, write_window_manifest)

SLOW_RATE = 100


def oracle_levels(samples, rate=22050, segment=980, hop=490, edge=350.0):
    # Two-sided DFT band energy of each second, normalised to a full-scale sine
    n = np.arange(segment)
    taper = 0.5 - 0.5 * np.cos(2 * np.pi * n / segment)
    freqs = n * rate / segment
    in_band = (freqs >= edge) & (freqs <= rate - edge)

    levels = []
    for s in range(samples.size // rate):
        second = samples[s * rate:(s + 1) * rate]
        powers = [np.sum(np.abs(np.fft.fft(second[o:o + segment] * taper)[in_band]) ** 2)
                  for o in range(0, rate - segment + 1, hop)]
        band = np.mean(powers) / (segment * np.sum(taper ** 2))
        levels.append(10 * np.log10(band / 0.5) if band > 0 else -np.inf)

    return np.array(levels)


def test_silence_filter_known_values(sine):
    assert not silence_filter(AudioClip(np.zeros(3 * 22050))).any()
    assert silence_filter(AudioClip(sine(1000, 3.0, amplitude=1.0))).all()
    assert not silence_filter(AudioClip(sine(100, 3.0, amplitude=10 ** (-3 / 20)))).any()


def test_silence_filter_one_entry_per_whole_second():
    assert silence_filter(AudioClip(np.zeros(int(4.7 * 22050)))).shape == (4,)

    with pytest.raises(DataError):
        silence_filter(AudioClip(np.zeros(22049)))


def test_full_scale_sine_level(sine):
    assert band_level_db(sine(1000, 1.0, amplitude=1.0), 22050) == pytest.approx(0.0, abs=0.1)


def test_silence_filter_matches_band_energy_oracle():
    rng = np.random.default_rng(11)

    for _ in range(100):
        sigma = 10 ** rng.uniform(-4.5, -1.5, size=3)
        samples = np.concatenate([s * rng.standard_normal(22050) for s in sigma])
        samples[rng.integers(0, samples.size - 22050):][:rng.integers(0, 22050)] = 0.0
        samples = np.clip(samples, -1, 1)

        clip = AudioClip(samples)
        reference = oracle_levels(samples)

        levels = [band_level_db(samples[s * 22050:(s + 1) * 22050], 22050) for s in range(3)]
        np.testing.assert_allclose(levels, reference, atol=1e-6)
        np.testing.assert_array_equal(silence_filter(clip), reference >= -60.0)


def test_smooth_mask_fills_short_gaps():
    mask = [True] * 3 + [False] * 2 + [True] * 3
    assert smooth_mask(mask).tolist() == [True] * 8


def test_smooth_mask_drops_isolated_runs():
    mask = [False] * 6 + [True] * 4 + [False] * 6
    assert not smooth_mask(mask).any()


def test_smooth_mask_keeps_long_runs():
    assert smooth_mask([True] * 12).all()
    assert smooth_mask([False] * 2 + [True] * 5).tolist() == [False] * 2 + [True] * 5


def test_smooth_mask_is_idempotent():
    rng = np.random.default_rng(5)

    for _ in range(200):
        mask = rng.random(rng.integers(1, 80)) < rng.uniform(0.2, 0.8)
        once = smooth_mask(mask)

        np.testing.assert_array_equal(smooth_mask(once), once)


def _clip(n_seconds, rate=SLOW_RATE, recording_id="rec"):
    samples = np.linspace(-0.5, 0.5, n_seconds * rate)
    return AudioClip(samples, rate, recording_id=recording_id, participant_id="p01")


@pytest.mark.parametrize("n_seconds", range(5, 61))
def test_active_run_yields_n_minus_four_windows(n_seconds):
    windows = make_windows(_clip(n_seconds), np.ones(n_seconds, dtype=bool))
    assert len(windows) == n_seconds - 4


def test_make_windows_known_values():
    assert [w.start for w in make_windows(_clip(10), np.ones(10, bool))] == [0, 1, 2, 3, 4, 5]
    assert len(make_windows(_clip(7), np.ones(7, bool))) == 3
    assert make_windows(_clip(4), np.ones(4, bool)) == []

    mask = np.array([True] * 6 + [False] * 3 + [True] * 5)
    assert [w.start for w in make_windows(_clip(14), mask)] == [0, 1, 9]


def test_make_windows_content():
    clip = _clip(10)
    window = make_windows(clip, np.ones(10, bool))[2]

    assert window.samples.size == 5 * SLOW_RATE
    np.testing.assert_array_equal(window.samples, clip.samples[200:700])
    assert window.key == "rec:2"
    assert window.participant_id == "p01"
    assert window.label == WindowLabel.UNLABELED
    assert not window.augmented


def test_window_labels():
    labels = LabelTrack(((0.0, 3.0, "crying"), (3.0, 10.0, "not_crying")), 10.0)
    windows = make_windows(_clip(10), np.ones(10, bool), labels)

    assert windows[0].label == WindowLabel.MIXED
    assert windows[3].label == WindowLabel.NOT_CRYING

    labels = LabelTrack(((0.0, 5.0, "crying"), (5.0, 10.0, "not_crying")), 10.0)
    windows = make_windows(_clip(10), np.ones(10, bool), labels)

    assert windows[0].label == WindowLabel.CRYING
    assert [w.start for w in drop_mixed(windows)] == [0, 5]


def _window(label, start=0, value=0.25):
    return WindowInstance(samples=np.full(5 * SLOW_RATE, value), start=start, label=label,
                          recording_id="rec", sample_rate=SLOW_RATE)


def test_time_mask_augment_bounds():
    window = WindowInstance(samples=0.5 + 0.1 * np.random.default_rng(0).random(110250),
                            start=4, label=WindowLabel.CRYING, recording_id="rec")

    for seed in range(20):
        augmented = time_mask_augment(window, seed)
        zeroed = np.flatnonzero(augmented.samples == 0.0)

        assert 1 <= zeroed.size <= 9702
        assert np.all(np.diff(zeroed) == 1)
        assert augmented.augmented
        assert augmented.key == window.key

        kept = np.ones(window.samples.size, dtype=bool)
        kept[zeroed] = False
        np.testing.assert_array_equal(augmented.samples[kept], window.samples[kept])

    assert np.all(window.samples > 0)


def test_time_mask_augment_is_deterministic():
    window = _window(WindowLabel.CRYING)
    np.testing.assert_array_equal(time_mask_augment(window, 3).samples,
                                  time_mask_augment(window, 3).samples)


def test_time_mask_augment_rejects_other_labels():
    with pytest.raises(ValueError):
        time_mask_augment(_window(WindowLabel.NOT_CRYING), 0)


@pytest.mark.parametrize("n_crying, n_not_crying, expected_not_crying",
                         [(10, 100, 20), (10, 15, 15)])
def test_balance_counts(n_crying, n_not_crying, expected_not_crying):
    windows = ([_window(WindowLabel.CRYING, i) for i in range(n_crying)]
               + [_window(WindowLabel.NOT_CRYING, i) for i in range(n_not_crying)])

    balanced = balance(windows, rng_seed=0)
    crying = [w for w in balanced if w.label == WindowLabel.CRYING]
    not_crying = [w for w in balanced if w.label == WindowLabel.NOT_CRYING]

    assert len(crying) == 2 * n_crying
    assert sum(w.augmented for w in crying) == n_crying
    assert len(not_crying) == expected_not_crying
    assert len(not_crying) <= len(crying)
    assert len({w.start for w in not_crying}) == expected_not_crying


def test_balance_is_deterministic():
    windows = ([_window(WindowLabel.CRYING, i) for i in range(5)]
               + [_window(WindowLabel.NOT_CRYING, i) for i in range(40)])

    first, second = balance(windows, 9), balance(windows, 9)

    assert [(w.label, w.start, w.augmented) for w in first] == \
        [(w.label, w.start, w.augmented) for w in second]
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.samples, b.samples)


def test_balance_needs_both_classes():
    with pytest.raises(DataError):
        balance([_window(WindowLabel.CRYING)], 0)

    with pytest.raises(DataError):
        balance([_window(WindowLabel.NOT_CRYING)], 0)


def test_balance_warns_about_unlabelled_windows():
    windows = [_window(WindowLabel.CRYING), _window(WindowLabel.NOT_CRYING),
               _window(WindowLabel.MIXED)]

    with pytest.warns(RuntimeWarning):
        assert len(balance(windows, 0)) == 3


def test_write_window_manifest(tmp_path):
    windows = [_window(WindowLabel.CRYING, 3), _window(WindowLabel.NOT_CRYING, 8)]
    write_window_manifest(windows, tmp_path / "windows.csv")

    table = pd.read_csv(tmp_path / "windows.csv")

    assert list(table.columns) == ["recording_id", "start_s", "label", "augmented"]
    assert table["start_s"].tolist() == [3, 8]
    assert table["label"].tolist() == ["crying", "not_crying"]
