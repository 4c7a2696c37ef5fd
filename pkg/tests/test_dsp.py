import numpy as np
import pytest

from cry_detection.dsp import (IMAGE_SIZE, MelImage, StftConfig, dump_mel_image, hz_to_mel,
                               mel_center_frequencies, mel_filterbank, mel_image, mel_to_hz,
                               stft_power)

SEGMENT = 980


def naive_power(samples, segment=SEGMENT, hop=490):
    # Explicit DFT of periodic-Hann frames
    n = np.arange(segment)
    taper = 0.5 - 0.5 * np.cos(2 * np.pi * n / segment)
    basis = np.exp(-2j * np.pi * np.outer(np.arange(segment // 2 + 1), n) / segment)

    columns = []
    for offset in range(0, samples.size - segment + 1, hop):
        columns.append(np.abs(basis @ (samples[offset:offset + segment] * taper)) ** 2)

    return np.stack(columns, axis=1)


def test_stft_config():
    cfg = StftConfig()
    assert cfg.hop == 490
    assert cfg.n_bins == 491

    with pytest.raises(ValueError):
        StftConfig(overlap=980)


@pytest.mark.parametrize("seed", range(20))
def test_stft_matches_naive_dft(seed):
    samples = np.random.default_rng(seed).uniform(-1, 1, 3 * 490 + 490)

    ours = stft_power(samples)
    reference = naive_power(samples)

    assert ours.shape == reference.shape == (491, 3)
    assert np.max(np.abs(ours - reference)) / np.max(np.abs(reference)) < 1e-6


def test_stft_of_silence_is_zero():
    power = stft_power(np.zeros(110250))
    assert power.shape == (491, 224)
    assert np.all(power == 0.0)


def test_stft_frame_count_with_padding():
    assert stft_power(np.zeros(110250 + 490)).shape == (491, 225)


def test_stft_dominant_bin(sine):
    # 225 Hz is exactly bin 10 of a 980-point DFT at 22050 Hz
    power = stft_power(sine(225, SEGMENT / 22050))
    assert power.shape[1] == 1
    assert np.argmax(power[:, 0]) == 10


def test_stft_parseval_scaling():
    rng = np.random.default_rng(7)
    quiet = stft_power(0.1 * rng.standard_normal(110250)).sum()
    loud = stft_power(0.2 * rng.standard_normal(110250)).sum()

    assert loud / quiet == pytest.approx(4.0, rel=0.05)


def test_stft_rejects_short_input():
    with pytest.raises(ValueError):
        stft_power(np.zeros(SEGMENT - 1))


def test_mel_scale():
    assert hz_to_mel(1000.0) == pytest.approx(999.99, abs=0.01)
    assert hz_to_mel(0.0) == 0.0

    freqs = np.array([50.0, 440.0, 8000.0])
    np.testing.assert_allclose(mel_to_hz(hz_to_mel(freqs)), freqs)


def test_filterbank_properties():
    bank = mel_filterbank()

    assert bank.shape == (IMAGE_SIZE, 491)
    assert np.all(bank >= 0)
    assert np.all(bank.sum(axis=1) > 0)
    assert np.all(np.isfinite(bank))

    centers = mel_center_frequencies(IMAGE_SIZE, 22050)
    assert np.all(np.diff(centers) > 0)
    assert centers[-1] < 11025


def test_filterbank_is_read_only():
    with pytest.raises(ValueError):
        mel_filterbank()[0, 0] = 1.0


@pytest.mark.parametrize("n_mels", [0, 492])
def test_filterbank_rejects_bad_sizes(n_mels):
    with pytest.raises(ValueError):
        mel_filterbank(n_mels)


def test_mel_image_of_silence_is_zero():
    image = mel_image(np.zeros(110250), start=3.0)

    assert isinstance(image, MelImage)
    assert image.values.shape == (225, 225)
    assert image.start == 3.0
    assert np.all(image.values == 0.0)


def test_mel_image_is_standardised(rng):
    values = mel_image(rng.uniform(-0.5, 0.5, 110250)).values

    assert abs(values.mean()) < 1e-9
    assert values.std() == pytest.approx(1.0)


def test_mel_image_energy_lands_in_tone_band(sine):
    values = mel_image(sine(450, 5.0)).values
    centers = mel_center_frequencies(IMAGE_SIZE, 22050)

    loudest = np.argmax(values.mean(axis=1))
    assert 400 <= centers[loudest] <= 500


def test_mel_image_is_deterministic(rng):
    samples = rng.uniform(-0.5, 0.5, 110250)
    np.testing.assert_array_equal(mel_image(samples).values, mel_image(samples).values)


def test_mel_image_rejects_wrong_length():
    with pytest.raises(ValueError):
        mel_image(np.zeros(110249))


def test_dump_mel_image(tmp_path, rng):
    image = mel_image(rng.uniform(-0.5, 0.5, 110250))

    dump_mel_image(image, tmp_path / "image.csv")
    dump_mel_image(image, tmp_path / "image.bin", fmt="bin")

    from_csv = np.loadtxt(tmp_path / "image.csv", delimiter=",")
    from_bin = np.fromfile(tmp_path / "image.bin", dtype="<f4").reshape(225, 225)

    np.testing.assert_allclose(from_csv, image.values, rtol=1e-6, atol=1e-6)
    np.testing.assert_allclose(from_bin, image.values, rtol=1e-6, atol=1e-6)

    with pytest.raises(ValueError):
        dump_mel_image(image, tmp_path / "image.png", fmt="png")
