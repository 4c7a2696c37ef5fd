# Spectral transforms: power STFT, mel filterbanks and the log-mel images fed to the CNN

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import fft
from scipy.signal import get_window

from .audio_io import CANONICAL_RATE

WINDOW_SECONDS = 5
IMAGE_SIZE = 225

# 110250 samples give 224 frames at hop 490; padding by one hop yields the 225th frame
IMAGE_PADDING = 490

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class StftConfig:
    """
    Short-time Fourier transform parameters.

    Attributes
    ----------
    samples_per_segment : int
        Frame length in samples.
    overlap : int
        Number of samples shared by consecutive frames.
    window : str
        Taper name understood by `scipy.signal.get_window`.
    """
    samples_per_segment: int = 980
    overlap: int = 490
    window: str = "hann"

    def __post_init__(self):
        if self.samples_per_segment < 1:
            raise ValueError("samples_per_segment must be positive.")

        if not 0 <= self.overlap < self.samples_per_segment:
            raise ValueError(f"overlap must lie in [0, {self.samples_per_segment}), "
                             f"got {self.overlap}.")

    @property
    def hop(self):
        return self.samples_per_segment - self.overlap

    @property
    def n_bins(self):
        return self.samples_per_segment // 2 + 1


@dataclass(frozen=True, eq=False)
class MelImage:
    """
    A standardised log-mel spectrogram of one analysis window.

    Attributes
    ----------
    values : numpy.ndarray
        225 x 225 matrix (mel bins x time frames).
    start : float
        Start of the source window within its recording, in seconds.
    """
    values: np.ndarray
    start: float = 0.0


def analysis_window(cfg=StftConfig()):
    """Return the taper applied to every STFT frame."""
    return get_window(cfg.window, cfg.samples_per_segment)


def stft_power(samples, cfg=StftConfig()):
    """
    Compute the power spectrogram of a signal.

    Parameters
    ----------
    samples : array-like
        Real signal with at least `cfg.samples_per_segment` values.
    cfg : StftConfig, optional
        Frame length, overlap and taper.

    Returns
    -------
    numpy.ndarray
        Matrix of shape (samples_per_segment // 2 + 1, n_frames) holding |DFT|^2 of each
        tapered frame, where n_frames = floor((N - segment) / hop) + 1.
    """
    samples = np.asarray(samples, dtype=np.float64)

    if samples.ndim != 1 or samples.size < cfg.samples_per_segment:
        raise ValueError(f"Need at least {cfg.samples_per_segment} samples, got {samples.size}.")

    frames = sliding_window_view(samples, cfg.samples_per_segment)[::cfg.hop]
    spectrum = fft.rfft(frames * analysis_window(cfg), axis=-1)

    return (np.abs(spectrum) ** 2).T


def hz_to_mel(frequency):
    """HTK mel scale: 2595 * log10(1 + f / 700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(frequency, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    """Inverse of `hz_to_mel`."""
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(n_mels, sample_rate):
    """
    Centre frequencies (Hz) of `n_mels` filters equally spaced on the mel scale between 0 Hz
    and the Nyquist frequency.
    """
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    return edges[1:-1]


@lru_cache(maxsize=16)
def _cached_filterbank(n_mels, n_fft, sample_rate):
    n_bins = n_fft // 2 + 1
    bin_freqs = np.arange(n_bins) * sample_rate / n_fft
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))

    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_freqs - lower) / (center - lower)
    falling = (upper - bin_freqs) / (upper - center)
    bank = np.maximum(0.0, np.minimum(rising, falling))

    # Low filters can be narrower than the bin spacing and fall between bins
    empty = np.flatnonzero(bank.sum(axis=1) == 0)
    nearest = np.rint(edges[1:-1][empty] * n_fft / sample_rate).astype(int)
    bank[empty, np.clip(nearest, 0, n_bins - 1)] = 1.0

    bank.setflags(write=False)
    return bank


def mel_filterbank(n_mels=IMAGE_SIZE, n_fft=980, sample_rate=CANONICAL_RATE):
    """
    Build a bank of triangular filters on the HTK mel scale.

    Filter centres are equally spaced in mel between 0 Hz and Nyquist. A filter narrower than
    the DFT bin spacing that covers no bin puts unit weight on the bin nearest its centre.

    Parameters
    ----------
    n_mels : int, optional
        Number of filters (default: 225).
    n_fft : int, optional
        DFT length the filters apply to (default: 980).
    sample_rate : int, optional
        Sampling rate in Hz.

    Returns
    -------
    numpy.ndarray
        Non-negative matrix of shape (n_mels, n_fft // 2 + 1). Read-only; copy before editing.
    """
    n_bins = n_fft // 2 + 1

    if n_mels < 1:
        raise ValueError("n_mels must be at least 1.")

    if n_mels > n_bins:
        raise ValueError(f"n_mels ({n_mels}) exceeds the {n_bins} usable frequency bins.")

    return _cached_filterbank(int(n_mels), int(n_fft), int(sample_rate))


def mel_image(window_samples, start=0.0, sample_rate=CANONICAL_RATE, cfg=StftConfig()):
    """
    Turn one 5 s analysis window into a 225 x 225 standardised log-mel image.

    The window is zero-padded by 490 samples to produce exactly 225 frames; mel energies are
    log-compressed with a floor of 1e-10 and then standardised to zero mean and unit variance
    over the whole image. Images with no variance (e.g. digital silence) become all zeros.

    Parameters
    ----------
    window_samples : array-like
        Exactly 5 s of audio (110250 samples at 22050 Hz).
    start : float, optional
        Start time of the window within its recording, in seconds.
    sample_rate : int, optional
        Sampling rate in Hz.
    cfg : StftConfig, optional
        STFT parameters.

    Returns
    -------
    MelImage
        The image.
    """
    window_samples = np.asarray(window_samples, dtype=np.float64)
    expected = WINDOW_SECONDS * sample_rate

    if window_samples.shape != (expected,):
        raise ValueError(f"Expected a window of {expected} samples, got shape "
                         f"{window_samples.shape}.")

    padded = np.concatenate((window_samples, np.zeros(IMAGE_PADDING)))
    power = stft_power(padded, cfg)
    mel = mel_filterbank(IMAGE_SIZE, cfg.samples_per_segment, sample_rate) @ power

    values = np.log(mel + LOG_FLOOR)
    std = values.std()

    # A constant image still shows rounding-level spread around its mean
    if std > 1e-8:
        values = (values - values.mean()) / std
    else:
        values = np.zeros_like(values)

    return MelImage(values, float(start))


def dump_mel_image(image, path, fmt="csv"):
    """
    Write a mel image for inspection.

    Parameters
    ----------
    image : MelImage
        Image to write.
    path : str or pathlib.Path
        Output path.
    fmt : str, optional
        "csv" (one row per mel bin) or "bin" (little-endian float32, row-major).

    Returns
    -------
    None
    """
    if fmt == "csv":
        np.savetxt(str(path), image.values, delimiter=",", fmt="%.8g")
    elif fmt == "bin":
        image.values.astype("<f4").tofile(str(path))
    else:
        raise ValueError(f"Unknown format: {fmt}")
