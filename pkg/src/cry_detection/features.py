# Short-term acoustic features and their aggregation into one vector per 5 s window.
#
# The 34 short-term features follow the roster of pyAudioAnalysis: zero-crossing rate,
# energy, entropy of energy, spectral centroid / spread / entropy / flux / rolloff, 13 MFCCs,
# a 12-bin chroma vector and the chroma deviation.

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pandas as pd
from scipy import fft
from scipy.signal import get_window

from .audio_io import CANONICAL_RATE
from .dsp import WINDOW_SECONDS, mel_filterbank

FRAME_SECONDS = 0.050
FRAME_STEP_SECONDS = 0.025

N_ENTROPY_BLOCKS = 10
N_MFCC = 13
N_MFCC_FILTERS = 40
ROLLOFF_FRACTION = 0.90

FEATURE_NAMES = (
    ["zcr", "energy", "energy_entropy", "spectral_centroid", "spectral_spread",
     "spectral_entropy", "spectral_flux", "spectral_rolloff"]
    + [f"mfcc_{i}" for i in range(1, N_MFCC + 1)]
    + [f"chroma_{i}" for i in range(1, 13)]
    + ["chroma_std"]
)

N_FEATURES = len(FEATURE_NAMES)
N_WINDOW_FEATURES = 3 * N_FEATURES


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """
    Acoustic summary of one window: mean, median and standard deviation over its five seconds
    of each short-term feature (102 values, in that block order).
    """
    values: np.ndarray
    window_start: float = 0.0


def zero_crossing_rate(frame):
    """Sign changes per sample (a ±1 alternation gives 1.0; zeros count as sign 0)."""
    count = np.sum(np.abs(np.diff(np.sign(frame)))) / 2.0
    return count / (frame.size - 1) if frame.size > 1 else 0.0


def energy(frame):
    """Mean squared amplitude."""
    return float(np.sum(frame ** 2) / frame.size)


def _block_entropy(values, n_blocks):
    # Entropy (bits) of the energy distribution over equal-length blocks; 0 for no energy
    block_len = values.size // n_blocks

    if block_len == 0:
        return 0.0

    blocks = values[:block_len * n_blocks].reshape(n_blocks, block_len)
    block_energy = np.sum(blocks ** 2, axis=1)
    total = block_energy.sum()

    if total <= 0:
        return 0.0

    shares = block_energy / total
    shares = shares[shares > 0]

    return float(-np.sum(shares * np.log2(shares)))


def energy_entropy(frame, n_blocks=N_ENTROPY_BLOCKS):
    """Entropy of the energy distribution over `n_blocks` sub-frames."""
    return _block_entropy(frame, n_blocks)


def magnitude_spectrum(frame, sample_rate):
    """
    Hann-tapered magnitude spectrum of a frame.

    Returns
    -------
    (numpy.ndarray, numpy.ndarray)
        Magnitudes and the frequency (Hz) of each bin.
    """
    taper = get_window("hann", frame.size) if frame.size > 1 else np.ones(1)
    spectrum = np.abs(fft.rfft(frame * taper))
    freqs = np.arange(spectrum.size) * sample_rate / frame.size

    return spectrum, freqs


def spectral_centroid_spread(spectrum, freqs):
    """Magnitude-weighted mean frequency and spread around it (Hz); (0, 0) for silence."""
    total = spectrum.sum()

    if total <= 0:
        return 0.0, 0.0

    weights = spectrum / total
    centroid = np.sum(freqs * weights)
    spread = np.sqrt(np.sum((freqs - centroid) ** 2 * weights))

    return float(centroid), float(spread)


def spectral_entropy(spectrum, n_blocks=N_ENTROPY_BLOCKS):
    """Entropy of spectral energy over `n_blocks` bands."""
    return _block_entropy(spectrum, n_blocks)


def spectral_flux(spectrum, previous):
    """Squared difference between sum-normalised magnitude spectra of consecutive frames."""
    if previous is None:
        return 0.0

    total, previous_total = spectrum.sum(), previous.sum()

    current = spectrum / total if total > 0 else spectrum
    previous = previous / previous_total if previous_total > 0 else previous

    return float(np.sum((current - previous) ** 2))


def spectral_rolloff(spectrum, freqs, fraction=ROLLOFF_FRACTION):
    """Frequency (Hz) below which `fraction` of the spectral energy lies; 0 for silence."""
    cumulative = np.cumsum(spectrum ** 2)
    total = cumulative[-1]

    if total <= 0:
        return 0.0

    index = np.searchsorted(cumulative, fraction * total, side="right")
    return float(freqs[min(index, freqs.size - 1)])


@lru_cache(maxsize=8)
def _mfcc_filterbank(n_fft, sample_rate):
    return mel_filterbank(N_MFCC_FILTERS, n_fft, sample_rate)


def mfcc(spectrum, n_fft, sample_rate, n_coefficients=N_MFCC):
    """
    Mel-frequency cepstral coefficients: the first `n_coefficients` orthonormal DCT-II
    coefficients of the log (floored at 1e-10) power in 40 mel bands spanning 0 Hz-Nyquist.
    """
    band_power = _mfcc_filterbank(n_fft, sample_rate) @ (spectrum ** 2)
    cepstrum = fft.dct(np.log(band_power + 1e-10), type=2, norm="ortho")

    return cepstrum[:n_coefficients]


def chroma_features(spectrum, freqs):
    """
    12-bin chroma vector and its standard deviation.

    Each bin above 0 Hz is assigned to the pitch class round(12 * log2(f / 27.5)) mod 12. A
    class holds the mean power of its bins, divided by the total spectral power.
    """
    power = spectrum[1:] ** 2
    total = power.sum()

    if total <= 0:
        return np.zeros(12), 0.0

    pitch_class = np.round(12.0 * np.log2(freqs[1:] / 27.5)).astype(int) % 12
    class_power = np.bincount(pitch_class, weights=power, minlength=12)
    class_count = np.bincount(pitch_class, minlength=12)

    chroma = np.divide(class_power, class_count, out=np.zeros(12), where=class_count > 0)
    chroma = chroma / total

    return chroma, float(np.std(chroma))


def short_term_features(frame, sample_rate=CANONICAL_RATE, previous_spectrum=None):
    """
    Compute the 34 short-term features of one frame.

    Parameters
    ----------
    frame : array-like
        Non-empty audio frame.
    sample_rate : int, optional
        Sampling rate in Hz.
    previous_spectrum : numpy.ndarray, optional
        Magnitude spectrum of the preceding frame, for spectral flux. The flux is 0 when it is
        None (first frame).

    Returns
    -------
    (numpy.ndarray, numpy.ndarray)
        The feature vector (ordered as `FEATURE_NAMES`) and this frame's magnitude spectrum,
        to be passed as `previous_spectrum` for the next frame.
    """
    frame = np.asarray(frame, dtype=np.float64)

    if frame.ndim != 1 or frame.size == 0:
        raise ValueError("Expected a non-empty one-dimensional frame.")

    spectrum, freqs = magnitude_spectrum(frame, sample_rate)
    centroid, spread = spectral_centroid_spread(spectrum, freqs)
    chroma, chroma_std = chroma_features(spectrum, freqs)

    values = np.concatenate((
        [zero_crossing_rate(frame),
         energy(frame),
         energy_entropy(frame),
         centroid,
         spread,
         spectral_entropy(spectrum),
         spectral_flux(spectrum, previous_spectrum),
         spectral_rolloff(spectrum, freqs)],
        mfcc(spectrum, frame.size, sample_rate),
        chroma,
        [chroma_std],
    ))

    return values, spectrum


def second_features(samples, sample_rate=CANONICAL_RATE):
    """
    Average short-term features over 50 ms frames (25 ms step) within one second of audio.
    Spectral flux restarts at 0 for the first frame of the second.

    Parameters
    ----------
    samples : array-like
        One second of audio.
    sample_rate : int, optional
        Sampling rate in Hz.

    Returns
    -------
    numpy.ndarray
        34 values.
    """
    samples = np.asarray(samples, dtype=np.float64)
    frame_len = int(FRAME_SECONDS * sample_rate)
    step = int(FRAME_STEP_SECONDS * sample_rate)

    if samples.size < frame_len:
        raise ValueError(f"Need at least {frame_len} samples per second, got {samples.size}.")

    rows = []
    previous = None

    for offset in range(0, samples.size - frame_len + 1, step):
        values, previous = short_term_features(samples[offset:offset + frame_len], sample_rate,
                                               previous_spectrum=previous)
        rows.append(values)

    return np.mean(rows, axis=0)


def per_second_features(window_samples, sample_rate=CANONICAL_RATE):
    """
    Short-term features averaged within each second of a 5 s window.

    Parameters
    ----------
    window_samples : array-like
        Exactly 5 * sample_rate samples.
    sample_rate : int, optional
        Sampling rate in Hz.

    Returns
    -------
    numpy.ndarray
        Matrix of shape (5, 34).
    """
    window_samples = np.asarray(window_samples, dtype=np.float64)
    expected = WINDOW_SECONDS * sample_rate

    if window_samples.shape != (expected,):
        raise ValueError(f"Expected a window of {expected} samples, got shape "
                         f"{window_samples.shape}.")

    seconds = window_samples.reshape(WINDOW_SECONDS, sample_rate)
    return np.stack([second_features(s, sample_rate) for s in seconds])


def aggregate_seconds(rows, window_start=0.0):
    """
    Collapse a (5, 34) per-second matrix into a FeatureVector: column-wise mean, median and
    population standard deviation, concatenated in that order.
    """
    rows = np.asarray(rows, dtype=np.float64)

    if rows.shape != (WINDOW_SECONDS, N_FEATURES):
        raise ValueError(f"Expected a {WINDOW_SECONDS}x{N_FEATURES} matrix, got {rows.shape}.")

    values = np.concatenate((rows.mean(axis=0), np.median(rows, axis=0), rows.std(axis=0)))

    return FeatureVector(values, float(window_start))


def window_features(window_samples, sample_rate=CANONICAL_RATE, window_start=0.0):
    """
    Compute the 102-d acoustic feature vector of a 5 s window.

    Parameters
    ----------
    window_samples : array-like
        Exactly 5 * sample_rate samples.
    sample_rate : int, optional
        Sampling rate in Hz.
    window_start : float, optional
        Start of the window within its recording, in seconds.

    Returns
    -------
    FeatureVector
        Mean (34), median (34) and standard deviation (34) of the per-second features.
    """
    return aggregate_seconds(per_second_features(window_samples, sample_rate), window_start)


def export_feature_table(keys, vectors, labels, path, starts=None):
    """
    Write window feature vectors to CSV: one row per window with its key, start time, the
    feature values and its label. 102-d acoustic vectors get named columns
    (e.g. "mean_zcr"); other widths are numbered f0, f1, ...

    Parameters
    ----------
    keys : list of str
        Window keys ("recording:start").
    vectors : list of FeatureVector or numpy.ndarray
        Feature vectors, aligned with `keys`.
    labels : list of str
        Window labels, aligned with `keys`.
    path : str or pathlib.Path
        Output CSV path.
    starts : list of float, optional
        Window start times; taken from the FeatureVectors when omitted.

    Returns
    -------
    pandas.DataFrame
        The table that was written.
    """
    matrix = np.stack([getattr(v, "values", v) for v in vectors])

    if starts is None:
        starts = [v.window_start for v in vectors]

    if matrix.shape[1] == N_WINDOW_FEATURES:
        columns = [f"{stat}_{name}" for stat in ("mean", "median", "std") for name in FEATURE_NAMES]
    else:
        columns = [f"f{i}" for i in range(matrix.shape[1])]

    table = pd.DataFrame(matrix, columns=columns)
    table.insert(0, "start_s", list(starts))
    table.insert(0, "id", list(keys))
    table["label"] = list(labels)

    table.to_csv(path, index=False)
    return table
