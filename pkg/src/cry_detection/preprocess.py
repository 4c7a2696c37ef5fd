# Silence filtering, mask smoothing, windowing, labelling, augmentation and class balancing

from dataclasses import dataclass, replace
from enum import Enum
from warnings import warn

import numpy as np
import pandas as pd

from .dsp import WINDOW_SECONDS, StftConfig, analysis_window, stft_power
from .exceptions import DataError
from .utils import is_interior, make_rng, relabel_runs

# Reference mean-square level of a full-scale sine
FULL_SCALE_POWER = 0.5


class WindowLabel(str, Enum):
    CRYING = "crying"
    NOT_CRYING = "not_crying"
    MIXED = "mixed"
    UNLABELED = "unlabeled"


@dataclass(frozen=True, eq=False)
class WindowInstance:
    """
    One 5 s analysis window cut from a recording.

    Attributes
    ----------
    samples : numpy.ndarray
        The window's audio (5 * sample_rate values).
    start : int
        Offset of the window within its recording, in whole seconds.
    label : WindowLabel
        Training label, or UNLABELED at prediction time.
    recording_id : str
        Source recording.
    participant_id : str
        Source participant.
    sample_rate : int
        Sampling rate in Hz.
    augmented : bool
        Whether this window is a time-masked duplicate.
    """
    samples: np.ndarray
    start: int
    label: WindowLabel = WindowLabel.UNLABELED
    recording_id: str = ""
    participant_id: str = ""
    sample_rate: int = 22050
    augmented: bool = False

    @property
    def key(self):
        """Identifier shared by a window and its augmented duplicates."""
        return f"{self.recording_id}:{self.start}"


def band_level_db(samples, sample_rate, band_edge_hz=350.0, cfg=StftConfig()):
    """
    Level of the signal energy at and above `band_edge_hz`, in dB relative to a full-scale sine.

    The band's mean-square value is recovered from the one-sided power STFT via Parseval's
    relation and averaged over frames.

    Parameters
    ----------
    samples : array-like
        Audio of at least one STFT segment.
    sample_rate : int
        Sampling rate in Hz.
    band_edge_hz : float, optional
        Lower edge of the band.
    cfg : StftConfig, optional
        STFT parameters.

    Returns
    -------
    float
        Band level in dBFS (-inf for no energy).
    """
    power = stft_power(samples, cfg)
    freqs = np.arange(power.shape[0]) * sample_rate / cfg.samples_per_segment

    # Bins other than DC and Nyquist stand for two mirrored DFT bins
    weights = np.full(power.shape[0], 2.0)
    weights[0] = 1.0

    if cfg.samples_per_segment % 2 == 0:
        weights[-1] = 1.0

    in_band = freqs >= band_edge_hz
    window = analysis_window(cfg)
    norm = cfg.samples_per_segment * np.sum(window ** 2)

    band_power = np.mean(weights[in_band] @ power[in_band]) / norm

    if band_power <= 0:
        return -np.inf

    return float(10.0 * np.log10(band_power / FULL_SCALE_POWER))


def silence_filter(clip, threshold_db=-60.0, band_edge_hz=350.0, cfg=StftConfig()):
    """
    Mark each whole second of a clip as active or silent, based on its energy above 350 Hz.

    Parameters
    ----------
    clip : AudioClip
        Clip of at least one second.
    threshold_db : float, optional
        Seconds whose band level is below this (dB relative to full scale) are silent.
    band_edge_hz : float, optional
        Lower edge of the band considered.
    cfg : StftConfig, optional
        STFT parameters used for the band energy.

    Returns
    -------
    numpy.ndarray
        Boolean mask with one entry per whole second; True where the second is retained.
    """
    n_seconds = clip.n_seconds

    if n_seconds < 1:
        raise DataError(f"Clip '{clip.recording_id}' is shorter than one second.")

    rate = clip.sample_rate
    levels = np.array([
        band_level_db(clip.samples[s * rate:(s + 1) * rate], rate, band_edge_hz, cfg)
        for s in range(n_seconds)
    ])

    return levels >= threshold_db


def smooth_mask(mask, max_gap=5, min_run=5):
    """
    Reduce fragmentation of an activity mask. Gaps of at most `max_gap` inactive seconds
    between two active runs are filled; active runs shorter than `min_run` seconds are then
    removed.

    Parameters
    ----------
    mask : array-like of bool
        Per-second activity.
    max_gap : int, optional
        Longest gap that is bridged (inclusive).
    min_run : int, optional
        Shortest active run that is kept.

    Returns
    -------
    numpy.ndarray
        The smoothed mask.
    """
    mask = np.asarray(mask, dtype=bool)

    mask = relabel_runs(
        mask,
        lambda i, r: not r[i][2] and r[i][1] <= max_gap and is_interior(i, r),
        True,
    )

    return relabel_runs(mask, lambda i, r: r[i][2] and r[i][1] < min_run, False)


def _window_label(second_labels):
    if second_labels is None:
        return WindowLabel.UNLABELED

    if np.all(second_labels):
        return WindowLabel.CRYING

    if not np.any(second_labels):
        return WindowLabel.NOT_CRYING

    return WindowLabel.MIXED


def make_windows(clip, mask, labels=None, window_seconds=WINDOW_SECONDS):
    """
    Cut 5 s windows at a 1 s hop from every active run of a (smoothed) mask.

    A run of N >= 5 seconds yields N - 4 windows; shorter runs yield none. A window whose audio
    runs past the end of the clip is zero-padded.

    Parameters
    ----------
    clip : AudioClip
        Source clip.
    mask : array-like of bool
        Per-second activity, typically from `smooth_mask`.
    labels : LabelTrack, optional
        Ground truth. When given, a window is labelled crying if all its seconds are crying,
        not_crying if none are, and mixed otherwise.
    window_seconds : int, optional
        Window length in seconds.

    Returns
    -------
    list of WindowInstance
        Windows in order of start time.
    """
    mask = np.asarray(mask, dtype=bool)
    rate = clip.sample_rate
    window_len = window_seconds * rate

    truth = labels.crying_seconds(mask.size) if labels is not None else None

    # Starts whose whole window lies inside one active run
    covered = np.convolve(mask.astype(int), np.ones(window_seconds, dtype=int), mode="valid")
    starts = np.flatnonzero(covered == window_seconds)

    windows = []

    for start in starts:
        samples = clip.samples[start * rate:start * rate + window_len]

        if samples.size < window_len:
            samples = np.concatenate((samples, np.zeros(window_len - samples.size)))

        second_labels = truth[start:start + window_seconds] if truth is not None else None

        windows.append(WindowInstance(
            samples=samples,
            start=int(start),
            label=_window_label(second_labels),
            recording_id=clip.recording_id,
            participant_id=clip.participant_id,
            sample_rate=rate,
        ))

    return windows


def drop_mixed(instances):
    """Remove windows whose seconds carry more than one label."""
    return [w for w in instances if w.label != WindowLabel.MIXED]


def time_mask_augment(window, rng_seed, max_mask_seconds=0.44):
    """
    Create a time-masked copy of a crying window: one contiguous span, with a duration drawn
    uniformly from (0, max_mask_seconds] and a uniformly drawn start, is set to zero.

    Parameters
    ----------
    window : WindowInstance
        A crying window.
    rng_seed : int or numpy.random.Generator
        Seed (or generator) for the mask draw.
    max_mask_seconds : float, optional
        Longest mask (default: 0.44 s).

    Returns
    -------
    WindowInstance
        The augmented copy (flagged `augmented=True`). The input window is not modified.
    """
    if window.label != WindowLabel.CRYING:
        raise ValueError(f"Only crying windows are augmented, got '{window.label.value}'.")

    rng = make_rng(rng_seed)
    max_len = max(1, int(max_mask_seconds * window.sample_rate))

    length = int(rng.integers(1, max_len + 1))
    offset = int(rng.integers(0, window.samples.size - length + 1))

    samples = np.array(window.samples, dtype=np.float64, copy=True)
    samples[offset:offset + length] = 0.0

    return replace(window, samples=samples, augmented=True)


def balance(instances, rng_seed, max_mask_seconds=0.44):
    """
    Balance a labelled window set. Every crying window gains one time-masked duplicate; the
    not-crying windows are then subsampled without replacement down to the augmented crying
    count (they are never upsampled).

    Parameters
    ----------
    instances : list of WindowInstance
        Windows labelled crying or not_crying.
    rng_seed : int or numpy.random.Generator
        Seed for augmentation and subsampling.
    max_mask_seconds : float, optional
        Longest time mask.

    Returns
    -------
    list of WindowInstance
        Crying windows, their duplicates, then the retained not-crying windows (in their
        original order).
    """
    crying = [w for w in instances if w.label == WindowLabel.CRYING]
    not_crying = [w for w in instances if w.label == WindowLabel.NOT_CRYING]

    n_other = len(instances) - len(crying) - len(not_crying)

    if n_other > 0:
        warn(f"Ignoring {n_other} windows that are neither crying nor not_crying.",
             RuntimeWarning, stacklevel=2)

    if len(crying) == 0 or len(not_crying) == 0:
        raise DataError(f"Balancing needs both classes (crying: {len(crying)}, "
                        f"not_crying: {len(not_crying)}).")

    rng = make_rng(rng_seed)
    augmented = [time_mask_augment(w, rng, max_mask_seconds) for w in crying]

    n_target = len(crying) + len(augmented)

    if len(not_crying) > n_target:
        keep = np.sort(rng.choice(len(not_crying), size=n_target, replace=False))
        not_crying = [not_crying[i] for i in keep]

    return crying + augmented + not_crying


def write_window_manifest(instances, path):
    """
    Write one CSV row per window: recording_id, start_s, label, augmented.

    Returns
    -------
    pandas.DataFrame
        The table that was written.
    """
    table = pd.DataFrame({
        "recording_id": [w.recording_id for w in instances],
        "start_s": [w.start for w in instances],
        "label": [w.label.value for w in instances],
        "augmented": [w.augmented for w in instances],
    })

    table.to_csv(path, index=False)
    return table
