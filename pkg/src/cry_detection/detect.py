# Second-level timelines, episode rules, scoring and the participant-wise evaluation harness

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from warnings import warn

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .audio_io import load_wav
from .corpus import parse_annotations
from .dsp import WINDOW_SECONDS
from .exceptions import DataError
from .preprocess import balance, drop_mixed, make_windows, silence_filter, smooth_mask
from .utils import is_interior, macro_summary, relabel_runs, runs
from .variants import build_detector

logger = logging.getLogger(__name__)

# Annotation rules for crying episodes (seconds)
EPISODE_MERGE_GAP = 5.0
MIN_EPISODE_DURATION = 3.0

CRYING = "crying"
NOT_CRYING = "not_crying"


@dataclass(frozen=True)
class LabelTrack:
    """
    Canonical ground truth for one recording: sorted, non-overlapping, gap-free intervals
    labelled crying or not_crying that together cover [0, total_duration].

    Attributes
    ----------
    intervals : tuple of (float, float, str)
        (start_s, end_s, label) triples.
    total_duration : float
        Length of the recording in seconds.
    """
    intervals: tuple
    total_duration: float

    @property
    def crying_intervals(self):
        return [(start, end) for start, end, label in self.intervals if label == CRYING]

    def crying_seconds(self, n_seconds=None):
        """
        Per-second ground truth. Second s is crying iff its midpoint s + 0.5 lies inside a
        crying interval.

        Parameters
        ----------
        n_seconds : int, optional
            Length of the result (default: whole seconds of the recording).

        Returns
        -------
        numpy.ndarray
            Boolean array.
        """
        if n_seconds is None:
            n_seconds = int(np.floor(self.total_duration))

        midpoints = np.arange(n_seconds) + 0.5
        crying = np.zeros(n_seconds, dtype=bool)

        for start, end in self.crying_intervals:
            crying |= (midpoints >= start) & (midpoints < end)

        return crying


def canonicalize_annotations(raw, total_duration, merge_gap=EPISODE_MERGE_GAP,
                             min_duration=MIN_EPISODE_DURATION):
    """
    Turn raw crying annotations into a LabelTrack. Crying intervals separated by at most
    `merge_gap` seconds (overlapping and touching ones included) are merged; merged episodes
    shorter than `min_duration` are then dropped, and the rest of the recording is labelled
    not_crying.

    Parameters
    ----------
    raw : list of (float, float) or (float, float, str)
        Crying intervals in seconds, in any order.
    total_duration : float
        Length of the recording in seconds.
    merge_gap : float, optional
        Largest gap that is merged (inclusive).
    min_duration : float, optional
        Shortest episode that is kept.

    Returns
    -------
    LabelTrack
        The canonical track.
    """
    intervals = []

    for interval in raw:
        start, end = float(interval[0]), float(interval[1])

        if len(interval) > 2 and interval[2] != CRYING:
            raise DataError(f"Only crying intervals can be annotated, got '{interval[2]}'.")

        if end <= start:
            raise DataError(f"Interval ({start}, {end}) does not end after it starts.")

        if start < 0 or end > total_duration:
            raise DataError(f"Interval ({start}, {end}) lies outside the recording "
                            f"(0, {total_duration}).")

        intervals.append((start, end))

    merged = []

    for start, end in sorted(intervals):
        if merged and start - merged[-1][1] <= merge_gap:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))

    episodes = [(start, end) for start, end in merged if end - start >= min_duration]

    track = []
    cursor = 0.0

    for start, end in episodes:
        if start > cursor:
            track.append((cursor, start, NOT_CRYING))

        track.append((start, end, CRYING))
        cursor = end

    if cursor < total_duration:
        track.append((cursor, float(total_duration), NOT_CRYING))

    return LabelTrack(tuple(track), float(total_duration))


@dataclass(frozen=True, eq=False)
class SecondTimeline:
    """
    Per-second crying decisions for one recording.

    Attributes
    ----------
    values : numpy.ndarray
        One boolean per whole second; True means crying.
    participant_id : str
    recording_id : str
    """
    values: np.ndarray
    participant_id: str = ""
    recording_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=bool))

    def __len__(self):
        return self.values.size


def windows_to_seconds(starts, predictions, n_seconds, active_mask=None,
                       window_seconds=WINDOW_SECONDS):
    """
    Bin window predictions into seconds: a second is crying iff at least one window predicted
    crying covers it. Seconds outside the active mask are always not_crying.

    Parameters
    ----------
    starts : array-like of int
        Window start offsets in seconds.
    predictions : array-like of bool
        Crying decision of each window.
    n_seconds : int
        Length of the recording in whole seconds.
    active_mask : array-like of bool, optional
        Seconds kept by the silence filter.
    window_seconds : int, optional
        Window length in seconds.

    Returns
    -------
    numpy.ndarray
        Boolean per-second decisions.
    """
    starts = np.asarray(starts, dtype=int)
    predictions = np.asarray(predictions, dtype=bool)

    if starts.shape != predictions.shape:
        raise ValueError(f"Got {starts.size} window starts but {predictions.size} predictions.")

    if starts.size > 0 and (starts.min() < 0 or starts.max() + window_seconds > n_seconds):
        raise ValueError(f"Windows extend beyond the {n_seconds} s recording.")

    crying = np.zeros(n_seconds, dtype=bool)

    for start in starts[predictions]:
        crying[start:start + window_seconds] = True

    if active_mask is not None:
        active_mask = np.asarray(active_mask, dtype=bool)

        if active_mask.size != n_seconds:
            raise ValueError(f"Mask covers {active_mask.size} s of a {n_seconds} s recording.")

        crying &= active_mask

    return crying


def smooth_timeline(timeline, max_run=5):
    """
    Remove short episodes from a per-second timeline. First, not-crying runs of at most
    `max_run` seconds that sit between two crying runs become crying; then crying runs of at
    most `max_run` seconds become not-crying.

    Parameters
    ----------
    timeline : SecondTimeline or array-like of bool
        The decisions to smooth.
    max_run : int, optional
        Longest run that is reassigned (inclusive).

    Returns
    -------
    SecondTimeline or numpy.ndarray
        The smoothed decisions, of the same kind as the input.
    """
    values = np.asarray(getattr(timeline, "values", timeline), dtype=bool)

    values = relabel_runs(
        values,
        lambda i, r: not r[i][2] and r[i][1] <= max_run and is_interior(i, r),
        True,
    )
    values = relabel_runs(values, lambda i, r: r[i][2] and r[i][1] <= max_run, False)

    if isinstance(timeline, SecondTimeline):
        return SecondTimeline(values, timeline.participant_id, timeline.recording_id)

    return values


def timeline_episodes(timeline):
    """List (start_s, end_s, label) for every run of a timeline."""
    values = getattr(timeline, "values", timeline)

    return [(start, start + length, CRYING if value else NOT_CRYING)
            for start, length, value in runs(values)]


@dataclass(frozen=True)
class Score:
    """
    Second-level confusion counts and derived metrics (crying is the positive class).
    Precision, recall and F1 are 0 where their denominators vanish.
    """
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    accuracy: float


def score(prediction, truth):
    """
    Compare predicted and true per-second labels.

    Parameters
    ----------
    prediction, truth : SecondTimeline or array-like of bool
        Timelines of equal length.

    Returns
    -------
    Score
        Counts, precision, recall, F1 and accuracy.
    """
    pred = np.asarray(getattr(prediction, "values", prediction), dtype=bool)
    true = np.asarray(getattr(truth, "values", truth), dtype=bool)

    if pred.shape != true.shape:
        raise ValueError(f"Timelines differ in length: {pred.size} vs {true.size}.")

    tp = int(np.sum(pred & true))
    fp = int(np.sum(pred & ~true))
    fn = int(np.sum(~pred & true))
    tn = int(np.sum(~pred & ~true))

    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    accuracy = (tp + tn) / pred.size if pred.size > 0 else 0.0

    return Score(tp, fp, fn, tn, precision, recall, f1, accuracy)


@dataclass
class PipelineConfig:
    """
    Preprocessing and post-processing settings shared by training and detection.

    Attributes
    ----------
    threshold_db : float
        Silence threshold on the band above `band_edge_hz` (dB relative to full scale).
    band_edge_hz : float
        Lower edge of the band used by the silence filter.
    max_mask_seconds : float
        Longest time mask used for augmentation.
    merge_gap_s, min_run_s : int
        Activity-mask smoothing: gaps bridged and shortest run kept.
    max_run_s : int
        Prediction smoothing: longest episode reassigned.
    seed : int
        Seed for balancing and augmentation.
    """
    threshold_db: float = -60.0
    band_edge_hz: float = 350.0
    max_mask_seconds: float = 0.44
    merge_gap_s: int = 5
    min_run_s: int = 5
    max_run_s: int = 5
    seed: int = 0


@dataclass
class Recording:
    clip: object
    labels: LabelTrack = None

    @property
    def truth(self):
        return SecondTimeline(self.labels.crying_seconds(self.clip.n_seconds),
                              self.clip.participant_id, self.clip.recording_id)


def load_recording(entry):
    """
    Load the audio and canonical ground truth of one manifest entry.

    Parameters
    ----------
    entry : ManifestEntry
        The recording to load.

    Returns
    -------
    Recording
        Clip and LabelTrack (the track is None when the entry has no annotations).
    """
    clip = load_wav(entry.wav_path, recording_id=entry.recording_id,
                    participant_id=entry.participant_id)
    labels = None

    if entry.annotation_path:
        labels = canonicalize_annotations(parse_annotations(entry.annotation_path),
                                          clip.duration_seconds)

    return Recording(clip, labels)


def training_windows(recordings, cfg=PipelineConfig()):
    """
    Build a balanced training set. Every whole second of each recording is windowed; windows
    with mixed labels are dropped and the rest balanced (crying windows gain a time-masked
    duplicate; not-crying windows are subsampled).

    Parameters
    ----------
    recordings : list of Recording
        Annotated recordings.
    cfg : PipelineConfig, optional
        Settings; `seed` drives augmentation and subsampling.

    Returns
    -------
    list of WindowInstance
        The balanced windows.
    """
    windows = []

    for recording in recordings:
        if recording.labels is None:
            raise DataError(f"Recording '{recording.clip.recording_id}' has no annotations.")

        mask = np.ones(recording.clip.n_seconds, dtype=bool)
        windows.extend(drop_mixed(make_windows(recording.clip, mask, recording.labels)))

    return balance(windows, cfg.seed, cfg.max_mask_seconds)


def detect_recording(detector, clip, cfg=PipelineConfig()):
    """
    Run detection on one recording: silence filter, mask smoothing, windowing, window
    classification, binning into seconds and timeline smoothing.

    Parameters
    ----------
    detector : Detector
        A fitted model variant.
    clip : AudioClip
        The recording.
    cfg : PipelineConfig, optional
        Settings.

    Returns
    -------
    SecondTimeline
        Smoothed per-second decisions, one per whole second of the clip.
    """
    mask = silence_filter(clip, cfg.threshold_db, cfg.band_edge_hz)
    mask = smooth_mask(mask, cfg.merge_gap_s, cfg.min_run_s)
    windows = make_windows(clip, mask)

    if windows:
        predictions = detector.predict_windows(windows)
    else:
        predictions = np.zeros(0, dtype=bool)

    values = windows_to_seconds([w.start for w in windows], predictions, clip.n_seconds, mask)
    timeline = SecondTimeline(values, clip.participant_id, clip.recording_id)

    logger.debug("%s: %d windows, %d active seconds", clip.recording_id, len(windows),
                 int(mask.sum()))

    return smooth_timeline(timeline, cfg.max_run_s)


@dataclass
class Evaluation:
    """
    Scores of one evaluation run, one per test participant.

    Attributes
    ----------
    name : str
        "lopo" or "train_test".
    scores : dict of str to Score
        Per-participant scores, in participant order.
    timelines : dict of str to (SecondTimeline, SecondTimeline)
        Predicted and true timeline of every test recording.
    """
    name: str
    scores: dict = field(default_factory=dict)
    timelines: dict = field(default_factory=dict)

    def table(self):
        """Per-participant metrics as a DataFrame with the columns of the metrics CSV."""
        rows = [{"participant": participant, "TP": s.tp, "FP": s.fp, "FN": s.fn, "TN": s.tn,
                 "P": s.precision, "R": s.recall, "F1": s.f1, "accuracy": s.accuracy}
                for participant, s in self.scores.items()]

        return pd.DataFrame(rows, columns=["participant", "TP", "FP", "FN", "TN", "P", "R", "F1",
                                           "accuracy"])

    def summary(self):
        """Unweighted mean and population std of each metric across participants."""
        summary = {}

        for metric in ("precision", "recall", "f1", "accuracy"):
            mean, std = macro_summary([getattr(s, metric) for s in self.scores.values()])
            summary[metric] = {"mean": mean, "std": std}

        summary["n_participants"] = len(self.scores)
        return summary


def _score_participants(detector, recordings, cfg):
    # Timelines of one participant's recordings are concatenated before scoring
    by_participant = {}
    timelines = {}

    for recording in recordings:
        if recording.labels is None:
            raise DataError(f"Test recording '{recording.clip.recording_id}' has no annotations.")

        predicted = detect_recording(detector, recording.clip, cfg)
        timelines[recording.clip.recording_id] = (predicted, recording.truth)
        by_participant.setdefault(recording.clip.participant_id, []).append(
            (predicted.values, recording.truth.values))

    scores = {}

    for participant, pairs in sorted(by_participant.items()):
        predicted = np.concatenate([p for p, _ in pairs])
        truth = np.concatenate([t for _, t in pairs])

        if truth.size == 0:
            raise DataError(f"Participant '{participant}' has no evaluable seconds.")

        scores[participant] = score(predicted, truth)

    return scores, timelines


def _run_fold(manifest, held_out, model_spec, cfg):
    train_entries = manifest.subset(p for p in manifest.participants if p != held_out).entries
    test_entries = manifest.subset([held_out]).entries

    logger.info("fold %s: training on %d recordings", held_out, len(train_entries))

    detector = build_detector(model_spec)
    detector.fit(training_windows([load_recording(e) for e in train_entries], cfg))

    return _score_participants(detector, [load_recording(e) for e in test_entries], cfg)


def lopo_evaluate(manifest, model_spec, cfg=PipelineConfig(), jobs=1):
    """
    Leave-one-participant-out evaluation: one fold per participant, trained on all others and
    scored per second on the held-out participant's recordings.

    Parameters
    ----------
    manifest : Manifest
        Annotated corpus with at least two participants.
    model_spec : ModelSpec
        The model variant and its settings.
    cfg : PipelineConfig, optional
        Pre- and post-processing settings.
    jobs : int, optional
        Number of folds run in parallel. Results are merged in participant order.

    Returns
    -------
    Evaluation
        Per-participant scores.
    """
    participants = manifest.participants

    if len(participants) < 2:
        raise DataError(f"LOPO needs at least two participants, got {len(participants)}.")

    results = Parallel(n_jobs=jobs)(
        delayed(_run_fold)(manifest, participant, model_spec, cfg) for participant in participants
    )

    evaluation = Evaluation("lopo")

    for scores, timelines in results:
        evaluation.scores.update(scores)
        evaluation.timelines.update(timelines)

    logger.info("LOPO over %d participants: F1 %.3f", len(participants),
                evaluation.summary()["f1"]["mean"])

    return evaluation


def train_test_evaluate(train_manifest, test_manifest, model_spec, cfg=PipelineConfig()):
    """
    Train once on a training corpus and score every participant of a test corpus.

    Parameters
    ----------
    train_manifest, test_manifest : Manifest
        Annotated corpora. Shared participants trigger a warning; identical corpora give a
        resubstitution run.
    model_spec : ModelSpec
        The model variant and its settings.
    cfg : PipelineConfig, optional
        Pre- and post-processing settings.

    Returns
    -------
    Evaluation
        Per-participant scores on the test corpus.
    """
    if not train_manifest.entries or not test_manifest.entries:
        raise DataError("Training and test manifests must both have entries.")

    overlap = sorted(set(train_manifest.participants) & set(test_manifest.participants))

    if overlap:
        warn(f"Participants {overlap} appear in both training and test data; scores for them "
             "are resubstitution results.", RuntimeWarning, stacklevel=2)

    detector = build_detector(model_spec)
    detector.fit(training_windows([load_recording(e) for e in train_manifest.entries], cfg))

    scores, timelines = _score_participants(
        detector, [load_recording(e) for e in test_manifest.entries], cfg)

    return Evaluation("train_test", scores, timelines)


def write_metrics(evaluations, variant, output_dir):
    """
    Write `metrics_<variant>_<name>.csv` for each evaluation and record their summaries in
    `summary.json`, keyed by variant and evaluation name. Entries for other variants already in
    `summary.json` are kept, so one directory can collect every variant.

    Parameters
    ----------
    evaluations : list of Evaluation
        Evaluations to report.
    variant : str
        Model variant name.
    output_dir : str or pathlib.Path
        Existing output directory.

    Returns
    -------
    dict
        The full summary that was written.
    """
    output_dir = Path(output_dir)
    summary_path = output_dir / "summary.json"
    summary = {}

    if summary_path.exists():
        try:
            with open(summary_path, "r") as f:
                summary = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"Cannot update {summary_path}: {e}") from e

    summary[variant] = {}

    for evaluation in evaluations:
        evaluation.table().to_csv(output_dir / f"metrics_{variant}_{evaluation.name}.csv",
                                  index=False)
        summary[variant][evaluation.name] = evaluation.summary()

    with open(summary_path, "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)

    return summary


def write_timeline(timeline, path, episodes_path=None):
    """
    Write a timeline as `second,crying` rows, and optionally its episodes as
    `start_s,end_s,label` rows.
    """
    values = getattr(timeline, "values", timeline)
    pd.DataFrame({"second": np.arange(values.size), "crying": values.astype(int)}).to_csv(
        path, index=False)

    if episodes_path is not None:
        pd.DataFrame(timeline_episodes(values), columns=["start_s", "end_s", "label"]).to_csv(
            episodes_path, index=False)
