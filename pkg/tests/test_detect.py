import json

import numpy as np
import pandas as pd
import pytest

from cry_detection.audio_io import AudioClip
from cry_detection.corpus import read_manifest
from cry_detection.detect import (Evaluation, LabelTrack, PipelineConfig, Score, SecondTimeline,
                                  canonicalize_annotations, detect_recording, lopo_evaluate,
                                  score, smooth_timeline, timeline_episodes, train_test_evaluate,
                                  windows_to_seconds, write_metrics, write_timeline)
from cry_detection.exceptions import DataError
from cry_detection.variants import ModelSpec


def reference_runs(values):
    # Plain-loop run-length encoding
    result = []
    start = 0

    for index in range(1, len(values) + 1):
        if index == len(values) or values[index] != values[start]:
            result.append([start, index - start, bool(values[start])])
            start = index

    return result


def reference_canonical(seconds, merge_gap=5, min_duration=3):
    values = list(seconds)
    run_list = reference_runs(values)

    for k, (start, length, value) in enumerate(run_list):
        if not value and 0 < k < len(run_list) - 1 and length <= merge_gap:
            values[start:start + length] = [True] * length

    for start, length, value in reference_runs(values):
        if value and length < min_duration:
            values[start:start + length] = [False] * length

    return np.array(values, dtype=bool)


def reference_smoothing(seconds, max_run=5):
    values = list(seconds)
    run_list = reference_runs(values)

    for k, (start, length, value) in enumerate(run_list):
        if not value and 0 < k < len(run_list) - 1 and length <= max_run:
            values[start:start + length] = [True] * length

    for start, length, value in reference_runs(values):
        if value and length <= max_run:
            values[start:start + length] = [False] * length

    return np.array(values, dtype=bool)


def test_canonicalize_merges_close_intervals():
    track = canonicalize_annotations([(0.0, 2.0), (4.0, 8.0)], 20.0)
    assert track.intervals == ((0.0, 8.0, "crying"), (8.0, 20.0, "not_crying"))


def test_canonicalize_drops_short_episodes():
    track = canonicalize_annotations([(10.0, 12.0)], 30.0)
    assert track.intervals == ((0.0, 30.0, "not_crying"),)


def test_canonicalize_empty_and_labelled_input():
    assert canonicalize_annotations([], 15.0).intervals == ((0.0, 15.0, "not_crying"),)

    track = canonicalize_annotations([(2.0, 9.0, "crying")], 9.0)
    assert track.intervals == ((0.0, 2.0, "not_crying"), (2.0, 9.0, "crying"))


def test_canonicalize_keeps_long_gaps():
    track = canonicalize_annotations([(0.0, 4.0), (10.0, 14.0)], 14.0)
    assert track.crying_intervals == [(0.0, 4.0), (10.0, 14.0)]


@pytest.mark.parametrize("raw", [[(3.0, 2.0)], [(5.0, 5.0)], [(-1.0, 4.0)], [(8.0, 21.0)],
                                 [(0.0, 4.0, "laughing")]])
def test_canonicalize_rejects_invalid_intervals(raw):
    with pytest.raises(DataError):
        canonicalize_annotations(raw, 20.0)


def test_canonicalize_is_idempotent():
    track = canonicalize_annotations([(1.0, 3.0), (6.0, 9.0), (30.0, 31.0), (40.0, 52.5)], 60.0)
    assert canonicalize_annotations(track.crying_intervals, 60.0) == track


def test_canonicalize_matches_reference():
    rng = np.random.default_rng(21)

    for _ in range(1000):
        seconds = rng.random(rng.integers(1, 201)) < rng.uniform(0.1, 0.9)
        raw = [(start, start + length) for start, length, value in reference_runs(seconds)
               if value]

        track = canonicalize_annotations(raw, float(seconds.size))

        np.testing.assert_array_equal(track.crying_seconds(), reference_canonical(seconds))


def test_crying_seconds_use_midpoints():
    track = LabelTrack(((0.0, 2.4, "not_crying"), (2.4, 5.6, "crying"),
                        (5.6, 10.0, "not_crying")), 10.0)
    assert np.flatnonzero(track.crying_seconds()).tolist() == [2, 3, 4, 5]

    track = LabelTrack(((0.0, 2.6, "not_crying"), (2.6, 5.4, "crying"),
                        (5.4, 10.0, "not_crying")), 10.0)
    assert np.flatnonzero(track.crying_seconds()).tolist() == [3, 4]


def test_windows_to_seconds_known_values():
    assert np.flatnonzero(windows_to_seconds([3], [True], 10)).tolist() == [3, 4, 5, 6, 7]
    assert np.flatnonzero(windows_to_seconds([0, 2], [True, True], 10)).tolist() == \
        [0, 1, 2, 3, 4, 5, 6]
    assert not windows_to_seconds([], [], 10).any()
    assert not windows_to_seconds([0, 1], [False, False], 10).any()


def test_windows_to_seconds_respects_mask():
    mask = np.ones(10, dtype=bool)
    mask[4] = False

    assert np.flatnonzero(windows_to_seconds([2], [True], 10, mask)).tolist() == [2, 3, 5, 6]

    with pytest.raises(ValueError):
        windows_to_seconds([2], [True], 10, mask[:9])


def test_windows_to_seconds_rejects_out_of_range_windows():
    with pytest.raises(ValueError):
        windows_to_seconds([6], [True], 10)

    with pytest.raises(ValueError):
        windows_to_seconds([0, 1], [True], 10)


def test_windows_to_seconds_is_monotone():
    rng = np.random.default_rng(8)

    for _ in range(200):
        n = int(rng.integers(5, 60))
        starts = np.arange(n - 4)
        predictions = rng.random(starts.size) < 0.3
        before = windows_to_seconds(starts, predictions, n)

        predictions[rng.integers(0, starts.size)] = True
        after = windows_to_seconds(starts, predictions, n)

        assert np.all(after >= before)


def test_smooth_timeline_known_values():
    bridged = smooth_timeline([True] * 6 + [False] * 3 + [True] * 6)
    assert bridged.tolist() == [True] * 15

    isolated = smooth_timeline([False] * 10 + [True] * 4 + [False] * 10)
    assert not isolated.any()

    short_tail = smooth_timeline([True] * 6 + [False] * 3 + [True] * 4)
    assert short_tail.tolist() == [True] * 13


def test_smooth_timeline_keeps_timeline_metadata():
    timeline = SecondTimeline([True] * 3 + [False] * 7, "p01", "p01_r01")
    smoothed = smooth_timeline(timeline)

    assert isinstance(smoothed, SecondTimeline)
    assert smoothed.participant_id == "p01"
    assert smoothed.recording_id == "p01_r01"
    assert not smoothed.values.any()


def test_smooth_timeline_matches_reference():
    rng = np.random.default_rng(13)

    for _ in range(1000):
        values = rng.random(rng.integers(1, 201)) < rng.uniform(0.1, 0.9)
        smoothed = smooth_timeline(values)

        np.testing.assert_array_equal(smoothed, reference_smoothing(values))
        assert all(length > 5 for _, length, value in reference_runs(smoothed) if value)


def test_timeline_episodes():
    assert timeline_episodes([False, True, True, False]) == [
        (0, 1, "not_crying"), (1, 3, "crying"), (3, 4, "not_crying")]


def test_score_known_values():
    truth = np.array([True] * 5 + [False] * 5)

    perfect = score(truth, truth)
    assert (perfect.precision, perfect.recall, perfect.f1, perfect.accuracy) == (1, 1, 1, 1)

    silent = score(np.zeros(10, dtype=bool), truth)
    assert (silent.precision, silent.recall, silent.f1) == (0.0, 0.0, 0.0)
    assert silent.accuracy == 0.5


def test_score_counts():
    prediction = np.array([True] * 10 + [False] * 3 + [False] * 2)
    truth = np.array([True] * 5 + [False] * 5 + [True] * 3 + [False] * 2)

    result = score(prediction, truth)

    assert (result.tp, result.fp, result.fn, result.tn) == (5, 5, 3, 2)
    assert result.precision == 0.5
    assert result.recall == 0.625
    assert result.f1 == pytest.approx(0.5556, abs=1e-4)


def test_score_matches_reference():
    rng = np.random.default_rng(17)

    for _ in range(1000):
        n = int(rng.integers(1, 100))
        prediction, truth = rng.random(n) < 0.5, rng.random(n) < 0.5

        tp = sum(p and t for p, t in zip(prediction, truth))
        fp = sum(p and not t for p, t in zip(prediction, truth))
        fn = sum(t and not p for p, t in zip(prediction, truth))

        result = score(prediction, truth)

        assert (result.tp, result.fp, result.fn, result.tn) == (tp, fp, fn, n - tp - fp - fn)
        if tp + fp:
            assert result.precision == pytest.approx(tp / (tp + fp))
        if tp + fn:
            assert result.recall == pytest.approx(tp / (tp + fn))


def test_score_rejects_length_mismatch():
    with pytest.raises(ValueError):
        score(np.zeros(3, bool), np.zeros(4, bool))


def _score(f1):
    return Score(1, 0, 0, 1, f1, f1, f1, 1.0)


def test_macro_summary_over_participants():
    evaluation = Evaluation("lopo", {"p01": _score(1.0), "p02": _score(0.5)})
    summary = evaluation.summary()

    assert summary["f1"] == {"mean": 0.75, "std": 0.25}
    assert summary["n_participants"] == 2
    assert evaluation.table()["participant"].tolist() == ["p01", "p02"]


def test_write_metrics(tmp_path):
    evaluation = Evaluation("lopo", {"p01": _score(1.0), "p02": _score(0.5)})
    write_metrics([evaluation], "af", tmp_path)

    table = pd.read_csv(tmp_path / "metrics_af_lopo.csv")
    summary = json.loads((tmp_path / "summary.json").read_text())

    assert list(table.columns) == ["participant", "TP", "FP", "FN", "TN", "P", "R", "F1",
                                   "accuracy"]
    assert summary["af"]["lopo"]["f1"]["mean"] == 0.75


def test_write_metrics_keeps_other_variants(tmp_path):
    write_metrics([Evaluation("lopo", {"p01": _score(1.0), "p02": _score(0.5)})], "af",
                  tmp_path)
    write_metrics([Evaluation("lopo", {"p01": _score(0.2), "p02": _score(0.4)})], "dsf_af",
                  tmp_path)

    summary = json.loads((tmp_path / "summary.json").read_text())

    assert set(summary) == {"af", "dsf_af"}
    assert summary["af"]["lopo"]["f1"]["mean"] == pytest.approx(0.75)
    assert summary["dsf_af"]["lopo"]["f1"]["mean"] == pytest.approx(0.3)
    assert pd.read_csv(tmp_path / "metrics_af_lopo.csv")["F1"].tolist() == [1.0, 0.5]
    assert pd.read_csv(tmp_path / "metrics_dsf_af_lopo.csv")["F1"].tolist() == [0.2, 0.4]


def test_write_metrics_replaces_a_rerun_variant(tmp_path):
    write_metrics([Evaluation("lopo", {"p01": _score(1.0)}),
                   Evaluation("train_test", {"p01": _score(1.0)})], "af", tmp_path)
    write_metrics([Evaluation("lopo", {"p01": _score(0.5)})], "af", tmp_path)

    summary = json.loads((tmp_path / "summary.json").read_text())

    assert summary == {"af": {"lopo": summary["af"]["lopo"]}}
    assert summary["af"]["lopo"]["f1"]["mean"] == 0.5


def test_write_metrics_rejects_a_corrupt_summary(tmp_path):
    (tmp_path / "summary.json").write_text("{not json")

    with pytest.raises(DataError, match="summary.json"):
        write_metrics([Evaluation("lopo", {"p01": _score(1.0)})], "af", tmp_path)


def test_write_timeline(tmp_path):
    timeline = SecondTimeline([False] * 3 + [True] * 7)
    write_timeline(timeline, tmp_path / "timeline.csv", tmp_path / "episodes.csv")

    rows = pd.read_csv(tmp_path / "timeline.csv")
    episodes = pd.read_csv(tmp_path / "episodes.csv")

    assert list(rows.columns) == ["second", "crying"]
    assert rows["crying"].tolist() == [0] * 3 + [1] * 7
    assert episodes.values.tolist() == [[0, 3, "not_crying"], [3, 10, "crying"]]


class AlwaysCrying:
    def predict_windows(self, windows):
        return np.ones(len(windows), dtype=bool)


def test_detect_recording_on_silence():
    timeline = detect_recording(AlwaysCrying(), AudioClip(np.zeros(30 * 22050)))

    assert len(timeline) == 30
    assert not timeline.values.any()


def test_detect_recording_on_active_audio(sine):
    clip = AudioClip(sine(1000, 30.5), recording_id="tone", participant_id="p09")
    timeline = detect_recording(AlwaysCrying(), clip)

    assert len(timeline) == 30
    assert timeline.values.all()
    assert timeline.recording_id == "tone"


def test_lopo_runs_one_fold_per_participant(small_corpus):
    directory, _ = small_corpus
    manifest = read_manifest(directory / "manifest.csv")
    spec = ModelSpec(variant="af")

    first = lopo_evaluate(manifest, spec, PipelineConfig())
    second = lopo_evaluate(manifest, spec, PipelineConfig())

    assert list(first.scores) == manifest.participants
    assert sorted(first.timelines) == sorted(e.recording_id for e in manifest.entries)
    pd.testing.assert_frame_equal(first.table(), second.table())


def test_lopo_needs_two_participants(small_corpus):
    directory, _ = small_corpus
    manifest = read_manifest(directory / "manifest.csv")

    with pytest.raises(DataError):
        lopo_evaluate(manifest.subset(manifest.participants[:1]), ModelSpec(variant="af"))


def test_train_test_warns_about_shared_participants(small_corpus):
    directory, _ = small_corpus
    manifest = read_manifest(directory / "manifest.csv")

    with pytest.warns(RuntimeWarning):
        evaluation = train_test_evaluate(manifest, manifest, ModelSpec(variant="af"))

    assert evaluation.name == "train_test"
    assert list(evaluation.scores) == manifest.participants
