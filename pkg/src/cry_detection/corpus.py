# Corpus manifests, annotation files and the synthetic corpus generator

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.signal import butter, sawtooth, sosfilt

from .audio_io import CANONICAL_RATE, AudioClip, write_wav
from .exceptions import ConfigError, DataError
from .utils import make_rng

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["participant_id", "recording_id", "wav_path", "annotation_path", "split"]
ANNOTATION_HEADER = "start_s,end_s,label"

NOISE_PALETTE = ("silence", "babble", "broadband", "white")


@dataclass(frozen=True)
class ManifestEntry:
    participant_id: str
    recording_id: str
    wav_path: str
    annotation_path: str = ""
    split: str = ""


@dataclass
class Manifest:
    """
    A list of recordings with their participants, audio files and annotation files.

    Attributes
    ----------
    entries : list of ManifestEntry
        The recordings, in file order.
    """
    entries: list = field(default_factory=list)

    @property
    def participants(self):
        """Sorted unique participant ids."""
        return sorted({e.participant_id for e in self.entries})

    def subset(self, participants):
        """Entries of the given participants only."""
        participants = set(participants)
        return Manifest([e for e in self.entries if e.participant_id in participants])

    def split(self, name, exclude=False):
        """Entries tagged with split `name`; with `exclude`, every other entry."""
        return Manifest([e for e in self.entries if (e.split == name) != exclude])

    def validate(self):
        """
        Check that recording ids are unique and that every file exists.

        Returns
        -------
        Manifest
            self
        """
        seen = set()

        for entry in self.entries:
            if entry.recording_id in seen:
                raise DataError(f"Duplicate recording id in manifest: {entry.recording_id}")

            seen.add(entry.recording_id)

            for path in (entry.wav_path, entry.annotation_path):
                if path and not Path(path).is_file():
                    raise DataError(f"File listed for recording '{entry.recording_id}' not "
                                    f"found: {path}")

        return self

    def write(self, path, relative_to=None):
        """
        Write the manifest as CSV. Paths are written relative to `relative_to` when given.
        """
        def rel(p):
            if not p or relative_to is None:
                return p

            return str(Path(p).relative_to(relative_to))

        table = pd.DataFrame([(e.participant_id, e.recording_id, rel(e.wav_path),
                               rel(e.annotation_path), e.split) for e in self.entries],
                             columns=MANIFEST_COLUMNS)
        table.to_csv(path, index=False)


def read_manifest(path):
    """
    Read a manifest CSV with columns participant_id, recording_id, wav_path and (optionally)
    annotation_path and split. Relative paths are resolved against the manifest's directory.

    Parameters
    ----------
    path : str or pathlib.Path
        The manifest file.

    Returns
    -------
    Manifest
        The manifest (not yet validated).
    """
    path = Path(path)

    if not path.is_file():
        raise DataError(f"Manifest not found: {path}")

    table = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in MANIFEST_COLUMNS[:3] if c not in table.columns]

    if missing:
        raise DataError(f"Manifest {path} lacks columns {missing}.")

    def resolve(p):
        if not p:
            return ""

        p = Path(p)
        return str(p if p.is_absolute() else path.parent / p)

    entries = [
        ManifestEntry(
            participant_id=row["participant_id"],
            recording_id=row["recording_id"],
            wav_path=resolve(row["wav_path"]),
            annotation_path=resolve(row.get("annotation_path", "")),
            split=row.get("split", ""),
        )
        for _, row in table.iterrows()
    ]

    return Manifest(entries)


def parse_annotations(path):
    """
    Read an annotation file of `start_s,end_s,label` lines. Only crying intervals are listed;
    everything else is implicitly not crying. A header line and blank lines are skipped.

    Parameters
    ----------
    path : str or pathlib.Path
        The annotation file.

    Returns
    -------
    list of (float, float)
        Crying intervals, in file order.
    """
    intervals = []

    with open(path, "r") as f:
        for number, line in enumerate(f, start=1):
            line = line.strip()

            if not line or (number == 1 and line.replace(" ", "") == ANNOTATION_HEADER):
                continue

            fields = [v.strip() for v in line.split(",")]

            if len(fields) != 3:
                raise DataError(f"{path}, line {number}: expected 'start_s,end_s,label', got "
                                f"'{line}'.")

            try:
                start, end = float(fields[0]), float(fields[1])
            except ValueError:
                raise DataError(f"{path}, line {number}: invalid time in '{line}'.") from None

            if fields[2] != "crying":
                raise DataError(f"{path}, line {number}: unknown label '{fields[2]}' (only "
                                "crying intervals are annotated).")

            if not (np.isfinite(start) and np.isfinite(end)) or end <= start:
                raise DataError(f"{path}, line {number}: interval ({start}, {end}) does not end "
                                "after it starts.")

            intervals.append((start, end))

    return intervals


def write_annotations(intervals, path):
    """Write crying intervals in the format read by `parse_annotations`."""
    with open(path, "w") as f:
        f.write(ANNOTATION_HEADER + "\n")

        for start, end in intervals:
            f.write(f"{start:g},{end:g},crying\n")


@dataclass(frozen=True)
class SynthSpec:
    """
    Settings of a synthetic corpus: sawtooth cry bursts over a noise bed.

    Attributes
    ----------
    n_participants : int
        Number of participants (one recording each by default).
    recordings_per_participant : int
        Recordings per participant.
    recording_seconds : int
        Length of every recording.
    episode_seconds : (int, int)
        Inclusive range of cry episode durations (>= 3).
    gap_seconds : (int, int)
        Inclusive range of the quiet stretch before each episode (> 5).
    f0_range : (float, float)
        Range of cry fundamental frequencies in Hz.
    am_range : (float, float)
        Range of the amplitude-modulation rate of cries in Hz.
    cry_level_db : float
        Peak level of cries in dB relative to full scale.
    noise : str
        Noise bed: "silence", "babble", "broadband" or "white".
    noise_level_db : float
        RMS level of the noise bed relative to the cry peak level, in dB.
    participant_prefix : str
        Prefix of participant ids, so corpora from several domains can be told apart.
    seed : int
        Seed of everything random.
    """
    n_participants: int = 4
    recordings_per_participant: int = 1
    recording_seconds: int = 600
    episode_seconds: tuple = (6, 20)
    gap_seconds: tuple = (8, 40)
    f0_range: tuple = (440.0, 505.0)
    am_range: tuple = (3.0, 5.0)
    cry_level_db: float = -12.0
    noise: str = "babble"
    noise_level_db: float = -10.0
    participant_prefix: str = "p"
    seed: int = 0
    sample_rate: int = CANONICAL_RATE

    def __post_init__(self):
        nyquist = self.sample_rate / 2

        if self.n_participants < 1 or self.recordings_per_participant < 1:
            raise ConfigError("A corpus needs at least one participant and recording.")

        if not 0 < self.f0_range[0] <= self.f0_range[1] < nyquist:
            raise ConfigError(f"F0 range {self.f0_range} must lie within (0, {nyquist}) Hz.")

        if not 0 < self.am_range[0] <= self.am_range[1]:
            raise ConfigError(f"Invalid amplitude-modulation range {self.am_range}.")

        if not 3 <= self.episode_seconds[0] <= self.episode_seconds[1]:
            raise ConfigError(f"Episode durations {self.episode_seconds} must be at least 3 s.")

        if not 5 < self.gap_seconds[0] <= self.gap_seconds[1]:
            raise ConfigError(f"Gaps {self.gap_seconds} must be longer than 5 s.")

        if self.noise not in NOISE_PALETTE:
            raise ConfigError(f"Unknown noise bed '{self.noise}'; choose from {NOISE_PALETTE}.")

        if self.cry_level_db > 0:
            raise ConfigError("cry_level_db must not exceed 0 dBFS.")

        if self.recording_seconds < self.gap_seconds[0] + self.episode_seconds[0]:
            raise ConfigError(f"Recordings of {self.recording_seconds} s cannot hold an episode.")


def _episodes(spec, rng):
    # Whole-second episodes with gaps > 5 s, none touching the end of the recording
    episodes = []
    cursor = 0

    while True:
        start = cursor + int(rng.integers(spec.gap_seconds[0], spec.gap_seconds[1] + 1))
        end = start + int(rng.integers(spec.episode_seconds[0], spec.episode_seconds[1] + 1))

        if end + spec.gap_seconds[0] > spec.recording_seconds:
            return episodes

        episodes.append((start, end))
        cursor = end


def _cry_burst(n, spec, rng):
    rate = spec.sample_rate
    t = np.arange(n) / rate

    f0 = rng.uniform(*spec.f0_range)
    am = rng.uniform(*spec.am_range)

    tone = sawtooth(2 * np.pi * f0 * t + rng.uniform(0, 2 * np.pi))
    envelope = 0.5 * (1.0 - np.cos(2 * np.pi * am * t))

    # 20 ms fades at the episode edges
    fade = min(n // 2, int(0.02 * rate))
    ramp = np.linspace(0.0, 1.0, fade)
    envelope[:fade] *= ramp
    envelope[n - fade:] *= ramp[::-1]

    return tone * envelope


def _noise_bed(n, spec, rng):
    rate = spec.sample_rate

    if spec.noise == "silence":
        return np.zeros(n)

    noise = rng.standard_normal(n)

    if spec.noise == "broadband":
        noise = sosfilt(butter(2, (100, 8000), btype="bandpass", fs=rate, output="sos"), noise)
    elif spec.noise == "babble":
        # Speech-band noise with a syllable-rate envelope, summed over several talkers
        band = butter(4, (300, 3400), btype="bandpass", fs=rate, output="sos")
        syllabic = butter(2, 4.0, btype="lowpass", fs=rate, output="sos")
        talkers = []

        for _ in range(6):
            envelope = np.abs(sosfilt(syllabic, rng.standard_normal(n)))
            talkers.append(sosfilt(band, rng.standard_normal(n)) * envelope)

        noise = np.sum(talkers, axis=0)

    rms = np.sqrt(np.mean(noise ** 2))
    level = 10 ** ((spec.cry_level_db + spec.noise_level_db) / 20)

    return noise * (level / rms) if rms > 0 else noise


def synthesize_recording(spec, rng):
    """
    Create the audio and crying intervals of one synthetic recording.

    Returns
    -------
    (numpy.ndarray, list of (int, int))
        Samples in [-1, 1] and whole-second crying episodes.
    """
    rate = spec.sample_rate
    n = spec.recording_seconds * rate

    episodes = _episodes(spec, rng)
    samples = _noise_bed(n, spec, rng)
    peak = 10 ** (spec.cry_level_db / 20)

    for start, end in episodes:
        samples[start * rate:end * rate] += peak * _cry_burst((end - start) * rate, spec, rng)

    return np.clip(samples, -1.0, 1.0), episodes


def generate_synthetic(spec, out_dir):
    """
    Write a synthetic corpus: one WAV file (16-bit PCM) and one annotation CSV per recording,
    plus `manifest.csv`. The output depends only on `spec`.

    Parameters
    ----------
    spec : SynthSpec
        Corpus settings.
    out_dir : str or pathlib.Path
        Output directory (created if needed).

    Returns
    -------
    Manifest
        The manifest of the generated corpus, with absolute paths.
    """
    out_dir = Path(out_dir).resolve()

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"Cannot create corpus directory {out_dir}: {e}") from e

    entries = []

    for p in range(spec.n_participants):
        participant = f"{spec.participant_prefix}{p + 1:02d}"

        for r in range(spec.recordings_per_participant):
            recording = f"{participant}_r{r + 1:02d}"
            rng = make_rng([spec.seed, p, r])

            samples, episodes = synthesize_recording(spec, rng)
            wav_path = out_dir / f"{recording}.wav"
            annotation_path = out_dir / f"{recording}.csv"

            write_wav(AudioClip(samples, spec.sample_rate, recording, participant), wav_path)
            write_annotations(episodes, annotation_path)

            entries.append(ManifestEntry(participant, recording, str(wav_path),
                                         str(annotation_path)))

            logger.info("%s: %d cry episodes, %d s of crying", recording, len(episodes),
                        sum(end - start for start, end in episodes))

    manifest = Manifest(entries)
    manifest.write(out_dir / "manifest.csv", relative_to=out_dir)

    return manifest
