# Read, write and resample audio clips

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import soundfile as sf

from .exceptions import DataError

# Sampling rate of the infant-worn recorders (Hz); everything downstream assumes it
CANONICAL_RATE = 22050

SUPPORTED_SUBTYPES = {"PCM_U8", "PCM_S8", "PCM_16", "PCM_24", "PCM_32", "FLOAT", "DOUBLE"}


@dataclass(frozen=True, eq=False)
class AudioClip:
    """
    A mono recording held in memory.

    Attributes
    ----------
    samples : numpy.ndarray
        Amplitudes in [-1, 1] (float64).
    sample_rate : int
        Sampling rate in Hz.
    recording_id : str
        Identifier of the source recording.
    participant_id : str
        Identifier of the infant the recording belongs to.
    """
    samples: np.ndarray
    sample_rate: int = CANONICAL_RATE
    recording_id: str = ""
    participant_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)

        if samples.ndim != 1:
            raise DataError(f"Clip '{self.recording_id}' must be mono, got shape {samples.shape}.")

        if self.sample_rate <= 0:
            raise DataError(f"Invalid sample rate: {self.sample_rate}.")

        if not np.all(np.isfinite(samples)):
            raise DataError(f"Clip '{self.recording_id}' contains non-finite samples.")

        if samples.size > 0 and np.max(np.abs(samples)) > 1.0:
            raise DataError(f"Clip '{self.recording_id}' has samples outside [-1, 1].")

        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration_seconds(self):
        return self.samples.size / self.sample_rate

    @property
    def n_seconds(self):
        """Number of whole seconds in the clip."""
        return int(self.samples.size // self.sample_rate)


def load_wav(path, recording_id=None, participant_id="", target_rate=CANONICAL_RATE):
    """
    Load a WAV file as a mono clip. Multichannel audio is averaged to mono; integer samples are
    scaled by the magnitude of the most negative value of their type (e.g. 32768 for 16-bit
    PCM). Files at other sampling rates are resampled to `target_rate`.

    Parameters
    ----------
    path : str or pathlib.Path
        Path to a PCM integer or float WAV file.
    recording_id : str, optional
        Identifier for the clip. Defaults to the file name stem.
    participant_id : str, optional
        Identifier of the participant the recording belongs to.
    target_rate : int, optional
        Output sampling rate (default: 22050 Hz). Use None to keep the file's own rate.

    Returns
    -------
    AudioClip
        The loaded clip.
    """
    path = Path(path)

    if recording_id is None:
        recording_id = path.stem

    try:
        info = sf.info(str(path))
    except (RuntimeError, OSError) as e:
        raise DataError(f"Cannot read audio file {path}: {e}") from e

    if info.format not in ("WAV", "WAVEX") or info.subtype not in SUPPORTED_SUBTYPES:
        raise DataError(f"Unsupported audio encoding in {path}: {info.format}/{info.subtype} "
                        "(expected PCM or float WAV).")

    data, sample_rate = sf.read(str(path), dtype="float64", always_2d=True)

    if data.shape[0] == 0:
        raise DataError(f"Audio file {path} contains no samples.")

    samples = np.clip(data.mean(axis=1), -1.0, 1.0)

    clip = AudioClip(samples, sample_rate, recording_id=recording_id,
                     participant_id=participant_id)

    if target_rate is not None:
        clip = resample(clip, target_rate)

    return clip


def write_wav(clip, path, subtype="PCM_16"):
    """
    Write a clip to a WAV file.

    16-bit output is quantised as round(x * 32768), clipped to the int16 range, so that a
    round trip through `load_wav` stays within one quantisation step.

    Parameters
    ----------
    clip : AudioClip
        The clip to write.
    path : str or pathlib.Path
        Output path.
    subtype : str, optional
        "PCM_16" (default) or "FLOAT".

    Returns
    -------
    None
    """
    if subtype == "PCM_16":
        data = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype(np.int16)
    elif subtype == "FLOAT":
        data = clip.samples.astype(np.float32)
    else:
        raise ValueError(f"Unsupported WAV subtype: {subtype}")

    sf.write(str(path), data, clip.sample_rate, subtype=subtype, format="WAV")


def resample(clip, target_rate):
    """
    Resample a clip by linear interpolation.

    Parameters
    ----------
    clip : AudioClip
        The clip to resample.
    target_rate : int
        Output sampling rate in Hz.

    Returns
    -------
    AudioClip
        The resampled clip, with round(n * target / source) samples. The input clip is
        returned unchanged when the rates already match.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}.")

    if target_rate == clip.sample_rate:
        return clip

    n_out = int(round(clip.samples.size * target_rate / clip.sample_rate))
    t_in = np.arange(clip.samples.size) / clip.sample_rate
    t_out = np.arange(n_out) / target_rate

    samples = np.interp(t_out, t_in, clip.samples)

    return AudioClip(samples, int(target_rate), recording_id=clip.recording_id,
                     participant_id=clip.participant_id)
