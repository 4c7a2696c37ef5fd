# Infant cry detection in long-form audio recordings

# Expose submodules:
from . import audio_io
from . import dsp
from . import features
from . import preprocess
from . import nn
from . import svm
from . import detect
from . import corpus
from . import io
from . import utils

# Expose commonly-used functions directly:
from .audio_io import AudioClip, load_wav, resample, write_wav
from .config import RunConfig
from .corpus import Manifest, SynthSpec, generate_synthetic, parse_annotations, read_manifest
from .detect import (LabelTrack, PipelineConfig, SecondTimeline, canonicalize_annotations,
                     detect_recording, lopo_evaluate, score, smooth_timeline,
                     train_test_evaluate, windows_to_seconds)
from .exceptions import ConfigError, DataError, NumericError
from .features import FeatureVector, per_second_features, short_term_features, window_features
from .preprocess import (WindowInstance, WindowLabel, balance, drop_mixed, make_windows,
                         silence_filter, smooth_mask, time_mask_augment)
from .variants import ModelSpec, build_detector, load_detector
