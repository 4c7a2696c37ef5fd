# Command-line entry points: synth, train, predict and evaluate

import argparse
import logging
import sys
from pathlib import Path

from .audio_io import load_wav
from .config import RunConfig
from .corpus import SynthSpec, generate_synthetic, read_manifest
from .detect import (load_recording, lopo_evaluate, train_test_evaluate, training_windows,
                     detect_recording, write_metrics, write_timeline)
from .exceptions import ConfigError, DataError, NumericError
from .features import export_feature_table
from .preprocess import write_window_manifest
from .variants import build_detector, load_detector

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _prepare_output(directory):
    directory = Path(directory)

    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DataError(f"Cannot create output directory {directory}: {e}") from e

    return directory


def _load_config(args, command):
    overrides = list(args.set or ())

    if getattr(args, "jobs", None) is not None:
        overrides.append(f"run.jobs={args.jobs}")

    return RunConfig.load(args.config, overrides).validate(command)


def cmd_synth(args):
    """Generate a synthetic corpus."""
    spec = SynthSpec(
        n_participants=args.participants,
        recordings_per_participant=args.recordings,
        recording_seconds=args.seconds,
        f0_range=(args.f0_min, args.f0_max),
        noise=args.noise,
        noise_level_db=args.noise_level_db,
        participant_prefix=args.prefix,
        seed=args.seed,
    )

    manifest = generate_synthetic(spec, args.out_dir)
    logger.info("wrote %d recordings to %s", len(manifest.entries), args.out_dir)


def cmd_train(args):
    """
    Train the configured variant on every recording of `paths.manifest` and write the model,
    the resolved configuration, the window manifest and (for SVM variants) the training
    feature table to `paths.output`.
    """
    config = _load_config(args, "train")
    pipeline = config.pipeline()
    spec = config.model_spec()

    manifest = read_manifest(config.get_path("paths", "manifest")).validate()
    windows = training_windows([load_recording(e) for e in manifest.entries], pipeline)

    detector = build_detector(spec).fit(windows)
    table = detector.feature_table(windows)

    output = _prepare_output(config.output)
    detector.save(output)
    config.write(output / "run_config.xml")
    write_window_manifest(windows, output / "window_manifest.csv")

    if table is not None:
        export_feature_table([w.key for w in windows], table, [w.label.value for w in windows],
                             output / "features.csv", starts=[w.start for w in windows])

    logger.info("model written to %s", output)


def cmd_predict(args):
    """
    Detect crying in one WAV file with a trained model. Writes `second,crying` rows and an
    episode list next to each other.
    """
    config = _load_config(args, "predict")
    pipeline = config.pipeline()

    model_dir = Path(args.model) if args.model else config.output

    if not (model_dir / "detector.xml").is_file():
        raise ConfigError(f"No trained model in {model_dir}.")

    embeddings = config.get_path("paths", "embeddings")
    detector = load_detector(model_dir, str(embeddings) if embeddings else None)

    clip = load_wav(args.wav)
    timeline = detect_recording(detector, clip, pipeline)

    out = Path(args.out) if args.out else model_dir / f"{Path(args.wav).stem}_timeline.csv"
    _prepare_output(out.parent)
    write_timeline(timeline, out, out.with_name(f"{out.stem}_episodes.csv"))

    logger.info("%s: %d of %d seconds crying", clip.recording_id, int(timeline.values.sum()),
                len(timeline))


def cmd_evaluate(args):
    """
    Leave-one-participant-out evaluation on `paths.manifest`. With `paths.test_manifest`, or
    with `run.test_split` naming the manifest entries to hold out, the test corpus is also
    evaluated with LOPO (the matched run) and with a model trained on the whole training
    corpus (the cross-corpus run).
    """
    config = _load_config(args, "evaluate")
    pipeline = config.pipeline()
    spec = config.model_spec()

    manifest = read_manifest(config.get_path("paths", "manifest")).validate()
    test_path = config.get_path("paths", "test_manifest")
    test_manifest = read_manifest(test_path).validate() if test_path is not None else None

    if config.test_split is not None:
        test_manifest = manifest.split(config.test_split)
        manifest = manifest.split(config.test_split, exclude=True)

        if not test_manifest.entries or not manifest.entries:
            raise DataError(f"Split '{config.test_split}' must leave recordings on both sides "
                            f"({len(manifest.entries)} training, {len(test_manifest.entries)} "
                            "test).")

    evaluations = [lopo_evaluate(manifest, spec, pipeline, config.jobs)]

    if test_manifest is not None:
        matched = lopo_evaluate(test_manifest, spec, pipeline, config.jobs)
        matched.name = "lopo_test"

        evaluations.append(matched)
        evaluations.append(train_test_evaluate(manifest, test_manifest, spec, pipeline))

    output = _prepare_output(config.output)
    config.write(output / "run_config.xml")
    summary = write_metrics(evaluations, spec.variant, output)

    for name, block in summary[spec.variant].items():
        logger.info("%s: P %.3f (±%.3f) R %.3f (±%.3f) F1 %.3f (±%.3f)", name,
                    block["precision"]["mean"], block["precision"]["std"],
                    block["recall"]["mean"], block["recall"]["std"],
                    block["f1"]["mean"], block["f1"]["std"])


def build_parser():
    parser = argparse.ArgumentParser(prog="cry-detection",
                                     description="Detect infant crying in audio recordings.")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="log warnings only")

    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic corpus")
    synth.add_argument("out_dir", help="output directory")
    synth.add_argument("--participants", type=int, default=4)
    synth.add_argument("--recordings", type=int, default=1, help="recordings per participant")
    synth.add_argument("--seconds", type=int, default=600, help="length of each recording")
    synth.add_argument("--f0-min", type=float, default=440.0)
    synth.add_argument("--f0-max", type=float, default=505.0)
    synth.add_argument("--noise", default="babble",
                       help="noise bed: silence, babble, broadband or white")
    synth.add_argument("--noise-level-db", type=float, default=-10.0,
                       help="noise RMS relative to the cry peak level")
    synth.add_argument("--prefix", default="p", help="participant id prefix")
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth)

    for name, func, text in (("train", cmd_train, "train a model"),
                             ("predict", cmd_predict, "detect crying in a WAV file"),
                             ("evaluate", cmd_evaluate, "run the evaluation protocol")):
        command = commands.add_parser(name, help=text)
        command.add_argument("-c", "--config", help="run configuration XML")
        command.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                             help="override a configuration value (repeatable)")
        command.set_defaults(func=func)

        if name == "evaluate":
            command.add_argument("-j", "--jobs", type=int,
                                 help="folds run in parallel (same as --set run.jobs=N)")

        if name == "predict":
            command.add_argument("wav", help="recording to analyse")
            command.add_argument("--model", help="model directory (default: paths.output)")
            command.add_argument("-o", "--out", help="timeline CSV (default: in the model "
                                                     "directory)")

    return parser


def main(argv=None):
    """Run the command line interface and return the exit code."""
    args = build_parser().parse_args(argv)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT)
    logging.captureWarnings(True)

    try:
        args.func(args)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except DataError as e:
        logger.error("data error: %s", e)
        return EXIT_DATA
    except NumericError as e:
        logger.error("numeric failure: %s", e)
        return EXIT_NUMERIC

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
