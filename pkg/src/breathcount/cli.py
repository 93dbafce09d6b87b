"""Command-line interface.

Subcommands follow the pipeline stages: simulate -> process -> count, plus
eval for scoring predictions against labels and train for fitting the
count classifier. Exit codes: 0 success, 2 input parse error, 3 corrupt
recording, 4 missing resource, 5 internal invariant breach. All
randomness flows from --seed; outputs carry no timestamps so identical
invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .cfar import CfarParams
from .config import PRESETS, RadarConfig
from .counting import ModelRequiredError
from .metrics import evaluate, write_report
from .mmcr import CorruptRecordingError, MmcrReader, MmcrWriter
from .pipeline import (
    PipelineConfig,
    count_frames,
    count_profile,
    process_frames,
    write_map_csv,
    write_map_pgm,
    write_point_cloud_csv,
)
from .profiles import read_profile_csv
from .scene import SceneError, load_scene, scene_hash, validate_scene
from .simulate import synthesize_frame

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CORRUPT = 3
EXIT_MISSING = 4
EXIT_INTERNAL = 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _load_config(args) -> RadarConfig:
    return PRESETS[args.preset]


def _pipeline_from_args(args) -> PipelineConfig:
    return PipelineConfig(
        cfar=CfarParams(
            guard_cells=args.cfar_guard,
            training_cells=args.cfar_train,
            pfa=args.cfar_pfa,
        ),
        min_nonzero_fraction=args.min_motion_fraction,
        band_low_hz=args.band_low,
        band_high_hz=args.band_high,
        min_quality=args.min_quality,
        ica_runs=args.ica_runs,
        zero_margin_db=args.zero_margin_db,
        seed=args.seed,
        estimator=args.estimator,
        model_path=args.model,
    )


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cfar-guard", type=int, default=2, help="CFAR guard cells per side (default 2)")
    parser.add_argument("--cfar-train", type=int, default=8, help="CFAR training cells per side (default 8)")
    parser.add_argument("--cfar-pfa", type=float, default=1e-3, help="CFAR false-alarm rate (default 1e-3)")
    parser.add_argument(
        "--min-motion-fraction", "--m", dest="min_motion_fraction", type=float, default=0.25,
        help="minimum fraction of non-zero displacement samples for a valid point (default 0.25)",
    )
    parser.add_argument(
        "--band-low", "--bl", dest="band_low", type=float, default=0.1,
        help="breathing band lower edge in Hz (default 0.1)",
    )
    parser.add_argument(
        "--band-high", "--bh", dest="band_high", type=float, default=0.6,
        help="breathing band upper edge in Hz (default 0.6)",
    )
    parser.add_argument(
        "--min-quality", "--bs", dest="min_quality", type=float, default=0.2,
        help="minimum peak-power fraction of a breathing source (default 0.2)",
    )
    parser.add_argument(
        "--ica-runs", "--n", dest="ica_runs", type=int, default=10,
        help="number of incremental ICA runs (default 10)",
    )
    parser.add_argument(
        "--zero-margin-db", type=float, default=6.0,
        help="zero-Doppler dominance margin in dB for the displacement estimate (default 6)",
    )
    parser.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    parser.add_argument(
        "--estimator", choices=("clustering", "classifier"), default="clustering",
        help="count estimator (default clustering)",
    )
    parser.add_argument("--model", default=None, help="classifier checkpoint path")


def cmd_simulate(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    if out.exists() and not args.force:
        raise CliError(f"{out} exists; pass --force to overwrite", EXIT_MISSING)
    try:
        scene = load_scene(args.scene)
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_MISSING) from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{args.scene}: JSON parse error at line {exc.lineno} col {exc.colno}: {exc.msg}", EXIT_PARSE) from exc
    except SceneError as exc:
        raise CliError(f"{args.scene}: {exc}", EXIT_PARSE) from exc
    if args.seed is not None:
        import dataclasses

        scene = dataclasses.replace(scene, seed=args.seed)
    try:
        warnings = validate_scene(scene, config)
    except SceneError as exc:
        raise CliError(str(exc), EXIT_PARSE) from exc
    with MmcrWriter(
        out, config, scene_hash=scene_hash(scene), metadata={"warnings": warnings.to_dict()}
    ) as writer:
        for f in range(config.frame_count):
            writer.write_frame(synthesize_frame(config, scene, f))
    print(f"wrote {out} ({config.frame_count} frames, preset {args.preset})")
    if warnings.aliased_breathing:
        print(f"warning: persons {warnings.aliased_breathing} breathe at/above frame Nyquist; signal aliases")
    return EXIT_OK


def cmd_process(args) -> int:
    pipeline = _pipeline_from_args(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with _open_recording(args.recording) as reader:
        result = process_frames(reader.iter_frames(), reader.config, pipeline)
    write_point_cloud_csv(result, out_dir / "point_cloud.csv")
    from .micromotion import write_micromotion_csv

    write_micromotion_csv(result.micromotion, out_dir / "micromotion.csv")
    write_map_pgm(result.mean_map_db, out_dir / "range_azimuth.pgm")
    write_map_csv(result.mean_map_db, out_dir / "range_azimuth.csv")
    print(
        f"processed {args.recording}: {len(result.points)} points, "
        f"{len(result.frame_detections)} frame detections -> {out_dir}"
    )
    return EXIT_OK


def _open_recording(path) -> MmcrReader:
    if not Path(path).exists():
        raise CliError(f"recording not found: {path}", EXIT_MISSING)
    try:
        return MmcrReader(path)
    except CorruptRecordingError as exc:
        raise CliError(str(exc), EXIT_CORRUPT) from exc


def cmd_count(args) -> int:
    pipeline = _pipeline_from_args(args)
    if args.profile is not None:
        if not Path(args.profile).exists():
            raise CliError(f"profile not found: {args.profile}", EXIT_MISSING)
        try:
            profile = read_profile_csv(args.profile)
        except ValueError as exc:
            raise CliError(str(exc), EXIT_PARSE) from exc
        from .counting import CountEstimate
        from .pipeline import CountResult

        if profile.n_components == 0:
            result = CountResult(
                estimate=CountEstimate(count=0, method=pipeline.estimator, votes={0: 10}),
                n_valid_points=profile.n_bins,
                profile=profile,
            )
        else:
            result = count_profile(profile, pipeline)
    else:
        with _open_recording(args.recording) as reader:
            result = count_frames(reader.iter_frames(), reader.config, pipeline)
    payload = json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    print(payload, end="")
    return EXIT_OK


def cmd_eval(args) -> int:
    pipeline = _pipeline_from_args(args)
    manifest = Path(args.manifest)
    if not manifest.exists():
        raise CliError(f"manifest not found: {manifest}", EXIT_MISSING)
    pred, truth = [], []
    missing = []
    with open(manifest, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CliError(f"{manifest}:{line_no}: {exc.msg}", EXIT_PARSE) from exc
            path = Path(record["profile_path"])
            if not path.is_absolute():
                path = manifest.parent / path
            if not path.exists():
                missing.append(str(path))
                continue
            profile = read_profile_csv(path)
            if profile.n_components == 0:
                pred.append(0)
            else:
                pred.append(count_profile(profile, pipeline).estimate.count)
            truth.append(int(record["label"]))
    if missing:
        raise CliError("missing profile files: " + ", ".join(missing), EXIT_MISSING)
    if not truth:
        raise CliError(f"{manifest}: no usable entries", EXIT_PARSE)
    report = evaluate(pred, truth)
    out_dir = Path(args.out_dir)
    write_report(report, out_dir)
    print(
        f"evaluated {len(truth)} profiles: weighted F1 {report.weighted['f1']:.3f}, "
        f"MAE {report.mae:.3f} -> {out_dir}"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    from .training import TrainConfig, load_manifest, train_classifier

    try:
        entries = load_manifest(args.manifest)
    except FileNotFoundError as exc:
        raise CliError(str(exc), EXIT_MISSING) from exc
    except (ValueError, KeyError) as exc:
        raise CliError(f"{args.manifest}: {exc}", EXIT_PARSE) from exc
    rng_split = max(1, int(len(entries) * args.valid_fraction))
    train_set = entries[:-rng_split]
    valid_set = entries[-rng_split:]
    config = TrainConfig(epochs=args.epochs, seed=args.seed, learning_rate=args.lr)
    try:
        model, history = train_classifier(train_set, valid_set, config, model_path=args.out)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_PARSE) from exc
    print(
        f"trained on {len(train_set)} profiles, best valid macro F1 "
        f"{history.best_f1:.3f} at epoch {history.best_epoch} -> {args.out}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="breathcount",
        description="Count stationary people in FMCW radar recordings from their breathing micro-motion.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="synthesize an IQ recording from a scene JSON")
    p_sim.add_argument("scene", help="scene description JSON")
    p_sim.add_argument("out", help="output .mmcr recording")
    p_sim.add_argument("--preset", choices=sorted(PRESETS), default="full")
    p_sim.add_argument("--seed", type=int, default=None, help="override the scene's seed")
    p_sim.add_argument("--force", action="store_true", help="overwrite an existing output file")
    p_sim.set_defaults(func=cmd_simulate)

    p_proc = sub.add_parser("process", help="point cloud + micro-motion CSVs from a recording")
    p_proc.add_argument("recording", help="input .mmcr recording")
    p_proc.add_argument("--out-dir", required=True)
    _add_pipeline_flags(p_proc)
    p_proc.set_defaults(func=cmd_process)

    p_count = sub.add_parser("count", help="estimate the person count")
    p_count.add_argument("recording", nargs="?", default=None, help="input .mmcr recording")
    p_count.add_argument("--profile", default=None, help="count a saved profile CSV instead")
    p_count.add_argument("--out", default=None, help="write the count JSON here as well")
    _add_pipeline_flags(p_count)
    p_count.set_defaults(func=cmd_count)

    p_eval = sub.add_parser("eval", help="score saved profiles against labels")
    p_eval.add_argument("manifest", help="JSON-lines manifest {profile_path, label}")
    p_eval.add_argument("--out-dir", required=True)
    _add_pipeline_flags(p_eval)
    p_eval.set_defaults(func=cmd_eval)

    p_train = sub.add_parser("train", help="train the attention count classifier")
    p_train.add_argument("manifest", help="JSON-lines manifest {profile_path, label}")
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--epochs", type=int, default=150)
    p_train.add_argument("--lr", type=float, default=0.08)
    p_train.add_argument("--valid-fraction", type=float, default=0.2)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=cmd_train)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "count":
        if args.recording is None and args.profile is None:
            parser.error("count needs a recording or --profile")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ModelRequiredError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except CorruptRecordingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except AssertionError as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
