"""``singsep`` command line: corpus, manifest, staged training, separation, evaluation.

Exit codes: 0 success, 2 usage, 3 dependency/checkpoint, 4 data, 1 other.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .exceptions import DataError, DependencyError, SingsepError, UsageError

logger = logging.getLogger("singsep")

TRAIN_ORDER = ("teacher", "student_encoder", "sdn", "sin", "f0")


def load_config(path):
    """Read a YAML config; a missing path gives an empty config."""
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh) or {}
    except FileNotFoundError as exc:
        raise UsageError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError(f"config {path} must be a mapping at the top level")
    return cfg


def stage_configs(cfg, stage, seed=None):
    """NetworkConfig and TrainConfig for one stage, per-stage overrides applied."""
    from .networks import NetworkConfig
    from .training import TrainConfig

    train = dict(cfg.get("train") or {})
    train.update((cfg.get("stages") or {}).get(stage) or {})
    if seed is not None:
        train["seed"] = seed
    return NetworkConfig.from_dict(cfg.get("network") or {}), TrainConfig.from_dict(train)


def _cmd_make_corpus(args, cfg):
    from .dataset import make_synthetic_corpus

    opts = cfg.get("corpus") or {}
    songs = make_synthetic_corpus(
        args.output,
        n_singers=args.singers or opts.get("n_singers", 4),
        clips_per_singer=args.clips or opts.get("clips_per_singer", 20),
        duration=args.duration or opts.get("duration", 2.5),
        seed=args.seed,
    )
    print(f"{args.output}\tsongs={len(songs)}")


def _cmd_manifest(args, cfg):
    from .dataset import build_manifest

    opts = cfg.get("manifest") or {}
    val = args.val_fraction if args.val_fraction is not None else opts.get("val_fraction", 0.1)
    test = args.test_fraction if args.test_fraction is not None else opts.get("test_fraction", 0.15)
    manifest = build_manifest(args.corpus, val_fraction=val, test_fraction=test, seed=args.seed)
    out = Path(args.output or Path(args.corpus) / "manifest.jsonl")
    manifest.save(out)
    counts = {s: len(manifest.split(s)) for s in ("train", "val", "test")}
    print(f"{out}\t" + "\t".join(f"{k}={v}" for k, v in counts.items()))


def _manifest_path(args, cfg):
    path = args.manifest or cfg.get("manifest_path")
    if not path:
        raise UsageError("no manifest given (use --manifest or manifest_path in the config)")
    return path


def _cache_dir(args, cfg, manifest_path):
    return args.cache_dir or cfg.get("cache_dir") or str(Path(manifest_path).parent / ".cache")


def _cmd_train(args, cfg):
    from .dataset import DatasetManifest, load_corpus
    from .networks import load_checkpoint, save_checkpoint
    from .training import DEPENDENCIES, run_training_stage

    mpath = _manifest_path(args, cfg)
    manifest = DatasetManifest.load(mpath)
    stages = TRAIN_ORDER if args.stage == "all" else (args.stage,)
    ckdir = Path(args.checkpoint_dir)
    data = load_corpus(manifest, ("train", "val"), cache_dir=_cache_dir(args, cfg, mpath))
    for stage in stages:
        ncfg, tcfg = stage_configs(cfg, stage, args.seed)
        if args.max_steps is not None:
            tcfg.max_steps = args.max_steps
        deps = {}
        for need in DEPENDENCIES[stage]:
            path = ckdir / f"{need}.pt"
            if not path.exists():
                raise DependencyError(f"stage {stage!r} requires a trained {need!r} checkpoint ({path} not found)")
            deps[need] = load_checkpoint(path, expect_stage=need)
        ckpt, report = run_training_stage(stage, data, ncfg, tcfg, deps, n_singers=manifest.n_singers)
        save_checkpoint(ckpt, ckdir / f"{stage}.pt")
        (ckdir / f"{stage}.report.jsonl").write_text(report.to_jsonl())
        print(f"{stage}\tinitial_val={report.initial_val:.5f}\tbest_val={report.best_val:.5f}\t"
              f"best_step={report.best_step}\tstop={report.stop_reason}\tseconds={report.seconds:.1f}")


def _resolve_singer(value, args, cfg):
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        pass
    mpath = args.manifest or cfg.get("manifest_path")
    if not mpath:
        raise UsageError(f"singer {value!r} is not an index; pass --manifest to look names up")
    from .dataset import DatasetManifest

    index = DatasetManifest.load(mpath).singer_index
    if value not in index:
        raise UsageError(f"unknown singer {value!r}; known: {', '.join(sorted(index))}")
    return index[value]


def _cmd_separate(args, cfg):
    from .audio_features import load_wav, save_feature_dump, save_wav
    from .pipeline import CheckpointSet, separate

    singer = _resolve_singer(args.singer, args, cfg)
    if args.mode == "sdn" and singer is None:
        raise UsageError("--mode sdn needs --singer")
    mixture = load_wav(args.input)
    result = separate(mixture, args.mode, singer, CheckpointSet.from_dir(args.checkpoint_dir),
                      f0_mode=args.f0_mode, seed=args.seed)
    save_wav(args.output, result.vocal_clip)
    if args.features:
        save_feature_dump(args.features, result.predicted_features.values, layout=result.predicted_features.layout)
    print(f"{args.output}\tframes={result.predicted_features.n_frames}\tseconds={result.vocal_clip.duration:.3f}")


def _cmd_evaluate(args, cfg):
    from .dataset import DatasetManifest
    from .pipeline import CheckpointSet, evaluate_mcd

    manifest = DatasetManifest.load(_manifest_path(args, cfg))
    report = evaluate_mcd(manifest, CheckpointSet.from_dir(args.checkpoint_dir), modes=args.modes,
                          baselines=args.baselines, split=args.split)
    if args.output_prefix:
        prefix = Path(args.output_prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{prefix}.tsv").write_text(report.to_tsv())
        Path(f"{prefix}.jsonl").write_text(report.to_jsonl())
    sys.stdout.write(report.to_tsv())
    for track, reason in report.skipped:
        logger.warning("skipped %s: %s", track, reason)
    if not report.tracks:
        raise DataError("no track could be scored")


def build_parser():
    p = argparse.ArgumentParser(prog="singsep", description="Singing-voice separation: corpus, training, separation, evaluation.")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-dir", default="checkpoints")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("make-corpus", help="render the synthetic multi-singer corpus")
    s.add_argument("output")
    s.add_argument("--singers", type=int)
    s.add_argument("--clips", type=int, help="clips per singer")
    s.add_argument("--duration", type=float, help="clip length in seconds")
    s.set_defaults(func=_cmd_make_corpus)

    s = sub.add_parser("manifest", help="scan a corpus directory and write a split manifest")
    s.add_argument("corpus")
    s.add_argument("-o", "--output")
    s.add_argument("--val-fraction", type=float)
    s.add_argument("--test-fraction", type=float)
    s.set_defaults(func=_cmd_manifest)

    s = sub.add_parser("train", help="train one stage (or all, in dependency order)")
    s.add_argument("stage", choices=TRAIN_ORDER + ("all",))
    s.add_argument("--manifest")
    s.add_argument("--cache-dir")
    s.add_argument("--max-steps", type=int)
    s.set_defaults(func=_cmd_train)

    s = sub.add_parser("separate", help="extract the vocal from a mixture WAV")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--mode", choices=("sin", "sdn"), default="sin")
    s.add_argument("--singer", help="singer index, or a name when --manifest is given")
    s.add_argument("--manifest")
    s.add_argument("--f0-mode", choices=("continuous", "discrete"))
    s.add_argument("--features", help="also write the predicted features as a feature dump")
    s.set_defaults(func=_cmd_separate)

    s = sub.add_parser("evaluate", help="MCD of decoder outputs on the test split")
    s.add_argument("--manifest")
    s.add_argument("--split", default="test")
    s.add_argument("--modes", nargs="+", choices=("sin", "sdn"), default=["sin", "sdn"])
    s.add_argument("--baselines", nargs="*", choices=("mean", "oracle"), default=["mean", "oracle"])
    s.add_argument("--output-prefix", help="write <prefix>.tsv and <prefix>.jsonl")
    s.set_defaults(func=_cmd_evaluate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, load_config(args.config))
    except SingsepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
