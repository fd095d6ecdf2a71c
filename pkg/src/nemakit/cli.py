"""``nemakit`` command-line entry point.

Subcommands: synth, describe, train, eval, gradcheck, plot. ``--dump-config``
prints the embedded default configuration. Exit status is 0 only when no
operation reported an error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bundle import Bundle, read_history, results_table, write_evaluation, write_header, write_results
from .data import DatasetManifest, generate_synthetic_dataset, load_arrays, scan_dataset
from .data.synthetic import TASKS
from .evaluation import evaluate_model, svg
from .models import NEMANET_TARGET_CENSUS, build_model, load_weights
from .models.zoo import BUILDERS
from .training import TrainConfig, apply_env, default_config, model_builder_for, plan_for, run_cross_validation
from .training.config import ConfigError
from .verify import SCOPES, run_suite

log = logging.getLogger("nemakit")


class CommandError(RuntimeError):
    pass


# --- synth --------------------------------------------------------------------


def cmd_synth(args) -> int:
    out = Path(args.out)
    previous = None
    if (out / "manifest.json").is_file():
        previous = DatasetManifest.load(out / "manifest.json").checksum
    manifest = generate_synthetic_dataset(out, args.classes, args.per_class, args.size, args.seed, args.task)
    manifest.save(out / "manifest.json")
    print(f"wrote {len(manifest)} images to {out}")
    for name, count in manifest.class_counts().items():
        print(f"  {name:<24} {count}")
    print(f"checksum {manifest.checksum}")
    if previous is not None:
        print("identical checksum" if previous == manifest.checksum else "checksum changed")
    return 0


# --- describe -----------------------------------------------------------------


def cmd_describe(args) -> int:
    classes = args.classes if args.classes is not None else (1000 if args.model == "densenet121" else 5)
    model = build_model(args.model, classes, args.input_size, width_divisor=args.width_divisor)
    census = model.census()
    shapes = model.infer_shapes()
    if args.per_layer:
        print(f"{'layer':<48} {'params':>12}")
        for row in census.per_layer:
            print(f"{row.name:<48} {row.total:>12,}")
    print(f"model {args.model}  classes {classes}  input {args.input_size}  width_divisor {args.width_divisor}")
    print(f"output grid before pooling: {shapes[list(model.nodes)[-2]]}")
    print(f"total parameters         {census.total:>12,}")
    print(f"trainable parameters     {census.trainable:>12,}")
    print(f"non-trainable parameters {census.non_trainable:>12,}")
    if args.model == "nemanet" and args.width_divisor == 1 and classes == 5:
        print("target census (shown for comparison; not reproduced exactly):")
        for key in ("total", "trainable", "non_trainable"):
            target = NEMANET_TARGET_CENSUS[key]
            ours = getattr(census, key)
            print(f"  {key:<14} target {target:>12,}  deviation {ours - target:>+9,} ({(ours - target) / target:+.4%})")
    if args.csv:
        Path(args.csv).write_text(census.to_csv())
    return 0


# --- train --------------------------------------------------------------------


def resolve_config(preset: str, config_path: str | None, overrides: dict) -> TrainConfig:
    data = default_config(preset).to_dict()
    if config_path:
        try:
            data.update(json.loads(Path(config_path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    data.update({k: v for k, v in overrides.items() if v is not None})
    return apply_env(TrainConfig.from_dict(data))


def _load_dataset(path: str) -> DatasetManifest:
    p = Path(path)
    if p.is_file():
        return DatasetManifest.load(p)
    if not p.is_dir():
        raise CommandError(f"data directory {p} does not exist")
    return scan_dataset(p)


def cmd_train(args) -> int:
    manifest = _load_dataset(args.data)
    config = resolve_config(args.preset, args.config, {
        "model": args.model, "folds": args.folds, "epochs": args.epochs,
    })
    if args.transfer and not Path(args.transfer).is_file():
        raise CommandError(f"transfer checkpoint {args.transfer} does not exist")
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        raise CommandError(f"output directory {out} is not empty")

    labels = manifest.labels
    plan = plan_for(config, labels, manifest.classes)
    log.info("loading %d images at %d px", len(manifest), config.input_size)
    x, y = load_arrays(manifest, config.input_size, roi=config.roi_crop, median=config.median_filter)
    bundle = Bundle(out)
    write_header(bundle, config, manifest, plan, args.transfer)
    builder = model_builder_for(config, len(manifest.classes))
    cv = run_cross_validation(builder, x, y, config, plan, out, args.transfer, args.parallel_folds, manifest.classes)
    write_results(bundle, cv, manifest.classes)
    for report in cv.reports:
        if report.transfer is not None:
            t = report.transfer
            print(f"fold {report.fold} transfer: {len(t.initialized)} parameters initialized, "
                  f"{len(t.kept_random)} kept random (names in fold_{report.fold}/transfer.json)")
            log.info("fold %d kept random: %s", report.fold, " ".join(t.kept_random))
    print(results_table(cv))
    print(f"bundle written to {out}")
    failed = [r.fold for r in cv.reports if not r.ok]
    if failed:
        print(f"folds failed: {failed}", file=sys.stderr)
        return 1
    return 0


# --- eval ---------------------------------------------------------------------


def cmd_eval(args) -> int:
    checkpoint = Path(args.checkpoint)
    if not checkpoint.is_file():
        raise CommandError(f"checkpoint {checkpoint} does not exist")
    bundle = Bundle(Path(args.bundle)) if args.bundle else Bundle.containing(checkpoint)
    if bundle is None:
        raise CommandError("cannot locate the run bundle for this checkpoint; pass --bundle")
    config = bundle.config()
    info = bundle.run_info()
    manifest = _load_dataset(args.data) if args.data else bundle.manifest()
    if manifest.checksum != info["manifest_checksum"]:
        log.warning("dataset checksum differs from the one recorded in the bundle")
    if list(manifest.classes) != info["classes"]:
        raise CommandError(f"dataset classes {manifest.classes} differ from the bundle's {info['classes']}")

    if args.split == "all":
        indices = None
    else:
        fold = args.fold if args.fold is not None else _fold_of(checkpoint)
        indices = bundle.plan().val_indices(fold)
    x, y = load_arrays(manifest, config.input_size, indices, roi=config.roi_crop, median=config.median_filter)
    model = build_model(config.model, len(manifest.classes), config.input_size,
                        width_divisor=config.width_divisor,
                        bn={"momentum": config.bn_momentum, "epsilon": config.bn_epsilon})
    load_weights(model, checkpoint)
    evaluation = evaluate_model(model, x, y, config.eval_batch_size, len(manifest.classes))
    out = Path(args.out)
    write_evaluation(out, evaluation, manifest.classes)
    m = evaluation.metrics
    print(f"samples {len(y)}  accuracy {m.accuracy:.6f}  precision {m.precision:.6f}  recall {m.recall:.6f}  "
          f"specificity {m.specificity:.6f}  f1 {m.f1:.6f}  loss {m.loss:.6f}  macro AUC {evaluation.roc.macro_auc:.6f}")
    print(f"reports written to {out}")
    return 0


def _fold_of(checkpoint: Path) -> int:
    name = checkpoint.resolve().parent.name
    if not name.startswith("fold_"):
        raise CommandError(f"cannot infer the fold from {checkpoint}; pass --fold or --split all")
    return int(name.split("_", 1)[1])


# --- gradcheck ----------------------------------------------------------------


def cmd_gradcheck(args) -> int:
    dtype = np.float32 if args.precision == 32 else np.float64
    failures = 0
    print(f"{'scope':<7} {'case':<44} {'shape':>5} {'worst rel err':>14} {'tolerance':>10}  status  worst tensor")
    for result in run_suite(args.scope, dtype, args.seed, negative_control=args.negative_control):
        r = result.report
        status = "pass" if r.passed else "FAIL"
        failures += not r.passed
        print(f"{result.scope:<7} {result.name:<44} {result.variant:>5} {r.max_rel_error:>14.3e} {r.tolerance:>10.0e}  {status:<6}  {r.worst()}")
    print(f"{failures} failure(s)")
    return 1 if failures else 0


# --- plot ---------------------------------------------------------------------


def cmd_plot(args) -> int:
    bundle = Bundle(Path(args.bundle))
    fold_dirs = [d for d in bundle.fold_dirs() if (d / "history.csv").is_file()]
    if not fold_dirs:
        raise CommandError(f"no fold histories under {bundle.root}")
    out = Path(args.out) if args.out else None
    for d in fold_dirs:
        history = read_history(d)
        if not history["epoch"]:
            raise CommandError(f"{d / 'history.csv'} has no epochs")
        target = (out / f"{d.name}_curves.svg") if out else d / "curves.svg"
        target.parent.mkdir(parents=True, exist_ok=True)
        svg.training_curves(target, history, d.name.replace("_", " "))
        print(f"wrote {target}")
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nemakit", description="Nematode image classification toolkit")
    parser.add_argument("--version", action="version", version=f"nemakit {__version__}")
    parser.add_argument("--dump-config", nargs="?", const="full", choices=("full", "synthetic"), metavar="PRESET",
                        help="print the default configuration (preset 'full' or 'synthetic') and exit")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("synth", help="generate the synthetic fixture dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--task", choices=TASKS, default="species")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("describe", help="print a model's parameter census")
    p.add_argument("--model", choices=sorted(BUILDERS), default="nemanet")
    p.add_argument("--input-size", type=int, default=224)
    p.add_argument("--classes", type=int)
    p.add_argument("--width-divisor", type=int, default=1)
    p.add_argument("--per-layer", action="store_true")
    p.add_argument("--csv", help="write the per-layer census as CSV")
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("train", help="cross-validated training run")
    p.add_argument("--data", required=True, help="dataset root or manifest.json")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file overriding preset values")
    p.add_argument("--preset", choices=("full", "synthetic"), default="full")
    p.add_argument("--model", choices=sorted(BUILDERS))
    p.add_argument("--folds", type=int, help="number of folds; 1 holds out 20%% once")
    p.add_argument("--epochs", type=int)
    p.add_argument("--transfer", help="checkpoint whose matching parameters initialize the model")
    p.add_argument("--parallel-folds", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bundle", help="run bundle (defaults to the checkpoint's)")
    p.add_argument("--data", help="dataset root or manifest (defaults to the bundle's)")
    p.add_argument("--split", choices=("val", "all"), default="val")
    p.add_argument("--fold", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    p.add_argument("--scope", choices=SCOPES, default="ops")
    p.add_argument("--precision", type=int, choices=(32, 64), default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--negative-control", action="store_true", help="include a deliberately wrong backward pass")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("plot", help="training-curve SVGs for every fold of a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    if args.dump_config:
        sys.stdout.write(default_config(args.dump_config).to_json())
        return 0
    if args.command is None:
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (CommandError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
