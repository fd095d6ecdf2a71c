"""Run-bundle layout shared by the ``train``, ``eval`` and ``plot`` commands.

::

    <run>/config.json          resolved TrainConfig
    <run>/manifest.json        dataset manifest with file-list checksum
    <run>/folds.json           fold plan (validation indices per fold)
    <run>/run.json             model name, class names, transfer source
    <run>/summary.csv|json     per-fold metrics, mean and standard deviation
    <run>/fold_<i>/best.nema   best-validation-accuracy weights
    <run>/fold_<i>/history.csv, lr_trace.csv
    <run>/fold_<i>/metrics.json|csv, confusion.csv, roc.csv
    <run>/fold_<i>/confusion.svg, roc.svg, curves.svg
    <run>/fold_<i>/transfer.json   (only with --transfer)
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .data import DatasetManifest
from .evaluation import Evaluation, svg
from .evaluation.report import write_confusion_csv, write_metrics_csv, write_metrics_json, write_roc_csv
from .training import FoldPlan, TrainConfig, TrainHistory
from .training.loop import CrossValidation, TransferReport

SUMMARY_METRICS = ("accuracy", "precision", "recall", "specificity", "f1", "loss")


@dataclass
class Bundle:
    root: Path

    @property
    def config_path(self) -> Path:
        return self.root / "config.json"

    def fold_dir(self, fold: int) -> Path:
        return self.root / f"fold_{fold}"

    def fold_dirs(self) -> list[Path]:
        return sorted((p for p in self.root.glob("fold_*") if p.is_dir()), key=lambda p: int(p.name.split("_")[1]))

    def config(self) -> TrainConfig:
        return TrainConfig.load(self.config_path)

    def manifest(self) -> DatasetManifest:
        return DatasetManifest.load(self.root / "manifest.json")

    def plan(self) -> FoldPlan:
        return FoldPlan.from_dict(json.loads((self.root / "folds.json").read_text()))

    def run_info(self) -> dict:
        return json.loads((self.root / "run.json").read_text())

    @classmethod
    def containing(cls, checkpoint: Path) -> "Bundle | None":
        """The bundle a ``fold_<i>/best.nema`` checkpoint belongs to, if any."""
        root = checkpoint.resolve().parent.parent
        return cls(root) if (root / "config.json").is_file() else None


def write_header(bundle: Bundle, config: TrainConfig, manifest: DatasetManifest, plan: FoldPlan,
                 transfer: str | None) -> None:
    bundle.root.mkdir(parents=True, exist_ok=True)
    bundle.config_path.write_text(config.to_json())
    manifest.save(bundle.root / "manifest.json")
    (bundle.root / "folds.json").write_text(json.dumps(plan.to_dict()) + "\n")
    info = {
        "model": config.model,
        "classes": list(manifest.classes),
        "num_classes": len(manifest.classes),
        "manifest_checksum": manifest.checksum,
        "transfer": transfer,
    }
    (bundle.root / "run.json").write_text(json.dumps(info, indent=2) + "\n")


def write_evaluation(out: Path, evaluation: Evaluation, class_names: Sequence[str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_json(out / "metrics.json", evaluation, class_names)
    write_metrics_csv(out / "metrics.csv", evaluation)
    write_confusion_csv(out / "confusion.csv", evaluation, class_names)
    write_roc_csv(out / "roc.csv", evaluation.roc, class_names)
    svg.confusion_heatmap(out / "confusion.svg", evaluation.normalized, class_names)
    svg.roc_plot(out / "roc.svg", evaluation.roc, class_names)


def write_transfer(path: Path, report: TransferReport) -> None:
    path.write_text(json.dumps({"initialized": report.initialized, "kept_random": report.kept_random}, indent=2) + "\n")


def write_results(bundle: Bundle, cv: CrossValidation, class_names: Sequence[str]) -> None:
    for report in cv.reports:
        fold_dir = bundle.fold_dir(report.fold)
        fold_dir.mkdir(parents=True, exist_ok=True)
        if not report.ok:
            (fold_dir / "error.txt").write_text(report.error + "\n")
            continue
        write_evaluation(fold_dir, report.evaluation, class_names)
        if report.history.epochs:
            svg.training_curves(fold_dir / "curves.svg", report.history.columns(), f"fold {report.fold}")
        if report.transfer is not None:
            write_transfer(fold_dir / "transfer.json", report.transfer)
        (fold_dir / "best_epoch.json").write_text(json.dumps({
            "best_epoch": report.history.best_epoch,
            "best_val_acc": report.history.best_val_acc,
            "initial_val_loss": report.history.initial_val_loss,
            "initial_val_acc": report.history.initial_val_acc,
        }, indent=2) + "\n")

    aggregate = cv.aggregate
    rows = []
    for report in cv.reports:
        values = report.evaluation.metrics.as_dict() if report.ok else {}
        rows.append([f"fold {report.fold}", *(values.get(m, "") for m in SUMMARY_METRICS), report.error or ""])
    with open(bundle.root / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", *SUMMARY_METRICS, "error"])
        writer.writerows(rows)
        if aggregate:
            writer.writerow(["mean", *(aggregate[m][0] for m in SUMMARY_METRICS), ""])
            writer.writerow(["std", *(aggregate[m][1] for m in SUMMARY_METRICS), ""])
    doc = {
        "folds": [
            {
                "fold": r.fold,
                "metrics": r.evaluation.metrics.as_dict() if r.ok else None,
                "macro_auc": r.evaluation.roc.macro_auc if r.ok else None,
                "best_epoch": r.history.best_epoch if r.ok else None,
                "error": r.error,
            }
            for r in cv.reports
        ],
        "aggregate": {m: {"mean": mean, "std": std} for m, (mean, std) in aggregate.items()},
    }
    (bundle.root / "summary.json").write_text(json.dumps(doc, indent=2) + "\n")


def results_table(cv: CrossValidation) -> str:
    """Per-fold rows plus mean and standard deviation, as a fixed-width text table."""
    header = ["Fold", "Accuracy", "Precision", "Recall", "Specificity", "F1", "Loss"]
    keys = ("accuracy", "precision", "recall", "specificity", "f1", "loss")
    lines = ["  ".join(f"{h:>11}" for h in header)]
    for r in cv.reports:
        if r.ok:
            m = r.evaluation.metrics.as_dict()
            lines.append("  ".join([f"{r.fold:>11}", *(f"{100 * m[k]:>10.2f}%" if k != "loss" else f"{m[k]:>11.4f}" for k in keys)]))
        else:
            lines.append(f"{r.fold:>11}  failed: {r.error}")
    agg = cv.aggregate
    if agg:
        for label, idx in (("Mean", 0), ("Std", 1)):
            lines.append("  ".join([f"{label:>11}", *(f"{100 * agg[k][idx]:>10.2f}%" if k != "loss" else f"{agg[k][idx]:>11.4f}" for k in keys)]))
    return "\n".join(lines)


def read_history(fold_dir: Path) -> dict[str, list[float]]:
    return TrainHistory.read_csv(fold_dir / "history.csv")
