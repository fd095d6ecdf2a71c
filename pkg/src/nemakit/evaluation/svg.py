"""Standalone SVG figures: normalized confusion heatmap, ROC curves, training curves.

Everything is drawn with plain ``rect``/``polyline``/``text`` elements so the
output is byte-stable and parseable by any XML reader.
"""

from __future__ import annotations

import os
import xml.etree.ElementTree as ET
from typing import Mapping, Sequence

import numpy as np

from .roc import RocCurve

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
SVG_NS = "http://www.w3.org/2000/svg"


def _svg(width: int, height: int) -> ET.Element:
    root = ET.Element("svg", xmlns=SVG_NS, width=str(width), height=str(height), viewBox=f"0 0 {width} {height}")
    ET.SubElement(root, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    return root


def _text(parent, x, y, label, size=12, anchor="middle", **extra) -> ET.Element:
    attrs = {"fill": "black", "font-size": str(size), "text-anchor": anchor, "font-family": "sans-serif"}
    attrs.update(extra)
    el = ET.SubElement(parent, "text", x=f"{x:.2f}", y=f"{y:.2f}", **attrs)
    el.text = label
    return el


def _write(root: ET.Element, path: str | os.PathLike) -> None:
    ET.ElementTree(root).write(path, encoding="utf-8", xml_declaration=True)


class _Axes:
    """Maps data coordinates into a plot rectangle and draws the frame."""

    def __init__(self, parent, left, top, width, height, xlim, ylim, xlabel, ylabel, title):
        self.g = ET.SubElement(parent, "g")
        self.left, self.top, self.width, self.height = left, top, width, height
        self.xlim, self.ylim = xlim, ylim
        ET.SubElement(self.g, "rect", x=str(left), y=str(top), width=str(width), height=str(height), fill="none", stroke="black")
        for frac in np.linspace(0, 1, 6):
            xv = xlim[0] + frac * (xlim[1] - xlim[0])
            yv = ylim[0] + frac * (ylim[1] - ylim[0])
            px, py = self.map(xv, yv)
            ET.SubElement(self.g, "line", x1=f"{px:.2f}", y1=str(top + height), x2=f"{px:.2f}", y2=str(top + height + 4), stroke="black")
            _text(self.g, px, top + height + 16, f"{xv:.3g}", 10)
            ET.SubElement(self.g, "line", x1=str(left - 4), y1=f"{py:.2f}", x2=str(left), y2=f"{py:.2f}", stroke="black")
            _text(self.g, left - 6, py + 3, f"{yv:.3g}", 10, anchor="end")
        _text(self.g, left + width / 2, top + height + 34, xlabel, 12)
        _text(self.g, left - 42, top + height / 2, ylabel, 12, transform=f"rotate(-90 {left - 42} {top + height / 2})")
        _text(self.g, left + width / 2, top - 10, title, 14)

    def map(self, x, y):
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        px = self.left + (x - x0) / ((x1 - x0) or 1.0) * self.width
        py = self.top + self.height - (y - y0) / ((y1 - y0) or 1.0) * self.height
        return px, py

    def polyline(self, xs, ys, color, label, **extra) -> ET.Element:
        pts = " ".join("{:.3f},{:.3f}".format(*self.map(x, y)) for x, y in zip(xs, ys))
        return ET.SubElement(self.g, "polyline", points=pts, fill="none", stroke=color, **{"stroke-width": "1.5", "data-label": label}, **extra)

    def legend(self, entries: Sequence[tuple[str, str]], corner: str = "lower right") -> None:
        x = self.left + self.width - 8 if "right" in corner else self.left + 8
        anchor = "end" if "right" in corner else "start"
        y0 = self.top + self.height - 10 - 16 * (len(entries) - 1) if "lower" in corner else self.top + 18
        for i, (label, color) in enumerate(entries):
            _text(self.g, x, y0 + 16 * i, label, 11, anchor=anchor, fill=color)


def confusion_heatmap(path, normalized: np.ndarray, class_names: Sequence[str], title="Normalized confusion matrix") -> None:
    k = len(class_names)
    cell, left, top = 60, 170, 50
    root = _svg(left + cell * k + 30, top + cell * k + 140)
    _text(root, left + cell * k / 2, 30, title, 14)
    for i in range(k):
        for j in range(k):
            v = float(normalized[i, j])
            shade = int(round(255 * (1 - v)))
            ET.SubElement(root, "rect", x=str(left + j * cell), y=str(top + i * cell), width=str(cell), height=str(cell),
                          fill=f"rgb({shade},{shade},255)", stroke="#888888", **{"data-value": repr(v)})
            _text(root, left + j * cell + cell / 2, top + i * cell + cell / 2 + 4, f"{v:.2f}", 11,
                  fill="white" if v > 0.5 else "black")
        _text(root, left - 6, top + i * cell + cell / 2 + 4, class_names[i], 11, anchor="end")
        bx, by = left + i * cell + cell / 2, top + k * cell + 8
        _text(root, bx, by, class_names[i], 11, anchor="end", transform=f"rotate(-45 {bx} {by})")
    _text(root, 20, top + cell * k / 2, "actual", 12, transform=f"rotate(-90 20 {top + cell * k / 2})")
    _text(root, left + cell * k / 2, top + cell * k + 130, "predicted", 12)
    _write(root, path)


def roc_plot(path, roc: RocCurve, class_names: Sequence[str], title="ROC (one-vs-rest)") -> None:
    root = _svg(560, 480)
    ax = _Axes(root, 70, 40, 440, 380, (0.0, 1.0), (0.0, 1.0), "false positive rate", "true positive rate", title)
    ax.polyline([0, 1], [0, 1], "#aaaaaa", "chance", **{"stroke-dasharray": "4 3"})
    entries = []
    for c, curve in roc.per_class.items():
        color = PALETTE[c % len(PALETTE)]
        ax.polyline(curve.fpr, curve.tpr, color, class_names[c])
        entries.append((f"{class_names[c]} (AUC = {curve.auc:.12f})", color))
    ax.legend(entries)
    _write(root, path)


def training_curves(path, history: Mapping[str, Sequence[float]], title="Training curves") -> None:
    """Loss and accuracy panels; ``history`` holds epoch/train_loss/val_loss/train_acc/val_acc columns."""
    epochs = list(history["epoch"])
    if not epochs:
        raise ValueError("training history is empty")
    root = _svg(900, 420)
    _text(root, 450, 20, title, 15)
    xlim = (min(epochs), max(epochs)) if len(epochs) > 1 else (epochs[0] - 1, epochs[0] + 1)
    losses = [v for key in ("train_loss", "val_loss") for v in history[key]]
    loss_ax = _Axes(root, 70, 50, 340, 300, xlim, (0.0, max(losses) * 1.05 or 1.0), "epoch", "loss", "loss")
    acc_ax = _Axes(root, 520, 50, 340, 300, xlim, (0.0, 1.0), "epoch", "accuracy", "accuracy")
    for ax, metric in ((loss_ax, "loss"), (acc_ax, "acc")):
        ax.polyline(epochs, history[f"train_{metric}"], PALETTE[0], f"train_{metric}")
        ax.polyline(epochs, history[f"val_{metric}"], PALETTE[1], f"val_{metric}")
        ax.legend([("train", PALETTE[0]), ("validation", PALETTE[1])], "upper right" if metric == "loss" else "lower right")
    _write(root, path)
