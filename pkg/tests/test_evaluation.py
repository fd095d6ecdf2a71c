import csv
import math
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nemakit.evaluation import (
    ConfusionMatrix,
    aggregate_folds,
    confusion_matrix,
    evaluate_model,
    metrics_from_cm,
    roc_auc,
    svg,
)
from nemakit.evaluation.evaluate import predict_logits
from nemakit.evaluation.report import write_roc_csv
from nemakit.models import build_nemanet
from oracles import hand_tally, pair_counting_auc

SVG = "{http://www.w3.org/2000/svg}"


# --- confusion matrix ---------------------------------------------------------


def test_cm_small_examples():
    assert confusion_matrix([0, 0, 1], [0, 1, 1], 2).counts.tolist() == [[1, 1], [0, 1]]
    assert (confusion_matrix([0, 1, 2], [0, 1, 2], 3).counts == np.eye(3, dtype=int)).all()


def test_cm_out_of_range_names_index():
    with pytest.raises(ValueError, match="predicted label 3 at index 1"):
        confusion_matrix([0, 1], [0, 3], 3)


@given(st.integers(1, 6).flatmap(lambda k: st.tuples(
    st.just(k), st.lists(st.tuples(st.integers(0, k - 1), st.integers(0, k - 1)), min_size=1, max_size=60))))
def test_cm_row_sums_and_permutation_equivariance(case):
    k, pairs = case
    actual, predicted = map(list, zip(*pairs))
    cm = confusion_matrix(actual, predicted, k).counts
    assert cm.sum(axis=1).tolist() == [actual.count(c) for c in range(k)]
    perm = np.random.default_rng(len(pairs)).permutation(k)
    relabeled = confusion_matrix(perm[actual], perm[predicted], k).counts
    assert (relabeled[np.ix_(perm, perm)] == cm).all()


# --- metrics ------------------------------------------------------------------


def test_diagonal_cm_all_ones():
    m = metrics_from_cm(ConfusionMatrix(np.diag([3, 4, 5])))
    assert (m.accuracy, m.precision, m.recall, m.specificity, m.f1) == (1, 1, 1, 1, 1)


def test_two_class_hand_tally():
    m = metrics_from_cm(ConfusionMatrix(np.array([[1, 1], [0, 1]])))
    for name in ("precision", "recall", "f1", "specificity"):
        assert m.exact[name] == pytest.approx(2 / 3) and str(m.exact[name]) == "2/3"


def test_all_zero_cm_rejected():
    with pytest.raises(ValueError, match="all zeros"):
        metrics_from_cm(ConfusionMatrix(np.zeros((3, 3), dtype=int)))


@given(st.integers(1, 6).flatmap(lambda k: st.lists(
    st.lists(st.integers(0, 30), min_size=k, max_size=k), min_size=k, max_size=k)))
def test_metrics_match_hand_tally_exactly(cm):
    if sum(map(sum, cm)) == 0:
        return
    report = metrics_from_cm(ConfusionMatrix(np.array(cm)))
    oracle = hand_tally(cm)
    for name, value in oracle.items():
        assert report.exact[name] == value, name
    assert report.exact["precision"] == report.exact["recall"] == report.exact["accuracy"]


def test_uniform_predictions_accuracy_near_chance():
    rng = np.random.default_rng(0)
    k, n = 5, 20_000
    m = metrics_from_cm(confusion_matrix(rng.integers(0, k, n), rng.integers(0, k, n), k))
    sigma = math.sqrt((1 / k) * (1 - 1 / k) / n)
    assert abs(m.accuracy - 1 / k) < 3 * sigma


def test_zero_support_row_flagged():
    normalized, empty = ConfusionMatrix(np.array([[2, 0], [0, 0]])).normalized()
    assert empty == [1] and normalized[1].tolist() == [0, 0]


def test_aggregate_folds():
    one = {"accuracy": 0.9}
    assert aggregate_folds([one]) == {"accuracy": (0.9, 0.0)}
    mean, sd = aggregate_folds([{"accuracy": 0.9}, {"accuracy": 1.0}])["accuracy"]
    assert mean == pytest.approx(0.95) and sd == pytest.approx(0.05)
    values = np.random.default_rng(1).random(7)
    mean, sd = aggregate_folds([{"f1": v} for v in values])["f1"]
    assert mean == pytest.approx(sum(values) / 7, abs=1e-15)
    assert sd == pytest.approx(math.sqrt(sum((v - sum(values) / 7) ** 2 for v in values) / 7), abs=1e-15)


# --- ROC ----------------------------------------------------------------------


def test_roc_trivial_cases():
    y = np.array([0, 0, 1, 1])
    separating = np.stack([1 - y, y], axis=1).astype(float)
    curve = roc_auc(separating, y)
    assert all(c.auc == 1.0 for c in curve.per_class.values())
    flat = roc_auc(np.full((4, 2), 0.5), y)
    assert all(c.auc == 0.5 for c in flat.per_class.values())


def test_roc_skips_class_without_positives():
    curve = roc_auc(np.random.default_rng(0).random((4, 3)), [0, 1, 0, 1])
    assert curve.skipped == [2] and set(curve.per_class) == {0, 1}


@settings(max_examples=60)
@given(st.integers(0, 10 ** 6))
def test_auc_matches_pair_counting(seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 3, 50)
    # coarse scores force ties
    scores = np.round(rng.random((50, 3)) * rng.integers(2, 20), 0)
    curve = roc_auc(scores, y)
    for c, roc in curve.per_class.items():
        assert abs(roc.auc - pair_counting_auc(scores[:, c], y == c)) < 1e-9


# --- model evaluation ---------------------------------------------------------


def tiny_model(k=5, seed=0):
    return build_nemanet(k, 32, width_divisor=16, block_layers=(1, 1, 1, 1), seed=seed)


def test_untrained_loss_near_ln5():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, (20, 3, 32, 32)).astype(np.float32)
    ev = evaluate_model(tiny_model(), x, np.arange(20) % 5)
    assert abs(ev.metrics.loss - math.log(5)) < 0.2


def test_predictions_invariant_to_logit_shift():
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 1, (6, 3, 32, 32)).astype(np.float32)
    logits = predict_logits(tiny_model(), x, 4)
    shifted = logits + 123.0
    assert (logits.argmax(axis=1) == shifted.argmax(axis=1)).all()


def test_predict_restores_training_mode():
    model = tiny_model()
    model.train()
    predict_logits(model, np.zeros((2, 3, 32, 32), dtype=np.float32))
    assert model.training


def test_empty_split_rejected():
    with pytest.raises(ValueError, match="empty"):
        evaluate_model(tiny_model(), np.zeros((0, 3, 32, 32), dtype=np.float32), np.zeros(0, dtype=int))


# --- SVG ----------------------------------------------------------------------


def _polyline_points(el):
    return [tuple(map(float, p.split(","))) for p in el.get("points").split()]


def test_training_curves_parse_back(tmp_path):
    epochs = list(range(1, 8))
    history = {
        "epoch": epochs,
        "train_loss": [2.0 / e for e in epochs],
        "val_loss": [2.2 / e for e in epochs],
        "train_acc": [e / 8 for e in epochs],
        "val_acc": [e / 9 for e in epochs],
    }
    path = tmp_path / "curves.svg"
    svg.training_curves(path, history)
    lines = {el.get("data-label"): _polyline_points(el) for el in ET.parse(path).iter(f"{SVG}polyline")}
    assert set(lines) == {"train_loss", "val_loss", "train_acc", "val_acc"}
    for label, pts in lines.items():
        assert len(pts) == len(epochs)
        xs, ys = zip(*pts)
        assert list(xs) == sorted(xs)
        # svg y grows downward: falling loss means rising y, rising accuracy means falling y
        if label.endswith("loss"):
            assert list(ys) == sorted(ys)
        else:
            assert list(ys) == sorted(ys, reverse=True)


def test_training_curves_reject_empty(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        svg.training_curves(tmp_path / "x.svg", {"epoch": [], "train_loss": [], "val_loss": [], "train_acc": [], "val_acc": []})


def test_roc_legend_matches_csv(tmp_path):
    rng = np.random.default_rng(3)
    y = rng.integers(0, 3, 40)
    curve = roc_auc(rng.random((40, 3)), y)
    names = ["a", "b", "c"]
    svg.roc_plot(tmp_path / "roc.svg", curve, names)
    write_roc_csv(tmp_path / "roc.csv", curve, names)
    legend = {}
    for el in ET.parse(tmp_path / "roc.svg").iter(f"{SVG}text"):
        m = re.fullmatch(r"(\w+) \(AUC = ([0-9.]+)\)", el.text or "")
        if m:
            legend[m.group(1)] = float(m.group(2))
    with open(tmp_path / "roc.csv") as fh:
        table = {row["class"]: float(row["auc"]) for row in csv.DictReader(fh)}
    assert legend.keys() == table.keys() == set(names)
    for name in names:
        assert abs(legend[name] - table[name]) < 1e-9


def test_confusion_heatmap_well_formed(tmp_path):
    normalized, _ = ConfusionMatrix(np.array([[3, 1], [0, 4]])).normalized()
    svg.confusion_heatmap(tmp_path / "cm.svg", normalized, ["x", "y"])
    cells = [el for el in ET.parse(tmp_path / "cm.svg").iter(f"{SVG}rect") if el.get("data-value")]
    assert [float(c.get("data-value")) for c in cells] == [0.75, 0.25, 0.0, 1.0]
