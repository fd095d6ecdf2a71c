import csv
import json
import re
import xml.etree.ElementTree as ET

import pytest

from nemakit.cli import main

SVG = "{http://www.w3.org/2000/svg}"
TINY = {"input_size": 32, "width_divisor": 16, "epochs": 2, "batch_size": 8, "clr_step_size": 3, "eval_batch_size": 16}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    assert main(["synth", "--out", str(root / "data"), "--per-class", "6", "--size", "32", "--seed", "4"]) == 0
    return root / "data"


@pytest.fixture(scope="module")
def bundle(tmp_path_factory, dataset):
    root = tmp_path_factory.mktemp("run")
    cfg = root / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    out = root / "bundle"
    assert main(["train", "--data", str(dataset), "--config", str(cfg), "--folds", "2", "--out", str(out)]) == 0
    return out


def test_synth_rerun_identical(dataset, capsys):
    assert main(["synth", "--out", str(dataset), "--per-class", "6", "--size", "32", "--seed", "4"]) == 0
    assert "identical checksum" in capsys.readouterr().out


def test_describe_densenet(capsys):
    assert main(["describe", "--model", "densenet121", "--classes", "1000"]) == 0
    assert re.search(r"total parameters\s+8,062,504", capsys.readouterr().out)


def test_describe_nemanet_shows_target_and_input_size_invariance(capsys, tmp_path):
    main(["describe", "--model", "nemanet", "--csv", str(tmp_path / "c.csv")])
    big = capsys.readouterr().out
    main(["describe", "--model", "nemanet", "--input-size", "64"])
    small = capsys.readouterr().out
    assert "17,918,565" in big
    pick = lambda s: re.search(r"total parameters\s+([\d,]+)", s).group(1)  # noqa: E731
    assert pick(big) == pick(small)
    assert (tmp_path / "c.csv").read_text().startswith("layer,total,trainable,non_trainable")


def test_describe_unknown_model():
    with pytest.raises(SystemExit):
        main(["describe", "--model", "resnet"])


def test_dump_config(capsys):
    assert main(["--dump-config", "synthetic"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["input_size"] == 64 and cfg["lr_peak"] == 1e-3


def test_train_missing_data_creates_nothing(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["train", "--data", str(tmp_path / "nope"), "--out", str(out)]) == 1
    assert "does not exist" in capsys.readouterr().err
    assert not out.exists()


def test_small_classes_fail_fold_planning(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "d"), "--per-class", "3", "--size", "32"]) == 0
    capsys.readouterr()
    assert main(["train", "--data", str(tmp_path / "d"), "--preset", "synthetic", "--out", str(tmp_path / "r")]) == 1
    assert re.search(r"class '.+' has 3 samples, fewer than k=5 folds", capsys.readouterr().err)


def test_train_refuses_non_empty_out(bundle, dataset, capsys):
    assert main(["train", "--data", str(dataset), "--out", str(bundle)]) == 1
    assert "not empty" in capsys.readouterr().err


def test_bundle_layout(bundle):
    for name in ("config.json", "manifest.json", "folds.json", "run.json", "summary.csv", "summary.json"):
        assert (bundle / name).is_file(), name
    for fold in (0, 1):
        d = bundle / f"fold_{fold}"
        for name in ("best.nema", "history.csv", "lr_trace.csv", "metrics.json", "metrics.csv", "confusion.csv",
                     "roc.csv", "confusion.svg", "roc.svg", "curves.svg", "best_epoch.json"):
            assert (d / name).is_file(), name
        for svg_file in d.glob("*.svg"):
            ET.parse(svg_file)


def test_eval_reproduces_recorded_accuracy(bundle, tmp_path, capsys):
    for fold in (0, 1):
        out = tmp_path / f"ev{fold}"
        assert main(["eval", "--checkpoint", str(bundle / f"fold_{fold}" / "best.nema"), "--out", str(out)]) == 0
        recorded = json.loads((bundle / f"fold_{fold}" / "best_epoch.json").read_text())["best_val_acc"]
        got = json.loads((out / "metrics.json").read_text())["metrics"]["accuracy"]
        assert abs(got - recorded) <= 1e-6


def test_eval_roc_legend_matches_csv(bundle, tmp_path):
    out = tmp_path / "ev"
    main(["eval", "--checkpoint", str(bundle / "fold_0" / "best.nema"), "--out", str(out)])
    legend = {}
    for el in ET.parse(out / "roc.svg").iter(f"{SVG}text"):
        m = re.fullmatch(r"(\S+) \(AUC = ([0-9.]+)\)", el.text or "")
        if m:
            legend[m.group(1)] = float(m.group(2))
    with open(out / "roc.csv") as fh:
        table = {row["class"]: float(row["auc"]) for row in csv.DictReader(fh)}
    assert legend and legend.keys() == table.keys()
    assert all(abs(legend[k] - table[k]) < 1e-9 for k in legend)


def test_eval_missing_checkpoint(tmp_path, capsys):
    assert main(["eval", "--checkpoint", str(tmp_path / "x.nema"), "--out", str(tmp_path / "o")]) == 1


def test_plot_one_file_per_fold(bundle, tmp_path, capsys):
    out = tmp_path / "plots"
    assert main(["plot", "--bundle", str(bundle), "--out", str(out)]) == 0
    files = sorted(p.name for p in out.glob("*.svg"))
    assert files == ["fold_0_curves.svg", "fold_1_curves.svg"]
    with open(bundle / "fold_0" / "history.csv") as fh:
        epochs = len(list(csv.DictReader(fh)))
    for line in ET.parse(out / files[0]).iter(f"{SVG}polyline"):
        assert len(line.get("points").split()) == epochs


def test_plot_empty_bundle(tmp_path, capsys):
    assert main(["plot", "--bundle", str(tmp_path)]) == 1


def test_gradcheck_ops_passes_and_negative_control_fails(capsys):
    assert main(["gradcheck", "--scope", "ops"]) == 0
    assert main(["gradcheck", "--scope", "ops", "--negative-control"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_seed_env_override(dataset, tmp_path, monkeypatch):
    monkeypatch.setenv("NEMAKIT_SEED", "77")
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps({**TINY, "epochs": 0}))
    out = tmp_path / "b"
    assert main(["train", "--data", str(dataset), "--config", str(cfg), "--folds", "2", "--out", str(out)]) == 0
    assert json.loads((out / "config.json").read_text())["seed"] == 77


def test_parallel_folds_match_serial(bundle, dataset, tmp_path):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    out = tmp_path / "par"
    assert main(["train", "--data", str(dataset), "--config", str(cfg), "--folds", "2", "--out", str(out),
                 "--parallel-folds"]) == 0
    for fold in (0, 1):
        for name in ("history.csv", "lr_trace.csv"):
            assert (out / f"fold_{fold}" / name).read_bytes() == (bundle / f"fold_{fold}" / name).read_bytes()
    assert (out / "summary.json").read_text() == (bundle / "summary.json").read_text()
