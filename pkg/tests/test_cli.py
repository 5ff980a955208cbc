import csv
import json

import numpy as np
import pytest

from saliency_attacks.cli import main
from test_harness import _tiny_dataset, _tiny_model


@pytest.fixture()
def workbench(tmp_path):
    weights, wpath = _tiny_model(tmp_path)
    ds, labels = _tiny_dataset(tmp_path, weights)
    return tmp_path, ds, labels, wpath


def _suite_args(ds, labels, wpath, out, **extra):
    args = [
        "suite",
        "--dataset", str(ds),
        "--labels", str(labels),
        "--weights", str(wpath),
        "--attack", "saliency",
        "--budget", "100",
        "--k-int", "4",
        "--resize", "16",
        "--out", str(out),
    ]
    for k, v in extra.items():
        args += [k, v]
    return args


def test_suite_command_runs_green(workbench, capsys):
    tmp_path, ds, labels, wpath = workbench
    code = main(_suite_args(ds, labels, wpath, tmp_path / "out"))
    assert code == 0
    assert (tmp_path / "out" / "records.csv").exists()
    assert (tmp_path / "out" / "aggregates.csv").exists()
    rows = list(csv.DictReader(open(tmp_path / "out" / "records.csv")))
    assert len(rows) == 4


def test_suite_exit_zero_with_image_errors(workbench):
    tmp_path, ds, labels, wpath = workbench
    (ds / "junk.png").write_bytes(b"garbage")
    labels.write_text(labels.read_text() + "junk.png,0\n")
    code = main(_suite_args(ds, labels, wpath, tmp_path / "out_err"))
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "out_err" / "records.csv")))
    assert any(r["status"].startswith("error:") for r in rows)


def test_config_error_exit_nonzero(workbench, capsys):
    tmp_path, ds, labels, wpath = workbench
    code = main(_suite_args(ds, tmp_path / "missing.csv", wpath, tmp_path / "o2"))
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_attack_single_image(workbench, capsys):
    tmp_path, ds, labels, wpath = workbench
    code = main(
        [
            "attack",
            "--image", str(ds / "img000.png"),
            "--label", "0",
            "--weights", str(wpath),
            "--attack", "saliency",
            "--budget", "100",
            "--k-int", "4",
            "--resize", "16",
            "--out-dir", str(tmp_path / "single"),
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["image"] == "img000"
    assert (tmp_path / "single" / "img000_adv.png").exists()
    assert (tmp_path / "single" / "img000_adv.srt1").exists()


def test_convergence_and_compare_commands(workbench, capsys):
    tmp_path, ds, labels, wpath = workbench
    main(_suite_args(ds, labels, wpath, tmp_path / "a"))
    main(_suite_args(ds, labels, wpath, tmp_path / "b", **{"--seed": "5"}))
    code = main(
        [
            "convergence",
            "--records", str(tmp_path / "a" / "records.csv"),
            "--thresholds", "20,30,40",
            "--out", str(tmp_path / "curve.csv"),
        ]
    )
    assert code == 0 and (tmp_path / "curve.csv").exists()

    code = main(
        [
            "compare",
            "--records-a", str(tmp_path / "a" / "records.csv"),
            "--records-b", str(tmp_path / "b" / "records.csv"),
            "--out", str(tmp_path / "paired.csv"),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "fraction_b_better" in out
    assert (tmp_path / "paired.csv").exists()


def test_sweep_command(workbench):
    tmp_path, ds, labels, wpath = workbench
    code = main(
        [
            "sweep-kint",
            "--dataset", str(ds),
            "--labels", str(labels),
            "--weights", str(wpath),
            "--attack", "saliency",
            "--budget", "80",
            "--k-int", "4",
            "--resize", "16",
            "--k-list", "8,4",
            "--out", str(tmp_path / "sweep" / "sweep.csv"),
        ]
    )
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep" / "sweep.csv")))
    assert [int(r["k_int"]) for r in rows] == [8, 4]
