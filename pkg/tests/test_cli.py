import json

import pytest

from evmlime import classify
from evmlime.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from evmlime.evaluation import METRIC_NAMES

MAL_HEX = "0x6080604052" + "f4" * 3 + "55" * 4 + "03" * 5 + "00"


def _run(tmp_path, toy_contracts, name="run", *extra):
    bdir, manifest = toy_contracts
    out = tmp_path / name
    code = main(["run", "--bytecode-dir", str(bdir), "--manifest", str(manifest), "--out-dir", str(out),
                 "--seed", "11", "--perturbations", "600", *extra])
    return code, out


def test_run_toy_fixture(tmp_path, toy_contracts):
    code, out = _run(tmp_path, toy_contracts, "run", "--algo", "all")
    assert code == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["metrics"]) == set(classify.ALGORITHMS)
    for metrics in summary["metrics"].values():
        assert set(METRIC_NAMES) <= set(metrics)
    assert summary["class_counts"]["train"] == {"0": 9, "1": 7}
    assert summary["class_counts"]["train_balanced"] == {"0": 9, "1": 9}
    for name in ("features.csv", "binning.json", "ranking.csv", "metrics.csv", "comparison.csv"):
        assert (out / name).is_file()
    assert list((out / "explanations").glob("*.svg"))


def test_run_is_deterministic(tmp_path, toy_contracts):
    _, a = _run(tmp_path, toy_contracts, "same")
    first = (a / "summary.json").read_bytes()
    _, b = _run(tmp_path, toy_contracts, "same")
    assert (b / "summary.json").read_bytes() == first


def test_run_config_file_and_override(tmp_path, toy_contracts):
    bdir, manifest = toy_contracts
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bytecode_dir": str(bdir), "manifest": str(manifest), "out_dir": str(tmp_path / "c"),
                               "algorithms": ["nb"], "lime_perturbations": 300, "top_m": 5}))
    assert main(["run", "--config", str(cfg), "--top-m", "3"]) == EXIT_OK
    summary = json.loads((tmp_path / "c" / "summary.json").read_text())
    assert len(summary["selected_features"]) == 3 and list(summary["metrics"]) == ["nb"]


def test_bin_first_order(tmp_path, toy_contracts):
    code, out = _run(tmp_path, toy_contracts, "binfirst", "--order", "bin-first")
    assert code == EXIT_OK
    assert json.loads((out / "summary.json").read_text())["config"]["order"] == "bin-first"


def test_missing_input_names_stage(tmp_path, capsys):
    code = main(["run", "--features", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path / "o")])
    assert code == EXIT_DATA
    assert "stage 'featurize'" in capsys.readouterr().err


def test_usage_errors(capsys):
    assert main(["bogus"]) == EXIT_USAGE
    assert main(["train", "--algo", "svm", "--in", "x", "--model-out", "y"]) == EXIT_USAGE


def test_stages_separately_match_run(tmp_path, toy_contracts):
    bdir, manifest = toy_contracts
    code, ref = _run(tmp_path, toy_contracts, "ref", "--algo", "dt")
    assert code == EXIT_OK
    s = tmp_path / "stages"
    s.mkdir()
    steps = [
        ["featurize", "--bytecode-dir", str(bdir), "--manifest", str(manifest), "--out", str(s / "features.csv")],
        ["split", "--in", str(s / "features.csv"), "--train-out", str(s / "train.csv"),
         "--test-out", str(s / "test.csv"), "--seed", "11"],
        ["smote", "--k", "5", "--seed", "11", "--in", str(s / "train.csv"), "--out", str(s / "balanced.csv")],
        ["bin", "--in", str(s / "balanced.csv"), "--model-out", str(s / "binning.json"),
         "--out", str(s / "train_binary.csv")],
        ["bin", "--model", str(s / "binning.json"), "--in", str(s / "test.csv"), "--out", str(s / "test_binary.csv")],
        ["rank", "--in", str(s / "train_binary.csv"), "--seed", "11", "--out", str(s / "ranking.csv")],
        ["train", "--algo", "dt", "--seed", "11", "--in", str(s / "train_binary.csv"),
         "--ranking", str(s / "ranking.csv"), "--model-out", str(s / "model_dt.json")],
    ]
    for argv in steps:
        assert main(argv) == EXIT_OK, argv
    for name in ("features.csv", "train.csv", "test.csv", "balanced.csv", "binning.json", "train_binary.csv",
                 "test_binary.csv", "ranking.csv", "model_dt.json"):
        assert (s / name).read_bytes() == (ref / name).read_bytes(), name
    assert main(["eval", "--model", str(s / "model_dt.json"), "--in", str(s / "test_binary.csv"),
                 "--out", str(s / "metrics.csv"), "--compare", str(s / "comparison.csv")]) == EXIT_OK
    assert (s / "metrics.csv").read_bytes() == (ref / "metrics.csv").read_bytes()
    assert (s / "comparison.csv").read_text().splitlines()[2] == "Forta,0.59,N/A,0.88,N/A,N/A"


def test_scan(tmp_path, toy_contracts, capsys):
    _, out = _run(tmp_path, toy_contracts, "scan", "--algo", "dt")
    base = ["scan", "--model", str(out / "model_dt.json"), "--binning", str(out / "binning.json"),
            "--perturbations", "300"]
    assert main(base + ["0x00"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "verdict: Malicious" in text or "verdict: Legitimate" in text
    assert "Supported Class Label" in text
    assert main(base + [MAL_HEX + "01", "--out-dir", str(tmp_path / "scan_out")]) == EXIT_OK
    assert "verdict: Malicious" in capsys.readouterr().out
    assert (tmp_path / "scan_out" / "contract.json").is_file()
    assert main(base + ["0x6_01"]) == EXIT_DATA


def test_disasm_and_explain(tmp_path, toy_contracts, capsys):
    assert main(["disasm", "0x6001600201"]) == EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out == ["0x0000 PUSH1 PUSH", "0x0002 PUSH1 PUSH", "0x0004 ADD ADD"]
    assert main(["disasm", "--counts", "0x6001600201"]) == EXIT_OK
    assert sorted(capsys.readouterr().out.splitlines()) == ["ADD,1", "PUSH,2", "UNKNOWN,0"]
    _, run = _run(tmp_path, toy_contracts, "exp")
    assert main(["explain", "--model", str(run / "model_lr.json"), "--in", str(run / "test_binary.csv"),
                 "--perturbations", "300", "--out-dir", str(tmp_path / "e")]) == EXIT_OK
    assert "verdict" in capsys.readouterr().out
    assert list((tmp_path / "e").glob("*.svg"))


def test_featurize_hex_list(tmp_path):
    lst = tmp_path / "l.txt"
    lst.write_text("0x00\n0x6001\n")
    assert main(["featurize", "--hex-list", str(lst), "--label", "1", "--out", str(tmp_path / "f.csv")]) == EXIT_OK
    assert main(["featurize", "--hex-list", str(lst), "--out", str(tmp_path / "f.csv")]) == EXIT_USAGE
