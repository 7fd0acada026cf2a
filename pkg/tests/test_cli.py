import json

import pytest

from weightzoo.cli import main

from cli_pipeline import run_pipeline


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    return root, run_pipeline(root)


def test_pipeline_outputs(pipeline):
    root, files = pipeline
    for name in ("train.csv", "train.csv.meta.json", "gbm.json", "gbm.cv.json", "eval_gbm.json",
                 "eval_gbm.scatter.csv", "transfer.json", "probe.json", "importance.json", "summary.csv"):
        assert name in files, name
    transfer = json.loads(files["transfer.json"])
    assert len(transfer["matrix"]) == 2 and all(len(row) == 2 for row in transfer["matrix"])
    report = json.loads(files["gbm.cv.json"])
    assert report["budget"] == 3 and len(report["trials"]) == 3
    assert json.loads(files["eval_gbm.json"])["n"] == 8


def test_no_absolute_paths_leak(pipeline):
    root, files = pipeline
    for name, data in files.items():
        if not name.endswith(".wzoo"):
            assert str(root).encode() not in data, name


def test_featurize_rerun_is_byte_identical(pipeline, tmp_path):
    root, files = pipeline
    out = tmp_path / "again.csv"
    assert main(["featurize", "--zoo", str(root / "zoo"), "--kind", "flat_all", "--out", str(out)]) == 0
    assert out.read_bytes() == files["flat.csv"]


def test_thread_count_does_not_change_results(pipeline, tmp_path):
    root, files = pipeline
    out = tmp_path / "flat.csv"
    assert main(["--threads", "2", "featurize", "--zoo", str(root / "zoo"), "--kind", "flat_all", "--out", str(out)]) == 0
    assert out.read_bytes() == files["flat.csv"]


def _error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return err[0]


def test_usage_errors_exit_2(capsys):
    assert main(["search", "--features", "x.csv"]) == 2
    assert _error_line(capsys).startswith("usage: ")
    assert main([]) == 2
    assert _error_line(capsys).startswith("usage: ")


def test_missing_file_is_io_error(capsys, tmp_path):
    assert main(["eval", "--model", str(tmp_path / "none.json"), "--features", "x.csv", "--out", "o.json"]) == 1
    assert _error_line(capsys).startswith("io: ")


def test_domain_errors_name_their_category(capsys, pipeline, tmp_path):
    root, _ = pipeline
    out = str(tmp_path / "x.json")
    assert main(["eval", "--model", str(root / "gbm.json"), "--features", str(root / "flat.csv"), "--out", out]) == 1
    assert _error_line(capsys).startswith("shape: ")
    assert main(["fit", "--features", str(root / "train.csv"), "--estimator", "gbm",
                 "--params", '{"learning_rate": 7}', "--out", out]) == 1
    assert _error_line(capsys).startswith("validation: ")


def test_threads_environment(monkeypatch, capsys, pipeline, tmp_path):
    root, _ = pipeline
    monkeypatch.setenv("WEIGHTZOO_THREADS", "zero")
    argv = ["featurize", "--zoo", str(root / "zoo"), "--kind", "stats_global", "--out", str(tmp_path / "g.csv")]
    assert main(argv) == 2
    assert "WEIGHTZOO_THREADS" in _error_line(capsys)
    monkeypatch.setenv("WEIGHTZOO_THREADS", "2")
    assert main(argv) == 0
