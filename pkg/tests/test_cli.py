"""CLI behavior: subcommands, exit codes and output artifacts."""

import json

import numpy as np
import pytest

import mutualforest
from mutualforest.cli import DATA_ERROR, USAGE_ERROR, cli_main
from mutualforest.dataio import export_dataset_csv

from conftest import make_classification


@pytest.fixture
def csv_path(tmp_path):
    ds = make_classification(n=60, p=6, seed=5)
    path = tmp_path / "input.csv"
    export_dataset_csv(ds, path)
    return str(path)


def run_cli(*argv):
    return cli_main(list(argv))


def test_version(capsys):
    assert run_cli("version") == 0
    assert capsys.readouterr().out.strip() == mutualforest.__version__


def test_no_command_is_usage_error():
    assert run_cli() == USAGE_ERROR


def test_unknown_flag_is_usage_error(csv_path, tmp_path):
    assert (
        run_cli("analyze", "--input", csv_path, "--outcome-type", "classification",
                "--out", str(tmp_path / "o"), "--bogus")
        == USAGE_ERROR
    )


def test_missing_input_is_data_error(tmp_path):
    code = run_cli(
        "analyze",
        "--input", str(tmp_path / "absent.csv"),
        "--outcome", "outcome",
        "--outcome-type", "classification",
        "--out", str(tmp_path / "out"),
    )
    assert code == DATA_ERROR


def analyze_args(csv_path, out_dir, *extra):
    return [
        "analyze",
        "--input", csv_path,
        "--outcome", "outcome",
        "--outcome-type", "classification",
        "--ntree", "40",
        "--s", "2",
        "--seed", "7",
        "--out", str(out_dir),
        *extra,
    ]


def test_analyze_writes_reports(csv_path, tmp_path):
    out = tmp_path / "out"
    assert cli_main(analyze_args(csv_path, out, "--export-nulls")) == 0
    mfi = (out / "mfi.tsv").read_text().strip().split("\n")
    assert len(mfi) == 7  # header plus six features
    importance = json.loads((out / "importance.json").read_text())
    assert {row["feature"] for row in importance["features"]} == {
        f"X{i}" for i in range(1, 7)
    }
    selections = json.loads((out / "selections.json").read_text())
    assert "mir_selected" in selections
    assert (out / "mir_null.tsv").exists()
    assert (out / "mfi_null.tsv").exists()


def test_relations_subcommand(csv_path, tmp_path):
    out = tmp_path / "rel"
    code = run_cli(
        "relations",
        "--input", csv_path,
        "--outcome", "outcome",
        "--outcome-type", "classification",
        "--ntree", "30",
        "--s", "2",
        "--out", str(out),
    )
    assert code == 0
    assert (out / "mfi.tsv").exists()
    assert (out / "selections.json").exists()
    assert not (out / "importance.json").exists()


def test_analyze_outputs_independent_of_threads(csv_path, tmp_path):
    outs = []
    for threads in ("1", "3"):
        out = tmp_path / f"t{threads}"
        assert cli_main(analyze_args(csv_path, out, "--threads", threads)) == 0
        outs.append({f.name: f.read_bytes() for f in out.iterdir()})
    assert outs[0] == outs[1]


def test_simulate_null_a(tmp_path):
    out = tmp_path / "sim"
    code = run_cli(
        "simulate",
        "--scenario", "null-a",
        "--n", "40",
        "--replicates", "2",
        "--ntree", "10",
        "--seed", "3",
        "--threads", "1",
        "--out", str(out),
    )
    assert code == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["scenario"] == "null-a"
    assert metrics["replicates"] == 2
    raw = (out / "raw.tsv").read_text().strip().split("\n")
    assert raw[0].startswith("replicate\t")
    assert len(raw) > 10


def test_simulate_outputs_independent_of_threads(tmp_path):
    outs = []
    for threads in ("1", "2"):
        out = tmp_path / f"s{threads}"
        code = run_cli(
            "simulate",
            "--scenario", "null-b",
            "--n", "40",
            "--replicates", "2",
            "--ntree", "10",
            "--seed", "11",
            "--threads", threads,
            "--out", str(out),
        )
        assert code == 0
        outs.append({f.name: f.read_bytes() for f in out.iterdir()})
    assert outs[0] == outs[1]


def test_simulate_rejects_unknown_scenario(tmp_path):
    assert (
        run_cli("simulate", "--scenario", "weird", "--out", str(tmp_path / "x"))
        == USAGE_ERROR
    )
