import json

import pytest

from treelocal.cli import main


def test_usage_error_exit_code(capsys):
    assert main(["no-such-kind"]) == 1
    assert main([]) == 1


def test_help_exits_zero():
    assert main(["--help"]) == 0


def test_bad_option_syntax():
    assert main(["walk", "--n", "2", "--t", "1.0", "--option", "nonsense"]) == 1


def test_walk_subcommand_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(
        [
            "walk", "--b", "2", "--n", "2", "--t", "1.0",
            "--replicates", "100", "--seed", "3", "--out", str(out),
        ]
    )
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["aborted"] == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["kind"] == "walk"
    first_line = (out / "fields.jsonl").read_text().splitlines()[0]
    assert json.loads(first_line)["_manifest"] == manifest["manifest_hash"]


def test_csv_output_carries_manifest_header(tmp_path):
    out = tmp_path / "tail"
    code = main(
        [
            "tail", "--b", "2", "--n", "5", "--t", "10.0",
            "--replicates", "5000", "--seed", "4", "--out", str(out),
            "--option", "y_grid=[0.0, 0.5, 1.0]",
        ]
    )
    assert code == 0
    lines = (out / "tail.csv").read_text().splitlines()
    manifest = json.loads((out / "manifest.json").read_text())
    assert lines[0] == f"# manifest={manifest['manifest_hash']}"
    assert lines[1] == "y,p,lo,hi"


def test_config_file_overrides_flags(tmp_path):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"n": 3, "replicates": 60}))
    out = tmp_path / "o"
    code = main(
        [
            "walk", "--n", "2", "--t", "1.0", "--replicates", "999",
            "--seed", "1", "--out", str(out), "--config", str(cfg_file),
        ]
    )
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["n"] == 3
    assert manifest["config"]["replicates"] == 60


def test_missing_config_file():
    assert main(["walk", "--config", "/does/not/exist.json"]) == 1


def test_experiment_failure_exit_code():
    # a cap of one step aborts every replicate: exit 2
    code = main(
        [
            "walk", "--n", "3", "--t", "5.0", "--replicates", "20",
            "--seed", "1", "--option", "excursion_cap=1",
        ]
    )
    assert code == 2


def test_negative_control_failure_is_exit_2(capsys):
    # the corrupted sampler *passing* the isomorphism battery is an
    # experiment failure; with duration 1.0 forced through control_duration
    # the negative control cannot fail, so the run exits 2
    code = main(
        [
            "isomorphism", "--n", "2", "--t", "2.0", "--replicates", "3000",
            "--seed", "23",
            "--option", "negative_control=true",
            "--option", "control_duration=1.0",
        ]
    )
    assert code == 2


def test_field_sample_dump_option(tmp_path):
    out = tmp_path / "dump"
    code = main(
        [
            "field-sample", "--n", "3", "--t", "1.0", "--replicates", "20",
            "--seed", "2", "--out", str(out), "--option", "dump_fields=true",
        ]
    )
    assert code == 0
    from treelocal.field import read_fields
    from treelocal.tree import TreeShape

    shape, t, seed, matrix = read_fields(out / "fields.bin")
    assert shape == TreeShape(2, 3)
    assert t == 1.0
    assert seed == 2
    assert matrix.shape == (20, shape.num_vertices)
    assert (matrix[:, 0] == 1.0).all()
