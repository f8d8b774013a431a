import math

import pytest

from ringtrap.cli import parse_grid, run
from ringtrap.errors import InvalidInputError
from ringtrap.io import load_manifest, read_results


def _eta(out, state):
    for line in out.splitlines():
        if line.startswith(state + ","):
            return float(line.split(",")[1])
    raise AssertionError(out)


def test_parse_grid():
    assert parse_grid("0,10,inf") == [0.0, 10.0, math.inf]
    assert parse_grid("0:100:5") == [0.0, 25.0, 50.0, 75.0, 100.0]
    with pytest.raises(InvalidInputError):
        parse_grid("1:2")


def test_unknown_flag_exits_1(capsys):
    assert run(["simulate", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def test_missing_subcommand_exits_1():
    assert run([]) == 1


def test_bad_state_exits_1():
    assert run(["simulate", "--state", "99+"]) == 1


def test_bad_config_exits_1(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("schema: 2\n")
    assert run(["spectrum", "--config", str(p)]) == 1


def test_simulate_full_correlation_is_coherent_limit(capsys):
    assert run(["simulate", "--rb", "inf", "--state", "8-"]) == 0
    corr = _eta(capsys.readouterr().out, "8-")
    assert run(["simulate", "--er", "0", "--state", "8-"]) == 0
    coh = _eta(capsys.readouterr().out, "8-")
    assert abs(corr - coh) < 1e-9


def test_sweep_writes_csv_and_manifest(tmp_path, capsys):
    out = tmp_path / "r"
    args = ["sweep", "corrlen", "--er", "100", "--grid", "0,40,inf", "--state", "8+",
            "--state", "8-", "--out", str(out)]
    assert run(args) == 0
    man = load_manifest(out)
    assert man.verify() and man.kind == "corrlen_sweep"
    assert man.config["bath"]["reorg_energy"] == 100.0
    rows = read_results(out / "corrlen_sweep_8p.csv")
    assert [r["param"] for r in rows] == [0.0, 40.0, math.inf]
    first = (out / "corrlen_sweep_8m.csv").read_bytes()
    assert run(args + ["--threads", "2"]) == 0
    assert (out / "corrlen_sweep_8m.csv").read_bytes() == first


def test_unwritable_output_exits_2(tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    assert run(["sweep", "corrlen", "--grid", "0", "--state", "8+",
                "--out", str(blocker / "x")]) == 2


def test_spectrum(capsys):
    assert run(["spectrum"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("index,energy_cm") and len(lines) == 35


def test_validate(capsys):
    assert run(["validate"]) == 0
    assert "11/11 checks passed" in capsys.readouterr().out
