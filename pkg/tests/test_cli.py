import csv
import io
import json
import subprocess
import sys

import pytest

from margin_phase import SCHEMA, __version__
from margin_phase.cli import main
from margin_phase.experiments import CSV_FIELDS

BLOCK = ["--n", "10", "--delta", "0.5", "--B", "3", "--C", "1"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def error_code(err: str) -> str:
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["schema"] == SCHEMA
    return payload["error"]["code"]


@pytest.fixture
def margins_file(tmp_path):
    def write(rows, cols):
        p = tmp_path / f"m{len(list(tmp_path.glob('m*.json')))}.json"
        p.write_text(json.dumps({"rows": rows, "cols": cols}))
        return str(p)

    return write


# --- documented examples -----------------------------------------------------


def test_typical_block_example(capsys):
    code, out, _ = run(capsys, "typical", "--n", "100", "--delta", "0.7", "--B", "2", "--C", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == SCHEMA and doc["version"] == __version__
    assert doc["result"]["limits"]["TL"] == pytest.approx(8.0)
    z = [json.loads(run(capsys, "typical", "--n", str(n), "--delta", "0.7", "--B", "2", "--C", "1")[1])
         ["result"]["block"]["z11"] for n in (10**2, 10**6, 10**12)]
    assert z[0] < z[1] < z[2] < 8
    assert z[2] == pytest.approx(8.0, rel=0.01)


def test_count_example(capsys, margins_file):
    code, out, _ = run(capsys, "count", "--margins-file", margins_file([3, 3, 3], [3, 3, 3]))
    assert code == 0
    assert json.loads(out)["result"]["exact"] == "55"


def test_sample_is_byte_identical():
    cmd = [sys.executable, "-m", "margin_phase.cli", "sample", "--method", "mcmc", *BLOCK, "--count", "5", "--seed", "7"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b
    assert len(a.decode().splitlines()) == 6


def test_sample_json_lines_embed_config(capsys):
    code, out, _ = run(capsys, "sample", *BLOCK, "--count", "3", "--seed", "1")
    assert code == 0
    head, *tables = [json.loads(line) for line in out.splitlines()]
    assert head["config"]["seed"] == 1 and head["sampler"]["method"] == "mcmc"
    assert [t["index"] for t in tables] == [0, 1, 2]
    assert all(sum(t["table"][0]) == 30 for t in tables)  # heavy row sum floor(B C n)


def test_typical_from_file_csv(capsys, margins_file):
    code, out, _ = run(capsys, "typical", "--format", "csv", "--margins-file", margins_file([2, 1], [1, 2]))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [(r["i"], r["j"]) for r in rows] == [("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")]


# --- CSV headers -------------------------------------------------------------


def test_sample_csv_header(capsys, margins_file):
    code, out, _ = run(capsys, "sample", "--format", "csv", "--margins-file", margins_file([1, 1], [1, 1]),
                       "--count", "2", "--seed", "3", "--method", "exact")
    assert code == 0
    header = out.splitlines()[0].split(",")
    assert header == ["seed", "method", "index", "x_0_0", "x_0_1", "x_1_0", "x_1_1"]


def test_entrylaw_csv_header(capsys):
    code, out, _ = run(capsys, "entrylaw", *BLOCK, "--trials", "50", "--seed", "2", "--format", "csv")
    assert code == 0
    assert tuple(out.splitlines()[0].split(",")) == CSV_FIELDS


def test_out_file_and_hint(capsys, tmp_path):
    target = tmp_path / "sweep.json"
    code, out, err = run(capsys, "sweep", "--n", "10", "--delta", "0.75", "--C", "1", "--B-grid", "2,3.5",
                         "--trials", "30", "--seed", "4", "--out", str(target), "--gnuplot-hint")
    assert code == 0 and out == ""
    assert "plot" in err
    doc = json.loads(target.read_text())
    assert doc["command"] == "sweep" and len(doc["result"]["rows"]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["slln", "--delta", "0.75", "--C", "1", "--B-grid", "2", "--n-grid", "10", "--trials", "5", "--seed", "1"],
        ["clt", *BLOCK, "--trials", "20", "--seed", "1"],
        ["indep", *BLOCK, "--trials", "50", "--null-reps", "2", "--seed", "1"],
        ["moments", *BLOCK, "--alpha", "0.5", "--trials", "50", "--seed", "1"],
        ["entrylaw", *BLOCK, "--trials", "20", "--seed", "1", "--threads", "2", "--chains", "2"],
    ],
)
def test_experiment_subcommands_run(capsys, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    doc = json.loads(out)
    assert doc["command"] == argv[0] and doc["config"]["seed"] == 1


# --- exit codes --------------------------------------------------------------


@pytest.mark.parametrize(
    "argv",
    [
        ["typical", "--bogus"],
        ["frobnicate"],
        ["sample", *BLOCK, "--count", "2"],  # --seed missing
        ["typical", "--n", "10", "--delta", "0.5"],  # block incomplete
    ],
)
def test_usage_errors_exit_two(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == 2
    assert error_code(capsys.readouterr().err) == "usage"


def test_domain_errors_exit_one(capsys, margins_file, monkeypatch, tmp_path):
    cases = [
        (["count", "--margins-file", str(tmp_path / "absent.json")], "file_not_found"),
        (["count", "--margins-file", margins_file([2, 1], [1, 1])], "infeasible_margins"),
        (["typical", "--n", "0", "--delta", "0.5", "--B", "2", "--C", "1"], "invalid_spec"),
        (["sweep", "--n", "10", "--delta", "0.75", "--C", "1", "--B-grid", "2.4", "--trials", "5", "--seed", "1"],
         "critical_window"),
        (["sample", "--margins-file", margins_file([5, 5, 5], [5, 5, 5]), "--method", "rejection",
          "--max-tries", "10", "--seed", "1"], "sampler_exhausted"),
    ]
    for argv, expected in cases:
        code, _, err = run(capsys, *argv)
        assert code == 1, argv
        assert error_code(err) == expected
    big = margins_file([4, 4, 4, 4], [4, 4, 4, 4])
    monkeypatch.setenv("MARGIN_PHASE_BUDGET", "5")
    code, _, err = run(capsys, "sample", "--margins-file", big, "--method", "exact", "--seed", "1")
    assert code == 1 and error_code(err) == "budget_exceeded"


def test_count_over_budget_keeps_the_bound(capsys, margins_file, monkeypatch):
    monkeypatch.setenv("MARGIN_PHASE_BUDGET", "5")
    code, out, _ = run(capsys, "count", "--margins-file", margins_file([4, 4, 4, 4], [4, 4, 4, 4]))
    result = json.loads(out)["result"]
    assert code == 0
    assert "exact" not in result or result["exact"] is None
    assert result["log_upper"] > 0


def test_bad_margins_file(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    code, _, err = run(capsys, "count", "--margins-file", str(p))
    assert code == 1 and error_code(err) == "bad_margins_file"
