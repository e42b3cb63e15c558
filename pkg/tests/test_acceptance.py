"""Acceptance gate: every criterion at its stated tolerance, one pass/fail line each.

Two independent ``margin-phase accept --seed 0`` runs are launched as
subprocesses; criteria 1 to 13 are read from the first, and criterion 14
(determinism) compares the two runs' output files byte for byte.
"""
import json
import subprocess
import sys

import pytest

ACCEPT_IDS = list(range(1, 15))


@pytest.fixture(scope="module")
def accept_runs(tmp_path_factory, pytestconfig):
    dirs = [tmp_path_factory.mktemp(name) for name in ("accept_a", "accept_b")]
    procs = [
        subprocess.Popen(
            [sys.executable, "-m", "margin_phase.cli", "accept", "--seed", "0", "--out", str(d)],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
        )
        for d in dirs
    ]
    for p in procs:
        out, err = p.communicate(timeout=1800)
        assert p.returncode == 0, err.decode()
    files = ("accept.json", "accept.csv")
    identical = all((dirs[0] / f).read_bytes() == (dirs[1] / f).read_bytes() for f in files)
    crits = {c["id"]: c for c in json.loads((dirs[0] / "accept.json").read_text())["result"]}
    crits[14] = {
        "id": 14,
        "name": "determinism",
        "status": "PASS" if identical else "FAIL",
        "summary": "two runs byte-identical" if identical else "two runs differ",
    }
    lines = pytestconfig.stash.setdefault(ACCEPT_LINES, [])
    lines.extend(f"[{c['status']}] {c['id']:>2} {c['name']}: {c['summary']}" for _, c in sorted(crits.items()))
    return crits


ACCEPT_LINES = pytest.StashKey[list]()


@pytest.mark.parametrize("cid", ACCEPT_IDS)
def test_criterion(accept_runs, cid):
    c = accept_runs[cid]
    print(f"[{c['status']}] {cid:>2} {c['name']}: {c['summary']}")
    assert c["status"] == "PASS", c["summary"]
