import csv
import io
import json

import pytest

from ldpfreq import cli
from ldpfreq.audit import AuditResult
from ldpfreq.reports import read_reports


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_json(capsys):
    code, out, _ = run(["run", "--protocol", "grr", "--eps", "1", "--k", "5", "--n", "2000", "--seed", "3"], capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["config"]["seed"] == 3 and len(payload["est_freq"][0]) == 5


def test_run_csv_to_file(tmp_path, capsys):
    path = tmp_path / "out.csv"
    argv = ["run", "--task", "mdim", "--solution", "rsfd", "--protocol", "oue", "--fake-mode", "rnd",
            "--eps", "1", "--ks", "3,4", "--n", "1000", "--out", "csv", "--output", str(path)]
    code, out, _ = run(argv, capsys)
    assert code == 0 and out == ""
    rows = list(csv.reader(io.StringIO(path.read_text())))
    assert rows[0] == ["attr", "value", "true_freq", "est_freq", "mse"] and len(rows) == 1 + 3 + 4


def test_run_long_mdim_and_dump(tmp_path, capsys):
    dump = tmp_path / "reports.jsonl"
    argv = ["run", "--task", "long-mdim", "--solution", "smp", "--protocol", "dbitflippm", "--eps-perm", "2",
            "--d", "2", "--ks", "4,4", "--n", "500", "--collections", "2", "--dump-reports", str(dump)]
    code, out, _ = run(argv, capsys)
    assert code == 0
    with dump.open() as fh:
        assert len(list(read_reports(fh))) == 500


@pytest.mark.parametrize("argv", [
    ["run", "--task", "long", "--protocol", "l-grr", "--eps-perm", "1", "--eps-1", "2"],
    ["run", "--protocol", "grr"],
    ["run", "--protocol", "grr", "--eps", "1", "--dist", "zipf:abc"],
    ["run", "--task", "mdim", "--protocol", "grr", "--eps", "1", "--ks", "3,3"],
    ["audit", "--protocol", "grr"],
    ["audit"],
])
def test_invalid_config_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2 and err.startswith("error:")


def test_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["run", "--protocol", "bogus"])
    assert exc.value.code == 2


def test_audit_pass(capsys):
    code, out, _ = run(["audit", "--protocol", "l-osue", "--eps-perm", "2", "--eps-1", "1", "--k", "4"], capsys)
    assert code == 0
    assert out.count("PASS") == 2 and "2/2 audits passed" in out


def test_audit_lh_and_dbit(capsys):
    assert run(["audit", "--protocol", "olh", "--eps", "2", "--k", "5", "--seed", "7"], capsys)[0] == 0
    assert run(["audit", "--protocol", "dbitflippm", "--eps-perm", "1", "--k", "5", "--d", "3"], capsys)[0] == 0


def test_audit_infeasible_pair(capsys):
    code, out, err = run(["audit", "--protocol", "l-soue", "--eps-perm", "2", "--eps-1", "1.9"], capsys)
    assert code == 2 and "infeasible" in out and "no mechanism" in err


def test_audit_failure_exit_3(monkeypatch, capsys):
    bad = AuditResult("GRR", "k=3 eps=1", 1.0, 1.5, "eq", False)
    monkeypatch.setattr(cli, "audit_protocol", lambda *a, **k: [bad])
    code, out, _ = run(["audit", "--protocol", "grr", "--eps", "1"], capsys)
    assert code == 3 and "FAIL" in out


def test_audit_grid(capsys):
    code, out, _ = run(["audit", "--grid"], capsys)
    assert code == 0 and "FAIL" not in out
