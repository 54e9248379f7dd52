import json
import math
import subprocess
import sys

import pytest

from probgt import __version__
from probgt.cli import parse_and_dispatch


def run(argv, capsys):
    code = parse_and_dispatch(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def echoed(err):
    return json.loads(err.splitlines()[0])


def test_params_reference_instance(capsys):
    code, out, err = run(["params", "--n", "1024", "--L", "8", "--alpha", "0.5", "--beta", "1"], capsys)
    assert code == 0
    values = dict(line.split(",") for line in out.strip().splitlines()[1:])
    assert float(values["q"]) == pytest.approx(0.01875)
    assert values["m"] == "54" and values["Z"] == "1849"
    assert float(values["epsilon"]) == pytest.approx(0.075)
    assert values["M"] == str(54 * 1849)
    assert float(values["test_bound"]) == pytest.approx(450 * 2 * 8 * math.log(1024) / 0.5)
    assert echoed(err)["subcommand"] == "params"


@pytest.mark.parametrize("argv", [
    ["params", "--n", "100", "--L", "2", "--alpha", "1.5"],
    ["params", "--n", "100", "--L", "200", "--alpha", "0.5"],
    ["params", "--n", "100", "--L", "2"],
    ["grouptest", "--n", "100", "--L", "2", "--alpha", "0.5", "--bogus"],
    ["pipeline", "--n", "100", "--L", "2", "--alpha", "0.5", "--field-prime", "91"],
    ["pipeline", "--n", "100", "--L", "2", "--alpha", "0.5"],  # default M exceeds n
    ["sweep", "--n", "100", "--L", "2", "--alpha", "0.5", "--axis", "Z"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        parse_and_dispatch(argv)
    assert exc.value.code == 2


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 1024, "L": 8, "alpha": 0.25, "beta": 1}))
    code, out, err = run(["params", "--config", str(cfg), "--alpha", "0.5"], capsys)
    assert code == 0
    assert echoed(err)["alpha"] == 0.5
    assert "Z,1849" in out


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 100, "L": 2, "alpha": 0.5, "colour": "red"}))
    with pytest.raises(SystemExit) as exc:
        parse_and_dispatch(["params", "--config", str(cfg)])
    assert exc.value.code == 2


def test_echoed_config_replays(tmp_path, capsys):
    argv = ["grouptest", "--n", "80", "--L", "2", "--alpha", "0.7", "--m", "14", "--Z", "30",
            "--trials", "5", "--seed", "3"]
    code, first, err = run(argv, capsys)
    assert code == 0
    cfg = tmp_path / "replay.json"
    cfg.write_text(err.splitlines()[0])
    code, second, _ = run(["grouptest", "--config", str(cfg)], capsys)
    assert first == second


def test_grouptest_csv_file(tmp_path, capsys):
    path = tmp_path / "g.csv"
    code, out, _ = run(["grouptest", "--n", "80", "--L", "2", "--alpha", "1", "--m", "14", "--Z", "200",
                        "--trials", "4", "--csv", str(path), "--assert"], capsys)
    assert code == 0 and out == ""
    lines = path.read_text().splitlines()
    assert lines[0] == "trial,n,L,alpha,m,Z,M,d,false_alarms,misses,exact_recovery"
    assert len(lines) == 5


def test_grouptest_assert_fails_when_errors(capsys):
    code, _, _ = run(["grouptest", "--n", "80", "--L", "2", "--alpha", "0.3", "--m", "2", "--Z", "2",
                      "--trials", "10", "--assert"], capsys)
    assert code == 1


def test_analysis_table_and_bounds(capsys):
    code, out, _ = run(["analysis", "--n", "200", "--L", "10", "--alpha", "0.3", "--m", "50", "--Z", "200"], capsys)
    assert code == 0
    rows = dict(line.split(",") for line in out.strip().splitlines()[1:])
    assert float(rows["d"]) == pytest.approx(2 * float(rows["mu_f"]))
    code, out, err = run(["analysis", "--check-bounds"], capsys)
    assert code == 0
    assert len(out.strip().splitlines()) == 161
    assert "violations: 0/160" in err


def test_pipeline_and_dump(tmp_path, capsys):
    code, out, _ = run(["pipeline", "--n", "150", "--L", "2", "--alpha", "0.6", "--m", "10", "--Z", "5",
                        "--trials", "2", "--c", "2", "--field-prime", "65537",
                        "--dump-shares", str(tmp_path)], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("trial,seed,n,L,alpha")
    assert len(lines) == 3
    assert (tmp_path / "trial-0001" / "shares.bin").read_bytes()[:4] == b"PGTM"


def test_sweep_stdout(capsys):
    code, out, _ = run(["sweep", "--n", "80", "--L", "2", "--alpha", "0.7", "--m", "14", "--axis", "Z",
                        "--values", "10,40", "--trials", "5"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("axis,point,trials,errors,error_rate,wilson_ci_low")
    assert [l.split(",")[1] for l in lines[1:]] == ["10", "40"]


def test_module_entry_point_and_version():
    res = subprocess.run([sys.executable, "-m", "probgt", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
