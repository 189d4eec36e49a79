import json

import pytest

from conftest import DATA
from bkcc import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_rev_point_mass(capsys):
    code, out, _ = run(capsys, "rev", "--lambda", "0", "--r", "1", "--m", "10", "--n", "10", "--k", "5")
    assert code == 0
    assert json.loads(out)["rev_vcg"] == pytest.approx(10.0, abs=1e-12)


def test_rev_curve_csv(capsys):
    code, out, _ = run(capsys, "rev", "--curve", str(DATA / "example_c1_f1.csv"),
                       "--m", "2", "--n", "3", "--k", "1", "--format", "csv")
    assert code == 0
    header, row = out.strip().splitlines()
    rec = dict(zip(header.split(","), row.split(",")))
    assert float(rec["rev_vcg"]) == pytest.approx(2.27734375, abs=1e-8)
    assert float(rec["rev_opt"]) == pytest.approx(2.234375, abs=1e-8)


def test_rev_example11_with_supply_and_mc(capsys):
    code, out, _ = run(capsys, "rev", "--example11", "--n", "3", "--k", "2", "--s", "2",
                       "--mc-trials", "20000")
    rec = json.loads(out)
    assert code == 0
    assert rec["rev_opt"] == pytest.approx(8 / 3, abs=1e-9) and rec["rev_vcg"] < 2.5
    assert "rev_sl_vcg" in rec and rec["mc_trials"] == 20000


def test_rev_seventeen_digits(capsys):
    _, out, _ = run(capsys, "rev", "--lambda", "0", "--r", "2", "--m", "2", "--n", "3", "--format", "csv")
    value = out.strip().splitlines()[1].split(",")[3]
    assert len(value.replace(".", "").lstrip("0")) == 17


@pytest.mark.parametrize("argv", [
    ["rev", "--n", "3"],
    ["rev", "--lambda", "0", "--r", "5", "--n", "3"],
    ["rev", "--lambda", "0", "--r", "2", "--m", "4", "--n", "3"],
    ["rev", "--curve", "/nonexistent.csv", "--n", "3"],
    ["cc", "--lambda", "0", "--n", "3", "--gamma", "1.5"],
    ["asymptotic", "--lambda", "0", "--alpha", "1"],
    ["asymptotic", "--lambda", "0", "--gamma", "1", "--sweep", "alpha", "--from", "0.5", "--to", "0.3",
     "--step", "0.1"],
    ["table", "--n-max", "0"],
])
def test_usage_errors(capsys, argv):
    assert run(capsys, *argv)[0] == cli.EXIT_USAGE


def test_argparse_errors_exit_two():
    with pytest.raises(SystemExit) as info:
        cli.main(["cc", "--lambda", "0"])
    assert info.value.code == 2


def test_quadrature_failure_exit_code(capsys):
    code, _, err = run(capsys, "rev", "--lambda", "0", "--r", "2", "--n", "40", "--k", "3",
                       "--rel-tol", "1e-300", "--abs-tol", "1e-300", "--max-depth", "10")
    assert code == cli.EXIT_QUADRATURE and "converge" in err


@pytest.mark.parametrize("m,n,k", [(10, 10, 5), (2, 2, 2)])
def test_cc(capsys, m, n, k):
    code, out, _ = run(capsys, "cc", "--lambda", "0", "--m", str(m), "--n", str(n), "--gamma", "1")
    rec = json.loads(out)
    assert code == 0 and rec["k"] == k and rec["certified"]
    assert {"worst_r", "margin", "certified"} <= rec.keys()


def test_cc_sl(capsys):
    code, out, _ = run(capsys, "cc", "--lambda", "0", "--m", "10", "--n", "10", "--gamma", "1", "--sl")
    rec = json.loads(out)
    assert code == 0 and rec["k"] <= 5 and rec["supply"] == 10


def test_cc_ceiling_and_uncertified(capsys, monkeypatch):
    from bkcc import cc

    def raise_ceiling(q):
        raise cc.CCCeilingError(q, cc.GapReport("fail", -1.0, 2.0, 1))

    monkeypatch.setattr(cli, "cc_exact", raise_ceiling)
    assert run(capsys, "cc", "--lambda", "0", "--n", "3")[0] == cli.EXIT_CEILING
    monkeypatch.setattr(cli, "cc_exact", lambda q: cc.CCResult(2, 1.5, 0.1, False))
    code, out, _ = run(capsys, "cc", "--lambda", "0", "--n", "3")
    assert code == cli.EXIT_UNCERTIFIED and json.loads(out)["certified"] is False


def test_table_stdout(capsys):
    code, out, _ = run(capsys, "table", "--n-max", "3")
    assert code == 0 and out == "n,t_n\n1,1\n2,2\n3,2\n"
    assert run(capsys, "table", "--n-max", "1")[1] == "n,t_n\n1,1\n"


def test_table_file_and_threads(tmp_path, capsys, monkeypatch):
    out = tmp_path / "t.csv"
    monkeypatch.setenv("CC_THREADS", "2")
    assert run(capsys, "table", "--n-max", "50", "-o", str(out))[0] == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,t_n" and lines[-1] == "50,23" and len(lines) == 51


def test_table_failure_leaves_no_file(tmp_path, capsys, monkeypatch):
    out = tmp_path / "t.csv"
    calls = []

    def fake_row(n):
        calls.append(n)
        return n, 1, n < 3

    monkeypatch.setattr(cli, "_table_row", fake_row)
    assert run(capsys, "table", "--n-max", "4", "-o", str(out))[0] == cli.EXIT_UNCERTIFIED
    assert not out.exists() and list(tmp_path.iterdir()) == []


def test_table_warns_above_documented_range(capsys, monkeypatch):
    monkeypatch.setattr(cli, "_table_row", lambda n: (n, 0, True))
    with pytest.warns(RuntimeWarning):
        run(capsys, "table", "--n-max", "600")


def test_asymptotic(capsys):
    _, out, _ = run(capsys, "asymptotic", "--lambda", "0", "--alpha", "1", "--gamma", "0.9999")
    assert json.loads(out)["cc_infty"] == pytest.approx(0.4447, abs=5e-4)
    _, out, _ = run(capsys, "asymptotic", "--lambda", "1", "--alpha", "1", "--gamma", "0.8", "--sl")
    assert json.loads(out)["cc_infty"] == pytest.approx(0.6, abs=1e-12)
    _, out, _ = run(capsys, "asymptotic", "--lambda", "0", "--alpha", "0.2", "--gamma", "0.99")
    assert json.loads(out)["cc_infty"] == 0


def test_asymptotic_sweep(capsys):
    code, out, _ = run(capsys, "asymptotic", "--lambda", "0", "--gamma", "1", "--sweep", "alpha",
                       "--from", "0.3", "--to", "1", "--step", "0.1")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "x,cc_infty" and len(lines) == 9
    assert float(lines[-1].split(",")[1]) == pytest.approx(0.44466786, abs=1e-8)


def test_output_is_deterministic_across_threads(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    base = ["rev", "--lambda", "0.5", "--r", "2", "--m", "3", "--n", "5", "--k", "1",
            "--mc-trials", "50000", "--seed", "9"]
    run(capsys, *base, "--threads", "1", "-o", str(a))
    run(capsys, *base, "--threads", "3", "-o", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_bad_thread_env(capsys, monkeypatch):
    monkeypatch.setenv("CC_THREADS", "many")
    assert run(capsys, "table", "--n-max", "1")[0] == cli.EXIT_USAGE


def test_verify_json_schema(capsys, monkeypatch):
    from bkcc import verify

    fake = [verify.CriterionResult("x", "pass", 1, 1, 0), verify.CriterionResult("y", "fail", 0, 1, 0)]

    def suite(results):
        def run_suite(name, workers=1, only=None, echo=None, seed=None):
            for r in results:
                echo(r.line())
            return results
        return run_suite

    monkeypatch.setattr(verify, "run_suite", suite(fake))
    code, out, err = run(capsys, "verify", "--suite", "fast", "--format", "json")
    report = json.loads(out)
    assert code == cli.EXIT_VERIFY and report["passed"] is False
    for rec in report["criteria"]:
        assert set(rec) == {"criterion", "status", "observed", "expected", "tolerance"}
    assert "[FAIL] y" in err
    monkeypatch.setattr(verify, "run_suite", suite(fake[:1]))
    code, out, _ = run(capsys, "verify")
    assert code == 0 and "[PASS] x" in out


def test_json_float_formatting():
    assert cli.to_json({"a": 0.1, "b": [1, None, True], "c": float("nan")}) == \
        '{"a": 0.10000000000000001, "b": [1, null, true], "c": null}'
