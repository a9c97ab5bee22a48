import json

import pytest

from robinhood.cli import run
from robinhood.pruning import GrowthTrace
from robinhood.trees import parse_decorated


def call(capsys, *argv):
    code = run(list(argv))
    return code, capsys.readouterr().out


def test_verify_uniform(capsys):
    code, out = call(capsys, "verify-uniform", "--n", "4")
    body = json.loads(out)
    assert code == 0 and body["pass"] and body["uniform_mass"] == "1/144"
    assert body["config"]["n"] == 4


def test_enumerate_count(capsys):
    assert call(capsys, "enumerate", "--n", "5", "--count-only") == (0, "2880\n")


def test_constants(capsys):
    code, out = call(capsys, "constants", "--c", "1.5")
    body = json.loads(out)
    assert code == 0 and abs(body["beta"] - 3 / 28) < 1e-15
    assert {"alpha_sup", "gamma_sup", "epsilon"} <= set(body)


def test_exact_queries(capsys):
    _, out = call(capsys, "degree-tail", "--n", "3", "--m", "2", "--exact")
    assert json.loads(out)["probability"] == "1/6"
    _, out = call(capsys, "degree-tail", "--n", "3", "--m", "2", "--vertex", "1", "--exact")
    assert json.loads(out)["probability"] == "1/2"
    code, out = call(capsys, "lambda", "--n", "3", "--m", "1", "--exact")
    assert code == 0 and json.loads(out)["lambda"] == "3/2"
    code, out = call(capsys, "characterize", "--n", "3", "--pushforward")
    assert code == 0 and json.loads(out)["pass"]


def test_seed_is_required(capsys):
    with pytest.raises(SystemExit) as info:
        run(["grow", "--n", "5"])
    assert info.value.code == 2


def test_usage_errors_exit_2(capsys):
    assert run(["verify-uniform", "--n", "6"]) == 2
    assert run(["coupling", "--n", "10", "--m", "12", "--trials", "5", "--seed", "1"]) == 2
    assert run(["newvertex", "--n", "10", "--trials", "0", "--seed", "1"]) == 2


def test_reports_are_reproducible(capsys, tmp_path):
    argv = ["coupling", "--n", "24", "--c", "1.3", "--trials", "2000", "--seed", "9"]
    code_a, a = call(capsys, *argv)
    code_b, b = call(capsys, *argv, "--threads", "1")
    body = json.loads(a)
    assert code_a == 0 and body["sure_events_hold"]
    assert json.loads(b)["counters"] == body["counters"]
    assert call(capsys, *argv) == (code_a, a)
    report = tmp_path / "out.json"
    assert run(argv + ["--report", str(report)]) == 0
    assert json.loads(report.read_text())["counters"] == body["counters"]


def test_grow_and_convert(capsys, tmp_path):
    _, out = call(capsys, "grow", "--n", "6", "--seed", "3", "--trace")
    trace = GrowthTrace.from_lines(out.splitlines())
    tree_file = tmp_path / "tree.txt"
    tree_file.write_text(trace.final.to_line() + "\n")
    _, chain = call(capsys, "convert", str(tree_file))
    chain_file = tmp_path / "chain.txt"
    chain_file.write_text(chain)
    _, back = call(capsys, "convert", str(chain_file))
    assert parse_decorated(back) == trace.final
    _, out = call(capsys, "grow", "--n", "5", "--seed", "3", "--trials", "3")
    assert len(out.splitlines()) == 3


def test_sample_kingman(capsys):
    _, out = call(capsys, "sample-kingman", "--n", "5", "--seed", "1")
    lines = out.splitlines()
    assert lines[0] == "5" and len(lines) == 5
    _, out = call(capsys, "sample-kingman", "--n", "5", "--seed", "1", "--tree")
    assert parse_decorated(out).n == 5


def test_stochastic_subcommands_run(capsys):
    code, out = call(capsys, "newvertex", "--n", "20", "--trials", "5000", "--seed", "1")
    assert json.loads(out)["config"]["seed"] == 1
    code, out = call(capsys, "dtv", "--n", "64", "128", "--c", "1.3", "--trials", "2000",
                     "--seed", "1", "--format", "csv")
    assert out.splitlines()[0] == "n,m,lambda_exact,estimate,stderr,reference,verdict"
    code, out = call(capsys, "maxdeg", "--n", "256", "--i", "1", "2", "--trials", "2000", "--seed", "1")
    assert len(json.loads(out)["reports"]) == 2
    code, out = call(capsys, "correlation", "--n", "128", "--m", "5", "--trials", "2000", "--seed", "1")
    assert "envelope" in json.loads(out)
    code, out = call(capsys, "normality", "--n", "128", "--c", "1.1", "--trials", "2000", "--seed", "1")
    assert code == 0 and "skewness" in json.loads(out)
