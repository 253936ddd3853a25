import os
import subprocess
import sys
from pathlib import Path

import pytest

from llfp.cli import EXIT_CHECK, EXIT_OK, EXIT_PARSE, EXIT_PENDING, _worse, main
from llfp.corpus import NAMES, corpus_path

ORACLES = Path(__file__).parent / "oracles"

TOP_UNLOCK = r"""
pred Val.
term : Type. nat : Type. O : nat. free : nat -> term. app : term -> term -> term.
lam : (term -> term) -> term.
v : !n:term. Lock[Val,n,term](term).
#check |- unlock[Val,free O,term](v (free O)) : term.
"""

FALSE_UNLOCK = TOP_UNLOCK.replace("free O,term](v (free O))", "app (free O) (free O),term](v (app (free O) (free O)))")


def run(*args, env=None):
    return subprocess.run(
        [sys.executable, "-m", "llfp.cli", *map(str, args)],
        capture_output=True,
        text=True,
        env={**os.environ, **(env or {})},
        timeout=120,
    )


@pytest.fixture
def write(tmp_path):
    def w(name, text):
        p = tmp_path / name
        p.write_text(text)
        return p

    return w


@pytest.mark.parametrize("name", NAMES)
def test_corpus_checks(name):
    r = run("check", corpus_path(name))
    assert r.returncode == EXIT_OK, r.stdout + r.stderr
    assert "FAIL" not in r.stdout


def test_false_predicate_exit_1(write):
    r = run("check", write("bad.llfp", FALSE_UNLOCK))
    assert r.returncode == EXIT_CHECK
    assert "predicate-false" in r.stdout


def test_zero_timeout_exit_2(write):
    r = run("check", "--oracle-timeout", "0", write("top.llfp", TOP_UNLOCK))
    assert r.returncode == EXIT_PENDING
    assert "verification-pending" in r.stdout


def test_parse_error_exit_3(write):
    r = run("check", write("broken.llfp", "a : (Type."))
    assert r.returncode == EXIT_PARSE
    assert "broken.llfp:1:" in r.stdout


def test_trace_lists_oracle_calls(write):
    r = run("check", "--trace", write("top.llfp", TOP_UNLOCK))
    assert r.returncode == EXIT_OK
    assert "oracle Val: free O : term -> true" in r.stdout


def test_lf_mode_rejects_locks():
    r = run("check", "--lf", corpus_path("lambda_v"))
    assert r.returncode == EXIT_CHECK
    assert "stratification" in r.stdout


def test_translate_then_check_lf_then_decode(tmp_path):
    out, back = tmp_path / "lv.lf", tmp_path / "lv.llfp"
    assert run("translate", corpus_path("lambda_v"), out).returncode == EXIT_OK
    r = run("check", "--lf", out)
    assert r.returncode == EXIT_OK, r.stdout
    assert run("decode", out, back).returncode == EXIT_OK
    assert run("check", back).returncode == EXIT_OK


def test_translate_lock_free_file(write, tmp_path):
    src = write("plain.llfp", "a : Type.\nc : a.\n#check |- (\\x:a. x) c : a.\n")
    out = tmp_path / "plain.lf"
    assert run("translate", src, out).returncode == EXIT_OK
    assert out.read_text().split() == "a : Type. c : a. #check |- (\\x:a. x) c : a.".split()


def test_translate_of_failing_file(write, tmp_path):
    r = run("translate", "--oracle-timeout", "0", write("top.llfp", TOP_UNLOCK), tmp_path / "o.lf")
    assert r.returncode == EXIT_PENDING


def test_normalize(write):
    src = write("n.llfp", "term : Type. nat : Type. O : nat. free : nat -> term.\n#normalize (\\x:term. x) (free O).\n")
    r = run("normalize", src)
    assert r.returncode == EXIT_OK and r.stdout.strip() == "free O"
    r = run("normalize", src, "-e", r"(\y:term. y) (free O)")
    assert r.stdout.strip() == "free O"


def test_external_oracle_via_search_path(write):
    src = write("top.llfp", TOP_UNLOCK)
    r = run("check", "--oracle", "Val=echo_oracle.py", src, env={"LLFP_ORACLE_PATH": str(ORACLES)})
    assert r.returncode == EXIT_OK, r.stdout + r.stderr
    r = run("check", "--oracle", "Val=echo_oracle.py", write("bad.llfp", FALSE_UNLOCK), env={"LLFP_ORACLE_PATH": str(ORACLES)})
    assert r.returncode == EXIT_CHECK


def test_hanging_external_oracle_is_pending(write):
    src = write("top.llfp", TOP_UNLOCK)
    r = run("check", "--oracle-timeout", "300", "--oracle", f"Val={ORACLES / 'hang_oracle.py'}", src)
    assert r.returncode == EXIT_PENDING
    assert "timeout" in r.stdout


def test_missing_oracle_executable(write):
    r = run("check", "--oracle", "Val=no-such-oracle", write("top.llfp", TOP_UNLOCK))
    assert r.returncode == EXIT_CHECK and "not found" in r.stderr


def test_exit_precedence():
    assert _worse(EXIT_PENDING, EXIT_CHECK) == EXIT_CHECK
    assert _worse(EXIT_OK, EXIT_PENDING) == EXIT_PENDING
    assert _worse(EXIT_PARSE, EXIT_CHECK) == EXIT_PARSE


def test_main_in_process(capsys):
    assert main(["check", str(corpus_path("monads"))]) == EXIT_OK
    assert "ok" in capsys.readouterr().out
