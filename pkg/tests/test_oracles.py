import io
import json
import sys
import threading
import time
from pathlib import Path

import pytest

import samples
from llfp.corpus import corpus_text
from llfp.kernel import Checker
from llfp.oracles import (
    FALSE,
    TRUE,
    ExternalOracle,
    OracleEnv,
    UnknownPredicate,
    Verdict,
    decide_builtin,
    default_env,
    evaluate_builtin,
    fitch_oracle,
    parse_reply,
    pset_oracle,
    qf_oracle,
    serve,
    unknown,
    val_oracle,
    well_behavedness_suite,
)
from llfp.parser import parse_context, parse_file, parse_term

ORACLES = Path(__file__).parent / "oracles"
LAM = samples.LAMBDA.signature
IMP = samples.IMP.signature


def lam(text, ctx=""):
    c = parse_context(ctx, LAM)
    return c, parse_term(text, LAM, c.names())


def imp(text, ctx=""):
    c = parse_context(ctx, IMP)
    return c, parse_term(text, IMP, c.names())


TERM = parse_term("term", LAM)
BOOL = parse_term("bool", IMP)
ARGS = parse_term("args", IMP)


# -- verdicts -------------------------------------------------------------------------


def test_verdict_json():
    assert TRUE.to_json() == '{"verdict": "true"}'
    assert json.loads(unknown("timeout").to_json()) == {"verdict": "unknown", "reason": "timeout"}
    assert bool(TRUE) and not bool(FALSE) and not bool(unknown("fuel"))
    with pytest.raises(ValueError):
        unknown("bored")


@pytest.mark.parametrize(
    "line,expect",
    [
        ('{"verdict": "true"}', TRUE),
        ('{"verdict": "false"}', FALSE),
        ('{"verdict": "unknown", "reason": "timeout"}', unknown("timeout")),
        ('{"verdict": "unknown"}', unknown("external-error")),
        ('{"verdict": "maybe"}', unknown("external-error")),
        ("not json", unknown("external-error")),
        ("[1]", unknown("external-error")),
    ],
)
def test_parse_reply(line, expect):
    assert parse_reply(line) == expect


# -- built-ins -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "text,ctx,expect",
    [
        (r"lam (\y:term. y)", "", True),
        ("free (S O)", "", True),
        ("app (free O) (free O)", "", False),
        ("z", "z:term", False),
        (r"(\x:term. x) (free O)", "", True),
        (r"(\x:term. x) z", "z:term", False),
    ],
)
def test_val(text, ctx, expect):
    c, n = lam(text, ctx)
    assert val_oracle(LAM, c, n, TERM) == Verdict("true" if expect else "false")


@pytest.mark.parametrize(
    "text,ctx,expect",
    [
        ("eqi (bang a) zero", "", True),
        (r"forall (\x:int. eqi x x)", "", False),
        ("eqi i zero", "i:int", False),
        (r"(\b:bool. not b) (eqi one one)", "", True),
    ],
)
def test_qf(text, ctx, expect):
    c, n = imp(text, ctx)
    assert qf_oracle(IMP, c, n, BOOL) == Verdict("true" if expect else "false")


def test_qf_wrong_type():
    c, n = imp("zero")
    assert qf_oracle(IMP, c, n, parse_term("int", IMP)) == FALSE


@pytest.mark.parametrize(
    "text,ctx,expect",
    [
        (r"mkargs a (\v:int. eqi v (bang a))", "", False),
        (r"mkargs a (\v:int. eqi v (bang b))", "", True),
        (r"mkargs l (\v:int. eqi v zero)", "l:var", False),
        (r"mkargs a (\v:int. eqi v i)", "i:int", False),
        ("zero", "", False),
    ],
)
def test_pset(text, ctx, expect):
    c, n = imp(text, ctx)
    assert pset_oracle(IMP, c, n, ARGS) == Verdict("true" if expect else "false")


def test_fitch_corpus():
    src = parse_file(corpus_text("fitch"))
    from llfp.kernel import run_directives

    reports = run_directives(src, default_env())
    assert all(r.as_expected for r in reports)
    calls = [e for r in reports for e in r.trace]
    assert {e.verdict.kind for e in calls} == {"true", "false"}


def test_fitch_malformed_is_false():
    src = parse_file(corpus_text("fitch"))
    sig = src.signature
    ctx = parse_context("A:o", sig)
    assert fitch_oracle(sig, ctx, parse_term("A", sig, ctx.names()), parse_term("o", sig)) == FALSE


def test_evaluate_builtin_dispatch():
    c, n = lam("free O")
    assert evaluate_builtin("Val", LAM, c, n, TERM) == TRUE
    with pytest.raises(KeyError):
        evaluate_builtin("Nope", LAM, c, n, TERM)


# -- environment -----------------------------------------------------------------------


def test_query_logs_and_requires_registration():
    env = default_env()
    c, n = lam("free O")
    assert env.query("Val", LAM, c, n, TERM) == TRUE
    assert len(env.log) == 1 and env.log[0].verdict == TRUE and env.log[0].pred == "Val"
    with pytest.raises(UnknownPredicate):
        env.query("Nope", LAM, c, n, TERM)


def test_zero_timeout_is_unknown():
    env = default_env(timeout_ms=0)
    c, n = lam("free O")
    assert env.query("Val", LAM, c, n, TERM) == unknown("timeout")


def test_slow_procedure_times_out():
    env = OracleEnv({"Slow": lambda *a: time.sleep(2) or TRUE}, timeout_ms=100)
    c, n = lam("free O")
    t0 = time.monotonic()
    assert env.query("Slow", LAM, c, n, TERM) == unknown("timeout")
    assert time.monotonic() - t0 < 1


def test_raising_procedure_is_external_error():
    def boom(*a):
        raise RuntimeError("no")

    env = OracleEnv({"Boom": boom})
    c, n = lam("free O")
    assert env.query("Boom", LAM, c, n, TERM) == unknown("external-error")


def test_declared_predicate_is_pending():
    env = OracleEnv()
    env.declare("Q")
    assert env.registered("Q")
    c, n = lam("free O")
    assert env.query("Q", LAM, c, n, TERM) == unknown("external-error")


def test_concurrent_queries_all_logged():
    env = default_env()
    c, n = lam("free O")
    threads = [threading.Thread(target=lambda: env.query("Val", LAM, c, n, TERM)) for _ in range(20)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(env.log) == 20


# -- subprocess protocol -------------------------------------------------------------------


def test_serve_and_decide_builtin():
    c, n = lam(r"lam (\y:term. y)")
    req = ExternalOracle([]).request("Val", LAM, c, n, TERM)
    assert set(json.loads(req)) == {"predicate", "signature", "context", "term", "type"}
    out = io.StringIO()
    serve(decide_builtin, io.StringIO(req + "\n\n" + "garbage\n"), out)
    assert out.getvalue().splitlines() == [TRUE.to_json(), unknown("external-error").to_json()]


def test_echo_oracle_process():
    ext = ExternalOracle([sys.executable, str(ORACLES / "echo_oracle.py")])
    env = OracleEnv({"Val": ext, "QF": ext})
    try:
        c, n = lam("app (free O) (free O)", "")
        assert env.query("Val", LAM, c, n, TERM) == FALSE
        c, n = imp("eqi (bang a) zero")
        assert env.query("QF", IMP, c, n, BOOL) == TRUE
    finally:
        env.close()


def test_hanging_oracle_times_out():
    ext = ExternalOracle([sys.executable, str(ORACLES / "hang_oracle.py")])
    ext.start()
    env = OracleEnv({"Val": ext}, timeout_ms=200)
    c, n = lam("free O")
    try:
        t0 = time.monotonic()
        assert env.query("Val", LAM, c, n, TERM) == unknown("timeout")
        assert abs(time.monotonic() - t0 - 0.2) < 0.1
    finally:
        env.close()


def test_dead_oracle_is_external_error():
    ext = ExternalOracle([sys.executable, "-c", "pass"])
    env = OracleEnv({"Val": ext}, timeout_ms=2000)
    c, n = lam("free O")
    try:
        assert env.query("Val", LAM, c, n, TERM) == unknown("external-error")
    finally:
        env.close()


# -- well-behavedness ----------------------------------------------------------------------


@pytest.mark.parametrize(
    "proc,make",
    [(val_oracle, samples.val_samples), (qf_oracle, samples.qf_samples), (pset_oracle, samples.pset_samples)],
    ids=["Val", "QF", "Pset"],
)
def test_builtins_are_well_behaved(proc, make):
    ss = make(60, seed=3)
    assert any(proc(s.signature, s.context, s.witness, s.witness_ty) for s in ss)
    assert well_behavedness_suite(proc, ss) == []


def test_ill_behaved_control_is_flagged():
    ss = [s for s in samples.val_samples(60, seed=3) if s.witness.level == "object"]
    found = well_behavedness_suite(samples.is_variable, ss)
    assert found and {v.clause for v in found} == {"substitution"}


def test_kernel_queries_raw_terms():
    env = default_env()
    chk = Checker(LAM, env)
    c, u = lam(r"unlock[Val,(\x:term. x) (free O),term](betav (\y:term. y) ((\x:term. x) (free O)))")
    chk.infer_object(c, u)
    assert env.log[0].witness == parse_term(r"(\x:term. x) (free O)", LAM)
