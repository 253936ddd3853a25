import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gen import SIG, SOURCE
from llfp.parser import (
    CheckItem,
    DeclItem,
    NormalizeItem,
    ParseError,
    PredItem,
    parse_context,
    parse_file,
    parse_term,
    print_context,
    print_file,
    print_judgement,
    print_signature,
    print_term,
    tokenize,
)
from llfp.syntax import TYPE, Abs, App, FamConst, FamPi, Lock, LockTy, ObjConst, Unlock, Var
from strategies import families, objects

SCOPE = ["u", "v", "w"]


def test_basic_terms():
    t = parse_term(r"\x:a. f x", SIG)
    assert t == Abs("x", FamConst("a"), App(ObjConst("f"), Var(0)))
    assert parse_term("a -> a", SIG) == FamPi("_", FamConst("a"), FamConst("a"))
    assert parse_term("!x:a. p x", SIG).level == "family"
    assert parse_term("Type") == TYPE
    assert parse_term("g u v", SIG, SCOPE) == App(App(ObjConst("g"), Var(2)), Var(1))


def test_lock_forms():
    preds = SOURCE.predicates
    lt = parse_term("Lock[Tt,c,a](p c)", SIG, predicates=preds)
    assert isinstance(lt, LockTy) and lt.pred == "Tt" and lt.witness == ObjConst("c")
    lk = parse_term("lock[Tt,c,a](c)", SIG, predicates=preds)
    assert lk == Lock("Tt", ObjConst("c"), FamConst("a"), ObjConst("c"))
    un = parse_term("unlock[Tt,c,a](lka c)", SIG, predicates=preds)
    assert isinstance(un, Unlock) and un.body == App(ObjConst("lka"), ObjConst("c"))


def test_arrow_is_right_associative_and_app_left():
    t = parse_term("a -> a -> a", SIG)
    assert t == FamPi("_", FamConst("a"), FamPi("_", FamConst("a"), FamConst("a")))
    assert parse_term("g c d", SIG) == App(App(ObjConst("g"), ObjConst("c")), ObjConst("d"))


@pytest.mark.parametrize(
    "text,code",
    [
        (r"\x:a.", "syntax"),
        ("unlock[Nope,c,a](c)", "unknown-predicate"),
        ("(c", "syntax"),
        ("c @ d", "lexical"),
    ],
)
def test_term_errors(text, code):
    with pytest.raises(ParseError) as exc:
        parse_term(text, SIG, predicates=SOURCE.predicates)
    assert exc.value.code == code


def test_unknown_names_are_left_to_the_kernel():
    assert parse_term("zz", SIG) == ObjConst("zz")


def test_error_positions():
    text = "a : Type.\nc : a.\nd : (a.\n"
    with pytest.raises(ParseError) as exc:
        parse_file(text)
    assert exc.value.code == "syntax" and exc.value.line == 3
    with pytest.raises(ParseError) as exc:
        parse_file("a : Type.\na : Type.\n")
    assert exc.value.code == "duplicate-declaration" and exc.value.line == 2


def test_file_items_and_pragma():
    src = parse_file(
        """
        pred Q.
        a : Type. c : a.
        #check |- c : a.
        % expect-fail is written as a comment pragma
        %expect-fail type-mismatch
        #check x:a |- x : a -> a.
        #normalize (\\y:a. y) c.
        """
    )
    kinds = [type(i) for i in src.items]
    assert kinds == [PredItem, DeclItem, DeclItem, CheckItem, CheckItem, NormalizeItem]
    assert src.items[3].expect_fail is None
    assert src.items[4].expect_fail == "type-mismatch"
    assert set(src.predicates) == {"Q"}
    assert [d.name for d in src.signature] == ["a", "c"]


def test_tokenize_reports_pragmas():
    toks = tokenize("%expect-fail predicate-false\n#check |- c : a.")
    assert toks[0].kind == "pragma" and toks[0].text == "predicate-false"


@given(objects(3))
def test_print_parse_roundtrip_objects(t):
    text = print_term(t, SCOPE)
    assert parse_term(text, SIG, SCOPE, SOURCE.predicates) == t


@given(families(3))
def test_print_parse_roundtrip_families(t):
    text = print_term(t, SCOPE)
    assert parse_term(text, SIG, SCOPE, SOURCE.predicates) == t


@given(st.data())
def test_printer_freshens_shadowed_names(data):
    # binders whose hint collides with a context name must be renamed on output
    body = data.draw(objects(4))
    t = Abs("u", FamConst("a"), body)
    assert parse_term(print_term(t, SCOPE), SIG, SCOPE, SOURCE.predicates) == t


def test_context_and_signature_roundtrip():
    ctx = parse_context("x:a, y:p x, z:Lock[Tt,x,a](a)", SIG)
    assert parse_context(print_context(ctx), SIG) == ctx
    text = print_signature(SIG, SOURCE.predicates)
    again = parse_file(text)
    assert again.signature == SIG and set(again.predicates) == set(SOURCE.predicates)


def test_file_roundtrip():
    src = parse_file(
        """
        pred Tt.
        a : Type. c : a. lka : !x:a. Lock[Tt,x,a](a).
        #check x:a |- unlock[Tt,x,a](lka x) : a.
        %expect-fail predicate-false
        #check |- unlock[Tt,c,a](lka c) : a.
        #normalize unlock[Tt,c,a](lock[Tt,c,a](c)).
        """
    )
    assert _strip(parse_file(print_file(src.items)).items) == _strip(src.items)


def _strip(items):
    return [dataclasses.replace(i, line=0, col=0) for i in items]


def test_print_judgement_reparses():
    ctx = parse_context("x:a, x':p x", SIG)
    subj = parse_term("pc x", SIG, ctx.names())
    ty = parse_term("p x", SIG, ctx.names())
    j = print_judgement(SIG, ctx, subj, ty)
    assert set(j) == {"signature", "context", "term", "type"}
    sig2 = parse_file(j["signature"]).signature
    ctx2 = parse_context(j["context"], sig2)
    assert ctx2 == ctx
    assert parse_term(j["term"], sig2, ctx2.names()) == subj
