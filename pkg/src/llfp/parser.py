"""Concrete syntax: lexer, parser/resolver for files and terms, pretty-printer.

Grammar (ASCII)::

    file      := (decl | directive)*
    decl      := IDENT ":" term "." | "pred" IDENT "."
    directive := "#check" ctx "|-" term ":" term "."
               | "#checkty" ctx "|-" term ":" "Type" "."
               | "#normalize" term "."
    ctx       := empty | IDENT ":" term ("," IDENT ":" term)*
    term      := "!" IDENT ":" term "." term | "\\" IDENT ":" term "." term
               | app ("->" term)?
    app       := atom+
    atom      := IDENT | "Type" | "(" term ")"
               | ("Lock" | "lock" | "unlock") "[" IDENT "," term "," term "]" "(" term ")"

Comments run from ``%`` to the end of the line.  A comment of the form
``%expect-fail <error-class>`` marks the next item as expected to fail.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .syntax import (
    FAMILY,
    KIND,
    OBJECT,
    TYPE,
    Abs,
    App,
    Context,
    FamApp,
    FamConst,
    FamPi,
    KindPi,
    Lock,
    LockTy,
    ObjConst,
    Signature,
    Term,
    Type,
    Unlock,
    Var,
    constants,
)


class ParseError(Exception):
    def __init__(self, code: str, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{line}:{col}: {code}: {message}")
        self.code = code
        self.message = message
        self.line = line
        self.col = col


# -- lexer -------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<directive>\#[A-Za-z]+)
  | (?P<arrow>->)
  | (?P<turnstile>\|-)
  | (?P<ident>[A-Za-z0-9_][A-Za-z0-9_'$]*)
  | (?P<punct>[:.,()\[\]!\\])
    """,
    re.VERBOSE,
)

KEYWORDS = {"Type", "Lock", "lock", "unlock", "pred"}
DIRECTIVES = {"#check", "#checkty", "#normalize"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError("lexical", f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "comment":
            body = s[1:].strip()
            if body.startswith("expect-fail"):
                toks.append(Token("pragma", body[len("expect-fail"):].strip(), line, col))
        elif kind == "directive":
            if s not in DIRECTIVES:
                raise ParseError("lexical", f"unknown directive {s}", line, col)
            toks.append(Token("directive", s, line, col))
        elif kind == "ident":
            toks.append(Token("keyword" if s in KEYWORDS else "ident", s, line, col))
        elif kind in ("arrow", "turnstile", "punct"):
            toks.append(Token("punct", s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rfind("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


# -- surface tree ----------------------------------------------------------------


@dataclass(frozen=True)
class SName:
    name: str
    line: int
    col: int


@dataclass(frozen=True)
class SType:
    pass


@dataclass(frozen=True)
class SPi:
    name: str | None
    dom: object
    body: object


@dataclass(frozen=True)
class SLam:
    name: str
    dom: object
    body: object


@dataclass(frozen=True)
class SApp:
    fun: object
    arg: object


@dataclass(frozen=True)
class SLock:
    form: str
    pred: str
    witness: object
    witness_ty: object
    body: object
    line: int
    col: int


# -- source file items -------------------------------------------------------------


@dataclass(frozen=True)
class DeclItem:
    name: str
    classifier: Term
    line: int
    col: int
    expect_fail: str | None = None


@dataclass(frozen=True)
class PredItem:
    name: str
    line: int
    col: int
    expect_fail: str | None = None


@dataclass(frozen=True)
class CheckItem:
    context: Context
    subject: Term
    classifier: Term
    line: int
    col: int
    form: str = "check"
    expect_fail: str | None = None


@dataclass(frozen=True)
class NormalizeItem:
    term: Term
    line: int
    col: int
    expect_fail: str | None = None


@dataclass
class SourceFile:
    items: list = field(default_factory=list)

    @property
    def signature(self) -> Signature:
        return _sig_of(self.items)

    @property
    def predicates(self) -> list[str]:
        return [it.name for it in self.items if isinstance(it, PredItem)]

    @property
    def directives(self) -> list:
        return [it for it in self.items if isinstance(it, (CheckItem, NormalizeItem))]


def _sig_of(items) -> Signature:
    from .syntax import Decl

    return Signature(Decl(it.name, it.classifier) for it in items if isinstance(it, DeclItem))


# -- parser ------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.tok
        shown = tok.text or "end of input"
        return ParseError("syntax", f"{msg}, found {shown!r}", tok.line, tok.col)

    def at(self, text) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("punct", "keyword", "directive")

    def expect(self, text) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error("expected an identifier")
        return self.advance()

    def term(self):
        if self.at("!"):
            self.advance()
            name = self.ident().text
            self.expect(":")
            dom = self.term()
            self.expect(".")
            return SPi(name, dom, self.term())
        if self.at("\\"):
            self.advance()
            name = self.ident().text
            self.expect(":")
            dom = self.term()
            self.expect(".")
            return SLam(name, dom, self.term())
        left = self.app()
        if self.at("->"):
            self.advance()
            return SPi(None, left, self.term())
        return left

    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind == "ident":
            return True
        return t.kind in ("keyword", "punct") and t.text in ("Type", "(", "Lock", "lock", "unlock")

    def app(self):
        if not self.starts_atom():
            raise self.error("expected a term")
        head = self.atom()
        while self.starts_atom():
            head = SApp(head, self.atom())
        return head

    def atom(self):
        t = self.tok
        if t.kind == "ident":
            self.advance()
            return SName(t.text, t.line, t.col)
        if self.at("Type"):
            self.advance()
            return SType()
        if self.at("("):
            self.advance()
            inner = self.term()
            self.expect(")")
            return inner
        if t.text in ("Lock", "lock", "unlock"):
            self.advance()
            self.expect("[")
            pred = self.ident()
            self.expect(",")
            witness = self.term()
            self.expect(",")
            wty = self.term()
            self.expect("]")
            self.expect("(")
            body = self.term()
            self.expect(")")
            return SLock(t.text, pred.text, witness, wty, body, pred.line, pred.col)
        raise self.error("expected a term")

    def context(self):
        binds = []
        if self.at("|-"):
            return binds
        while True:
            name = self.ident()
            self.expect(":")
            binds.append((name, self.term()))
            if not self.at(","):
                return binds
            self.advance()


class Resolver:
    """Turns surface trees into stratified de Bruijn terms.

    ``known`` maps constant names to ``"family"`` or ``"object"``.  Unknown
    names resolve to object constants so the kernel can report them.
    """

    def __init__(self, known: dict[str, str], predicates=None):
        self.known = known
        self.predicates = predicates

    def resolve(self, s, scope: list[str]) -> Term:
        match s:
            case SName(name, _, _):
                for i in range(len(scope) - 1, -1, -1):
                    if scope[i] == name:
                        return Var(len(scope) - 1 - i, name)
                if self.known.get(name) == FAMILY:
                    return FamConst(name)
                return ObjConst(name)
            case SType():
                return TYPE
            case SPi(name, dom, body):
                d = self.resolve(dom, scope)
                b = self.resolve(body, scope + [name or "_"])
                if b.level == KIND:
                    return KindPi(name or "_", d, b)
                return FamPi(name or "_", d, b)
            case SLam(name, dom, body):
                return Abs(name, self.resolve(dom, scope), self.resolve(body, scope + [name]))
            case SApp(fun, arg):
                f = self.resolve(fun, scope)
                a = self.resolve(arg, scope)
                return FamApp(f, a) if f.level == FAMILY else App(f, a)
            case SLock(form, pred, w, wt, body, line, col):
                if self.predicates is not None and pred not in self.predicates:
                    raise ParseError("unknown-predicate", f"predicate {pred} is not declared", line, col)
                cls = {"Lock": LockTy, "lock": Lock, "unlock": Unlock}[form]
                return cls(
                    pred,
                    self.resolve(w, scope),
                    self.resolve(wt, scope),
                    self.resolve(body, scope),
                )
        raise TypeError(f"cannot resolve {s!r}")

    def context(self, binds) -> Context:
        ctx = Context()
        scope = []
        seen = set()
        for tok, sty in binds:
            if tok.text in seen:
                raise ParseError("duplicate-declaration", f"variable {tok.text} bound twice", tok.line, tok.col)
            seen.add(tok.text)
            ctx = ctx.push(tok.text, self.resolve(sty, scope))
            scope.append(tok.text)
        return ctx


def parse_file(text: str, known: dict[str, str] | None = None, predicates=None) -> SourceFile:
    """Parse a whole file, resolving names against the declarations seen so far."""
    p = _Parser(text)
    known = dict(known or {})
    preds = set(predicates or ())
    res = Resolver(known, preds)
    out = SourceFile()
    pending = None
    while p.tok.kind != "eof":
        t = p.tok
        if t.kind == "pragma":
            p.advance()
            pending = t.text or "error"
            continue
        if t.kind == "keyword" and t.text == "pred":
            p.advance()
            name = p.ident()
            p.expect(".")
            if name.text in preds:
                raise ParseError("duplicate-declaration", f"predicate {name.text} declared twice", name.line, name.col)
            preds.add(name.text)
            out.items.append(PredItem(name.text, name.line, name.col, pending))
        elif t.kind == "directive":
            p.advance()
            if t.text == "#normalize":
                body = p.term()
                p.expect(".")
                out.items.append(NormalizeItem(res.resolve(body, []), t.line, t.col, pending))
            else:
                binds = p.context()
                p.expect("|-")
                subj = p.term()
                p.expect(":")
                cls_tok = p.tok
                cls = p.term()
                p.expect(".")
                if t.text == "#checkty" and not isinstance(cls, SType):
                    raise p.error("#checkty expects classifier Type", cls_tok)
                ctx = res.context(binds)
                scope = ctx.names()
                out.items.append(
                    CheckItem(
                        ctx,
                        res.resolve(subj, scope),
                        res.resolve(cls, scope),
                        t.line,
                        t.col,
                        t.text[1:],
                        pending,
                    )
                )
        elif t.kind == "ident":
            name = p.advance()
            p.expect(":")
            cls = res.resolve(p.term(), [])
            p.expect(".")
            if name.text in known:
                raise ParseError("duplicate-declaration", f"{name.text} declared twice", name.line, name.col)
            known[name.text] = FAMILY if cls.level == KIND else OBJECT
            out.items.append(DeclItem(name.text, cls, name.line, name.col, pending))
        else:
            raise p.error("expected a declaration or directive")
        pending = None
    return out


def parse_term(text: str, known: dict[str, str] | Signature | None = None, scope=(), predicates=None) -> Term:
    """Parse a single term; ``scope`` lists bound variable names, outermost first."""
    if isinstance(known, Signature):
        known = known.known_names()
    p = _Parser(text)
    s = p.term()
    if p.tok.kind != "eof":
        raise p.error("unexpected trailing input")
    return Resolver(known or {}, predicates).resolve(s, list(scope))


def parse_context(text: str, known: dict[str, str] | Signature | None = None) -> Context:
    if isinstance(known, Signature):
        known = known.known_names()
    p = _Parser(text)
    if p.tok.kind == "eof":
        return Context()
    binds = p.context()
    if p.tok.kind != "eof":
        raise p.error("unexpected trailing input")
    return Resolver(known or {}).context(binds)


def parse_signature(text: str) -> Signature:
    return parse_file(text).signature


# -- printer ---------------------------------------------------------------------

_ATOM, _APP, _BINDER = 0, 1, 2


def _fresh(name: str, taken) -> str:
    base = name if name and name != "_" else "x"
    cand = base
    k = 0
    while cand in taken or cand in KEYWORDS:
        k += 1
        cand = f"{base}{k}"
    return cand


def print_term(t: Term, names=(), reserved=None) -> str:
    """Render ``t``; ``names`` gives the free variables' names, outermost first."""
    taken = set(reserved if reserved is not None else constants(t))
    return _Printer(taken).show(t, list(names))


class _Printer:
    def __init__(self, reserved):
        self.reserved = reserved

    def show(self, t, names):
        return self._go(t, names)[0]

    def _binder_name(self, hint, names):
        return _fresh(hint, self.reserved | set(names))

    def _go(self, t, names):
        match t:
            case Type():
                return "Type", _ATOM
            case FamConst(n) | ObjConst(n):
                return n, _ATOM
            case Var(i, _):
                if i < len(names):
                    return names[len(names) - 1 - i], _ATOM
                raise ValueError(f"free variable #{i} has no name")
            case KindPi(hint, dom, body) | FamPi(hint, dom, body):
                d = self._go(dom, names)
                if 0 not in _fv0(body):
                    b = self._go(body, names + ["_"])[0]
                    left = d[0] if d[1] != _BINDER else f"({d[0]})"
                    return f"{left} -> {b}", _BINDER
                x = self._binder_name(hint, names)
                b = self._go(body, names + [x])[0]
                return f"!{x}:{d[0]}. {b}", _BINDER
            case Abs(hint, dom, body):
                x = self._binder_name(hint, names)
                d = self._go(dom, names)[0]
                b = self._go(body, names + [x])[0]
                return f"\\{x}:{d}. {b}", _BINDER
            case App(f, a) | FamApp(f, a):
                fs, fp = self._go(f, names)
                as_, ap = self._go(a, names)
                if fp == _BINDER:
                    fs = f"({fs})"
                if ap != _ATOM:
                    as_ = f"({as_})"
                return f"{fs} {as_}", _APP
            case LockTy() | Lock() | Unlock():
                kw = {LockTy: "Lock", Lock: "lock", Unlock: "unlock"}[type(t)]
                w = self._go(t.witness, names)[0]
                wt = self._go(t.witness_ty, names)[0]
                b = self._go(t.body, names)[0]
                return f"{kw}[{t.pred},{w},{wt}]({b})", _ATOM
        raise TypeError(f"cannot print {t!r}")


def _fv0(t):
    from .syntax import free_vars

    return free_vars(t)


def print_context(ctx: Context, reserved=None) -> str:
    parts = []
    names: list[str] = []
    res = set(reserved or ())
    for name, ty in ctx:
        res |= constants(ty)
    for name, ty in ctx:
        parts.append(f"{name}:{_Printer(res).show(ty, names)}")
        names.append(name)
    return ", ".join(parts)


def print_signature(sig: Signature, predicates=None) -> str:
    """One declaration per line, preceded by the predicate declarations it needs."""
    from .syntax import LOCKS, subterms

    preds = list(predicates or [])
    for d in sig:
        for _, s, _ in subterms(d.classifier):
            if isinstance(s, LOCKS) and s.pred not in preds:
                preds.append(s.pred)
    lines = [f"pred {p}." for p in preds]
    lines += [f"{d.name} : {print_term(d.classifier)}." for d in sig]
    return "\n".join(lines)


def print_item(item) -> str:
    prefix = f"%expect-fail {item.expect_fail}\n" if item.expect_fail else ""
    match item:
        case DeclItem():
            body = f"{item.name} : {print_term(item.classifier)}."
        case PredItem():
            body = f"pred {item.name}."
        case NormalizeItem():
            body = f"#normalize {print_term(item.term)}."
        case CheckItem():
            ctx = item.context
            res = constants(item.subject) | constants(item.classifier)
            for _, ty in ctx:
                res |= constants(ty)
            names = _unique_names(ctx.names(), res)
            parts = []
            for (_, ty), n, k in zip(ctx, names, range(len(names))):
                parts.append(f"{n}:{_Printer(res).show(ty, names[:k])}")
            cs = ", ".join(parts)
            subj = _Printer(res).show(item.subject, names)
            cls = _Printer(res).show(item.classifier, names)
            kw = "#checkty" if item.form == "checkty" else "#check"
            body = f"{kw} {cs}{' ' if cs else ''}|- {subj} : {cls}."
        case _:
            raise TypeError(f"cannot print item {item!r}")
    return prefix + body


def _unique_names(names, reserved):
    out = []
    for n in names:
        out.append(_fresh(n, set(out) | set(reserved)))
    return out


def print_file(items) -> str:
    return "\n".join(print_item(it) for it in items) + "\n"


def print_judgement(sig: Signature, ctx: Context, subject: Term, classifier: Term) -> dict:
    """Printed forms of a judgement, with context names made unique so they reparse."""
    res = constants(subject) | constants(classifier)
    for _, ty in ctx:
        res |= constants(ty)
    names = _unique_names(ctx.names(), res)
    parts = [f"{n}:{_Printer(res).show(ty, names[:k])}" for k, ((_, ty), n) in enumerate(zip(ctx, names))]
    return {
        "signature": print_signature(sig),
        "context": ", ".join(parts),
        "term": _Printer(res).show(subject, names),
        "type": _Printer(res).show(classifier, names),
    }
