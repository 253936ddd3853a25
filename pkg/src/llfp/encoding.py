"""Encoding of LLFP into plain LF, its decoding, and goodness checking.

A lock type ``Lock[P,S,s](r)`` becomes ``!u:(P$.. a I_s S). r`` where
``I_s = \\x:s. x`` stands for the witness type and ``a`` are the parameters
of the synthesized family.  A lock becomes an abstraction over the same
type.  An unlock becomes an application: to the guard variable of the
enclosing lock that discharges it, or else to ``cP$.. a I_s S`` (the
oracle-discharged case).

The synthesized family for a witness type is built from its normal form by
abstracting every maximal object argument of a family application that does
not mention variables bound inside the type.  Its kind and the name of the
constant then depend only on the predicate and on the resulting closed
template, so the same constants serve every context and every substitution
instance.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .kernel import CheckError, Checker
from .reduction import DEFAULT_FUEL, def_eq, normalize
from .syntax import (
    TYPE,
    Abs,
    App,
    Context,
    Decl,
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
    binds,
    free_vars,
    instantiate,
    shift,
    spine,
)

P_PREFIX = "P$"
C_PREFIX = "cP$"


class EncodingError(Exception):
    pass


class NotGood(ValueError):
    """Raised by decoding on terms outside the image of the encoding."""


class InvariantViolation(Exception):
    """The LF re-check of an encoded judgement failed."""


def canon(t: Term) -> str:
    """Name-free serialization, stable across runs."""
    match t:
        case Type():
            return "*"
        case FamConst(n):
            return f"F[{n}]"
        case ObjConst(n):
            return f"C[{n}]"
        case Var(i, _):
            return f"#{i}"
    tag = type(t).__name__
    head = f"{tag}<{t.pred}>" if hasattr(t, "pred") else tag
    return head + "(" + ",".join(canon(k) for k in t.kids) + ")"


def is_p_name(name: str) -> bool:
    return name.startswith(P_PREFIX)


def is_c_name(name: str) -> bool:
    return name.startswith(C_PREFIX)


def pred_of(name: str) -> str:
    body = name[len(C_PREFIX):] if is_c_name(name) else name[len(P_PREFIX):]
    return body.rsplit("$", 1)[0]


@dataclass
class PEntry:
    pred: str
    p_name: str
    c_name: str
    holes: int
    kind: Term
    c_type: Term


@dataclass
class EncodingState:
    """Synthesized constants and the LF signature built so far (in order)."""

    decls: list = field(default_factory=list)
    index: dict = field(default_factory=dict)
    table: dict = field(default_factory=dict)
    created: list = field(default_factory=list)

    def add(self, name: str, classifier: Term) -> None:
        old = self.index.get(name)
        if old is not None:
            if old != classifier:
                raise EncodingError(f"{name} declared with two classifiers")
            return
        self.index[name] = classifier
        self.decls.append(Decl(name, classifier))
        self.created.append(name)

    def lookup(self, name: str) -> Term | None:
        return self.index.get(name)

    @property
    def signature(self) -> Signature:
        return Signature(self.decls)

    def take_created(self) -> list:
        out, self.created = self.created, []
        return out

    def p_constant(self, pred: str, hole_types: list, tmpl: Term) -> PEntry:
        k = len(hole_types)
        body = KindPi("f", FamPi("_", tmpl, shift(tmpl, 1)), KindPi("n", shift(tmpl, 1), TYPE))
        for i in range(k - 1, -1, -1):
            body = KindPi(f"h{i + 1}", hole_types[i], body)
        key = (pred, body)
        hit = self.table.get(key)
        if hit is not None:
            return hit
        digest = hashlib.sha256((pred + "|" + canon(body)).encode()).hexdigest()[:12]
        p_name = f"{P_PREFIX}{pred}${digest}"
        c_name = f"{C_PREFIX}{pred}${digest}"
        # cP : !h.. !f:(t -> t). !n:t. P h.. f n
        target = FamConst(p_name)
        for i in range(k):
            target = FamApp(target, Var(k + 1 - i, f"h{i + 1}"))
        target = FamApp(FamApp(target, Var(1, "f")), Var(0, "n"))
        ctype = FamPi("f", FamPi("_", tmpl, shift(tmpl, 1)), FamPi("n", shift(tmpl, 1), target))
        for i in range(k - 1, -1, -1):
            ctype = FamPi(f"h{i + 1}", hole_types[i], ctype)
        entry = PEntry(pred, p_name, c_name, k, body, ctype)
        self.table[key] = entry
        self.add(p_name, body)
        return entry

    def c_constant(self, entry: PEntry) -> str:
        self.add(entry.c_name, entry.c_type)
        return entry.c_name


# -- scopes ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Entry:
    """One LF binder: an LLFP variable, or a guard variable introduced by a lock."""

    guard: bool
    pred: str | None = None
    witness: Term | None = None  # LLFP annotations, in the LLFP context at ``depth``
    witness_ty: Term | None = None
    depth: int = 0


VAR = Entry(False)


def _llfp_depth(scope) -> int:
    return sum(1 for e in scope if not e.guard)


def _lf_index(scope, i: int) -> int:
    seen = -1
    for j in range(len(scope)):
        if not scope[-1 - j].guard:
            seen += 1
            if seen == i:
                return j
    raise EncodingError(f"variable #{i} is not in scope")


# -- generalization of witness types ----------------------------------------------------


def _placeholder(i):
    return ObjConst(f"$h{i}")


def _abstract(t: Term, k: int, depth: int = 0) -> Term:
    """Replace placeholders ``$h0..$h{k-1}`` by variables bound by ``k`` enclosing binders."""
    if isinstance(t, ObjConst) and t.name.startswith("$h") and t.name[2:].isdigit():
        i = int(t.name[2:])
        if i < k:
            return Var(k - 1 - i + depth, f"h{i + 1}")
        return t
    if isinstance(t, Var):
        return Var(t.index + k, t.name) if t.index >= depth else t
    return t.rebuild([_abstract(c, k, depth + binds(t, i)) for i, c in enumerate(t.kids)])


def generalize(s: Term, lookup) -> tuple[list, list, Term]:
    """Split a normal LF family into hole values, hole types and a template."""
    holes: list[Term] = []
    types: list[Term] = []

    def walk(t, d):
        match t:
            case FamPi(x, a, b):
                return FamPi(x, walk(a, d), walk(b, d + 1))
            case FamApp():
                head, args = spine(t)
                if not isinstance(head, FamConst):
                    raise EncodingError("family application without a constant head")
                kind = lookup(head.name)
                if kind is None:
                    raise EncodingError(f"unknown family {head.name}")
                out = head
                for arg in args:
                    if not isinstance(kind, KindPi):
                        raise EncodingError(f"{head.name} applied to too many arguments")
                    if all(i >= d for i in free_vars(arg)):
                        ph = _placeholder(len(holes))
                        holes.append(shift(arg, -d))
                        types.append(kind.dom)
                        targ = ph
                    else:
                        targ = arg
                    out = FamApp(out, targ)
                    kind = instantiate(kind.body, targ)
                return out
            case _:
                return t

    tmpl = walk(s, 0)
    k = len(holes)
    hole_types = []
    for i, ty in enumerate(types):
        hty = _abstract(ty, i)
        if free_vars(hty) or any(c.startswith("$h") for c in _consts(hty)):
            raise EncodingError("witness type depends on a bound variable in a parameter type")
        hole_types.append(hty)
    tmpl = _abstract(tmpl, k)
    if any(i >= k for i in free_vars(tmpl)):
        raise EncodingError("witness type mixes bound and free variables in one argument")
    return holes, hole_types, tmpl


def _consts(t):
    from .syntax import constants

    return constants(t)


# -- encoding --------------------------------------------------------------------------------


class Encoder:
    def __init__(self, state: EncodingState, fuel: int = DEFAULT_FUEL):
        self.state = state
        self.fuel = fuel

    def encode(self, t: Term, scope=()) -> Term:
        scope = tuple(scope)
        match t:
            case Type() | FamConst() | ObjConst():
                return t
            case Var(i, n):
                return Var(_lf_index(scope, i), n)
            case KindPi(x, a, b) | FamPi(x, a, b) | Abs(x, a, b):
                return type(t)(x, self.encode(a, scope), self.encode(b, scope + (VAR,)))
            case App(f, a) | FamApp(f, a):
                return type(t)(self.encode(f, scope), self.encode(a, scope))
            case LockTy(p, w, wt, body) | Lock(p, w, wt, body):
                ptype, _ = self.p_type(p, w, wt, scope)
                guard = Entry(True, p, w, wt, _llfp_depth(scope))
                ctor = FamPi if isinstance(t, LockTy) else Abs
                return ctor(f"u${len(scope)}", ptype, self.encode(body, scope + (guard,)))
            case Unlock(p, w, wt, body):
                return App(self.encode(body, scope), self.unlock_arg(t, scope))
        raise EncodingError(f"cannot encode {t!r}")

    def p_type(self, pred, w, wt, scope):
        s = self.encode(wt, scope)
        holes, hole_types, tmpl = generalize(normalize(s, self.fuel), self.state.lookup)
        entry = self.state.p_constant(pred, hole_types, tmpl)
        head = FamConst(entry.p_name)
        for h in holes:
            head = FamApp(head, h)
        ident = Abs("x", s, Var(0, "x"))
        return FamApp(FamApp(head, ident), self.encode(w, scope)), (entry, holes, ident)

    def unlock_arg(self, u: Unlock, scope) -> Term:
        j = self.guard_for(u, scope)
        if j is not None:
            return Var(j, f"u${len(scope) - 1 - j}")
        _, (entry, holes, ident) = self.p_type(u.pred, u.witness, u.witness_ty, scope)
        out = ObjConst(self.state.c_constant(entry))
        for h in holes:
            out = App(out, h)
        return App(App(out, ident), self.encode(u.witness, scope))

    def guard_for(self, u: Unlock, scope) -> int | None:
        """LF index of the guard variable the checker would use, if any."""
        d = _llfp_depth(scope)
        for j in range(len(scope)):
            e = scope[-1 - j]
            if not e.guard or e.pred != u.pred:
                continue
            gap = d - e.depth
            if any(i < gap for t in (u.body, u.witness, u.witness_ty) for i in free_vars(t)):
                continue
            if def_eq(shift(e.witness, gap), u.witness, self.fuel) and def_eq(
                shift(e.witness_ty, gap), u.witness_ty, self.fuel
            ):
                return j
        return None

    def context(self, ctx: Context) -> Context:
        out = Context()
        scope = ()
        for name, ty in ctx:
            out = out.push(name, self.encode(ty, scope))
            scope += (VAR,)
        return out


def encode_signature(sig: Signature, state: EncodingState | None = None, fuel: int = DEFAULT_FUEL) -> EncodingState:
    state = state or EncodingState()
    enc = Encoder(state, fuel)
    for d in sig:
        cls = enc.encode(d.classifier)
        state.add(d.name, cls)
    state.take_created()
    return state


def encode_term(state: EncodingState, ctx: Context, t: Term, fuel: int = DEFAULT_FUEL) -> Term:
    """Encode ``t`` living in LLFP context ``ctx``; the state must already hold the signature."""
    return Encoder(state, fuel).encode(t, (VAR,) * len(ctx))


@dataclass
class EncodedJudgement:
    signature: Signature
    context: Context
    subject: Term
    classifier: Term
    state: EncodingState


def encode_judgement(sig: Signature, ctx: Context, subject: Term, classifier: Term, oracles=None, fuel: int = DEFAULT_FUEL) -> EncodedJudgement:
    """Check in LLFP, encode, and re-check the result in LF."""
    chk = Checker(sig, oracles, fuel)
    chk.check_signature(sig)
    chk.check_context(ctx)
    chk.check(ctx, subject, classifier)
    state = encode_signature(sig, fuel=fuel)
    enc = Encoder(state, fuel)
    lctx = enc.context(ctx)
    scope = (VAR,) * len(ctx)
    s2 = enc.encode(subject, scope)
    c2 = enc.encode(classifier, scope)
    out = EncodedJudgement(state.signature, lctx, s2, c2, state)
    lf = Checker(Signature(), None, fuel, lf=True)
    try:
        lf.check_signature(out.signature)
        lf.check_context(lctx)
        lf.check(lctx, s2, c2)
    except CheckError as exc:
        raise InvariantViolation(f"encoded judgement rejected by LF: {exc}") from exc
    return out


def merge_signatures(s1: Signature, s2: Signature) -> Signature:
    """Concatenate, dropping later duplicates; a name with two classifiers is an error."""
    out = list(s1)
    seen = {d.name: d.classifier for d in s1}
    for d in s2:
        old = seen.get(d.name)
        if old is None:
            seen[d.name] = d.classifier
            out.append(d)
        elif not def_eq(old, d.classifier):
            raise EncodingError(f"{d.name} has incompatible declarations")
    return Signature(out)


# -- decoding ---------------------------------------------------------------------------------


def _p_spine(t: Term):
    head, args = spine(t)
    if isinstance(head, FamConst) and is_p_name(head.name):
        return head.name, args
    return None


def _c_spine(t: Term):
    head, args = spine(t)
    if isinstance(head, ObjConst) and is_c_name(head.name):
        return head.name, args
    return None


def _identity_domain(i: Term) -> Term:
    if isinstance(i, Abs) and i.body == Var(0):
        return i.dom
    raise NotGood("witness type is not carried by an identity function")


class Decoder:
    def decode(self, t: Term, scope=()) -> Term:
        scope = tuple(scope)
        match t:
            case Type():
                return t
            case FamConst(n) | ObjConst(n):
                if is_p_name(n) or is_c_name(n):
                    raise NotGood(f"synthesized constant {n} out of place")
                return t
            case Var(j, n):
                if j >= len(scope):
                    return Var(_llfp_depth(scope) + j - len(scope), n)
                if scope[-1 - j].guard:
                    raise NotGood("guard variable outside an unlock")
                return Var(sum(1 for e in scope[len(scope) - j:] if not e.guard), n)
            case FamPi(x, a, b) | Abs(x, a, b):
                if _p_spine(a) is not None:
                    pred, w, wt = self.p_type(a, scope)
                    guard = Entry(True, pred, w, wt, _llfp_depth(scope))
                    ctor = LockTy if isinstance(t, FamPi) else Lock
                    return ctor(pred, w, wt, self.decode(b, scope + (guard,)))
                return type(t)(x, self.decode(a, scope), self.decode(b, scope + (VAR,)))
            case KindPi(x, a, b):
                if _p_spine(a) is not None:
                    raise NotGood("kind-level product over a lock family")
                return KindPi(x, self.decode(a, scope), self.decode(b, scope + (VAR,)))
            case FamApp(f, a):
                return FamApp(self.decode(f, scope), self.decode(a, scope))
            case App(f, a):
                cs = _c_spine(a)
                if cs is not None:
                    name, args = cs
                    if len(args) < 2:
                        raise NotGood(f"{name} is not fully applied")
                    wt = self.decode(_identity_domain(args[-2]), scope)
                    return Unlock(pred_of(name), self.decode(args[-1], scope), wt, self.decode(f, scope))
                if isinstance(a, Var) and a.index < len(scope) and scope[-1 - a.index].guard:
                    e = scope[-1 - a.index]
                    gap = _llfp_depth(scope) - e.depth
                    return Unlock(e.pred, shift(e.witness, gap), shift(e.witness_ty, gap), self.decode(f, scope))
                return App(self.decode(f, scope), self.decode(a, scope))
        raise NotGood(f"cannot decode {t!r}")

    def p_type(self, t, scope):
        name, args = _p_spine(t)
        if len(args) < 2:
            raise NotGood(f"{name} is not fully applied")
        wt = self.decode(_identity_domain(args[-2]), scope)
        return pred_of(name), self.decode(args[-1], scope), wt

    def context(self, ctx: Context) -> Context:
        out = Context()
        scope = ()
        for name, ty in ctx:
            if _p_spine(ty) is not None:
                raise NotGood(f"context variable {name} has a lock family as type")
            out = out.push(name, self.decode(ty, scope))
            scope += (VAR,)
        return out


def decode_term(t: Term, ctx: Context | None = None) -> Term:
    """Decode an LF term living in (LF) context ``ctx``; its variables are ordinary."""
    n = len(ctx) if ctx is not None else 0
    return Decoder().decode(t, (VAR,) * n)


def decode_context(ctx: Context) -> Context:
    return Decoder().context(ctx)


def decode_signature(sig: Signature) -> Signature:
    dec = Decoder()
    return Signature(
        Decl(d.name, dec.decode(d.classifier))
        for d in sig
        if not (is_p_name(d.name) or is_c_name(d.name))
    )


# -- goodness ---------------------------------------------------------------------------------


@dataclass
class GoodnessReport:
    is_good: bool
    offending: list = field(default_factory=list)

    def __bool__(self):
        return self.is_good


def is_good(sig: Signature, ctx: Context, t: Term, fuel: int = DEFAULT_FUEL) -> GoodnessReport:
    """Whether ``t`` lies in the image of the encoding.

    Synthesized families occur only as the domain of an object abstraction
    or a family product; synthesized proofs and variables of such a family
    occur only as the argument of an application expecting that family, and
    every argument such an application expects is one of those two.
    """
    chk = Checker(sig, None, fuel, lf=True)
    bad: list = []

    def p_typed_var(c, i):
        return _p_spine(c.type_of(i)) is not None

    def walk(t, c, pos):
        match t:
            case FamConst(n):
                if is_p_name(n) or is_c_name(n):
                    bad.append(pos)
            case ObjConst(n):
                if is_p_name(n) or is_c_name(n):
                    bad.append(pos)
            case Var(i, _):
                if i < len(c) and p_typed_var(c, i):
                    bad.append(pos)
            case KindPi(x, a, b) | FamPi(x, a, b) | Abs(x, a, b):
                if _p_spine(a) is not None:
                    if isinstance(t, KindPi):
                        bad.append(pos)
                    name, args = _p_spine(a)
                    if not _p_applied_ok(name, args):
                        bad.append(pos + (0,))
                    for k, arg in enumerate(args):
                        walk(arg, c, pos + (0, "arg", k))
                else:
                    walk(a, c, pos + (0,))
                walk(b, c.push(x, a), pos + (1,))
            case App(f, a):
                walk(f, c, pos + (0,))
                try:
                    fty = chk.infer_object(c, f)
                except CheckError:
                    bad.append(pos)
                    fty = None
                expects_p = isinstance(fty, FamPi) and _p_spine(fty.dom) is not None
                cs = _c_spine(a)
                is_guard = isinstance(a, Var) and a.index < len(c) and p_typed_var(c, a.index)
                if cs is not None:
                    name, args = cs
                    if not expects_p or not _c_applied_ok(name, args, sig):
                        bad.append(pos + (1,))
                    for k, arg in enumerate(args):
                        walk(arg, c, pos + (1, "arg", k))
                elif is_guard:
                    if not expects_p:
                        bad.append(pos + (1,))
                else:
                    if expects_p:
                        bad.append(pos + (1,))
                    walk(a, c, pos + (1,))
            case FamApp(f, a):
                walk(f, c, pos + (0,))
                walk(a, c, pos + (1,))
            case _:
                for k, kid in enumerate(t.kids):
                    walk(kid, c, pos + (k,))

    walk(t, ctx, ())
    return GoodnessReport(not bad, bad)


def _p_applied_ok(name, args):
    return len(args) >= 2 and isinstance(args[-2], Abs) and args[-2].body == Var(0)


def _c_applied_ok(name, args, sig):
    ty = sig.get(name)
    if ty is None:
        return False
    arity = 0
    while isinstance(ty, FamPi):
        arity += 1
        ty = ty.body
    return len(args) == arity and isinstance(args[-2], Abs) and args[-2].body == Var(0)


def is_good_judgement(sig: Signature, ctx: Context, subject: Term, classifier: Term) -> GoodnessReport:
    bad = []
    base = Signature()
    for d in sig:
        if not (is_p_name(d.name) or is_c_name(d.name)):
            r = is_good(base, Context(), d.classifier)
            bad += [(d.name,) + p for p in r.offending]
        base = base.extend(d.name, d.classifier)
    c = Context()
    for name, ty in ctx:
        if _p_spine(ty) is not None:
            bad.append(("context", name))
        else:
            bad += [("context", name) + p for p in is_good(sig, c, ty).offending]
        c = c.push(name, ty)
    bad += [("subject",) + p for p in is_good(sig, ctx, subject).offending]
    bad += [("classifier",) + p for p in is_good(sig, ctx, classifier).offending]
    return GoodnessReport(not bad, bad)


# -- whole files --------------------------------------------------------------------------------


def translate_source(source, oracles=None, fuel: int = DEFAULT_FUEL):
    """Encode a checked LLFP file into a list of LF items.

    Every item must check (items marked as expected failures must fail and
    are dropped).  The synthesized constants are emitted just before the
    first item needing them, and the result is re-checked in LF.
    """
    from .kernel import run_directives
    from .parser import CheckItem, DeclItem, NormalizeItem, PredItem

    reports = run_directives(source, oracles, fuel)
    for r in reports:
        if not r.as_expected:
            where = f"line {r.item.line}"
            raise CheckError(r.error.code if r.error else "unexpected-success", f"{where}: {r.error or 'expected failure did not occur'}")
    state = EncodingState()
    enc = Encoder(state, fuel)
    out = []

    def flush():
        for name in state.take_created():
            if is_p_name(name) or is_c_name(name):
                out.append(DeclItem(name, state.lookup(name), 0, 0))

    for item in source.items:
        if item.expect_fail or isinstance(item, PredItem):
            continue
        match item:
            case DeclItem(name, cls):
                lf_cls = enc.encode(cls)
                flush()
                state.add(name, lf_cls)
                state.take_created()
                out.append(DeclItem(name, lf_cls, item.line, item.col))
            case CheckItem(ctx, subject, cls):
                lctx = enc.context(ctx)
                scope = (VAR,) * len(ctx)
                new = CheckItem(lctx, enc.encode(subject, scope), enc.encode(cls, scope), item.line, item.col, item.form)
                flush()
                out.append(new)
            case NormalizeItem(term):
                new = NormalizeItem(enc.encode(term), item.line, item.col)
                flush()
                out.append(new)
    from .parser import SourceFile

    lf_src = SourceFile(out)
    for r in run_directives(lf_src, None, fuel, lf=True):
        if not r.ok:
            raise InvariantViolation(f"LF re-check failed at line {r.item.line}: {r.error}")
    return lf_src


def decode_source(source):
    """Invert :func:`translate_source`: erase synthesized constants, decode the rest."""
    from .parser import CheckItem, DeclItem, NormalizeItem, PredItem, SourceFile

    dec = Decoder()
    out = []
    preds = []
    for item in source.items:
        match item:
            case DeclItem(name, cls):
                if is_p_name(name) or is_c_name(name):
                    p = pred_of(name)
                    if p not in preds:
                        preds.append(p)
                        out.append(PredItem(p, item.line, item.col))
                    continue
                out.append(DeclItem(name, dec.decode(cls), item.line, item.col, item.expect_fail))
            case CheckItem(ctx, subject, cls):
                dctx = dec.context(ctx)
                scope = (VAR,) * len(ctx)
                out.append(
                    CheckItem(dctx, dec.decode(subject, scope), dec.decode(cls, scope), item.line, item.col, item.form, item.expect_fail)
                )
            case NormalizeItem(term):
                out.append(NormalizeItem(dec.decode(term), item.line, item.col, item.expect_fail))
            case _:
                out.append(item)
    return SourceFile(out)
