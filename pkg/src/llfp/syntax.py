"""Abstract syntax of LLFP: kinds, families and objects in one stratified tree.

Variables are de Bruijn indices; binder and variable names are kept only as
printing hints and never take part in equality or hashing, so ``==`` on terms
is alpha-equivalence.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))

KIND, FAMILY, OBJECT = "kind", "family", "object"


class Term:
    """Base class of every syntax node."""

    __slots__ = ()
    level: str = ""

    @property
    def kids(self) -> tuple:
        return ()

    def rebuild(self, kids) -> "Term":
        return self


def _hint():
    return field(default="x", compare=False)


@dataclass(frozen=True, slots=True)
class Type(Term):
    level = KIND

    def __repr__(self):
        return "Type"


@dataclass(frozen=True, slots=True)
class KindPi(Term):
    name: str = field(compare=False)
    dom: Term
    body: Term
    level = KIND

    @property
    def kids(self):
        return (self.dom, self.body)

    def rebuild(self, kids):
        return KindPi(self.name, *kids)


@dataclass(frozen=True, slots=True)
class FamConst(Term):
    name: str
    level = FAMILY


@dataclass(frozen=True, slots=True)
class FamPi(Term):
    name: str = field(compare=False)
    dom: Term
    body: Term
    level = FAMILY

    @property
    def kids(self):
        return (self.dom, self.body)

    def rebuild(self, kids):
        return FamPi(self.name, *kids)


@dataclass(frozen=True, slots=True)
class FamApp(Term):
    fam: Term
    arg: Term
    level = FAMILY

    @property
    def kids(self):
        return (self.fam, self.arg)

    def rebuild(self, kids):
        return FamApp(*kids)


@dataclass(frozen=True, slots=True)
class LockTy(Term):
    pred: str
    witness: Term
    witness_ty: Term
    body: Term
    level = FAMILY

    @property
    def kids(self):
        return (self.witness, self.witness_ty, self.body)

    def rebuild(self, kids):
        return LockTy(self.pred, *kids)


@dataclass(frozen=True, slots=True)
class ObjConst(Term):
    name: str
    level = OBJECT


@dataclass(frozen=True, slots=True)
class Var(Term):
    index: int
    name: str = _hint()
    level = OBJECT


@dataclass(frozen=True, slots=True)
class Abs(Term):
    name: str = field(compare=False)
    dom: Term
    body: Term
    level = OBJECT

    @property
    def kids(self):
        return (self.dom, self.body)

    def rebuild(self, kids):
        return Abs(self.name, *kids)


@dataclass(frozen=True, slots=True)
class App(Term):
    fun: Term
    arg: Term
    level = OBJECT

    @property
    def kids(self):
        return (self.fun, self.arg)

    def rebuild(self, kids):
        return App(*kids)


@dataclass(frozen=True, slots=True)
class Lock(Term):
    pred: str
    witness: Term
    witness_ty: Term
    body: Term
    level = OBJECT

    @property
    def kids(self):
        return (self.witness, self.witness_ty, self.body)

    def rebuild(self, kids):
        return Lock(self.pred, *kids)


@dataclass(frozen=True, slots=True)
class Unlock(Term):
    pred: str
    witness: Term
    witness_ty: Term
    body: Term
    level = OBJECT

    @property
    def kids(self):
        return (self.witness, self.witness_ty, self.body)

    def rebuild(self, kids):
        return Unlock(self.pred, *kids)


TYPE = Type()
BINDERS = (KindPi, FamPi, Abs)
LOCKS = (LockTy, Lock, Unlock)


def binds(t: Term, i: int) -> int:
    """Number of binders child ``i`` of ``t`` sits under (0 or 1)."""
    return 1 if i == 1 and isinstance(t, BINDERS) else 0


# -- de Bruijn plumbing ------------------------------------------------------


def shift(t: Term, d: int, cutoff: int = 0) -> Term:
    """Add ``d`` to every free index ``>= cutoff``."""
    if d == 0:
        return t
    return _shift(t, d, cutoff)


def _shift(t, d, c):
    match t:
        case Var(i, n):
            return Var(i + d, n) if i >= c else t
        case ObjConst() | FamConst() | Type():
            return t
        case KindPi(n, a, b):
            return KindPi(n, _shift(a, d, c), _shift(b, d, c + 1))
        case FamPi(n, a, b):
            return FamPi(n, _shift(a, d, c), _shift(b, d, c + 1))
        case Abs(n, a, b):
            return Abs(n, _shift(a, d, c), _shift(b, d, c + 1))
        case App(f, a):
            return App(_shift(f, d, c), _shift(a, d, c))
        case FamApp(f, a):
            return FamApp(_shift(f, d, c), _shift(a, d, c))
        case _:
            return t.rebuild([_shift(k, d, c) for k in t.kids])


def subst(body: Term, x: int, replacement: Term) -> Term:
    """Capture-avoiding ``body[replacement/x]``.

    ``replacement`` lives in the same context as ``body``; the binder of ``x``
    is not removed, so other indices are left untouched.
    """
    return _subst(body, x, replacement, 0)


def _subst(t, x, u, depth):
    match t:
        case Var(i, _):
            return shift(u, depth) if i == x + depth else t
        case ObjConst() | FamConst() | Type():
            return t
        case App(f, a):
            return App(_subst(f, x, u, depth), _subst(a, x, u, depth))
        case _:
            return t.rebuild(
                [_subst(k, x, u, depth + binds(t, i)) for i, k in enumerate(t.kids)]
            )


def instantiate(body: Term, arg: Term) -> Term:
    """Substitute ``arg`` for the variable bound just outside ``body`` and drop that binder."""
    return _inst(body, arg, 0)


def _inst(t, u, depth):
    match t:
        case Var(i, n):
            if i == depth:
                return shift(u, depth)
            return Var(i - 1, n) if i > depth else t
        case ObjConst() | FamConst() | Type():
            return t
        case App(f, a):
            return App(_inst(f, u, depth), _inst(a, u, depth))
        case FamApp(f, a):
            return FamApp(_inst(f, u, depth), _inst(a, u, depth))
        case _:
            return t.rebuild(
                [_inst(k, u, depth + binds(t, i)) for i, k in enumerate(t.kids)]
            )


def free_vars(t: Term) -> frozenset[int]:
    """Indices (relative to ``t``'s context) of the variables occurring free in ``t``."""
    out: set[int] = set()
    _fv(t, 0, out)
    return frozenset(out)


def _fv(t, depth, out):
    if isinstance(t, Var):
        if t.index >= depth:
            out.add(t.index - depth)
        return
    for i, k in enumerate(t.kids):
        _fv(k, depth + binds(t, i), out)


def mentions(t: Term, x: int) -> bool:
    return x in free_vars(t)


def alpha_eq(t1: Term, t2: Term) -> bool:
    return t1 == t2


def constants(t: Term) -> set[str]:
    out = set()
    stack = [t]
    while stack:
        s = stack.pop()
        if isinstance(s, (ObjConst, FamConst)):
            out.add(s.name)
        stack.extend(s.kids)
    return out


def subterms(t: Term, pos: tuple = ()):
    """Yield ``(position, subterm, binder_depth)`` in pre-order."""
    stack = [(pos, t, 0)]
    while stack:
        p, s, d = stack.pop()
        yield p, s, d
        kids = s.kids
        for i in range(len(kids) - 1, -1, -1):
            stack.append((p + (i,), kids[i], d + binds(s, i)))


def subterm_at(t: Term, pos: tuple) -> Term:
    for i in pos:
        t = t.kids[i]
    return t


def replace_at(t: Term, pos: tuple, new: Term) -> Term:
    if not pos:
        return new
    kids = list(t.kids)
    kids[pos[0]] = replace_at(kids[pos[0]], pos[1:], new)
    return t.rebuild(kids)


def spine(t: Term) -> tuple[Term, list[Term]]:
    """Split an application (object or family) into head and arguments."""
    args = []
    while isinstance(t, (App, FamApp)):
        args.append(t.kids[1])
        t = t.kids[0]
    args.reverse()
    return t, args


def apply(head: Term, *args: Term) -> Term:
    family = head.level == FAMILY
    for a in args:
        head = FamApp(head, a) if family else App(head, a)
    return head


def arrow(dom: Term, cod: Term) -> Term:
    """Non-dependent Pi; ``cod`` is given in the outer context."""
    if cod.level == KIND:
        return KindPi("_", dom, shift(cod, 1))
    return FamPi("_", dom, shift(cod, 1))


def size(t: Term) -> int:
    return sum(1 for _ in subterms(t))


def depth(t: Term) -> int:
    kids = t.kids
    return 1 + max((depth(k) for k in kids), default=0)


# -- stratification ------------------------------------------------------------


class StratificationError(ValueError):
    pass


_SHAPE = {
    KindPi: (FAMILY, KIND),
    FamPi: (FAMILY, FAMILY),
    FamApp: (FAMILY, OBJECT),
    LockTy: (OBJECT, FAMILY, FAMILY),
    Abs: (FAMILY, OBJECT),
    App: (OBJECT, OBJECT),
    Lock: (OBJECT, FAMILY, OBJECT),
    Unlock: (OBJECT, FAMILY, OBJECT),
}


def stratification_errors(t: Term, pos: tuple = ()) -> list[tuple]:
    """Positions where a child sits at the wrong level of the grammar."""
    bad = []
    for p, s, _ in subterms(t, pos):
        want = _SHAPE.get(type(s))
        if want is None:
            continue
        for i, (k, lvl) in enumerate(zip(s.kids, want)):
            if k.level != lvl:
                bad.append(p + (i,))
    return bad


def check_stratified(t: Term, level: str | None = None) -> None:
    if level is not None and t.level != level:
        raise StratificationError(f"expected a {level}, found a {t.level}")
    bad = stratification_errors(t)
    if bad:
        raise StratificationError(f"ill-stratified term at position {bad[0]}")


# -- signatures, contexts, judgements -----------------------------------------


@dataclass(frozen=True, slots=True)
class Decl:
    name: str
    classifier: Term

    @property
    def is_family(self) -> bool:
        return self.classifier.level == KIND


class Signature:
    """Ordered constant declarations; immutable, ``extend`` returns a new one."""

    __slots__ = ("decls", "_index")

    def __init__(self, decls=()):
        self.decls: tuple[Decl, ...] = tuple(decls)
        self._index = {}
        for d in self.decls:
            if d.name in self._index:
                raise ValueError(f"duplicate declaration of {d.name}")
            self._index[d.name] = d

    def extend(self, name: str, classifier: Term) -> "Signature":
        if name in self._index:
            raise ValueError(f"duplicate declaration of {name}")
        return Signature(self.decls + (Decl(name, classifier),))

    def __contains__(self, name):
        return name in self._index

    def __getitem__(self, name) -> Term:
        return self._index[name].classifier

    def get(self, name):
        d = self._index.get(name)
        return None if d is None else d.classifier

    def __iter__(self):
        return iter(self.decls)

    def __len__(self):
        return len(self.decls)

    def __eq__(self, other):
        return isinstance(other, Signature) and self.decls == other.decls

    def __hash__(self):
        return hash(self.decls)

    def __repr__(self):
        return f"Signature({[d.name for d in self.decls]})"

    def known_names(self) -> dict[str, str]:
        return {d.name: (FAMILY if d.is_family else OBJECT) for d in self.decls}


class Context:
    """Variable bindings, outermost first; each type lives in the context of its prefix."""

    __slots__ = ("bindings",)

    def __init__(self, bindings=()):
        self.bindings: tuple[tuple[str, Term], ...] = tuple(bindings)

    def push(self, name: str, ty: Term) -> "Context":
        return Context(self.bindings + ((name, ty),))

    def type_of(self, index: int) -> Term:
        _, ty = self.bindings[len(self.bindings) - 1 - index]
        return shift(ty, index + 1)

    def name_of(self, index: int) -> str:
        return self.bindings[len(self.bindings) - 1 - index][0]

    def names(self) -> list[str]:
        return [n for n, _ in self.bindings]

    def prefix(self, n: int) -> "Context":
        return Context(self.bindings[:n])

    def __len__(self):
        return len(self.bindings)

    def __iter__(self):
        return iter(self.bindings)

    def __eq__(self, other):
        return isinstance(other, Context) and [t for _, t in self.bindings] == [
            t for _, t in other.bindings
        ]

    def __hash__(self):
        return hash(tuple(t for _, t in self.bindings))

    def __repr__(self):
        return f"Context({self.names()})"


JUDGEMENT_FORMS = ("sig-ok", "ctx-ok", "kind-ok", "family-kinded", "object-typed")


@dataclass(frozen=True)
class Judgement:
    signature: Signature
    context: Context
    subject: Term | None = None
    classifier: Term | None = None
    form: str = "object-typed"

    def __post_init__(self):
        if self.form not in JUDGEMENT_FORMS:
            raise ValueError(f"unknown judgement form {self.form!r}")
        needs_subject = self.form in ("kind-ok", "family-kinded", "object-typed")
        needs_classifier = self.form in ("family-kinded", "object-typed")
        if needs_subject != (self.subject is not None):
            raise ValueError(f"form {self.form} and subject presence disagree")
        if needs_classifier != (self.classifier is not None):
            raise ValueError(f"form {self.form} and classifier presence disagree")
