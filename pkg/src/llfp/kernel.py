"""The LLFP type checker.

Synthesis is syntax directed.  Conversion is folded into definitional
equality tests at application, unlock and directive boundaries.  Locks push a
:class:`GuardFrame`; an unlock inside the body of a lock with the same
predicate and convertible annotations is discharged against that frame
without consulting any oracle.  Every other unlock is a top unlock and is
sent to the oracle environment.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .reduction import DEFAULT_FUEL, FuelExhausted, def_eq, normalize
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
    StratificationError,
    Term,
    Type,
    Unlock,
    Var,
    check_stratified,
    free_vars,
    instantiate,
    shift,
)


class CheckError(Exception):
    """A structured type error; ``code`` names the error class."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class GuardFrame:
    pred: str
    witness: Term
    witness_ty: Term
    depth: int  # context length when the frame was pushed


@dataclass(frozen=True)
class TraceEntry:
    pred: str
    context: Context
    witness: Term
    witness_ty: Term
    verdict: object


@dataclass
class CheckReport:
    ok: bool
    classifier: Term | None = None
    value: Term | None = None
    trace: list = field(default_factory=list)
    error: CheckError | None = None
    item: object = None

    @property
    def outcome(self) -> str:
        return "ok" if self.ok else "error"

    @property
    def expect_fail(self):
        return getattr(self.item, "expect_fail", None)

    @property
    def as_expected(self) -> bool:
        want = self.expect_fail
        if want is None:
            return self.ok
        if self.ok:
            return False
        return want in ("error", "any") or self.error.code == want


def _show(t, ctx=None):
    from .parser import print_term

    try:
        return print_term(t, ctx.names() if ctx is not None else ())
    except Exception:
        return repr(t)


class Checker:
    """Checks terms against a signature.

    ``oracles`` is any object with ``registered(pred)`` and
    ``query(pred, signature, context, witness, witness_ty)``.  With ``lf=True``
    the checker is plain LF: every lock construct is rejected.
    """

    def __init__(self, signature: Signature = Signature(), oracles=None, fuel: int = DEFAULT_FUEL, lf: bool = False):
        self.signature = signature
        self.oracles = oracles
        self.fuel = fuel
        self.lf = lf
        self.trace: list[TraceEntry] = []

    # -- equality ----------------------------------------------------------

    def conv(self, a: Term, b: Term) -> bool:
        try:
            return def_eq(a, b, self.fuel)
        except FuelExhausted as exc:
            raise CheckError("fuel-exhausted", str(exc)) from exc

    def nf(self, t: Term) -> Term:
        try:
            return normalize(t, self.fuel)
        except FuelExhausted as exc:
            raise CheckError("fuel-exhausted", str(exc)) from exc

    # -- signatures and contexts ---------------------------------------------

    def check_signature(self, decls) -> Signature:
        """Validate declarations in order; on success ``self.signature`` is the result."""
        sig = Signature()
        for d in decls:
            if d.name in sig:
                raise CheckError("duplicate-name", f"{d.name} is declared twice")
            self.signature = sig
            self.check_decl(d.name, d.classifier)
            sig = sig.extend(d.name, d.classifier)
        self.signature = sig
        return sig

    def check_decl(self, name: str, classifier: Term) -> None:
        if name in self.signature:
            raise CheckError("duplicate-name", f"{name} is declared twice")
        self._stratified(classifier)
        if classifier.level == KIND:
            self.check_kind(Context(), classifier)
        elif classifier.level == FAMILY:
            self.check_type(Context(), classifier)
        else:
            raise CheckError("stratification", f"classifier of {name} is an object")

    def add_decl(self, name: str, classifier: Term) -> None:
        self.check_decl(name, classifier)
        self.signature = self.signature.extend(name, classifier)

    def check_context(self, ctx: Context) -> None:
        seen = set()
        for i, (name, ty) in enumerate(ctx):
            if name in seen:
                raise CheckError("duplicate-name", f"variable {name} is bound twice")
            seen.add(name)
            self._stratified(ty)
            self.check_type(ctx.prefix(i), ty)

    def _stratified(self, t):
        try:
            check_stratified(t)
        except StratificationError as exc:
            raise CheckError("stratification", str(exc)) from exc

    # -- entry points --------------------------------------------------------

    def infer(self, ctx: Context, t: Term, guards=()) -> Term:
        self._stratified(t)
        if t.level == KIND:
            self.check_kind(ctx, t, guards)
            return None
        if t.level == FAMILY:
            return self.infer_family(ctx, t, guards)
        return self.infer_object(ctx, t, guards)

    def check(self, ctx: Context, subject: Term, classifier: Term) -> Term:
        """Check ``subject : classifier``; returns the synthesized classifier."""
        self._stratified(subject)
        self._stratified(classifier)
        if classifier.level == KIND:
            self.check_kind(ctx, classifier)
            got = self.infer_family(ctx, subject)
        elif classifier.level == FAMILY:
            self.check_type(ctx, classifier)
            if subject.level != OBJECT:
                raise CheckError("stratification", "a family classifier needs an object subject")
            got = self.infer_object(ctx, subject)
        else:
            raise CheckError("stratification", "classifier must be a kind or a family")
        if not self.conv(got, classifier):
            raise CheckError(
                "type-mismatch",
                f"expected {_show(self.nf(classifier), ctx)}, inferred {_show(self.nf(got), ctx)}",
            )
        return got

    # -- kinds -----------------------------------------------------------------

    def check_kind(self, ctx: Context, k: Term, guards=()) -> None:
        match k:
            case Type():
                return
            case KindPi(x, dom, body):
                self.check_type(ctx, dom, guards)
                self.check_kind(ctx.push(x, dom), body, guards)
            case _:
                raise CheckError("stratification", f"{_show(k, ctx)} is not a kind")

    def check_type(self, ctx: Context, fam: Term, guards=()) -> None:
        k = self.infer_family(ctx, fam, guards)
        if k != TYPE:
            raise CheckError("kind-mismatch", f"{_show(fam, ctx)} has kind {_show(k, ctx)}, not Type")

    # -- families ----------------------------------------------------------------

    def infer_family(self, ctx: Context, fam: Term, guards=()) -> Term:
        match fam:
            case FamConst(name):
                k = self.signature.get(name)
                if k is None or k.level != KIND:
                    raise CheckError("unknown-constant", f"no family constant {name}")
                return k
            case FamPi(x, dom, body):
                self.check_type(ctx, dom, guards)
                self.check_type(ctx.push(x, dom), body, guards)
                return TYPE
            case FamApp(f, arg):
                k = self.infer_family(ctx, f, guards)
                if not isinstance(k, KindPi):
                    raise CheckError("not-a-pi", f"{_show(f, ctx)} has kind {_show(k, ctx)}, not a product")
                self._check_arg(ctx, arg, k.dom, guards)
                return instantiate(k.body, arg)
            case LockTy(body=body):
                frame = self._lock_annotations(ctx, fam, guards)
                self.check_type(ctx, body, guards + (frame,))
                return TYPE
            case Var() | ObjConst():
                raise CheckError("unknown-constant", f"{_show(fam, ctx)} is not a family")
        raise CheckError("stratification", f"{_show(fam, ctx)} is not a family")

    # -- objects -------------------------------------------------------------------

    def infer_object(self, ctx: Context, m: Term, guards=()) -> Term:
        match m:
            case ObjConst(name):
                ty = self.signature.get(name)
                if ty is None or ty.level != FAMILY:
                    raise CheckError("unknown-constant", f"no object constant {name}")
                return ty
            case Var(i, _):
                if i >= len(ctx):
                    raise CheckError("unbound-variable", f"variable #{i} is not in scope")
                return ctx.type_of(i)
            case Abs(x, dom, body):
                self.check_type(ctx, dom, guards)
                return FamPi(x, dom, self.infer_object(ctx.push(x, dom), body, guards))
            case App(f, arg):
                fty = self.infer_object(ctx, f, guards)
                if not isinstance(fty, FamPi):
                    raise CheckError("not-a-pi", f"{_show(f, ctx)} has type {_show(fty, ctx)}, not a product")
                self._check_arg(ctx, arg, fty.dom, guards)
                return instantiate(fty.body, arg)
            case Lock(pred, w, wty, body):
                frame = self._lock_annotations(ctx, m, guards)
                rho = self.infer_object(ctx, body, guards + (frame,))
                return LockTy(pred, w, wty, rho)
            case Unlock():
                return self.discharge_unlock(ctx, m, guards)
        raise CheckError("stratification", f"{_show(m, ctx)} is not an object")

    def _check_arg(self, ctx, arg, dom, guards):
        got = self.infer_object(ctx, arg, guards)
        if not self.conv(got, dom):
            raise CheckError(
                "type-mismatch",
                f"argument {_show(arg, ctx)} has type {_show(self.nf(got), ctx)}, expected {_show(self.nf(dom), ctx)}",
            )

    def _require_pred(self, pred):
        if self.lf:
            raise CheckError("stratification", f"lock construct on {pred} is not LF")
        if self.oracles is None or not self.oracles.registered(pred):
            raise CheckError("unknown-predicate", f"predicate {pred} is not registered")

    def _lock_annotations(self, ctx, t, guards) -> GuardFrame:
        # annotations are checked against the enclosing guards only
        self._require_pred(t.pred)
        self.check_type(ctx, t.witness_ty, guards)
        self._check_arg(ctx, t.witness, t.witness_ty, guards)
        return GuardFrame(t.pred, t.witness, t.witness_ty, len(ctx))

    # -- unlock -----------------------------------------------------------------------

    def discharge_unlock(self, ctx: Context, u: Unlock, guards=()) -> Term:
        self._require_pred(u.pred)
        ty = self.infer_object(ctx, u.body, guards)
        if not isinstance(ty, LockTy):
            raise CheckError("type-mismatch", f"{_show(u.body, ctx)} has type {_show(ty, ctx)}, not a lock type")
        if ty.pred != u.pred:
            raise CheckError("annotation-mismatch", f"unlock on {u.pred} applied to a {ty.pred} lock")
        self.check_type(ctx, u.witness_ty, guards)
        self._check_arg(ctx, u.witness, u.witness_ty, guards)
        if not (self.conv(ty.witness, u.witness) and self.conv(ty.witness_ty, u.witness_ty)):
            raise CheckError(
                "annotation-mismatch",
                f"unlock annotations [{_show(u.witness, ctx)}, {_show(u.witness_ty, ctx)}] do not match "
                f"lock annotations [{_show(ty.witness, ctx)}, {_show(ty.witness_ty, ctx)}]",
            )
        if self.find_guard(ctx, u, guards) is not None:
            return ty.body
        verdict = self.oracles.query(u.pred, self.signature, ctx, u.witness, u.witness_ty)
        self.trace.append(TraceEntry(u.pred, ctx, u.witness, u.witness_ty, verdict))
        match verdict.kind:
            case "true":
                return ty.body
            case "false":
                raise CheckError(
                    "predicate-false",
                    f"{u.pred} rejects {_show(u.witness, ctx)} : {_show(u.witness_ty, ctx)}",
                )
            case _:
                raise CheckError(
                    "verification-pending",
                    f"{u.pred} gave no verdict on {_show(u.witness, ctx)} ({verdict.reason})",
                )

    def find_guard(self, ctx: Context, u: Unlock, guards) -> GuardFrame | None:
        """Innermost frame able to discharge ``u``, or ``None``.

        A frame qualifies when its predicate is the unlock's, its annotations
        are convertible with the unlock's, and the unlocked term mentions no
        variable bound inside that lock (it must make sense outside it).
        """
        d = len(ctx)
        for frame in reversed(guards):
            if frame.pred != u.pred:
                continue
            gap = d - frame.depth
            if any(i < gap for t in (u.body, u.witness, u.witness_ty) for i in free_vars(t)):
                continue
            if self.conv(shift(frame.witness, gap), u.witness) and self.conv(
                shift(frame.witness_ty, gap), u.witness_ty
            ):
                return frame
        return None


# -- directives ---------------------------------------------------------------------


def run_directives(source, oracles=None, fuel: int = DEFAULT_FUEL, lf: bool = False, signature=None) -> list[CheckReport]:
    """Run every item of a parsed file in order, one report per item."""
    from .parser import CheckItem, DeclItem, NormalizeItem, PredItem

    checker = Checker(signature or Signature(), oracles, fuel, lf)
    reports = []
    for item in source.items:
        checker.trace = []
        rep = CheckReport(False, item=item)
        try:
            match item:
                case DeclItem(name, cls):
                    checker.add_decl(name, cls)
                    rep.classifier = cls
                case PredItem(name):
                    if lf:
                        raise CheckError("stratification", f"predicate declaration {name} is not LF")
                    if hasattr(oracles, "declare"):
                        oracles.declare(name)
                case CheckItem(ctx, subject, cls):
                    checker.check_context(ctx)
                    rep.classifier = checker.check(ctx, subject, cls)
                case NormalizeItem(term):
                    rep.classifier = checker.infer(Context(), term)
                    rep.value = checker.nf(term)
            rep.ok = True
        except CheckError as exc:
            rep.error = exc
        except RecursionError:
            rep.error = CheckError("fuel-exhausted", "term too deep")
        rep.trace = list(checker.trace)
        reports.append(rep)
    return reports
