"""Plain LF: the shared checker with every lock construct disabled."""

from __future__ import annotations

from .kernel import Checker
from .reduction import DEFAULT_FUEL, def_eq
from .syntax import LOCKS, Context, Signature, StratificationError, Term, subterms


def lf_infer(sig: Signature, ctx: Context, t: Term, fuel: int = DEFAULT_FUEL) -> Term | None:
    """Classifier of ``t`` in LF (``None`` for a well-formed kind)."""
    return Checker(sig, None, fuel, lf=True).infer(ctx, t)


def lf_check(sig: Signature, ctx: Context, subject: Term, classifier: Term, fuel: int = DEFAULT_FUEL) -> Term:
    chk = Checker(sig, None, fuel, lf=True)
    chk.check_context(ctx)
    return chk.check(ctx, subject, classifier)


def lf_check_signature(sig: Signature, fuel: int = DEFAULT_FUEL) -> Signature:
    return Checker(Signature(), None, fuel, lf=True).check_signature(sig)


def lf_def_eq(t1: Term, t2: Term, fuel: int = DEFAULT_FUEL) -> bool:
    for t in (t1, t2):
        for _, s, _ in subterms(t):
            if isinstance(s, LOCKS):
                raise StratificationError("lock construct in an LF term")
    return def_eq(t1, t2, fuel)
