"""One-step beta/L reduction, leftmost-outermost normalization, definitional equality."""

from __future__ import annotations

from .syntax import (
    Abs,
    App,
    FamApp,
    FamPi,
    KindPi,
    Lock,
    LockTy,
    Term,
    Unlock,
    instantiate,
    replace_at,
    subterm_at,
    subterms,
)

DEFAULT_FUEL = 100_000


class FuelExhausted(Exception):
    def __init__(self, fuel: int):
        super().__init__(f"normalization did not finish within {fuel} steps")
        self.fuel = fuel


class NotARedex(ValueError):
    pass


def is_redex(t: Term) -> bool:
    if isinstance(t, App):
        return isinstance(t.fun, Abs)
    if isinstance(t, Unlock):
        b = t.body
        return (
            isinstance(b, Lock)
            and b.pred == t.pred
            and b.witness == t.witness
            and b.witness_ty == t.witness_ty
        )
    return False


def contract(t: Term) -> Term:
    if isinstance(t, App) and isinstance(t.fun, Abs):
        return instantiate(t.fun.body, t.arg)
    if is_redex(t):
        return t.body.body
    raise NotARedex(f"{type(t).__name__} is not a redex")


def redexes(t: Term) -> list[tuple]:
    """Positions of all redexes, leftmost-outermost first."""
    return [p for p, s, _ in subterms(t) if is_redex(s)]


def step_at(t: Term, pos: tuple) -> Term:
    try:
        sub = subterm_at(t, pos)
    except (IndexError, AttributeError) as exc:
        raise NotARedex(f"no subterm at {pos}") from exc
    return replace_at(t, pos, contract(sub))


def step(t: Term) -> Term | None:
    """One leftmost-outermost step, or ``None`` when ``t`` is normal."""
    if is_redex(t):
        return contract(t)
    kids = t.kids
    for i, k in enumerate(kids):
        k2 = step(k)
        if k2 is not None:
            new = list(kids)
            new[i] = k2
            return t.rebuild(new)
    return None


def is_normal(t: Term) -> bool:
    if is_redex(t):
        return False
    return all(is_normal(k) for k in t.kids)


class _Fuel:
    __slots__ = ("left", "total", "used")

    def __init__(self, total):
        self.total = total
        self.left = total
        self.used = 0

    def burn(self):
        if self.left <= 0:
            raise FuelExhausted(self.total)
        self.left -= 1
        self.used += 1


def normalize(t: Term, fuel: int = DEFAULT_FUEL) -> Term:
    return normalize_counted(t, fuel)[0]


def normalize_counted(t: Term, fuel: int = DEFAULT_FUEL) -> tuple[Term, int]:
    """Normal form and number of contractions, reducing leftmost-outermost.

    The contraction sequence is exactly the one obtained by iterating
    :func:`step`, but without rescanning the whole term after every step.
    """
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    f = _Fuel(fuel)
    return _norm(t, f), f.used


def _norm(t, f):
    while True:
        match t:
            case App():
                fun = _until_abs(t.fun, f)
                if isinstance(fun, Abs):
                    f.burn()
                    t = instantiate(fun.body, t.arg)
                    continue
                return App(fun, _norm(t.arg, f))
            case Unlock():
                return _norm_unlock(t, f, _norm)
            case Abs(n, a, b):
                return Abs(n, _norm(a, f), _norm(b, f))
            case FamPi(n, a, b):
                return FamPi(n, _norm(a, f), _norm(b, f))
            case KindPi(n, a, b):
                return KindPi(n, _norm(a, f), _norm(b, f))
            case FamApp(a, b):
                return FamApp(_norm(a, f), _norm(b, f))
            case Lock() | LockTy():
                return t.rebuild([_norm(k, f) for k in t.kids])
            case _:
                return t


def _until_abs(t, f):
    """Reduce leftmost-outermost until ``t`` is an abstraction or normal."""
    while True:
        match t:
            case Abs():
                return t
            case App():
                fun = _until_abs(t.fun, f)
                if isinstance(fun, Abs):
                    f.burn()
                    t = instantiate(fun.body, t.arg)
                    continue
                return App(fun, _norm(t.arg, f))
            case Unlock():
                return _norm_unlock(t, f, _until_abs)
            case _:
                return _norm(t, f)


def _norm_unlock(t, f, then):
    # the root may become a redex after any inner step, so step one at a time
    while True:
        if is_redex(t):
            f.burn()
            return then(t.body.body, f)
        nxt = step(t)
        if nxt is None:
            return t
        f.burn()
        t = nxt


def def_eq(t1: Term, t2: Term, fuel: int = DEFAULT_FUEL) -> bool:
    """Definitional equality by normalize-and-compare."""
    if t1 == t2:
        return True
    if t1.level != t2.level:
        return False
    return normalize(t1, fuel) == normalize(t2, fuel)
