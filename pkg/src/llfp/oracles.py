"""External predicates: verdicts, the oracle registry, built-in predicates,
a line-oriented subprocess client, and a well-behavedness harness.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
import time
from dataclasses import dataclass, field

from .reduction import DEFAULT_FUEL, FuelExhausted, normalize, redexes, step_at
from .syntax import (
    TYPE,
    Abs,
    App,
    Context,
    FamConst,
    ObjConst,
    Signature,
    Term,
    Var,
    binds,
    constants,
    free_vars,
    shift,
    spine,
    subst,
)


@dataclass(frozen=True)
class Verdict:
    kind: str  # "true" | "false" | "unknown"
    reason: str | None = None

    def __post_init__(self):
        if self.kind not in ("true", "false", "unknown"):
            raise ValueError(f"bad verdict {self.kind!r}")
        if self.kind == "unknown" and self.reason not in ("timeout", "external-error", "fuel"):
            raise ValueError(f"unknown verdict needs a reason, got {self.reason!r}")

    def to_json(self) -> str:
        d = {"verdict": self.kind}
        if self.reason is not None:
            d["reason"] = self.reason
        return json.dumps(d, sort_keys=True)

    def __bool__(self):
        return self.kind == "true"


TRUE = Verdict("true")
FALSE = Verdict("false")


def unknown(reason: str) -> Verdict:
    return Verdict("unknown", reason)


def as_verdict(v) -> Verdict:
    if isinstance(v, Verdict):
        return v
    if v is None:
        return unknown("external-error")
    return TRUE if v else FALSE


class UnknownPredicate(KeyError):
    pass


@dataclass(frozen=True)
class OracleCall:
    pred: str
    context: Context
    witness: Term
    witness_ty: Term
    verdict: Verdict
    elapsed: float


class OracleEnv:
    """Registry of predicates.

    A procedure is called as ``proc(signature, context, witness, witness_ty)``
    and returns a :class:`Verdict` (or a bool).  Procedures marked ``inline``
    run in the calling thread; other in-process procedures run in a worker
    thread so that the timeout can be enforced.  Objects with a
    ``query_with_timeout`` method manage their own timeout.
    """

    def __init__(self, procs=None, timeout_ms: float = 5000, timeouts=None):
        self.procs: dict = dict(procs or {})
        self.timeout_ms = timeout_ms
        self.timeouts: dict = dict(timeouts or {})
        self.log: list[OracleCall] = []
        self._lock = threading.Lock()

    def register(self, name: str, proc, timeout_ms: float | None = None) -> "OracleEnv":
        self.procs[name] = proc
        if timeout_ms is not None:
            self.timeouts[name] = timeout_ms
        return self

    def declare(self, name: str) -> None:
        """Make ``name`` known without a decision procedure; queries answer Unknown."""
        if name not in self.procs:
            self.procs[name] = unbound

    def registered(self, name: str) -> bool:
        return name in self.procs

    def timeout_for(self, name: str) -> float:
        return self.timeouts.get(name, self.timeout_ms)

    def query(self, pred: str, sig: Signature, ctx: Context, witness: Term, witness_ty: Term) -> Verdict:
        if pred not in self.procs:
            raise UnknownPredicate(pred)
        proc = self.procs[pred]
        budget = self.timeout_for(pred)
        t0 = time.monotonic()
        if budget <= 0:
            v = unknown("timeout")
        elif hasattr(proc, "query_with_timeout"):
            v = proc.query_with_timeout(pred, sig, ctx, witness, witness_ty, budget / 1000)
        elif getattr(proc, "inline", False):
            v = _safe(proc, sig, ctx, witness, witness_ty)
        else:
            v = _threaded(proc, (sig, ctx, witness, witness_ty), budget / 1000)
        with self._lock:
            self.log.append(OracleCall(pred, ctx, witness, witness_ty, v, time.monotonic() - t0))
        return v

    def close(self):
        for p in self.procs.values():
            if hasattr(p, "close"):
                p.close()


def _safe(proc, *args) -> Verdict:
    try:
        return as_verdict(proc(*args))
    except Exception:
        return unknown("external-error")


def _threaded(proc, args, timeout: float) -> Verdict:
    box = []
    th = threading.Thread(target=lambda: box.append(_safe(proc, *args)), daemon=True)
    th.start()
    th.join(timeout)
    return box[0] if box else unknown("timeout")


# -- built-in predicates -------------------------------------------------------------


def builtin(fn):
    fn.inline = True
    return fn


def _head_name(t):
    h, args = spine(t)
    return (h.name if isinstance(h, (ObjConst, FamConst)) else None), args


@builtin
def val_oracle(sig, ctx, n, sigma, fuel=DEFAULT_FUEL):
    """True iff ``n`` normalizes to an abstraction ``lam M`` or a value ``free i``."""
    try:
        nf = normalize(n, fuel)
    except FuelExhausted:
        return unknown("fuel")
    head, args = _head_name(nf)
    return as_verdict(head in ("lam", "free") and len(args) == 1)


@builtin
def qf_oracle(sig, ctx, n, sigma, fuel=DEFAULT_FUEL):
    """True iff ``n : bool`` is closed and has no ``forall`` in its normal form."""
    try:
        ty = normalize(sigma, fuel)
        nf = normalize(n, fuel)
    except FuelExhausted:
        return unknown("fuel")
    if ty != FamConst("bool") or free_vars(nf):
        return FALSE
    return as_verdict("forall" not in constants(nf))


@builtin
def pset_oracle(sig, ctx, n, sigma, fuel=DEFAULT_FUEL):
    """True iff ``n`` is ``mkargs x e`` with ``x`` a location constant not occurring in closed ``e``."""
    try:
        nf = normalize(n, fuel)
    except FuelExhausted:
        return unknown("fuel")
    head, args = _head_name(nf)
    if head != "mkargs" or len(args) != 2:
        return FALSE
    x, e = args
    if not isinstance(x, ObjConst) or free_vars(e):
        return FALSE
    return as_verdict(x.name not in constants(e))


MARKER = ObjConst("$x")


@builtin
def fitch_oracle(sig, ctx, n, sigma, fuel=10_000):
    """Accept a pair ``\\u. u x y`` whose combined proof normalizes and whose
    free judgement variables all sit under ``delta``.

    The combination feeds ``y`` a placeholder generic proof, then replaces
    each downgrade ``delta A placeholder`` (and any bare placeholder) by ``x``.
    """
    try:
        nf = normalize(n, fuel)
    except FuelExhausted:
        return FALSE
    pair = _church_pair(nf)
    if pair is None:
        return FALSE
    x, y = pair
    try:
        combined = normalize(App(y, MARKER), fuel)
        combined = normalize(_plug(combined, x, 0), fuel)
    except FuelExhausted:
        return FALSE
    return as_verdict(_judgements_guarded(combined, ctx))


def _church_pair(t):
    if not isinstance(t, Abs):
        return None
    body = t.body
    if not (isinstance(body, App) and isinstance(body.fun, App) and body.fun.fun == Var(0)):
        return None
    x, y = body.fun.arg, body.arg
    if 0 in free_vars(x) or 0 in free_vars(y):
        return None
    return shift(x, -1, 0), shift(y, -1, 0)


def _plug(t, x, depth):
    head, args = spine(t)
    if isinstance(head, ObjConst) and head.name == "delta" and len(args) == 2 and args[1] == MARKER:
        return shift(x, depth)
    if t == MARKER:
        return shift(x, depth)
    return t.rebuild([_plug(k, x, depth + binds(t, i)) for i, k in enumerate(t.kids)])


def _judgement_var(ctx, index):
    if index >= len(ctx):
        return False
    head, _ = spine(ctx.type_of(index))
    return isinstance(head, FamConst) and head.name in ("T", "V")


def _judgements_guarded(t, ctx, depth=0):
    head, args = spine(t)
    if isinstance(head, ObjConst) and head.name == "delta":
        return True
    if isinstance(t, Var):
        return not (t.index >= depth and _judgement_var(ctx, t.index - depth))
    return all(_judgements_guarded(k, ctx, depth + binds(t, i)) for i, k in enumerate(t.kids))


BUILTINS = {"Val": val_oracle, "QF": qf_oracle, "Pset": pset_oracle, "Fitch": fitch_oracle}


def evaluate_builtin(name, sig, ctx, n, sigma) -> Verdict:
    return as_verdict(BUILTINS[name](sig, ctx, n, sigma))


@builtin
def unbound(sig, ctx, n, sigma):
    return unknown("external-error")


@builtin
def always_true(sig, ctx, n, sigma):
    return TRUE


def default_env(timeout_ms: float = 5000, extra=None) -> OracleEnv:
    env = OracleEnv(BUILTINS, timeout_ms)
    for k, v in (extra or {}).items():
        env.register(k, v)
    return env


# -- subprocess oracles -----------------------------------------------------------------


class ExternalOracle:
    """A persistent child process answering one JSON request per line."""

    def __init__(self, argv):
        self.argv = list(argv) if not isinstance(argv, str) else [argv]
        self.proc = None
        self.lines: queue.Queue | None = None

    def start(self):
        if self.proc is not None and self.proc.poll() is None:
            return
        self.proc = subprocess.Popen(
            self.argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            bufsize=1,
        )
        self.lines = queue.Queue()
        threading.Thread(target=self._pump, args=(self.proc, self.lines), daemon=True).start()

    @staticmethod
    def _pump(proc, out):
        for line in proc.stdout:
            out.put(line)
        out.put(None)

    def request(self, pred, sig, ctx, n, sigma) -> str:
        from .parser import print_judgement

        msg = {"predicate": pred, **print_judgement(sig, ctx, n, sigma)}
        return json.dumps(msg, sort_keys=True)

    def query_with_timeout(self, pred, sig, ctx, n, sigma, timeout: float) -> Verdict:
        line = self.request(pred, sig, ctx, n, sigma)
        try:
            self.start()
            self.proc.stdin.write(line + "\n")
            self.proc.stdin.flush()
        except OSError:
            self.close()
            return unknown("external-error")
        try:
            reply = self.lines.get(timeout=timeout)
        except queue.Empty:
            self.close()
            return unknown("timeout")
        if reply is None:
            self.close()
            return unknown("external-error")
        return parse_reply(reply)

    def close(self):
        if self.proc is not None:
            try:
                self.proc.kill()
                self.proc.wait(timeout=1)
            except (OSError, subprocess.TimeoutExpired):
                pass
            self.proc = None


def parse_reply(line: str) -> Verdict:
    try:
        d = json.loads(line)
        kind = d["verdict"]
        if kind == "unknown":
            reason = d.get("reason") or "external-error"
            return unknown(reason if reason in ("timeout", "external-error", "fuel") else "external-error")
        if kind in ("true", "false"):
            return Verdict(kind)
    except (ValueError, KeyError, TypeError):
        pass
    return unknown("external-error")


def serve(decide, stdin=None, stdout=None):
    """Oracle-side loop: read requests, answer with ``decide(request_dict)``."""
    import sys

    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        if not line.strip():
            continue
        try:
            v = as_verdict(decide(json.loads(line)))
        except Exception:
            v = unknown("external-error")
        stdout.write(v.to_json() + "\n")
        stdout.flush()


def decide_builtin(request: dict) -> Verdict:
    """Evaluate a protocol request with the built-in predicate of the same name."""
    from .parser import parse_context, parse_signature, parse_term

    sig = parse_signature(request["signature"])
    ctx = parse_context(request["context"], sig)
    names = ctx.names()
    n = parse_term(request["term"], sig, names)
    sigma = parse_term(request["type"], sig, names)
    return evaluate_builtin(request["predicate"], sig, ctx, n, sigma)


# -- well-behavedness -------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    clause: str
    detail: str
    sample: tuple


@dataclass
class Sample:
    signature: Signature
    context: Context
    witness: Term
    witness_ty: Term
    extras: tuple = field(default=())


def insert_binding(ctx: Context, k: int, name: str, ty: Term) -> Context:
    """Insert ``name : ty`` (a type over the first ``k`` bindings) at position ``k``."""
    bs = list(ctx)
    out = bs[:k] + [(name, ty)]
    for j in range(k, len(bs)):
        n, t = bs[j]
        out.append((n, shift(t, 1, j - k)))
    return Context(out)


def rename(t: Term, f, depth: int = 0) -> Term:
    """Apply ``f`` to every free index of ``t``."""
    if isinstance(t, Var):
        return Var(f(t.index - depth) + depth, t.name) if t.index >= depth else t
    return t.rebuild([rename(k, f, depth + binds(t, i)) for i, k in enumerate(t.kids)])


def swap_adjacent(ctx: Context, j: int):
    """Swap bindings ``j`` and ``j+1``; returns the new context and the index map, or None if dependent."""
    bs = list(ctx)
    (a, ta), (b, tb) = bs[j], bs[j + 1]
    if 0 in free_vars(tb):
        return None
    n = len(bs)
    out = bs[:j] + [(b, shift(tb, -1, 0)), (a, shift(ta, 1, 0))]
    for k in range(j + 2, n):
        nm, t = bs[k]
        ia, ib = k - 1 - j, k - 2 - j
        out.append((nm, rename(t, lambda i, ia=ia, ib=ib: ib if i == ia else ia if i == ib else i)))
    ia, ib = n - 1 - j, n - 2 - j
    return Context(out), (lambda i: ib if i == ia else ia if i == ib else i)


def substitute_binding(ctx: Context, j: int, value: Term):
    """Remove binding ``j`` by substituting ``value`` (a term over the first ``j`` bindings)."""
    bs = list(ctx)
    n = len(bs)
    out = bs[:j]
    for k in range(j + 1, n):
        nm, t = bs[k]
        x = k - 1 - j
        out.append((nm, shift(subst(t, x, shift(value, k - j)), -1, x + 1)))
    x = n - 1 - j

    def on_term(t):
        return shift(subst(t, x, shift(value, n - j)), -1, x + 1)

    return Context(out), on_term


def _one_step(t):
    return [step_at(t, p) for p in redexes(t)]


def well_behavedness_suite(proc, samples, fuel: int = DEFAULT_FUEL) -> list[Violation]:
    """Check closure of a predicate under weakening, permutation, substitution and reduction.

    Only samples on which ``proc`` answers True are probed.  Each sample is a
    :class:`Sample` (or a 4-tuple); ``extras`` lists additional closed terms
    tried as substitution candidates.
    """
    from .kernel import CheckError, Checker

    def ask(sig, ctx, n, s):
        return as_verdict(proc(sig, ctx, n, s))

    out = []
    for smp in samples:
        if not isinstance(smp, Sample):
            smp = Sample(*smp)
        sig, ctx, n, s = smp.signature, smp.context, smp.witness, smp.witness_ty
        if ask(sig, ctx, n, s).kind != "true":
            continue
        key = (sig, ctx, n, s)

        def bad(clause, detail):
            out.append(Violation(clause, detail, key))

        # signature weakening by a fresh base type
        if ask(sig.extend("w$", TYPE), ctx, n, s).kind != "true":
            bad("signature-weakening", "adding a fresh constant")
        # context weakening at every position, with a type taken from the signature
        wty = next((FamConst(d.name) for d in sig if d.classifier == TYPE), None)
        if wty is not None:
            for k in range(len(ctx) + 1):
                wctx = insert_binding(ctx, k, f"w{k}$", wty)
                c = len(ctx) - k
                if ask(sig, wctx, shift(n, 1, c), shift(s, 1, c)).kind != "true":
                    bad("context-weakening", f"inserting a binding at {k}")
        # permutation of independent neighbours
        for j in range(len(ctx) - 1):
            sw = swap_adjacent(ctx, j)
            if sw is None:
                continue
            pctx, f = sw
            if ask(sig, pctx, rename(n, f), rename(s, f)).kind != "true":
                bad("permutation", f"swapping bindings {j} and {j + 1}")
        # substitution of well-typed candidates for each context variable
        chk = Checker(sig, None, fuel)
        for j in range(len(ctx)):
            pre = ctx.prefix(j)
            want = ctx.bindings[j][1]
            for cand in _candidates(sig, pre, smp.extras):
                try:
                    got = chk.infer_object(pre, cand)
                    if not chk.conv(got, want):
                        continue
                except CheckError:
                    continue
                sctx, on_term = substitute_binding(ctx, j, cand)
                if ask(sig, sctx, on_term(n), on_term(s)).kind != "true":
                    bad("substitution", f"replacing binding {j}")
        # one-step reduction of the witness and its type
        for n2 in _one_step(n):
            if ask(sig, ctx, n2, s).kind != "true":
                bad("reduction", "reducing the witness")
        for s2 in _one_step(s):
            if ask(sig, ctx, n, s2).kind != "true":
                bad("reduction", "reducing the witness type")
    return out


def _candidates(sig, pre: Context, extras):
    for d in sig:
        if not d.is_family:
            yield ObjConst(d.name)
    for i in range(len(pre)):
        yield Var(i, pre.name_of(i))
    yield from extras
