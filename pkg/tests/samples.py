"""Well-typed judgements for the built-in predicates (lambda-v and Imp signatures)."""

from __future__ import annotations

import random

from llfp.corpus import corpus_text
from llfp.kernel import CheckError, Checker
from llfp.oracles import Sample
from llfp.parser import parse_context, parse_file, parse_term
from llfp.syntax import Var

LAMBDA = parse_file(corpus_text("lambda_v"))
IMP = parse_file(corpus_text("imp_hoare"))


def _nat(rng, depth):
    return "O" if depth <= 0 or rng.random() < 0.4 else f"S ({_nat(rng, depth - 1)})"


def lam_term(rng, env, depth) -> str:
    opts = ["free", "lam", "app", "redex"] + (["var", "var"] if env else [])
    if depth <= 0:
        opts = ["free"] + (["var"] if env else [])
    match rng.choice(opts):
        case "free":
            return f"free ({_nat(rng, 2)})"
        case "var":
            return rng.choice(env)
        case "lam":
            x = f"y{depth}"
            return f"lam (\\{x}:term. {lam_term(rng, env + [x], depth - 1)})"
        case "app":
            return f"app ({lam_term(rng, env, depth - 1)}) ({lam_term(rng, env, depth - 1)})"
        case "redex":
            x = f"r{depth}"
            return f"(\\{x}:term. {lam_term(rng, env + [x], depth - 1)}) ({lam_term(rng, env, depth - 1)})"


def int_expr(rng, env, depth, locs=("a", "b")) -> str:
    opts = ["zero", "one", "neg_one", "bang"] + (["var"] if env else [])
    if depth > 0:
        opts += ["plus", "redex"]
    match rng.choice(opts):
        case "bang":
            return f"bang {rng.choice(locs)}"
        case "var":
            return rng.choice(env)
        case "plus":
            return f"plus ({int_expr(rng, env, depth - 1, locs)}) ({int_expr(rng, env, depth - 1, locs)})"
        case "redex":
            v = f"k{depth}"
            return f"(\\{v}:int. {int_expr(rng, env + [v], depth - 1, locs)}) ({int_expr(rng, env, depth - 1, locs)})"
        case lit:
            return lit


def bool_expr(rng, env, depth, locs=("a", "b")) -> str:
    opts = ["eqi"]
    if depth > 0:
        opts += ["and", "not", "imp", "forall", "eqi"]
    match rng.choice(opts):
        case "eqi":
            return f"eqi ({int_expr(rng, env, depth, locs)}) ({int_expr(rng, env, depth, locs)})"
        case "and" | "imp" as op:
            return f"{op} ({bool_expr(rng, env, depth - 1, locs)}) ({bool_expr(rng, env, depth - 1, locs)})"
        case "not":
            return f"not ({bool_expr(rng, env, depth - 1, locs)})"
        case "forall":
            v = f"q{depth}"
            return f"forall (\\{v}:int. {bool_expr(rng, env + [v], depth - 1, locs)})"


def _typed(source, ctx_text, n_text, ty_text, extras=()):
    sig = source.signature
    ctx = parse_context(ctx_text, sig)
    n = parse_term(n_text, sig, ctx.names())
    ty = parse_term(ty_text, sig, ctx.names())
    chk = Checker(sig)
    try:
        chk.check_context(ctx)
        chk.check(ctx, n, ty)
    except CheckError:
        return None
    xs = tuple(parse_term(e, sig) for e in extras)
    return Sample(sig, ctx, n, ty, xs)


def _ctx(rng, ty, prefix, other=None):
    k = rng.randint(0, 3)
    names = [f"{prefix}{i}" for i in range(k)]
    binds = [f"{x}:{ty}" for x in names]
    if other and rng.random() < 0.5:
        binds.insert(rng.randint(0, len(binds)), other)
    return names, ", ".join(binds)


def val_samples(n, seed=0):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        names, ctx = _ctx(rng, "term", "z", "m:nat")
        smp = _typed(LAMBDA, ctx, lam_term(rng, names, rng.randint(0, 4)), "term",
                     ("lam (\\y:term. y)", "app (free O) (free O)", "free (S O)"))
        if smp is not None:
            out.append(smp)
    return out


def qf_samples(n, seed=0):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        names, ctx = _ctx(rng, "int", "i", "l:var")
        smp = _typed(IMP, ctx, bool_expr(rng, names, rng.randint(0, 3)), "bool", ("zero", "plus one one", "bang a"))
        if smp is not None:
            out.append(smp)
    return out


def pset_samples(n, seed=0):
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        names, ctx = _ctx(rng, "int", "i", "l:var")
        locs = ("a", "b", "l") if "l:var" in ctx else ("a", "b")
        x = rng.choice(locs)
        e = f"\\v:int. {bool_expr(rng, names + ['v'], rng.randint(0, 2), locs)}"
        smp = _typed(IMP, ctx, f"mkargs {x} ({e})", "args", ("zero", "bang b", "a", "b"))
        if smp is not None:
            out.append(smp)
    return out


def is_variable(sig, ctx, n, sigma):
    """Ill-behaved control: holds exactly when the witness is a variable."""
    return isinstance(n, Var)
