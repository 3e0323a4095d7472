"""Small-step operational semantics, traces, and the lockstep trace checker."""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import syntax as S
from .syntax import (App, Abs, Arb, BoolLit, BoxedBool, BoxedInj, BoxedInt,
                     CtorApp, GName, If, IntLit, Let, Match, Mux, OInj, OMatch,
                     OSum, Pair, PrimOp, Prod, Proj, PsiPair, Ret, Sec, Unit,
                     TUnit, TOBool, TOInt, indistinguishable, is_obliv_type_value,
                     is_obliv_value, is_value, subst, wrap_int, wrap_nat)

DEFAULT_FUEL = 10_000_000


@dataclass
class StepResult:
    kind: str  # "stepped" | "value" | "stuck"
    expr: S.Expr
    reason: str = ""


def ite(b: bool, x, y):
    return x if b else y


def synth_oblivious_value(w: S.Expr, rng: random.Random | None = None) -> S.Expr:
    """An arbitrary oblivious value of the given oblivious type value.

    The default choice is canonical so runs are reproducible; passing an rng
    randomizes it for robustness checks.
    """
    match w:
        case S.TUnit():
            return Unit()
        case S.TOBool():
            return BoxedBool(rng.random() < 0.5 if rng else False)
        case S.TOInt():
            return BoxedInt(rng.randrange(-128, 128) if rng else 0)
        case S.Prod(left=w1, right=w2):
            return Pair(synth_oblivious_value(w1, rng),
                        synth_oblivious_value(w2, rng))
        case S.OSum(left=w1, right=w2):
            left = rng.random() < 0.5 if rng else True
            return BoxedInj(left, w, synth_oblivious_value(w1 if left else w2, rng))
    raise ValueError(f"not an oblivious type value: {w}")


def _prim_eval(op: str, l: S.Expr, r: S.Expr) -> S.Expr | None:
    if op in S.OBLIV_OPS:
        if not (isinstance(l, (BoxedInt, BoxedBool)) and isinstance(r, (BoxedInt, BoxedBool))):
            return None
        a, b = l.value, r.value
        match op:
            case "oadd":
                return BoxedInt(wrap_int(a + b))
            case "osub":
                return BoxedInt(wrap_int(a - b))
            case "omul":
                return BoxedInt(wrap_int(a * b))
            case "ole":
                return BoxedBool(a <= b)
            case "olt":
                return BoxedBool(a < b)
            case "oeq":
                return BoxedBool(a == b)
    if not (isinstance(l, IntLit) and isinstance(r, IntLit)):
        return None
    a, b = l.value, r.value
    match op:
        case "iadd" | "add":
            return IntLit(wrap_int(a + b))
        case "isub" | "sub":
            return IntLit(wrap_int(a - b))
        case "imul" | "mul":
            return IntLit(wrap_int(a * b))
        case "nadd":
            return IntLit(wrap_nat(a + b))
        case "nsub":
            return IntLit(wrap_nat(a - b))
        case "nmul":
            return IntLit(wrap_nat(a * b))
        case "ile" | "nle" | "le":
            return BoolLit(a <= b)
        case "ilt" | "nlt" | "lt":
            return BoolLit(a < b)
        case "ieq" | "neq" | "eq":
            return BoolLit(a == b)
    return None


class Evaluator:
    def __init__(self, sigma: dict, synth_rng: random.Random | None = None):
        self.sigma = sigma
        self.synth_rng = synth_rng

    def synth(self, w: S.Expr) -> S.Expr:
        return synth_oblivious_value(w, self.synth_rng)

    def step(self, e: S.Expr) -> StepResult:
        if is_value(e):
            return StepResult("value", e)
        out = self._step(e)
        if out is None:
            return StepResult("stuck", e, reason=self._stuck_reason(e))
        return StepResult("stepped", out)

    def _stuck_reason(self, e: S.Expr) -> str:
        return f"no rule applies at {type(e).__name__}"

    def _step(self, e: S.Expr) -> S.Expr | None:
        match e:
            case GName(name=n):
                d = self.sigma.get(n)
                if isinstance(d, S.FunDef):
                    return d.body
                return None
            case Prod(left=l, right=r) | OSum(left=l, right=r):
                if not is_value(l):
                    l2 = self._step(l)
                    return None if l2 is None else type(e)(l2, r)
                if is_obliv_type_value(l) or is_obliv_value(l):
                    if not is_value(r):
                        r2 = self._step(r)
                        return None if r2 is None else type(e)(l, r2)
                if isinstance(e, OSum) and isinstance(l, BoxedInt) and isinstance(r, BoxedInt):
                    return BoxedInt(wrap_int(l.value + r.value))
                return None
            case Let(var=x, rhs=r, body=b):
                if not is_value(r):
                    r2 = self._step(r)
                    return None if r2 is None else S.Let(x, e.ty, r2, b)
                return subst(b, x, r)
            case App(fn=f, arg=a):
                if not is_value(a):
                    a2 = self._step(a)
                    return None if a2 is None else App(f, a2)
                match f:
                    case Abs(var=x, body=b):
                        return subst(b, x, a)
                    case GName(name=n) if isinstance(self.sigma.get(n), S.OadtDef):
                        d = self.sigma[n]
                        return subst(d.body, d.param, a)
                    case _:
                        f2 = self._step(f)
                        return None if f2 is None else App(f2, a)
            case CtorApp(ctor=c, arg=a):
                if not is_value(a):
                    a2 = self._step(a)
                    return None if a2 is None else CtorApp(c, a2)
                return None
            case If(cond=c, then=t, els=f):
                if not is_value(c):
                    c2 = self._step(c)
                    return None if c2 is None else If(c2, t, f)
                if isinstance(c, BoolLit):
                    return ite(c.value, t, f)
                return None
            case Mux(cond=c, then=t, els=f):
                if not is_value(c):
                    c2 = self._step(c)
                    return None if c2 is None else Mux(c2, t, f)
                if not is_value(t):
                    t2 = self._step(t)
                    return None if t2 is None else Mux(c, t2, f)
                if not is_value(f):
                    f2 = self._step(f)
                    return None if f2 is None else Mux(c, t, f2)
                if isinstance(c, BoxedBool):
                    return ite(c.value, t, f)
                return None
            case Pair(left=l, right=r) | PsiPair(view=l, payload=r):
                if not is_value(l):
                    l2 = self._step(l)
                    return None if l2 is None else type(e)(l2, r)
                if not is_value(r):
                    r2 = self._step(r)
                    return None if r2 is None else type(e)(l, r2)
                return None
            case Proj(index=i, arg=a):
                if not is_value(a):
                    a2 = self._step(a)
                    return None if a2 is None else Proj(i, a2)
                if isinstance(a, (Pair, PsiPair)):
                    l = a.left if isinstance(a, Pair) else a.view
                    r = a.right if isinstance(a, Pair) else a.payload
                    return ite(i == 1, l, r)
                return None
            case OInj(left=lft, ty=t, arg=a):
                if t is None:
                    return None
                if not is_value(t):
                    t2 = self._step(t)
                    return None if t2 is None else OInj(lft, t2, a)
                if not is_value(a):
                    a2 = self._step(a)
                    return None if a2 is None else OInj(lft, t, a2)
                if is_obliv_type_value(t) and is_obliv_value(a):
                    return BoxedInj(lft, t, a)
                return None
            case Arb(ty=t):
                if not is_value(t):
                    t2 = self._step(t)
                    return None if t2 is None else Arb(t2)
                if is_obliv_type_value(t):
                    return self.synth(t)
                return None
            case OMatch(scrut=s, lvar=lx, lbody=lb, rvar=rx, rbody=rb):
                if not is_value(s):
                    s2 = self._step(s)
                    return None if s2 is None else OMatch(s2, lx, lb, rx, rb)
                if isinstance(s, BoxedInj) and isinstance(s.ty, OSum):
                    w1, w2 = s.ty.left, s.ty.right
                    b = s.left
                    lhs = subst(lb, lx, ite(b, s.arg, self.synth(w1)))
                    rhs = subst(rb, rx, ite(b, self.synth(w2), s.arg))
                    return Mux(BoxedBool(b), lhs, rhs)
                return None
            case Match(scrut=s, branches=bs):
                if not is_value(s):
                    s2 = self._step(s)
                    return None if s2 is None else Match(s2, bs)
                if isinstance(s, CtorApp):
                    for (c, x, body) in bs:
                        if c == s.ctor:
                            return subst(body, x, s.arg)
                return None
            case Sec(prim=p, arg=a):
                if not is_value(a):
                    a2 = self._step(a)
                    return None if a2 is None else Sec(p, a2)
                if p == "bool" and isinstance(a, BoolLit):
                    return BoxedBool(a.value)
                if p == "int" and isinstance(a, IntLit):
                    return BoxedInt(a.value)
                return None
            case Ret(prim=p, arg=a):
                if not is_value(a):
                    a2 = self._step(a)
                    return None if a2 is None else Ret(p, a2)
                if p == "bool" and isinstance(a, BoxedBool):
                    return BoolLit(a.value)
                if p == "int" and isinstance(a, BoxedInt):
                    return IntLit(a.value)
                return None
            case PrimOp(op=op, left=l, right=r):
                if not is_value(l):
                    l2 = self._step(l)
                    return None if l2 is None else PrimOp(op, l2, r)
                if not is_value(r):
                    r2 = self._step(r)
                    return None if r2 is None else PrimOp(op, l, r2)
                return _prim_eval(op, l, r)
            case S.Ascribe(arg=a):
                return a
            case _:
                return None


@dataclass
class Trace:
    states: list
    terminal: str  # "value" | "fuel" | "stuck"
    reason: str = ""

    def __len__(self):
        return len(self.states)


def step(sigma: dict, e: S.Expr) -> StepResult:
    return Evaluator(sigma).step(e)


def eval_expr(sigma: dict, e: S.Expr, fuel: int = DEFAULT_FUEL,
              synth_rng=None, keep_trace: bool = True):
    """Iterate the step relation, recording every state."""
    ev = Evaluator(sigma, synth_rng)
    states = [e] if keep_trace else [e]
    cur = e
    for _ in range(fuel):
        r = ev.step(cur)
        if r.kind == "value":
            return StepResult("value", cur), Trace(states, "value")
        if r.kind == "stuck":
            return StepResult("stuck", cur, r.reason), Trace(states, "stuck", r.reason)
        cur = r.expr
        if keep_trace:
            states.append(cur)
        else:
            states[0] = cur
    return StepResult("stuck", cur, "fuel exhausted"), Trace(states, "fuel")


def run_to_value(sigma: dict, e: S.Expr, fuel: int = DEFAULT_FUEL) -> S.Expr | None:
    ev = Evaluator(sigma)
    cur = e
    for _ in range(fuel):
        if is_value(cur):
            return cur
        r = ev._step(cur)
        if r is None:
            return None
        cur = r
    return None


@dataclass
class PairVerdict:
    ok: bool
    kind: str  # "ok" | "diverged" | "length" | "terminal" | "invalid"
    step_index: int = -1
    left: S.Expr | None = None
    right: S.Expr | None = None
    detail: str = ""


def trace_pair_check(sigma: dict, e1: S.Expr, e2: S.Expr,
                     fuel: int = DEFAULT_FUEL, precheck=None,
                     synth_rng=None) -> PairVerdict:
    """Run two indistinguishable programs in lockstep and compare each state.

    `precheck` may perform typing validation; returning False marks the
    test-case invalid rather than producing a security verdict.
    """
    if not indistinguishable(e1, e2):
        return PairVerdict(False, "invalid", detail="inputs are distinguishable")
    if precheck is not None and not precheck(e1, e2):
        return PairVerdict(False, "invalid", detail="inputs fail the type precondition")
    ev = Evaluator(sigma, synth_rng)
    c1, c2 = e1, e2
    for i in range(fuel):
        r1 = ev.step(c1)
        r2 = ev.step(c2)
        if r1.kind != r2.kind:
            return PairVerdict(False, "terminal", i, c1, c2,
                               f"terminals differ: {r1.kind} vs {r2.kind}")
        if r1.kind in ("value", "stuck"):
            return PairVerdict(True, "ok", i)
        c1, c2 = r1.expr, r2.expr
        if not indistinguishable(c1, c2):
            return PairVerdict(False, "diverged", i + 1, c1, c2,
                               "states are distinguishable")
    return PairVerdict(True, "ok", fuel, detail="fuel exhausted in lockstep")


def format_trace(tr: Trace) -> str:
    from .printer import pp
    lines = [pp(s) for s in tr.states]
    lines.append(f"-- terminal: {tr.terminal}" + (f" ({tr.reason})" if tr.reason else ""))
    return "\n".join(lines)
