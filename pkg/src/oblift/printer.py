"""Canonical text form for expressions and programs.

Printing is deterministic and re-parses to an alpha-equal term.
"""

from __future__ import annotations

from . import syntax as S

# precedence levels, binding looser to tighter
L_LAM = 0
L_ARROW = 1
L_CMP = 2
L_ADD = 3
L_MUL = 4
L_APP = 5
L_ATOM = 6

_CMP_TEXT = {"le": "<=", "lt": "<", "eq": "=", "nle": "<=", "nlt": "<", "neq": "=",
             "ile": "<=", "ilt": "<", "ieq": "=", "ole": "@<=", "olt": "@<", "oeq": "@="}
_ADD_TEXT = {"add": "+", "sub": "-", "iadd": "+", "isub": "-",
             "nadd": "+", "nsub": "-", "oadd": "@+", "osub": "@-"}
_MUL_TEXT = {"mul": "*", "imul": "*", "nmul": "*", "omul": "@*"}


def _p(s: str, yes: bool) -> str:
    return f"({s})" if yes else s


def pp(e: S.Expr, prec: int = L_LAM) -> str:
    match e:
        case S.TUnit():
            return "unit"
        case S.TBool():
            return "bool"
        case S.TOBool():
            return "@bool"
        case S.TInt():
            return "int"
        case S.TOInt():
            return "@int"
        case S.TNat():
            return "nat"
        case S.TypeHole():
            return "alpha"
        case S.PsiType(oadt=n):
            return f"&{n}"
        case S.Var(name=x):
            return x
        case S.GName(name=x):
            return x
        case S.Unit():
            return "()"
        case S.BoolLit(value=b):
            return "true" if b else "false"
        case S.IntLit(value=n):
            return _p(str(n), n < 0 and prec >= L_APP)
        case S.BoxedBool(value=b):
            return f"[{'true' if b else 'false'}]"
        case S.BoxedInt(value=n):
            return f"[{n}]"
        case S.BoxedInj(left=l, ty=t, arg=a):
            tag = "inl" if l else "inr"
            return f"[{tag}<{pp(t)}> {pp(a, L_ATOM)}]"
        case S.Prod(left=l, right=r):
            return _p(f"{pp(l, L_APP)} * {pp(r, L_MUL)}", prec > L_MUL)
        case S.OSum(left=l, right=r):
            return _p(f"{pp(l, L_MUL)} @+ {pp(r, L_MUL)}", prec > L_ADD)
        case S.Pi(var=x, dom=d, cod=c):
            if x == "_" or x not in S.free_vars(c):
                return _p(f"{pp(d, L_CMP)} -> {pp(c, L_ARROW)}", prec > L_ARROW)
            return _p(f"({x} : {pp(d)}) -> {pp(c, L_ARROW)}", prec > L_ARROW)
        case S.Abs(var=x, ty=t, body=b):
            binder = x if t is None else f"({x} : {pp(t)})"
            return _p(f"?{binder} => {pp(b)}", prec > L_LAM)
        case S.Let(var=x, ty=t, rhs=r, body=b):
            ann = "" if t is None else f" : {pp(t, L_ARROW)}"
            return _p(f"let {x}{ann} = {pp(r)} in {pp(b)}", prec > L_LAM)
        case S.App(fn=f, arg=a):
            return _p(f"{pp(f, L_APP)} {pp(a, L_ATOM)}", prec > L_APP)
        case S.CtorApp(ctor=c, arg=a):
            if isinstance(a, S.Unit):
                return c
            return _p(f"{c} {pp(a, L_ATOM)}", prec > L_APP)
        case S.If(cond=c, then=t, els=f):
            return _p(f"if {pp(c)} then {pp(t)} else {pp(f)}", prec > L_LAM)
        case S.Mux(cond=c, then=t, els=f):
            return _p(f"mux {pp(c, L_ATOM)} {pp(t, L_ATOM)} {pp(f, L_ATOM)}", prec > L_APP)
        case S.Pair(left=l, right=r):
            parts = [l]
            while isinstance(r, S.Pair):
                parts.append(r.left)
                r = r.right
            parts.append(r)
            return "(" + ", ".join(pp(p) for p in parts) + ")"
        case S.PsiPair(view=v, payload=p2):
            return f"&({pp(v)}, {pp(p2)})&"
        case S.Proj(index=i, arg=a):
            return _p(f"pi_{i} {pp(a, L_ATOM)}", prec > L_APP)
        case S.OInj(left=l, ty=t, arg=a):
            kw = "@inl" if l else "@inr"
            ann = "" if t is None else f"<{pp(t)}>"
            return _p(f"{kw}{ann} {pp(a, L_ATOM)}", prec > L_APP)
        case S.Arb(ty=t):
            return _p(f"@arb<{pp(t)}>", prec > L_APP)
        case S.OMatch():
            return _p(
                f"@match {pp(e.scrut)} with @inl {e.lvar} => {pp(e.lbody)}"
                f" | @inr {e.rvar} => {pp(e.rbody)}", prec > L_LAM)
        case S.Match(scrut=s, branches=bs):
            alts = " | ".join(f"{c} {x} => {pp(b)}" for (c, x, b) in bs)
            return _p(f"match {pp(s)} with {alts}", prec > L_LAM)
        case S.Sec(prim=p2, arg=a):
            return _p(f"@{p2}#s {pp(a, L_ATOM)}", prec > L_APP)
        case S.Ret(prim=p2, arg=a):
            return _p(f"@{p2}#r {pp(a, L_ATOM)}", prec > L_APP)
        case S.PrimOp(op=op, left=l, right=r):
            if op in _CMP_TEXT:
                return _p(f"{pp(l, L_ADD)} {_CMP_TEXT[op]} {pp(r, L_ADD)}", prec > L_CMP)
            if op in _ADD_TEXT:
                return _p(f"{pp(l, L_ADD)} {_ADD_TEXT[op]} {pp(r, L_MUL)}", prec > L_ADD)
            return _p(f"{pp(l, L_APP)} {_MUL_TEXT[op]} {pp(r, L_MUL)}", prec > L_MUL)
        case S.Ascribe(arg=a, ty=t):
            return f"({pp(a)} : {pp(t)})"
    raise ValueError(f"cannot print {e!r}")


def pp_def(d) -> str:
    match d:
        case S.DataDef(name=n, ctors=cs):
            alts = []
            for (c, ty) in cs:
                if isinstance(ty, S.TUnit):
                    alts.append(c)
                else:
                    parts = [ty]
                    flat = []
                    while parts:
                        t = parts.pop(0)
                        if isinstance(t, S.Prod):
                            parts.insert(0, t.right)
                            parts.insert(0, t.left)
                        else:
                            flat.append(t)
                    alts.append(c + " " + " ".join(pp(t, L_ATOM) for t in flat))
            return f"data {n} = " + " | ".join(alts)
        case S.FunDef(name=n, ty=t, body=b, unsafe=u):
            kw = "unsafe fn" if u else "fn"
            return f"{kw} {n} : {pp(t, L_ARROW)} =\n  {pp(b)}"
        case S.OadtDef(name=n, param=x, view_ty=vt, body=b):
            return f"obliv {n} ({x} : {pp(vt)}) =\n  {pp(b)}"
        case S.LiftGoal(alias=a, source=s, spec_ty=t):
            return f"fn {a} : {pp(t, L_ARROW)} = Mlift {s}"
    raise ValueError(f"cannot print definition {d!r}")


def pp_program(prog: S.Program) -> str:
    lines = [pp_def(d) for d in prog.defs]
    lines.extend(pp_def(g) for g in prog.goals)
    return "\n\n".join(lines) + "\n"
