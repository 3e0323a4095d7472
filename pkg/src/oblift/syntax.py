"""Core term/type AST, kinds, value grammars and indistinguishability.

Types and expressions share one syntax class; a node is a "type" or a
"term" only by how the kinding/typing judgments classify it.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, fields

INT_BITS = 32
INT_MIN = -(1 << (INT_BITS - 1))
INT_MASK = (1 << INT_BITS) - 1


def wrap_int(n: int) -> int:
    """Two's-complement wrap to the fixed integer width."""
    n &= INT_MASK
    return n - (1 << INT_BITS) if n >= (1 << (INT_BITS - 1)) else n


def wrap_nat(n: int) -> int:
    """Saturating view arithmetic: non-negative, wrapped at the word size."""
    return max(0, n) & INT_MASK


class Kind(enum.Enum):
    ANY = "*@A"
    PUBLIC = "*@P"
    OBLIV = "*@O"
    MIXED = "*@M"

    def leq(self, other: "Kind") -> bool:
        if self is other or self is Kind.ANY or other is Kind.MIXED:
            return True
        return False

    def join(self, other: "Kind") -> "Kind":
        if self.leq(other):
            return other
        if other.leq(self):
            return self
        return Kind.MIXED


def kind_join(k1: Kind, k2: Kind) -> Kind:
    return k1.join(k2)


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True, eq=False)
class Expr:
    def __post_init__(self):
        object.__setattr__(self, "_isv", None)


def _node(cls):
    return dataclass(frozen=True, eq=False)(cls)


@_node
class Pos:
    line: int
    col: int


# -- type constants ---------------------------------------------------------

@_node
class TUnit(Expr):
    pass


@_node
class TBool(Expr):
    pass


@_node
class TOBool(Expr):
    pass


@_node
class TInt(Expr):
    pass


@_node
class TOInt(Expr):
    pass


@_node
class TNat(Expr):
    pass


@_node
class TypeHole(Expr):
    """Placeholder for the return-type family of eliminator templates."""


# -- type formers (also oblivious addition, via the shared syntax class) ----

@_node
class Prod(Expr):
    left: Expr
    right: Expr


@_node
class OSum(Expr):
    left: Expr
    right: Expr


@_node
class Pi(Expr):
    var: str
    dom: Expr
    cod: Expr


@_node
class PsiType(Expr):
    oadt: str


# -- terms ------------------------------------------------------------------

@_node
class Var(Expr):
    name: str


@_node
class GName(Expr):
    """Reference to a global definition (function, ADT or oblivious type)."""

    name: str


@_node
class Unit(Expr):
    pass


@_node
class BoolLit(Expr):
    value: bool


@_node
class IntLit(Expr):
    value: int


@_node
class Abs(Expr):
    var: str
    ty: Expr | None
    body: Expr


@_node
class Let(Expr):
    var: str
    ty: Expr | None
    rhs: Expr
    body: Expr


@_node
class App(Expr):
    fn: Expr
    arg: Expr


@_node
class CtorApp(Expr):
    ctor: str
    arg: Expr


@_node
class If(Expr):
    cond: Expr
    then: Expr
    els: Expr


@_node
class Mux(Expr):
    cond: Expr
    then: Expr
    els: Expr


@_node
class Pair(Expr):
    left: Expr
    right: Expr


@_node
class PsiPair(Expr):
    view: Expr
    payload: Expr


@_node
class Proj(Expr):
    index: int  # 1 or 2
    arg: Expr


@_node
class OInj(Expr):
    left: bool
    ty: Expr | None  # sum-type annotation, filled in by elaboration
    arg: Expr


@_node
class OMatch(Expr):
    scrut: Expr
    lvar: str
    lbody: Expr
    rvar: str
    rbody: Expr


@_node
class Match(Expr):
    scrut: Expr
    branches: tuple  # of (ctor name, binder, body)


@_node
class Sec(Expr):
    prim: str  # "bool" | "int"
    arg: Expr


@_node
class Ret(Expr):
    """Decryption primitive; only typeable in leaky mode."""

    prim: str
    arg: Expr


@_node
class Arb(Expr):
    """An arbitrary value of an oblivious type, synthesized at runtime."""

    ty: Expr


@_node
class PrimOp(Expr):
    op: str
    left: Expr
    right: Expr


@_node
class Ascribe(Expr):
    arg: Expr
    ty: Expr


# -- runtime boxed values ---------------------------------------------------

@_node
class BoxedBool(Expr):
    value: bool


@_node
class BoxedInt(Expr):
    value: int


@_node
class BoxedInj(Expr):
    left: bool
    ty: Expr  # an oblivious type value (the sum)
    arg: Expr


# surface ops before elaboration resolves int/nat/oblivious variants
SURFACE_OPS = ("add", "sub", "mul", "le", "lt", "eq")
INT_OPS = {"iadd", "isub", "imul", "ile", "ilt", "ieq"}
NAT_OPS = {"nadd", "nsub", "nmul", "nle", "nlt", "neq"}
OBLIV_OPS = {"oadd", "osub", "omul", "ole", "olt", "oeq"}
CMP_OPS = {"ile", "ilt", "ieq", "nle", "nlt", "neq", "ole", "olt", "oeq"}


# ---------------------------------------------------------------------------
# Global definitions and programs


@dataclass(frozen=True)
class DataDef:
    name: str
    ctors: tuple  # of (ctor name, argument type Expr)


@dataclass(frozen=True)
class FunDef:
    name: str
    ty: Expr
    body: Expr
    unsafe: bool = False


@dataclass(frozen=True)
class OadtDef:
    name: str
    param: str
    view_ty: Expr
    body: Expr


@dataclass(frozen=True)
class LiftGoal:
    alias: str
    source: str
    spec_ty: "object"  # types.SpecType; kept loose to avoid an import cycle


@dataclass
class Program:
    defs: list
    goals: list

    def global_map(self) -> dict:
        sigma = {}
        for d in self.defs:
            if d.name in sigma:
                raise ValueError(f"duplicate global name: {d.name}")
        for d in self.defs:
            sigma[d.name] = d
        return sigma


# ---------------------------------------------------------------------------
# Traversal helpers

_CHILD_FIELDS = {}


def children(e: Expr):
    cls = type(e)
    spec = _CHILD_FIELDS.get(cls)
    if spec is None:
        spec = [f.name for f in fields(cls) if f.type in ("Expr", "Expr | None")]
        _CHILD_FIELDS[cls] = spec
    out = []
    for name in spec:
        v = getattr(e, name)
        if v is not None:
            out.append(v)
    if isinstance(e, Match):
        out.extend(b[2] for b in e.branches)
    return out


_FRESH = itertools.count(1)


def fresh_name(base: str) -> str:
    return f"{base}!{next(_FRESH)}"


def free_vars(e: Expr, acc=None, bound=None) -> set:
    if acc is None:
        acc = set()
    if bound is None:
        bound = frozenset()
    match e:
        case Var(name=x):
            if x not in bound:
                acc.add(x)
        case Abs(var=x, ty=t, body=b):
            if t is not None:
                free_vars(t, acc, bound)
            free_vars(b, acc, bound | {x})
        case Let(var=x, ty=t, rhs=r, body=b):
            if t is not None:
                free_vars(t, acc, bound)
            free_vars(r, acc, bound)
            free_vars(b, acc, bound | {x})
        case Pi(var=x, dom=d, cod=c):
            free_vars(d, acc, bound)
            free_vars(c, acc, bound | {x})
        case OMatch(scrut=s, lvar=lx, lbody=lb, rvar=rx, rbody=rb):
            free_vars(s, acc, bound)
            free_vars(lb, acc, bound | {lx})
            free_vars(rb, acc, bound | {rx})
        case Match(scrut=s, branches=bs):
            free_vars(s, acc, bound)
            for (_, x, body) in bs:
                free_vars(body, acc, bound | {x})
        case _:
            for c in children(e):
                free_vars(c, acc, bound)
    return acc


def _rebuild(e: Expr, **updates) -> Expr:
    kw = {f.name: getattr(e, f.name) for f in fields(e)}
    kw.update(updates)
    return type(e)(**kw)


def subst(e: Expr, x: str, v: Expr) -> Expr:
    """Capture-avoiding substitution [v/x]e."""
    match e:
        case Var(name=y):
            return v if y == x else e
        case Abs(var=y, ty=t, body=b):
            t2 = subst(t, x, v) if t is not None else None
            if y == x:
                return _rebuild(e, ty=t2)
            if y in free_vars(v):
                y2 = fresh_name(y)
                b = subst(b, y, Var(y2))
                return Abs(y2, t2, subst(b, x, v))
            return _rebuild(e, ty=t2, body=subst(b, x, v))
        case Let(var=y, ty=t, rhs=r, body=b):
            t2 = subst(t, x, v) if t is not None else None
            r2 = subst(r, x, v)
            if y == x:
                return _rebuild(e, ty=t2, rhs=r2)
            if y in free_vars(v):
                y2 = fresh_name(y)
                b = subst(b, y, Var(y2))
                return Let(y2, t2, r2, subst(b, x, v))
            return _rebuild(e, ty=t2, rhs=r2, body=subst(b, x, v))
        case Pi(var=y, dom=d, cod=c):
            d2 = subst(d, x, v)
            if y == x:
                return _rebuild(e, dom=d2)
            if y in free_vars(v):
                y2 = fresh_name(y)
                c = subst(c, y, Var(y2))
                return Pi(y2, d2, subst(c, x, v))
            return _rebuild(e, dom=d2, cod=subst(c, x, v))
        case OMatch(scrut=s, lvar=lx, lbody=lb, rvar=rx, rbody=rb):
            s2 = subst(s, x, v)
            fv = free_vars(v)
            if lx == x:
                lb2 = lb
            elif lx in fv:
                lx2 = fresh_name(lx)
                lb2 = subst(subst(lb, lx, Var(lx2)), x, v)
                lx = lx2
            else:
                lb2 = subst(lb, x, v)
            if rx == x:
                rb2 = rb
            elif rx in fv:
                rx2 = fresh_name(rx)
                rb2 = subst(subst(rb, rx, Var(rx2)), x, v)
                rx = rx2
            else:
                rb2 = subst(rb, x, v)
            return OMatch(s2, lx, lb2, rx, rb2)
        case Match(scrut=s, branches=bs):
            s2 = subst(s, x, v)
            fv = free_vars(v)
            out = []
            for (c, y, body) in bs:
                if y == x:
                    out.append((c, y, body))
                elif y in fv:
                    y2 = fresh_name(y)
                    out.append((c, y2, subst(subst(body, y, Var(y2)), x, v)))
                else:
                    out.append((c, y, subst(body, x, v)))
            return Match(s2, tuple(out))
        case _:
            kids = children(e)
            if not kids:
                return e
            updates = {}
            for f in fields(e):
                val = getattr(e, f.name)
                if isinstance(val, Expr):
                    updates[f.name] = subst(val, x, v)
            return _rebuild(e, **updates)


def subst_many(e: Expr, mapping: dict) -> Expr:
    for x, v in mapping.items():
        e = subst(e, x, v)
    return e


# ---------------------------------------------------------------------------
# Alpha equality

def alpha_eq(e1: Expr, e2: Expr, env1=None, env2=None, depth=0) -> bool:
    if env1 is None:
        env1, env2 = {}, {}
    if type(e1) is not type(e2):
        return False
    match e1:
        case Var(name=x):
            y = e2.name
            b1, b2 = env1.get(x), env2.get(y)
            if b1 is None and b2 is None:
                return x == y
            return b1 == b2
        case Abs(var=x, ty=t1, body=b1):
            if (t1 is None) != (e2.ty is None):
                return False
            if t1 is not None and not alpha_eq(t1, e2.ty, env1, env2, depth):
                return False
            return alpha_eq(b1, e2.body, {**env1, x: depth}, {**env2, e2.var: depth}, depth + 1)
        case Let(var=x, ty=t1, rhs=r1, body=b1):
            if (t1 is None) != (e2.ty is None):
                return False
            if t1 is not None and not alpha_eq(t1, e2.ty, env1, env2, depth):
                return False
            if not alpha_eq(r1, e2.rhs, env1, env2, depth):
                return False
            return alpha_eq(b1, e2.body, {**env1, x: depth}, {**env2, e2.var: depth}, depth + 1)
        case Pi(var=x, dom=d1, cod=c1):
            if not alpha_eq(d1, e2.dom, env1, env2, depth):
                return False
            return alpha_eq(c1, e2.cod, {**env1, x: depth}, {**env2, e2.var: depth}, depth + 1)
        case OMatch():
            if not alpha_eq(e1.scrut, e2.scrut, env1, env2, depth):
                return False
            if not alpha_eq(e1.lbody, e2.lbody, {**env1, e1.lvar: depth}, {**env2, e2.lvar: depth}, depth + 1):
                return False
            return alpha_eq(e1.rbody, e2.rbody, {**env1, e1.rvar: depth}, {**env2, e2.rvar: depth}, depth + 1)
        case Match():
            if len(e1.branches) != len(e2.branches):
                return False
            if not alpha_eq(e1.scrut, e2.scrut, env1, env2, depth):
                return False
            for (c1, x1, b1), (c2, x2, b2) in zip(e1.branches, e2.branches):
                if c1 != c2:
                    return False
                if not alpha_eq(b1, b2, {**env1, x1: depth}, {**env2, x2: depth}, depth + 1):
                    return False
            return True
        case _:
            for f in fields(e1):
                v1, v2 = getattr(e1, f.name), getattr(e2, f.name)
                if isinstance(v1, Expr) or isinstance(v2, Expr):
                    if not (isinstance(v1, Expr) and isinstance(v2, Expr)):
                        return False
                    if not alpha_eq(v1, v2, env1, env2, depth):
                        return False
                elif f.name != "branches" and v1 != v2:
                    return False
            return True


# ---------------------------------------------------------------------------
# Value grammars


def is_obliv_type_value(e: Expr) -> bool:
    """The oblivious type-value grammar: unit, @bool, @int, products, sums."""
    match e:
        case TUnit() | TOBool() | TOInt():
            return True
        case Prod(left=l, right=r) | OSum(left=l, right=r):
            return is_obliv_type_value(l) and is_obliv_type_value(r)
        case _:
            return False


def is_obliv_value(e: Expr) -> bool:
    match e:
        case Unit() | BoxedBool() | BoxedInt():
            return True
        case Pair(left=l, right=r):
            return is_obliv_value(l) and is_obliv_value(r)
        case BoxedInj(ty=t, arg=a):
            return is_obliv_type_value(t) and is_obliv_value(a)
        case _:
            return False


def _compute_is_value(e: Expr) -> bool:
    match e:
        case BoolLit() | IntLit() | Abs():
            return True
        case Pair(left=l, right=r) | PsiPair(view=l, payload=r):
            return is_value(l) and is_value(r)
        case CtorApp(arg=a):
            return is_value(a)
        case _:
            return is_obliv_value(e) or is_type_value(e)


def is_type_value(e: Expr) -> bool:
    """Normal forms of the type fragment (public and oblivious)."""
    match e:
        case TUnit() | TBool() | TOBool() | TInt() | TOInt() | TNat() | Pi() | PsiType() | TypeHole():
            return True
        case Prod(left=l, right=r) | OSum(left=l, right=r):
            return is_obliv_type_value(l) and is_obliv_type_value(r)
        case _:
            return False


def is_value(e: Expr) -> bool:
    v = e._isv
    if v is None:
        v = _compute_is_value(e)
        object.__setattr__(e, "_isv", v)
    return v


def obliv_value_matches(v: Expr, w: Expr) -> bool:
    """Decidable recognizer relating oblivious values to their type values."""
    match w:
        case TUnit():
            return isinstance(v, Unit)
        case TOBool():
            return isinstance(v, BoxedBool)
        case TOInt():
            return isinstance(v, BoxedInt)
        case Prod(left=w1, right=w2):
            return (isinstance(v, Pair)
                    and obliv_value_matches(v.left, w1)
                    and obliv_value_matches(v.right, w2))
        case OSum(left=w1, right=w2):
            if not isinstance(v, BoxedInj) or not alpha_eq(v.ty, w):
                return False
            return obliv_value_matches(v.arg, w1 if v.left else w2)
        case _:
            return False


# ---------------------------------------------------------------------------
# Indistinguishability

def indistinguishable(e1: Expr, e2: Expr) -> bool:
    """Equality of everything an attacker can observe.

    Boxed booleans/integers compare equal regardless of payload; boxed
    injections compare by their (shape-determining) type annotation only.
    """
    if isinstance(e1, BoxedBool) and isinstance(e2, BoxedBool):
        return True
    if isinstance(e1, BoxedInt) and isinstance(e2, BoxedInt):
        return True
    if isinstance(e1, BoxedInj) and isinstance(e2, BoxedInj):
        return alpha_eq(e1.ty, e2.ty)
    return _indist_structural(e1, e2, {}, {}, 0)


def _indist_structural(e1, e2, env1, env2, depth) -> bool:
    if isinstance(e1, BoxedBool) and isinstance(e2, BoxedBool):
        return True
    if isinstance(e1, BoxedInt) and isinstance(e2, BoxedInt):
        return True
    if isinstance(e1, BoxedInj) and isinstance(e2, BoxedInj):
        return alpha_eq(e1.ty, e2.ty)
    if type(e1) is not type(e2):
        return False
    match e1:
        case Var(name=x):
            b1, b2 = env1.get(x), env2.get(e2.name)
            if b1 is None and b2 is None:
                return x == e2.name
            return b1 == b2
        case Abs():
            return _indist_structural(e1.body, e2.body,
                                      {**env1, e1.var: depth}, {**env2, e2.var: depth}, depth + 1) \
                and _indist_opt(e1.ty, e2.ty, env1, env2, depth)
        case Let():
            return (_indist_opt(e1.ty, e2.ty, env1, env2, depth)
                    and _indist_structural(e1.rhs, e2.rhs, env1, env2, depth)
                    and _indist_structural(e1.body, e2.body,
                                           {**env1, e1.var: depth}, {**env2, e2.var: depth}, depth + 1))
        case Pi():
            return (_indist_structural(e1.dom, e2.dom, env1, env2, depth)
                    and _indist_structural(e1.cod, e2.cod,
                                           {**env1, e1.var: depth}, {**env2, e2.var: depth}, depth + 1))
        case OMatch():
            return (_indist_structural(e1.scrut, e2.scrut, env1, env2, depth)
                    and _indist_structural(e1.lbody, e2.lbody,
                                           {**env1, e1.lvar: depth}, {**env2, e2.lvar: depth}, depth + 1)
                    and _indist_structural(e1.rbody, e2.rbody,
                                           {**env1, e1.rvar: depth}, {**env2, e2.rvar: depth}, depth + 1))
        case Match():
            if len(e1.branches) != len(e2.branches):
                return False
            if not _indist_structural(e1.scrut, e2.scrut, env1, env2, depth):
                return False
            for (c1, x1, b1), (c2, x2, b2) in zip(e1.branches, e2.branches):
                if c1 != c2:
                    return False
                if not _indist_structural(b1, b2, {**env1, x1: depth}, {**env2, x2: depth}, depth + 1):
                    return False
            return True
        case _:
            for f in fields(e1):
                v1, v2 = getattr(e1, f.name), getattr(e2, f.name)
                if isinstance(v1, Expr) or isinstance(v2, Expr):
                    if not (isinstance(v1, Expr) and isinstance(v2, Expr)):
                        return False
                    if not _indist_structural(v1, v2, env1, env2, depth):
                        return False
                elif f.name != "branches" and v1 != v2:
                    return False
            return True


def _indist_opt(t1, t2, env1, env2, depth):
    if (t1 is None) != (t2 is None):
        return False
    return t1 is None or _indist_structural(t1, t2, env1, env2, depth)
