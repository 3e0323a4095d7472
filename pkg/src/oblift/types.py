"""Simple types, specification types, erasure and compatibility classes."""

from __future__ import annotations

from dataclasses import dataclass

from . import syntax as S


@dataclass(frozen=True)
class STy:
    """Simple types: the policy-agnostic fragment."""


@dataclass(frozen=True)
class SUnit(STy):
    pass


@dataclass(frozen=True)
class SBool(STy):
    pass


@dataclass(frozen=True)
class SInt(STy):
    pass


@dataclass(frozen=True)
class SNat(STy):
    pass


@dataclass(frozen=True)
class SData(STy):
    name: str


@dataclass(frozen=True)
class SProd(STy):
    left: STy
    right: STy


@dataclass(frozen=True)
class SArrow(STy):
    dom: STy
    cod: STy


@dataclass(frozen=True)
class SpTy:
    """Specification types: simple types refined with oblivious atoms."""


@dataclass(frozen=True)
class PUnit(SpTy):
    pass


@dataclass(frozen=True)
class PBool(SpTy):
    pass


@dataclass(frozen=True)
class POBool(SpTy):
    pass


@dataclass(frozen=True)
class PInt(SpTy):
    pass


@dataclass(frozen=True)
class POInt(SpTy):
    pass


@dataclass(frozen=True)
class PNat(SpTy):
    pass


@dataclass(frozen=True)
class PData(SpTy):
    name: str


@dataclass(frozen=True)
class PPsi(SpTy):
    oadt: str


@dataclass(frozen=True)
class PProd(SpTy):
    left: SpTy
    right: SpTy


@dataclass(frozen=True)
class PArrow(SpTy):
    dom: SpTy
    cod: SpTy


@dataclass(frozen=True)
class TVar(SpTy):
    """Type variable standing for an undetermined specification type."""

    id: int


class EraseError(Exception):
    pass


def erase(theta: SpTy, sigma: dict) -> STy:
    """Map a specification type to its underlying simple type."""
    match theta:
        case PUnit():
            return SUnit()
        case PBool() | POBool():
            return SBool()
        case PInt() | POInt():
            return SInt()
        case PNat():
            return SNat()
        case PData(name=n):
            return SData(n)
        case PPsi(oadt=n):
            d = sigma.get(n)
            if d is None or not isinstance(d, S.OadtDef):
                raise EraseError(f"unknown oblivious type: {n}")
            pub = oadt_public_type(d, sigma)
            return SData(pub)
        case PProd(left=l, right=r):
            return SProd(erase(l, sigma), erase(r, sigma))
        case PArrow(dom=d, cod=c):
            return SArrow(erase(d, sigma), erase(c, sigma))
        case TVar():
            raise EraseError("cannot erase an unsolved type variable")
    raise EraseError(f"not a specification type: {theta}")


def compatible(t1: SpTy, t2: SpTy, sigma: dict) -> bool:
    """Whether two specification types share one erasure."""
    return erase(t1, sigma) == erase(t2, sigma)


_PUBLIC_TYPE_CACHE = {}


def oadt_public_type(d: S.OadtDef, sigma: dict) -> str:
    """The ADT an oblivious type conceals, read off its section function."""
    key = id(d)
    hit = _PUBLIC_TYPE_CACHE.get(key)
    if hit is not None:
        return hit
    sec = sigma.get(d.name + "#s")
    if sec is None or not isinstance(sec, S.FunDef):
        raise EraseError(f"oblivious type {d.name} lacks a section function")
    ty = sec.ty
    # section type: (k : view) -> T -> @T k
    if not isinstance(ty, S.Pi) or not isinstance(ty.cod, S.Pi):
        raise EraseError(f"malformed section type for {d.name}")
    dom = ty.cod.dom
    if not isinstance(dom, S.GName):
        raise EraseError(f"section of {d.name} must take a named public type")
    _PUBLIC_TYPE_CACHE[key] = dom.name
    return dom.name


def simple_to_spec(eta: STy) -> SpTy:
    match eta:
        case SUnit():
            return PUnit()
        case SBool():
            return PBool()
        case SInt():
            return PInt()
        case SNat():
            return PNat()
        case SData(name=n):
            return PData(n)
        case SProd(left=l, right=r):
            return PProd(simple_to_spec(l), simple_to_spec(r))
        case SArrow(dom=d, cod=c):
            return PArrow(simple_to_spec(d), simple_to_spec(c))
    raise ValueError(f"bad simple type: {eta}")


def spec_to_expr(theta: SpTy) -> S.Expr:
    match theta:
        case PUnit():
            return S.TUnit()
        case PBool():
            return S.TBool()
        case POBool():
            return S.TOBool()
        case PInt():
            return S.TInt()
        case POInt():
            return S.TOInt()
        case PNat():
            return S.TNat()
        case PData(name=n):
            return S.GName(n)
        case PPsi(oadt=n):
            return S.PsiType(n)
        case PProd(left=l, right=r):
            return S.Prod(spec_to_expr(l), spec_to_expr(r))
        case PArrow(dom=d, cod=c):
            return S.Pi("_", spec_to_expr(d), spec_to_expr(c))
    raise ValueError(f"cannot express {theta} as a type")


def simple_to_expr(eta: STy) -> S.Expr:
    return spec_to_expr(simple_to_spec(eta))


def expr_to_spec(e: S.Expr, sigma: dict) -> SpTy:
    """Read a closed type expression back as a specification type."""
    match e:
        case S.TUnit():
            return PUnit()
        case S.TBool():
            return PBool()
        case S.TOBool():
            return POBool()
        case S.TInt():
            return PInt()
        case S.TOInt():
            return POInt()
        case S.TNat():
            return PNat()
        case S.GName(name=n) if isinstance(sigma.get(n), S.DataDef):
            return PData(n)
        case S.PsiType(oadt=n):
            return PPsi(n)
        case S.Prod(left=l, right=r):
            return PProd(expr_to_spec(l, sigma), expr_to_spec(r, sigma))
        case S.Pi(var=v, dom=d, cod=c):
            cod = expr_to_spec(c, sigma)
            if v in S.free_vars(c):
                raise EraseError("dependent type is not a specification type")
            return PArrow(expr_to_spec(d, sigma), cod)
    raise EraseError(f"not a specification type expression: {e}")


def expr_to_simple(e: S.Expr, sigma: dict) -> STy:
    sp = expr_to_spec(e, sigma)
    eta = erase(sp, sigma)
    if simple_to_spec(eta) != sp:
        raise EraseError(f"not a simple type: {e}")
    return eta


def spec_atoms(theta: SpTy):
    match theta:
        case PProd(left=l, right=r) | PArrow(dom=l, cod=r):
            yield from spec_atoms(l)
            yield from spec_atoms(r)
        case _:
            yield theta


def is_ground(theta: SpTy) -> bool:
    return not any(isinstance(a, TVar) for a in spec_atoms(theta))
