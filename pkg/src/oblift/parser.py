"""Surface syntax for .tpsi files: lexer, parser, name resolution."""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import syntax as S


class ParseError(Exception):
    def __init__(self, msg, line=None, col=None):
        self.line, self.col = line, col
        where = f" at {line}:{col}" if line is not None else ""
        super().__init__(msg + where)


@dataclass
class Tok:
    kind: str  # NAME INT OP PSITYPE EOF
    text: str
    line: int
    col: int


_NAME_RE = re.compile(
    r"@[A-Za-z_][A-Za-z0-9_']*(?:<=|==)?"
    r"(?:#[A-Za-z_][A-Za-z0-9_']*(?:@[A-Za-z_][A-Za-z0-9_']*(?:<=|==)?)?)?"
    r"(?:\$[A-Za-z0-9]+)?"
    r"|[A-Za-z_][A-Za-z0-9_']*(?:\$[A-Za-z0-9]+)?"
)

_OPS = [")&", "#[", "=>", "->", "@<=", "@<", "@=", "@+", "@-", "@*",
        "<=", "<", ">", "=", "+", "-", "*", "(", ")", "[", "]",
        ",", ":", "|", "?", "]"]

KEYWORDS = {"data", "fn", "unsafe", "obliv", "let", "in", "if", "then",
            "else", "mux", "match", "with", "Mlift"}


def tokenize(text: str):
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("--", i):
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        if c == "&":
            if text.startswith("&(", i):
                toks.append(Tok("OP", "&(", line, col))
                i += 2
                col += 2
                continue
            m = _NAME_RE.match(text, i + 1)
            if m and m.group(0).startswith("@"):
                toks.append(Tok("PSITYPE", m.group(0), line, col))
                adv = 1 + len(m.group(0))
                i += adv
                col += adv
                continue
            raise ParseError("stray '&'", line, col)
        m = _NAME_RE.match(text, i)
        if m:
            toks.append(Tok("NAME", m.group(0), line, col))
            i = m.end()
            col += len(m.group(0))
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(Tok("INT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for op in _OPS:
            if text.startswith(op, i):
                toks.append(Tok("OP", op, line, col))
                i += len(op)
                col += len(op)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(Tok("EOF", "", line, col))
    return toks


# patterns for binder positions -------------------------------------------

@dataclass
class PVar:
    name: str
    ty: S.Expr | None = None


@dataclass
class PTuple:
    parts: list


@dataclass
class PPsiPair:
    parts: list


class Parser:
    def __init__(self, toks):
        self.toks = toks
        self.i = 0

    def peek(self, k=0) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> Tok:
        t = self.toks[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def at(self, text) -> bool:
        t = self.peek()
        return t.text == text and t.kind in ("OP", "NAME")

    def expect(self, text) -> Tok:
        t = self.next()
        if t.text != text:
            raise ParseError(f"expected {text!r}, found {t.text!r}", t.line, t.col)
        return t

    def err(self, msg):
        t = self.peek()
        raise ParseError(msg, t.line, t.col)

    # -- expressions --------------------------------------------------------

    def parse_expr(self, no_eq=False) -> S.Expr:
        return self.parse_arrow(no_eq)

    def parse_arrow(self, no_eq=False) -> S.Expr:
        # dependent binder: (x : ty) -> cod
        if self.at("(") and self.peek(1).kind == "NAME" and self.peek(2).text == ":":
            save = self.i
            try:
                self.next()
                x = self.next().text
                self.expect(":")
                dom = self.parse_expr(no_eq=True)
                self.expect(")")
                if self.at("->"):
                    self.next()
                    cod = self.parse_arrow(no_eq)
                    return S.Pi(x, dom, cod)
                self.i = save
            except ParseError:
                self.i = save
        left = self.parse_cmp(no_eq)
        if self.at("->"):
            self.next()
            cod = self.parse_arrow(no_eq)
            return S.Pi("_", left, cod)
        return left

    _CMP = {"<=": "le", "<": "lt", "=": "eq", "@<=": "ole", "@<": "olt", "@=": "oeq"}

    def parse_cmp(self, no_eq=False) -> S.Expr:
        left = self.parse_add()
        t = self.peek()
        if t.kind == "OP" and t.text in self._CMP:
            if t.text == "=" and no_eq:
                return left
            self.next()
            right = self.parse_add()
            return S.PrimOp(self._CMP[t.text], left, right)
        return left

    _ADD = {"+": "add", "-": "sub", "@+": "@+", "@-": "osub"}

    def parse_add(self) -> S.Expr:
        left = self.parse_mul()
        while True:
            t = self.peek()
            if t.kind == "OP" and t.text in self._ADD:
                self.next()
                right = self.parse_mul()
                if t.text == "@+":
                    left = S.OSum(left, right)
                else:
                    left = S.PrimOp(self._ADD[t.text], left, right)
            else:
                return left

    def parse_mul(self) -> S.Expr:
        left = self.parse_app()
        t = self.peek()
        if t.kind == "OP" and t.text in ("*", "@*"):
            self.next()
            right = self.parse_mul()  # right-nested, like tuples
            if t.text == "*":
                return S.Prod(left, right)
            return S.PrimOp("omul", left, right)
        return left

    def parse_app(self) -> S.Expr:
        t = self.peek()
        if t.text == "?" and t.kind == "OP":
            return self.parse_lambda()
        if t.kind == "NAME" and t.text in ("let", "if", "mux", "match", "@match", "Mlift"):
            return self.parse_prefix_form(t.text)
        if t.kind == "NAME" and t.text in ("@inl", "@inr", "@arb"):
            return self.parse_injection()
        head = self.parse_primary()
        while self.starts_primary():
            head = S.App(head, self.parse_primary())
        return head

    def starts_primary(self) -> bool:
        t = self.peek()
        if t.kind in ("INT", "PSITYPE"):
            return True
        if t.kind == "NAME":
            return t.text not in KEYWORDS and t.text not in (
                "in", "then", "else", "with", "@match", "@inl", "@inr", "@arb")
        return t.kind == "OP" and t.text in ("(", "[", "&(")

    def parse_lambda(self) -> S.Expr:
        self.expect("?")
        pats = []
        while not self.at("=>"):
            pats.append(self.parse_pattern())
        self.expect("=>")
        body = self.parse_expr()
        for p in reversed(pats):
            body = self.bind_pattern_lambda(p, body)
        return body

    def parse_prefix_form(self, kw) -> S.Expr:
        self.next()
        if kw == "let":
            t = self.next()
            if t.kind == "OP" and t.text == "(":
                # tuple pattern let
                self.i -= 1
                pat = self.parse_pattern()
                self.expect("=")
                rhs = self.parse_expr()
                self.expect("in")
                body = self.parse_expr()
                return self.bind_pattern_let(pat, None, rhs, body)
            name = t.text
            ty = None
            if self.at(":"):
                self.next()
                ty = self.parse_expr(no_eq=True)
            self.expect("=")
            rhs = self.parse_expr()
            self.expect("in")
            body = self.parse_expr()
            return S.Let(name, ty, rhs, body)
        if kw == "if":
            cond = self.parse_expr()
            self.expect("then")
            then = self.parse_expr()
            self.expect("else")
            els = self.parse_expr()
            return S.If(cond, then, els)
        if kw == "mux":
            cond = self.parse_primary()
            then = self.parse_primary()
            els = self.parse_primary()
            return S.Mux(cond, then, els)
        if kw == "match":
            scrut = self.parse_expr()
            self.expect("with")
            branches = []
            if self.at("|"):
                self.next()
            while True:
                ctor = self.next().text
                pats = []
                while not self.at("=>"):
                    pats.append(self.parse_pattern())
                self.expect("=>")
                body = self.parse_expr()
                branches.append(self.make_match_branch(ctor, pats, body))
                if self.at("|"):
                    self.next()
                else:
                    break
            return S.Match(scrut, tuple(branches))
        if kw == "@match":
            scrut = self.parse_expr()
            self.expect("with")
            if self.at("|"):
                self.next()
            self.expect("@inl")
            lpat = self.parse_pattern()
            self.expect("=>")
            lbody = self.parse_expr()
            self.expect("|")
            self.expect("@inr")
            rpat = self.parse_pattern()
            self.expect("=>")
            rbody = self.parse_expr()
            lv, lbody = self.open_pattern(lpat, lbody)
            rv, rbody = self.open_pattern(rpat, rbody)
            return S.OMatch(scrut, lv, lbody, rv, rbody)
        if kw == "Mlift":
            self.err("Mlift is only allowed as a top-level function body")
        raise AssertionError(kw)

    def parse_injection(self) -> S.Expr:
        t = self.next()
        ty = None
        if self.at("<"):
            self.next()
            ty = self.parse_expr()
            self.expect(">")
        if t.text == "@arb":
            if ty is None:
                self.err("@arb requires a type annotation")
            return S.Arb(ty)
        arg = self.parse_primary()
        return S.OInj(t.text == "@inl", ty, arg)

    def parse_primary(self) -> S.Expr:
        t = self.peek()
        if t.kind == "INT":
            self.next()
            return S.IntLit(int(t.text))
        if t.kind == "PSITYPE":
            self.next()
            return S.PsiType(t.text)
        if t.kind == "NAME":
            self.next()
            txt = t.text
            if txt == "true":
                return S.BoolLit(True)
            if txt == "false":
                return S.BoolLit(False)
            if txt == "unit":
                return S.TUnit()
            if txt == "bool":
                return S.TBool()
            if txt == "@bool":
                return S.TOBool()
            if txt == "int":
                return S.TInt()
            if txt == "@int":
                return S.TOInt()
            if txt == "nat":
                return S.TNat()
            if txt == "alpha":
                return S.TypeHole()
            return S.Var(txt)
        if t.text == "(":
            self.next()
            if self.at(")"):
                self.next()
                return S.Unit()
            e = self.parse_expr()
            if self.at(":"):
                self.next()
                ty = self.parse_expr(no_eq=True)
                self.expect(")")
                return S.Ascribe(e, ty)
            parts = [e]
            while self.at(","):
                self.next()
                parts.append(self.parse_expr())
            self.expect(")")
            out = parts[-1]
            for p in reversed(parts[:-1]):
                out = S.Pair(p, out)
            return out
        if t.text == "&(":
            self.next()
            view = self.parse_expr()
            self.expect(",")
            payload = self.parse_expr()
            self.expect(")&")
            return S.PsiPair(view, payload)
        if t.text == "[":
            return self.parse_boxed()
        if t.text == "-":
            self.next()
            v = self.next()
            if v.kind != "INT":
                raise ParseError("expected integer literal after unary '-'", v.line, v.col)
            return S.IntLit(-int(v.text))
        self.err(f"unexpected token {t.text!r}")

    def parse_boxed(self) -> S.Expr:
        self.expect("[")
        t = self.peek()
        if t.text in ("inl", "inr"):
            self.next()
            self.expect("<")
            ty = self.parse_expr()
            self.expect(">")
            arg = self.parse_primary()
            self.expect("]")
            return S.BoxedInj(t.text == "inl", ty, arg)
        if t.text == "true" or t.text == "false":
            self.next()
            self.expect("]")
            return S.BoxedBool(t.text == "true")
        neg = False
        if self.at("-"):
            self.next()
            neg = True
        v = self.next()
        if v.kind != "INT":
            raise ParseError("malformed boxed literal", v.line, v.col)
        self.expect("]")
        n = int(v.text)
        return S.BoxedInt(-n if neg else n)

    # -- patterns ------------------------------------------------------------

    def parse_pattern(self):
        t = self.peek()
        if t.kind == "NAME" and t.text not in KEYWORDS:
            self.next()
            return PVar(t.text)
        if t.text == "(":
            self.next()
            if self.at(")"):
                self.next()
                return PVar("_")
            first = self.parse_pattern()
            if self.at(":"):
                self.next()
                ty = self.parse_expr(no_eq=True)
                self.expect(")")
                if not isinstance(first, PVar):
                    self.err("only variables may carry annotations")
                return PVar(first.name, ty)
            parts = [first]
            while self.at(","):
                self.next()
                parts.append(self.parse_pattern())
            self.expect(")")
            return parts[0] if len(parts) == 1 else PTuple(parts)
        if t.text == "&(":
            self.next()
            a = self.parse_pattern()
            self.expect(",")
            b = self.parse_pattern()
            self.expect(")&")
            return PPsiPair([a, b])
        self.err(f"bad pattern at {t.text!r}")

    _pat_counter = 0

    def fresh_pat_var(self) -> str:
        Parser._pat_counter += 1
        return f"p${Parser._pat_counter}"

    def open_pattern(self, pat, body):
        """Return (binder, body') where nested patterns become projections."""
        if isinstance(pat, PVar):
            name = pat.name if pat.name != "_" else self.fresh_pat_var()
            return name, body
        v = self.fresh_pat_var()
        return v, self.explode(pat, S.Var(v), body)

    def explode(self, pat, scrut: S.Expr, body: S.Expr) -> S.Expr:
        if isinstance(pat, PVar):
            if pat.name == "_":
                return body
            return S.Let(pat.name, pat.ty, scrut, body)
        parts = pat.parts
        out = body
        # right-nested tuples: part i is pi_1 of i-fold pi_2, last is pure pi_2s
        for idx in range(len(parts) - 1, -1, -1):
            access = scrut
            for _ in range(idx):
                access = S.Proj(2, access)
            if idx != len(parts) - 1:
                access = S.Proj(1, access)
            out = self.explode(parts[idx], access, out)
        return out

    def bind_pattern_lambda(self, pat, body) -> S.Expr:
        if isinstance(pat, PVar):
            name = pat.name if pat.name != "_" else self.fresh_pat_var()
            return S.Abs(name, pat.ty, body)
        v = self.fresh_pat_var()
        return S.Abs(v, None, self.explode(pat, S.Var(v), body))

    def bind_pattern_let(self, pat, ty, rhs, body) -> S.Expr:
        if isinstance(pat, PVar):
            return S.Let(pat.name, ty, rhs, body)
        v = self.fresh_pat_var()
        return S.Let(v, ty, rhs, self.explode(pat, S.Var(v), body))

    def make_match_branch(self, ctor, pats, body):
        if not pats:
            return (ctor, self.fresh_pat_var(), body)
        if len(pats) == 1:
            v, body = self.open_pattern(pats[0], body)
            return (ctor, v, body)
        v, body = self.open_pattern(PTuple(pats), body)
        return (ctor, v, body)

    # -- global definitions --------------------------------------------------

    def parse_program(self):
        defs, goals, positions, pragmas = [], [], {}, []
        while self.peek().kind != "EOF":
            t = self.peek()
            if t.text == "#[":
                pragmas.append(self.parse_pragma())
                continue
            if t.text == "data":
                d = self.parse_data()
            elif t.text == "unsafe":
                self.next()
                self.expect("fn")
                d = self.parse_fn(unsafe=True)
            elif t.text == "fn":
                self.next()
                d = self.parse_fn(unsafe=False)
            elif t.text == "obliv":
                d = self.parse_obliv()
            else:
                self.err(f"expected a definition, found {t.text!r}")
            if isinstance(d, S.LiftGoal):
                goals.append(d)
                positions[d.alias] = (t.line, t.col)
            else:
                if pragmas:
                    d = (d, tuple(pragmas))
                    pragmas = []
                defs.append(d)
                name = d[0].name if isinstance(d, tuple) else d.name
                positions[name] = (t.line, t.col)
        return defs, goals, positions

    def parse_pragma(self):
        self.expect("#[")
        kind = self.next().text
        self.expect("(")
        args = [self.next().text]
        while self.at(","):
            self.next()
            args.append(self.next().text)
        self.expect(")")
        self.expect("]")
        return (kind, tuple(args))

    def parse_data(self):
        self.expect("data")
        name = self.next().text
        self.expect("=")
        ctors = []
        while True:
            cname = self.next().text
            argtys = []
            while self.starts_primary():
                argtys.append(self.parse_primary())
            if not argtys:
                arg = S.TUnit()
            else:
                arg = argtys[-1]
                for a in reversed(argtys[:-1]):
                    arg = S.Prod(a, arg)
            ctors.append((cname, arg))
            if self.at("|"):
                self.next()
            else:
                break
        return S.DataDef(name, tuple(ctors))

    def parse_fn(self, unsafe):
        name = self.next().text
        self.expect(":")
        ty = self.parse_expr(no_eq=True)
        self.expect("=")
        if self.at("Mlift"):
            self.next()
            src = self.next().text
            if unsafe:
                self.err("lift goals cannot be unsafe")
            return S.LiftGoal(name, src, ty)
        body = self.parse_expr()
        return S.FunDef(name, ty, body, unsafe)

    def parse_obliv(self):
        self.expect("obliv")
        name = self.next().text
        self.expect("(")
        param = self.next().text
        self.expect(":")
        vty = self.parse_expr(no_eq=True)
        self.expect(")")
        self.expect("=")
        body = self.parse_expr()
        return S.OadtDef(name, param, vty, body)


# ---------------------------------------------------------------------------
# Name resolution

_SECTIONS = {"@bool#s": "bool", "@int#s": "int"}
_RETRACTIONS = {"@bool#r": "bool", "@int#r": "int"}


def resolve(e: S.Expr, ctors: set, globals_: set, bound: frozenset) -> S.Expr:
    match e:
        case S.Var(name=x):
            if x in bound:
                return e
            if x in ctors:
                return S.CtorApp(x, S.Unit())
            if x in ("pi_1", "pi_2") or x in _SECTIONS or x in _RETRACTIONS:
                raise ParseError(f"{x} must be applied to an argument")
            return S.GName(x)
        case S.App(fn=f, arg=a):
            a2 = resolve(a, ctors, globals_, bound)
            spine, args = f, [a2]
            while isinstance(spine, S.App):
                args.append(resolve(spine.arg, ctors, globals_, bound))
                spine = spine.fn
            if isinstance(spine, S.Var) and spine.name not in bound:
                h = spine.name
                args.reverse()
                if h in ctors:
                    arg = args[-1]
                    for p in reversed(args[:-1]):
                        arg = S.Pair(p, arg)
                    return S.CtorApp(h, arg)
                if h in ("pi_1", "pi_2"):
                    out = S.Proj(1 if h == "pi_1" else 2, args[0])
                    for extra in args[1:]:
                        out = S.App(out, extra)
                    return out
                if h in _SECTIONS:
                    out = S.Sec(_SECTIONS[h], args[0])
                    for extra in args[1:]:
                        out = S.App(out, extra)
                    return out
                if h in _RETRACTIONS:
                    out = S.Ret(_RETRACTIONS[h], args[0])
                    for extra in args[1:]:
                        out = S.App(out, extra)
                    return out
                out = S.GName(h)
                for x in args:
                    out = S.App(out, x)
                return out
            f2 = resolve(f, ctors, globals_, bound)
            return S.App(f2, a2)
        case S.Abs(var=x, ty=t, body=b):
            t2 = resolve(t, ctors, globals_, bound) if t is not None else None
            return S.Abs(x, t2, resolve(b, ctors, globals_, bound | {x}))
        case S.Let(var=x, ty=t, rhs=r, body=b):
            t2 = resolve(t, ctors, globals_, bound) if t is not None else None
            r2 = resolve(r, ctors, globals_, bound)
            return S.Let(x, t2, r2, resolve(b, ctors, globals_, bound | {x}))
        case S.Pi(var=x, dom=d, cod=c):
            return S.Pi(x, resolve(d, ctors, globals_, bound),
                        resolve(c, ctors, globals_, bound | {x}))
        case S.OMatch():
            return S.OMatch(
                resolve(e.scrut, ctors, globals_, bound),
                e.lvar, resolve(e.lbody, ctors, globals_, bound | {e.lvar}),
                e.rvar, resolve(e.rbody, ctors, globals_, bound | {e.rvar}))
        case S.Match(scrut=s, branches=bs):
            s2 = resolve(s, ctors, globals_, bound)
            out = tuple((c, x, resolve(b, ctors, globals_, bound | {x})) for (c, x, b) in bs)
            return S.Match(s2, out)
        case _:
            from dataclasses import fields
            kids = {f.name: getattr(e, f.name) for f in fields(e)}
            updates = {}
            for k, v in kids.items():
                if isinstance(v, S.Expr):
                    updates[k] = resolve(v, ctors, globals_, bound)
            if not updates:
                return e
            kids.update(updates)
            return type(e)(**kids)


def parse_program(text: str, extra_ctors=(), extra_globals=()) -> S.Program:
    """Parse one .tpsi source into a Program of global definitions and goals."""
    p = Parser(tokenize(text))
    raw_defs, goals, positions = p.parse_program()
    ctors = set(extra_ctors)
    gnames = set(extra_globals)
    pragma_map = {}
    defs = []
    for d in raw_defs:
        if isinstance(d, tuple):
            d, pragmas = d
            pragma_map[d.name] = pragmas
        defs.append(d)
        if isinstance(d, S.DataDef):
            for (c, _) in d.ctors:
                if c in ctors:
                    raise ParseError(f"duplicate constructor name: {c}")
                ctors.add(c)
        if d.name in gnames:
            raise ParseError(f"duplicate global name: {d.name}")
        gnames.add(d.name)
    for g in goals:
        if g.alias in gnames:
            raise ParseError(f"duplicate global name: {g.alias}")
        gnames.add(g.alias)

    resolved = []
    for d in defs:
        match d:
            case S.DataDef():
                resolved.append(S.DataDef(d.name, tuple(
                    (c, resolve(t, ctors, gnames, frozenset())) for (c, t) in d.ctors)))
            case S.FunDef():
                resolved.append(S.FunDef(
                    d.name,
                    resolve(d.ty, ctors, gnames, frozenset()),
                    resolve(d.body, ctors, gnames, frozenset()),
                    d.unsafe))
            case S.OadtDef():
                resolved.append(S.OadtDef(
                    d.name, d.param,
                    resolve(d.view_ty, ctors, gnames, frozenset()),
                    resolve(d.body, ctors, gnames, frozenset({d.param}))))
    goals = [S.LiftGoal(g.alias, g.source,
                        resolve(g.spec_ty, ctors, gnames, frozenset()))
             for g in goals]
    prog = S.Program(resolved, goals)
    prog.positions = positions
    prog.pragmas = pragma_map
    prog.ctor_names = ctors
    return prog


def parse_expr_text(text: str, ctors=(), globals_=()) -> S.Expr:
    p = Parser(tokenize(text))
    e = p.parse_expr()
    t = p.peek()
    if t.kind != "EOF":
        raise ParseError(f"trailing input {t.text!r}", t.line, t.col)
    return resolve(e, set(ctors), set(globals_), frozenset())


def merge_programs(programs) -> S.Program:
    defs, goals, positions, pragmas, ctors = [], [], {}, {}, set()
    for p in programs:
        defs.extend(p.defs)
        goals.extend(p.goals)
        positions.update(getattr(p, "positions", {}))
        pragmas.update(getattr(p, "pragmas", {}))
        ctors |= getattr(p, "ctor_names", set())
    merged = S.Program(defs, goals)
    merged.positions = positions
    merged.pragmas = pragmas
    merged.ctor_names = ctors
    seen = set()
    for d in defs:
        if d.name in seen:
            raise ParseError(f"duplicate global name: {d.name}")
        seen.add(d.name)
    return merged
