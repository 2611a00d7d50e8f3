"""Lexer, recursive-descent parser and elaborator for ``.ul`` source files.

The grammar is documented in ``docs/syntax.md``.  Which language a term
belongs to is decided by boundary nesting: ``main`` and ``def`` bodies are U,
``ldef`` bodies are L, ``UL { ... }`` switches to L and ``LU { ... }`` back to U.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .ast import (
    EMPTY, EMPTY_STORE, L_BOX0, L_ONE, L_UNITV, U_UNIT, U_UNITV, UL, Configuration, Full, LApp,
    LBang, LBox, LBoxE, LCase, LCopy, LFix, LFold, LFree, LInj, LInst, LLam, LLetPair,
    LLetUnit, LLoc, LLolli, LLumpOp, LLumpT, LLumpVal, LMu, LNew, LPair, LPhase, LPlus, LShare,
    LTensor, LTVar, LU, LUnboxE, LUnfold, LUnlumpOp, LVar, Store, UApp, UCase, UFix, UFold,
    UForall, UFst, UFun, UHole, UInj, ULam, ULetUnit, UMu, UPair, UProd, USnd, USum, UTApp,
    UTLam, UTVar, UUnfold, UVar, children, fresh_name, rebuild, subst_lty, subst_ltype,
    subst_utype,
)
from .errors import ParseError, UnboundName, UnboundVariable

KEYWORDS = frozenset("""
    fun Fun fix let in case of inl inr fst snd fold unfold unit mu forall UL LU share copy
    new free box unbox lump unlump Box Box0 Lump with empty def ldef type ltype main phase hole
""".split())

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>--[^\n]*)
  | (?P<loc>\#[0-9]+)
  | (?P<num>[0-9]+)
  | (?P<id>[A-Za-z_][A-Za-z0-9_'$]*)
  | (?P<sym>\[\||\|\]|->|-o|:=|[(),:;={}\[\]|*+!.@])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # "id", "kw", "sym", "num", "loc", "eof"
    value: object
    line: int
    col: int

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        return repr(str(self.value)) if self.kind != "loc" else f"#{self.value}"


def tokenize(text: str) -> list:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "id":
            word = m.group()
            tokens.append(Token("kw" if word in KEYWORDS else "id", word, line, col))
        elif kind == "num":
            tokens.append(Token("num", int(m.group()), line, col))
        elif kind == "loc":
            tokens.append(Token("loc", int(m.group()[1:]), line, col))
        elif kind == "sym":
            tokens.append(Token("sym", m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", None, line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Source files
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TypeAbbrev:
    name: str
    lang: str  # "U" or "L"
    params: tuple
    body: object


@dataclass(frozen=True)
class Definition:
    name: str
    lang: str  # "U" or "L"
    params: tuple  # L type parameters of templates
    body: object


@dataclass
class SourceFile:
    items: list = field(default_factory=list)
    main: Optional[object] = None
    uabbrevs: dict = field(default_factory=dict)
    labbrevs: dict = field(default_factory=dict)

    @property
    def definitions(self) -> list:
        return [it for it in self.items if isinstance(it, Definition)]

    def render(self) -> str:
        from .pretty import lexpr_str, ltype_str, uexpr_str, utype_str

        lines = []
        for it in self.items:
            params = "".join(f" {p}" for p in it.params)
            if isinstance(it, TypeAbbrev):
                kw = "type" if it.lang == "U" else "ltype"
                body = utype_str(it.body) if it.lang == "U" else ltype_str(it.body)
                lines.append(f"{kw} {it.name}{params} = {body};")
            elif it.lang == "U":
                lines.append(f"def {it.name} = {uexpr_str(it.body)};")
            else:
                tparams = f" [{', '.join(it.params)}]" if it.params else ""
                lines.append(f"ldef {it.name}{tparams} = {lexpr_str(it.body)};")
        if self.main is not None:
            lines.append(f"main = {uexpr_str(self.main)};")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_U_ATOM_START = frozenset({"identifier", "'('", "'UL'", "'hole'"})
_L_ATOM_START = frozenset({"identifier", "'('", "'LU'", "location", "'[|'", "'phase'"})


class Parser:
    def __init__(self, text: str, uabbrevs: Optional[dict] = None, labbrevs: Optional[dict] = None):
        self.toks = tokenize(text)
        self.i = 0
        self.uabbrevs = dict(uabbrevs or {})
        self.labbrevs = dict(labbrevs or {})

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, value: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "kw") and t.value == value

    def at_id(self) -> bool:
        return self.tok.kind == "id"

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def fail(self, expected) -> ParseError:
        t = self.tok
        return ParseError(f"unexpected {t.describe()}", t.line, t.col, frozenset(expected))

    def expect(self, value: str) -> Token:
        if not self.at(value):
            raise self.fail({f"'{value}'"})
        return self.advance()

    def accept(self, value: str) -> bool:
        if self.at(value):
            self.advance()
            return True
        return False

    def ident(self) -> str:
        if not self.at_id():
            raise self.fail({"identifier"})
        return self.advance().value

    # -- U types ------------------------------------------------------------

    def utype(self):
        left = self.usum_t()
        if self.accept("->"):
            return UFun(left, self.utype())
        return left

    def usum_t(self):
        left = self.uprod_t()
        if self.accept("+"):
            return USum(left, self.usum_t())
        return left

    def uprod_t(self):
        left = self.uatom_t()
        if self.accept("*"):
            return UProd(left, self.uprod_t())
        return left

    def uatom_t(self):
        if self.accept("unit"):
            return U_UNIT
        if self.accept("("):
            t = self.utype()
            self.expect(")")
            return t
        if self.at("mu") or self.at("forall"):
            ctor = UMu if self.advance().value == "mu" else UForall
            var = self.ident()
            self.expect(".")
            return ctor(var, self.utype())
        if self.at_id():
            name = self.advance().value
            if name in self.uabbrevs:
                params, body = self.uabbrevs[name]
                args = [self.uatom_t() for _ in params]
                return _instantiate_u(params, body, args)
            return UTVar(name)
        raise self.fail({"'unit'", "'('", "'mu'", "'forall'", "identifier"})

    # -- L types ------------------------------------------------------------

    def ltype(self):
        left = self.lsum_t()
        if self.accept("-o"):
            return LLolli(left, self.ltype())
        return left

    def lsum_t(self):
        left = self.ltensor_t()
        if self.accept("+"):
            return LPlus(left, self.lsum_t())
        return left

    def ltensor_t(self):
        left = self.lprefix_t()
        if self.accept("*"):
            return LTensor(left, self.ltensor_t())
        return left

    def lprefix_t(self):
        if self.accept("!"):
            return LBang(self.lprefix_t())
        if self.accept("Box"):
            return LBox(self.lprefix_t())
        return self.latom_t()

    def latom_t(self):
        t = self.tok
        if t.kind == "num" and t.value == 1:
            self.advance()
            return L_ONE
        if self.accept("Box0"):
            return L_BOX0
        if self.accept("Lump"):
            self.expect("(")
            u = self.utype()
            self.expect(")")
            return LLumpT(u)
        if self.accept("("):
            ty = self.ltype()
            self.expect(")")
            return ty
        if self.accept("mu"):
            var = self.ident()
            self.expect(".")
            return LMu(var, self.ltype())
        if self.at_id():
            name = self.advance().value
            if name in self.labbrevs:
                params, body = self.labbrevs[name]
                args = [self.lprefix_t() for _ in params]
                return _instantiate_l(params, body, args)
            return LTVar(name)
        raise self.fail({"'1'", "'Box0'", "'Lump'", "'('", "'mu'", "'!'", "'Box'", "identifier"})

    # -- stores -------------------------------------------------------------

    def store(self) -> Store:
        self.expect("{")
        cells = {}
        if not self.at("}"):
            while True:
                t = self.tok
                if t.kind != "loc":
                    raise self.fail({"location"})
                self.advance()
                self.expect(":=")
                if self.accept("empty"):
                    cells[t.value] = EMPTY
                else:
                    local = self.store()
                    cells[t.value] = Full(self.lexpr(), local)
                if not self.accept(","):
                    break
        self.expect("}")
        return Store(cells)

    def opt_with_store(self) -> Store:
        if self.accept("with"):
            return self.store()
        return EMPTY_STORE

    # -- U expressions ------------------------------------------------------

    def uexpr(self):
        if self.accept("fun"):
            self.expect("(")
            var = self.ident()
            self.expect(":")
            ty = self.utype()
            self.expect(")")
            self.expect("->")
            return ULam(var, ty, self.uexpr())
        if self.accept("fix"):
            self.expect("(")
            var = self.ident()
            self.expect(":")
            ty = self.utype()
            self.expect(")")
            self.expect("->")
            return UFix(var, ty, self.uexpr())
        if self.accept("Fun"):
            var = self.ident()
            self.expect("->")
            return UTLam(var, self.uexpr())
        if self.accept("let"):
            if self.accept("("):
                self.expect(")")
                self.expect("=")
                bound = self.uexpr()
                self.expect("in")
                return ULetUnit(bound, self.uexpr())
            var = self.ident()
            self.expect(":")
            ty = self.utype()
            self.expect("=")
            bound = self.uexpr()
            self.expect("in")
            return UApp(ULam(var, ty, self.uexpr()), bound)
        if self.accept("case"):
            scrut = self.uexpr()
            self.expect("of")
            self.expect("{")
            self.expect("inl")
            lvar = self.ident()
            self.expect("->")
            lbody = self.uexpr()
            self.expect("|")
            self.expect("inr")
            rvar = self.ident()
            self.expect("->")
            rbody = self.uexpr()
            self.expect("}")
            return UCase(scrut, lvar, lbody, rvar, rbody)
        return self.uapp()

    def uapp(self):
        e = self.uhead()
        while True:
            if self.at("["):
                self.advance()
                ty = self.utype()
                self.expect("]")
                e = UTApp(e, ty)
            elif self.starts_uatom():
                e = UApp(e, self.uatom())
            else:
                return e

    def starts_uatom(self) -> bool:
        return self.at_id() or self.at("(") or self.at("UL") or self.at("hole")

    def uhead(self):
        if self.accept("fst"):
            return UFst(self.uatom())
        if self.accept("snd"):
            return USnd(self.uatom())
        if self.at("inl") or self.at("inr"):
            index = 0 if self.advance().value == "inl" else 1
            self.expect("[")
            ty = self.utype()
            self.expect("]")
            return UInj(index, ty, self.uatom())
        if self.accept("fold"):
            self.expect("[")
            ty = self.utype()
            self.expect("]")
            return UFold(ty, self.uatom())
        if self.accept("unfold"):
            return UUnfold(self.uatom())
        return self.uatom()

    def uatom(self):
        if self.at_id():
            return UVar(self.advance().value)
        if self.accept("("):
            if self.accept(")"):
                return U_UNITV
            first = self.uexpr()
            if self.accept(","):
                second = self.uexpr()
                self.expect(")")
                return UPair(first, second)
            self.expect(")")
            return first
        if self.accept("UL"):
            store = self.opt_with_store()
            self.expect("{")
            body = self.lexpr()
            self.expect("}")
            return UL(store, body)
        if self.accept("hole"):
            self.expect("[")
            ty = self.utype()
            self.expect("]")
            return UHole(ty)
        raise self.fail(_U_ATOM_START | {"'fun'", "'let'", "'case'", "'fst'", "'snd'", "'inl'",
                                         "'inr'", "'fold'", "'unfold'", "'Fun'", "'fix'"})

    # -- L expressions ------------------------------------------------------

    def lexpr(self):
        if self.at("fun") or self.at("fix"):
            ctor = LLam if self.advance().value == "fun" else LFix
            self.expect("(")
            var = self.ident()
            self.expect(":")
            ty = self.ltype()
            self.expect(")")
            self.expect("-o")
            return ctor(var, ty, self.lexpr())
        if self.accept("let"):
            return self.llet()
        if self.accept("case"):
            scrut = self.lexpr()
            self.expect("of")
            self.expect("{")
            self.expect("inl")
            lpat = self.pattern()
            self.expect("->")
            lbody = self.lexpr()
            self.expect("|")
            self.expect("inr")
            rpat = self.pattern()
            self.expect("->")
            rbody = self.lexpr()
            self.expect("}")
            lvar, lbody = _bind_pattern(lpat, lbody)
            rvar, rbody = _bind_pattern(rpat, rbody)
            return LCase(scrut, lvar, lbody, rvar, rbody)
        return self.lapp()

    def llet(self):
        if self.at_id() and self.peek().kind == "sym" and self.peek().value == ":":
            var = self.ident()
            self.expect(":")
            ty = self.ltype()
            self.expect("=")
            bound = self.lexpr()
            self.expect("in")
            return LApp(LLam(var, ty, self.lexpr()), bound)
        pat = self.pattern()
        if pat[0] == "var":
            raise self.fail({"':'"})
        self.expect("=")
        bound = self.lexpr()
        self.expect("in")
        body = self.lexpr()
        return _match_pattern(pat, bound, body)

    def pattern(self):
        """Patterns: ``x``, ``()``, ``(p, p)`` and ``p@l``."""
        if self.at_id():
            pat = ("var", self.advance().value)
        elif self.accept("("):
            if self.accept(")"):
                pat = ("unit",)
            else:
                first = self.pattern()
                self.expect(",")
                second = self.pattern()
                self.expect(")")
                pat = ("pair", first, second)
        else:
            raise self.fail({"identifier", "'('"})
        while self.accept("@"):
            pat = ("box", pat, self.ident())
        return pat

    def lapp(self):
        e = self.lhead()
        while self.starts_latom():
            e = LApp(e, self.latom_post())
        return e

    def starts_latom(self) -> bool:
        return (self.at_id() or self.at("(") or self.at("LU") or self.tok.kind == "loc"
                or self.at("[|") or self.at("phase"))

    _PREFIX = {"copy": LCopy, "new": LNew, "free": LFree, "box": LBoxE, "unbox": LUnboxE,
               "unfold": LUnfold}

    def lhead(self):
        t = self.tok
        if t.kind == "kw" and t.value in self._PREFIX:
            self.advance()
            return self._PREFIX[t.value](self.latom_post())
        if self.at("share"):
            self.advance()
            store = self.opt_with_store()
            return LShare(store, self.latom_post())
        if self.at("inl") or self.at("inr"):
            index = 0 if self.advance().value == "inl" else 1
            ty = self.bracket_ltype()
            return LInj(index, ty, self.latom_post())
        if self.at("fold") or self.at("lump") or self.at("unlump"):
            ctor = {"fold": LFold, "lump": LLumpOp, "unlump": LUnlumpOp}[self.advance().value]
            ty = self.bracket_ltype()
            return ctor(ty, self.latom_post())
        return self.latom_post()

    def bracket_ltype(self):
        self.expect("[")
        ty = self.ltype()
        self.expect("]")
        return ty

    def latom_post(self):
        e = self.latom()
        while self.accept("@"):
            e = LBoxE(LPair(LVar(self.ident()), e))
        return e

    def latom(self):
        t = self.tok
        if t.kind == "id":
            self.advance()
            if self.at("["):
                self.advance()
                tys = [self.ltype()]
                while self.accept(","):
                    tys.append(self.ltype())
                self.expect("]")
                return LInst(t.value, tuple(tys))
            return LVar(t.value)
        if t.kind == "loc":
            self.advance()
            return LLoc(t.value)
        if self.accept("("):
            if self.accept(")"):
                return L_UNITV
            first = self.lexpr()
            if self.accept(","):
                second = self.lexpr()
                self.expect(")")
                return LPair(first, second)
            self.expect(")")
            return first
        if self.accept("LU"):
            self.expect("{")
            body = self.uexpr()
            self.expect("}")
            return LU(body)
        if self.accept("[|"):
            value = self.uexpr()
            self.expect("|]")
            return LLumpVal(value)
        if self.accept("phase"):
            name = self.ident()
            self.expect("{")
            body = self.lexpr()
            self.expect("}")
            return LPhase(name, body)
        raise self.fail(_L_ATOM_START | {"'fun'", "'let'", "'case'", "'share'", "'copy'", "'new'",
                                         "'free'", "'box'", "'unbox'", "'inl'", "'inr'", "'fold'",
                                         "'unfold'", "'lump'", "'unlump'", "'fix'"})

    # -- top level ----------------------------------------------------------

    def params(self) -> tuple:
        out = []
        while self.at_id():
            out.append(self.advance().value)
        return tuple(out)

    def source_file(self) -> SourceFile:
        sf = SourceFile()
        seen_main = False
        while self.tok.kind != "eof":
            if self.accept("type") or (self.at("ltype") and self.advance()):
                lang = "U" if self.toks[self.i - 1].value == "type" else "L"
                name = self.ident()
                params = self.params()
                self.expect("=")
                if lang == "U":
                    body = self.utype()
                    self.uabbrevs[name] = (params, body)
                else:
                    body = self.ltype()
                    self.labbrevs[name] = (params, body)
                self.expect(";")
                sf.items.append(TypeAbbrev(name, lang, params, body))
            elif self.accept("def"):
                name = self.ident()
                self.expect("=")
                body = self.uexpr()
                self.expect(";")
                sf.items.append(Definition(name, "U", (), body))
            elif self.accept("ldef"):
                name = self.ident()
                tparams: tuple = ()
                if self.accept("["):
                    names = [self.ident()]
                    while self.accept(","):
                        names.append(self.ident())
                    self.expect("]")
                    tparams = tuple(names)
                self.expect("=")
                body = self.lexpr()
                self.expect(";")
                sf.items.append(Definition(name, "L", tparams, body))
            elif self.at("main") and not seen_main:
                self.advance()
                self.expect("=")
                sf.main = self.uexpr()
                seen_main = True
                self.accept(";")
            else:
                raise self.fail({"'type'", "'ltype'", "'def'", "'ldef'", "'main'"}
                                if not seen_main else {"'type'", "'ltype'", "'def'", "'ldef'"})
        sf.uabbrevs = dict(self.uabbrevs)
        sf.labbrevs = dict(self.labbrevs)
        return sf

    def finish(self, value):
        if self.tok.kind != "eof":
            raise self.fail({"end of input"})
        return value


def _instantiate_u(params, body, args):
    fresh = [fresh_name(p) for p in params]
    for p, f in zip(params, fresh):
        body = subst_utype(body, p, UTVar(f))
    for f, a in zip(fresh, args):
        body = subst_utype(body, f, a)
    return body


def _instantiate_l(params, body, args):
    fresh = [fresh_name(p) for p in params]
    for p, f in zip(params, fresh):
        body = subst_ltype(body, p, LTVar(f))
    for f, a in zip(fresh, args):
        body = subst_ltype(body, f, a)
    return body


def _bind_pattern(pat, body):
    """Turn a case-arm pattern into a single binder plus a desugared body."""
    if pat[0] == "var":
        return pat[1], body
    tmp = fresh_name("p")
    return tmp, _match_pattern(pat, LVar(tmp), body)


def _match_pattern(pat, scrut, body):
    kind = pat[0]
    if kind == "var":
        raise AssertionError("variable patterns are bound by the caller")
    if kind == "unit":
        return LLetUnit(scrut, body)
    if kind == "pair":
        lvar, body = _sub_binder(pat[1], body)
        rvar, body = _sub_binder(pat[2], body)
        return LLetPair(lvar, rvar, scrut, body)
    # ("box", inner, l): unbox then match the content
    inner, loc_var = pat[1], pat[2]
    var, body = _sub_binder(inner, body)
    return LLetPair(loc_var, var, LUnboxE(scrut), body)


def _sub_binder(pat, body):
    if pat[0] == "var":
        return pat[1], body
    tmp = fresh_name("p")
    return tmp, _match_pattern(pat, LVar(tmp), body)


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------


def parse(text: str) -> SourceFile:
    """Parse a whole source file."""
    p = Parser(text)
    return p.source_file()


def parse_utype(text: str, abbrevs: Optional[dict] = None):
    p = Parser(text, uabbrevs=abbrevs)
    return p.finish(p.utype())


def parse_ltype(text: str, abbrevs: Optional[dict] = None, uabbrevs: Optional[dict] = None):
    p = Parser(text, uabbrevs=uabbrevs, labbrevs=abbrevs)
    return p.finish(p.ltype())


def parse_uexpr(text: str, uabbrevs: Optional[dict] = None, labbrevs: Optional[dict] = None):
    p = Parser(text, uabbrevs, labbrevs)
    return p.finish(p.uexpr())


def parse_lexpr(text: str, uabbrevs: Optional[dict] = None, labbrevs: Optional[dict] = None):
    p = Parser(text, uabbrevs, labbrevs)
    return p.finish(p.lexpr())


def parse_config(text: str) -> Configuration:
    """Parse ``with {store} e`` (or a bare L expression) as a configuration."""
    p = Parser(text)
    store = p.opt_with_store()
    return p.finish(Configuration(store, p.lexpr()))


# ---------------------------------------------------------------------------
# Elaboration
# ---------------------------------------------------------------------------


def fix_u(var: str, ty, body):
    """Expand ``fix (f : A -> B) -> body`` into a fold/unfold self-application."""
    if not isinstance(ty, UFun):
        from .errors import TypeMismatch
        from .pretty import utype_str

        raise TypeMismatch("a function type A -> B for fix", utype_str(ty), "fix")
    r, x, a, f = fresh_name("r"), fresh_name("x"), fresh_name("a"), fresh_name("F")
    rec = UMu(r, UFun(UTVar(r), ty))
    functional = UFun(ty, ty)

    def g():
        call = UApp(UApp(UUnfold(UVar(x)), UVar(x)), UVar(a))
        return ULam(x, rec, UApp(UVar(f), ULam(a, ty.arg, call)))

    wrapper = ULam(f, functional, UApp(g(), UFold(rec, g())))
    return UApp(wrapper, ULam(var, ty, body))


def fix_l(var: str, ty, body):
    """Expand ``fix (f : !(A -o B)) -o body`` using the recursive type ``mu r. !r -o (A -o B)``."""
    if not (isinstance(ty, LBang) and isinstance(ty.body, LLolli)):
        from .errors import TypeMismatch
        from .pretty import ltype_str

        raise TypeMismatch("a type !(A -o B) for fix", ltype_str(ty), "fix")
    fn = ty.body
    r, x, a, f = fresh_name("r"), fresh_name("x"), fresh_name("a"), fresh_name("F")
    rec = LMu(r, LLolli(LBang(LTVar(r)), fn))
    functional = LBang(LLolli(ty, fn))

    def g():
        call = LApp(LApp(LUnfold(LCopy(LVar(x))), LVar(x)), LVar(a))
        self_ref = LShare(EMPTY_STORE, LLam(a, fn.arg, call))
        return LLam(x, LBang(rec), LApp(LCopy(LVar(f)), self_ref))

    wrapper = LLam(f, functional, LApp(g(), LShare(EMPTY_STORE, LFold(rec, g()))))
    return LApp(wrapper, LShare(EMPTY_STORE, LLam(var, ty, body)))


@dataclass(frozen=True)
class ElaboratedDef:
    name: str
    lang: str
    params: tuple
    body: object


def _inline(e, defs: dict, bound: frozenset):
    """Replace references to definitions and expand fix/instantiation forms."""
    t = type(e)
    if t is UVar or t is LVar:
        if e.name in bound:
            return e
        d = defs.get(e.name)
        if d is None:
            raise UnboundVariable(f"unbound variable {e.name}", e.name)
        want = "U" if t is UVar else "L"
        if d.lang != want:
            raise UnboundName(f"{e.name} is an {d.lang} definition used in {want} code", e.name)
        if d.params:
            raise UnboundName(f"{e.name} needs type arguments [{', '.join(d.params)}]", e.name)
        return d.body
    if t is LInst:
        d = defs.get(e.name)
        if d is None or d.lang != "L" or e.name in bound:
            raise UnboundName(f"no L template named {e.name}", e.name)
        if len(d.params) != len(e.tys):
            raise UnboundName(f"{e.name} expects {len(d.params)} type arguments", e.name)
        body = d.body
        fresh = [fresh_name(p) for p in d.params]
        for p, f in zip(d.params, fresh):
            body = subst_lty(body, p, LTVar(f))
        for f, ty in zip(fresh, e.tys):
            body = subst_lty(body, f, ty)
        return body
    if t is UFix:
        return fix_u(e.var, e.ty, _inline(e.body, defs, bound | {e.var}))
    if t is LFix:
        return fix_l(e.var, e.ty, _inline(e.body, defs, bound | {e.var}))
    if t in (ULam, LLam):
        return t(e.var, e.ty, _inline(e.body, defs, bound | {e.var}))
    if t in (UCase, LCase):
        return t(_inline(e.scrut, defs, bound), e.lvar, _inline(e.lbody, defs, bound | {e.lvar}),
                 e.rvar, _inline(e.rbody, defs, bound | {e.rvar}))
    if t is LLetPair:
        return LLetPair(e.lvar, e.rvar, _inline(e.bound, defs, bound),
                        _inline(e.body, defs, bound | {e.lvar, e.rvar}))
    if t in (UL, LShare) and e.store:
        return t(_inline_store(e.store, defs, bound), _inline(e.body, defs, bound))
    kids = children(e)
    if not kids:
        return e
    return rebuild(e, [_inline(c, defs, bound) for c in kids])


def _inline_store(store: Store, defs, bound) -> Store:
    cells = {}
    for loc, slot in store.items():
        if isinstance(slot, Full):
            slot = Full(_inline(slot.value, defs, bound), _inline_store(slot.local, defs, bound))
        cells[loc] = slot
    return Store(cells)


def elaborate_definitions(sf: SourceFile) -> list:
    """Elaborate each definition in order against the ones before it."""
    defs: dict = {}
    out = []
    for d in sf.definitions:
        body = _inline(d.body, defs, frozenset())
        ed = ElaboratedDef(d.name, d.lang, d.params, body)
        defs[d.name] = ed
        out.append(ed)
    return out


def elaborate(sf: SourceFile, main=None):
    """Inline all definitions into ``main`` and expand ``fix``; returns a closed U expression."""
    defs = {d.name: d for d in elaborate_definitions(sf)}
    target = main if main is not None else sf.main
    if target is None:
        raise UnboundName("the file has no main expression", "main")
    return _inline(target, defs, frozenset())


def elaborate_expr(e, sf: Optional[SourceFile] = None):
    """Elaborate a stand-alone expression against the definitions of ``sf``."""
    defs = {d.name: d for d in elaborate_definitions(sf)} if sf else {}
    return _inline(e, defs, frozenset())
