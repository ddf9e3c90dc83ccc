"""Concrete syntax of ``.aic`` program files.

    region r volatile : 1 family aff
    var y : (inf, Reg r 1)
    program (\\x:!Reg r 1. let !x = x in (get(x) | set(x, *))) !y

Binders are renamed apart on load so that every bound name is globally
distinct, and every identifier must resolve to a binder or a ``var``
declaration.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .syntax import (
    STORES, App, Bang, Get, Lam, LetBang, Nu, Par, SetP, SetV, StoreP, StoreV,
    Term, UNIT, Var, children, fresh_name, is_value, render,
)
from .types import BEH, ONE, TArrow, TBang, TReg, Type, show_type
from .usage import Family, Mult


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message, self.line, self.col = message, line, col
        super().__init__(f"{line}:{col}: {message}")


@dataclass(frozen=True)
class RegionDecl:
    name: str
    persistent: bool
    content: Type
    family: Family

    @property
    def volatile(self) -> bool:
        return not self.persistent


@dataclass(frozen=True)
class VarDecl:
    name: str
    mult: Mult
    ty: Type


@dataclass(frozen=True)
class SourceFile:
    regions: tuple = ()
    vars: tuple = ()
    program: Term = field(default=UNIT)

    def region(self, name: str) -> RegionDecl | None:
        for r in self.regions:
            if r.name == name:
                return r
        return None

    def with_program(self, program: Term) -> SourceFile:
        return replace(self, program=program)


# --------------------------------------------------------------------- lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+|\#[^\n]*)
  | (?P<nl>\n)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<num>[0-9]+)
  | (?P<sym>-o|-\{|\}>|<-|<=|[\\λ:.()!=|;\[\],{}*^])
    """,
    re.VERBOSE,
)

KEYWORDS = {"let", "in", "nu", "get", "set", "pset", "program", "region", "var"}


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    out, line, start, pos = [], 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind != "ws":
            s = m.group()
            out.append(Token("sym" if s == "λ" else kind, "\\" if s == "λ" else s, line, m.start() - start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - start + 1))
    return out


# -------------------------------------------------------------------- parser


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.scope: dict[str, str] = {}
        self.taken: set[str] = set()
        self.pos: dict[int, Token] = {}

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "name", "num") and self.tok.text == text

    def eat(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self) -> Token:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            raise self.error(f"expected an identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    # declarations
    def file(self) -> SourceFile:
        regions, vars = [], []
        seen_r, seen_v = set(), set()
        while not self.at("program"):
            if self.at("region"):
                self.eat("region")
                n = self.name()
                if n.text in seen_r:
                    raise self.error(f"duplicate region {n.text}", n)
                seen_r.add(n.text)
                if self.at("volatile") or self.at("persistent"):
                    persistent = self.name().text == "persistent"
                else:
                    raise self.error("expected 'volatile' or 'persistent'")
                self.eat(":")
                content = self.type()
                self.eat("family")
                fam = self.name()
                try:
                    family = Family(fam.text)
                except ValueError:
                    raise self.error(f"unknown family {fam.text!r}", fam) from None
                if persistent and not isinstance(content, TBang):
                    raise self.error(f"persistent region {n.text} needs a !-type content", n)
                regions.append(RegionDecl(n.text, persistent, content, family))
            elif self.at("var"):
                self.eat("var")
                n = self.name()
                if n.text in seen_v:
                    raise self.error(f"duplicate variable {n.text}", n)
                seen_v.add(n.text)
                self.eat(":")
                self.eat("(")
                if self.at("1"):
                    self.eat("1")
                    mult = Mult.ONE
                elif self.at("inf"):
                    self.eat("inf")
                    mult = Mult.INF
                else:
                    raise self.error("expected usage 1 or inf")
                self.eat(",")
                ty = self.type()
                self.eat(")")
                vars.append(VarDecl(n.text, mult, ty))
            else:
                raise self.error("expected 'region', 'var' or 'program'")
        self.eat("program")
        for v in vars:
            self.scope[v.name] = v.name
            self.taken.add(v.name)
        prog = self.term()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        self.check_static(prog, True)
        return SourceFile(tuple(regions), tuple(vars), prog)

    # types
    def type(self) -> Type:
        dom = self.type_atom()
        if self.at("-o"):
            self.eat("-o")
            return TArrow(dom, frozenset(), self.type())
        if self.at("-{"):
            self.eat("-{")
            eff = []
            while not self.at("}>"):
                eff.append(self.name().text)
                if not self.at("}>"):
                    self.eat(",")
            self.eat("}>")
            return TArrow(dom, frozenset(eff), self.type())
        return dom

    def type_atom(self) -> Type:
        if self.at("1"):
            self.eat("1")
            return ONE
        if self.at("B"):
            self.eat("B")
            return BEH
        if self.at("!"):
            self.eat("!")
            return TBang(self.type_atom())
        if self.at("Reg"):
            self.eat("Reg")
            r = self.name().text
            return TReg(r, self.type_atom())
        if self.at("("):
            self.eat("(")
            t = self.type()
            self.eat(")")
            return t
        raise self.error(f"expected a type, found {self.tok.text or 'end of input'!r}")

    # terms
    def bind(self, tok: Token):
        new = fresh_name(tok.text, self.taken)
        self.taken.add(new)
        old = self.scope.get(tok.text)
        self.scope[tok.text] = new
        return new, old

    def unbind(self, name: str, old) -> None:
        if old is None:
            del self.scope[name]
        else:
            self.scope[name] = old

    def term(self) -> Term:
        left = self.seq_term()
        if self.at("|"):
            self.eat("|")
            return Par(left, self.term())
        return left

    def seq_term(self) -> Term:
        if self.at("\\") or self.at("let") or self.at("nu"):
            return self.binder()
        first = self.app()
        if self.at(";"):
            self.eat(";")
            z = fresh_name("z", self.taken)
            self.taken.add(z)
            return App(Lam(z, ONE, self.seq_term()), first)
        return first

    def binder(self) -> Term:
        if self.at("\\"):
            self.eat("\\")
            x = self.name()
            self.eat(":")
            ty = self.type()
            self.eat(".")
            new, old = self.bind(x)
            body = self.term()
            self.unbind(x.text, old)
            return Lam(new, ty, body)
        if self.at("let"):
            self.eat("let")
            self.eat("!")
            x = self.name()
            self.eat("=")
            bound = self.term()
            self.eat("in")
            new, old = self.bind(x)
            body = self.term()
            self.unbind(x.text, old)
            return LetBang(new, bound, body)
        self.eat("nu")
        x = self.name()
        self.eat(":")
        tt = self.tok
        ty = self.type()
        if not isinstance(ty, TReg):
            raise self.error("a nu binder needs a 'Reg r T' annotation", tt)
        self.eat(".")
        new, old = self.bind(x)
        body = self.term()
        self.unbind(x.text, old)
        return Nu(new, ty.region, ty.content, body)

    def starts_prefix(self) -> bool:
        t = self.tok
        if t.kind == "name":
            return t.text not in KEYWORDS or t.text in ("get", "set", "pset")
        return t.kind == "sym" and t.text in ("*", "(", "!", "[")

    def app(self) -> Term:
        if not self.starts_prefix():
            raise self.error(f"expected a term, found {self.tok.text or 'end of input'!r}")
        t = self.prefix()
        while self.starts_prefix():
            t = App(t, self.prefix())
        return t

    def prefix(self) -> Term:
        if self.at("!"):
            self.eat("!")
            return Bang(self.prefix())
        return self.atom()

    def var(self) -> Var:
        tok = self.name()
        if tok.text not in self.scope:
            raise self.error(f"unresolved identifier {tok.text!r}", tok)
        v = Var(self.scope[tok.text])
        if self.at("^"):
            self.eat("^")
            v = Var(v.name, self.name().text)
        return v

    def value(self) -> Term:
        tok = self.tok
        v = self.term()
        if not is_value(v):
            raise self.error(f"expected a value, found {render(v)}", tok)
        return v

    def atom(self) -> Term:
        tok = self.tok
        if self.at("*"):
            self.eat("*")
            return UNIT
        if self.at("("):
            self.eat("(")
            t = self.term()
            self.eat(")")
            return t
        if self.at("get"):
            self.eat("get")
            self.eat("(")
            a = self.var()
            self.eat(")")
            return Get(a)
        if self.at("set") or self.at("pset"):
            ctor = SetV if self.tok.text == "set" else SetP
            self.i += 1
            self.eat("(")
            a = self.var()
            self.eat(",")
            v = self.value()
            self.eat(")")
            return ctor(a, v)
        if self.at("["):
            self.eat("[")
            a = self.var()
            if self.at("<-"):
                self.eat("<-")
                ctor = StoreV
            else:
                self.eat("<=")
                ctor = StoreP
            v = self.value()
            self.eat("]")
            t = ctor(a, v)
            self.pos[id(t)] = tok
            return t
        return self.var()

    def check_static(self, t: Term, static: bool) -> None:
        if isinstance(t, STORES) and not static:
            tok = self.pos.get(id(t))
            raise ParseError(
                "store in non-static position", tok.line if tok else 0, tok.col if tok else 0
            )
        keep = static and isinstance(t, (Par, Nu))
        for c in children(t):
            self.check_static(c, keep)


def parse(text: str) -> SourceFile:
    return _Parser(text).file()


def parse_term(text: str, file: SourceFile | None = None) -> Term:
    """Parse a bare term in the scope of ``file``'s declarations."""
    decls = "".join(_var_line(v) + "\n" for v in (file.vars if file else ()))
    return parse(decls + "program " + text).program


# ------------------------------------------------------------------- printer


def _var_line(v: VarDecl) -> str:
    return f"var {v.name} : ({v.mult}, {show_type(v.ty)})"


def region_line(r: RegionDecl) -> str:
    vol = "persistent" if r.persistent else "volatile"
    return f"region {r.name} {vol} : {show_type(r.content)} family {r.family}"


def print_file(f: SourceFile) -> str:
    lines = [region_line(r) for r in f.regions]
    lines += [_var_line(v) for v in f.vars]
    lines.append("program " + render(f.program))
    return "\n".join(lines) + "\n"
