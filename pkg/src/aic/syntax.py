"""Abstract syntax of programs, substitution, canonical forms and decomposition.

Programs are immutable trees.  A program is brought into canonical prenex
form by extruding every ν reachable through parallel composition or an
evaluation context, flattening parallel composition, and separating stores
from threads.  Canonical forms are compared through an α-normal print.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

from .types import TReg, TUnit, Type, show_type


class MalformedProgram(Exception):
    """A store or parallel composition sits where only a term may appear."""


class ContractViolation(ValueError):
    """An operation was called outside its precondition."""


class Term:
    __slots__ = ()

    def __str__(self) -> str:
        return render(self)


@dataclass(frozen=True)
class Unit(Term):
    pass


@dataclass(frozen=True)
class Var(Term):
    name: str
    region: str | None = None


@dataclass(frozen=True)
class Lam(Term):
    var: str
    ty: Type
    body: Term


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Bang(Term):
    body: Term


@dataclass(frozen=True)
class LetBang(Term):
    var: str
    bound: Term
    body: Term
    # type A of the bound !A; filled in by decoration, never by the parser
    ty: Type | None = None


@dataclass(frozen=True)
class Nu(Term):
    var: str
    region: str
    ty: Type
    body: Term


@dataclass(frozen=True)
class Get(Term):
    addr: Var


@dataclass(frozen=True)
class SetV(Term):
    addr: Var
    value: Term


@dataclass(frozen=True)
class SetP(Term):
    addr: Var
    value: Term


@dataclass(frozen=True)
class StoreV(Term):
    addr: Var
    value: Term


@dataclass(frozen=True)
class StoreP(Term):
    addr: Var
    value: Term


@dataclass(frozen=True)
class Par(Term):
    left: Term
    right: Term


UNIT = Unit()
STORES = (StoreV, StoreP)


def is_value(t: Term) -> bool:
    while isinstance(t, Bang):
        t = t.body
    return isinstance(t, (Unit, Var, Lam))


def is_store(t: Term) -> bool:
    """Store-shaped programs: stores, their parallel compositions and ν's over them."""
    match t:
        case StoreV() | StoreP():
            return True
        case Par(a, b):
            return is_store(a) and is_store(b)
        case Nu(_, _, _, b):
            return is_store(b)
    return False


def par_all(parts) -> Term:
    """Right-nested parallel composition of a non-empty sequence."""
    parts = list(parts)
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Par(p, out)
    return out


def seq(first: Term, then: Term, var: str = "z") -> Term:
    """``first ; then`` as ``(\\z:1. then) first`` with ``z`` fresh."""
    z = fresh_name(var, free_vars(then) | free_vars(first))
    return App(Lam(z, TUnit(), then), first)


# ---------------------------------------------------------------- variables


def free_vars(t: Term) -> set[str]:
    out: set[str] = set()
    _fv(t, frozenset(), out)
    return out


def _fv(t: Term, bound, out: set) -> None:
    while True:
        match t:
            case Var(n):
                if n not in bound:
                    out.add(n)
                return
            case Unit():
                return
            case Lam(x, _, b) | Nu(x, _, _, b):
                bound = bound | {x}
                t = b
            case App(f, a):
                _fv(f, bound, out)
                t = a
            case Bang(b):
                t = b
            case LetBang(x, m, n):
                _fv(m, bound, out)
                bound = bound | {x}
                t = n
            case Get(a):
                t = a
            case SetV(a, v) | SetP(a, v) | StoreV(a, v) | StoreP(a, v):
                _fv(a, bound, out)
                t = v
            case Par(a, b):
                _fv(a, bound, out)
                t = b
            case _:
                raise TypeError(f"not a term: {t!r}")


def binder_names(t: Term) -> set[str]:
    out = set()
    for node in subterms(t):
        if isinstance(node, (Lam, Nu, LetBang)):
            out.add(node.var)
    return out


def subterms(t: Term):
    yield t
    for c in children(t):
        yield from subterms(c)


def children(t: Term) -> tuple:
    match t:
        case Lam(_, _, b) | Nu(_, _, _, b) | Bang(b):
            return (b,)
        case App(f, a):
            return (f, a)
        case LetBang(_, m, n):
            return (m, n)
        case Get(a):
            return (a,)
        case SetV(a, v) | SetP(a, v) | StoreV(a, v) | StoreP(a, v):
            return (a, v)
        case Par(a, b):
            return (a, b)
    return ()


_SUFFIX = re.compile(r"_\d+$")


def fresh_name(base: str, avoid) -> str:
    if base not in avoid:
        return base
    stem = _SUFFIX.sub("", base) or "v"
    for k in itertools.count(1):
        cand = f"{stem}_{k}"
        if cand not in avoid:
            return cand


# ------------------------------------------------------------- substitution


def subst(value: Term, var: str, target: Term) -> Term:
    """Capture-avoiding ``[value/var]target``; ``value`` must be a value."""
    if not is_value(value):
        raise ContractViolation(f"substituting a non-value: {render(value)}")
    if var not in free_vars(target):
        return target
    return _subst(value, free_vars(value), var, target)


def rename(t: Term, old: str, new: str) -> Term:
    if old == new:
        return t
    return _subst(Var(new), {new}, old, t)


def _occurrence(value: Term, occ: Var) -> Term:
    # an undecorated variable inherits the decoration of the occurrence it replaces
    if isinstance(value, Var) and value.region is None and occ.region is not None:
        return Var(value.name, occ.region)
    return value


def _addr(value: Term, a: Var, x: str) -> Var:
    if a.name != x:
        return a
    if not isinstance(value, Var):
        raise ContractViolation(f"address {x} replaced by non-variable {render(value)}")
    return _occurrence(value, a)


def _subst(v: Term, fv: set, x: str, t: Term) -> Term:
    match t:
        case Var(n):
            return _occurrence(v, t) if n == x else t
        case Unit():
            return t
        case Lam(y, ty, b):
            if y == x:
                return t
            y, b = _avoid(y, b, v, fv, x)
            return Lam(y, ty, _subst(v, fv, x, b))
        case Nu(y, r, ty, b):
            if y == x:
                return t
            y, b = _avoid(y, b, v, fv, x)
            return Nu(y, r, ty, _subst(v, fv, x, b))
        case LetBang(y, m, n, ty):
            m = _subst(v, fv, x, m)
            if y == x:
                return LetBang(y, m, n, ty)
            y, n = _avoid(y, n, v, fv, x)
            return LetBang(y, m, _subst(v, fv, x, n), ty)
        case App(f, a):
            return App(_subst(v, fv, x, f), _subst(v, fv, x, a))
        case Bang(b):
            return Bang(_subst(v, fv, x, b))
        case Get(a):
            return Get(_addr(v, a, x))
        case SetV(a, w) | SetP(a, w) | StoreV(a, w) | StoreP(a, w):
            return type(t)(_addr(v, a, x), _subst(v, fv, x, w))
        case Par(a, b):
            return Par(_subst(v, fv, x, a), _subst(v, fv, x, b))
    raise TypeError(f"not a term: {t!r}")


def _avoid(y: str, body: Term, v: Term, fv: set, x: str):
    if y not in fv:
        return y, body
    y2 = fresh_name(y, fv | free_vars(body) | {x})
    return y2, rename(body, y, y2)


# ----------------------------------------------------------------- printing


def render(t: Term, *, decorations: bool = False) -> str:
    """Surface syntax for a term; ``M ; N`` is used for the sequencing sugar."""
    return _Printer(decorations=decorations).show(t)


def render_alpha(t: Term, env: dict | None = None) -> str:
    """α-normal print: bound names renumbered in traversal order."""
    return _Printer(alpha=True, env=env).show(t)


def is_seq(t: Term) -> bool:
    return (
        isinstance(t, App)
        and isinstance(t.fn, Lam)
        and isinstance(t.fn.ty, TUnit)
        and t.fn.var not in free_vars(t.fn.body)
    )


class _Printer:
    # precedence: 0 parallel, 1 sequence/binder, 2 application, 3 argument
    def __init__(self, *, decorations=False, alpha=False, env=None):
        self.decorations = decorations
        self.alpha = alpha
        self.env = dict(env or {})
        self.count = 0

    def show(self, t: Term) -> str:
        return self._show(t, 0, True)

    def _name(self, n: str) -> str:
        return self.env.get(n, n)

    def _var(self, v: Var) -> str:
        s = self._name(v.name)
        if self.decorations and v.region:
            s += "^" + v.region
        return s

    def _bind(self, x: str):
        saved = self.env.get(x, _MISSING)
        if self.alpha:
            self.env[x] = f"_{self.count}"
            self.count += 1
        else:
            self.env.pop(x, None)
        return saved

    def _unbind(self, x: str, saved) -> None:
        if saved is _MISSING:
            self.env.pop(x, None)
        else:
            self.env[x] = saved

    def _show(self, t: Term, prec: int, tail: bool) -> str:
        match t:
            case Unit():
                return "*"
            case Var():
                return self._var(t)
            case Par(a, b):
                wrap = prec > 0
                s = f"{self._show(a, 1, False)} | {self._show(b, 0, wrap or tail)}"
                return f"({s})" if wrap else s
            case App(Lam(z, _, body), m) if is_seq(t):
                wrap = prec > 1
                s = f"{self._show(m, 2, False)} ; "
                saved = self._bind(z)
                s += self._show(body, 1, wrap or tail)
                self._unbind(z, saved)
                return f"({s})" if wrap else s
            case App(f, a):
                s = f"{self._show(f, 2, False)} {self._show(a, 3, False)}"
                return f"({s})" if prec > 2 else s
            case Bang(b):
                return "!" + self._show(b, 3, False)
            case Lam(x, ty, body):
                saved = self._bind(x)
                s = f"\\{self._name(x)}:{show_type(ty)}. {self._show(body, 0, True)}"
                self._unbind(x, saved)
                return s if prec <= 1 and tail else f"({s})"
            case Nu(x, r, ty, body):
                saved = self._bind(x)
                s = f"nu {self._name(x)}:{show_type(TReg(r, ty))}. {self._show(body, 0, True)}"
                self._unbind(x, saved)
                return s if prec <= 1 and tail else f"({s})"
            case LetBang(x, m, n):
                bound = self._show(m, 0, True)
                saved = self._bind(x)
                s = f"let !{self._name(x)} = {bound} in {self._show(n, 0, True)}"
                self._unbind(x, saved)
                return s if prec <= 1 and tail else f"({s})"
            case Get(a):
                return f"get({self._var(a)})"
            case SetV(a, v):
                return f"set({self._var(a)}, {self._show(v, 0, True)})"
            case SetP(a, v):
                return f"pset({self._var(a)}, {self._show(v, 0, True)})"
            case StoreV(a, v):
                return f"[{self._var(a)} <- {self._show(v, 0, True)}]"
            case StoreP(a, v):
                return f"[{self._var(a)} <= {self._show(v, 0, True)}]"
        raise TypeError(f"not a term: {t!r}")


_MISSING = object()


# ---------------------------------------------------------- canonical forms


@dataclass(frozen=True)
class Binder:
    name: str
    region: str
    ty: Type


@dataclass(frozen=True)
class Store:
    addr: Var
    persistent: bool
    value: Term

    def as_term(self) -> Term:
        return (StoreP if self.persistent else StoreV)(self.addr, self.value)


@dataclass(frozen=True)
class CanonicalProgram:
    """ν x1..xm (M1 | ... | Mn | S1 | ... | Sp)."""

    binders: tuple = ()
    threads: tuple = ()
    stores: tuple = ()

    def names_in_use(self) -> set[str]:
        used = {b.name for b in self.binders}
        for t in self.threads:
            used |= free_vars(t)
        for s in self.stores:
            used |= free_vars(s.as_term())
        return used


def contains_store(t: Term) -> bool:
    return any(isinstance(n, STORES) for n in subterms(t))


def check_static_stores(t: Term) -> None:
    """Raise MalformedProgram if a store occurs outside a static context."""
    match t:
        case Par(a, b):
            check_static_stores(a)
            check_static_stores(b)
        case Nu(_, _, _, b):
            check_static_stores(b)
        case StoreV(_, v) | StoreP(_, v):
            if contains_store(v):
                raise MalformedProgram("store nested inside a stored value")
        case _:
            if contains_store(t):
                raise MalformedProgram(f"store in non-static position in {render(t)}")


class _Builder:
    def __init__(self, used: set[str]):
        self.used = set(used)
        self.binders: list[Binder] = []
        self.threads: list[Term] = []
        self.stores: list[Store] = []

    def extrude(self, nu: Nu) -> Term:
        x, body = nu.var, nu.body
        if x in self.used:
            x = fresh_name(x, self.used | free_vars(body))
            body = rename(body, nu.var, x)
        self.used.add(x)
        self.binders.append(Binder(x, nu.region, nu.ty))
        return body

    def add(self, t: Term) -> None:
        while True:
            match t:
                case Par(a, b):
                    self.add(a)
                    t = b
                case Nu():
                    t = self.extrude(t)
                case StoreV(a, v) | StoreP(a, v):
                    if contains_store(v):
                        raise MalformedProgram("store nested inside a stored value")
                    self.stores.append(Store(a, isinstance(t, StoreP), v))
                    return
                case _:
                    self.add_thread(t)
                    return

    def add_thread(self, t: Term) -> None:
        while True:
            frames, hole = split(t)
            if isinstance(hole, Nu):
                t = plug(frames, self.extrude(hole))
                continue
            if isinstance(hole, (Par, StoreV, StoreP)):
                if frames:
                    raise MalformedProgram(f"{type(hole).__name__} in evaluation position")
                self.add(hole)
                return
            break
        if contains_store(t):
            raise MalformedProgram(f"store in non-static position in {render(t)}")
        self.threads.append(t)

    def build(self, keep_order: bool = False) -> CanonicalProgram:
        threads, stores = self.threads, self.stores
        if not keep_order:
            threads = _sorted(threads, _thread_key)
            stores = _sorted(stores, _store_key)
        return CanonicalProgram(tuple(self.binders), tuple(threads), tuple(stores))


def _thread_key(t: Term):
    return render_alpha(t)


def _store_key(s: Store):
    return render_alpha(s.as_term())


def _sorted(items, key) -> tuple:
    return tuple(items) if len(items) < 2 else tuple(sorted(items, key=key))


def canonicalize(p: Term) -> CanonicalProgram:
    """Extrude ν's, flatten parallel composition and separate the stores."""
    b = _Builder(free_vars(p))
    b.add(p)
    return b.build()


def recanonicalize(cp: CanonicalProgram, threads, stores) -> CanonicalProgram:
    """Rebuild a canonical program after some threads were rewritten in place."""
    if not any(isinstance(split(t)[1], (Nu, Par, StoreV, StoreP)) for t in threads):
        return CanonicalProgram(cp.binders, _sorted(threads, _thread_key), _sorted(stores, _store_key))
    b = _Builder(set())
    b.binders = list(cp.binders)
    b.used = {x.name for x in cp.binders}
    for t in threads:
        b.used |= free_vars(t)
    for s in stores:
        b.used |= free_vars(s.as_term())
    b.stores = list(stores)
    for t in threads:
        b.add_thread(t)
    return b.build()


def to_term(cp: CanonicalProgram) -> Term:
    parts = list(cp.threads) + [s.as_term() for s in cp.stores]
    if not parts:
        raise ContractViolation("empty canonical program")
    body = par_all(parts)
    for b in reversed(cp.binders):
        body = Nu(b.name, b.region, b.ty, body)
    return body


def fingerprint(cp: CanonicalProgram) -> str:
    """Canonical print, identical for structurally equivalent programs."""
    comps = list(cp.threads) + [s.as_term() for s in cp.stores]
    names = [b.name for b in cp.binders]
    if not names:
        return _assemble(cp, comps, {}, [])
    fvs = [free_vars(c) for c in comps]
    anon = {n: "#" for n in names}
    sig = {}
    for b in cp.binders:
        env = dict(anon)
        env[b.name] = "@"
        occ = sorted(render_alpha(c, env) for c, fv in zip(comps, fvs) if b.name in fv)
        sig[b.name] = (b.region, show_type(b.ty), tuple(occ))
    order = sorted(names, key=lambda n: sig[n])
    groups = [list(g) for _, g in itertools.groupby(order, key=lambda n: sig[n])]
    best = None
    for combo in itertools.islice(
        itertools.product(*(itertools.permutations(g) for g in groups)), 5040
    ):
        ordered = [n for g in combo for n in g]
        env = {n: f"_n{i}" for i, n in enumerate(ordered)}
        s = _assemble(cp, comps, env, ordered)
        if best is None or s < best:
            best = s
    return best


def _assemble(cp, comps, env, ordered) -> str:
    by_name = {b.name: b for b in cp.binders}
    nthreads = len(cp.threads)
    threads = sorted(render_alpha(c, env) for c in comps[:nthreads])
    stores = sorted(render_alpha(c, env) for c in comps[nthreads:])
    body = " | ".join(threads + stores)
    prefix = "".join(
        f"nu {env[n]}:{show_type(TReg(by_name[n].region, by_name[n].ty))}. " for n in ordered
    )
    return prefix + body


def struct_equiv(p: Term, q: Term) -> bool:
    return fingerprint(canonicalize(p)) == fingerprint(canonicalize(q))


# ------------------------------------------------------------ decomposition


@dataclass(frozen=True)
class Redex:
    kind: str  # beta | letbang | setv | setp


@dataclass(frozen=True)
class StuckValue:
    pass


@dataclass(frozen=True)
class BlockedRead:
    addr: str


def split(t: Term):
    """Unique split of ``t`` into evaluation-context frames and the hole's term."""
    frames = []
    while True:
        match t:
            case App(f, a) if not is_value(f):
                frames.append(("fn", a))
                t = f
            case App(f, a) if not is_value(a):
                frames.append(("arg", f))
                t = a
            case Bang(b) if not is_value(b):
                frames.append(("bang",))
                t = b
            case LetBang(x, m, n, ty) if not is_value(m):
                frames.append(("let", x, n, ty))
                t = m
            case _:
                return frames, t


def plug(frames, t: Term) -> Term:
    for fr in reversed(frames):
        match fr:
            case ("fn", a):
                t = App(t, a)
            case ("arg", f):
                t = App(f, t)
            case ("bang",):
                t = Bang(t)
            case ("let", x, n, ty):
                t = LetBang(x, t, n, ty)
    return t


def decompose(thread: Term):
    """Redex, StuckValue or BlockedRead for a store-free, Par-free thread."""
    if contains_store(thread):
        raise MalformedProgram(f"store inside thread {render(thread)}")
    return _decompose(thread)


def _decompose(thread: Term):
    frames, hole = split(thread)
    match hole:
        case App():
            return Redex("beta")
        case LetBang():
            return Redex("letbang")
        case SetV():
            return Redex("setv")
        case SetP():
            return Redex("setp")
        case Get(a):
            return BlockedRead(a.name)
        case Nu():
            raise MalformedProgram("ν in evaluation position; canonicalize first")
        case Par() | StoreV() | StoreP():
            raise MalformedProgram(f"{type(hole).__name__} inside a thread")
    if not frames and is_value(hole):
        return StuckValue()
    raise MalformedProgram(f"cannot decompose {render(thread)}")
