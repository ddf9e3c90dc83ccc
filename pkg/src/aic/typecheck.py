"""Syntax-directed typechecking for the four disciplines.

Checking is bottom-up: every subterm synthesizes its type, its effect and a
map of the hypotheses it actually uses.  Context splitting then amounts to
summing the children's maps, and weakening is implicit since unused
hypotheses never enter a map.

Modes:
  base        no effects; arrows carry the empty effect, subtyping is equality
  effects     latent effects on arrows, subtyping by effect containment
  stratified  effects, plus each region may only mention earlier regions
  confluent   no exp regions; volatile writes only on aff regions
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .surface import RegionDecl, SourceFile
from .syntax import (
    App, Bang, Get, Lam, LetBang, MalformedProgram, Nu, Par, SetP, SetV, StoreP, StoreV,
    Term, Unit, Var, check_static_stores, is_store,
)
from .types import BEH, ONE, TArrow, TBang, TBehaviour, TReg, Type, erase_effects, show_type
from .usage import (
    EMPTY, Family, Mult, UndefinedSum, UsageMap, check_not_aff, msum,
    read_usage, region_usage, var_usage, write_usage,
)

MAX_DIAGNOSTICS = 20


@dataclass(frozen=True)
class Mode:
    system: str = "base"
    stratified: bool = False
    confluent: bool = False

    def __post_init__(self):
        if self.system not in ("base", "effects"):
            raise ValueError(f"unknown system {self.system!r}")
        if self.stratified and self.system != "effects":
            raise ValueError("stratification needs the effect system")

    @property
    def effects(self) -> bool:
        return self.system == "effects"

    def __str__(self) -> str:
        s = self.system
        if self.stratified:
            s += "+stratified"
        if self.confluent:
            s += "+confluent"
        return s


BASE = Mode()
EFFECTS = Mode("effects")
STRATIFIED = Mode("effects", stratified=True)
CONFLUENT = Mode(confluent=True)


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    path: str = ""

    def __str__(self) -> str:
        where = f" [at {self.path}]" if self.path else ""
        return f"{self.kind}: {self.message}{where}"


class TypingError(Exception):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(map(str, self.diagnostics)))


class FormationError(TypingError):
    """The region context or a declared type is not well formed."""


@dataclass(frozen=True)
class TypingReport:
    type: Type
    effect: frozenset
    usages: UsageMap
    decorated: Term = field(compare=False)
    warnings: tuple = field(default=(), compare=False)

    def render(self, file: SourceFile) -> str:
        order = [r.name for r in file.regions]
        eff = sorted(self.effect, key=lambda r: (order.index(r) if r in order else len(order), r))
        lines = [f"type: {show_type(self.type)}", "effect: {" + ",".join(eff) + "}"]
        for r in file.regions:
            lines.append(f"usage {r.name} = {self.usages.region(r.name, r.family)}")
        for v in file.vars:
            if v.name in self.usages.vars:
                lines.append(f"usage {v.name} = {self.usages.vars[v.name]}")
        return "\n".join(lines)


# ----------------------------------------------------------------- formation


def _type_errors(t: Type, allowed: dict, declared: set, owner: str | None) -> list[str]:
    """Problems with ``t`` given the regions it may mention (name -> content)."""
    out: list[str] = []

    def missing(r: str) -> str:
        if owner is not None and r == owner:
            return f"self-reference: region {r} mentions itself"
        if r in declared:
            return f"forward reference: region {owner} mentions later region {r}"
        return f"undeclared region {r}"

    def walk(t: Type, codomain: bool) -> None:
        match t:
            case TBehaviour():
                if not codomain:
                    out.append("behaviour type B used as a value type")
            case TBang(b):
                walk(b, False)
            case TReg(r, c):
                if r not in allowed:
                    out.append(missing(r))
                elif allowed[r] != c:
                    out.append(
                        f"content mismatch: Reg {r} {show_type(c)} but region {r} "
                        f"holds {show_type(allowed[r])}"
                    )
            case TArrow(d, e, c):
                walk(d, False)
                walk(c, True)
                for r in sorted(e):
                    if r not in allowed:
                        out.append(missing(r))
    walk(t, False)
    return out


def form_region_context(regions, mode: Mode = BASE, vars=()) -> None:
    """Check the preamble; raise FormationError listing every problem."""
    contents = {r.name: r.content for r in regions}
    declared = set(contents)
    diags = []
    for i, r in enumerate(regions):
        if mode.confluent and r.family is Family.EXP:
            diags.append(Diagnostic("confluence", f"region {r.name} has family exp"))
        if mode.stratified:
            allowed = {q.name: q.content for q in regions[:i]}
        else:
            allowed = contents
        for msg in _type_errors(r.content, allowed, declared, r.name if mode.stratified else None):
            diags.append(Diagnostic("formation", f"in region {r.name}: {msg}"))
        if r.persistent and not isinstance(r.content, TBang):
            diags.append(Diagnostic("formation", f"persistent region {r.name} needs a !-type"))
    for v in vars:
        for msg in _type_errors(v.ty, contents, declared, None):
            diags.append(Diagnostic("formation", f"in variable {v.name}: {msg}"))
    if diags:
        raise FormationError(diags[:MAX_DIAGNOSTICS])


def subtype(regions, a: Type, b: Type) -> bool:
    """Algorithmic subtyping by effect containment; ``regions`` are the names in scope."""
    if a == b:
        return True
    match a, b:
        case TBang(x), TBang(y):
            return subtype(regions, x, y)
        case TArrow(d1, e1, c1), TArrow(d2, e2, c2):
            return (
                e1 <= e2
                and e2 <= set(regions)
                and subtype(regions, d2, d1)
                and subtype(regions, c1, c2)
            )
    return False


# ------------------------------------------------------------------- erasure


def map_types(t: Term, f) -> Term:
    match t:
        case Lam(x, ty, b):
            return Lam(x, f(ty), map_types(b, f))
        case Nu(x, r, ty, b):
            return Nu(x, r, f(ty), map_types(b, f))
        case LetBang(x, m, n, ty):
            return LetBang(x, map_types(m, f), map_types(n, f), f(ty) if ty else None)
        case App(a, b):
            return App(map_types(a, f), map_types(b, f))
        case Bang(b):
            return Bang(map_types(b, f))
        case SetV(a, v) | SetP(a, v) | StoreV(a, v) | StoreP(a, v):
            return type(t)(a, map_types(v, f))
        case Par(a, b):
            return Par(map_types(a, f), map_types(b, f))
    return t


def erase_file(file: SourceFile) -> SourceFile:
    return SourceFile(
        tuple(replace(r, content=erase_effects(r.content)) for r in file.regions),
        tuple(replace(v, ty=erase_effects(v.ty)) for v in file.vars),
        map_types(file.program, erase_effects),
    )


# ------------------------------------------------------------------ checking


class _Fail(Exception):
    pass


class _Stop(Exception):
    pass


def _occurrences(t: Term, x: str) -> tuple[int, bool]:
    """Free occurrences of ``x`` in ``t`` and whether any sits under a bang."""
    count, banged = 0, False

    def walk(t: Term, under: bool) -> None:
        nonlocal count, banged
        match t:
            case Var(n):
                if n == x:
                    count += 1
                    banged = banged or under
            case Lam(y, _, b) | Nu(y, _, _, b):
                if y != x:
                    walk(b, under)
            case LetBang(y, m, n):
                walk(m, under)
                if y != x:
                    walk(n, under)
            case Bang(b):
                walk(b, True)
            case Get(a):
                walk(a, under)
            case App(a, b) | Par(a, b) | SetV(a, b) | SetP(a, b) | StoreV(a, b) | StoreP(a, b):
                walk(a, under)
                walk(b, under)
    walk(t, False)
    return count, banged


class _Checker:
    def __init__(self, file: SourceFile, mode: Mode):
        self.mode = mode
        self.regions: dict[str, RegionDecl] = {r.name: r for r in file.regions}
        self.contents = {r.name: r.content for r in file.regions}
        self.volatile = {r.name: r.volatile for r in file.regions}
        self.errors: list[Diagnostic] = []

    def fail(self, kind: str, msg: str, path: str):
        self.errors.append(Diagnostic(kind, msg, path))
        if len(self.errors) >= MAX_DIAGNOSTICS:
            raise _Stop
        raise _Fail

    def eff(self, *regions) -> frozenset:
        return frozenset(regions) if self.mode.effects else frozenset()

    def sum(self, a: UsageMap, b: UsageMap, path: str) -> UsageMap:
        try:
            return msum(a, b)
        except UndefinedSum as exc:
            what = "region" if exc.key in self.regions else "variable"
            self.fail("usage-clash", f"{exc.reason} on {what} {exc.key}", path)

    def check_annotation(self, ty: Type, path: str) -> None:
        for msg in _type_errors(ty, self.contents, set(self.contents), None):
            self.fail("formation", msg, path)

    def many(self, jobs):
        """Synthesize several independent children, reporting all their failures."""
        out, failed = [], False
        for t, env, path in jobs:
            try:
                out.append(self.synth(t, env, path))
            except _Fail:
                failed = True
        if failed:
            raise _Fail
        return out

    def address(self, a: Var, env, path):
        if a.name not in env:
            self.fail("unbound", f"unbound address {a.name}", path)
        ty, mult = env[a.name]
        if not isinstance(ty, TReg):
            self.fail("type-mismatch", f"{a.name} has type {show_type(ty)}, not an address", path)
        if ty.region not in self.regions:
            self.fail("formation", f"undeclared region {ty.region}", path)
        return ty, var_usage(a.name, mult), Var(a.name, ty.region)

    def synth(self, t: Term, env: dict, path: str):
        match t:
            case Unit():
                return ONE, frozenset(), EMPTY, t
            case Var(x):
                if x not in env:
                    self.fail("unbound", f"unbound variable {x}", path)
                ty, mult = env[x]
                dec = Var(x, ty.region) if isinstance(ty, TReg) else Var(x)
                return ty, frozenset(), var_usage(x, mult), dec
            case Lam(x, a, body):
                self.check_annotation(a, path)
                (ty, e, u, b), = self.many([(body, {**env, x: (a, Mult.ONE)}, path + "/lam")])
                return TArrow(a, e, ty), frozenset(), u.without_var(x), Lam(x, a, b)
            case App(m, n):
                (tf, e1, u1, m2), (ta, e2, u2, n2) = self.many(
                    [(m, env, path + "/fn"), (n, env, path + "/arg")]
                )
                if not isinstance(tf, TArrow):
                    self.fail("type-mismatch", f"applying a non-function of type {show_type(tf)}", path)
                if not subtype(self.regions, ta, tf.dom):
                    self.fail(
                        "type-mismatch",
                        f"argument has type {show_type(ta)}, expected {show_type(tf.dom)}",
                        path,
                    )
                u = self.sum(u1, u2, path)
                return tf.cod, e1 | e2 | tf.effect, u, App(m2, n2)
            case Bang(m):
                (ty, e, u, m2), = self.many([(m, env, path + "/bang")])
                if isinstance(ty, TBehaviour):
                    self.fail("type-mismatch", "promoting a term of type B", path)
                bad = check_not_aff(u, self.volatile)
                if bad is not None:
                    self.fail("promotion", f"promotion over affine hypothesis {bad}", path)
                return TBang(ty), e, u, Bang(m2)
            case LetBang(x, m, n):
                (tm, e1, u1, m2), = self.many([(m, env, path + "/let")])
                if not isinstance(tm, TBang):
                    self.fail("type-mismatch", f"let ! on a term of type {show_type(tm)}", path)
                (tn, e2, u2, n2), = self.many([(n, {**env, x: (tm.body, Mult.INF)}, path + "/in")])
                u = self.sum(u1, u2.without_var(x), path)
                return tn, e1 | e2, u, LetBang(x, m2, n2, tm.body)
            case Nu(x, r, a, body):
                if r not in self.regions:
                    self.fail("formation", f"undeclared region {r}", path)
                if self.contents[r] != a:
                    self.fail(
                        "formation",
                        f"nu {x}: region {r} holds {show_type(self.contents[r])}, not {show_type(a)}",
                        path,
                    )
                count, banged = _occurrences(body, x)
                mult = Mult.INF if count >= 2 or banged else Mult.ONE
                (ty, e, u, b), = self.many([(body, {**env, x: (TReg(r, a), mult)}, path + "/nu")])
                return ty, e, u.without_var(x), Nu(x, r, a, b)
            case Get(a):
                ty, ua, a2 = self.address(a, env, path)
                decl = self.regions[ty.region]
                u = self.sum(ua, region_usage(ty.region, read_usage(decl.family)), path)
                return ty.content, self.eff(ty.region), u, Get(a2)
            case SetV(a, v) | SetP(a, v) | StoreV(a, v) | StoreP(a, v):
                return self.write(t, a, v, env, path)
            case Par(p, q):
                (tp, ep, up, p2), (tq, eq, uq, q2) = self.many(
                    [(p, env, path + "/left"), (q, env, path + "/right")]
                )
                u = self.sum(up, uq, path)
                sp, sq = is_store(p), is_store(q)
                if sp and sq:
                    return BEH, frozenset(), u, Par(p2, q2)
                if sq:
                    return tp, ep, u, Par(p2, q2)
                if sp:
                    return tq, eq, u, Par(p2, q2)
                return BEH, ep | eq, u, Par(p2, q2)
        raise TypeError(f"not a term: {t!r}")

    def write(self, t: Term, a: Var, v: Term, env, path):
        persistent = isinstance(t, (SetP, StoreP))
        ty, ua, a2 = self.address(a, env, path)
        decl = self.regions[ty.region]
        if decl.persistent != persistent:
            want = "persistent" if persistent else "volatile"
            self.fail("volatility", f"{want} write to {decl.name}, which is {'persistent' if decl.persistent else 'volatile'}", path)
        if self.mode.confluent and not persistent and decl.family is not Family.AFF:
            self.fail(
                "confluence",
                f"volatile write to region {decl.name} of family {decl.family} (needs aff)",
                path,
            )
        (tv, ev, uv, v2), = self.many([(v, env, path + "/value")])
        if not subtype(self.regions, tv, ty.content):
            self.fail(
                "type-mismatch",
                f"stored value has type {show_type(tv)}, region {decl.name} holds {show_type(ty.content)}",
                path,
            )
        u = self.sum(self.sum(ua, region_usage(decl.name, write_usage(decl.family)), path), uv, path)
        dec = type(t)(a2, v2)
        if isinstance(t, (SetV, SetP)):
            return ONE, ev | self.eff(decl.name), u, dec
        return BEH, ev, u, dec


def typecheck(file: SourceFile, mode: Mode = BASE) -> TypingReport:
    """Type, effect, used hypotheses and decorated program of ``file``.

    Raises FormationError for an ill-formed preamble and TypingError for an
    untypable program; both carry a list of diagnostics.
    """
    if not mode.effects:
        file = erase_file(file)
    form_region_context(file.regions, mode, file.vars)
    try:
        check_static_stores(file.program)
    except MalformedProgram as exc:
        raise TypingError([Diagnostic("store-position", str(exc))]) from None
    checker = _Checker(file, mode)
    env = {v.name: (v.ty, v.mult) for v in file.vars}
    try:
        ty, eff, u, dec = checker.synth(file.program, env, "program")
    except (_Fail, _Stop):
        raise TypingError(checker.errors) from None
    return TypingReport(ty, eff, u, dec, lint(file))


def lint(file: SourceFile) -> tuple[str, ...]:
    """Accepted but suspicious declarations.

    Every usage of a volatile exp region is aff, so such a region can never
    be read under a promotion.
    """
    return tuple(
        f"region {r.name} is volatile and exp: it cannot be read inside !"
        for r in file.regions
        if not r.persistent and r.family is Family.EXP
    )
