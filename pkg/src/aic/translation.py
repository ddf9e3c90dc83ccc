"""Forgetful translation into the intuitionistic target system.

The translation erases ``!``, usages and ``ν``; an address ``x^r`` becomes
the region constant ``r`` and every store becomes persistent.  The target
comes with its own typechecker and small-step semantics so that the
simulation between a source run and a target run can be checked step by step.
"""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field

from .machine import MachineState, Site, enabled, step
from .surface import SourceFile
from .syntax import (
    App, Bang, ContractViolation, Get, Lam, LetBang, Nu, Par, SetP, SetV, StoreP,
    StoreV, Term, Unit, Var, canonicalize, fresh_name,
)
from .typecheck import STRATIFIED, Mode, _type_errors, subtype, typecheck
from .types import BEH, ONE, TArrow, TBang, TReg, Type, show_type


# ----------------------------------------------------------------- target terms


class ITerm:
    __slots__ = ()

    def __str__(self) -> str:
        return show_iterm(self)


@dataclass(frozen=True)
class IUnit(ITerm):
    pass


@dataclass(frozen=True)
class IVar(ITerm):
    name: str


@dataclass(frozen=True)
class IRegion(ITerm):
    name: str


@dataclass(frozen=True)
class ILam(ITerm):
    var: str
    ty: Type
    body: ITerm


@dataclass(frozen=True)
class IApp(ITerm):
    fn: ITerm
    arg: ITerm


@dataclass(frozen=True)
class IGet(ITerm):
    addr: ITerm


@dataclass(frozen=True)
class IPSet(ITerm):
    addr: ITerm
    value: ITerm


@dataclass(frozen=True)
class IPar(ITerm):
    left: ITerm
    right: ITerm


@dataclass(frozen=True)
class IStore(ITerm):
    region: str
    value: ITerm


IUNIT = IUnit()


def i_is_value(t: ITerm) -> bool:
    return isinstance(t, (IUnit, IVar, IRegion, ILam))


def i_is_store(t: ITerm) -> bool:
    match t:
        case IStore():
            return True
        case IPar(a, b):
            return i_is_store(a) and i_is_store(b)
    return False


def i_free_vars(t: ITerm) -> set[str]:
    match t:
        case IVar(x):
            return {x}
        case ILam(x, _, b):
            return i_free_vars(b) - {x}
        case IApp(a, b) | IPSet(a, b) | IPar(a, b):
            return i_free_vars(a) | i_free_vars(b)
        case IGet(a):
            return i_free_vars(a)
        case IStore(_, v):
            return i_free_vars(v)
    return set()


def i_subst(v: ITerm, x: str, t: ITerm) -> ITerm:
    """Capture-avoiding ``[v/x]t``."""
    fv = i_free_vars(v)

    def go(t: ITerm) -> ITerm:
        match t:
            case IVar(y):
                return v if y == x else t
            case ILam(y, ty, b):
                if y == x:
                    return t
                if y in fv:
                    z = fresh_name(y, fv | i_free_vars(b) | {x})
                    b = i_subst(IVar(z), y, b)
                    y = z
                return ILam(y, ty, go(b))
            case IApp(a, b):
                return IApp(go(a), go(b))
            case IGet(a):
                return IGet(go(a))
            case IPSet(a, b):
                return IPSet(go(a), go(b))
            case IPar(a, b):
                return IPar(go(a), go(b))
            case IStore(r, w):
                return IStore(r, go(w))
        return t
    return go(t)


# -------------------------------------------------------------------- printing


def show_iterm(t: ITerm, alpha: bool = False) -> str:
    env: dict[str, str] = {}
    counter = [0]

    def name(x: str) -> str:
        return env.get(x, x)

    def go(t: ITerm, prec: int, tail: bool) -> str:
        match t:
            case IUnit():
                return "*"
            case IVar(x):
                return name(x)
            case IRegion(r):
                return r
            case ILam(x, ty, b):
                saved = env.get(x)
                if alpha:
                    env[x] = f"_{counter[0]}"
                    counter[0] += 1
                s = f"\\{name(x)}:{show_type(ty)}. {go(b, 0, True)}"
                if alpha:
                    if saved is None:
                        del env[x]
                    else:
                        env[x] = saved
                return s if prec <= 1 and tail else f"({s})"
            case IApp(f, a):
                s = f"{go(f, 2, False)} {go(a, 3, tail)}"
                return s if prec <= 2 else f"({s})"
            case IGet(a):
                return f"get({go(a, 0, True)})"
            case IPSet(a, v):
                return f"pset({go(a, 0, True)}, {go(v, 0, True)})"
            case IStore(r, v):
                return f"[{r} <= {go(v, 0, True)}]"
            case IPar(a, b):
                s = f"{go(a, 1, False)} | {go(b, 0, tail)}"
                return s if prec == 0 else f"({s})"
        raise TypeError(f"not a target term: {t!r}")
    return go(t, 0, True)


# ------------------------------------------------------------------ translation


def forget_type(a: Type) -> Type:
    match a:
        case TBang(b):
            return forget_type(b)
        case TReg(r, c):
            return TReg(r, forget_type(c))
        case TArrow(d, e, c):
            return TArrow(forget_type(d), e, forget_type(c))
    return a


def _region_of(v: Var) -> str:
    if v.region is None:
        raise ContractViolation(f"address {v.name} is not decorated")
    return v.region


def forget_term(p: Term, region_vars=frozenset()) -> ITerm:
    """Translate a decorated program.

    ``region_vars`` names variables known to have region type; meeting one
    of them without a decoration is a contract violation.
    """
    def go(t: Term) -> ITerm:
        match t:
            case Unit():
                return IUNIT
            case Var(x, r):
                if r is not None:
                    return IRegion(r)
                if x in region_vars:
                    raise ContractViolation(f"region-typed occurrence of {x} is not decorated")
                return IVar(x)
            case Lam(x, ty, b):
                return ILam(x, forget_type(ty), go(b))
            case App(f, a):
                return IApp(go(f), go(a))
            case Bang(b):
                return go(b)
            case LetBang(x, m, n, ty):
                if ty is None:
                    raise ContractViolation(f"let !{x} is not decorated with its type")
                return IApp(ILam(x, forget_type(ty), go(n)), go(m))
            case Nu(_, _, _, b):
                return go(b)
            case Get(a):
                return IGet(IRegion(_region_of(a)))
            case SetV(a, v) | SetP(a, v):
                # The target language only has persistent writes.
                return IPSet(IRegion(_region_of(a)), go(v))
            case StoreV(a, v) | StoreP(a, v):
                return IStore(_region_of(a), go(v))
            case Par(a, b):
                return IPar(go(a), go(b))
        raise TypeError(f"not a term: {t!r}")
    return go(p)


def forget_regions(file: SourceFile) -> list[tuple[str, Type]]:
    return [(r.name, forget_type(r.content)) for r in file.regions]


# ------------------------------------------------------------------ typechecking


class ITypeError(Exception):
    pass


def i_form_regions(regions) -> None:
    """Stratified formation: each content may only mention earlier regions."""
    seen: dict[str, Type] = {}
    names = {r for r, _ in regions}
    for r, a in regions:
        if r in seen:
            raise ITypeError(f"duplicate region {r}")
        if isinstance(a, TBang):
            raise ITypeError(f"region {r}: ! has no image in the target")
        errs = _type_errors(a, seen, names, r)
        if errs:
            raise ITypeError(f"region {r}: {errs[0]}")
        seen[r] = a


def i_typecheck(regions, term: ITerm, env: dict | None = None) -> tuple[Type, frozenset]:
    i_form_regions(regions)
    contents = dict(regions)
    env = dict(env or {})

    def check_type(a: Type) -> None:
        errs = _type_errors(a, contents, set(contents), None)
        if errs:
            raise ITypeError(errs[0])

    def address(v: ITerm, env) -> TReg:
        ty, eff = go(v, env)
        if not isinstance(ty, TReg) or eff:
            raise ITypeError(f"{show_iterm(v)} is not an address")
        return ty

    def go(t: ITerm, env) -> tuple[Type, frozenset]:
        match t:
            case IUnit():
                return ONE, frozenset()
            case IVar(x):
                if x not in env:
                    raise ITypeError(f"unbound variable {x}")
                return env[x], frozenset()
            case IRegion(r):
                if r not in contents:
                    raise ITypeError(f"undeclared region {r}")
                return TReg(r, contents[r]), frozenset()
            case ILam(x, a, b):
                check_type(a)
                ty, e = go(b, {**env, x: a})
                return TArrow(a, e, ty), frozenset()
            case IApp(f, a):
                tf, e1 = go(f, env)
                ta, e3 = go(a, env)
                if not isinstance(tf, TArrow):
                    raise ITypeError(f"applying a non-function of type {show_type(tf)}")
                if not subtype(contents, ta, tf.dom):
                    raise ITypeError(
                        f"argument has type {show_type(ta)}, expected {show_type(tf.dom)}"
                    )
                return tf.cod, e1 | tf.effect | e3
            case IGet(a):
                ty = address(a, env)
                return ty.content, frozenset({ty.region})
            case IPSet(a, v):
                ty = address(a, env)
                tv, ev = go(v, env)
                if ev or not subtype(contents, tv, ty.content):
                    raise ITypeError(f"pset value of type {show_type(tv)} into {show_type(ty)}")
                return ONE, frozenset({ty.region})
            case IStore(r, v):
                if r not in contents:
                    raise ITypeError(f"undeclared region {r}")
                tv, ev = go(v, env)
                if ev or not subtype(contents, tv, contents[r]):
                    raise ITypeError(f"store value of type {show_type(tv)} in region {r}")
                return BEH, frozenset()
            case IPar(p, q):
                tp, ep = go(p, env)
                tq, eq = go(q, env)
                sp, sq = i_is_store(p), i_is_store(q)
                if sp and sq:
                    return BEH, frozenset()
                if sq:
                    return tp, ep
                if sp:
                    return tq, eq
                return BEH, ep | eq
        raise TypeError(f"not a target term: {t!r}")
    return go(term, env)


# --------------------------------------------------------------------- semantics


@dataclass(frozen=True)
class IState:
    threads: tuple
    stores: tuple  # IStore

    @classmethod
    def load(cls, t: ITerm) -> IState:
        threads, stores = [], []
        _flatten(t, threads, stores)
        return cls.of(threads, stores)

    @classmethod
    def of(cls, threads, stores) -> IState:
        key = lambda t: show_iterm(t, alpha=True)
        return cls(tuple(sorted(threads, key=key)), tuple(sorted(stores, key=key)))

    def thread_keys(self) -> list[str]:
        return [show_iterm(t, alpha=True) for t in self.threads]

    def store_keys(self) -> Counter:
        return Counter(show_iterm(s, alpha=True) for s in self.stores)

    def __str__(self) -> str:
        return " | ".join(self.thread_keys() + sorted(self.store_keys().elements()))


def _flatten(t: ITerm, threads: list, stores: list) -> None:
    match t:
        case IPar(a, b):
            _flatten(a, threads, stores)
            _flatten(b, threads, stores)
        case IStore():
            stores.append(t)
        case _:
            frames, hole = _i_split(t)
            if isinstance(hole, (IPar, IStore)):
                if frames:
                    raise ContractViolation("parallel composition in evaluation position")
                _flatten(hole, threads, stores)
            else:
                threads.append(t)


def _i_split(t: ITerm):
    frames = []
    while isinstance(t, IApp):
        if not i_is_value(t.fn):
            frames.append(("fn", t.arg))
            t = t.fn
        elif not i_is_value(t.arg):
            frames.append(("arg", t.fn))
            t = t.arg
        else:
            break
    return frames, t


def _i_plug(frames, t: ITerm) -> ITerm:
    for kind, other in reversed(frames):
        t = IApp(t, other) if kind == "fn" else IApp(other, t)
    return t


def i_enabled(s: IState) -> list[Site]:
    sites = []
    for i, t in enumerate(s.threads):
        _, hole = _i_split(t)
        match hole:
            case IApp(ILam(), _):
                sites.append(Site(i, "beta"))
            case IGet(IRegion(r)):
                sites += [Site(i, "get", j) for j, st in enumerate(s.stores) if st.region == r]
            case IPSet(IRegion(), v) if i_is_value(v):
                sites.append(Site(i, "pset"))
    return sites


def i_step(s: IState, site: Site) -> IState:
    threads, stores = list(s.threads), list(s.stores)
    frames, hole = _i_split(threads[site.thread])
    match site.kind, hole:
        case "beta", IApp(ILam(x, _, body), v):
            new = i_subst(v, x, body)
        case "get", IGet(IRegion(r)) if site.store is not None and stores[site.store].region == r:
            new = stores[site.store].value
        case "pset", IPSet(IRegion(r), v):
            new = IUNIT
            stores.append(IStore(r, v))
        case _:
            raise ContractViolation(f"target site {site} is not enabled")
    del threads[site.thread]
    extra_threads: list = []
    _flatten(_i_plug(frames, new), extra_threads, stores)
    return IState.of(threads + extra_threads, stores)


# -------------------------------------------------------------------- simulation


def translate_state(s: MachineState) -> IState:
    threads = [forget_term(t) for t in s.program.threads]
    stores = [forget_term(st.as_term()) for st in s.program.stores]
    return IState.of(threads, stores)


@dataclass
class SimStep:
    source: Site
    target: Site
    residual: tuple  # store prints present in the target but not in |P'|


@dataclass
class SimulationVerdict:
    steps: list = field(default_factory=list)
    outcome: str = "Simulated"  # or Mismatch or StepLimit
    mismatch_at: int | None = None
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.outcome != "Mismatch"

    def __str__(self) -> str:
        if self.outcome == "Mismatch":
            return f"Mismatch at step {self.mismatch_at}\n{self.detail}"
        return f"{self.outcome}({len(self.steps)} steps)"


def related(image: IState, q: IState) -> Counter | None:
    """Residual stores if ``q`` is ``image`` in parallel with extra stores, else None."""
    if sorted(image.thread_keys()) != sorted(q.thread_keys()):
        return None
    want, have = image.store_keys(), q.store_keys()
    if want - have:
        return None
    return have - want


def check_simulation(
    file: SourceFile,
    scheduler: str = "leftmost",
    seed: int = 0,
    max_steps: int = 10_000,
    mode: Mode = STRATIFIED,
) -> SimulationVerdict:
    """Run the source program and its translation in lockstep."""
    report = typecheck(file, mode)
    src = MachineState(canonicalize(report.decorated))
    tgt = translate_state(src)
    rng = random.Random(seed)
    verdict = SimulationVerdict()
    for n in range(1, max_steps + 1):
        sites = enabled(src)
        if not sites:
            return verdict
        site = sites[0] if scheduler == "leftmost" else rng.choice(sites)
        src = step(src, site)
        image = translate_state(src)
        tsites = i_enabled(tgt)
        tsites.sort(key=lambda s: (s.thread != site.thread, s))
        for ts in tsites:
            nxt = i_step(tgt, ts)
            residual = related(image, nxt)
            if residual is not None:
                verdict.steps.append(SimStep(site, ts, tuple(sorted(residual.elements()))))
                tgt = nxt
                break
        else:
            verdict.outcome = "Mismatch"
            verdict.mismatch_at = n
            verdict.detail = f"source: {src.fingerprint}\nimage:  {image}\ntarget: {tgt}"
            return verdict
    if enabled(src):
        verdict.outcome = "StepLimit"
    return verdict


def translate_file(file: SourceFile, mode: Mode = STRATIFIED) -> str:
    """Render the translation of a typable file in the target's concrete syntax."""
    report = typecheck(file, mode)
    lines = [f"region {r} : {show_type(a)}" for r, a in forget_regions(file)]
    lines.append("program " + show_iterm(forget_term(report.decorated)))
    return "\n".join(lines) + "\n"
