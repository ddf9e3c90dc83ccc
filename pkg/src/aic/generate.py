"""Random well-typed programs, built by following typing derivations.

Resources that the type system counts are tracked while the term is being
built: region budgets (how many reads and writes a family still admits),
affine variables (usable once, and only at the promotion depth where they
were bound) and effect budgets (inside a lambda, only the latent effect of
its expected type may be produced).  Every file is finally re-checked by the
typechecker; an attempt it rejects is discarded and redrawn.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .surface import RegionDecl, SourceFile, VarDecl
from .syntax import (
    UNIT, App, Bang, Get, Lam, LetBang, Nu, Par, SetP, SetV, StoreP, StoreV, Term, Var,
    fresh_name, par_all,
)
from .typecheck import BASE, Mode, TypingError, erase_file, subtype, typecheck
from .types import BEH, ONE, TArrow, TBang, TBehaviour, TReg, Type, arrow
from .usage import Family, Mult

DEFAULT_WEIGHTS = {
    "value": 3,
    "get": 4,
    "set": 3,
    "beta": 2,
    "seq": 2,
    "let": 3,
    "nu": 1,
    "par": 2,
    "apply": 3,
}


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_depth: int = 4
    regions: tuple = (1, 1, 1)  # per family: aff, wo, exp
    mode: Mode = BASE
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    max_threads: int = 3


@dataclass
class _Hyp:
    name: str
    ty: Type
    affine: bool
    depth: int  # promotion depth at the binding site
    used: bool = False


@dataclass
class _Region:
    decl: RegionDecl
    writes: float
    reads: float

    @property
    def name(self) -> str:
        return self.decl.name


class _Gen:
    def __init__(self, cfg: GenConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.effects = cfg.mode.effects
        self.taken: set[str] = set()
        self.regions: dict[str, _Region] = {}
        self.free: list[VarDecl] = []
        self.read_addrs: list[Var] = []

    # ------------------------------------------------------------- preamble

    def fresh(self, base: str) -> str:
        n = fresh_name(base, self.taken)
        self.taken.add(n)
        return n

    def preamble(self) -> None:
        cfg, rng = self.cfg, self.rng
        # Contents may mention earlier regions only when a stratified or
        # confluent discipline is requested; otherwise self-reference is allowed.
        guarded = cfg.mode.stratified or cfg.mode.confluent
        fams = []
        for fam, count in zip((Family.AFF, Family.WO, Family.EXP), cfg.regions):
            if fam is Family.EXP and cfg.mode.confluent:
                continue
            fams += [fam] * count
        decls: list[RegionDecl] = []
        for i, fam in enumerate(fams):
            name = f"r{i}"
            if fam is Family.AFF:
                persistent = rng.random() < 0.4
            elif fam is Family.WO:
                persistent = cfg.mode.confluent or rng.random() < 0.7
            else:
                persistent = rng.random() < 0.6
            earlier = [d.name for d in decls]
            visible = earlier if guarded else earlier + [name]
            base = self.content_type(decls, visible, self_name=name if not guarded else None)
            content = TBang(base) if persistent else base
            decls.append(RegionDecl(name, persistent, content, fam))
        for d in decls:
            inf = float("inf")
            writes, reads = {Family.AFF: (1, 1), Family.WO: (1, inf), Family.EXP: (inf, inf)}[d.family]
            self.regions[d.name] = _Region(d, writes, reads)
            self.taken.add(d.name)
        for d in decls:
            v = VarDecl(self.fresh("a" + d.name[1:]), Mult.INF, TReg(d.name, d.content))
            self.free.append(v)

    def content_type(self, decls, visible, self_name) -> Type:
        rng = self.rng
        roll = rng.random()
        if roll < 0.4:
            return ONE
        if roll < 0.85 or not decls:
            eff = frozenset()
            if self.effects and visible:
                eff = frozenset(r for r in visible if rng.random() < 0.5)
            return arrow(ONE, ONE, eff)
        target = rng.choice(decls)
        return TReg(target.name, target.content)

    # --------------------------------------------------------------- helpers

    def region_ok(self, reg: _Region, write: bool, bang: int, allowed) -> bool:
        if self.effects and reg.name not in allowed:
            return False
        if write and reg.writes < 1:
            return False
        if not write and reg.reads < 1:
            return False
        d = reg.decl
        if bang:
            # Inside a promotion the region's total use must stay non-affine.
            if not d.persistent or d.family is Family.AFF:
                return False
            if write and d.family is not Family.EXP:
                return False
        if write and not d.persistent and self.cfg.mode.confluent and d.family is not Family.AFF:
            return False
        return True

    def spend(self, reg: _Region, write: bool) -> None:
        if write:
            reg.writes -= 1
        else:
            reg.reads -= 1

    def usable(self, ctx, bang: int):
        return [h for h in ctx if not h.used and (not h.affine or h.depth == bang)]

    def use(self, h: _Hyp) -> Var:
        if h.affine:
            h.used = True
        return Var(h.name)

    def addresses(self, ctx, bang: int, region: str):
        return [h for h in self.usable(ctx, bang) if isinstance(h.ty, TReg) and h.ty.region == region]

    def le(self, a: Type, b: Type) -> bool:
        return subtype(self.regions, a, b)

    def small_type(self, depth: int) -> Type:
        rng = self.rng
        roll = rng.random()
        if roll < 0.35:
            return ONE
        if roll < 0.55:
            return TBang(ONE)
        if roll < 0.75 and self.regions:
            r = rng.choice(list(self.regions.values()))
            return TReg(r.name, r.decl.content)
        if roll < 0.9 and self.regions:
            r = rng.choice(list(self.regions.values()))
            return r.decl.content
        return arrow(ONE, ONE)

    # ---------------------------------------------------------------- leaves

    def leaf(self, ty: Type, ctx, bang: int) -> Term:
        """A value (or B-typed composition of values); consumes no budget."""
        match ty:
            case TBehaviour():
                return Par(UNIT, UNIT)
            case TBang(b):
                return Bang(self.leaf(b, ctx, bang + 1))
            case TReg(r, _):
                hs = self.addresses(ctx, bang, r)
                hs = [h for h in hs if not h.affine] or hs
                return self.use(self.rng.choice(hs))
            case TArrow(d, _, c):
                y = self.fresh("y")
                return Lam(y, d, self.leaf(c, ctx, bang))
        return UNIT

    # ----------------------------------------------------------------- terms

    def value(self, ty: Type, ctx, bang: int, depth: int) -> Term:
        rng = self.rng
        vars_ = [h for h in self.usable(ctx, bang) if self.le(h.ty, ty)]
        if vars_ and rng.random() < 0.5:
            return self.use(rng.choice(vars_))
        match ty:
            case TBang(b):
                return Bang(self.value(b, ctx, bang + 1, depth))
            case TArrow(d, e, c) if depth > 0:
                y = self.fresh("y")
                inner = ctx + [_Hyp(y, d, True, bang)]
                return Lam(y, d, self.term(c, inner, bang, depth - 1, e))
        return self.leaf(ty, ctx, bang)

    def term(self, ty: Type, ctx, bang: int, depth: int, allowed) -> Term:
        if depth <= 0:
            return self.value(ty, ctx, bang, 0)
        w = self.cfg.weights
        options = [(k, w.get(k, 0)) for k in DEFAULT_WEIGHTS if w.get(k, 0) > 0]
        rng = self.rng
        while options:
            kinds, weights = zip(*options)
            kind = rng.choices(kinds, weights)[0]
            options = [o for o in options if o[0] != kind]
            out = getattr(self, "t_" + kind)(ty, ctx, bang, depth, allowed)
            if out is not None:
                return out
        return self.value(ty, ctx, bang, depth)

    def t_value(self, ty, ctx, bang, depth, allowed):
        if isinstance(ty, TBehaviour):
            return None
        return self.value(ty, ctx, bang, depth)

    def t_get(self, ty, ctx, bang, depth, allowed):
        cands = []
        for reg in self.regions.values():
            if self.le(reg.decl.content, ty) and self.region_ok(reg, False, bang, allowed):
                hs = self.addresses(ctx, bang, reg.name)
                if hs:
                    cands.append((reg, hs))
        if not cands:
            return None
        reg, hs = self.rng.choice(cands)
        self.spend(reg, False)
        a = self.use(self.rng.choice(hs))
        self.read_addrs.append(a)
        return Get(a)

    def t_set(self, ty, ctx, bang, depth, allowed):
        if ty != ONE:
            return None
        cands = []
        for reg in self.regions.values():
            if self.region_ok(reg, True, bang, allowed):
                hs = self.addresses(ctx, bang, reg.name)
                if hs:
                    cands.append((reg, hs))
        if not cands:
            return None
        reg, hs = self.rng.choice(cands)
        self.spend(reg, True)
        a = self.use(self.rng.choice(hs))
        v = self.value(reg.decl.content, ctx, bang, depth - 1)
        return (SetP if reg.decl.persistent else SetV)(a, v)

    def t_beta(self, ty, ctx, bang, depth, allowed):
        a = self.small_type(depth)
        arg = self.term(a, ctx, bang, depth - 1, allowed)
        y = self.fresh("y")
        body = self.term(ty, ctx + [_Hyp(y, a, True, bang)], bang, depth - 1, allowed)
        return App(Lam(y, a, body), arg)

    def t_seq(self, ty, ctx, bang, depth, allowed):
        first = self.term(ONE, ctx, bang, depth - 1, allowed)
        z = self.fresh("z")
        then = self.term(ty, ctx, bang, depth - 1, allowed)
        return App(Lam(z, ONE, then), first)

    def t_let(self, ty, ctx, bang, depth, allowed):
        a = self.small_type(depth)
        if isinstance(a, TBang):
            a = a.body
        bound = self.term(TBang(a), ctx, bang, depth - 1, allowed)
        x = self.fresh("x")
        body = self.term(ty, ctx + [_Hyp(x, a, False, bang)], bang, depth - 1, allowed)
        return LetBang(x, bound, body)

    def t_nu(self, ty, ctx, bang, depth, allowed):
        if not self.regions:
            return None
        reg = self.rng.choice(list(self.regions.values()))
        x = self.fresh("x")
        a = reg.decl.content
        body = self.term(ty, ctx + [_Hyp(x, TReg(reg.name, a), False, bang)], bang, depth - 1, allowed)
        return Nu(x, reg.name, a, body)

    def t_par(self, ty, ctx, bang, depth, allowed):
        if not isinstance(ty, TBehaviour):
            return None
        left = self.term(self.small_type(depth), ctx, bang, depth - 1, allowed)
        right = self.term(self.rng.choice([ONE, BEH]), ctx, bang, depth - 1, allowed)
        return Par(left, right)

    def t_apply(self, ty, ctx, bang, depth, allowed):
        fs = [
            h for h in self.usable(ctx, bang)
            if isinstance(h.ty, TArrow)
            and self.le(h.ty.cod, ty)
            and (not self.effects or h.ty.effect <= set(allowed))
        ]
        if not fs:
            return None
        f = self.use(self.rng.choice(fs))
        dom = next(h for h in ctx if h.name == f.name).ty.dom
        return App(f, self.term(dom, ctx, bang, depth - 1, allowed))

    # --------------------------------------------------------------- program

    def program(self) -> SourceFile:
        cfg, rng = self.cfg, self.rng
        self.preamble()
        ctx = [_Hyp(v.name, v.ty, False, 0) for v in self.free]
        allowed = frozenset(self.regions)
        binders = []
        for _ in range(rng.randint(0, 2) if self.regions else 0):
            reg = rng.choice(list(self.regions.values()))
            x = self.fresh("x")
            binders.append((x, reg))
            ctx.append(_Hyp(x, TReg(reg.name, reg.decl.content), False, 0))
        threads = []
        for _ in range(rng.randint(1, cfg.max_threads)):
            goal = rng.choice([ONE, BEH, self.small_type(cfg.max_depth)])
            threads.append(self.term(goal, ctx, 0, cfg.max_depth, allowed))
        stores = []
        for a in self.read_addrs:
            hyp = next((h for h in ctx if h.name == a.name), None)
            if hyp is None:
                continue
            reg = self.regions[hyp.ty.region]
            if not self.region_ok(reg, True, 0, allowed) or rng.random() < 0.15:
                continue
            self.spend(reg, True)
            v = self.value(reg.decl.content, ctx, 0, cfg.max_depth - 1)
            stores.append((StoreP if reg.decl.persistent else StoreV)(Var(a.name), v))
        body = par_all(threads + stores)
        for x, reg in reversed(binders):
            body = Nu(x, reg.name, reg.decl.content, body)
        f = SourceFile(tuple(r.decl for r in self.regions.values()), tuple(self.free), body)
        return f if self.effects else erase_file(f)


def gen_raw(config: GenConfig, attempt: int = 0) -> SourceFile:
    """One generation attempt, without the final typecheck."""
    if config.max_depth <= 1:
        return SourceFile()
    rng = random.Random(f"{config.seed}:{attempt}")
    return _Gen(config, rng).program()


def gen_typed(config: GenConfig, attempts: int = 20) -> SourceFile:
    """A file that typechecks in ``config.mode``.

    Attempts the typechecker rejects are redrawn; after ``attempts`` failures
    the trivial program is returned.
    """
    for attempt in range(attempts):
        f = gen_raw(config, attempt)
        try:
            typecheck(f, config.mode)
        except TypingError:
            continue
        return f
    return SourceFile()
