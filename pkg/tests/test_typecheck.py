import random

import pytest
from hypothesis import given, settings, strategies as st

from aic.generate import GenConfig, gen_typed
from aic.machine import MachineState, run
from aic.surface import RegionDecl, SourceFile, VarDecl, parse
from aic.syntax import App, Bang, Lam, LetBang, split, subst
from aic.typecheck import (
    BASE, CONFLUENT, EFFECTS, STRATIFIED, FormationError, Mode, TypingError,
    form_region_context, subtype, typecheck,
)
from aic.types import ONE, TArrow, TBang, TReg, arrow
from aic.usage import Family, Mult, msum
from test_syntax import shuffle

seeds = st.integers(0, 2**32)


def kinds(exc):
    return [d.kind for d in exc.value.diagnostics]


# ---------------------------------------------------------------- examples


def test_read_write_report(program):
    f = program("read_write")
    assert typecheck(f).render(f) == "type: !Reg r 1 -o B\neffect: {}\nusage r = <1,1> aff"


def test_caller_reports(program):
    usage = {}
    for name in ("caller", "reader", "writer", "caller_app"):
        f = program(name)
        usage[name] = str(typecheck(f).usages.region("r", Family.AFF))
    assert usage == {
        "caller": "<0,0> aff", "reader": "<0,1> aff", "writer": "<1,0> aff", "caller_app": "<1,1> aff",
    }
    f = program("caller")
    assert str(typecheck(f).type) == "(Reg r 1 -o 1) -o (Reg r 1 -o 1) -o B"


def test_divergent_program(program):
    f = program("divergent")
    rep = typecheck(f, EFFECTS)
    assert rep.effect == {"r"}
    assert typecheck(f).effect == frozenset()
    with pytest.raises(FormationError) as e:
        typecheck(f, STRATIFIED)
    assert "self-reference" in str(e.value)


@pytest.mark.parametrize("name", ["race_values", "race_volatile"])
def test_races_rejected_in_confluent_mode(program, name):
    with pytest.raises(TypingError) as e:
        typecheck(program(name), CONFLUENT)
    d = e.value.diagnostics[0]
    assert d.kind == "usage-clash" and "region r" in d.message


def test_persistent_race_accepted(program):
    typecheck(program("race_persistent"), CONFLUENT)


def test_unit():
    rep = typecheck(parse("program *"))
    assert rep.type == ONE and rep.effect == frozenset()


# --------------------------------------------------------------- formation


def regions(*specs):
    return [RegionDecl(n, isinstance(c, TBang), c, Family.AFF) for n, c in specs]


def test_formation_examples():
    fn = arrow(ONE, ONE)
    form_region_context(regions(("r", fn)), BASE, [VarDecl("x", Mult.ONE, TReg("r", fn))])
    with pytest.raises(FormationError) as e:
        form_region_context(regions(("r", ONE)), BASE, [VarDecl("x", Mult.ONE, TReg("r", fn))])
    assert "content mismatch" in str(e.value)
    form_region_context(regions(("r", ONE), ("s", arrow(ONE, ONE, {"r"}))), STRATIFIED)
    with pytest.raises(FormationError) as e:
        form_region_context(regions(("s", arrow(ONE, ONE, {"s"}))), STRATIFIED)
    assert "self-reference" in str(e.value)
    with pytest.raises(FormationError) as e:
        form_region_context(regions(("s", arrow(ONE, ONE, {"r"})), ("r", ONE)), STRATIFIED)
    assert "forward reference" in str(e.value)
    form_region_context(regions(("r", arrow(ONE, ONE, {"r"}))), EFFECTS)
    with pytest.raises(FormationError) as e:
        form_region_context(regions(("r", arrow(ONE, ONE, {"q"}))), EFFECTS)
    assert "undeclared region q" in str(e.value)


def test_confluent_mode_rejects_exp_regions():
    f = parse("region r persistent : !1 family exp\nprogram *")
    typecheck(f)
    with pytest.raises(FormationError) as e:
        typecheck(f, CONFLUENT)
    assert kinds(e) == ["confluence"]


def test_mode_invariant():
    with pytest.raises(ValueError):
        Mode("base", stratified=True)


# ----------------------------------------------------------------- subtype

R = ["r", "s"]
CONTENTS = {"r": ONE, "s": TBang(ONE)}


def types(max_leaves=6):
    effects = st.frozensets(st.sampled_from(R))
    leaf = st.sampled_from([ONE, TReg("r", ONE), TReg("s", TBang(ONE))])
    return st.recursive(
        leaf,
        lambda inner: st.one_of(
            st.builds(TBang, inner), st.builds(TArrow, inner, effects, inner)
        ),
        max_leaves=max_leaves,
    )


def vary(t, rng, up):
    """A random supertype (``up``) or subtype of ``t``."""
    match t:
        case TBang(b):
            return TBang(vary(b, rng, up))
        case TArrow(d, e, c):
            if up:
                e = e | {x for x in R if rng.random() < 0.3}
            else:
                e = frozenset(x for x in e if rng.random() < 0.7)
            return TArrow(vary(d, rng, not up), e, vary(c, rng, up))
    return t


def test_subtype_examples():
    assert subtype(R, arrow(ONE, ONE, {"r"}), arrow(ONE, ONE, {"r", "s"}))
    assert not subtype(R, arrow(ONE, ONE, {"r", "s"}), arrow(ONE, ONE, {"r"}))
    assert not subtype(R, TReg("r", arrow(ONE, ONE)), TReg("r", arrow(ONE, ONE, {"r"})))
    assert not subtype(["r"], arrow(ONE, ONE), arrow(ONE, ONE, {"s"}))


@settings(max_examples=300)
@given(types(), st.integers(0, 1000))
def test_subtype_reflexive_and_transitive(b, salt):
    rng = random.Random(salt)
    a, c = vary(b, rng, False), vary(b, rng, True)
    assert subtype(R, b, b)
    assert subtype(R, a, b) and subtype(R, b, c)
    assert subtype(R, a, c)


@settings(max_examples=300)
@given(types(4), types(4), types(4))
def test_subtype_transitive_on_random_triples(a, b, c):
    if subtype(R, a, b) and subtype(R, b, c):
        assert subtype(R, a, c)


# ------------------------------------------------------------- diagnostics


@pytest.mark.parametrize(
    "src, kind",
    [
        ("region r volatile : 1 family aff\nvar x : (1, Reg r 1)\nprogram !get(x)", "promotion"),
        ("region r volatile : 1 family aff\nvar x : (inf, Reg r 1)\nprogram pset(x, *)", "volatility"),
        ("region r volatile : 1 family wo\nvar x : (inf, Reg r 1)\nprogram set(x, *)", None),
        ("var x : (1, 1)\nprogram (\\y:1. \\z:1. *) x x", "usage-clash"),
        ("program * *", "type-mismatch"),
        ("program (\\y:1. y) !*", "type-mismatch"),
        ("program let !y = * in y", "type-mismatch"),
    ],
)
def test_diagnostics(src, kind):
    f = parse(src)
    if kind is None:
        typecheck(f)
        with pytest.raises(TypingError) as e:
            typecheck(f, CONFLUENT)
        assert kinds(e) == ["confluence"]
        return
    with pytest.raises(TypingError) as e:
        typecheck(f)
    assert kind in kinds(e)
    assert all(d.path for d in e.value.diagnostics)


def test_diagnostics_are_capped():
    body = " | ".join(["* *"] * 30)
    with pytest.raises(TypingError) as e:
        typecheck(parse("program " + body))
    assert len(e.value.diagnostics) == 20


def test_decoration_labels_region_variables(program):
    rep = typecheck(program("read_write_app"))
    from aic.syntax import Var, subterms

    labelled = [v for v in subterms(rep.decorated) if isinstance(v, Var) and v.region]
    assert {v.region for v in labelled} == {"r"}
    assert len(labelled) == 3


# --------------------------------------------------------------- properties


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from([BASE, EFFECTS, STRATIFIED, CONFLUENT]))
def test_weakening(seed, mode):
    f = gen_typed(GenConfig(seed=seed, mode=mode))
    rep = typecheck(f, mode)
    extra = SourceFile(
        f.regions + (RegionDecl("unused", False, ONE, Family.AFF),),
        f.vars + (VarDecl("ghost", Mult.ONE, ONE), VarDecl("spare", Mult.INF, TReg("unused", ONE))),
        f.program,
    )
    rep2 = typecheck(extra, mode)
    assert rep2 == rep
    assert rep2.render(extra).startswith(rep.render(f).split("\nusage")[0])


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_mode_monotonicity(seed):
    f = gen_typed(GenConfig(seed=seed, mode=CONFLUENT))
    typecheck(f, CONFLUENT)
    typecheck(f, BASE)
    g = gen_typed(GenConfig(seed=seed, mode=STRATIFIED))
    assert typecheck(g, STRATIFIED) == typecheck(g, EFFECTS)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(0, 100), st.sampled_from([BASE, EFFECTS]))
def test_structural_equivalence_preserves_typing(seed, salt, mode):
    f = gen_typed(GenConfig(seed=seed, mode=mode))
    g = f.with_program(shuffle(f.program, random.Random(salt)))
    assert typecheck(g, mode) == typecheck(f, mode)


def redex_instances(f, mode, seed):
    """(context file, x, hypothesis, M, V) for every beta or let ! redex fired in a run."""
    s = MachineState.load(f.program)
    trace = run(s, "seeded", seed, 50)
    before = [s] + [st for _, st in trace.entries]
    for (site, _), state in zip(trace.entries, before):
        if site.kind not in ("beta", "letbang"):
            continue
        cp = state.program
        decls = f.vars + tuple(VarDecl(b.name, Mult.INF, TReg(b.region, b.ty)) for b in cp.binders)
        ctx = SourceFile(f.regions, decls)
        _, hole = split(cp.threads[site.thread])
        match hole:
            case App(Lam(x, a, m), v):
                yield ctx, x, (Mult.ONE, a), m, v
            case LetBang(x, Bang(v), m):
                a = typecheck(ctx.with_program(v), mode).type
                yield ctx, x, (Mult.INF, a), m, v


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from([BASE, EFFECTS]))
def test_substitution_preserves_typing(seed, mode):
    f = gen_typed(GenConfig(seed=seed, mode=mode))
    names = [r.name for r in f.regions]
    for ctx, x, (mult, a), m, v in redex_instances(f, mode, seed):
        rm = typecheck(SourceFile(ctx.regions, ctx.vars + (VarDecl(x, mult, a),), m), mode)
        rv = typecheck(ctx.with_program(v), mode)
        rs = typecheck(ctx.with_program(subst(v, x, m)), mode)
        if mode.effects:
            assert subtype(names, rs.type, rm.type) and rs.effect <= rm.effect
        else:
            assert rs.type == rm.type
        rest = rm.usages.without_var(x)
        expected = msum(rest, rv.usages) if x in rm.usages.vars else rest
        assert rs.usages == expected


def test_volatile_exp_regions_are_linted():
    f = parse("region r volatile : 1 family exp\nprogram *")
    assert typecheck(f).warnings == ("region r is volatile and exp: it cannot be read inside !",)
    assert typecheck(parse("region r persistent : !1 family exp\nprogram *")).warnings == ()
