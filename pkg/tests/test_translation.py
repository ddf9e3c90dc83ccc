import random

import pytest
from hypothesis import given, settings, strategies as st

from aic.generate import GenConfig, gen_typed
from aic.machine import MachineState, Site, run
from aic.surface import parse
from aic.syntax import App, Bang, ContractViolation, Lam, LetBang, Nu, Var, canonicalize, par_all, split, subst
from aic.translation import (
    IApp, IGet, ILam, IPSet, IRegion, IState, IStore, ITypeError, IUNIT, IVar, check_simulation,
    forget_regions, forget_term, forget_type, i_enabled, i_step, i_subst, i_typecheck, show_iterm,
    translate_file, translate_state,
)
from aic.typecheck import EFFECTS, STRATIFIED, typecheck
from aic.types import BEH, ONE, TBang, TReg, arrow

from test_syntax import shuffle

seeds = st.integers(0, 2**32)


def show(t):
    return show_iterm(t, alpha=True)


def test_forget_type():
    assert forget_type(TBang(TReg("r", TBang(ONE)))) == TReg("r", ONE)
    a = arrow(TBang(ONE), TBang(TReg("r", ONE)), {"r"})
    assert forget_type(a) == arrow(ONE, TReg("r", ONE), {"r"})
    assert forget_type(BEH) == BEH


def test_forget_decorated_program():
    r3 = TReg("r3", ONE)
    p = par_all([
        Var("x1", "r1"),
        LetBang("x2", Bang(Var("a2", "r2")), Var("x2", "r2"), TReg("r2", ONE)),
        Lam("x3", r3, Var("x3", "r3")),
        Nu("x4", "r4", ONE, Var("x4", "r4")),
    ])
    out = forget_term(p)
    assert show_iterm(out) == "r1 | (\\x2:Reg r2 1. r2) r2 | (\\x3:Reg r3 1. r3) | r4"


def test_forget_requires_decorations():
    with pytest.raises(ContractViolation):
        forget_term(Var("x"), region_vars={"x"})
    with pytest.raises(ContractViolation):
        forget_term(LetBang("x", Bang(Var("y")), Var("x")))


def test_volatile_writes_become_persistent(program):
    text = translate_file(program("read_write_app"))
    assert text.splitlines() == [
        "region r : 1",
        "program (\\x:Reg r 1. (\\x_1:Reg r 1. get(r) | pset(r, *)) x) r",
    ]


def test_target_typing():
    regions = [("r", ONE), ("s", arrow(ONE, ONE, {"r"}))]
    assert i_typecheck(regions, IGet(IRegion("r"))) == (ONE, frozenset({"r"}))
    assert i_typecheck(regions, IPSet(IRegion("s"), ILam("z", ONE, IGet(IRegion("r"))))) == (
        ONE, frozenset({"s"}))
    assert i_typecheck(regions, IApp(ILam("z", ONE, IVar("z")), IUNIT)) == (ONE, frozenset())
    with pytest.raises(ITypeError):
        i_typecheck(regions, IApp(IUNIT, IUNIT))
    with pytest.raises(ITypeError):
        i_typecheck([("r", TReg("r", ONE))], IUNIT)  # region mentions itself
    with pytest.raises(ITypeError):
        i_typecheck([("r", TReg("s", ONE)), ("s", ONE)], IUNIT)  # later region


def test_target_steps():
    s = IState.load(IApp(ILam("z", ONE, IGet(IRegion("r"))), IUNIT))
    s = i_step(s, Site(0, "beta"))
    assert i_enabled(s) == []
    s = IState.of(s.threads, [IStore("r", IUNIT)])
    (site,) = i_enabled(s)
    s = i_step(s, site)
    assert str(s) == "* | [r <= *]"  # reads never consume
    s = i_step(IState.load(IPSet(IRegion("r"), IUNIT)), Site(0, "pset"))
    assert str(s) == "* | [r <= *]"


def test_simulation_residual(program):
    v = check_simulation(program("read_write_app"))
    assert v.outcome == "Simulated" and len(v.steps) == 4
    assert [s.target.kind for s in v.steps] == ["beta", "beta", "pset", "get"]
    assert v.steps[-1].residual == ("[r <= *]",)


def test_simulation_of_unit():
    v = check_simulation(parse("program *"))
    assert v.ok and str(v) == "Simulated(0 steps)"


def test_simulation_persistent_race(program):
    for seed in range(5):
        assert check_simulation(program("race_persistent"), "seeded", seed).outcome == "Simulated"


def test_simulation_step_limit(program):
    v = check_simulation(program("divergent"), max_steps=100, mode=EFFECTS)
    assert v.outcome == "StepLimit" and v.ok


def decorated(seed):
    f = gen_typed(GenConfig(seed=seed, mode=STRATIFIED))
    return f, typecheck(f, STRATIFIED)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_translation_preserves_typing(seed):
    f, rep = decorated(seed)
    ty, eff = i_typecheck(forget_regions(f), forget_term(rep.decorated))
    assert ty == forget_type(rep.type) and eff == rep.effect


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(0, 100))
def test_translation_respects_struct_equiv(seed, salt):
    _, rep = decorated(seed)
    q = shuffle(rep.decorated, random.Random(salt))
    a, b = IState.load(forget_term(rep.decorated)), IState.load(forget_term(q))
    assert a.thread_keys() == b.thread_keys() and a.store_keys() == b.store_keys()


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_translation_commutes_with_substitution(seed):
    _, rep = decorated(seed)
    s = MachineState(canonicalize(rep.decorated))
    trace = run(s, "seeded", seed, 50)
    before = [s] + [st for _, st in trace.entries]
    for (site, _), state in zip(trace.entries, before):
        _, hole = split(state.program.threads[site.thread])
        match hole:
            case App(Lam(x, _, m), v) | LetBang(x, Bang(v), m):
                lhs = forget_term(subst(v, x, m))
                rhs = i_subst(forget_term(v), x, forget_term(m))
                assert show(lhs) == show(rhs)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_translated_states_match_images(seed):
    f, rep = decorated(seed)
    v = check_simulation(f, "seeded", seed)
    assert v.outcome == "Simulated"
    s = MachineState(canonicalize(rep.decorated))
    assert str(translate_state(s)) == str(IState.load(forget_term(rep.decorated)))
