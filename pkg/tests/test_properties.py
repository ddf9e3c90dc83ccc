import pytest

from aic.generate import GenConfig, gen_typed
from aic.properties import (
    PROPERTIES, check_confluence, check_progress, check_roundtrip, check_simulation_case,
    check_subject_reduction, check_termination, minimize,
)
from aic.surface import SourceFile, print_file
from aic.typecheck import BASE, CONFLUENT, EFFECTS, STRATIFIED, typecheck


@pytest.mark.parametrize("name", sorted(PROPERTIES))
def test_small_suites_pass(name):
    result = PROPERTIES[name](10, GenConfig(seed=5, mode=STRATIFIED))
    assert result.ok and result.cases == 10, result.render()


def test_subject_reduction_base():
    result = PROPERTIES["subject-reduction"](30, GenConfig(seed=9))
    assert result.ok, result.render()


def test_replay_is_deterministic():
    cfg = GenConfig(seed=17, mode=EFFECTS)
    a = PROPERTIES["subject-reduction"](15, cfg)
    b = PROPERTIES["subject-reduction"](15, cfg)
    assert a.render() == b.render()


def test_empty_program_passes_everything():
    f = SourceFile()
    assert check_subject_reduction(f, EFFECTS, 0) is None
    assert check_confluence(f) is None
    assert check_termination(f, 0) is None
    assert check_simulation_case(f, 0) is None
    assert check_progress(f, 0) is None
    assert check_roundtrip(f) is None


def test_divergence_is_reported(program):
    why = check_termination(program("divergent"), 1, max_steps=500)
    assert why == "no normal form within 500 steps"


def test_volatile_race_breaks_confluence(program):
    assert "normal forms" in check_confluence(program("race_volatile"))
    assert check_confluence(program("race_persistent")) is None


def base_counterexample():
    # Without the confluence restrictions races are typable, so some
    # generated base-mode program has more than one outcome.
    for seed in range(500):
        f = gen_typed(GenConfig(seed=seed))
        if check_confluence(f):
            return f
    pytest.fail("no base-mode race among 500 programs")


def test_minimized_counterexample_still_fails():
    f = base_counterexample()
    small = minimize(f, BASE, check_confluence)
    assert check_confluence(small) is not None
    typecheck(small, BASE)
    assert len(print_file(small)) <= len(print_file(f))


def test_minimize_keeps_a_passing_file_when_nothing_fails():
    f = gen_typed(GenConfig(seed=1, mode=CONFLUENT))
    assert minimize(f, CONFLUENT, lambda g: None) == f
