import itertools

import pytest
from hypothesis import given, strategies as st

from aic.usage import (
    EMPTY, Family, Mult, RegionUsage, UndefinedSum, UsageMap, all_usages, check_not_aff,
    is_aff_hyp, msum, mult_sum, neutral, usum,
)

Z, O, I = Mult.ZERO, Mult.ONE, Mult.INF
USAGES = all_usages()


def try_sum(f, a, b):
    try:
        return f(a, b)
    except UndefinedSum:
        return None


def test_seven_usages():
    assert len(USAGES) == 7
    with pytest.raises(ValueError):
        RegionUsage(O, O, Family.WO)


def test_mult_table():
    defined = {(a, b): try_sum(mult_sum, a, b) for a in Mult for b in Mult}
    assert defined[Z, O] == O and defined[I, Z] == I and defined[I, I] == I
    assert defined[O, O] is None and defined[O, I] is None and defined[I, O] is None


def test_usum_examples():
    assert usum(RegionUsage(O, Z, Family.AFF), RegionUsage(Z, O, Family.AFF)) == RegionUsage(O, O, Family.AFF)
    with pytest.raises(UndefinedSum) as e:
        usum(RegionUsage(O, I, Family.WO), RegionUsage(O, I, Family.WO))
    assert e.value.reason == "component-clash"
    with pytest.raises(UndefinedSum) as e:
        usum(RegionUsage(I, I, Family.EXP), RegionUsage(Z, I, Family.WO))
    assert e.value.reason == "family-mismatch"


@pytest.mark.parametrize("u", USAGES, ids=str)
def test_neutral_law(u):
    assert usum(u, neutral(u.family)) == u
    assert usum(neutral(u.family), u) == u


def test_commutative_and_associative_exhaustively():
    for a, b in itertools.product(USAGES, repeat=2):
        assert try_sum(usum, a, b) == try_sum(usum, b, a)
    for a, b, c in itertools.product(USAGES, repeat=3):
        ab, bc = try_sum(usum, a, b), try_sum(usum, b, c)
        left = try_sum(usum, ab, c) if ab else None
        right = try_sum(usum, a, bc) if bc else None
        assert left == right
    for a, b, c in itertools.product(Mult, repeat=3):
        ab, bc = try_sum(mult_sum, a, b), try_sum(mult_sum, b, c)
        left = try_sum(mult_sum, ab, c) if ab else None
        right = try_sum(mult_sum, a, bc) if bc else None
        assert left == right


def test_msum_examples():
    m = UsageMap({"x": O}, {"r": RegionUsage(Z, O, Family.AFF)})
    assert msum(EMPTY, m) == m
    with pytest.raises(UndefinedSum) as e:
        msum(UsageMap({"x": O}), UsageMap({"x": O}))
    assert e.value.key == "x"
    r = msum(UsageMap({}, {"r": RegionUsage(Z, O, Family.AFF)}), UsageMap({}, {"r": RegionUsage(O, Z, Family.AFF)}))
    assert r.regions == {"r": RegionUsage(O, O, Family.AFF)}


maps = st.builds(
    UsageMap,
    st.dictionaries(st.sampled_from("xyz"), st.sampled_from(list(Mult)), max_size=3),
    st.dictionaries(st.sampled_from(["r", "s"]), st.sampled_from([u for u in USAGES if u.family is Family.AFF]), max_size=2),
)


@given(maps, maps, maps)
def test_msum_laws_on_random_maps(a, b, c):
    assert try_sum(msum, a, b) == try_sum(msum, b, a)
    ab, bc = try_sum(msum, a, b), try_sum(msum, b, c)
    left = try_sum(msum, ab, c) if ab else None
    right = try_sum(msum, a, bc) if bc else None
    assert left == right


def test_aff_predicate():
    assert is_aff_hyp(O)
    assert not is_aff_hyp(I)
    assert is_aff_hyp(RegionUsage(I, I, Family.EXP), volatile=True)
    assert not is_aff_hyp(RegionUsage(I, I, Family.EXP), volatile=False)
    for vol in (True, False):
        assert not is_aff_hyp(neutral(Family.AFF), vol)
    assert not is_aff_hyp(neutral(Family.WO), False)


def test_check_not_aff():
    assert check_not_aff(UsageMap({"x": I}), {}) is None
    assert check_not_aff(UsageMap({"x": O}), {}) == "x"
    assert check_not_aff(UsageMap({}, {"r": RegionUsage(Z, O, Family.AFF)}), {"r": False}) == "r"
