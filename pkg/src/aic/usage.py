"""Partial usage monoids for variables and regions.

Variable multiplicities live in {0, 1, inf} with ``x + 0 = x`` and
``inf + inf = inf``; every other sum is undefined.  Region usages are pairs
(output, input) drawn from one of three closed families, and two region
usages only add when they belong to the same family.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Mult(enum.Enum):
    ZERO = "0"
    ONE = "1"
    INF = "inf"

    def __str__(self) -> str:
        return self.value


class Family(enum.Enum):
    AFF = "aff"
    WO = "wo"
    EXP = "exp"

    def __str__(self) -> str:
        return self.value


class UndefinedSum(Exception):
    """A usage sum that the partial algebra leaves undefined.

    ``reason`` is ``"family-mismatch"`` or ``"component-clash"``; ``key`` names
    the variable or region when the clash arises inside a map sum.
    """

    def __init__(self, reason: str, key: str | None = None):
        self.reason = reason
        self.key = key
        super().__init__(f"{reason} on {key}" if key else reason)


def mult_sum(a: Mult, b: Mult) -> Mult:
    if a is Mult.ZERO:
        return b
    if b is Mult.ZERO:
        return a
    if a is Mult.INF and b is Mult.INF:
        return Mult.INF
    raise UndefinedSum("component-clash")


Z, O, I = Mult.ZERO, Mult.ONE, Mult.INF

MEMBERS = {
    Family.EXP: ((I, I),),
    Family.WO: ((O, I), (Z, I)),
    Family.AFF: ((Z, Z), (O, Z), (Z, O), (O, O)),
}


@dataclass(frozen=True)
class RegionUsage:
    out: Mult
    inp: Mult
    family: Family

    def __post_init__(self):
        if (self.out, self.inp) not in MEMBERS[self.family]:
            raise ValueError(f"<{self.out},{self.inp}> is not a {self.family} usage")

    def __str__(self) -> str:
        return f"<{self.out},{self.inp}> {self.family}"


_NEUTRAL = {Family.EXP: (I, I), Family.WO: (Z, I), Family.AFF: (Z, Z)}


def neutral(family: Family) -> RegionUsage:
    return RegionUsage(*_NEUTRAL[family], family)


def all_usages() -> list[RegionUsage]:
    return [RegionUsage(o, i, f) for f in Family for (o, i) in MEMBERS[f]]


# Smallest family member meeting the get side condition (input != 0) and the
# write side condition (output != 0).
_READ = {Family.AFF: (Z, O), Family.WO: (Z, I), Family.EXP: (I, I)}
_WRITE = {Family.AFF: (O, Z), Family.WO: (O, I), Family.EXP: (I, I)}


def read_usage(family: Family) -> RegionUsage:
    return RegionUsage(*_READ[family], family)


def write_usage(family: Family) -> RegionUsage:
    return RegionUsage(*_WRITE[family], family)


def usum(a: RegionUsage, b: RegionUsage) -> RegionUsage:
    if a.family is not b.family:
        raise UndefinedSum("family-mismatch")
    out, inp = mult_sum(a.out, b.out), mult_sum(a.inp, b.inp)
    if (out, inp) not in MEMBERS[a.family]:
        raise UndefinedSum("component-clash")
    return RegionUsage(out, inp, a.family)


@dataclass(frozen=True)
class UsageMap:
    """Usages of the hypotheses a term actually uses.

    Absent variables count as 0 and absent regions as their family's neutral
    usage; presence records that the hypothesis was used at all, which is
    what the promotion check inspects.
    """

    vars: dict = field(default_factory=dict)
    regions: dict = field(default_factory=dict)

    def __hash__(self):
        return hash((frozenset(self.vars.items()), frozenset(self.regions.items())))

    def without_var(self, name: str) -> UsageMap:
        if name not in self.vars:
            return self
        return UsageMap({k: v for k, v in self.vars.items() if k != name}, self.regions)

    def region(self, name: str, family: Family) -> RegionUsage:
        return self.regions.get(name, neutral(family))


EMPTY = UsageMap()


def var_usage(name: str, mult: Mult) -> UsageMap:
    return UsageMap({name: mult}, {})


def region_usage(name: str, usage: RegionUsage) -> UsageMap:
    return UsageMap({}, {name: usage})


def msum(a: UsageMap, b: UsageMap) -> UsageMap:
    """Pointwise sum; raises UndefinedSum tagged with the first clashing key."""
    vars = dict(a.vars)
    for k in sorted(b.vars):
        if k in vars:
            try:
                vars[k] = mult_sum(vars[k], b.vars[k])
            except UndefinedSum as exc:
                raise UndefinedSum(exc.reason, k) from None
        else:
            vars[k] = b.vars[k]
    regions = dict(a.regions)
    for k in sorted(b.regions):
        if k in regions:
            try:
                regions[k] = usum(regions[k], b.regions[k])
            except UndefinedSum as exc:
                raise UndefinedSum(exc.reason, k) from None
        else:
            regions[k] = b.regions[k]
    return UsageMap(vars, regions)


def msum_all(maps) -> UsageMap:
    total = EMPTY
    for m in maps:
        total = msum(total, m)
    return total


def is_aff_var(mult: Mult) -> bool:
    return mult is Mult.ONE


def is_aff_region(usage: RegionUsage, volatile: bool) -> bool:
    if Mult.ONE in (usage.out, usage.inp):
        return True
    return volatile and usage.inp is not Mult.ZERO


def check_not_aff(m: UsageMap, volatile: dict) -> str | None:
    """Return the first affine hypothesis among the used ones, or None.

    ``volatile`` maps region names to True for volatile regions.
    """
    for name in sorted(m.vars):
        if is_aff_var(m.vars[name]):
            return name
    for name in sorted(m.regions):
        if is_aff_region(m.regions[name], volatile.get(name, False)):
            return name
    return None


def is_aff_hyp(usage: Mult | RegionUsage, volatile: bool = False) -> bool:
    """aff for a single hypothesis: a variable multiplicity or a region usage."""
    if isinstance(usage, Mult):
        return is_aff_var(usage)
    return is_aff_region(usage, volatile)
