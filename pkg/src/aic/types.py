"""Value types and behaviours, shared by both the base and the effect system.

A single grammar serves both systems: in the base system every arrow simply
carries the empty effect.
"""
from __future__ import annotations

from dataclasses import dataclass


class Type:
    __slots__ = ()

    def __str__(self) -> str:
        return show_type(self)


@dataclass(frozen=True)
class TUnit(Type):
    pass


@dataclass(frozen=True)
class TBehaviour(Type):
    pass


@dataclass(frozen=True)
class TBang(Type):
    body: Type


@dataclass(frozen=True)
class TReg(Type):
    region: str
    content: Type


@dataclass(frozen=True)
class TArrow(Type):
    dom: Type
    effect: frozenset
    cod: Type


ONE = TUnit()
BEH = TBehaviour()


def arrow(dom: Type, cod: Type, effect=()) -> TArrow:
    return TArrow(dom, frozenset(effect), cod)


def is_value_type(t: Type) -> bool:
    """False only for the behaviour type B."""
    return not isinstance(t, TBehaviour)


def erase_effects(t: Type) -> Type:
    match t:
        case TBang(b):
            return TBang(erase_effects(b))
        case TReg(r, c):
            return TReg(r, erase_effects(c))
        case TArrow(d, _, c):
            return TArrow(erase_effects(d), frozenset(), erase_effects(c))
    return t


def regions_of(t: Type) -> set[str]:
    """Every region name mentioned by ``t``, through Reg types or latent effects."""
    match t:
        case TBang(b):
            return regions_of(b)
        case TReg(r, c):
            return {r} | regions_of(c)
        case TArrow(d, e, c):
            return set(e) | regions_of(d) | regions_of(c)
    return set()


def show_effect(effect) -> str:
    return "{" + ",".join(sorted(effect)) + "}"


def show_type(t: Type) -> str:
    match t:
        case TUnit():
            return "1"
        case TBehaviour():
            return "B"
        case TBang(b):
            return "!" + _atom(b)
        case TReg(r, c):
            return f"Reg {r} {_atom(c)}"
        case TArrow(d, e, c):
            dom = f"({show_type(d)})" if isinstance(d, TArrow) else show_type(d)
            op = "-o" if not e else "-" + show_effect(e) + ">"
            return f"{dom} {op} {show_type(c)}"
    raise TypeError(f"not a type: {t!r}")


def _atom(t: Type) -> str:
    s = show_type(t)
    return f"({s})" if isinstance(t, TArrow) else s
