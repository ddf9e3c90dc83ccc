"""Small-step execution over canonical states.

A state is a canonical program: a ν prefix, a multiset of threads and a
multiset of stores.  Every step rewrites one thread (and possibly one store)
and re-canonicalizes, so states can be compared by fingerprint.
"""
from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

from .syntax import (
    UNIT, App, Bang, BlockedRead, CanonicalProgram, ContractViolation, Get, Lam, LetBang,
    Redex, SetP, SetV, Store, StuckValue, Term, canonicalize, decompose, fingerprint, plug,
    recanonicalize, render, _decompose, split, subst, to_term,
)

DEFAULT_MAX_STEPS = 10_000
DEFAULT_MAX_STATES = 10_000


class RuntimeShapeError(Exception):
    """A redex met a value of the wrong shape (only possible for untyped input)."""


class ClassificationFailure(Exception):
    """A quiescent thread that is neither a value nor a blocked read."""


@dataclass(frozen=True, order=True)
class Site:
    thread: int
    kind: str
    store: int | None = None

    def __str__(self) -> str:
        s = f"{self.kind}@thread {self.thread}"
        return s if self.store is None else f"{s} store {self.store}"


@dataclass(frozen=True)
class MachineState:
    program: CanonicalProgram
    steps: int = 0

    @classmethod
    def load(cls, p: Term) -> MachineState:
        return cls(canonicalize(p))

    @cached_property
    def fingerprint(self) -> str:
        return fingerprint(self.program)

    def term(self) -> Term:
        return to_term(self.program)

    def __str__(self) -> str:
        return self.fingerprint


def enabled(s: MachineState) -> list[Site]:
    sites = []
    stores = s.program.stores
    for i, t in enumerate(s.program.threads):
        match _decompose(t):
            case Redex(kind):
                sites.append(Site(i, kind))
            case BlockedRead(a):
                for j, st in enumerate(stores):
                    if st.addr.name == a:
                        kind = "get-persistent" if st.persistent else "get-volatile"
                        sites.append(Site(i, kind, j))
    return sites


def _contract(hole: Term, site: Site) -> tuple[Term, Store | None]:
    match site.kind, hole:
        case "beta", App(Lam(x, _, body), v):
            return subst(v, x, body), None
        case "beta", _:
            raise RuntimeShapeError(f"applying a non-function in {render(hole)}")
        case "letbang", LetBang(x, Bang(v), body):
            return subst(v, x, body), None
        case "letbang", _:
            raise RuntimeShapeError(f"let ! on a non-banged value in {render(hole)}")
        case "setv", SetV(a, v):
            return UNIT, Store(a, False, v)
        case "setp", SetP(a, v):
            return UNIT, Store(a, True, v)
    raise ContractViolation(f"site {site} does not match {render(hole)}")


def step(s: MachineState, site: Site) -> MachineState:
    cp = s.program
    threads, stores = list(cp.threads), list(cp.stores)
    try:
        thread = threads[site.thread]
    except IndexError:
        raise ContractViolation(f"no thread {site.thread}") from None
    frames, hole = split(thread)
    if site.kind.startswith("get-"):
        if not isinstance(hole, Get) or site.store is None or site.store >= len(stores):
            raise ContractViolation(f"site {site} is not enabled")
        st = stores[site.store]
        if st.addr.name != hole.addr.name or st.persistent != (site.kind == "get-persistent"):
            raise ContractViolation(f"site {site} is not enabled")
        if st.persistent:
            if not isinstance(st.value, Bang):
                raise RuntimeShapeError(f"persistent store holds non-banged {render(st.value)}")
        else:
            del stores[site.store]
        threads[site.thread] = plug(frames, st.value)
    else:
        try:
            new, store = _contract(hole, site)
        except ContractViolation as exc:
            if site.kind in ("beta", "letbang"):
                raise RuntimeShapeError(str(exc)) from None
            raise
        threads[site.thread] = plug(frames, new)
        if store is not None:
            stores.append(store)
    return MachineState(recanonicalize(cp, threads, stores), s.steps + 1)


# ---------------------------------------------------------------- schedulers


@dataclass
class Trace:
    initial: MachineState
    entries: list = field(default_factory=list)  # (Site, MachineState)
    outcome: str = "NormalForm"  # or StepLimit
    steps: int = 0

    @property
    def final(self) -> MachineState:
        return self.entries[-1][1] if self.entries else self.initial

    @property
    def fingerprints(self) -> list[str]:
        return [st.fingerprint for _, st in self.entries]

    def lines(self) -> list[str]:
        return [
            f"step {n}: {site.kind}@thread {site.thread} -> {st.fingerprint}"
            for n, (site, st) in enumerate(self.entries, 1)
        ]


def run(
    s: MachineState,
    scheduler: str = "leftmost",
    seed: int = 0,
    max_steps: int = DEFAULT_MAX_STEPS,
    keep: bool = True,
) -> Trace:
    """Run until no site is enabled or ``max_steps`` steps were taken.

    With ``keep=False`` only the last state is retained, which keeps long
    diverging runs cheap.
    """
    if max_steps < 0:
        raise ValueError("max_steps must be non-negative")
    if scheduler not in ("leftmost", "seeded"):
        raise ValueError(f"unknown scheduler {scheduler!r}")
    rng = random.Random(seed)
    trace = Trace(s)
    taken = 0
    while True:
        sites = enabled(s)
        if not sites:
            trace.outcome = "NormalForm"
            break
        if taken >= max_steps:
            trace.outcome = "StepLimit"
            break
        site = sites[0] if scheduler == "leftmost" else rng.choice(sites)
        s = step(s, site)
        taken += 1
        if keep:
            trace.entries.append((site, s))
        else:
            trace.entries[:] = [(site, s)]
    trace.steps = taken
    return trace


# --------------------------------------------------------------- exploration


@dataclass
class ExploreResult:
    states: int
    normal_forms: set
    violations: list  # (state fingerprint, site, site)
    exhausted: bool = False

    @property
    def ok(self) -> bool:
        return not self.violations and len(self.normal_forms) <= 1


def explore(s: MachineState, max_states: int = DEFAULT_MAX_STATES) -> ExploreResult:
    """Breadth-first closure plus a one-step diamond check at every state."""
    succ: dict[str, list] = {}  # fingerprint -> [(site, fingerprint)]
    states: dict[str, MachineState] = {}

    def successors(fp: str) -> list:
        if fp not in succ:
            st = states[fp]
            out = []
            for site in enabled(st):
                nxt = step(st, site)
                states.setdefault(nxt.fingerprint, nxt)
                out.append((site, nxt.fingerprint))
            succ[fp] = out
        return succ[fp]

    states[s.fingerprint] = s
    seen = {s.fingerprint}
    queue = deque([s.fingerprint])
    order = []
    exhausted = False
    while queue:
        fp = queue.popleft()
        order.append(fp)
        for _, nfp in successors(fp):
            if nfp not in seen:
                if len(seen) >= max_states:
                    exhausted = True
                    continue
                seen.add(nfp)
                queue.append(nfp)

    normal = {fp for fp in order if not succ[fp]}
    violations = []
    for fp in order:
        out = succ[fp]
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                (sa, a), (sb, b) = out[i], out[j]
                if a == b:
                    continue
                reach_a = {a} | {n for _, n in successors(a)}
                reach_b = {b} | {n for _, n in successors(b)}
                if not reach_a & reach_b:
                    violations.append((fp, sa, sb))
    return ExploreResult(len(seen), normal, violations, exhausted)


# ------------------------------------------------------------------ progress


@dataclass(frozen=True)
class ProgressReport:
    values: tuple  # thread indices
    blocked: tuple  # (thread index, address)
    stores: int

    def __str__(self) -> str:
        parts = [f"{len(self.values)} value thread(s)"]
        parts += [f"thread {i} blocked on {a}" for i, a in self.blocked]
        parts.append(f"{self.stores} store(s)")
        return ", ".join(parts)


def classify_stuck(s: MachineState) -> ProgressReport:
    if enabled(s):
        raise ContractViolation("classify_stuck needs a state with no enabled site")
    values, blocked = [], []
    addrs = {st.addr.name for st in s.program.stores}
    for i, t in enumerate(s.program.threads):
        match decompose(t):
            case StuckValue():
                values.append(i)
            case BlockedRead(a) if a not in addrs:
                blocked.append((i, a))
            case other:
                raise ClassificationFailure(f"thread {i} ({render(t)}) classified as {other}")
    return ProgressReport(tuple(values), tuple(blocked), len(s.program.stores))
