"""Property suites over generated programs.

Each property draws ``n`` files from the generator, checks one statement on
each and reports the failing cases together with a minimized witness.
Results depend only on the configuration, so a run can be replayed from its
seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .generate import GenConfig, gen_typed
from .machine import ClassificationFailure, MachineState, RuntimeShapeError, classify_stuck, explore, run
from .surface import SourceFile, parse, print_file
from .syntax import (
    UNIT, App, Bang, Lam, LetBang, MalformedProgram, Nu, Par, SetP, SetV, StoreP, StoreV, Term,
    Unit, free_vars, is_seq, struct_equiv,
)
from .translation import (
    ITypeError, check_simulation, forget_regions, forget_term, forget_type, i_typecheck,
)
from .typecheck import CONFLUENT, STRATIFIED, Mode, TypingError, subtype, typecheck

MASK = (1 << 64) - 1


@dataclass(frozen=True)
class Failure:
    seed: int
    file: str
    explanation: str


@dataclass
class PropertyResult:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def render(self) -> str:
        head = f"{self.name}: {self.cases} cases, {len(self.failures)} failure(s)"
        parts = [head]
        for f in self.failures:
            parts.append(f"-- seed {f.seed}: {f.explanation}\n{f.file}")
        return "\n".join(parts)


def case_seed(seed: int, i: int) -> int:
    return (seed * 1_000_003 + i) & MASK


# ------------------------------------------------------------- single checks
# Each check returns None when the property holds, or an explanation.


def _retype(file: SourceFile, s: MachineState, mode: Mode):
    return typecheck(file.with_program(s.term()), mode)


def check_subject_reduction(file: SourceFile, mode: Mode, seed: int, max_steps: int = 50):
    report = typecheck(file, mode)
    trace = run(MachineState.load(file.program), "seeded", seed, max_steps)
    ty, eff = report.type, report.effect
    for n, (site, s) in enumerate(trace.entries, 1):
        try:
            after = _retype(file, s, mode)
        except TypingError as exc:
            return f"step {n} ({site}) is untypable: {exc.diagnostics[0]}"
        if mode.effects:
            good = subtype([r.name for r in file.regions], after.type, ty) and after.effect <= eff
        else:
            good = after.type == ty
        if not good:
            return (
                f"step {n} ({site}) changed the type from {ty} / {sorted(eff)} "
                f"to {after.type} / {sorted(after.effect)}"
            )
    return None


def check_confluence(file: SourceFile, max_states: int = 10_000):
    res = explore(MachineState.load(file.program), max_states)
    if res.exhausted:
        return f"state budget of {max_states} exceeded"
    if len(res.normal_forms) > 1:
        return f"{len(res.normal_forms)} normal forms: " + " ;; ".join(sorted(res.normal_forms))
    if res.violations:
        fp, a, b = res.violations[0]
        return f"diamond fails at {fp} for {a} / {b}"
    return None


def check_termination(file: SourceFile, seed: int, max_steps: int = 10_000):
    trace = run(MachineState.load(file.program), "seeded", seed, max_steps, keep=False)
    if trace.outcome != "NormalForm":
        return f"no normal form within {max_steps} steps"
    return None


def check_simulation_case(file: SourceFile, seed: int, max_steps: int = 10_000):
    report = typecheck(file, STRATIFIED)
    try:
        ty, eff = i_typecheck(forget_regions(file), forget_term(report.decorated))
    except ITypeError as exc:
        return f"translation is untypable: {exc}"
    if eff != report.effect or ty != forget_type(report.type):
        return (
            f"translation typed at {ty} / {sorted(eff)}, "
            f"expected {forget_type(report.type)} / {sorted(report.effect)}"
        )
    verdict = check_simulation(file, "seeded", seed, max_steps)
    if verdict.outcome != "Simulated":
        return str(verdict)
    return None


def check_progress(file: SourceFile, seed: int, max_steps: int = 10_000):
    trace = run(MachineState.load(file.program), "seeded", seed, max_steps, keep=False)
    if trace.outcome != "NormalForm":
        return f"no quiescent state within {max_steps} steps"
    try:
        classify_stuck(trace.final)
    except ClassificationFailure as exc:
        return str(exc)
    return None


def check_roundtrip(file: SourceFile):
    text = print_file(file)
    again = parse(text)
    if print_file(again) != text:
        return "printing is not idempotent after a reparse"
    if again.regions != file.regions or again.vars != file.vars:
        return "preamble changed across print/parse"
    if not struct_equiv(again.program, file.program):
        return "program changed across print/parse"
    return None


# -------------------------------------------------------------- minimization


def _candidates(t: Term):
    """Smaller variants of ``t``, each differing in one subterm."""
    match t:
        case Par(a, b):
            yield a
            yield b
        case App(Lam(_, _, then), _) if is_seq(t):
            yield then
        case LetBang(x, _, n, _) if x not in free_vars(n):
            yield n
    if not isinstance(t, Unit):
        yield UNIT
    match t:
        case Lam(x, ty, b):
            for c in _candidates(b):
                yield Lam(x, ty, c)
        case App(f, a):
            for c in _candidates(f):
                yield App(c, a)
            for c in _candidates(a):
                yield App(f, c)
        case Bang(b):
            for c in _candidates(b):
                yield Bang(c)
        case LetBang(x, m, n, ty):
            for c in _candidates(m):
                yield LetBang(x, c, n, ty)
            for c in _candidates(n):
                yield LetBang(x, m, c, ty)
        case Nu(x, r, ty, b):
            yield b
            for c in _candidates(b):
                yield Nu(x, r, ty, c)
        case SetV(a, v) | SetP(a, v) | StoreV(a, v) | StoreP(a, v):
            for c in _candidates(v):
                yield type(t)(a, c)
        case Par(a, b):
            for c in _candidates(a):
                yield Par(c, b)
            for c in _candidates(b):
                yield Par(a, c)


def minimize(file: SourceFile, mode: Mode, fails, budget: int = 300) -> SourceFile:
    """Greedy deletion keeping the file typable in ``mode`` and ``fails(file)`` true."""
    tries = 0
    improved = True
    while improved and tries < budget:
        improved = False
        for cand in _candidates(file.program):
            tries += 1
            if tries > budget:
                break
            f = file.with_program(cand)
            try:
                typecheck(f, mode)
            except (TypingError, MalformedProgram):
                continue
            if _safe(fails, f):
                file, improved = f, True
                break
    return file


def _safe(fails, f) -> bool:
    try:
        return fails(f) is not None
    except Exception:  # a crash also reproduces a failure
        return True


# ---------------------------------------------------------------- the suites


def _suite(name: str, n: int, config: GenConfig, mode: Mode, check) -> PropertyResult:
    result = PropertyResult(name)
    for i in range(n):
        seed = case_seed(config.seed, i)
        f = gen_typed(replace(config, seed=seed, mode=mode))
        result.cases += 1
        fails = lambda g, seed=seed: check(g, seed)
        try:
            why = check(f, seed)
        except (RuntimeShapeError, MalformedProgram, TypingError, ClassificationFailure) as exc:
            why = f"{type(exc).__name__}: {exc}"
        if why is not None:
            small = minimize(f, mode, fails)
            result.failures.append(Failure(seed, print_file(small), why))
    return result


def prop_subject_reduction(n: int = 500, config: GenConfig = GenConfig(), max_steps: int = 50):
    mode = config.mode
    return _suite(
        f"subject-reduction[{mode}]", n, config, mode,
        lambda f, seed: check_subject_reduction(f, mode, seed, max_steps),
    )


def prop_confluence(n: int = 200, config: GenConfig = GenConfig(mode=CONFLUENT), max_states: int = 10_000):
    return _suite("confluence", n, config, CONFLUENT, lambda f, seed: check_confluence(f, max_states))


def prop_termination(n: int = 300, config: GenConfig = GenConfig(mode=STRATIFIED), max_steps: int = 10_000):
    return _suite(
        "termination", n, config, STRATIFIED, lambda f, seed: check_termination(f, seed, max_steps)
    )


def prop_simulation(n: int = 200, config: GenConfig = GenConfig(mode=STRATIFIED), max_steps: int = 10_000):
    return _suite(
        "simulation", n, config, STRATIFIED,
        lambda f, seed: check_simulation_case(f, seed, max_steps),
    )


def prop_progress(n: int = 100, config: GenConfig = GenConfig(mode=STRATIFIED), max_steps: int = 10_000):
    return _suite(
        "progress", n, config, config.mode, lambda f, seed: check_progress(f, seed, max_steps)
    )


def prop_roundtrip(n: int = 200, config: GenConfig = GenConfig()):
    return _suite("roundtrip", n, config, config.mode, lambda f, seed: check_roundtrip(f))


PROPERTIES = {
    "subject-reduction": prop_subject_reduction,
    "confluence": prop_confluence,
    "termination": prop_termination,
    "simulation": prop_simulation,
    "progress": prop_progress,
    "roundtrip": prop_roundtrip,
}
