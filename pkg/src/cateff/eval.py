"""Deterministic small-step evaluation by evaluation-context decomposition.

A closed well-typed computation decomposes uniquely into either a value
form, an unhandled operation under a handler-free context, or a redex under
a stack of lift frames (lets, handles, weakenings).  Handler dispatch picks
the clause for the continuation grade of the operation, obtained by
re-checking the continuation with a fresh variable plugged into the hole;
the typechecker is the single source of truth for grading.

Grade weakenings are transparent lift frames: evaluation proceeds inside
them and they are preserved in the configuration.  They carry no reduction
rule of their own, so a weakened value cannot feed a let or a handler; such
programs are reported as blocked rather than stepped unsoundly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .grading import Morphism
from .signature import GradedSignature
from .terms import (
    App, CompAst, Gunit, Handle, HandlerAst, Inl, Inr, Lam, Let, Match,
    OpCall, Pair, Program, Proj, Val, ValueAst, Var, free_comp_vars,
    substitute,
)
from .typecheck import clause_for, grade_of_computation


class EvalError(Exception):
    pass


class Stuck(EvalError):
    """A closed term no rule applies to (blocked weakening or ill-typed input)."""


class MaxStepsExceeded(EvalError):
    pass


# frames, outermost first when stored in a list
@dataclass(frozen=True)
class LetFrame:
    var: str
    body: CompAst


@dataclass(frozen=True)
class HandleFrame:
    handler: HandlerAst


@dataclass(frozen=True)
class WeakenFrame:
    pre: Morphism
    post: Morphism


@dataclass(frozen=True)
class Terminal:
    value: ValueAst
    obj: str
    weakens: tuple = ()  # residual weaken frames around the value, outermost first


@dataclass(frozen=True)
class OpAtTop:
    frames: tuple  # handler-free context around the call, outermost first
    op: str
    arg: ValueAst
    sig: GradedSignature


@dataclass(frozen=True)
class RedexAt:
    frames: tuple  # lift frames, outermost first
    redex: CompAst
    rule: str
    sig: GradedSignature  # ambient signature of the redex


Decomposition = Terminal | OpAtTop | RedexAt


def rebuild(frames, core: CompAst) -> CompAst:
    for frame in reversed(frames):
        match frame:
            case LetFrame(var, body):
                core = Let(var, core, body)
            case HandleFrame(handler):
                core = Handle(core, handler)
            case WeakenFrame(pre, post):
                core = Gunit(pre, core, post)
    return core


def decompose(m: CompAst, sig: GradedSignature) -> Decomposition:
    """Unique leftmost decomposition of a closed well-typed computation."""
    match m:
        case Val(obj, v):
            return Terminal(v, obj)
        case OpCall(op, arg):
            return OpAtTop((), op, arg, sig)
        case App(_, _) | Proj(_, _, _, _) | Match(_, _, _, _, _):
            return RedexAt((), m, _rule_name(m), sig)
        case Let(var, bound, body):
            frame = LetFrame(var, body)
            inner = decompose(bound, sig)
            match inner:
                case Terminal(_, _, weakens) if not weakens:
                    return RedexAt((), m, "S-Let", sig)
                case Terminal(_, _, _):
                    raise Stuck("weakened value feeding a let has no rule")
                case OpAtTop(frames, op, arg, isig):
                    return OpAtTop((frame,) + frames, op, arg, isig)
                case RedexAt(frames, redex, rule, isig):
                    return RedexAt((frame,) + frames, redex, rule, isig)
        case Gunit(pre, body, post):
            frame = WeakenFrame(pre, post)
            inner = decompose(body, sig)
            match inner:
                case Terminal(value, obj, weakens):
                    return Terminal(value, obj, ((pre, post),) + weakens)
                case OpAtTop(frames, op, arg, isig):
                    return OpAtTop((frame,) + frames, op, arg, isig)
                case RedexAt(frames, redex, rule, isig):
                    return RedexAt((frame,) + frames, redex, rule, isig)
        case Handle(body, handler):
            inner = decompose(body, handler.source)
            match inner:
                case Terminal(_, _, weakens) if not weakens:
                    return RedexAt((), m, "S-HandleRet", sig)
                case Terminal(_, _, _):
                    raise Stuck("weakened value under a handler has no rule")
                case OpAtTop(frames, _, _, _):
                    if any(isinstance(f, WeakenFrame) for f in frames):
                        raise Stuck(
                            "weakening between a handler and the operation "
                            "it handles has no rule")
                    return RedexAt((), m, "S-HandleOp", sig)
                case RedexAt(frames, redex, rule, isig):
                    return RedexAt((HandleFrame(handler),) + frames,
                                   redex, rule, isig)
    raise EvalError(f"not a computation: {m!r}")


def _rule_name(m: CompAst) -> str:
    match m:
        case App(_, _):
            return "S-App"
        case Proj(_, _, _, _):
            return "S-Proj"
        case Match(scrut, _, _, _, _):
            return "S-MatchLeft" if isinstance(scrut, Inl) else "S-MatchRight"
    raise EvalError(f"no rule for {m!r}")


def _pick_fresh(base: str, avoid) -> str:
    """Deterministic fresh name: traces must be reproducible run to run."""
    if base not in avoid:
        return base
    n = 1
    while f"{base}{n}" in avoid:
        n += 1
    return f"{base}{n}"


def _frame_names(frames) -> set:
    avoid = set()
    for frame in frames:
        if isinstance(frame, LetFrame):
            avoid |= free_comp_vars(frame.body) | {frame.var}
    return avoid


def continuation_grade(frames, op: str, sig: GradedSignature) -> Morphism:
    """Grade k of E[val_c y] for a handler-free context E around op, fresh y."""
    decl = sig[op]
    c = decl.grade.cod
    y = _pick_fresh("y", _frame_names(frames))
    cont = rebuild(frames, Val(c, Var(y)))
    _, k = grade_of_computation(((y, decl.arity),), cont, sig)
    return k


def _apply_rule(redex: CompAst, rule: str, sig: GradedSignature) -> CompAst:
    match redex:
        case App(Lam(_, var, _, body), arg):
            return substitute(body, {var: arg})
        case App(_, _):
            raise Stuck("application of a non-lambda value")
        case Let(var, Val(_, v), body):
            return substitute(body, {var: v})
        case Proj(Pair(v1, v2), x, y, body):
            return substitute(body, {x: v1, y: v2})
        case Proj(_, _, _, _):
            raise Stuck("split of a non-pair value")
        case Match(Inl(v, _), x, left, _, _):
            return substitute(left, {x: v})
        case Match(Inr(v, _), _, _, y, right):
            return substitute(right, {y: v})
        case Match(_, _, _, _, _):
            raise Stuck("case on a non-injection value")
        case Handle(body, handler) if rule == "S-HandleRet":
            inner = decompose(body, handler.source)
            return substitute(handler.ret_body, {handler.ret_var: inner.value})
        case Handle(body, handler) if rule == "S-HandleOp":
            inner = decompose(body, handler.source)
            return _handle_op(inner, handler)
    raise EvalError(f"cannot apply {rule} to {redex!r}")


def _handle_op(inner: OpAtTop, handler: HandlerAst) -> CompAst:
    sig = handler.source
    decl = sig[inner.op]
    k = continuation_grade(inner.frames, inner.op, sig)
    clause = clause_for(handler, inner.op, k)
    gk = handler.functor.apply(k)
    c = decl.grade.cod
    avoid = {clause.param_var, clause.resume_var} | free_comp_vars(clause.body)
    avoid |= _frame_names(inner.frames)
    y = _pick_fresh("y", avoid)
    resumed = rebuild(inner.frames, Val(c, Var(y)))
    resume = Lam(gk, y, decl.arity, Handle(resumed, handler))
    return substitute(clause.body,
                      {clause.param_var: inner.arg,
                       clause.resume_var: resume})


def step(m: CompAst, sig: GradedSignature) -> Optional[CompAst]:
    """One small step, or None if the term is terminal or an unhandled op."""
    d = decompose(m, sig)
    match d:
        case Terminal(_, _, _) | OpAtTop(_, _, _, _):
            return None
        case RedexAt(frames, redex, rule, isig):
            return rebuild(frames, _apply_rule(redex, rule, isig))
    raise EvalError("impossible decomposition")


@dataclass
class Trace:
    configs: list
    final: Decomposition
    sig: GradedSignature = field(repr=False)

    @property
    def steps(self) -> int:
        return len(self.configs) - 1

    @property
    def result_value(self) -> Optional[ValueAst]:
        return self.final.value if isinstance(self.final, Terminal) else None


def run(m: CompAst, sig: GradedSignature, max_steps: int = 100_000) -> Trace:
    """Iterate step until a value form or an unhandled operation call."""
    configs = [m]
    for _ in range(max_steps):
        d = decompose(m, sig)
        if not isinstance(d, RedexAt):
            return Trace(configs, d, sig)
        m = rebuild(d.frames, _apply_rule(d.redex, d.rule, d.sig))
        configs.append(m)
    raise MaxStepsExceeded(f"no terminal configuration within {max_steps} steps")


def run_program(prog: Program, max_steps: int = 100_000) -> Trace:
    return run(prog.body, prog.signature, max_steps)
