"""Denotational semantics: types to finite sets or function spaces,
computations to graded term trees, handlers to tree folds.

A computation judged at grade f denotes a term tree of grade f over the
denotation of its result type.  Let is grafting, operation calls become
one-layer nodes over canonical leaves, handlers fold trees leaf- and
node-wise along their grading functor, and grade weakenings wrap the tree in
coercion nodes (pre-coercion at the root, post-coercion at every leaf).
"""
from __future__ import annotations

from dataclasses import dataclass

from .freemodel import Coerce, Leaf, Node, TermTree, coerce, graft, make_node, unit_leaf
from .signature import (
    FunV, GradedSignature, InlV, InrV, PairV, SemValue, STAR, Type,
    enumerate_type, is_primitive,
)
from .terms import (
    App, CompAst, Gunit, Handle, HandlerAst, Inl, Inr, Lam, Let, Match,
    OpCall, Pair, Program, Proj, StarV, Val, ValueAst, Var,
)
from .typecheck import clause_for


class DenoteError(Exception):
    pass


@dataclass(frozen=True)
class FunSpace:
    """Descriptor for a non-enumerable semantic domain."""
    of: Type


def denote_type(t: Type):
    """Finite enumerated set for primitive types, a descriptor otherwise."""
    if is_primitive(t):
        return enumerate_type(t)
    return FunSpace(t)


def _lookup(names: tuple, env: tuple, name: str) -> SemValue:
    for i in range(len(names) - 1, -1, -1):
        if names[i] == name:
            return env[i]
    raise DenoteError(f"unbound variable {name!r} in environment")


def denote_value(names: tuple, v: ValueAst, env: tuple,
                 sig: GradedSignature) -> SemValue:
    match v:
        case StarV():
            return STAR
        case Var(name):
            return _lookup(names, env, name)
        case Pair(left, right):
            return PairV(denote_value(names, left, env, sig),
                         denote_value(names, right, env, sig))
        case Inl(val, _):
            return InlV(denote_value(names, val, env, sig))
        case Inr(val, _):
            return InrV(denote_value(names, val, env, sig))
        case Lam(_, var, _, body):
            return FunV(lambda w: denote_computation(
                names + (var,), body, env + (w,), sig))
    raise DenoteError(f"not a value: {v!r}")


def denote_computation(names: tuple, m: CompAst, env: tuple,
                       sig: GradedSignature) -> TermTree:
    cat = sig.category
    match m:
        case Val(obj, v):
            return unit_leaf(obj, denote_value(names, v, env, sig), cat)
        case OpCall(op, arg):
            decl = sig[op]
            param = denote_value(names, arg, env, sig)
            c = decl.grade.cod
            children = tuple(unit_leaf(c, x, cat)
                             for x in enumerate_type(decl.arity))
            return make_node(op, decl.grade, param, children)
        case Let(var, bound, body):
            bound_tree = denote_computation(names, bound, env, sig)
            return graft(bound_tree,
                         lambda v: denote_computation(
                             names + (var,), body, env + (v,), sig),
                         cat)
        case App(fn, arg):
            fv = denote_value(names, fn, env, sig)
            if not isinstance(fv, FunV):
                raise DenoteError("application of a non-function denotation")
            return fv(denote_value(names, arg, env, sig))
        case Proj(pair, x, y, body):
            pv = denote_value(names, pair, env, sig)
            if not isinstance(pv, PairV):
                raise DenoteError("split of a non-pair denotation")
            return denote_computation(names + (x, y), body,
                                      env + (pv.left, pv.right), sig)
        case Match(scrut, x, left, y, right):
            sv = denote_value(names, scrut, env, sig)
            if isinstance(sv, InlV):
                return denote_computation(names + (x,), left,
                                          env + (sv.val,), sig)
            if isinstance(sv, InrV):
                return denote_computation(names + (y,), right,
                                          env + (sv.val,), sig)
            raise DenoteError("case on a non-sum denotation")
        case Handle(body, handler):
            fold = denote_handler(handler, names, env)
            return fold(denote_computation(names, body, env, handler.source))
        case Gunit(pre, body, post):
            tree = denote_computation(names, body, env, sig)
            lifted = graft(tree,
                           lambda x: coerce(post, unit_leaf(post.cod, x, cat)),
                           cat)
            return coerce(pre, lifted)
    raise DenoteError(f"not a computation: {m!r}")


def denote_handler(h: HandlerAst, names: tuple = (), env: tuple = ()):
    """The fold over handled-theory trees determined by a handler's clauses.

    Leaves go through the return clause; an operation node at continuation
    grade k goes through the clause selected for (op, k), with the folded
    children packaged as the resumption function.  Coercion nodes are
    re-coerced along the grading functor.
    """
    target = h.target
    target_cat = target.category
    arity_index: dict = {}

    def fold(t: TermTree) -> TermTree:
        match t:
            case Leaf(obj, v):
                if obj != h.at_obj:
                    raise DenoteError(
                        f"handler {h.name} folds trees at {h.at_obj}, "
                        f"found a leaf at {obj}")
                return denote_computation(names + (h.ret_var,), h.ret_body,
                                          env + (v,), target)
            case Node(op, _, param, k, children):
                clause = clause_for(h, op, k)
                decl = h.source[op]
                index = arity_index.get(op)
                if index is None:
                    index = {v: i for i, v in enumerate(enumerate_type(decl.arity))}
                    arity_index[op] = index
                rfun = FunV(lambda i, _ch=children: fold(_ch[index[i]]))
                gk = h.functor.apply(k)
                clause_names = names + (clause.param_var, clause.resume_var)
                clause_env = env + (param, rfun)
                return denote_computation(clause_names, clause.body,
                                          clause_env, target)
            case Coerce(r, child):
                gr = h.functor.apply(r)
                if not (gr.is_identity or target_cat.is_wide(gr)):
                    raise DenoteError(
                        f"functor {h.functor.name} sends coercion {r} outside "
                        f"the wide subcategory of {target_cat.name}")
                return coerce(gr, fold(child))
        raise DenoteError(f"not a term tree: {t!r}")

    return fold


def denote_program(prog: Program) -> TermTree:
    return denote_computation((), prog.body, (), prog.signature)
