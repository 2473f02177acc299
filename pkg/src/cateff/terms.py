"""Abstract syntax for values, computations and handlers.

Grade and type annotations are stored fully resolved (morphisms in normal
form), so syntactic equality of terms agrees with equality of judgements.
Handlers are declared at top level and are closed; substitution therefore
descends into handled computations but never into handler clauses.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .grading import GradingCategory, GradingFunctor, Morphism
from .signature import Arrow, GradedSignature, Prod, Sum, Type, Unit


# ---------------------------------------------------------------------------
# values

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class StarV:
    pass


@dataclass(frozen=True)
class Inl:
    val: "ValueAst"
    ann: Type  # the full sum type


@dataclass(frozen=True)
class Inr:
    val: "ValueAst"
    ann: Type


@dataclass(frozen=True)
class Pair:
    left: "ValueAst"
    right: "ValueAst"


@dataclass(frozen=True)
class Lam:
    grade: Morphism
    var: str
    var_type: Type
    body: "CompAst"


ValueAst = Var | StarV | Inl | Inr | Pair | Lam


# ---------------------------------------------------------------------------
# computations

@dataclass(frozen=True)
class Val:
    obj: str
    val: ValueAst


@dataclass(frozen=True)
class Let:
    var: str
    bound: "CompAst"
    body: "CompAst"


@dataclass(frozen=True)
class App:
    fn: ValueAst
    arg: ValueAst


@dataclass(frozen=True)
class OpCall:
    op: str
    arg: ValueAst


@dataclass(frozen=True)
class Proj:
    pair: ValueAst
    left_var: str
    right_var: str
    body: "CompAst"


@dataclass(frozen=True)
class Match:
    scrut: ValueAst
    left_var: str
    left: "CompAst"
    right_var: str
    right: "CompAst"


@dataclass(frozen=True)
class Handle:
    body: "CompAst"
    handler: "HandlerAst"


@dataclass(frozen=True)
class Gunit:
    pre: Morphism
    body: "CompAst"
    post: Morphism


CompAst = Val | Let | App | OpCall | Proj | Match | Handle | Gunit


@dataclass(frozen=True)
class Clause:
    param_var: str
    resume_var: str
    body: CompAst


@dataclass(eq=True)
class HandlerAst:
    name: str
    source: GradedSignature = field(compare=False)
    target: GradedSignature = field(compare=False)
    functor: GradingFunctor = field(compare=False)
    at_obj: str
    in_type: Type
    out_type: Type
    ret_var: str
    ret_body: CompAst
    clauses: dict  # (op name, Morphism k) -> Clause
    defaults: dict  # op name -> Clause

    def __hash__(self):
        return hash(self.name)


@dataclass
class Program:
    name: str
    signature: GradedSignature
    ann_type: Type
    ann_grade: Morphism
    body: CompAst


class TheoryBundle:
    """Everything declared by one ``.ceff`` source file, in declaration order."""

    def __init__(self):
        self.categories: dict[str, GradingCategory] = {}
        self.functors: dict[str, GradingFunctor] = {}
        self.signatures: dict[str, GradedSignature] = {}
        self.handlers: dict[str, HandlerAst] = {}
        self.programs: dict[str, Program] = {}


# ---------------------------------------------------------------------------
# free variables and substitution

def free_value_vars(v: ValueAst) -> set:
    match v:
        case Var(name):
            return {name}
        case StarV():
            return set()
        case Inl(val, _) | Inr(val, _):
            return free_value_vars(val)
        case Pair(left, right):
            return free_value_vars(left) | free_value_vars(right)
        case Lam(_, var, _, body):
            return free_comp_vars(body) - {var}
    raise TypeError(f"not a value: {v!r}")


def free_comp_vars(m: CompAst) -> set:
    match m:
        case Val(_, v):
            return free_value_vars(v)
        case Let(var, bound, body):
            return free_comp_vars(bound) | (free_comp_vars(body) - {var})
        case App(fn, arg):
            return free_value_vars(fn) | free_value_vars(arg)
        case OpCall(_, arg):
            return free_value_vars(arg)
        case Proj(pair, x, y, body):
            return free_value_vars(pair) | (free_comp_vars(body) - {x, y})
        case Match(scrut, x, left, y, right):
            return free_value_vars(scrut) | (free_comp_vars(left) - {x}) \
                | (free_comp_vars(right) - {y})
        case Handle(body, _):
            return free_comp_vars(body)
        case Gunit(_, body, _):
            return free_comp_vars(body)
    raise TypeError(f"not a computation: {m!r}")


_fresh_counter = itertools.count(1)


def fresh_name(base: str, avoid: set) -> str:
    """A name not in ``avoid``, derived from ``base`` via a global counter."""
    while True:
        cand = f"{base}__{next(_fresh_counter)}"
        if cand not in avoid:
            return cand


def _subst_under_binder(var, body, subs, subst_fn):
    subs = {x: v for x, v in subs.items() if x != var}
    if not subs:
        return var, body
    captured = set().union(*(free_value_vars(v) for v in subs.values()))
    if var in captured:
        fresh = fresh_name(var, captured | free_comp_vars(body) | set(subs))
        body = subst_fn(body, {var: Var(fresh)})
        var = fresh
    return var, subst_fn(body, subs)


def substitute_value(v: ValueAst, subs: dict) -> ValueAst:
    if not subs:
        return v
    match v:
        case Var(name):
            return subs.get(name, v)
        case StarV():
            return v
        case Inl(val, ann):
            return Inl(substitute_value(val, subs), ann)
        case Inr(val, ann):
            return Inr(substitute_value(val, subs), ann)
        case Pair(left, right):
            return Pair(substitute_value(left, subs), substitute_value(right, subs))
        case Lam(grade, var, var_type, body):
            var, body = _subst_under_binder(var, body, subs, substitute)
            return Lam(grade, var, var_type, body)
    raise TypeError(f"not a value: {v!r}")


def substitute(m: CompAst, subs: dict) -> CompAst:
    """Simultaneous capture-avoiding substitution of values for variables."""
    if not subs:
        return m
    match m:
        case Val(obj, v):
            return Val(obj, substitute_value(v, subs))
        case Let(var, bound, body):
            bound = substitute(bound, subs)
            var, body = _subst_under_binder(var, body, subs, substitute)
            return Let(var, bound, body)
        case App(fn, arg):
            return App(substitute_value(fn, subs), substitute_value(arg, subs))
        case OpCall(op, arg):
            return OpCall(op, substitute_value(arg, subs))
        case Proj(pair, x, y, body):
            pair = substitute_value(pair, subs)
            inner = {k: v for k, v in subs.items() if k not in (x, y)}
            if inner:
                captured = set().union(*(free_value_vars(v) for v in inner.values()))
                if x in captured or y in captured:
                    avoid = captured | free_comp_vars(body) | set(inner) | {x, y}
                    nx = fresh_name(x, avoid)
                    ny = fresh_name(y, avoid | {nx})
                    body = substitute(body, {x: Var(nx), y: Var(ny)})
                    x, y = nx, ny
                body = substitute(body, inner)
            return Proj(pair, x, y, body)
        case Match(scrut, x, left, y, right):
            scrut = substitute_value(scrut, subs)
            x, left = _subst_under_binder(x, left, subs, substitute)
            y, right = _subst_under_binder(y, right, subs, substitute)
            return Match(scrut, x, left, y, right)
        case Handle(body, handler):
            return Handle(substitute(body, subs), handler)
        case Gunit(pre, body, post):
            return Gunit(pre, substitute(body, subs), post)
    raise TypeError(f"not a computation: {m!r}")


# ---------------------------------------------------------------------------
# pretty-printing (the parser inverts this exactly)

def pp_path(m: Morphism) -> str:
    if m.is_identity:
        return f"id({m.dom})"
    return ".".join(m.path)


def pp_type(t: Type) -> str:
    return str(t)


def _pp_value_atom(v: ValueAst) -> str:
    s = pp_value(v)
    if isinstance(v, (Var, StarV, Pair)):
        return s
    return f"({s})"


def pp_value(v: ValueAst) -> str:
    match v:
        case Var(name):
            return name
        case StarV():
            return "()"
        case Inl(val, ann):
            return f"inl {_pp_value_atom(val)} : {pp_type(ann)}"
        case Inr(val, ann):
            return f"inr {_pp_value_atom(val)} : {pp_type(ann)}"
        case Pair(left, right):
            return f"({pp_value(left)}, {pp_value(right)})"
        case Lam(grade, var, var_type, body):
            return f"fun^{pp_path(grade)} ({var} : {pp_type(var_type)}) => {pp_comp(body)}"
    raise TypeError(f"not a value: {v!r}")


def pp_comp(m: CompAst) -> str:
    match m:
        case Val(obj, v):
            return f"val {obj} {_pp_value_atom(v)}"
        case Let(var, bound, body):
            return f"let {var} <- {pp_comp(bound)} in {pp_comp(body)}"
        case App(fn, arg):
            return f"{_pp_value_atom(fn)} {_pp_value_atom(arg)}"
        case OpCall(op, arg):
            return f"do {op}({pp_value(arg)})"
        case Proj(pair, x, y, body):
            return f"split {_pp_value_atom(pair)} as ({x}, {y}) in {pp_comp(body)}"
        case Match(scrut, x, left, y, right):
            return (f"case {_pp_value_atom(scrut)} of inl {x} => {pp_comp(left)}"
                    f" | inr {y} => {pp_comp(right)}")
        case Handle(body, handler):
            return f"handle ({pp_comp(body)}) with {handler.name}"
        case Gunit(pre, body, post):
            return f"weaken {pp_path(pre)} {{ {pp_comp(body)} }} {pp_path(post)}"
    raise TypeError(f"not a computation: {m!r}")


def pp_handler(h: HandlerAst) -> str:
    lines = [f"handler {h.name} over {h.source.name} to {h.target.name} "
             f"via {h.functor.name} at {h.at_obj} : "
             f"{pp_type(h.in_type)} => {pp_type(h.out_type)} {{"]
    lines.append(f"  return {h.ret_var} => {pp_comp(h.ret_body)};")
    for (op, k), cl in h.clauses.items():
        lines.append(f"  op {op}({cl.param_var}), {cl.resume_var} @ {pp_path(k)} "
                     f"=> {pp_comp(cl.body)};")
    for op, cl in h.defaults.items():
        lines.append(f"  op {op}({cl.param_var}), {cl.resume_var} "
                     f"=> {pp_comp(cl.body)};")
    lines.append("}")
    return "\n".join(lines)


def pp_category(cat: GradingCategory) -> str:
    lines = [f"category {cat.name} {{"]
    lines.append(f"  objects {', '.join(cat.objects)};")
    for gen in cat.generators.values():
        lines.append(f"  gen {gen.name} : {gen.dom} -> {gen.cod};")
    for rule in cat.rules:
        lhs = ".".join(rule.lhs)
        if rule.rhs:
            rhs = ".".join(rule.rhs)
        else:
            dom = cat.generators[rule.lhs[0]].dom
            rhs = f"id({dom})"
        lines.append(f"  rule {lhs} = {rhs};")
    if cat.wide:
        lines.append(f"  wide {', '.join(sorted(cat.wide))};")
    lines.append("}")
    return "\n".join(lines)


def pp_functor(fn: GradingFunctor) -> str:
    lines = [f"functor {fn.name} : {fn.source.name} -> {fn.target.name} {{"]
    for obj in fn.source.objects:
        lines.append(f"  obj {obj} => {fn.object_map[obj]};")
    for gname, img in fn.generator_map.items():
        lines.append(f"  gen {gname} => {pp_path(img)};")
    lines.append("}")
    return "\n".join(lines)


def pp_signature(sig: GradedSignature) -> str:
    lines = [f"signature {sig.name} over {sig.category.name} {{"]
    for op in sig.ops.values():
        lines.append(f"  op {op.name} : {pp_type(op.param)} ~> {pp_type(op.arity)} "
                     f"@ {pp_path(op.grade)};")
    lines.append("}")
    return "\n".join(lines)


def pp_program(p: Program) -> str:
    return (f"program {p.name} over {p.signature.name} : {pp_type(p.ann_type)} "
            f"@ {pp_path(p.ann_grade)} {{\n  {pp_comp(p.body)}\n}}")


def pp_bundle(b: TheoryBundle) -> str:
    parts = []
    parts.extend(pp_category(c) for c in b.categories.values())
    parts.extend(pp_functor(f) for f in b.functors.values())
    parts.extend(pp_signature(s) for s in b.signatures.values())
    parts.extend(pp_handler(h) for h in b.handlers.values())
    parts.extend(pp_program(p) for p in b.programs.values())
    return "\n\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# structural equality across separately parsed bundles

def same_morphism(m1: Morphism, m2: Morphism) -> bool:
    return (m1.cat.name == m2.cat.name and m1.dom == m2.dom
            and m1.cod == m2.cod and m1.path == m2.path)


def same_type(t1: Type, t2: Type) -> bool:
    if type(t1) is not type(t2):
        return False
    match t1:
        case Unit():
            return True
        case Prod(l, r) | Sum(l, r):
            return same_type(l, t2.left) and same_type(r, t2.right)
        case Arrow(a, b, g):
            return (same_type(a, t2.arg) and same_type(b, t2.res)
                    and same_morphism(g, t2.grade))
    return False


def same_value(v1: ValueAst, v2: ValueAst) -> bool:
    if type(v1) is not type(v2):
        return False
    match v1:
        case Var(n):
            return n == v2.name
        case StarV():
            return True
        case Inl(v, a) | Inr(v, a):
            return same_value(v, v2.val) and same_type(a, v2.ann)
        case Pair(l, r):
            return same_value(l, v2.left) and same_value(r, v2.right)
        case Lam(g, x, t, b):
            return (same_morphism(g, v2.grade) and x == v2.var
                    and same_type(t, v2.var_type) and same_comp(b, v2.body))
    return False


def same_comp(m1: CompAst, m2: CompAst) -> bool:
    if type(m1) is not type(m2):
        return False
    match m1:
        case Val(o, v):
            return o == m2.obj and same_value(v, m2.val)
        case Let(x, b, k):
            return x == m2.var and same_comp(b, m2.bound) and same_comp(k, m2.body)
        case App(f, a):
            return same_value(f, m2.fn) and same_value(a, m2.arg)
        case OpCall(op, a):
            return op == m2.op and same_value(a, m2.arg)
        case Proj(p, x, y, b):
            return (same_value(p, m2.pair) and (x, y) == (m2.left_var, m2.right_var)
                    and same_comp(b, m2.body))
        case Match(s, x, l, y, r):
            return (same_value(s, m2.scrut) and (x, y) == (m2.left_var, m2.right_var)
                    and same_comp(l, m2.left) and same_comp(r, m2.right))
        case Handle(b, h):
            return same_handler(h, m2.handler) and same_comp(b, m2.body)
        case Gunit(g, b, h):
            return (same_morphism(g, m2.pre) and same_comp(b, m2.body)
                    and same_morphism(h, m2.post))
    return False


def same_handler(h1: HandlerAst, h2: HandlerAst) -> bool:
    if (h1.name, h1.at_obj, h1.ret_var) != (h2.name, h2.at_obj, h2.ret_var):
        return False
    if not (same_type(h1.in_type, h2.in_type) and same_type(h1.out_type, h2.out_type)):
        return False
    if not same_comp(h1.ret_body, h2.ret_body):
        return False
    def key(item):
        (op, k), _ = item
        return op, k.path, k.dom
    cl1, cl2 = sorted(h1.clauses.items(), key=key), sorted(h2.clauses.items(), key=key)
    if len(cl1) != len(cl2) or sorted(h1.defaults) != sorted(h2.defaults):
        return False
    for ((op1, k1), c1), ((op2, k2), c2) in zip(cl1, cl2):
        if op1 != op2 or not same_morphism(k1, k2):
            return False
        if (c1.param_var, c1.resume_var) != (c2.param_var, c2.resume_var):
            return False
        if not same_comp(c1.body, c2.body):
            return False
    for op in h1.defaults:
        c1, c2 = h1.defaults[op], h2.defaults[op]
        if (c1.param_var, c1.resume_var) != (c2.param_var, c2.resume_var):
            return False
        if not same_comp(c1.body, c2.body):
            return False
    return True
