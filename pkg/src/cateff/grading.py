"""Finitely presented grading categories with decidable morphism equality.

A category is presented by objects, named generators and oriented rewrite
rules between generator paths.  Morphisms are kept in normal form (leftmost
rewriting to a fixpoint), so equality is string equality of paths.  Functors
between presentations and the pair completion construction live here too.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence


class GradingError(Exception):
    """Base class for grading category construction/use errors."""


class EndpointMismatch(GradingError):
    pass


class NotComposable(GradingError):
    pass


class NonTerminatingRules(GradingError):
    pass


class NotLocallyConfluent(GradingError):
    pass


class UnknownGenerator(GradingError):
    pass


class UnknownObject(GradingError):
    pass


@dataclass(frozen=True)
class Generator:
    name: str
    dom: str
    cod: str


@dataclass(frozen=True)
class RewriteRule:
    lhs: tuple[str, ...]  # nonempty generator path
    rhs: tuple[str, ...]  # may be empty (identity), same endpoints as lhs


class GradingCategory:
    """A small category given by a finite presentation.

    Instances are immutable after construction and compare by identity;
    two structurally equal presentations built separately are distinct
    categories (their morphisms do not mix).
    """

    def __init__(self, name, objects, generators, rules=(), wide=(),
                 step_cap=10_000, confluence_len=4):
        self.name = name
        self.objects = tuple(objects)
        self.generators = {}
        for gen in generators:
            if isinstance(gen, tuple):
                gen = Generator(*gen)
            if gen.dom not in self.objects or gen.cod not in self.objects:
                raise UnknownObject(
                    f"generator {gen.name}: endpoint not among objects")
            if gen.name in self.generators:
                raise GradingError(f"duplicate generator {gen.name!r}")
            self.generators[gen.name] = gen
        self.rules = tuple(
            r if isinstance(r, RewriteRule) else RewriteRule(tuple(r[0]), tuple(r[1]))
            for r in rules)
        self.wide = frozenset(wide)
        for w in self.wide:
            if w not in self.generators:
                raise UnknownGenerator(f"wide marking on unknown generator {w!r}")
        self.step_cap = step_cap
        self._norm_cache: dict[tuple[str, ...], tuple[str, ...]] = {}
        self._validate(confluence_len)

    # -- construction-time validation ------------------------------------

    def _validate(self, confluence_len):
        for rule in self.rules:
            if not rule.lhs:
                raise GradingError("rewrite rule with empty left-hand side")
            lhs_ends = self._path_endpoints(rule.lhs)
            if rule.rhs:
                rhs_ends = self._path_endpoints(rule.rhs)
            else:
                # identity rhs: pick up endpoints from the lhs, which must loop
                if lhs_ends[0] != lhs_ends[1]:
                    raise EndpointMismatch(
                        f"rule {'.'.join(rule.lhs)} = id connects distinct objects")
                rhs_ends = lhs_ends
            if lhs_ends != rhs_ends:
                raise EndpointMismatch(
                    f"rule {'.'.join(rule.lhs)} = {'.'.join(rule.rhs)}: "
                    "sides have different endpoints")
        # termination probe on all composable generator pairs and triples
        for path in self._composable_paths(3):
            self.normalize(path)
        # local confluence on composable paths up to the configured length
        for path in self._composable_paths(confluence_len):
            reducts = self._one_step_reducts(path)
            if len(reducts) <= 1:
                continue
            normals = {self.normalize(r) for r in reducts}
            if len(normals) > 1:
                raise NotLocallyConfluent(
                    f"path {'.'.join(path)} rewrites to distinct normal forms "
                    f"{sorted('.'.join(n) or 'id' for n in normals)}")

    def _path_endpoints(self, path):
        prev_cod = None
        for name in path:
            gen = self.generators.get(name)
            if gen is None:
                raise UnknownGenerator(f"unknown generator {name!r}")
            if prev_cod is not None and gen.dom != prev_cod:
                raise NotComposable(
                    f"path {'.'.join(path)}: {name} not composable at {prev_cod}")
            prev_cod = gen.cod
        return self.generators[path[0]].dom, prev_cod

    def _composable_paths(self, max_len):
        by_dom: dict[str, list[Generator]] = {}
        for gen in self.generators.values():
            by_dom.setdefault(gen.dom, []).append(gen)
        frontier = [(g.name,) for g in self.generators.values()]
        for path in frontier:
            yield path
        for _ in range(max_len - 1):
            nxt = []
            for path in frontier:
                cod = self.generators[path[-1]].cod
                for gen in by_dom.get(cod, ()):
                    nxt.append(path + (gen.name,))
            for path in nxt:
                yield path
            frontier = nxt

    def _one_step_reducts(self, path):
        reducts = []
        for pos in range(len(path)):
            for rule in self.rules:
                end = pos + len(rule.lhs)
                if path[pos:end] == rule.lhs:
                    reducts.append(path[:pos] + rule.rhs + path[end:])
        return reducts

    # -- morphisms --------------------------------------------------------

    def normalize(self, path):
        """Leftmost rewriting of a generator path to a fixpoint."""
        path = tuple(path)
        cached = self._norm_cache.get(path)
        if cached is not None:
            return cached
        current = path
        for _ in range(self.step_cap):
            for pos in range(len(current)):
                hit = None
                for rule in self.rules:
                    end = pos + len(rule.lhs)
                    if current[pos:end] == rule.lhs:
                        hit = current[:pos] + rule.rhs + current[end:]
                        break
                if hit is not None:
                    break
            else:
                self._norm_cache[path] = current
                return current
            current = hit
        raise NonTerminatingRules(
            f"rewriting of {'.'.join(path)} exceeded {self.step_cap} steps")

    def identity(self, obj):
        if obj not in self.objects:
            raise UnknownObject(f"no object {obj!r} in category {self.name}")
        return Morphism(self, obj, obj, ())

    def morphism(self, path, dom=None):
        """Build the morphism for a generator path (empty path = identity)."""
        path = tuple(path)
        if not path:
            if dom is None:
                raise GradingError("identity morphism needs an object")
            return self.identity(dom)
        a, b = self._path_endpoints(path)
        if dom is not None and dom != a:
            raise NotComposable(f"path starts at {a}, expected {dom}")
        return Morphism(self, a, b, self.normalize(path))

    def is_wide(self, m):
        """Whether the normal form of ``m`` lies in the wide subcategory R."""
        return all(name in self.wide for name in m.path)

    def morphisms_from(self, obj, max_len):
        """All normal-form morphisms out of ``obj`` with path length <= max_len."""
        found = {(): self.identity(obj)}
        frontier = [()]
        by_dom: dict[str, list[Generator]] = {}
        for gen in self.generators.values():
            by_dom.setdefault(gen.dom, []).append(gen)
        for _ in range(max_len):
            nxt = []
            for path in frontier:
                cod = obj if not path else self.generators[path[-1]].cod
                for gen in by_dom.get(cod, ()):
                    norm = self.normalize(path + (gen.name,))
                    if norm not in found:
                        found[norm] = self.morphism(norm, dom=obj)
                        nxt.append(norm)
            frontier = nxt
        return sorted(found.values(), key=lambda m: (len(m.path), m.path))

    def hom(self, a, b, max_len):
        return [m for m in self.morphisms_from(a, max_len) if m.cod == b]

    def __repr__(self):
        return f"GradingCategory({self.name!r})"


@dataclass(frozen=True)
class Morphism:
    """A morphism in normal form.  Equality is path equality within one category."""
    cat: GradingCategory = field(repr=False)
    dom: str
    cod: str
    path: tuple[str, ...]

    @property
    def is_identity(self):
        return not self.path

    def __str__(self):
        if not self.path:
            return f"id({self.dom})"
        return ";".join(self.path)


def compose(f: Morphism, g: Morphism) -> Morphism:
    """Diagrammatic composition f;g, normalized."""
    if f.cat is not g.cat:
        raise NotComposable("morphisms of different categories")
    if f.cod != g.dom:
        raise NotComposable(f"cod {f.cod} of {f} differs from dom {g.dom} of {g}")
    return Morphism(f.cat, f.dom, g.cod, f.cat.normalize(f.path + g.path))


def compose_all(ms: Sequence[Morphism], cat=None, dom=None) -> Morphism:
    if not ms:
        if cat is None or dom is None:
            raise GradingError("empty composite needs a category and object")
        return cat.identity(dom)
    out = ms[0]
    for m in ms[1:]:
        out = compose(out, m)
    return out


class GradingFunctor:
    """A functor between finitely presented categories, given on generators."""

    def __init__(self, name, source: GradingCategory, target: GradingCategory,
                 object_map: dict, generator_map: dict):
        self.name = name
        self.source = source
        self.target = target
        self.object_map = dict(object_map)
        self.generator_map = {}
        for obj in source.objects:
            if obj not in self.object_map:
                raise UnknownObject(f"functor {name}: no image for object {obj}")
            if self.object_map[obj] not in target.objects:
                raise UnknownObject(
                    f"functor {name}: image {self.object_map[obj]} not in target")
        for gname, gen in source.generators.items():
            img = generator_map.get(gname)
            if img is None:
                raise UnknownGenerator(f"functor {name}: no image for generator {gname}")
            if not isinstance(img, Morphism) or img.cat is not target:
                raise GradingError(f"functor {name}: image of {gname} not a target morphism")
            if (img.dom, img.cod) != (self.object_map[gen.dom], self.object_map[gen.cod]):
                raise EndpointMismatch(
                    f"functor {name}: image of {gname} has wrong endpoints")
            self.generator_map[gname] = img
        self._check_rules()
        self._cache: dict[tuple[str, tuple[str, ...]], Morphism] = {}

    def _check_rules(self):
        for rule in self.source.rules:
            dom = self.source.generators[rule.lhs[0]].dom
            lhs = self._image_path(rule.lhs, self.object_map[dom])
            rhs = self._image_path(rule.rhs, self.object_map[dom])
            if lhs != rhs:
                raise GradingError(
                    f"functor {self.name} breaks rule "
                    f"{'.'.join(rule.lhs)} = {'.'.join(rule.rhs) or 'id'}")

    def _image_path(self, path, dom_img):
        out: tuple[str, ...] = ()
        for name in path:
            out = out + self.generator_map[name].path
        return self.target.normalize(out)

    def apply(self, m: Morphism) -> Morphism:
        if m.cat is not self.source:
            raise UnknownGenerator(f"functor {self.name}: morphism not in source")
        key = (m.dom, m.path)
        hit = self._cache.get(key)
        if hit is None:
            path = self._image_path(m.path, self.object_map[m.dom])
            hit = Morphism(self.target, self.object_map[m.dom],
                           self.object_map[m.cod], path)
            self._cache[key] = hit
        return hit

    def __repr__(self):
        return f"GradingFunctor({self.name!r})"


def build_category(name, objects, generators, rules=(), wide=(),
                   step_cap=10_000, confluence_len=4) -> GradingCategory:
    return GradingCategory(name, objects, generators, rules, wide,
                           step_cap, confluence_len)


def pair_name(a, b):
    return f"<{a},{b}>"


def pair_completion(cat: GradingCategory, name=None) -> GradingCategory:
    """Freely adjoin one absorbing morphism <a,b> per ordered object pair.

    The added generators absorb composition on either side: composing any
    morphism into or out of an <a,b> generator collapses to the <.,.>
    generator with the outer endpoints.  Existing generators, rules and wide
    markings are kept unchanged.
    """
    gens = list(cat.generators.values())
    rules = list(cat.rules)
    for a, b in product(cat.objects, repeat=2):
        gens.append(Generator(pair_name(a, b), a, b))
    for a, b, c in product(cat.objects, repeat=3):
        rules.append(RewriteRule((pair_name(a, b), pair_name(b, c)),
                                 (pair_name(a, c),)))
    for gen in cat.generators.values():
        for x in cat.objects:
            # <x,dom g> ; g  =  <x,cod g>
            rules.append(RewriteRule((pair_name(x, gen.dom), gen.name),
                                     (pair_name(x, gen.cod),)))
            # g ; <cod g,x>  =  <dom g,x>
            rules.append(RewriteRule((gen.name, pair_name(gen.cod, x)),
                                     (pair_name(gen.dom, x),)))
    return GradingCategory(name or f"{cat.name}^pair", cat.objects, gens,
                           rules, cat.wide, cat.step_cap)
