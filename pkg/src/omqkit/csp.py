"""CSP templates with constants.

Covers homomorphism search, generalized coCSP evaluation, translations
between AQ/BAQ OMQs and template families, containment, constant
collapse and FO-definability via dismantling of the square of the core.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

from . import dl
from .core import (Atom, Instance, ParseError, RelStructure, Schema, SizeBoundError,
                   UnsupportedError, ValidationError, iter_lines, Lexer, parse_atom_args,
                   parse_schema_line)
from .dl import (AQ, BAQ, ConQ, Exists, Name, Not, OmqQuery, Ontology, TOP, BOT,
                 UNIV, conj, disj)

DEFAULT_MAX_PRODUCT = 250_000


@dataclass(frozen=True)
class Template:
    structure: RelStructure
    constants: tuple = ()

    def __post_init__(self):
        consts = tuple((str(n), e) for n, e in self.constants)
        object.__setattr__(self, "constants", consts)
        names = [n for n, _ in consts]
        if len(set(names)) != len(names):
            raise ValidationError("constant names must be unique")
        for n, e in consts:
            if e not in self.structure.domain:
                raise ValidationError(f"constant {n} bound to unknown element {e}")

    @property
    def const_names(self) -> tuple:
        return tuple(n for n, _ in self.constants)

    @property
    def points(self) -> tuple:
        return tuple(e for _, e in self.constants)

    @property
    def schema(self) -> Schema:
        return self.structure.schema


@dataclass(frozen=True)
class TemplateFamily:
    templates: tuple = ()
    schema: Schema = None
    const_names: tuple = None

    def __post_init__(self):
        ts = tuple(self.templates)
        object.__setattr__(self, "templates", ts)
        names = self.const_names
        if names is None:
            names = ts[0].const_names if ts else ()
        object.__setattr__(self, "const_names", tuple(names))
        schema = self.schema if self.schema is not None else Schema()
        for t in ts:
            if t.const_names != self.const_names:
                raise ValidationError("templates of a family must share their constant names")
            schema = schema.union(t.schema)
        object.__setattr__(self, "schema", schema)

    def __len__(self):
        return len(self.templates)

    def __iter__(self):
        return iter(self.templates)


def pointed(data: Instance, points=(), names=None) -> Template:
    """View an instance with distinguished elements as a template."""
    names = names or tuple(f"c{i + 1}" for i in range(len(points)))
    return Template(RelStructure(data.adom | frozenset(points), data.facts, data.schema),
                    tuple(zip(names, points)))


# --------------------------------------------------------------------------
# text format


def parse_template(text: str):
    """Returns a Template for a single block and a TemplateFamily otherwise
    (use :func:`parse_family` to always get a family)."""
    fam = parse_family(text)
    if len(fam) == 1:
        return fam.templates[0]
    return fam


def parse_family(text: str) -> TemplateFamily:
    schema = None
    blocks = [[]]
    for no, line in iter_lines(text):
        if line == "---":
            blocks.append([])
        elif line.startswith("schema ") and schema is None and not any(blocks):
            schema = parse_schema_line(line, no)
        else:
            blocks[-1].append((no, line))
    templates = []
    for block in blocks:
        if not block:
            continue
        dom, consts, facts = [], [], []
        for no, line in block:
            key, _, rest = line.partition(" ")
            if key == "domain":
                dom += rest.split()
            elif key == "const":
                lx = Lexer(rest, line_offset=no - 1)
                name = lx.name()
                lx.expect("=")
                consts.append((name, lx.name(), no))
            elif key == "fact":
                lx = Lexer(rest, line_offset=no - 1)
                while not lx.at_end():
                    pred = lx.name()
                    facts.append(Atom(pred, parse_atom_args(lx)))
                    if lx.at(".") or lx.at(","):
                        lx.next()
            else:
                raise ParseError(f"unknown template directive {key!r}", no, 1)
        domain = set(dom) | {v for f in facts for v in f.args}
        for name, e, no in consts:
            if e not in domain:
                raise ParseError(f"constant {name} bound to unknown element {e}", no)
        if not domain:
            raise ParseError("template with an empty domain", block[0][0])
        try:
            st = RelStructure(frozenset(domain), frozenset(facts), schema)
            templates.append(Template(st, tuple((n, e) for n, e, _ in consts)))
        except ValidationError as exc:
            raise ParseError(str(exc), block[0][0]) from None
    try:
        return TemplateFamily(tuple(templates), schema)
    except ValidationError as exc:
        raise ParseError(str(exc)) from None


def format_template(t: Template) -> str:
    lines = ["domain " + " ".join(sorted(map(str, t.structure.domain)))]
    lines += [f"const {n} = {e}" for n, e in t.constants]
    lines += [f"fact {f}" for f in sorted(t.structure.facts)]
    return "\n".join(lines) + "\n"


def format_family(family: TemplateFamily, header: str | None = None) -> str:
    out = f"# {header}\n" if header else ""
    if len(family.schema):
        out += str(family.schema) + "\n"
    out += "---\n".join(format_template(t) for t in family.templates)
    return out


# --------------------------------------------------------------------------
# homomorphism search


class _Target:
    def __init__(self, st: RelStructure):
        self.domain = frozenset(st.domain)
        self.unary, self.succ, self.pred, self.tuples = {}, {}, {}, {}
        for f in st.facts:
            k = len(f.args)
            self.tuples.setdefault(f.pred, set()).add(f.args)
            if k == 1:
                self.unary.setdefault(f.pred, set()).add(f.args[0])
            elif k == 2:
                a, b = f.args
                self.succ.setdefault(f.pred, {}).setdefault(a, set()).add(b)
                self.pred.setdefault(f.pred, {}).setdefault(b, set()).add(a)
        self.loops = {r: {a for a, bs in m.items() if a in bs} for r, m in self.succ.items()}


@lru_cache(maxsize=256)
def _target(st: RelStructure) -> _Target:
    return _Target(st)


_EMPTY = frozenset()


class _Problem:
    """Constraint network for homomorphisms from a fixed source."""

    def __init__(self, elements, facts, tgt: _Target):
        self.vars = sorted(elements, key=str)
        self.tgt = tgt
        self.ok = True
        self.dom = {v: set(tgt.domain) for v in self.vars}
        self.cons = []  # (kind, args, relation)
        for f in facts:
            k = len(f.args)
            if k == 0:
                if () not in tgt.tuples.get(f.pred, ()):
                    self.ok = False
            elif k == 1:
                self.dom[f.args[0]] &= tgt.unary.get(f.pred, _EMPTY)
            elif k == 2 and f.args[0] == f.args[1]:
                self.dom[f.args[0]] &= tgt.loops.get(f.pred, _EMPTY)
            elif k == 2:
                self.cons.append(("bin", f.args, f.pred))
            else:
                self.cons.append(("gen", f.args, tgt.tuples.get(f.pred, set())))
        self.watch = {v: [] for v in self.vars}
        for i, (_, args, _) in enumerate(self.cons):
            for v in set(args):
                self.watch[v].append(i)

    def add_tuple_constraint(self, args, allowed) -> None:
        i = len(self.cons)
        self.cons.append(("gen", tuple(args), allowed))
        for v in set(args):
            self.watch[v].append(i)

    def revise(self, i, dom) -> list | None:
        """Prune with constraint i; return changed vars, or None on wipe-out."""
        kind, args, rel = self.cons[i]
        changed = []
        if kind == "bin":
            u, w = args
            succ = self.tgt.succ.get(rel, {})
            pred = self.tgt.pred.get(rel, {})
            du, dw = dom[u], dom[w]
            nu = {a for a in du if not succ.get(a, _EMPTY).isdisjoint(dw)}
            if len(nu) != len(du):
                dom[u] = nu
                changed.append(u)
                if not nu:
                    return None
            nw = {b for b in dw if not pred.get(b, _EMPTY).isdisjoint(dom[u])}
            if len(nw) != len(dw):
                dom[w] = nw
                changed.append(w)
                if not nw:
                    return None
            return changed
        support = [set() for _ in args]
        for t in rel:
            if len(t) != len(args):
                continue
            seen = {}
            good = True
            for a, v in zip(t, args):
                if a not in dom[v] or seen.setdefault(v, a) != a:
                    good = False
                    break
            if good:
                for j, a in enumerate(t):
                    support[j].add(a)
        new = {}
        for v, s in zip(args, support):
            new[v] = new[v] & s if v in new else s
        for v, s in new.items():
            if len(s) != len(dom[v]):
                dom[v] = s
                changed.append(v)
                if not s:
                    return None
        return changed

    def propagate(self, dom, start_vars=None) -> bool:
        if start_vars is None:
            queue = list(range(len(self.cons)))
        else:
            queue = [i for v in start_vars for i in self.watch[v]]
        queued = set(queue)
        while queue:
            i = queue.pop()
            queued.discard(i)
            changed = self.revise(i, dom)
            if changed is None:
                return False
            for v in changed:
                for j in self.watch[v]:
                    if j not in queued:
                        queued.add(j)
                        queue.append(j)
        return True

    def solve(self, dom=None):
        if not self.ok:
            return None
        dom = {v: set(s) for v, s in (dom or self.dom).items()}
        if any(not s for s in dom.values()) or not self.propagate(dom):
            return None
        return self._search(dom)

    def _search(self, dom):
        open_vars = [v for v in self.vars if len(dom[v]) > 1]
        if not open_vars:
            return {v: next(iter(dom[v])) for v in self.vars}
        var = min(open_vars, key=lambda v: len(dom[v]))
        for a in sorted(dom[var], key=str):
            new = {v: (s if v != var else {a}) for v, s in dom.items()}
            new = {v: set(s) for v, s in new.items()}
            if self.propagate(new, [var]):
                got = self._search(new)
                if got is not None:
                    return got
        return None


def find_hom(src, tgt: Template):
    """A constant-respecting homomorphism ``src -> tgt`` as a dict, or None.

    ``src`` may be a Template or a pair ``(Instance, points)``.
    """
    if isinstance(src, tuple):
        src = pointed(src[0], src[1], tgt.const_names)
    if src.const_names != tgt.const_names:
        raise ValidationError("source and target have different constants")
    prob = _Problem(src.structure.domain, src.structure.facts, _target(tgt.structure))
    for (_, s), (_, t) in zip(src.constants, tgt.constants):
        prob.dom[s] &= {t}
    return prob.solve()


def _all_maps_hom(src: Template, tgt: Template):
    """Exhaustive reference search (tests only)."""
    els = sorted(src.structure.domain, key=str)
    tdom = sorted(tgt.structure.domain, key=str)
    for vals in product(tdom, repeat=len(els)):
        h = dict(zip(els, vals))
        if any(h[s] != t for (_, s), (_, t) in zip(src.constants, tgt.constants)):
            continue
        if all(Atom(f.pred, tuple(h[a] for a in f.args)) in tgt.structure.facts
               for f in src.structure.facts):
            return h
    return None


# --------------------------------------------------------------------------
# evaluation


def _groups(family: TemplateFamily) -> dict:
    groups = {}
    for t in family.templates:
        groups.setdefault(t.structure, set()).add(t.points)
    return groups


def eval_cocsp(family: TemplateFamily, data: Instance) -> list:
    """Tuples over adom(data) admitting no pointed homomorphism into any template."""
    adom = sorted(data.adom)
    if not adom:
        return []
    k = len(family.const_names)
    candidates = set(product(adom, repeat=k))
    for st, points in _groups(family).items():
        if not candidates:
            break
        prob = _Problem(data.adom, data.facts, _target(st))
        dom = {v: set(s) for v, s in prob.dom.items()}
        if not prob.ok or any(not s for s in dom.values()) or not prob.propagate(dom):
            continue
        if k == 0:
            if prob._search(dom) is not None:
                candidates.clear()
            continue
        for tup in sorted(candidates):
            if any(dom[d].isdisjoint({p[i] for p in points}) for i, d in enumerate(tup)):
                continue
            sub = _Problem(data.adom, data.facts, _target(st))
            sub.add_tuple_constraint(tup, points)
            if sub.solve(dom) is not None:
                candidates.discard(tup)
    return sorted(candidates)


# --------------------------------------------------------------------------
# OMQ -> templates


def canonical_structure(closure: tuple, types, schema: Schema, names: dict) -> RelStructure:
    cl = dl._Closure(closure, ())
    facts = set()
    for t in types:
        for label in schema.unary():
            i = cl.index.get(Name(label))
            if i is not None and t >> i & 1:
                facts.add(Atom(label, (names[t],)))
    for role in schema.binary():
        reqs = {t: cl.required(t, role) for t in types}
        for t1 in types:
            for t2 in types:
                if t1 & reqs[t2] == reqs[t2]:
                    facts.add(Atom(role, (names[t1], names[t2])))
    return RelStructure(frozenset(names[t] for t in types), frozenset(facts), schema)


def aq_omq_to_templates(omq: OmqQuery) -> TemplateFamily:
    if isinstance(omq.query, ConQ):
        omq = dl.conq_to_aq(omq)
    if not isinstance(omq.query, (AQ, BAQ)):
        raise UnsupportedError("only AQ, BAQ and ConQ queries have template families")
    boolean = isinstance(omq.query, BAQ)
    goal_name = omq.query.name
    sets = dl.countermodel_type_sets(omq.ontology, goal_name, boolean=boolean,
                                     extra=[Name(n) for n in omq.schema.unary()])
    every = sorted(set().union(*[s.types for s in sets])) if sets else []
    names = {t: f"t{i}" for i, t in enumerate(every)}
    const = () if boolean else ("c1",)
    templates = []
    for ts in sets:
        st = canonical_structure(ts.closure, ts.sorted(), omq.schema, names)
        if boolean:
            templates.append(Template(st))
        else:
            for t in ts.sorted():
                if not ts.has(t, Name(goal_name)):
                    templates.append(Template(st, (("c1", names[t]),)))
    return TemplateFamily(tuple(templates), omq.schema, const)


# --------------------------------------------------------------------------
# templates -> OMQ


def _template_axioms(t: Template, idx: int, schema: Schema, goal_name: str, taken: set, boolean: bool):
    """Axioms pinning every element to exactly one element of ``t``."""
    names = {}
    for d in sorted(t.structure.domain, key=str):
        names[d] = dl.fresh_name(f"A_{idx}_{d}", taken)
        taken.add(names[d])
    bad = Name(goal_name) if boolean else BOT
    els = sorted(names, key=str)
    axioms = []
    for i, d in enumerate(els):
        for d2 in els[i + 1:]:
            if boolean:
                axioms.append((dl.And(Name(names[d]), Name(names[d2])), bad))
            else:
                axioms.append((Name(names[d]), Not(Name(names[d2]))))
    facts = t.structure.facts
    for role in schema.binary():
        for d in els:
            for d2 in els:
                if Atom(role, (d, d2)) not in facts:
                    axioms.append((dl.And(Name(names[d]), Exists(role, Name(names[d2]))), bad))
    for label in schema.unary():
        for d in els:
            if Atom(label, (d,)) not in facts:
                axioms.append((dl.And(Name(names[d]), Name(label)), bad))
    axioms.append((TOP, disj([Name(names[d]) for d in els])))
    if t.constants:
        axioms.append((Not(Name(names[t.points[0]])), Name(goal_name)))
    return axioms


def _as_concept(axioms) -> dl.Concept:
    parts = []
    for lhs, rhs in axioms:
        if lhs == TOP:
            parts.append(rhs)
        elif rhs == BOT:
            parts.append(Not(lhs))
        else:
            parts.append(dl.Or(Not(lhs), rhs))
    return conj(parts)


def templates_to_omq(family: TemplateFamily) -> OmqQuery:
    if len(family.const_names) > 1:
        raise UnsupportedError("templates_to_omq handles at most one constant")
    for n, a in family.schema:
        if a not in (1, 2):
            raise ValidationError(f"schema must be binary, {n} has arity {a}")
    boolean = not family.const_names
    taken = set(family.schema.names) | dl.KEYWORDS
    goal_name = dl.fresh_name("A", taken)
    taken.add(goal_name)
    query = BAQ(goal_name) if boolean else AQ(goal_name)
    ts = list(family.templates)
    if not ts:
        return OmqQuery(family.schema, Ontology(((TOP, Name(goal_name)),)), query)
    if len(ts) == 1:
        axioms = _template_axioms(ts[0], 0, family.schema, goal_name, taken, boolean)
        return OmqQuery(family.schema, Ontology(tuple(axioms)), query)
    disjuncts = []
    for i, t in enumerate(ts):
        axioms = _template_axioms(t, i, family.schema, goal_name, taken, boolean=False)
        disjuncts.append(dl.Forall(UNIV, _as_concept(axioms)))
    return OmqQuery(family.schema, Ontology(((TOP, disj(disjuncts)),)), query)


# --------------------------------------------------------------------------
# reductions and decisions


def is_void(t: Template) -> bool:
    """True if no pointed instance maps into ``t``: a constant sits on an
    element outside every fact, or there are neither constants nor facts."""
    used = {e for f in t.structure.facts for e in f.args}
    if not t.constants:
        return not t.structure.facts
    return any(e not in used for e in t.points)


def as_instance(t: Template) -> Template:
    """Drop elements that occur in no fact (constants are kept)."""
    used = {e for f in t.structure.facts for e in f.args} | set(t.points)
    return Template(RelStructure(frozenset(used), t.structure.facts, t.structure.schema), t.constants)


def incomparable_reduce(family: TemplateFamily) -> TemplateFamily:
    ts = list(family.templates)
    alive = list(range(len(ts)))
    for i in range(len(ts)):
        if any(j != i and find_hom(ts[i], ts[j]) is not None for j in alive):
            alive.remove(i)
    return TemplateFamily(tuple(ts[i] for i in alive), family.schema, family.const_names)


def collapse_constants(t: Template, names=None) -> RelStructure:
    """Replace each constant by a fresh unary relation holding just its element."""
    names = names or collapse_names(t.structure.schema, len(t.constants))
    facts = set(t.structure.facts)
    extra = []
    for name, (_, e) in zip(names, t.constants):
        facts.add(Atom(name, (e,)))
        extra.append((name, 1))
    schema = t.structure.schema.union(Schema(tuple(extra)))
    return RelStructure(t.structure.domain, frozenset(facts), schema)


def collapse_names(schema: Schema, n: int) -> list:
    taken = set(schema.names)
    out = []
    for i in range(n):
        name = dl.fresh_name(f"P_{i + 1}", taken)
        taken.add(name)
        out.append(name)
    return out


def annotate(data: Instance, points, names) -> Instance:
    extra = frozenset(Atom(n, (d,)) for n, d in zip(names, points))
    return Instance(data.facts | extra, data.schema.union(Schema(tuple((n, 1) for n in names))))


def contains(left: TemplateFamily, right: TemplateFamily):
    """Is coCSP(F1) contained in coCSP(F2)?  Returns (bool, witness).

    The witness is a pointed instance ``(Instance, points)`` answered by
    the first query but not by the second.
    """
    if left.const_names != right.const_names and len(left.const_names) != len(right.const_names):
        raise ValidationError("families have different numbers of constants")
    targets = [t for t in left.templates if not is_void(t)]
    for t2 in right.templates:
        if is_void(t2):
            continue
        src = as_instance(t2)
        src = Template(src.structure, tuple(zip(left.const_names, src.points)))
        if not any(find_hom(src, Template(t1.structure, tuple(zip(left.const_names, t1.points))))
                   is not None for t1 in targets):
            return False, (src.structure.instance(), src.points)
    return True, None


def _restrict(st: RelStructure, keep) -> RelStructure:
    keep = frozenset(keep)
    facts = frozenset(f for f in st.facts if all(a in keep for a in f.args))
    return RelStructure(keep, facts, st.schema)


def _fold(st: RelStructure) -> RelStructure:
    """Repeatedly delete an element x that can be sent to another element
    while every other element stays put."""
    dom = set(st.domain)
    tuples = {}
    by_el = {}
    for f in st.facts:
        tuples.setdefault(f.pred, set()).add(f.args)
        for a in set(f.args):
            by_el.setdefault(a, set()).add(f)
    changed = True
    while changed and len(dom) > 1:
        changed = False
        for x in sorted(dom, key=str):
            fx = by_el.get(x, set())
            for y in sorted(dom, key=str):
                if y != x and all(tuple(y if a == x else a for a in f.args) in tuples[f.pred]
                                  for f in fx):
                    for f in fx:
                        tuples[f.pred].discard(f.args)
                        for a in set(f.args):
                            if a != x:
                                by_el[a].discard(f)
                    by_el.pop(x, None)
                    dom.discard(x)
                    changed = True
                    break
    facts = frozenset(Atom(p, args) for p, ts in tuples.items() for args in ts)
    return RelStructure(frozenset(dom), facts, st.schema)


def core(st: RelStructure) -> RelStructure:
    """The core, by repeated retraction onto one-element-smaller substructures.

    Cheap foldings (one element mapped onto another, rest fixed) go first;
    a full homomorphism search certifies that nothing more retracts.
    """
    cur = _fold(st)
    progress = True
    while progress and len(cur.domain) > 1:
        progress = False
        for x in sorted(cur.domain, key=str):
            sub = _restrict(cur, cur.domain - {x})
            h = find_hom(Template(cur), Template(sub))
            if h is not None:
                cur = _fold(_restrict(cur, set(h.values())))
                progress = True
                break
    return cur


def square(st: RelStructure, max_product: int = DEFAULT_MAX_PRODUCT) -> RelStructure:
    n = len(st.domain)
    if n * n > max_product:
        raise SizeBoundError(f"square of a {n}-element structure exceeds {max_product}")
    byrel = {}
    for f in st.facts:
        byrel.setdefault(f.pred, []).append(f.args)
    facts = set()
    for r, tups in byrel.items():
        if len(tups) ** 2 > max_product * 10:
            raise SizeBoundError(f"square of relation {r} is too large")
        for s in tups:
            for t in tups:
                facts.add(Atom(r, tuple(zip(s, t))))
    dom = frozenset((a, b) for a in st.domain for b in st.domain)
    return RelStructure(dom, frozenset(facts), st.schema)


def dominated(x, y, facts_of_x, tuples) -> bool:
    """Every fact through x stays a fact when any non-empty set of x's
    positions is switched to y."""
    for f in facts_of_x:
        pos = [i for i, a in enumerate(f.args) if a == x]
        rel = tuples.get(f.pred, ())
        for mask in range(1, 2 ** len(pos)):
            args = list(f.args)
            for j, i in enumerate(pos):
                if mask >> j & 1:
                    args[i] = y
            if tuple(args) not in rel:
                return False
    return True


def dismantle(st: RelStructure, keep) -> RelStructure:
    """Greedily delete dominated elements outside ``keep``."""
    keep = set(keep)
    dom = set(st.domain)
    facts = set(st.facts)
    while True:
        tuples = {}
        by_el = {}
        for f in facts:
            tuples.setdefault(f.pred, set()).add(f.args)
            for a in set(f.args):
                by_el.setdefault(a, []).append(f)
        removed = None
        for x in sorted(dom - keep, key=str):
            fx = by_el.get(x, [])
            for y in sorted(dom, key=str):
                if y != x and dominated(x, y, fx, tuples):
                    removed = x
                    break
            if removed is not None:
                break
        if removed is None:
            return RelStructure(frozenset(dom), frozenset(facts), st.schema)
        dom.discard(removed)
        facts = {f for f in facts if removed not in f.args}


def fo_definable_core(st: RelStructure, max_product: int = DEFAULT_MAX_PRODUCT) -> bool:
    c = core(st)
    sq = square(c, max_product)
    diagonal = {(a, a) for a in c.domain}
    rest = dismantle(sq, diagonal)
    return set(rest.domain) == diagonal


def fo_definable(family: TemplateFamily, max_product: int = DEFAULT_MAX_PRODUCT) -> bool:
    """FO-definability of the query a family defines.

    Templates are collapsed and reduced to their cores before the
    incomparability reduction; homomorphisms between pointed templates
    correspond exactly to homomorphisms between these cores.
    """
    live = [t for t in family.templates if not is_void(t)]
    if not live:
        return True
    names = collapse_names(family.schema, len(family.const_names))
    cores = []
    seen = set()
    for t in live:
        c = core(collapse_constants(t, names))
        if c not in seen:
            seen.add(c)
            cores.append(Template(c))
    reduced = incomparable_reduce(TemplateFamily(tuple(cores)))
    return all(fo_definable_core(t.structure, max_product) for t in reduced.templates)
