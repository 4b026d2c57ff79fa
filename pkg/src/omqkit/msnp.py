"""MMSNP, GMSNP and MMSNP2 formulas and forbidden-patterns problems.

A formula is an existential second-order prefix over a matrix of
implications.  Second-order atoms are plain :class:`Atom` values whose
predicate is a declared SO variable; MMSNP2 additionally has
:class:`FactAtom` ``X(R(x,y))`` ranging over the facts of the instance.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import NamedTuple

from . import _sat
from .core import (Atom, CQ, Eq, Instance, Lexer, ParseError, RelStructure,
                   Schema, SizeBoundError, ValidationError, cq_matches, iter_lines,
                   parse_atom_args, parse_schema_line)

DIALECTS = ("mmsnp", "gmsnp", "mmsnp2")
FACTSET = "factset"
DEFAULT_MAX_MODELS = 2 ** 22


class FactAtom(NamedTuple):
    var: str
    rel: str
    args: tuple

    def __str__(self):
        return f"{self.var}({self.rel}({','.join(self.args)}))"


class Implication(NamedTuple):
    body: tuple
    head: tuple

    def variables(self) -> list:
        out = []
        for a in self.body + self.head:
            for v in _vars(a):
                if v not in out:
                    out.append(v)
        return out

    def __str__(self):
        body = ", ".join(str(a) for a in self.body)
        head = " ; ".join(str(a) for a in self.head) if self.head else "false"
        return f"imp {body} -> {head}".replace("imp  ->", "imp ->")


def _vars(a) -> tuple:
    if isinstance(a, Eq):
        return (a.left, a.right)
    return a.args


@dataclass(frozen=True)
class MsnpFormula:
    dialect: str
    schema: Schema
    sovars: tuple
    freevars: tuple = ()
    matrix: tuple = ()

    def __post_init__(self):
        if self.dialect not in DIALECTS:
            raise ValidationError(f"unknown dialect {self.dialect}")
        sov = tuple((n, k) for n, k in self.sovars)
        object.__setattr__(self, "sovars", sov)
        object.__setattr__(self, "freevars", tuple(self.freevars))
        object.__setattr__(self, "matrix", tuple(Implication(tuple(i.body), tuple(i.head))
                                                 for i in self.matrix))
        kinds = dict(sov)
        if len(kinds) != len(sov):
            raise ValidationError("duplicate SO variable")
        for n, k in sov:
            if n in self.schema:
                raise ValidationError(f"SO variable {n} clashes with an input relation")
            if self.dialect == "mmsnp" and k != 1:
                raise ValidationError(f"MMSNP SO variable {n} must be monadic")
            if self.dialect == "gmsnp" and not isinstance(k, int):
                raise ValidationError(f"GMSNP SO variable {n} needs an arity")
            if self.dialect == "mmsnp2" and k != FACTSET:
                raise ValidationError(f"MMSNP2 SO variable {n} must be a factset")
        for imp in self.matrix:
            for a in imp.body + imp.head:
                self._check_atom(a, kinds, in_head=a in imp.head)
            if self.dialect == "gmsnp" and not _guarded(imp):
                raise ValidationError(f"head atom not covered by a body atom: {imp}")
            if self.dialect == "mmsnp2":
                for h in imp.head:
                    if isinstance(h, FactAtom) and Atom(h.rel, h.args) not in imp.body:
                        raise ValidationError(f"{h} needs {h.rel}({','.join(h.args)}) in the body")
        object.__setattr__(self, "_kinds", kinds)

    def _check_atom(self, a, kinds, in_head):
        if isinstance(a, Eq):
            if in_head:
                raise ValidationError("equality is only allowed in bodies")
            return
        if isinstance(a, FactAtom):
            if self.dialect != "mmsnp2":
                raise ValidationError(f"fact atom {a} outside MMSNP2")
            if a.var not in kinds:
                raise ValidationError(f"undeclared SO variable {a.var}")
            if self.schema.arity(a.rel) != len(a.args):
                raise ValidationError(f"fact atom {a} does not match the schema")
            return
        if a.pred in kinds:
            k = kinds[a.pred]
            want = 1 if k == FACTSET else k
            if len(a.args) != want:
                raise ValidationError(f"{a} has the wrong number of arguments")
            return
        if in_head:
            raise ValidationError(f"head atom {a} is not a second-order atom")
        if self.schema.arity(a.pred) != len(a.args):
            raise ValidationError(f"atom {a} does not match the input schema")

    def is_so(self, a) -> bool:
        return isinstance(a, FactAtom) or (isinstance(a, Atom) and a.pred in self._kinds)

    def __str__(self):
        return format_msnp(self)


def _guarded(imp: Implication) -> bool:
    for h in imp.head:
        hv = set(_vars(h))
        if not any(hv <= set(_vars(b)) for b in imp.body):
            return False
    return True


def check_guarded(formula: MsnpFormula) -> bool:
    return all(_guarded(imp) for imp in formula.matrix)


# --------------------------------------------------------------------------
# text format


def parse_msnp(text: str) -> MsnpFormula:
    dialect, schema, sovars, freevars, imps = None, None, [], [], []
    for no, line in iter_lines(text):
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if key == "msnp":
            if rest not in DIALECTS:
                raise ParseError(f"unknown dialect {rest!r}", no)
            dialect = rest
        elif key == "schema":
            schema = parse_schema_line(line, no)
        elif key == "sovar":
            lx = Lexer(rest, line_offset=no - 1)
            name = lx.name()
            kind = lx.name()
            if kind == "monadic":
                sovars.append((name, 1))
            elif kind == FACTSET:
                sovars.append((name, FACTSET))
            elif kind == "rel":
                lx.expect("/")
                num = lx.next()
                if num.kind != "num":
                    raise ParseError("expected arity", num.line, num.col)
                sovars.append((name, int(num.value)))
            else:
                raise ParseError(f"unknown SO variable kind {kind!r}", no)
        elif key == "freevar":
            freevars += rest.replace(",", " ").split()
        elif key == "imp":
            imps.append((_parse_implication(rest, no), no))
        else:
            raise ParseError(f"unknown directive {key!r}", no, 1)
    if dialect is None:
        raise ParseError("missing 'msnp <dialect>' header")
    so_names = {n for n, _ in sovars}
    if schema is None:
        rels = {}
        for imp, no in imps:
            for a in imp.body:
                if isinstance(a, Atom) and a.pred not in so_names:
                    if rels.setdefault(a.pred, len(a.args)) != len(a.args):
                        raise ParseError(f"{a.pred} used with two arities", no)
                if isinstance(a, FactAtom):
                    rels.setdefault(a.rel, len(a.args))
        schema = Schema(tuple(rels.items()))
    try:
        return MsnpFormula(dialect, schema, tuple(sovars), tuple(freevars),
                           tuple(i for i, _ in imps))
    except ValidationError as exc:
        bad = next((no for i, no in imps if str(i) in str(exc)), None)
        raise ParseError(str(exc), bad) from None


def _parse_implication(text: str, no: int) -> Implication:
    lx = Lexer(text, line_offset=no - 1)
    body = []
    if not lx.at("->"):
        body.append(_msnp_atom(lx))
        while lx.at(","):
            lx.next()
            body.append(_msnp_atom(lx))
    lx.expect("->")
    head = []
    if lx.at("false"):
        lx.next()
    else:
        head.append(_msnp_atom(lx))
        while lx.at(";"):
            lx.next()
            head.append(_msnp_atom(lx))
    if not lx.at_end():
        raise lx.error("trailing input in implication")
    return Implication(tuple(body), tuple(head))


def _msnp_atom(lx: Lexer):
    name = lx.name()
    if lx.at("="):
        lx.next()
        return Eq(name, lx.name())
    if lx.at("(") and lx.peek(2) is not None and lx.peek(2).value == "(":
        lx.expect("(")
        rel = lx.name()
        args = parse_atom_args(lx)
        lx.expect(")")
        return FactAtom(name, rel, args)
    return Atom(name, parse_atom_args(lx))


def format_msnp(formula: MsnpFormula, header: str | None = None) -> str:
    lines = [f"# {header}"] if header else []
    lines.append(f"msnp {formula.dialect}")
    if len(formula.schema):
        lines.append(str(formula.schema))
    for n, k in formula.sovars:
        kind = "monadic" if (k == 1 and formula.dialect == "mmsnp") else (
            FACTSET if k == FACTSET else f"rel/{k}")
        lines.append(f"sovar {n} {kind}")
    if formula.freevars:
        lines.append("freevar " + " ".join(formula.freevars))
    lines += [str(i) for i in formula.matrix]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# normalization


def _unify(imp: Implication, keep: set) -> Implication | None:
    """Remove equalities by substitution.  Equalities between two distinct
    variables of ``keep`` are retained."""
    parent = {}

    def find(v):
        while parent.get(v, v) != v:
            v = parent[v]
        return v

    kept = []
    for a in imp.body:
        if isinstance(a, Eq):
            x, y = find(a.left), find(a.right)
            if x == y:
                continue
            if x in keep and y in keep:
                kept.append((x, y))
                continue
            if x in keep:
                parent[y] = x
            else:
                parent[x] = y
    sub = lambda a: _rename(a, find)  # noqa: E731
    body = []
    for a in imp.body:
        if not isinstance(a, Eq):
            b = sub(a)
            if b not in body:
                body.append(b)
    eqs = []
    for x, y in kept:
        x, y = find(x), find(y)
        if x != y and Eq(x, y) not in eqs:
            eqs.append(Eq(x, y))
    head = []
    for a in imp.head:
        b = sub(a)
        if b not in head:
            head.append(b)
    return Implication(tuple(body + eqs), tuple(head))


def _rename(a, f):
    if isinstance(a, Eq):
        return Eq(f(a.left), f(a.right))
    if isinstance(a, FactAtom):
        return FactAtom(a.var, a.rel, tuple(f(v) for v in a.args))
    return Atom(a.pred, tuple(f(v) for v in a.args))


def _fresh_vars(taken: set, prefix: str = "u"):
    i = 0
    while True:
        i += 1
        if f"{prefix}{i}" not in taken:
            taken.add(f"{prefix}{i}")
            yield f"{prefix}{i}"


def _guard_family(imp: Implication, need: list, schema: Schema, taken: set) -> list:
    """Add, for each variable in ``need``, an input atom containing it once
    with fresh variables elsewhere; one implication per choice."""
    options = []
    for x in need:
        opts = []
        for rel, k in schema:
            for pos in range(k):
                opts.append((rel, k, pos, x))
        options.append(opts)
    out = []
    for choice in product(*options):
        fresh = _fresh_vars(set(taken) | set(imp.variables()))
        extra = []
        for rel, k, pos, x in choice:
            args = tuple(x if i == pos else next(fresh) for i in range(k))
            extra.append(Atom(rel, args))
        out.append(Implication(tuple(extra) + imp.body, imp.head))
    return out


def normalize_msnp(formula: MsnpFormula) -> MsnpFormula:
    """Eliminate equalities, make bodies non-empty and cover head variables.

    Each head variable missing from the (non-equality) body atoms gets one
    input atom per relation and position, producing a family of
    implications.  Works for MMSNP and GMSNP.
    """
    if formula.dialect == "mmsnp2":
        raise ValidationError("normalize_msnp expects MMSNP or GMSNP")
    keep = set(formula.freevars)
    out = []
    taken = {v for imp in formula.matrix for v in imp.variables()} | keep
    for imp in formula.matrix:
        imp = _unify(imp, keep)
        atoms = [a for a in imp.body if not isinstance(a, Eq)]
        covered = {v for a in atoms for v in a.args}
        need = []
        for h in imp.head:
            for v in h.args:
                if v not in covered and v not in need:
                    need.append(v)
        if not need and atoms:
            out.append(imp)
            continue
        if not need and not imp.body:
            # no variables at all: holds on non-empty instances only via some fact
            need_imp = []
            for rel, k in formula.schema:
                fresh = _fresh_vars(set(taken))
                need_imp.append(Implication((Atom(rel, tuple(next(fresh) for _ in range(k))),), imp.head))
            out += need_imp
            continue
        if not need:
            out.append(imp)
            continue
        out += _guard_family(imp, need, formula.schema, taken)
    dedup = list(dict.fromkeys(out))
    return MsnpFormula(formula.dialect, formula.schema, formula.sovars, formula.freevars, tuple(dedup))


# --------------------------------------------------------------------------
# evaluation


def _assignments(atoms, variables, data: Instance, fixed: dict):
    """All maps of ``variables`` into adom(data) satisfying input atoms/equalities."""
    adom = sorted(data.adom)
    occurring = [v for a in atoms for v in _vars(a)]
    bound = list(dict.fromkeys(occurring))
    rest = [v for v in variables if v not in bound and v not in fixed]
    if atoms:
        base = cq_matches(CQ(tuple(bound), tuple(atoms)), data.relation, adom,
                          {v: c for v, c in fixed.items() if v in bound})
    else:
        base = iter([{}])
    for asg in base:
        for vals in product(adom, repeat=len(rest)):
            full = dict(fixed)
            full.update(asg)
            full.update(zip(rest, vals))
            yield full


def _so_key(formula: MsnpFormula, a, asg, data: Instance):
    """Ground key of an SO atom, or None if it can never hold."""
    if isinstance(a, FactAtom):
        args = tuple(asg[v] for v in a.args)
        if args not in data.relation(a.rel):
            return None
        return (a.var, a.rel, args)
    args = tuple(asg[v] for v in a.args)
    if formula._kinds[a.pred] == FACTSET:
        return (a.pred, "", args)
    return (a.pred, args)


def ground_msnp(formula: MsnpFormula, data: Instance, fixed: dict) -> _sat.ClauseSet:
    cs = _sat.ClauseSet()
    for imp in formula.matrix:
        inputs = [a for a in imp.body if isinstance(a, Eq) or not formula.is_so(a)]
        so_body = [a for a in imp.body if not isinstance(a, Eq) and formula.is_so(a)]
        for asg in _assignments(inputs, imp.variables(), data, fixed):
            body = []
            for a in so_body:
                k = _so_key(formula, a, asg, data)
                if k is None:
                    break
                body.append(cs.atom(k))
            else:
                head = []
                for a in imp.head:
                    k = _so_key(formula, a, asg, data)
                    if k is not None:
                        head.append(cs.atom(k))
                cs.add(body, head)
    return cs


def _so_universe(formula: MsnpFormula, data: Instance, cs: _sat.ClauseSet) -> list:
    adom = sorted(data.adom)
    atoms = []
    for n, k in formula.sovars:
        if k == FACTSET:
            keys = [(n, "", (a,)) for a in adom]
            keys += [(n, f.pred, f.args) for f in sorted(data.facts)]
        else:
            keys = [(n, args) for args in product(adom, repeat=k)]
        atoms += [cs.atom(key) for key in keys]
    return atoms


def eval_msnp(formula: MsnpFormula, data: Instance, method: str = "search",
              max_models: int = DEFAULT_MAX_MODELS,
              max_nodes: int = _sat.DEFAULT_MAX_NODES) -> list:
    """Co-query: tuples over adom(data) for which the formula is false.

    A Boolean sentence is true on the empty instance, so the result there
    is empty.  ``method="enumerate"`` tries every SO assignment literally.
    """
    if not data.adom:
        return []
    out = []
    for tup in product(sorted(data.adom), repeat=len(formula.freevars)):
        cs = ground_msnp(formula, data, dict(zip(formula.freevars, tup)))
        if method == "search":
            sat = _sat.search(cs, max_nodes=max_nodes) is not None
        elif method == "enumerate":
            atoms = _so_universe(formula, data, cs)
            sat = next(_sat.enumerate_models(cs, atoms, max_models), None) is not None
        else:
            raise ValueError(f"unknown method {method!r}")
        if not sat:
            out.append(tup)
    return out


# --------------------------------------------------------------------------
# forbidden patterns


@dataclass(frozen=True)
class ColoredStructure:
    base: RelStructure
    colors: dict

    def __post_init__(self):
        if set(self.colors) != set(self.base.domain):
            raise ValidationError("every element needs exactly one color")

    def __hash__(self):
        return hash((self.base, tuple(sorted(self.colors.items()))))


def parse_patterns(text: str) -> tuple:
    """Returns ``(color list, list of ColoredStructure)``."""
    colors = None
    blocks = [[]]
    for no, line in iter_lines(text):
        if line.startswith("colors"):
            colors = line.split()[1:]
        elif line == "---":
            blocks.append([])
        else:
            blocks[-1].append((no, line))
    if colors is None:
        raise ParseError("missing 'colors' line")
    patterns = []
    for block in blocks:
        if not block:
            continue
        facts, coloring = [], {}
        for no, line in block:
            lx = Lexer(line, line_offset=no - 1)
            while not lx.at_end():
                name = lx.name()
                if name == "color":
                    lx.expect("(")
                    e = lx.name()
                    lx.expect(")")
                    lx.expect("=")
                    c = lx.name()
                    if c not in colors:
                        raise ParseError(f"unknown color {c!r}", no)
                    if coloring.setdefault(e, c) != c:
                        raise ParseError(f"element {e} colored twice", no)
                else:
                    facts.append(Atom(name, parse_atom_args(lx)))
                    if lx.at("."):
                        lx.next()
        dom = set(coloring) | {v for f in facts for v in f.args}
        try:
            patterns.append(ColoredStructure(RelStructure(frozenset(dom), frozenset(facts)), coloring))
        except ValidationError as exc:
            raise ParseError(str(exc), block[0][0]) from None
    return colors, patterns


def forb_membership(patterns, data: Instance, colors, max_colorings: int = 2 ** 20) -> bool:
    """True iff some coloring of adom(data) admits no pattern homomorphism."""
    from .csp import Template, find_hom

    colors = list(colors)
    adom = sorted(data.adom)
    if len(colors) ** len(adom) > max_colorings:
        raise SizeBoundError("too many colorings")
    pats = []
    for p in patterns:
        facts = set(p.base.facts) | {Atom(f"color:{c}", (e,)) for e, c in p.colors.items()}
        pats.append(Template(RelStructure(p.base.domain, frozenset(facts))))
    if not pats:
        return True
    for coloring in product(colors, repeat=len(adom)):
        facts = set(data.facts) | {Atom(f"color:{c}", (e,)) for e, c in zip(adom, coloring)}
        if not adom:
            return True
        target = Template(RelStructure(frozenset(adom), frozenset(facts)))
        if all(find_hom(p, target) is None for p in pats):
            return True
    return not adom
