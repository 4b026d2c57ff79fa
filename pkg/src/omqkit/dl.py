"""ALC / ALCU concepts, ontologies, OMQs and type elimination.

Types are bitsets over an ordered closure of concepts.  Universal
restrictions are rewritten into negated existentials before the closure
is built, so the only modal members of a closure are ``Exists`` nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, NamedTuple, Union

from .core import (Lexer, ParseError, RelStructure, Schema, UCQ,
                   ValidationError, iter_lines, parse_schema_line, parse_ucq,
                   format_ucq)

UNIV = "univ"
KEYWORDS = {"top", "bot", "not", "and", "or", "exists", "forall", "sub", UNIV}


# Concepts are tuples underneath; equality and hashing also look at the
# constructor, so that e.g. top and bot, or a conjunction and the
# disjunction of the same operands, stay distinct.
def _eq(self, other):
    return type(self) is type(other) and tuple.__eq__(self, other)


def _ne(self, other):
    return not _eq(self, other)


def _hash(self):
    return hash((type(self).__name__, tuple.__hash__(self)))


class Top(NamedTuple):
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return "top"


class Bot(NamedTuple):
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return "bot"


class Name(NamedTuple):
    name: str
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return self.name


class Not(NamedTuple):
    arg: "Concept"
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return f"not {_wrap(self.arg)}"


class And(NamedTuple):
    left: "Concept"
    right: "Concept"
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return f"({self.left} and {self.right})"


class Or(NamedTuple):
    left: "Concept"
    right: "Concept"
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return f"({self.left} or {self.right})"


class Exists(NamedTuple):
    role: str
    arg: "Concept"
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return f"exists {self.role} . {_wrap(self.arg)}"


class Forall(NamedTuple):
    role: str
    arg: "Concept"
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return f"forall {self.role} . {_wrap(self.arg)}"


Concept = Union[Top, Bot, Name, Not, And, Or, Exists, Forall]
TOP, BOT = Top(), Bot()


def _wrap(c) -> str:
    # quantifier bodies and negations bind tightly; parenthesize nested quantifiers
    if isinstance(c, (Exists, Forall)):
        return f"({c})"
    return str(c)


def conj(items: Iterable) -> Concept:
    items = list(items)
    if not items:
        return TOP
    out = items[0]
    for c in items[1:]:
        out = And(out, c)
    return out


def disj(items: Iterable) -> Concept:
    items = list(items)
    if not items:
        return BOT
    out = items[0]
    for c in items[1:]:
        out = Or(out, c)
    return out


def subconcepts(c) -> Iterable:
    """Post-order traversal (children before parents)."""
    if isinstance(c, (Not, Exists, Forall)):
        yield from subconcepts(c.arg)
    elif isinstance(c, (And, Or)):
        yield from subconcepts(c.left)
        yield from subconcepts(c.right)
    yield c


def concept_names(c) -> set:
    return {s.name for s in subconcepts(c) if isinstance(s, Name)}


def role_names(c) -> set:
    return {s.role for s in subconcepts(c) if isinstance(s, (Exists, Forall))}


@dataclass(frozen=True)
class Ontology:
    inclusions: tuple = ()
    dialect: str = None

    def __post_init__(self):
        incs = tuple((lhs, rhs) for lhs, rhs in self.inclusions)
        object.__setattr__(self, "inclusions", incs)
        uses_univ = any(UNIV in role_names(side) for inc in incs for side in inc)
        if self.dialect is None:
            object.__setattr__(self, "dialect", "ALCU" if uses_univ else "ALC")
        elif self.dialect not in ("ALC", "ALCU"):
            raise ValidationError(f"unknown dialect {self.dialect}")
        elif self.dialect == "ALC" and uses_univ:
            raise ValidationError("the universal role is not available in ALC")

    def concept_names(self) -> set:
        return {n for inc in self.inclusions for side in inc for n in concept_names(side)}

    def role_names(self) -> set:
        return {r for inc in self.inclusions for side in inc for r in role_names(side)} - {UNIV}

    def signature(self) -> set:
        return self.concept_names() | self.role_names()

    def __str__(self):
        return format_ontology(self)


class AQ(NamedTuple):
    name: str
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return f"aq {self.name}"


class BAQ(NamedTuple):
    name: str
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return f"baq {self.name}"


class ConQ(NamedTuple):
    concept: Concept
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return f"conq {self.concept}"


class UCQQuery(NamedTuple):
    ucq: UCQ
    __eq__, __ne__, __hash__ = _eq, _ne, _hash

    def __str__(self):
        return f"ucq {format_ucq(self.ucq)}"


@dataclass(frozen=True)
class OmqQuery:
    schema: Schema
    ontology: Ontology
    query: object

    def __post_init__(self):
        for n, a in self.schema:
            if a not in (1, 2):
                raise ValidationError(f"data schema must be binary, {n} has arity {a}")
        for n in self.ontology.concept_names():
            if self.schema.arity(n) not in (None, 1):
                raise ValidationError(f"{n} is used as a concept but has arity {self.schema.arity(n)}")
        for r in self.ontology.role_names():
            if self.schema.arity(r) not in (None, 2):
                raise ValidationError(f"{r} is used as a role but has arity {self.schema.arity(r)}")
        query = self.query
        if not isinstance(query, (AQ, BAQ, ConQ, UCQQuery)):
            raise ValidationError(f"unsupported query {query!r}")
        if isinstance(query, (AQ, BAQ)) and self.schema.arity(query.name) not in (None, 1):
            raise ValidationError(f"query concept {query.name} is not unary in the data schema")

    @property
    def arity(self) -> int:
        query = self.query
        if isinstance(query, BAQ):
            return 0
        if isinstance(query, UCQQuery):
            return query.ucq.arity
        return 1

    def __str__(self):
        return format_omq(self)


# --------------------------------------------------------------------------
# parsing / printing


def parse_concept(text: str, line: int = 1) -> Concept:
    lx = Lexer(text, line_offset=line - 1)
    c = _concept(lx)
    if not lx.at_end():
        raise lx.error(f"unexpected {lx.peek().value!r} after concept")
    return c


def _concept(lx: Lexer):
    first = _unary(lx)
    if lx.at("and") or lx.at("or"):
        op = lx.peek().value
        items = [first]
        while lx.at(op):
            lx.next()
            items.append(_unary(lx))
        if lx.at("and") or lx.at("or"):
            raise lx.error("mixing 'and' and 'or' needs parentheses")
        return conj(items) if op == "and" else disj(items)
    return first


def _unary(lx: Lexer):
    t = lx.next()
    v = t.value
    if v == "(":
        c = _concept(lx)
        lx.expect(")")
        return c
    if v == "top":
        return TOP
    if v == "bot":
        return BOT
    if v == "not":
        return Not(_unary(lx))
    if v in ("exists", "forall"):
        role = lx.name()
        if role in KEYWORDS - {UNIV}:
            raise ParseError(f"{role!r} is reserved", t.line, t.col)
        lx.expect(".")
        arg = _unary(lx)
        return Exists(role, arg) if v == "exists" else Forall(role, arg)
    if t.kind == "name" and v not in KEYWORDS:
        return Name(v)
    raise ParseError(f"unexpected {v!r} in concept", t.line, t.col)


def parse_inclusion(text: str, line: int = 1):
    lx = Lexer(text, line_offset=line - 1)
    lhs = _concept(lx)
    lx.expect("sub")
    rhs = _concept(lx)
    if not lx.at_end():
        raise lx.error(f"unexpected {lx.peek().value!r} after inclusion")
    return lhs, rhs


def parse_ontology(text: str, dialect: str | None = None) -> Ontology:
    """One ``lhs sub rhs`` per line; ``dialect='ALC'`` rejects ``univ``."""
    incs = []
    for no, line in iter_lines(text):
        incs.append(parse_inclusion(line, no))
        if dialect == "ALC" and any(UNIV in role_names(s) for s in incs[-1]):
            raise ParseError("the universal role is not allowed in ALC", no)
    return Ontology(tuple(incs), dialect)


def format_ontology(ontology: Ontology) -> str:
    return "".join(f"{lhs} sub {rhs}\n" for lhs, rhs in ontology.inclusions)


def parse_omq(text: str, dialect: str | None = None) -> OmqQuery:
    schema, incs, query = None, [], None
    for no, line in iter_lines(text):
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if key == "schema":
            schema = parse_schema_line(line, no)
        elif key == "axiom":
            incs.append(parse_inclusion(rest, no))
        elif key == "query":
            if query is not None:
                raise ParseError("more than one query line", no)
            query = _parse_query_line(rest, no)
        else:
            raise ParseError(f"unknown directive {key!r}", no, 1)
    if query is None:
        raise ParseError("missing query line")
    try:
        ontology = Ontology(tuple(incs), dialect)
        if schema is None:
            schema = _infer_schema(ontology, query)
        return OmqQuery(schema, ontology, query)
    except ValidationError as exc:
        raise ParseError(str(exc)) from None


def _parse_query_line(rest: str, no: int):
    kind, _, body = rest.partition(" ")
    body = body.strip()
    if kind in ("aq", "baq"):
        lx = Lexer(body, line_offset=no - 1)
        name = lx.name()
        if not lx.at_end() or name in KEYWORDS:
            raise ParseError(f"expected a single concept name after {kind}", no)
        return AQ(name) if kind == "aq" else BAQ(name)
    if kind == "conq":
        return ConQ(parse_concept(body, no))
    if kind == "ucq":
        return UCQQuery(parse_ucq(body, no))
    raise ParseError(f"unknown query kind {kind!r}", no)


def _infer_schema(ontology: Ontology, query) -> Schema:
    rels = [(n, 1) for n in sorted(ontology.concept_names())] + [(r, 2) for r in sorted(ontology.role_names())]
    if isinstance(query, (AQ, BAQ)):
        rels.append((query.name, 1))
    elif isinstance(query, ConQ):
        rels += [(n, 1) for n in sorted(concept_names(query.concept))]
        rels += [(r, 2) for r in sorted(role_names(query.concept) - {UNIV})]
    elif isinstance(query, UCQQuery):
        rels += sorted(query.ucq.relations().items())
    return Schema(tuple(rels))


def format_omq(omq: OmqQuery) -> str:
    lines = [str(omq.schema)] if len(omq.schema) else []
    lines += [f"axiom {lhs} sub {rhs}" for lhs, rhs in omq.ontology.inclusions]
    lines.append(f"query {omq.query}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# closure and types


def nnf_forall(c) -> Concept:
    """Rewrite every universal restriction into a negated existential."""
    if isinstance(c, Forall):
        return _neg(Exists(c.role, _neg(nnf_forall(c.arg))))
    if isinstance(c, Not):
        return _neg(nnf_forall(c.arg))
    if isinstance(c, Exists):
        return Exists(c.role, nnf_forall(c.arg))
    if isinstance(c, And):
        return And(nnf_forall(c.left), nnf_forall(c.right))
    if isinstance(c, Or):
        return Or(nnf_forall(c.left), nnf_forall(c.right))
    return c


def _neg(c):
    return c.arg if isinstance(c, Not) else Not(c)


def normalize_closure(ontology: Ontology, extra: Iterable = ()) -> tuple:
    seen = {}
    sides = [s for inc in ontology.inclusions for s in inc] + list(extra)
    for side in sides:
        for s in subconcepts(nnf_forall(side)):
            seen.setdefault(s, None)
    return tuple(seen)


@dataclass(frozen=True)
class TypeSet:
    closure: tuple
    types: frozenset
    index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {c: i for i, c in enumerate(self.closure)})
        object.__setattr__(self, "types", frozenset(self.types))

    def bit(self, c) -> int:
        return 1 << self.index[nnf_forall(c)]

    def has(self, type_: int, c) -> bool:
        i = self.index.get(nnf_forall(c))
        return i is not None and bool(type_ >> i & 1)

    def members(self, type_: int) -> list:
        return [c for i, c in enumerate(self.closure) if type_ >> i & 1]

    def sorted(self) -> list:
        return sorted(self.types)

    def __len__(self):
        return len(self.types)

    def __iter__(self):
        return iter(sorted(self.types))


class _Closure:
    """Precomputed bit layout of a closure for fast type operations."""

    def __init__(self, closure: tuple, inclusions):
        self.closure = closure
        self.index = {c: i for i, c in enumerate(closure)}
        self.base = [i for i, c in enumerate(closure) if isinstance(c, (Name, Exists))]
        self.incs = [(self.index[nnf_forall(l)], self.index[nnf_forall(r)]) for l, r in inclusions]
        self.exists = {}  # role -> list of (exists bit, arg bit)
        for i, c in enumerate(closure):
            if isinstance(c, Exists):
                self.exists.setdefault(c.role, []).append((1 << i, 1 << self.index[c.arg]))

    def complete(self, base_mask: int) -> int | None:
        """Extend an assignment of the base members; None if incoherent."""
        type_ = 0
        for i, c in enumerate(self.closure):
            if isinstance(c, (Name, Exists)):
                v = base_mask >> i & 1
            elif isinstance(c, Top):
                v = 1
            elif isinstance(c, Bot):
                v = 0
            elif isinstance(c, Not):
                v = 1 - (type_ >> self.index[c.arg] & 1)
            elif isinstance(c, And):
                v = type_ >> self.index[c.left] & type_ >> self.index[c.right] & 1
            else:
                v = (type_ >> self.index[c.left] | type_ >> self.index[c.right]) & 1
            type_ |= v << i
        for l, r in self.incs:
            if type_ >> l & 1 and not type_ >> r & 1:
                return None
        return type_

    def coherent_types(self) -> list:
        out = []
        for bits in product((0, 1), repeat=len(self.base)):
            mask = 0
            for i, b in zip(self.base, bits):
                mask |= b << i
            type_ = self.complete(mask)
            if type_ is not None:
                out.append(type_)
        return out

    def required(self, type2: int, role: str) -> int:
        req = 0
        for ex, arg in self.exists.get(role, ()):
            if type2 & arg:
                req |= ex
        return req

    def coherent(self, type1: int, type2: int, role: str) -> bool:
        req = self.required(type2, role)
        return type1 & req == req

    def eliminate(self, types) -> set:
        """Greatest subset in which every (non-universal) existential is witnessed."""
        alive = set(types)
        roles = [r for r in self.exists if r != UNIV]
        changed = True
        while changed:
            changed = False
            reqs = {r: {t2: self.required(t2, r) for t2 in alive} for r in roles}
            for type_ in list(alive):
                for r in roles:
                    for ex, arg in self.exists[r]:
                        if type_ & ex and not any(t2 & arg and type_ & req == req
                                                for t2, req in reqs[r].items()):
                            alive.discard(type_)
                            changed = True
                            break
                    if type_ not in alive:
                        break
        return alive


def _closure_for(ontology: Ontology, extra=()) -> _Closure:
    return _Closure(normalize_closure(ontology, extra), ontology.inclusions)


def eliminate_types(ontology: Ontology, extra: Iterable = ()) -> TypeSet:
    if ontology.dialect != "ALC":
        raise ValidationError("eliminate_types needs an ALC ontology; use countermodel_type_sets")
    cl = _closure_for(ontology, extra)
    return TypeSet(cl.closure, cl.eliminate(cl.coherent_types()))


def r_coherent(type1: int, type2: int, role: str, closure: tuple) -> bool:
    index = {c: i for i, c in enumerate(closure)}
    for i, c in enumerate(closure):
        if isinstance(c, Exists) and c.role == role:
            if type2 >> index[c.arg] & 1 and not type1 >> i & 1:
                return False
    return True


def countermodel_type_sets(ontology: Ontology, goal_name: str, boolean: bool = False,
                           extra: Iterable = ()) -> list:
    """Maximal type sets realizable together in a model that avoids the query.

    For an AQ the model must have some element outside ``A``; with
    ``boolean=True`` no element may be in ``A``.  Returns a list of
    ``TypeSet`` sharing one closure, sorted for determinism.
    """
    cl = _closure_for(ontology, [Name(goal_name), *extra])
    abit = 1 << cl.index[Name(goal_name)]
    coherent = cl.coherent_types()
    if boolean:
        coherent = [t for t in coherent if not t & abit]
    univ = cl.exists.get(UNIV, [])
    results = []
    if not univ:
        alive = cl.eliminate(coherent)
        if alive and (boolean or any(not t & abit for t in alive)):
            results.append(frozenset(alive))
    else:
        for flags in product((0, 1), repeat=len(univ)):
            prof = 0
            banned = 0
            for f, (ex, arg) in zip(flags, univ):
                if f:
                    prof |= ex
                else:
                    banned |= arg
            umask = sum(ex for ex, _ in univ)
            cand = [t for t in coherent if t & umask == prof and not t & banned]
            alive = cl.eliminate(cand)
            if not alive:
                continue
            if any(f and not any(t & arg for t in alive) for f, (_, arg) in zip(flags, univ)):
                continue
            if boolean or any(not t & abit for t in alive):
                results.append(frozenset(alive))
    maximal = [s for s in results if not any(s < o for o in results)]
    maximal = sorted(set(maximal), key=lambda s: sorted(s))
    return [TypeSet(cl.closure, s) for s in maximal]


def conq_to_aq(omq: OmqQuery) -> OmqQuery:
    if not isinstance(omq.query, ConQ):
        raise ValidationError("conq_to_aq expects a ConQ query")
    c = omq.query.concept
    if isinstance(c, Name):
        return OmqQuery(omq.schema, omq.ontology, AQ(c.name))
    fresh = fresh_name("A_q", set(omq.schema.names) | omq.ontology.signature() | concept_names(c))
    ontology = Ontology(omq.ontology.inclusions + ((c, Name(fresh)),))
    return OmqQuery(omq.schema, ontology, AQ(fresh))


def fresh_name(base: str, taken: set) -> str:
    if base not in taken:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


# --------------------------------------------------------------------------
# model checking


def extension(structure: RelStructure, c) -> frozenset:
    """The set of elements of ``structure`` satisfying concept ``c``."""
    dom = structure.domain
    if isinstance(c, Top):
        return dom
    if isinstance(c, Bot):
        return frozenset()
    if isinstance(c, Name):
        return frozenset(t[0] for t in structure.relation(c.name) if len(t) == 1)
    if isinstance(c, Not):
        return dom - extension(structure, c.arg)
    if isinstance(c, And):
        return extension(structure, c.left) & extension(structure, c.right)
    if isinstance(c, Or):
        return extension(structure, c.left) | extension(structure, c.right)
    inner = extension(structure, c.arg)
    if c.role == UNIV:
        if isinstance(c, Exists):
            return dom if inner else frozenset()
        return dom if inner == dom else frozenset()
    edges = [t for t in structure.relation(c.role) if len(t) == 2]
    if isinstance(c, Exists):
        return frozenset(x for x, y in edges if y in inner)
    return frozenset(x for x in dom if all(y in inner for (x2, y) in edges if x2 == x))


def check_model(structure: RelStructure, ontology: Ontology) -> bool:
    return all(extension(structure, lhs) <= extension(structure, rhs) for lhs, rhs in ontology.inclusions)


def type_of(structure: RelStructure, closure: tuple, d) -> int:
    type_ = 0
    for i, c in enumerate(closure):
        if d in extension(structure, c):
            type_ |= 1 << i
    return type_
