"""Schemas, instances, relational structures and UCQ evaluation.

Everything here is immutable; the other modules build on these types.
Facts and query atoms share one representation, :class:`Atom`, whose
arguments are constants in a fact and variables in a query or rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Iterator, NamedTuple

__all__ = [
    "OmqError", "ParseError", "ValidationError", "SizeBoundError",
    "UnsupportedError", "Atom", "Eq", "Schema", "Instance", "RelStructure",
    "CQ", "UCQ", "parse_instance", "format_instance", "eval_ucq",
    "parse_ucq", "format_ucq", "Lexer",
]


class OmqError(Exception):
    """Base class of every error raised by the package."""


class ParseError(OmqError, ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {col}" if col is not None else "") + ": "
        super().__init__(where + message)


class ValidationError(OmqError, ValueError):
    """Well-formed input that violates a structural requirement."""


class SizeBoundError(OmqError):
    """A configurable search bound was exceeded."""


class UnsupportedError(OmqError):
    """The requested construction is outside what the package implements."""


class Atom(NamedTuple):
    pred: str
    args: tuple

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return f"{self.pred}({','.join(self.args)})"


class Eq(NamedTuple):
    left: str
    right: str

    def __str__(self) -> str:
        return f"{self.left} = {self.right}"


# --------------------------------------------------------------------------
# lexing


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<num>[0-9]+)
  | (?P<op>:-|->|[()\[\],.;:=/|])
""", re.VERBOSE)


class Token(NamedTuple):
    kind: str
    value: str
    line: int
    col: int


class Lexer:
    """Token stream with one-token lookahead shared by all text parsers."""

    def __init__(self, text: str, line_offset: int = 0, keep_newlines: bool = False):
        self.tokens: list[Token] = []
        line, line_start, pos = 1 + line_offset, 0, 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
            kind = m.lastgroup
            col = pos - line_start + 1
            if kind == "nl":
                if keep_newlines:
                    self.tokens.append(Token("nl", "\n", line, col))
                line += 1
                line_start = m.end()
            elif kind in ("name", "num", "op"):
                self.tokens.append(Token(kind, m.group(), line, col))
            pos = m.end()
        self.i = 0
        self._eof_line = line

    def peek(self, k: int = 0) -> Token | None:
        j = self.i + k
        return self.tokens[j] if j < len(self.tokens) else None

    def at(self, value: str) -> bool:
        t = self.peek()
        return t is not None and t.value == value

    def at_end(self) -> bool:
        return self.i >= len(self.tokens)

    def next(self) -> Token:
        t = self.peek()
        if t is None:
            raise ParseError("unexpected end of input", self._eof_line)
        self.i += 1
        return t

    def expect(self, value: str) -> Token:
        t = self.next()
        if t.value != value:
            raise ParseError(f"expected {value!r}, found {t.value!r}", t.line, t.col)
        return t

    def name(self) -> str:
        t = self.next()
        if t.kind != "name":
            raise ParseError(f"expected identifier, found {t.value!r}", t.line, t.col)
        return t.value

    def error(self, message: str) -> ParseError:
        t = self.peek()
        if t is None:
            return ParseError(message, self._eof_line)
        return ParseError(message, t.line, t.col)


def iter_lines(text: str) -> Iterator[tuple[int, str]]:
    """Yield (line number, stripped content) for non-blank, non-comment lines."""
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def parse_atom_args(lx: Lexer) -> tuple:
    if not lx.at("("):
        return ()
    lx.expect("(")
    args = []
    if not lx.at(")"):
        args.append(lx.name())
        while lx.at(","):
            lx.next()
            args.append(lx.name())
    lx.expect(")")
    return tuple(args)


# --------------------------------------------------------------------------
# schemas and instances


@dataclass(frozen=True)
class Schema:
    relations: tuple = ()

    def __post_init__(self):
        rels = tuple((str(n), int(a)) for n, a in self.relations)
        seen = {}
        for n, a in rels:
            if a < 0:
                raise ValidationError(f"negative arity for {n}")
            if n in seen and seen[n] != a:
                raise ValidationError(f"relation {n} declared with arities {seen[n]} and {a}")
            seen[n] = a
        # dedupe, keep first occurrence order
        object.__setattr__(self, "relations", tuple(seen.items()))
        object.__setattr__(self, "_arity", dict(seen))

    @classmethod
    def of(cls, mapping: dict | Iterable) -> "Schema":
        items = mapping.items() if isinstance(mapping, dict) else mapping
        return cls(tuple(items))

    def arity(self, name: str) -> int | None:
        return self._arity.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._arity

    def __iter__(self):
        return iter(self.relations)

    def __len__(self):
        return len(self.relations)

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.relations)

    def unary(self) -> tuple:
        return tuple(n for n, a in self.relations if a == 1)

    def binary(self) -> tuple:
        return tuple(n for n, a in self.relations if a == 2)

    def is_binary(self) -> bool:
        return all(a <= 2 for _, a in self.relations)

    def union(self, other: "Schema") -> "Schema":
        return Schema(self.relations + tuple(other.relations))

    def restrict(self, names: Iterable[str]) -> "Schema":
        keep = set(names)
        return Schema(tuple((n, a) for n, a in self.relations if n in keep))

    def __str__(self) -> str:
        return "schema " + " ".join(f"{n}/{a}" for n, a in self.relations)


def _schema_of_facts(facts: Iterable[Atom], base: Schema | None = None) -> Schema:
    arities = dict(base.relations) if base is not None else {}
    for f in facts:
        a = arities.setdefault(f.pred, len(f.args))
        if a != len(f.args):
            raise ValidationError(f"fact {f} conflicts with arity {a} of {f.pred}")
    return Schema(tuple(arities.items()))


@dataclass(frozen=True)
class Instance:
    """A finite set of facts; the active domain is derived from them."""

    facts: frozenset = frozenset()
    schema: Schema = None

    def __post_init__(self):
        facts = frozenset(Atom(f[0], tuple(f[1])) for f in self.facts)
        object.__setattr__(self, "facts", facts)
        object.__setattr__(self, "schema", _schema_of_facts(sorted(facts), self.schema))

    @classmethod
    def of(cls, *facts, schema: Schema | None = None) -> "Instance":
        """``Instance.of(("A", ("a",)), ("R", ("a", "b")))``"""
        return cls(frozenset(Atom(p, tuple(a)) for p, a in facts), schema)

    @property
    def adom(self) -> frozenset:
        cached = self.__dict__.get("_adom")
        if cached is None:
            cached = frozenset(c for f in self.facts for c in f.args)
            object.__setattr__(self, "_adom", cached)
        return cached

    def relation(self, name: str) -> frozenset:
        idx = self.__dict__.get("_index")
        if idx is None:
            idx = {}
            for f in self.facts:
                idx.setdefault(f.pred, set()).add(f.args)
            idx = {k: frozenset(v) for k, v in idx.items()}
            object.__setattr__(self, "_index", idx)
        return idx.get(name, frozenset())

    def __len__(self):
        return len(self.facts)

    def __iter__(self):
        return iter(sorted(self.facts))

    def union(self, other: "Instance") -> "Instance":
        return Instance(self.facts | other.facts, self.schema.union(other.schema))

    def map(self, h: dict) -> "Instance":
        return Instance(frozenset(Atom(f.pred, tuple(h[c] for c in f.args)) for f in self.facts),
                        self.schema)

    def __str__(self) -> str:
        return format_instance(self)


@dataclass(frozen=True)
class RelStructure:
    """A finite structure: a non-empty domain plus facts over it."""

    domain: frozenset
    facts: frozenset = frozenset()
    schema: Schema = None

    def __post_init__(self):
        facts = frozenset(Atom(f[0], tuple(f[1])) for f in self.facts)
        domain = frozenset(self.domain)
        if not domain:
            raise ValidationError("structure domain must be non-empty")
        stray = {c for f in facts for c in f.args} - domain
        if stray:
            raise ValidationError(f"fact arguments outside the domain: {sorted(map(str, stray))}")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "facts", facts)
        object.__setattr__(self, "schema", _schema_of_facts(sorted(facts, key=repr), self.schema))

    @classmethod
    def from_instance(cls, inst: Instance, extra=()) -> "RelStructure":
        return cls(inst.adom | frozenset(extra), inst.facts, inst.schema)

    def relation(self, name: str) -> frozenset:
        idx = self.__dict__.get("_index")
        if idx is None:
            idx = {}
            for f in self.facts:
                idx.setdefault(f.pred, set()).add(f.args)
            idx = {k: frozenset(v) for k, v in idx.items()}
            object.__setattr__(self, "_index", idx)
        return idx.get(name, frozenset())

    def instance(self) -> Instance:
        return Instance(self.facts, self.schema)


def parse_instance(text: str, schema: Schema | None = None) -> Instance:
    """Parse the fact-list format.

    An optional first line ``schema R/2 A/1`` fixes arities (and admits
    relations with no facts); facts are ``R(a,b)``, any number per line,
    optionally terminated by ``.`` or separated by ``,``.
    """
    lx = Lexer(text)
    declared = None
    if lx.at("schema"):
        declared = _parse_schema_decl(lx, until_newline_of=lx.next().line)
    facts = []
    while not lx.at_end():
        t = lx.peek()
        pred = lx.name()
        args = parse_atom_args(lx)
        if lx.at(".") or lx.at(","):
            lx.next()
        facts.append((Atom(pred, args), t))
    base = declared
    if schema is not None:
        base = schema if base is None else schema.union(base)
    arities = dict(base.relations) if base is not None else {}
    for f, t in facts:
        a = arities.setdefault(f.pred, len(f.args))
        if a != len(f.args):
            raise ParseError(f"{f.pred} used with arity {len(f.args)}, expected {a}", t.line, t.col)
    return Instance(frozenset(f for f, _ in facts), Schema(tuple(arities.items())))


def _parse_schema_decl(lx: Lexer, until_newline_of: int) -> Schema:
    rels = []
    while not lx.at_end() and lx.peek().line == until_newline_of:
        name = lx.name()
        lx.expect("/")
        num = lx.next()
        if num.kind != "num":
            raise ParseError("expected arity", num.line, num.col)
        rels.append((name, int(num.value)))
    try:
        return Schema(tuple(rels))
    except ValidationError as exc:
        raise ParseError(str(exc), until_newline_of) from None


def parse_schema_line(line: str, lineno: int = 1) -> Schema:
    """Parse ``schema R/2 A/1`` (the keyword is optional)."""
    lx = Lexer(line, line_offset=lineno - 1)
    if lx.at("schema"):
        lx.next()
    return _parse_schema_decl(lx, lineno)


def format_instance(inst: Instance, header: bool = True) -> str:
    lines = []
    if header and len(inst.schema):
        lines.append(str(inst.schema))
    lines.extend(f"{f}." for f in sorted(inst.facts))
    return "\n".join(lines) + ("\n" if lines else "")


# --------------------------------------------------------------------------
# conjunctive queries


@dataclass(frozen=True)
class CQ:
    answer_vars: tuple
    atoms: tuple
    exist_vars: tuple = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "answer_vars", tuple(self.answer_vars))
        object.__setattr__(self, "atoms", tuple(self.atoms))
        occurring = []
        for a in self.atoms:
            for v in (a.args if isinstance(a, Atom) else (a.left, a.right)):
                if v not in occurring:
                    occurring.append(v)
        missing = [v for v in self.answer_vars if v not in occurring]
        if missing:
            raise ValidationError(f"answer variables {missing} do not occur in the query body")
        if self.exist_vars is None:
            ex = tuple(v for v in occurring if v not in self.answer_vars)
            object.__setattr__(self, "exist_vars", ex)

    @property
    def arity(self) -> int:
        return len(self.answer_vars)

    def __str__(self) -> str:
        body = ", ".join(str(a) for a in self.atoms)
        return f"({','.join(self.answer_vars)}): {body}"


@dataclass(frozen=True)
class UCQ:
    disjuncts: tuple

    def __post_init__(self):
        ds = tuple(self.disjuncts)
        object.__setattr__(self, "disjuncts", ds)
        arities = {d.arity for d in ds}
        if len(arities) > 1:
            raise ValidationError(f"disjuncts of different arities {sorted(arities)}")

    @property
    def arity(self) -> int:
        return self.disjuncts[0].arity if self.disjuncts else 0

    def relations(self) -> dict:
        out = {}
        for d in self.disjuncts:
            for a in d.atoms:
                if isinstance(a, Atom):
                    out.setdefault(a.pred, len(a.args))
        return out

    def __str__(self) -> str:
        return format_ucq(self)


def parse_ucq(text: str, line: int = 1) -> UCQ:
    """``(x): R(x,y), A(y) | (x): B(x), x = x``; ``()`` for Boolean disjuncts."""
    lx = Lexer(text, line_offset=line - 1)
    disjuncts = [_parse_cq(lx)]
    while lx.at("|"):
        lx.next()
        disjuncts.append(_parse_cq(lx))
    if not lx.at_end():
        raise lx.error("trailing input after query")
    try:
        return UCQ(tuple(disjuncts))
    except ValidationError as exc:
        raise ParseError(str(exc), line) from None


def _parse_cq(lx: Lexer) -> CQ:
    start = lx.peek()
    answer = parse_atom_args(lx) if lx.at("(") else ()
    lx.expect(":")
    atoms = [_parse_query_atom(lx)]
    while lx.at(","):
        lx.next()
        atoms.append(_parse_query_atom(lx))
    try:
        return CQ(answer, tuple(atoms))
    except ValidationError as exc:
        raise ParseError(str(exc), start.line if start else None) from None


def _parse_query_atom(lx: Lexer):
    name = lx.name()
    if lx.at("="):
        lx.next()
        return Eq(name, lx.name())
    return Atom(name, parse_atom_args(lx))


def format_ucq(query: UCQ) -> str:
    return " | ".join(str(d) for d in query.disjuncts)


def _check_arities(query: UCQ, schema: Schema) -> None:
    for d in query.disjuncts:
        for a in d.atoms:
            if isinstance(a, Atom):
                ar = schema.arity(a.pred)
                if ar is not None and ar != len(a.args):
                    raise ValidationError(
                        f"query atom {a} has arity {len(a.args)} but {a.pred}/{ar} in the schema")


def cq_matches(cq: CQ, rel, adom, fixed: dict | None = None) -> Iterator[dict]:
    """Yield every assignment of the CQ's variables that satisfies it.

    ``rel(name)`` returns the set of argument tuples of a relation.  Equality
    atoms are compiled away by substituting one representative per class.
    """
    parent = {}

    def find(v):
        while parent.get(v, v) != v:
            v = parent[v]
        return v

    for a in cq.atoms:
        if isinstance(a, Eq):
            ra, rb = find(a.left), find(a.right)
            if ra != rb:
                parent[ra] = rb
    atoms = [Atom(a.pred, tuple(find(v) for v in a.args)) for a in cq.atoms if isinstance(a, Atom)]
    all_vars = set(cq.answer_vars) | set(cq.exist_vars)
    reps = {find(v) for v in all_vars}
    start = {}
    for v, c in (fixed or {}).items():
        r = find(v)
        if start.setdefault(r, c) != c:
            return
    free_reps = sorted(reps - {v for a in atoms for v in a.args} - set(start))

    def extend(i, asg, pending):
        if i == len(pending):
            yield asg
            return
        # pick the atom with most bound arguments
        best, best_score = None, -1
        for j in range(i, len(pending)):
            score = sum(v in asg for v in pending[j].args)
            if score > best_score:
                best, best_score = j, score
        pending[i], pending[best] = pending[best], pending[i]
        atom = pending[i]
        for tup in rel(atom.pred):
            if len(tup) != len(atom.args):
                continue
            new = dict(asg)
            ok = True
            for v, c in zip(atom.args, tup):
                if new.setdefault(v, c) != c:
                    ok = False
                    break
            if ok:
                yield from extend(i + 1, new, pending)
        pending[i], pending[best] = pending[best], pending[i]

    for asg in extend(0, dict(start), list(atoms)):
        for extra in product(sorted(adom), repeat=len(free_reps)):
            full = dict(asg)
            full.update(zip(free_reps, extra))
            yield {v: full[find(v)] for v in all_vars}


def eval_ucq(query: UCQ, data: Instance) -> list:
    """Answers of ``query`` on ``data`` as a sorted list of tuples over its active domain."""
    _check_arities(query, data.schema)
    adom = data.adom
    out = set()
    for cq in query.disjuncts:
        for asg in cq_matches(cq, data.relation, adom):
            tup = tuple(asg[v] for v in cq.answer_vars)
            if all(c in adom for c in tup):
                out.add(tup)
    return sorted(out)
