"""Disjunctive datalog programs: parsing, classification, certain answers."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import NamedTuple

from . import _sat
from .core import (Atom, Instance, Lexer, ParseError, Schema, ValidationError,
                   cq_matches, CQ, parse_atom_args)

GOAL = "goal"
ADOM = "adom"
DEFAULT_MAX_MODELS = 2 ** 22


class Rule(NamedTuple):
    head: tuple
    body: tuple

    def variables(self) -> set:
        return {v for a in self.body for v in a.args}

    def __str__(self):
        head = " ; ".join(str(a) for a in self.head) if self.head else "bot"
        return f"{head} :- {', '.join(str(a) for a in self.body)}."


@dataclass(frozen=True)
class Program:
    rules: tuple
    edb: Schema
    goal_arity: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(Rule(tuple(r.head), tuple(r.body)) for r in self.rules))
        idb = {}
        for r in self.rules:
            for a in r.head:
                if idb.setdefault(a.pred, len(a.args)) != len(a.args):
                    raise ValidationError(f"{a.pred} used with two arities")
        idb.setdefault(GOAL, self.goal_arity)
        if idb[GOAL] != self.goal_arity:
            raise ValidationError(f"goal rules have arity {idb[GOAL]}, expected {self.goal_arity}")
        for n in idb:
            if n in self.edb:
                raise ValidationError(f"{n} occurs in a rule head and in the EDB schema")
        for r in self.rules:
            if not r.body:
                raise ValidationError(f"rule with empty body: {r}")
            missing = {v for a in r.head for v in a.args} - r.variables()
            if missing:
                raise ValidationError(f"head variables {sorted(missing)} do not occur in the body of: {r}")
            if any(a.pred == GOAL for a in r.body):
                raise ValidationError(f"goal occurs in a rule body: {r}")
            if any(a.pred == GOAL for a in r.head) and len(r.head) != 1:
                raise ValidationError(f"goal must be the only head atom of its rule: {r}")
            for a in r.body:
                ar = idb.get(a.pred, self.edb.arity(a.pred))
                if ar is None:
                    # an IDB predicate no rule derives, so every model may leave it empty
                    ar = idb[a.pred] = len(a.args)
                if ar != len(a.args):
                    raise ValidationError(f"{a.pred} used with arity {len(a.args)}, expected {ar}")
        object.__setattr__(self, "idb", idb)

    def goal_rules(self) -> list:
        return [r for r in self.rules if r.head and r.head[0].pred == GOAL]

    def other_rules(self) -> list:
        return [r for r in self.rules if not (r.head and r.head[0].pred == GOAL)]

    def is_edb(self, pred: str) -> bool:
        return pred not in self.idb

    def __str__(self):
        return format_program(self)


def adom_rules(edb: Schema) -> list:
    """``adom(x) <- R(..x..)`` for every EDB relation and position."""
    out = []
    for name, k in edb:
        args = tuple(f"V{i + 1}" for i in range(k))
        for i in range(k):
            out.append(Rule((Atom(ADOM, (args[i],)),), (Atom(name, args),)))
    return out


def make_program(rules, edb: Schema, goal_arity: int | None = None) -> Program:
    """Build a program, expanding the ``adom`` shorthand when it is used but not defined."""
    rules = list(rules)
    if goal_arity is None:
        arities = {len(a.args) for r in rules for a in r.head if a.pred == GOAL}
        goal_arity = arities.pop() if len(arities) == 1 else 0
    uses = any(a.pred == ADOM for r in rules for a in r.body)
    defines = any(a.pred == ADOM for r in rules for a in r.head)
    if uses and not defines:
        rules += adom_rules(edb)
    return Program(tuple(rules), edb, goal_arity)


def parse_program(text: str, edb: Schema | None = None) -> Program:
    """Rules ``h1(X) ; h2(Y) :- b1(X,Y), b2(Y).``; an optional ``schema`` line
    declares EDB relations (a ``goal/k`` entry there fixes the goal arity)."""
    lx = Lexer(text, keep_newlines=True)
    declared = []
    goal_arity = None
    rules = []
    while not lx.at_end():
        if lx.at("\n"):
            lx.next()
            continue
        if lx.at("schema"):
            t = lx.next()
            while not lx.at_end() and not lx.at("\n"):
                name = lx.name()
                lx.expect("/")
                num = lx.next()
                if num.kind != "num":
                    raise ParseError("expected arity", num.line, num.col)
                if name == GOAL:
                    goal_arity = int(num.value)
                else:
                    declared.append((name, int(num.value)))
            continue
        start = lx.peek()
        head = _atoms(lx, sep=";", stop=":-")
        lx.expect(":-")
        body = _atoms(lx, sep=",", stop=".")
        lx.expect(".")
        if not body:
            raise ParseError("rule body must not be empty", start.line, start.col)
        if head == [Atom("bot", ())]:
            head = []
        rules.append((Rule(tuple(head), tuple(body)), start))
    heads = {a.pred for r, _ in rules for a in r.head}
    arities = dict(declared)
    if edb is not None:
        arities.update(edb.relations)
    for r, t in rules:
        for a in r.body:
            if a.pred in heads or a.pred in (GOAL, ADOM):
                continue
            if arities.setdefault(a.pred, len(a.args)) != len(a.args):
                raise ParseError(f"{a.pred} used with arity {len(a.args)}, expected {arities[a.pred]}",
                                 t.line, t.col)
    for r, t in rules:
        for a in r.head:
            if a.pred in arities:
                raise ParseError(f"{a.pred} is declared EDB but occurs in a head", t.line, t.col)
    try:
        return make_program([r for r, _ in rules], Schema(tuple(arities.items())), goal_arity)
    except ValidationError as exc:
        bad = next((t for r, t in rules if str(r) in str(exc)), None)
        raise ParseError(str(exc), bad.line if bad else None) from None


def _atoms(lx: Lexer, sep: str, stop: str) -> list:
    out = []
    while True:
        t = lx.peek()
        if t is None or t.value == "\n":
            raise lx.error(f"expected {stop!r}")
        pred = lx.name()
        out.append(Atom(pred, parse_atom_args(lx)))
        while lx.at("\n"):
            lx.next()
        if lx.at(sep):
            lx.next()
            while lx.at("\n"):
                lx.next()
            continue
        return out


def format_program(program: Program, header: str | None = None) -> str:
    lines = [f"# {header}"] if header else []
    rels = list(program.edb.relations)
    if not program.goal_rules() and program.goal_arity:
        rels.append((GOAL, program.goal_arity))
    if rels:
        lines.append("schema " + " ".join(f"{n}/{a}" for n, a in rels))
    lines += [str(r) for r in program.rules]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# classification


def _connected(atoms) -> bool:
    vars_ = {v for a in atoms for v in a.args}
    if len(vars_) <= 1:
        return True
    parent = {v: v for v in vars_}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for a in atoms:
        for v in a.args[1:]:
            parent[find(v)] = find(a.args[0])
    return len({find(v) for v in vars_}) == 1


def classify(program: Program) -> dict:
    monadic = all(a <= 1 for n, a in program.idb.items() if n != GOAL)
    simple = True
    connected = True
    fg = True
    guarded = True
    for r in program.rules:
        # unary EDB atoms do not count, they only label variables
        edb_atoms = [a for a in r.body if program.is_edb(a.pred) and len(a.args) > 1]
        if len(edb_atoms) > 1 or any(len(set(a.args)) != len(a.args) for a in edb_atoms):
            simple = False
        if not _connected(r.body):
            connected = False
        all_vars = r.variables()
        if not any(set(a.args) >= all_vars for a in r.body):
            guarded = False
        # goal rules are exempt so that every MDDlog program is frontier-guarded
        if r.head and r.head[0].pred != GOAL:
            for h in r.head:
                if not any(set(b.args) >= set(h.args) for b in r.body):
                    fg = False
    return {"monadic": monadic, "simple": simple, "connected": connected,
            "frontierGuarded": fg, "guarded": guarded}


# --------------------------------------------------------------------------
# evaluation


def _skeletons(program: Program) -> list:
    """Rules grouped by everything except their IDB predicate names."""
    cached = program.__dict__.get("_skel")
    if cached is not None:
        return cached
    groups: dict = {}
    for r in program.rules:
        edb = tuple(a for a in r.body if program.is_edb(a.pred))
        idb_body = tuple(a for a in r.body if not program.is_edb(a.pred))
        key = (edb, tuple(a.args for a in idb_body), tuple(a.args for a in r.head))
        groups.setdefault(key, []).append((tuple(a.pred for a in idb_body),
                                           tuple(a.pred for a in r.head)))
    out = []
    for (edb, body_args, head_args), preds in groups.items():
        vars_ = sorted({v for args in body_args for v in args} | {v for a in edb for v in a.args})
        body_preds = [sorted({bp[j] for bp, _ in preds}) for j in range(len(body_args))]
        head_preds = [sorted({hp[j] for _, hp in preds}) for j in range(len(head_args))]
        out.append((edb, body_args, head_args, vars_, preds, body_preds, head_preds))
    object.__setattr__(program, "_skel", out)
    return out


def _matches(edb, vars_, data: Instance, adom):
    """Assignments satisfying the EDB atoms; other variables range over adom."""
    edb_vars = sorted({v for a in edb for v in a.args})
    rest = [v for v in vars_ if v not in edb_vars]
    base = cq_matches(CQ(tuple(edb_vars), edb), data.relation, adom) if edb else [{}]
    for asg in base:
        if not rest:
            yield asg
            continue
        for vals in product(adom, repeat=len(rest)):
            full = dict(asg)
            full.update(zip(rest, vals))
            yield full


def ground(program: Program, data: Instance) -> _sat.ClauseSet:
    """Ground ``program`` over ``data``: EDB atoms are resolved against the facts and
    variables that occur only in IDB atoms range over adom(data).

    Rules that differ only in their IDB predicate names share one join.
    """
    cs = _sat.ClauseSet()
    adom = sorted(data.adom)
    atom = cs.atom
    bodies, heads = cs.bodies, cs.heads
    for edb, body_args, head_args, vars_, preds, body_preds, head_preds in _skeletons(program):
        for asg in _matches(edb, vars_, data, adom):
            bgs = [tuple(asg[v] for v in args) for args in body_args]
            hgs = [tuple(asg[v] for v in args) for args in head_args]
            bids = [{p: atom((p, g)) for p in body_preds[j]} for j, g in enumerate(bgs)]
            hids = [{p: atom((p, g)) for p in head_preds[j]} for j, g in enumerate(hgs)]
            # distinct ground arguments rule out repeated atoms and tautologies
            if len(set(bgs + hgs)) == len(bgs) + len(hgs):
                for bp, hp in preds:
                    bodies.append(tuple(bids[j][p] for j, p in enumerate(bp)))
                    heads.append(tuple(hids[j][p] for j, p in enumerate(hp)))
            else:
                for bp, hp in preds:
                    cs.add([bids[j][p] for j, p in enumerate(bp)], [hids[j][p] for j, p in enumerate(hp)])
    return cs


def eval_bruteforce(program: Program, data: Instance, method: str = "search",
                    max_models: int = DEFAULT_MAX_MODELS,
                    max_nodes: int = _sat.DEFAULT_MAX_NODES) -> list:
    """Certain answers of ``program`` on ``data`` (sorted tuples).

    IDB facts range over adom(data).  ``method="search"`` runs model search and
    tests each candidate answer by looking for a model that avoids it;
    ``method="enumerate"`` literally enumerates all IDB assignments and
    intersects the goal relations of the models, within ``max_models``.
    The empty instance has no answers, Boolean or not.
    """
    for name, k in data.schema:
        ar = program.edb.arity(name)
        if ar is not None and ar != k:
            raise ValidationError(f"instance uses {name}/{k}, program expects {name}/{ar}")
    if not data.adom:
        return []
    adom = sorted(data.adom)
    k = program.goal_arity
    everything = [tuple(t) for t in product(adom, repeat=k)]
    cs = ground(program, data)
    if method == "enumerate":
        atoms = []
        for name, ar in sorted(program.idb.items()):
            for args in product(adom, repeat=ar):
                atoms.append(cs.atom((name, args)))
        answers = None
        for model in _sat.enumerate_models(cs, atoms, max_models):
            goals = {cs.keys[a][1] for a in model if cs.keys[a][0] == GOAL}
            answers = goals if answers is None else answers & goals
            if not answers:
                break
        return everything if answers is None else sorted(answers)
    if method != "search":
        raise ValueError(f"unknown method {method!r}")
    model = _sat.search(cs, max_nodes=max_nodes)
    if model is None:
        return everything
    candidates = {cs.keys[a][1] for a in model if cs.keys[a][0] == GOAL}
    answers = []
    for t in sorted(candidates):
        if t not in candidates:
            continue
        other = _sat.search(cs, false_atoms=[cs.index[(GOAL, t)]], max_nodes=max_nodes)
        if other is None:
            answers.append(t)
        else:
            candidates &= {cs.keys[a][1] for a in other if cs.keys[a][0] == GOAL}
    return sorted(answers)
