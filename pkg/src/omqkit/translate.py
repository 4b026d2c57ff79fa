"""Compilers between OMQs, disjunctive datalog and the MSNP logics."""

from __future__ import annotations

from itertools import permutations, product

from . import dl
from .core import (Atom, CQ, Eq, Instance, Schema, SizeBoundError, UCQ,
                   UnsupportedError, ValidationError, eval_ucq)
from .ddlog import ADOM, GOAL, Program, Rule, classify, make_program
from .dl import (AQ, BAQ, ConQ, Exists, Name, Not, OmqQuery, Ontology, TOP, BOT,
                 UNIV, UCQQuery, conj)
from .msnp import (FACTSET, FactAtom, Implication, MsnpFormula, _guard_family,
                   _guarded, _rename, _unify, _vars, check_guarded, normalize_msnp)

DEFAULT_MAX_RULES = 20000
DEFAULT_MAX_COMPLETIONS = 2 ** 20


# --------------------------------------------------------------------------
# OMQ with atomic query -> MDDlog


class TypeLayout:
    """The realizable types of an AQ/BAQ OMQ together with their profiles.

    ``groups`` lists the type sets that may co-occur in one model (one per
    universal-role profile; a single group without the universal role).
    ``goal_types`` are the types that force the query: containing the query
    concept for an AQ, not realizable in a query-free model for a BAQ.
    """

    def __init__(self, omq: OmqQuery):
        if isinstance(omq.query, ConQ):
            omq = dl.conq_to_aq(omq)
        if not isinstance(omq.query, (AQ, BAQ)):
            raise UnsupportedError("only AQ, BAQ and ConQ queries compile to MDDlog")
        self.omq = omq
        self.boolean = isinstance(omq.query, BAQ)
        goal_name = omq.query.name
        extra = [Name(goal_name)] + [Name(n) for n in omq.schema.unary()]
        cl = dl._closure_for(omq.ontology, extra)
        self.closure = cl.closure
        self.cl = cl
        abit = 1 << cl.index[Name(goal_name)]
        coherent = cl.coherent_types()
        univ = cl.exists.get(UNIV, [])
        umask = sum(ex for ex, _ in univ)
        groups, goal = [], set()
        for flags in product((0, 1), repeat=len(univ)):
            prof = sum(ex for f, (ex, _) in zip(flags, univ) if f)
            banned = 0
            for f, (_, arg) in zip(flags, univ):
                if not f:
                    banned |= arg
            alive = self._valid(cl.eliminate([t for t in coherent
                                              if t & umask == prof and not t & banned]), flags, univ)
            if not alive:
                continue
            groups.append(frozenset(alive))
            if self.boolean:
                free = self._valid(cl.eliminate([t for t in alive if not t & abit]), flags, univ)
                goal |= {t for t in alive if t not in free}
            else:
                goal |= {t for t in alive if t & abit}
        self.groups = groups
        self.types = sorted(set().union(*groups)) if groups else []
        self.goal_types = goal
        self.names = {t: f"P_t{i}" for i, t in enumerate(self.types)}

    @staticmethod
    def _valid(alive, flags, univ):
        if any(f and not any(t & arg for t in alive) for f, (_, arg) in zip(flags, univ)):
            return set()
        return alive

    def label_names(self, type_: int) -> list:
        return [c.name for c in dl.TypeSet(self.closure, ()).members(type_) if isinstance(c, Name)]


def aq_omq_to_mddlog(omq: OmqQuery) -> Program:
    lay = TypeLayout(omq)
    omq = lay.omq
    cl = lay.cl
    x, y = "x", "y"
    type_atom = lambda t, v: Atom(lay.names[t], (v,))  # noqa: E731
    rules = [Rule(tuple(type_atom(t, x) for t in lay.types), (Atom(ADOM, (x,)),))]
    types = lay.types
    for i, t1 in enumerate(types):
        for t2 in types[i + 1:]:
            rules.append(Rule((), (type_atom(t1, x), type_atom(t2, x))))
    for t in types:
        for label in omq.schema.unary():
            if not t >> cl.index[Name(label)] & 1:
                rules.append(Rule((), (type_atom(t, x), Atom(label, (x,)))))
    for role in omq.schema.binary():
        reqs = {t: cl.required(t, role) for t in types}
        for t1 in types:
            for t2 in types:
                r = reqs[t2]
                if t1 & r != r:
                    rules.append(Rule((), (type_atom(t1, x), Atom(role, (x, y)), type_atom(t2, y))))
    if len(lay.groups) > 1:
        owner = {t: i for i, g in enumerate(lay.groups) for t in g}
        for t1 in types:
            for t2 in types:
                if owner[t1] != owner[t2]:
                    rules.append(Rule((), (type_atom(t1, "x1"), type_atom(t2, "x2"))))
    goal_args = () if lay.boolean else (x,)
    for t in types:
        if t in lay.goal_types:
            rules.append(Rule((Atom(GOAL, goal_args),), (type_atom(t, x),)))
    return make_program(rules, omq.schema, len(goal_args))


# --------------------------------------------------------------------------
# MDDlog -> OMQ with atomic query

VARIANTS = ("unary-connected-simple", "unary-simple", "boolean-connected-simple", "boolean-simple")


def _lits(atoms, heads_neg) -> dl.Concept:
    items = [Name(a.pred) for a in atoms] + [Not(Name(h)) for h in heads_neg]
    return conj(items) if items else TOP


def rule_to_inclusion(r: Rule, program: Program):
    edb = [a for a in r.body if program.is_edb(a.pred)]
    edb.sort(key=lambda a: -len(a.args))
    head_vars = [v for h in r.head for v in h.args]
    if edb and len(edb[0].args) > 1:
        root = edb[0].args[0]
    elif head_vars:
        root = head_vars[0]
    else:
        anchor = edb[0] if edb else r.body[0]
        root = anchor.args[0] if anchor.args else None
    if root is None:
        raise UnsupportedError(f"rule without a variable-bearing atom: {r}")
    heads = []
    for h in r.head:
        if h.pred == GOAL and not h.args:
            heads.append((root, GOAL))
        elif len(h.args) == 1:
            heads.append((h.args[0], h.pred))
        else:
            raise UnsupportedError(f"head atom {h} is not unary")
    rhs, rest = BOT, heads
    for i, (v, p) in enumerate(heads):
        if v == root:
            rhs, rest = Name(p), heads[:i] + heads[i + 1:]
            break
    unary = {}
    for a in r.body:
        if len(a.args) == 1:
            unary.setdefault(a.args[0], []).append(a)
        elif len(a.args) == 0:
            raise UnsupportedError(f"0-ary body atom {a} has no concept counterpart")
        elif len(a.args) > 2 or not program.is_edb(a.pred):
            raise UnsupportedError(f"atom {a} is not unary or a binary EDB atom")
    neg = {}
    for v, p in rest:
        neg.setdefault(v, []).append(p)
    binary = [a for a in r.body if len(a.args) == 2]
    parts = [_lits(unary.get(root, []), neg.get(root, []))]
    done = {root}
    for a in binary:
        u, w = a.args
        if u != root or w == root:
            raise UnsupportedError(f"binary atom {a} must connect the root to a second variable")
        parts.append(Exists(a.pred, _lits(unary.get(w, []), neg.get(w, []))))
        done.add(w)
    variables = list(dict.fromkeys(v for a in r.body for v in a.args))
    for v in variables:
        if v not in done:
            parts.append(Exists(UNIV, _lits(unary.get(v, []), neg.get(v, []))))
    lhs = conj([p for p in parts if p != TOP]) if any(p != TOP for p in parts) else TOP
    return lhs, rhs


def mddlog_to_aq_omq(program: Program, variant: str | None = None) -> OmqQuery:
    flags = classify(program)
    k = program.goal_arity
    if variant is None:
        variant = ("unary" if k == 1 else "boolean") + ("-connected" if flags["connected"] else "") + "-simple"
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant}")
    want_k = 1 if variant.startswith("unary") else 0
    problems = []
    if k != want_k:
        problems.append(f"goal arity is {k}")
    if not flags["monadic"]:
        problems.append("not monadic")
    if not flags["simple"]:
        problems.append("not simple")
    if "connected" in variant and not flags["connected"]:
        problems.append("not connected")
    if any(a > 2 for _, a in program.edb):
        problems.append("EDB schema is not binary")
    if any(a == 0 for n, a in program.idb.items() if n != GOAL):
        problems.append("0-ary IDB predicates")
    if problems:
        raise ValidationError(f"program is not {variant}: " + ", ".join(problems))
    bad = (set(program.idb) | set(program.edb.names)) & dl.KEYWORDS
    if bad:
        raise UnsupportedError(f"predicate names {sorted(bad)} are reserved in the ontology syntax")
    incs = tuple(rule_to_inclusion(r, program) for r in program.rules)
    query = AQ(GOAL) if want_k else BAQ(GOAL)
    return OmqQuery(program.edb, Ontology(incs), query)


# --------------------------------------------------------------------------
# MDDlog -> (ALC, UCQ) and its test oracle


def _abar(name: str, taken: set) -> str:
    return dl.fresh_name(f"Abar_{name}", taken)


def mddlog_to_ucq_omq(program: Program) -> OmqQuery:
    if not classify(program)["monadic"]:
        raise ValidationError("program is not monadic")
    if any(a == 0 for n, a in program.idb.items() if n != GOAL):
        raise UnsupportedError("0-ary IDB predicates have no complement concept")
    taken = set(program.idb) | set(program.edb.names)
    bars = {}
    for n in sorted(program.idb):
        if n != GOAL:
            bars[n] = _abar(n, taken)
            taken.add(bars[n])
    incs = []
    for n, b in bars.items():
        pos, neg = Name(n), Name(b)
        incs.append((TOP, dl.And(dl.Or(pos, neg), Not(dl.And(pos, neg)))))
    k = program.goal_arity
    answer = tuple(f"z{i + 1}" for i in range(k))
    disjuncts = []
    for r in program.rules:
        if r.head and r.head[0].pred == GOAL:
            disjuncts.append(CQ(r.head[0].args, r.body))
            continue
        body = tuple(r.body) + tuple(Atom(bars[h.pred], h.args) for h in r.head)
        if k == 0:
            disjuncts.append(CQ((), body))
            continue
        # a violated rule makes every tuple an answer; bind each answer
        # variable by some EDB atom so the disjunct stays domain independent
        options = []
        for z in answer:
            opts = []
            for rel, ar in program.edb:
                for pos in range(ar):
                    opts.append(Atom(rel, tuple(z if i == pos else f"{z}_{i}" for i in range(ar))))
            options.append(opts)
        for choice in product(*options):
            disjuncts.append(CQ(answer, body + tuple(choice)))
    ucq = UCQ(tuple(disjuncts))
    schema = program.edb
    return OmqQuery(schema, Ontology(tuple(incs)), UCQQuery(ucq))


def complement_pairs(ontology: Ontology) -> list:
    pairs = []
    for lhs, rhs in ontology.inclusions:
        ok = (lhs == TOP and isinstance(rhs, dl.And) and isinstance(rhs.left, dl.Or)
              and isinstance(rhs.right, Not) and isinstance(rhs.right.arg, dl.And)
              and isinstance(rhs.left.left, Name) and isinstance(rhs.left.right, Name)
              and rhs.right.arg == dl.And(rhs.left.left, rhs.left.right))
        if not ok:
            raise ValidationError(f"not a complement axiom: {lhs} sub {rhs}")
        pairs.append((rhs.left.left.name, rhs.left.right.name))
    return pairs


def adversarial_complement_eval(omq: OmqQuery, data: Instance,
                                max_completions: int = DEFAULT_MAX_COMPLETIONS) -> list:
    """Tuples matched by the UCQ under every way of splitting adom(data) into
    each complemented pair."""
    if not isinstance(omq.query, UCQQuery):
        raise ValidationError("expected a UCQ query")
    pairs = complement_pairs(omq.ontology)
    adom = sorted(data.adom)
    if not adom:
        return []
    slots = [(p, a) for p in pairs for a in adom]
    if 2 ** len(slots) > max_completions:
        raise SizeBoundError(f"{2 ** len(slots)} completions exceed the bound {max_completions}")
    answers = None
    extended_schema = data.schema.union(Schema(tuple((n, 1) for p in pairs for n in p)))
    for bits in product((0, 1), repeat=len(slots)):
        facts = set(data.facts)
        for ((pos, neg), a), b in zip(slots, bits):
            facts.add(Atom(pos if b else neg, (a,)))
        got = set(eval_ucq(omq.query.ucq, Instance(frozenset(facts), extended_schema)))
        answers = got if answers is None else answers & got
        if not answers:
            return []
    return sorted(answers)


# --------------------------------------------------------------------------
# MDDlog / frontier-guarded DDlog <-> coMMSNP / coGMSNP


def _free_names(k: int, taken: set) -> tuple:
    out = []
    for i in range(k):
        name = f"y{i + 1}"
        while name in taken:
            name += "_"
        out.append(name)
    return tuple(out)


def program_to_msnp(program: Program, dialect: str = "mmsnp") -> MsnpFormula:
    flags = classify(program)
    if dialect == "mmsnp":
        if not flags["monadic"] or any(a != 1 for n, a in program.idb.items() if n != GOAL):
            raise ValidationError("MMSNP needs unary IDB predicates")
    elif dialect == "gmsnp":
        if not flags["frontierGuarded"]:
            raise ValidationError("program is not frontier-guarded")
    else:
        raise ValidationError(f"cannot translate a program into {dialect}")
    taken = {v for r in program.rules for v in r.variables()}
    ys = _free_names(program.goal_arity, taken)
    sovars = tuple((n, a) for n, a in sorted(program.idb.items()) if n != GOAL)
    matrix = []
    for r in program.rules:
        if r.head and r.head[0].pred == GOAL:
            args = r.head[0].args
            first = {}
            for i, v in enumerate(args):
                first.setdefault(v, i)
            sub = {v: ys[i] for v, i in first.items()}
            body = [Atom(a.pred, tuple(sub.get(v, v) for v in a.args)) for a in r.body]
            for i, v in enumerate(args):
                if first[v] != i:
                    body.append(Eq(ys[first[v]], ys[i]))
            matrix.append(Implication(tuple(body), ()))
        else:
            matrix.append(Implication(r.body, r.head))
    return MsnpFormula(dialect, program.edb, sovars, ys, tuple(matrix))


def _derivable(matrix, so_names: set) -> list:
    """Drop implications using an SO variable that no head can make true;
    interpreting such a variable as empty satisfies them vacuously."""
    imps = list(matrix)
    while True:
        headed = {a.pred for i in imps for a in i.head}
        keep = [i for i in imps if all(not isinstance(a, Atom) or a.pred not in so_names
                                       or a.pred in headed for a in i.body)]
        if len(keep) == len(imps):
            return keep
        imps = keep


def _rename_reserved(formula: MsnpFormula) -> MsnpFormula:
    """SO variables called goal or adom would clash with the program's own."""
    names = {n for n, _ in formula.sovars}
    clash = names & {GOAL, ADOM}
    if not clash:
        return formula
    taken = names | set(formula.schema.names) | {GOAL, ADOM}
    ren = {n: _fresh(f"{n}_so", taken) for n in sorted(clash)}

    def sub(atoms):
        return tuple(Atom(ren.get(a.pred, a.pred), a.args) if isinstance(a, Atom) else a for a in atoms)

    matrix = tuple(Implication(sub(i.body), sub(i.head)) for i in formula.matrix)
    sovars = tuple((ren.get(n, n), k) for n, k in formula.sovars)
    return MsnpFormula(formula.dialect, formula.schema, sovars, formula.freevars, matrix)


def msnp_to_program(formula: MsnpFormula) -> Program:
    if formula.dialect not in ("mmsnp", "gmsnp"):
        raise ValidationError("expected an MMSNP or GMSNP formula")
    formula = _rename_reserved(formula)
    names = {n for n, _ in formula.sovars}
    norm = normalize_msnp(formula)
    free = set(norm.freevars)
    rules = []
    for imp in _derivable(norm.matrix, names):
        if imp.head:
            if free & set(imp.variables()):
                raise UnsupportedError(f"free variable in an implication with a non-empty head: {imp}")
            rules.append(Rule(imp.head, imp.body))
            continue
        parent = {}

        def find(v):
            while parent.get(v, v) != v:
                v = parent[v]
            return v

        for a in imp.body:
            if isinstance(a, Eq):
                parent[find(a.right)] = find(a.left)
        body = []
        for a in imp.body:
            if not isinstance(a, Eq):
                b = Atom(a.pred, tuple(find(v) for v in a.args))
                if b not in body:
                    body.append(b)
        head_args = tuple(find(y) for y in norm.freevars)
        for y in dict.fromkeys(head_args):
            body.append(Atom(ADOM, (y,)))
        rules.append(Rule((Atom(GOAL, head_args),), tuple(body)))
    return make_program(rules, norm.schema, len(norm.freevars))


def mddlog_to_commsnp(program: Program) -> MsnpFormula:
    return program_to_msnp(program, "mmsnp")


def commsnp_to_mddlog(formula: MsnpFormula) -> Program:
    if formula.dialect != "mmsnp":
        raise ValidationError("expected an MMSNP formula")
    return msnp_to_program(formula)


def gmsnp_fgddlog(source, direction: str = "auto"):
    """``direction`` is ``to-program``, ``to-gmsnp`` or ``auto`` (by input type)."""
    if direction == "auto":
        direction = "to-program" if isinstance(source, MsnpFormula) else "to-gmsnp"
    if direction == "to-program":
        if not isinstance(source, MsnpFormula) or source.dialect not in ("gmsnp", "mmsnp"):
            raise ValidationError("expected a GMSNP formula")
        if not check_guarded(source) and source.dialect == "gmsnp":
            raise ValidationError("formula is not guarded")
        return msnp_to_program(source)
    if direction == "to-gmsnp":
        if not isinstance(source, Program):
            raise ValidationError("expected a program")
        return program_to_msnp(source, "gmsnp")
    raise ValueError(f"unknown direction {direction!r}")


# --------------------------------------------------------------------------
# GMSNP <-> MMSNP2


def _fresh(base: str, taken: set) -> str:
    name = dl.fresh_name(base, taken)
    taken.add(name)
    return name


def mmsnp2_to_gmsnp(formula: MsnpFormula) -> MsnpFormula:
    """Split every SO variable into an element part and one part per relation."""
    if formula.dialect != "mmsnp2":
        raise ValidationError("expected an MMSNP2 formula")
    taken = {n for n, _ in formula.sovars} | set(formula.schema.names)
    elem, fact = {}, {}
    sovars = []
    for n, _ in formula.sovars:
        elem[n] = _fresh(f"{n}_1", taken)
        sovars.append((elem[n], 1))
        for rel, k in formula.schema:
            fact[n, rel] = _fresh(f"{n}_{rel}", taken)
            sovars.append((fact[n, rel], k))

    def conv(a):
        if isinstance(a, FactAtom):
            return Atom(fact[a.var, a.rel], a.args)
        if isinstance(a, Atom) and a.pred in elem:
            return Atom(elem[a.pred], a.args)
        return a

    matrix = []
    for imp in formula.matrix:
        new = Implication(tuple(conv(a) for a in imp.body), tuple(conv(a) for a in imp.head))
        if _guarded(new):
            matrix.append(new)
            continue
        # element heads need not be guarded in MMSNP2; cover them by input atoms
        covered = {v for a in imp.body for v in _vars(a)}
        need = list(dict.fromkeys(v for a in imp.head for v in _vars(a) if v not in covered))
        matrix += _guard_family(new, need, formula.schema, set(new.variables()))
    used = {a.pred for imp in matrix for a in imp.body + imp.head if isinstance(a, Atom)}
    sovars = [(n, k) for n, k in sovars if n in used]
    return MsnpFormula("gmsnp", formula.schema, tuple(sovars), formula.freevars, tuple(matrix))


def _set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _canonical(imp: Implication) -> Implication:
    order = {}
    for v in imp.variables():
        order.setdefault(v, f"v{len(order) + 1}")
    return Implication(tuple(_rename(a, order.get) for a in imp.body),
                       tuple(_rename(a, order.get) for a in imp.head))


def _dedupe_atoms(imp: Implication) -> Implication:
    return Implication(tuple(dict.fromkeys(imp.body)), tuple(dict.fromkeys(imp.head)))


def _identification_closure(imps, cap: int) -> list:
    out = {}
    for imp in imps:
        vs = imp.variables()
        for part in _set_partitions(vs):
            rep = {v: block[0] for block in part for v in block}
            new = _canonical(_dedupe_atoms(Implication(
                tuple(_rename(a, rep.get) for a in imp.body),
                tuple(_rename(a, rep.get) for a in imp.head))))
            out.setdefault(new, None)
            if len(out) > cap:
                raise SizeBoundError(f"variable-identification closure exceeds {cap} implications")
    return list(out)


def _input_guard(atom, body, phi_schema) -> Atom | None:
    av = set(atom.args)
    for b in body:
        if isinstance(b, Atom) and b.pred in phi_schema and av <= set(b.args):
            return b
    return None


def _add_input_guards(imp: Implication, schema: Schema, monadic: set) -> list:
    """Family of implications in which every non-monadic head atom has an
    input-relation guard in its own body."""
    options = []
    for h in imp.head:
        if h.pred in monadic or _input_guard(h, imp.body, schema) is not None:
            continue
        hv = list(dict.fromkeys(h.args))
        opts = []
        for rel, k in schema:
            if k < len(hv):
                continue
            for positions in permutations(range(k), len(hv)):
                opts.append((rel, k, dict(zip(positions, hv))))
        options.append(opts)
    if not options:
        return [imp]
    out = []
    taken = set(imp.variables())
    for choice in product(*options):
        extra = []
        local = set(taken)
        for rel, k, placed in choice:
            args = []
            for i in range(k):
                if i in placed:
                    args.append(placed[i])
                else:
                    args.append(_fresh("g", local))
            extra.append(Atom(rel, tuple(args)))
        out.append(Implication(tuple(extra) + imp.body, imp.head))
    return out


def gmsnp_to_mmsnp2(formula: MsnpFormula, max_rules: int = DEFAULT_MAX_RULES) -> MsnpFormula:
    """Replace non-monadic SO variables by fact-set variables, one per head atom."""
    if formula.dialect not in ("gmsnp", "mmsnp"):
        raise ValidationError("expected a GMSNP formula")
    if formula.freevars:
        raise UnsupportedError("the GMSNP to MMSNP2 direction is implemented for sentences only")
    kinds = dict(formula.sovars)
    monadic = {n for n, k in kinds.items() if k == 1}
    schema = formula.schema
    # equalities go first: with no free variables every one can be unified away
    imps = [_unify(i, set()) for i in formula.matrix]
    imps = _identification_closure(imps, max_rules)
    guarded = []
    for imp in imps:
        guarded += _add_input_guards(imp, schema, monadic)
        if len(guarded) > max_rules:
            raise SizeBoundError(f"guarded matrix exceeds {max_rules} implications")
    imps = _identification_closure(guarded, max_rules)
    # rename apart
    apart = []
    for i, imp in enumerate(imps):
        apart.append(Implication(tuple(_rename(a, lambda v, i=i: f"{v}_{i}") for a in imp.body),
                                 tuple(_rename(a, lambda v, i=i: f"{v}_{i}") for a in imp.head)))
    taken = set(kinds) | set(schema.names)
    heads = []  # (so var, args, fact var name, guard)
    head_name = {}
    for i, imp in enumerate(apart):
        for j, h in enumerate(imp.head):
            if h.pred in monadic:
                continue
            g = _input_guard(h, imp.body, schema)
            if g is None:
                raise ValidationError(f"no input guard for head atom {h}")
            name = _fresh(f"X_{len(heads)}", taken)
            heads.append((h.pred, h.args, name, g))
            head_name[i, j] = (name, g)
    by_var = {}
    for entry in heads:
        by_var.setdefault(entry[0], []).append(entry)
    out = []
    for i, imp in enumerate(apart):
        new_head = []
        for j, h in enumerate(imp.head):
            if h.pred in monadic:
                new_head.append(h)
            else:
                name, g = head_name[i, j]
                new_head.append(FactAtom(name, g.pred, g.args))
        fixed_body = [a for a in imp.body if isinstance(a, Eq) or a.pred not in kinds or a.pred in monadic]
        so_body = [a for a in imp.body if isinstance(a, Atom) and a.pred in kinds and a.pred not in monadic]
        choices = []
        for a in so_body:
            opts = []
            for (_, z, name, g) in by_var.get(a.pred, []):
                rho = _bijection(a.args, z)
                if rho is not None:
                    opts.append((name, g, rho))
            choices.append(opts)
        local = set(imp.variables())
        for choice in product(*choices):
            body = list(fixed_body)
            for (name, g, rho), a in zip(choice, so_body):
                inv = {z: x for x, z in rho.items()}
                fresh = {}
                args = []
                for v in g.args:
                    if v in inv:
                        args.append(inv[v])
                    else:
                        if v not in fresh:
                            fresh[v] = _fresh("f", local)
                        args.append(fresh[v])
                body.append(FactAtom(name, g.pred, tuple(args)))
            out.append(Implication(tuple(dict.fromkeys(body)), tuple(new_head)))
            if len(out) > max_rules:
                raise SizeBoundError(f"MMSNP2 matrix exceeds {max_rules} implications")
    sovars = [(n, FACTSET) for n in sorted(monadic)] + [(h[2], FACTSET) for h in heads]
    return MsnpFormula("mmsnp2", schema, tuple(sovars), (), tuple(out))


def _bijection(xs: tuple, zs: tuple) -> dict | None:
    """Componentwise map xs -> zs if it is a bijection on variable sets."""
    fwd, bwd = {}, {}
    for x, z in zip(xs, zs):
        if fwd.setdefault(x, z) != z or bwd.setdefault(z, x) != x:
            return None
    return fwd


def gmsnp_mmsnp2(formula: MsnpFormula, direction: str = "auto", max_rules: int = DEFAULT_MAX_RULES):
    if direction == "auto":
        direction = "to-gmsnp" if formula.dialect == "mmsnp2" else "to-mmsnp2"
    if direction == "to-gmsnp":
        return mmsnp2_to_gmsnp(formula)
    if direction == "to-mmsnp2":
        return gmsnp_to_mmsnp2(formula, max_rules)
    raise ValueError(f"unknown direction {direction!r}")
