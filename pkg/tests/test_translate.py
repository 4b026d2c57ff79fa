import random

import pytest
from hypothesis import given, settings, strategies as st

import gen
from omqkit import csp, ddlog, dl, msnp, translate
from omqkit.core import Atom, Instance, Schema, ValidationError, parse_instance
from omqkit.ddlog import GOAL, Rule, classify, eval_bruteforce, make_program, parse_program
from omqkit.dl import Exists, Name, Not, Top

EDB = Schema((("A", 1), ("B", 1), ("R", 2)))


def test_aq_omq_to_mddlog_examples():
    omq = dl.parse_omq("schema A/1 B/1\naxiom B sub A\nquery aq A\n")
    program = translate.aq_omq_to_mddlog(omq)
    assert eval_bruteforce(program, parse_instance("B(b)")) == [("b",)]
    flags = classify(program)
    assert flags["monadic"] and flags["simple"] and flags["connected"]
    omq = dl.parse_omq("schema A/1 R/2\nquery aq A\n")
    assert eval_bruteforce(translate.aq_omq_to_mddlog(omq), parse_instance("A(a) R(a,b)")) == [("a",)]


def test_aq_omq_to_mddlog_rejects_ucq():
    omq = dl.parse_omq("schema A/1 r/2\nquery ucq (x): r(x,y), A(y)\n")
    with pytest.raises((ValidationError, translate.UnsupportedError)):
        translate.aq_omq_to_mddlog(omq)


def test_mddlog_to_aq_omq_examples():
    omq = translate.mddlog_to_aq_omq(parse_program("goal(X) :- R(X,Y)."))
    assert omq.ontology.inclusions == ((Exists("R", Top()), Name(GOAL)),)
    assert omq.query == dl.AQ(GOAL)
    program = parse_program("schema A/1 B/1 R/2\nP1(X) ; P2(Y) :- R(X,Y), A(X), B(Y).\ngoal(X) :- P1(X).")
    lhs, rhs = translate.mddlog_to_aq_omq(program).ontology.inclusions[0]
    assert rhs == Name("P1")
    assert lhs == dl.And(Name("A"), Exists("R", dl.And(Name("B"), Not(Name("P2")))))
    program = parse_program("goal(X) :- adom(X), A(Y).", Schema((("A", 1), ("R", 2))))
    with pytest.raises(ValidationError):
        translate.mddlog_to_aq_omq(program, "unary-connected-simple")
    omq = translate.mddlog_to_aq_omq(program, "unary-simple")
    assert Exists(dl.UNIV, Name("A")) in dl.subconcepts(omq.ontology.inclusions[0][0])


def random_simple_program(rng, connected):
    """Unary programs with one binary EDB atom at most, plus unary labels."""
    while True:
        rules = []
        for i in range(rng.randint(1, 3)):
            body = []
            vars_ = ["x"]
            if rng.random() < 0.6:
                body.append(Atom("R", ("x", "y") if rng.random() < 0.7 else ("y", "x")))
                vars_.append("y")
            elif not connected and rng.random() < 0.4:
                vars_.append("y")
            for v in vars_:
                for _ in range(rng.randint(0, 2)):
                    body.append(Atom(rng.choice(["A", "B", "P", "Q"]), (v,)))
                if not any(v in a.args for a in body):
                    body.append(Atom(rng.choice(["A", "P"]), (v,)))
            body = list(dict.fromkeys(body))
            if i == 0 or rng.random() < 0.3:
                head = (Atom(GOAL, (rng.choice(vars_),)),)
            else:
                head = tuple(dict.fromkeys(Atom(rng.choice("PQ"), (rng.choice(vars_),))
                                           for _ in range(rng.randint(0, 2))))
            rules.append(Rule(head, tuple(body)))
        program = make_program(rules, EDB, 1)
        flags = classify(program)
        if flags["simple"] and (flags["connected"] or not connected):
            return program


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), connected=st.booleans())
def test_simple_programs_round_trip_through_ontologies(seed, connected):
    rng = random.Random(seed)
    program = random_simple_program(rng, connected)
    omq = translate.mddlog_to_aq_omq(program)
    if classify(program)["connected"]:
        assert omq.ontology.dialect == "ALC"
    family = csp.aq_omq_to_templates(omq)
    for _ in range(4):
        data = gen.random_instance(rng, EDB, rng.randint(1, 3))
        assert csp.eval_cocsp(family, data) == eval_bruteforce(program, data), (str(program), sorted(data.facts))


def test_mddlog_to_ucq_omq_examples():
    one_fact = parse_instance("A(a)")
    omq = translate.mddlog_to_ucq_omq(parse_program("goal(X) :- A(X)."))
    assert omq.ontology.inclusions == () and len(omq.query.ucq.disjuncts) == 1
    assert translate.adversarial_complement_eval(omq, one_fact) == [("a",)]
    omq = translate.mddlog_to_ucq_omq(parse_program("P(X) :- A(X).\ngoal(X) :- P(X)."))
    assert len(translate.complement_pairs(omq.ontology)) == 1
    preds = [{a.pred for a in d.atoms} for d in omq.query.ucq.disjuncts]
    assert {"A", "Abar_P"} in preds and {"P"} in preds
    assert translate.adversarial_complement_eval(omq, one_fact) == [("a",)]
    assert translate.adversarial_complement_eval(omq, Instance()) == []
    omq = translate.mddlog_to_ucq_omq(parse_program("bot :- R(X,X).\ngoal(X) :- A(X)."))
    loops = [d for d in omq.query.ucq.disjuncts if Atom("R", ("X", "X")) in d.atoms]
    assert loops and not any(a.pred.startswith("Abar") for d in loops for a in d.atoms)


def test_mddlog_to_ucq_omq_rejects_non_monadic():
    with pytest.raises(ValidationError):
        translate.mddlog_to_ucq_omq(parse_program("P(X,Y) :- R(X,Y).\ngoal(X) :- P(X,X)."))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), boolean=st.booleans())
def test_ucq_omq_agrees_with_program(seed, boolean):
    rng = random.Random(seed)
    program = gen.random_mddlog(rng, goal_arity=0 if boolean else 1, edb=(("A", 1), ("R", 2)))
    omq = translate.mddlog_to_ucq_omq(program)
    for _ in range(4):
        data = gen.random_instance(rng, program.edb, rng.randint(1, 3))
        assert translate.adversarial_complement_eval(omq, data) == eval_bruteforce(program, data)


def test_commsnp_examples():
    formula = translate.mddlog_to_commsnp(parse_program("goal(X) :- A(X)."))
    assert formula.freevars == ("y1",) and formula.sovars == ()
    assert formula.matrix == (msnp.Implication((Atom("A", ("y1",)),), ()),)
    program = parse_program("goal(X,X) :- R(X,X).")
    formula = translate.mddlog_to_commsnp(program)
    (imp,) = formula.matrix
    assert any(isinstance(a, type(imp.body[-1])) and hasattr(a, "left") for a in imp.body)
    for data in gen.instances(Schema((("R", 2),)), 2):
        assert msnp.eval_msnp(formula, data) == eval_bruteforce(program, data)
    formula = translate.mddlog_to_commsnp(parse_program("P(X) ; Q(X) :- A(X).\ngoal(X) :- P(X)."))
    assert msnp.Implication((Atom("A", ("X",)),), (Atom("P", ("X",)), Atom("Q", ("X",)))) in formula.matrix


def test_commsnp_to_mddlog_examples():
    formula = msnp.parse_msnp("msnp mmsnp\nschema A/1\nfreevar y1\nimp A(y1) -> false\n")
    program = translate.commsnp_to_mddlog(formula)
    assert "goal(y1) :- A(y1), adom(y1)." in ddlog.format_program(program)
    formula = msnp.parse_msnp("msnp mmsnp\nschema E/2\nsovar X monadic\n"
                          "imp E(x,y), X(x), X(y) -> false\nimp E(x,y) -> X(x) ; X(y)\n")
    program = translate.commsnp_to_mddlog(formula)
    assert [len(r.head) for r in program.other_rules() if r.head[0].pred != "adom"] == [2]
    for data in gen.instances(Schema((("E", 2),)), 3):
        assert eval_bruteforce(program, data) == msnp.eval_msnp(formula, data)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_commsnp_round_trip(seed):
    rng = random.Random(seed)
    program = gen.random_mddlog(rng)
    back = translate.commsnp_to_mddlog(translate.mddlog_to_commsnp(program))
    for _ in range(4):
        data = gen.random_instance(rng, program.edb, rng.randint(1, 3))
        assert eval_bruteforce(back, data) == eval_bruteforce(program, data)


def test_gmsnp_fgddlog_examples():
    formula = msnp.parse_msnp("msnp gmsnp\nschema E/2\nsovar Y rel/2\n"
                          "imp E(x,y) -> Y(x,y) ; Y(y,x)\nimp E(x,y), Y(x,y), Y(y,x) -> false\n")
    program = translate.gmsnp_fgddlog(formula)
    assert classify(program)["frontierGuarded"]
    back = translate.gmsnp_fgddlog(program)
    assert back.dialect == "gmsnp"
    for data in gen.instances(Schema((("E", 2),)), 3):
        want = msnp.eval_msnp(formula, data)
        assert eval_bruteforce(program, data) == want == msnp.eval_msnp(back, data)
    empty = msnp.MsnpFormula("gmsnp", Schema((("E", 2),)), (), (), ())
    program = translate.gmsnp_fgddlog(empty)
    assert eval_bruteforce(program, parse_instance("E(a,b)")) == []


def test_gmsnp_mmsnp2_examples():
    formula = msnp.parse_msnp("msnp mmsnp2\nschema E/2\nsovar X factset\n"
                          "imp E(x,y) -> X(E(x,y)) ; X(x)\nimp E(x,y), X(E(x,y)), X(x) -> false\n")
    g = translate.gmsnp_mmsnp2(formula)
    assert g.dialect == "gmsnp" and any(k == 2 for _, k in g.sovars)
    m = msnp.parse_msnp("msnp gmsnp\nschema E/2\nsovar X rel/1\n"
                        "imp E(x,y) -> X(x) ; X(y)\nimp E(x,y), X(x), X(y) -> false\n")
    m2 = translate.gmsnp_mmsnp2(m)
    assert m2.dialect == "mmsnp2"
    for data in gen.instances(Schema((("E", 2),)), 3):
        assert msnp.eval_msnp(g, data) == msnp.eval_msnp(formula, data)
        assert msnp.eval_msnp(m2, data) == msnp.eval_msnp(m, data)
    empty = msnp.MsnpFormula("mmsnp2", Schema((("E", 2),)), (), (), ())
    assert msnp.eval_msnp(translate.gmsnp_mmsnp2(empty), parse_instance("E(a,a)")) == []
