import random
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

import gen
from omqkit import csp, dl
from omqkit.core import Atom, ParseError, RelStructure, Schema, ValidationError
from omqkit.dl import AQ, And, Bot, ConQ, Exists, Forall, Name, Not, Or, Top


def test_parse_ontology_examples():
    ontology = dl.parse_ontology("exists parent.HD sub HD")
    assert ontology.inclusions == ((Exists("parent", Name("HD")), Name("HD")),)
    assert dl.parse_ontology("top sub top").inclusions == ((Top(), Top()),)
    lhs, rhs = dl.parse_ontology("(A or B) sub C").inclusions[0]
    assert lhs == Or(Name("A"), Name("B")) and rhs == Name("C")


def test_parse_errors():
    with pytest.raises(ParseError):
        dl.parse_ontology("A sub")
    with pytest.raises(ParseError):
        dl.parse_ontology("exists univ.A sub B", dialect="ALC")
    with pytest.raises(ValidationError):
        dl.Ontology(((Exists(dl.UNIV, Name("A")), Name("B")),), "ALC")
    assert dl.parse_ontology("exists univ.A sub B").dialect == "ALCU"


def test_constructors_are_distinguished():
    assert Top() != Bot()
    assert And(Name("A"), Name("B")) != Or(Name("A"), Name("B"))
    assert Exists("r", Name("A")) != Forall("r", Name("A"))
    assert len({Top(), Bot(), Not(Top()), Not(Bot())}) == 4


def test_format_round_trip():
    omq = dl.parse_omq("schema A/1 r/2\naxiom forall r.(A and not B) sub exists univ.C\nquery aq C\n")
    assert dl.parse_omq(dl.format_omq(omq)) == omq


def test_closure_examples():
    cl = dl.normalize_closure(dl.parse_ontology("forall R.A sub B"))
    concept_a = Name("A")
    for c in (Not(Exists("R", Not(concept_a))), Exists("R", Not(concept_a)), Not(concept_a), concept_a, Name("B")):
        assert c in cl
    assert dl.normalize_closure(dl.Ontology(()), [concept_a]) == (concept_a,)
    assert {Exists("R", Name("B")), Name("B"), concept_a} <= set(
        dl.normalize_closure(dl.parse_ontology("exists R.B sub A")))


def test_eliminate_types_examples():
    types = dl.eliminate_types(dl.parse_ontology("A sub B"))
    members = sorted(sorted(str(c) for c in types.members(t)) for t in types)
    assert members == [[], ["A", "B"], ["B"]]
    types = dl.eliminate_types(dl.parse_ontology("A sub bot"))
    assert not any(types.has(t, Name("A")) for t in types)


def test_r_coherent_examples():
    cl = (Exists("R", Name("B")), Name("B"), Name("A"))
    assert dl.r_coherent(0b101, 0b010, "R", cl)
    assert not dl.r_coherent(0b100, 0b010, "R", cl)
    assert dl.r_coherent(0b01, 0b10, "R", (Name("A"), Name("B")))


def test_check_model_examples():
    ontology = dl.parse_ontology("A sub B")
    assert dl.check_model(RelStructure({"a"}, {Atom("A", ("a",)), Atom("B", ("a",))}), ontology)
    assert not dl.check_model(RelStructure({"a"}, {Atom("A", ("a",))}), ontology)
    structure = RelStructure({"a", "b"}, {Atom("parent", ("a", "b")), Atom("HD", ("b",))})
    assert not dl.check_model(structure, dl.parse_ontology("exists parent.HD sub HD"))


def test_countermodel_examples():
    sets = dl.countermodel_type_sets(dl.Ontology(()), "A")
    assert len(sets) == 1 and len(sets[0]) == 2
    assert dl.countermodel_type_sets(dl.parse_ontology("top sub A"), "A") == []


def test_conq_to_aq_examples():
    base = "schema finding/2 diagnosis/2\naxiom LymeDisease sub BacterialInfection\n"
    omq = dl.parse_omq(base + "query conq BacterialInfection\n")
    rewritten = dl.conq_to_aq(omq)
    assert rewritten.query == AQ("BacterialInfection") and rewritten.ontology == omq.ontology
    omq = dl.parse_omq(base + "query conq exists diagnosis.BacterialInfection\n")
    rewritten = dl.conq_to_aq(omq)
    fresh = rewritten.query.name
    assert (Exists("diagnosis", Name("BacterialInfection")), Name(fresh)) in rewritten.ontology.inclusions
    rewritten = dl.conq_to_aq(dl.OmqQuery(omq.schema, dl.Ontology(()), ConQ(Top())))
    assert rewritten.ontology.inclusions == ((Top(), Name(rewritten.query.name)),)
    with pytest.raises(ValidationError):
        dl.conq_to_aq(rewritten)


def holds(structure, d, c):
    """Direct recursive semantics, kept independent of ``dl.extension``."""
    if isinstance(c, Top):
        return True
    if isinstance(c, Bot):
        return False
    if isinstance(c, Name):
        return Atom(c.name, (d,)) in structure.facts
    if isinstance(c, Not):
        return not holds(structure, d, c.arg)
    if isinstance(c, And):
        return holds(structure, d, c.left) and holds(structure, d, c.right)
    if isinstance(c, Or):
        return holds(structure, d, c.left) or holds(structure, d, c.right)
    if c.role == dl.UNIV:
        succ = sorted(structure.domain)
    else:
        succ = [e for e in sorted(structure.domain) if Atom(c.role, (d, e)) in structure.facts]
    if isinstance(c, Exists):
        return any(holds(structure, e, c.arg) for e in succ)
    return all(holds(structure, e, c.arg) for e in succ)


SIG = Schema((("A", 1), ("B", 1), ("C", 1), ("r", 2), ("s", 2)))


def random_structure(rng, n):
    dom = [f"d{i}" for i in range(n)]
    facts = [Atom(p, args) for p, k in SIG for args in product(dom, repeat=k) if rng.random() < 0.3]
    return RelStructure(frozenset(dom), frozenset(facts), SIG)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 10 ** 6), univ=st.booleans())
def test_check_model_matches_naive(seed, univ):
    rng = random.Random(seed)
    ontology = gen.random_aq_omq(rng, max_closure=12, univ=univ).ontology
    structure = random_structure(rng, rng.randint(1, 3))
    naive = all(not holds(structure, d, l) or holds(structure, d, r) for l, r in ontology.inclusions for d in structure.domain)
    assert dl.check_model(structure, ontology) == naive


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_eliminated_types_are_realized_by_canonical_model(seed):
    rng = random.Random(seed)
    ontology = gen.random_aq_omq(rng).ontology
    types = dl.eliminate_types(ontology)
    if not types.types:
        return
    names = {t: f"t{t}" for t in types}
    structure = csp.canonical_structure(types.closure, list(types), SIG, names)
    assert dl.check_model(structure, ontology)
    for t in types:
        assert dl.type_of(structure, types.closure, names[t]) == t


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_every_realized_type_survives_elimination(seed):
    rng = random.Random(seed)
    ontology = gen.random_aq_omq(rng).ontology
    types = dl.eliminate_types(ontology)
    for _ in range(20):
        structure = random_structure(rng, rng.randint(1, 3))
        if dl.check_model(structure, ontology):
            for d in structure.domain:
                assert dl.type_of(structure, types.closure, d) in types.types


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6), univ=st.booleans(), boolean=st.booleans())
def test_countermodel_sets_are_incomparable_and_avoid_query(seed, univ, boolean):
    rng = random.Random(seed)
    omq = gen.random_aq_omq(rng, univ=univ, boolean=boolean)
    sets = dl.countermodel_type_sets(omq.ontology, omq.query.name, boolean=boolean)
    closure = dl.normalize_closure(omq.ontology, [Name(omq.query.name)])
    univ_exists = [c for c in closure if isinstance(c, Exists) and c.role == dl.UNIV]
    assert len(sets) <= 2 ** len(univ_exists)
    for i, sig in enumerate(sets):
        assert any(not sig.has(t, Name(omq.query.name)) for t in sig)
        if boolean:
            assert not any(sig.has(t, Name(omq.query.name)) for t in sig)
        for j, rewritten in enumerate(sets):
            if i != j:
                assert not sig.types <= rewritten.types
