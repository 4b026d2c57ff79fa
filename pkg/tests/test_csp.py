import random

import pytest
from hypothesis import given, settings, strategies as st

import gen
from omqkit import csp, ddlog, dl, translate
from omqkit.core import Atom, RelStructure, Schema, parse_instance
from omqkit.csp import Template, TemplateFamily, find_hom

E = Schema((("E", 2),))
AR = Schema((("A", 1), ("R", 2)))


def graph(edges, nodes=None, consts=()):
    facts = frozenset(Atom("E", e) for e in edges)
    dom = frozenset(nodes or {v for e in edges for v in e})
    return Template(RelStructure(dom, facts, E), consts)


EDGE = graph([("a", "b")])
SYM_EDGE = graph([("a", "b"), ("b", "a")])
TRIANGLE = graph([("a", "b"), ("b", "c"), ("c", "a")])


def family(*ts, schema=E):
    return TemplateFamily(ts, schema, ts[0].const_names if ts else ())


def test_parse_examples():
    t = csp.parse_template("domain a b\nconst c1 = a\nfact R(a,b)\n")
    assert isinstance(t, Template) and len(t.structure.domain) == 2 and t.constants == (("c1", "a"),)
    family = csp.parse_template("domain a\nfact A(a)\n---\ndomain b\nfact R(b,b)\n")
    assert len(family) == 2
    assert len(csp.parse_family("")) == 0
    text = csp.format_family(family)
    assert csp.format_family(csp.parse_family(text)) == text


def test_find_hom_examples():
    t = Template(TRIANGLE.structure, (("c1", "a"),))
    h = find_hom(t, t)
    assert h is not None and h["a"] == "a"
    assert find_hom(graph([("x", "y")], consts=(("c1", "x"),)), graph([("a", "b")], consts=(("c1", "a"),)))
    assert find_hom(TRIANGLE, EDGE) is None
    assert find_hom(EDGE, TRIANGLE) is not None


def test_find_hom_matches_exhaustive_search():
    rng = random.Random(7)
    schema = Schema((("A", 1), ("R", 2), ("T", 3)))
    agree = found = 0
    for _ in range(500):
        k = rng.randint(0, 1)
        src = gen.random_template(rng, schema, k, max_size=4, density=0.25)
        tgt = gen.random_template(rng, schema, k, max_size=3, density=0.5)
        h = find_hom(src, tgt)
        ref = csp._all_maps_hom(src, tgt)
        assert (h is None) == (ref is None)
        if h is not None:
            found += 1
            assert all(h[e] == t for (_, e), (_, t) in zip(src.constants, tgt.constants))
            assert all(Atom(f.pred, tuple(h[a] for a in f.args)) in tgt.structure.facts
                       for f in src.structure.facts)
        agree += 1
    assert agree == 500 and 50 < found < 450


def test_eval_cocsp_examples():
    omq = dl.parse_omq("schema HD/1 parent/2\naxiom exists parent.HD sub HD\nquery aq HD\n")
    family = csp.aq_omq_to_templates(omq)
    data = parse_instance("HD(a) parent(b,a)")
    assert csp.eval_cocsp(family, data) == [("a",), ("b",)] == ddlog.eval_bruteforce(translate.aq_omq_to_mddlog(omq), data)
    empty = TemplateFamily((), Schema((("A", 1),)), ("c1",))
    assert csp.eval_cocsp(empty, parse_instance("A(a)")) == [("a",)]


def test_aq_omq_to_templates_examples():
    omq = dl.parse_omq("schema HD/1 parent/2\naxiom exists parent.HD sub HD\nquery aq HD\n")
    family = csp.aq_omq_to_templates(omq)
    program = translate.aq_omq_to_mddlog(omq)
    for data in gen.instances(omq.schema, 2):
        assert csp.eval_cocsp(family, data) == ddlog.eval_bruteforce(program, data)
    assert len(csp.aq_omq_to_templates(dl.parse_omq("schema A/1\naxiom top sub A\nquery aq A\n"))) == 0
    omq = dl.parse_omq("schema A/1 R/2\nquery baq A\n")
    family = csp.aq_omq_to_templates(omq)
    assert len(family) == 1 and family.const_names == ()
    for data in gen.instances(AR, 2):
        assert csp.eval_cocsp(family, data) == ([()] if data.relation("A") else [])


def test_templates_to_omq_examples():
    point = RelStructure({"e"}, {Atom("A", ("e",)), Atom("R", ("e", "e"))}, AR)
    fam = family(Template(point, (("c1", "e"),)), schema=AR)
    program = translate.aq_omq_to_mddlog(csp.templates_to_omq(fam))
    for data in gen.instances(AR, 2):
        assert ddlog.eval_bruteforce(program, data) == []
    bare = Template(RelStructure({"e", "f"}, frozenset(), E), ())
    fam = family(bare)
    program = translate.aq_omq_to_mddlog(csp.templates_to_omq(fam))
    for data in gen.instances(E, 2):
        assert ddlog.eval_bruteforce(program, data) == ([()] if data.facts else [])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), k=st.integers(0, 1))
def test_templates_to_omq_agrees_through_ddlog(seed, k):
    rng = random.Random(seed)
    family = gen.random_family(rng, AR, k, max_templates=2, max_size=2)
    program = translate.aq_omq_to_mddlog(csp.templates_to_omq(family))
    for _ in range(4):
        data = gen.random_instance(rng, AR, rng.randint(1, 3))
        assert ddlog.eval_bruteforce(program, data) == csp.eval_cocsp(family, data)


def test_incomparable_reduce_examples():
    assert len(csp.incomparable_reduce(family(TRIANGLE, TRIANGLE))) == 1
    assert csp.incomparable_reduce(family(EDGE, TRIANGLE)).templates == (TRIANGLE,)
    loop = graph([("a", "a")])
    assert len(csp.incomparable_reduce(family(loop, graph([], nodes={"z"})))) == 1
    fam = family(TRIANGLE, graph([("a", "b"), ("b", "a")], consts=()))
    assert csp.incomparable_reduce(fam) == fam


def test_collapse_examples():
    assert csp.collapse_constants(EDGE) == EDGE.structure
    t = Template(EDGE.structure, (("c1", "a"),))
    assert Atom("P_1", ("a",)) in csp.collapse_constants(t).facts


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_pointed_homs_match_collapsed_homs(seed):
    rng = random.Random(seed)
    t = gen.random_template(rng, AR, 1)
    data = gen.random_instance(rng, AR, rng.randint(1, 3))
    if not data.adom:
        return
    d = rng.choice(sorted(data.adom))
    names = csp.collapse_names(AR, 1)
    plain = Template(csp.collapse_constants(t, names))
    annotated = csp.annotate(data, (d,), names)
    assert (find_hom((data, (d,)), t) is None) == (find_hom(csp.pointed(annotated), plain) is None)


def semantic_containment(left, right, schema, n=3):
    for data in gen.instances(schema, n):
        a1, a2 = set(csp.eval_cocsp(left, data)), set(csp.eval_cocsp(right, data))
        if not a1 <= a2:
            return False
    return True


def test_contains_examples():
    assert csp.contains(family(TRIANGLE), family(TRIANGLE))[0]
    assert csp.contains(family(TRIANGLE), family(EDGE))[0]
    ok, (witness_data, points) = csp.contains(family(EDGE), family(TRIANGLE))
    assert not ok
    assert csp.eval_cocsp(family(EDGE), witness_data) and not csp.eval_cocsp(family(TRIANGLE), witness_data)
    assert semantic_containment(family(TRIANGLE), family(EDGE), E)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10 ** 6), k=st.integers(0, 1))
def test_contains_matches_semantics(seed, k):
    rng = random.Random(seed)
    schema = Schema((("A", 1), ("R", 2)))
    left = gen.random_family(rng, schema, k)
    right = gen.random_family(rng, schema, k)
    ok, witness = csp.contains(left, right)
    if ok:
        assert semantic_containment(left, right, schema, 2)
    else:
        witness_data, points = witness
        assert tuple(points) in csp.eval_cocsp(left, witness_data) and tuple(points) not in csp.eval_cocsp(right, witness_data)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), k=st.integers(0, 1))
def test_eval_invariant_under_reduction_and_renaming(seed, k):
    rng = random.Random(seed)
    family = gen.random_family(rng, AR, k, max_templates=3)
    reduced = csp.incomparable_reduce(family)
    renamed = []
    for t in family.templates:
        ren = {e: f"z{e}" for e in t.structure.domain}
        st_ = RelStructure(frozenset(ren.values()),
                           frozenset(Atom(f.pred, tuple(ren[a] for a in f.args)) for f in t.structure.facts), AR)
        renamed.append(Template(st_, tuple((n, ren[e]) for n, e in t.constants)))
    renamed_family = TemplateFamily(tuple(renamed), AR, family.const_names)
    for _ in range(4):
        data = gen.random_instance(rng, AR, rng.randint(1, 3))
        want = csp.eval_cocsp(family, data)
        assert csp.eval_cocsp(reduced, data) == want == csp.eval_cocsp(renamed_family, data)


def test_core_and_square():
    c = csp.core(graph([("a", "b"), ("b", "a"), ("c", "d"), ("d", "c"), ("a", "d")]).structure)
    assert len(c.domain) == 2
    assert len(csp.square(TRIANGLE.structure).domain) == 9
    with pytest.raises(csp.SizeBoundError):
        csp.square(TRIANGLE.structure, max_product=4)


def test_fo_definable_core_examples():
    point = RelStructure({"e"}, {Atom("A", ("e",)), Atom("R", ("e", "e"))}, AR)
    assert csp.fo_definable_core(point)
    assert not csp.fo_definable_core(SYM_EDGE.structure)
    assert csp.fo_definable_core(EDGE.structure)


def test_directed_edge_duality():
    """Maps to a single edge iff there is no loop and no path of length two."""
    for data in gen.instances(E, 4, up_to_iso=False):
        if not data.adom:
            continue
        rel = data.relation("E")
        obstructed = any(x == y for x, y in rel) or any(y == u for _, y in rel for u, _ in rel)
        assert (find_hom(csp.pointed(data), EDGE) is None) == obstructed


def test_fo_definable_examples():
    base = "schema HD/1 parent/2 L/1 Li/1\naxiom exists parent.HD sub HD\naxiom L or Li sub B\n"
    assert not csp.fo_definable(csp.aq_omq_to_templates(dl.parse_omq(base + "query aq HD\n")))
    assert csp.fo_definable(csp.aq_omq_to_templates(dl.parse_omq(base + "query aq B\n")))
    assert csp.fo_definable(TemplateFamily((), E))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6), k=st.integers(0, 1))
def test_fo_definable_invariant_under_duplication_and_renaming(seed, k):
    rng = random.Random(seed)
    family = gen.random_family(rng, AR, k, max_templates=2, max_size=3)
    want = csp.fo_definable(family)
    doubled = TemplateFamily(family.templates * 2, AR, family.const_names)
    assert csp.fo_definable(doubled) == want
    flipped = []
    for t in family.templates:
        ren = {e: f"w{i}" for i, e in enumerate(sorted(t.structure.domain, reverse=True))}
        st_ = RelStructure(frozenset(ren.values()),
                           frozenset(Atom(f.pred, tuple(ren[a] for a in f.args)) for f in t.structure.facts), AR)
        flipped.append(Template(st_, tuple((n, ren[e]) for n, e in t.constants)))
    assert csp.fo_definable(TemplateFamily(tuple(flipped), AR, family.const_names)) == want
