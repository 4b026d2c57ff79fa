"""
Templates, containment and first-order rewritability
=====================================================

A family of finite structures defines a query: the instances that map
into none of them.  This walk-through builds small graph templates by
hand, compares them and asks which ones are first-order definable.
"""

from omqkit import csp
from omqkit.core import Atom, RelStructure, Schema, parse_instance
from omqkit.csp import Template, TemplateFamily

E = Schema((("E", 2),))


def graph(*edges):
    facts = frozenset(Atom("E", e) for e in edges)
    return Template(RelStructure(frozenset(v for e in edges for v in e), facts, E))


edge = graph(("a", "b"))
k2 = graph(("a", "b"), ("b", "a"))
triangle = graph(("a", "b"), ("b", "c"), ("c", "a"))
loop = graph(("a", "a"))


def family(*ts):
    return TemplateFamily(ts, E)


# 2-colourability: the query {K2} accepts exactly the graphs that are
# NOT 2-colourable (in the symmetric-edge sense).
odd = parse_instance("E(x,y) E(y,x) E(y,z) E(z,y) E(z,x) E(x,z)")
even = parse_instance("E(x,y) E(y,x) E(y,z) E(z,y)")
print("K2 flags the triangle:", csp.eval_cocsp(family(k2), odd) == [()])
print("K2 flags a path:      ", csp.eval_cocsp(family(k2), even) == [()])

# Containment goes through homomorphisms between templates.  Everything
# that fails to map into the directed triangle also fails to map into a
# single edge, since the edge maps into the triangle.
print("\n{triangle} within {edge}:", csp.contains(family(triangle), family(edge))[0])
ok, (witness, _) = csp.contains(family(edge), family(triangle))
print("{edge} within {triangle}:", ok)
print("witness:", " ".join(map(str, witness)))

# First-order definability: take the core, square it, and try to
# dismantle the square down to its diagonal.
for name, t in [("loop", loop), ("edge", edge), ("K2", k2), ("triangle", triangle)]:
    core = csp.core(t.structure)
    print(f"{name:9s} core size {len(core.domain)}  FO-definable: {csp.fo_definable(family(t))}")

# The directed edge is FO-definable because it has a finite set of
# obstructions: an instance maps into it iff it contains neither a loop
# nor a directed path of length two.
for text in ["E(p,q)", "E(p,q) E(q,r)", "E(p,p)", "E(p,q) E(r,q)"]:
    data = parse_instance(text)
    print(f"{text:15s} maps into edge: {csp.find_hom(csp.pointed(data), edge) is not None}")

# Templates with a constant define unary queries.  Collapsing the
# constant into a fresh unary relation gives a plain template whose
# FO-definability is the same.
pointed_edge = Template(edge.structure, (("c1", "a"),))
print("\ncollapsed:", sorted(map(str, csp.collapse_constants(pointed_edge).facts)))
print("pointed edge FO-definable:",
      csp.fo_definable(TemplateFamily((pointed_edge,), E, ("c1",))))
