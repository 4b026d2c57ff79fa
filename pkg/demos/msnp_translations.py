"""
Second-order sentences and disjunctive datalog
==============================================

Monotone monadic SNP sentences and monadic disjunctive datalog describe
the same queries, one as the complement of the other.  This script
moves a 2-colourability sentence back and forth and then lifts a
guarded sentence with a binary second-order variable into the dialect
whose variables range over elements and facts.
"""

from omqkit import ddlog, msnp, translate
from omqkit.core import parse_instance

two_colour = msnp.parse_msnp("""
msnp mmsnp
schema E/2
sovar Red monadic
imp E(x,y), Red(x), Red(y) -> false
imp E(x,y) -> Red(x) ; Red(y)
""")

triangle = parse_instance("E(a,b) E(b,c) E(c,a)")
square = parse_instance("E(a,b) E(b,c) E(c,d) E(d,a)")

# The co-query is non-empty exactly when the sentence fails.
print("triangle not 2-colourable:", msnp.eval_msnp(two_colour, triangle) == [()])
print("square not 2-colourable:  ", msnp.eval_msnp(two_colour, square) == [()])

# As a program the second-order variable becomes an IDB predicate, and
# each implication with an empty head becomes a goal rule.
program = translate.commsnp_to_mddlog(two_colour)
print()
print(ddlog.format_program(program, header="as disjunctive datalog"))
print("program on triangle:", ddlog.eval_bruteforce(program, triangle))

# Going back keeps the rules and turns the goal rules into constraints
# over free variables.
back = translate.mddlog_to_commsnp(program)
print(msnp.format_msnp(back, header="and back"))

# A guarded sentence over symmetric graphs: orient every edge so that no
# vertex has both an incoming and an outgoing kept edge.  Such an
# orientation exists iff the graph is bipartite.
guarded = msnp.parse_msnp("""
msnp gmsnp
schema E/2
sovar Keep rel/2
imp E(x,y) -> Keep(x,y) ; Keep(y,x)
imp E(x,y), Keep(x,y), Keep(y,x) -> false
imp E(x,y), E(y,z), Keep(x,y), Keep(y,z) -> false
""")
lifted = translate.gmsnp_mmsnp2(guarded)
print(msnp.format_msnp(lifted, header="binary variable as a set of facts"))


def symmetric(text):
    data = parse_instance(text)
    return parse_instance(" ".join(f"E({a},{b}) E({b},{a})" for a, b in data.relation("E")))


for name, data in [("triangle", symmetric("E(a,b) E(b,c) E(c,a)")),
                ("square", symmetric("E(a,b) E(b,c) E(c,d) E(d,a)")),
                ("pentagon", symmetric("E(a,b) E(b,c) E(c,d) E(d,e) E(e,a)"))]:
    a = msnp.eval_msnp(guarded, data) == [()]
    b = msnp.eval_msnp(lifted, data) == [()]
    print(f"{name:9s} not bipartite: guarded {a}, lifted {b}")
