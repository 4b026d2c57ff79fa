"""
Medical records under an ontology
=================================

Patient records rarely say "bacterial infection" outright.  An ontology
fills the gap, and the certain answers are what every model consistent
with records plus ontology agrees on.  Run from the repository root:

    python3 demos/medical_records.py
"""

import os

from omqkit import csp, ddlog, dl, translate
from omqkit.core import parse_instance

HERE = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


def load(name):
    with open(os.path.join(HERE, name), encoding="utf-8") as fh:
        return fh.read()


records = parse_instance(load("lyme.facts"))
print("records:")
for fact in records:
    print("   ", fact)

# Who has a diagnosis that is some bacterial infection?  pat1 only has a
# finding; the first axiom promises a Lyme diagnosis for it.  pat2 has
# listeriosis, which the second axiom files under bacterial infections.
omq = dl.parse_omq(load("lyme.omq"))
print("\nquery:", omq.query)

# Engine one: compile to a family of templates with a distinguished point.
# An element is an answer when the records, pointed at it, map into none
# of the templates.
family = csp.aq_omq_to_templates(omq)
print(f"{len(family)} templates, largest has "
      f"{max(len(t.structure.domain) for t in family)} elements")
print("template answers:", csp.eval_cocsp(family, records))

# Engine two: compile to monadic disjunctive datalog and search for models.
program = translate.aq_omq_to_mddlog(omq)
flags = ddlog.classify(program)
print(f"\n{len(program.rules)} rules;", ", ".join(k for k, v in flags.items() if v))
print("program answers:", ddlog.eval_bruteforce(program, records))

# Hereditary disposition travels from parent to child, without bound.
# The answers are the ancestor closure, which no first-order formula
# expresses, and the FO-rewritability check notices.
family_tree = parse_instance("""
HereditaryDisposition(grandma)
parent(mum, grandma)
parent(kid, mum)
parent(neighbour, stranger)
""")
hereditary = csp.aq_omq_to_templates(dl.parse_omq(load("hereditary.omq")))
print("\nhereditary:", csp.eval_cocsp(hereditary, family_tree))
print("FO-rewritable?", csp.fo_definable(hereditary))

# Bacterial infection, in contrast, is just LymeDisease(x) or Listeriosis(x).
infection = csp.aq_omq_to_templates(dl.parse_omq(load("infection.omq")))
print("bacterial infection FO-rewritable?", csp.fo_definable(infection))
