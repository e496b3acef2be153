"""
Query graphs over a small knowledge base
=========================================

Load the shipped triples, write a query graph by hand, run it, and look at
the candidates the generator proposes for a question.
"""

from pathlib import Path

import grgcn
from grgcn.evaluation import flat_form

DATA = Path(grgcn.__file__).parent / "data" / "synthetic"
kb = grgcn.load_triples(DATA / "kb.tsv")
print(len(kb), "triples,", len(kb.relations()), "relations")

# A two-hop graph: the father of anna's spouse.  ?q is the answer node.
g = grgcn.parse_logical_form("(Q1)-[spouse]->(?v1)\n(?v1)-[father]->(?q)")
print(grgcn.to_logical_form(g))
print("answers:", grgcn.execute(kb, g))

# Same two relations, other structure: a different question entirely.
swapped = grgcn.parse_logical_form("(Q1)-[father]->(?v1)\n(?v1)-[spouse]->(?q)")
print("swapped:", grgcn.execute(kb, swapped))

# The join executor agrees with exhaustive enumeration.
assert grgcn.execute(kb, g) == grgcn.brute_force_execute(kb, g)

# Constraints: the largest city in france.
largest = grgcn.parse_logical_form(
    "(?q)-[located_in]->(Q22)\nTYPE(?q, Q101)\nORDER(?q, DESC, 1, population)")
print("largest city in france:", grgcn.execute(kb, largest))

# Candidate generation starts from the linked entities of a question.
records = {r.id: r for r in grgcn.load_dataset(DATA / "dataset.txt")}
rec = records["q03"]
print("\n" + rec.text)
for cand in grgcn.generate_candidates(rec, kb):
    mark = "*" if grgcn.to_logical_form(cand) == rec.gold_logical_form else " "
    print(mark, flat_form(grgcn.to_logical_form(cand)))
