"""
Encoding questions and graphs
=============================

An untrained model already produces everything the ranker needs: a question
vector, token attention, per-edge relation attention and a cosine score for
each candidate graph.
"""

from pathlib import Path

import numpy as np

import grgcn
from grgcn.config import load_config

DATA = Path(grgcn.__file__).parent / "data" / "synthetic"
kb = grgcn.load_triples(DATA / "kb.tsv")
records = grgcn.load_dataset(DATA / "dataset.txt")
cfg = load_config(DATA / "config.txt")
model = grgcn.GRGCN.build(cfg, kb, records, grgcn.load_lexicon(cfg.lexicon))
print(sum(model.params[n].data.size for n in model.params.names()), "parameters")

rec = {r.id: r for r in records}["q05"]
q = model.encode_question(rec)
print(rec.text)
for tok, a in zip(rec.tokens, q.attention.data):
    print(f"  {tok:>8s} {a:.3f}")
print("h_q:", np.round(q.h_q.data, 3))

# Relation attention weights each edge of a graph by its relevance to the question.
cands = grgcn.generate_candidates(rec, kb)
g = next(c for c in cands if len(c.edges) == 2)
enc = model.encode_graph(g, q)
print("\n" + grgcn.to_logical_form(g))
print("edge attention:", np.round(enc.structure.attention.data, 3))

# Scores before training are close to arbitrary.
for s, c in sorted(zip(model.score_graphs(rec, cands), cands), key=lambda x: -x[0])[:5]:
    print(f"{s:+.3f}", grgcn.to_logical_form(c).replace("\n", " ; "))
