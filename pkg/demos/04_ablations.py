"""
Ablations on a held-out split
=============================

Every fourth question is held out.  The full model is trained alongside
three reduced variants: no relation attention, no sense attention, and one
shared message weight instead of per-relation weights.  Takes a few minutes.
"""

from pathlib import Path

import grgcn
from grgcn.config import load_config
from grgcn.dataset import split_holdout
from grgcn.trainer import limits_of

DATA = Path(grgcn.__file__).parent / "data" / "synthetic"
kb = grgcn.load_triples(DATA / "kb.tsv")
train_set, held = split_holdout(grgcn.load_dataset(DATA / "dataset.txt"))
base = load_config(DATA / "config.txt")
print(len(train_set), "training questions,", len(held), "held out")

variants = [
    ("full", {}),
    ("no relation attention", {"structure_attention": False}),
    ("no sense attention", {"wordnet": False}),
    ("untyped messages", {"relation_typing": "untyped"}),
]
for name, changes in variants:
    cfg = base.replace(**changes)
    model = grgcn.train(train_set, kb, cfg).model
    m = grgcn.evaluate(held, kb, model, limits_of(cfg))
    print(f"{name:>22s}  F1 {m.f1:.3f}  ", " ".join(f"{q}:{f:.2f}" for q, _, _, f, _ in m.per_question))
