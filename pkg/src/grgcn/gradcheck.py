"""A small hand-built instance for checking gradients of the whole scoring path.

The question has three tokens and the graphs two edges each.  The positive
and negative candidates share their relations but not their structure, and
the margin is large enough that the hinge stays active, so every parameter
on the path (both encoders, both attentions, fusion) receives gradient.
"""

from __future__ import annotations

from .config import TrainConfig
from .dataset import DatasetRecord, EntityMention
from .kb import KnowledgeBase, Triple, parse_value
from .lexicon import parse_lexicon
from .model import GRGCN
from .numerics import GradCheckReport, finite_diff_check
from .query_graph import parse_logical_form
from .trainer import hinge_loss

LEXICON = """\
position: job = position, post, office
position: place = position, location

held: occupied = held, occupied
held: gripped = held, gripped

spouse: partner = spouse, partner
"""

POSITIVE = "(Q1)-[spouse]->(?v1)\n(?v1)-[position_held]->(?q)"
NEGATIVE = "(Q1)-[position_held]->(?v1)\n(?v1)-[spouse]->(?q)"


def instance(seed: int = 0, dim: int = 6):
    kb = KnowledgeBase([
        Triple("Q1", "label", parse_value('"anna"')),
        Triple("Q1", "spouse", "Q2"),
        Triple("Q2", "position_held", "Q3"),
        Triple("Q1", "position_held", "Q4"),
        Triple("Q4", "spouse", "Q5"),
    ])
    record = DatasetRecord("grad", "anna spouse office", ["anna", "spouse", "office"],
                           [(2, "nsubj"), (0, "root"), (2, "obj")], [EntityMention("Q1", 0, 1)], {"Q3"})
    cfg = TrainConfig(dim=dim, seed=seed, margin=2.0)
    model = GRGCN.build(cfg, kb, [record], parse_lexicon(LEXICON))
    return model, record, parse_logical_form(POSITIVE), parse_logical_form(NEGATIVE)


def run(seed: int = 0, tol: float = 1e-4) -> GradCheckReport:
    model, record, pos, neg = instance(seed)

    def loss(_params):
        q = model.encode_question(record)
        s_pos = model.score(q, model.encode_graph(pos, q))
        s_neg = model.score(q, model.encode_graph(neg, q))
        return hinge_loss(s_pos, [s_neg], model.cfg.margin)

    return finite_diff_check(loss, model.params, tol=tol)
