"""The assembled ranking model: question encoder, graph encoder and cosine scorer."""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import TrainConfig
from .graph_encoder import GraphEncoding, encode_graph, init_graph_params, score
from .kb import KnowledgeBase
from .lexicon import (
    EmbeddingTable,
    RelationVocabulary,
    SenseLexicon,
    extend_table,
    load_embeddings,
    tokenize_relation_label,
)
from .numerics import ParamRegistry, Tensor
from .query_graph import QueryGraph
from .question_encoder import QuestionEncoding, edge_classes, encode_question, init_question_params


def entity_labels(kb: KnowledgeBase) -> dict[str, str]:
    return {e: kb.label(e) for e in sorted(kb.index_sp) if kb.label(e)}


class GRGCN:
    """Scores query graphs against a question by cosine of their encodings."""

    def __init__(self, cfg: TrainConfig, table: EmbeddingTable, relvocab: RelationVocabulary,
                 lexicon: SenseLexicon, classes: Sequence[str], labels: Mapping[str, str] | None = None):
        self.cfg = cfg
        self.table = table
        self.relvocab = relvocab
        self.lexicon = lexicon
        self.classes = list(classes)
        self.labels = dict(labels or {})
        self.params = ParamRegistry()
        rng = np.random.default_rng(cfg.seed)
        if cfg.train_embeddings:
            table.register(self.params)
        relvocab.register(self.params)
        init_question_params(self.params, cfg, self.classes, rng)
        init_graph_params(self.params, cfg, len(relvocab), rng)

    @classmethod
    def build(cls, cfg: TrainConfig, kb: KnowledgeBase, records: Iterable, lexicon: SenseLexicon,
              embeddings: EmbeddingTable | None = None) -> "GRGCN":
        """Vocabulary from question tokens, KB labels, relation words and the lexicon."""
        records = list(records)
        labels = entity_labels(kb)
        relations = kb.relations()
        words: list[str] = []
        for r in records:
            words.extend(t.lower() for t in r.tokens)
        for lab in labels.values():
            words.extend(lab.lower().split())
        for rel in relations:
            words.extend(tokenize_relation_label(rel))
        words.extend(sorted(lexicon.words()))
        if embeddings is None:
            table = load_embeddings(cfg.embeddings or None, cfg.dim, fallback_vocab=words, seed=cfg.seed)
        else:
            table = extend_table(embeddings, words, cfg.seed)
        table.trainable = cfg.train_embeddings
        table.matrix.requires_grad = cfg.train_embeddings
        relvocab = RelationVocabulary(relations, cfg.dim, cfg.seed + 1)
        dep_labels = sorted({lab for r in records for _, lab in r.dep})
        return cls(cfg, table, relvocab, lexicon, edge_classes(cfg, dep_labels), labels)

    def encode_question(self, record, train: bool = False, rng=None) -> QuestionEncoding:
        return encode_question(record, self.table, self.params, self.cfg, self.classes, train, rng)

    def encode_graph(self, g: QueryGraph, q: QuestionEncoding, cache: dict | None = None) -> GraphEncoding:
        return encode_graph(g, q.e_avg, self.table, self.relvocab, self.lexicon, self.params, self.cfg,
                            self.labels, cache)

    def score(self, q: QuestionEncoding, g: GraphEncoding) -> Tensor:
        return score(q.h_q, g.h_whole)

    def score_graphs(self, record, graphs: Sequence[QueryGraph]) -> list[float]:
        """Eval-mode scores; degenerate encodings score ``-inf``."""
        from .graph_encoder import DegenerateEncodingError

        q = self.encode_question(record)
        cache: dict = {}
        out = []
        for g in graphs:
            try:
                out.append(self.score(q, self.encode_graph(g, q, cache=cache)).item())
            except DegenerateEncodingError:
                out.append(float("-inf"))
        return out
