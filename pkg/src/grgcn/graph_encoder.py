"""Query-graph encoding: relation-attention RGCN structure path, WordNet-attended
relational path, and their fusion."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .lexicon import EmbeddingTable, RelationVocabulary, SenseLexicon
from .numerics import (
    DomainError,
    ParamRegistry,
    Tensor,
    add,
    batched_matvec,
    constant,
    cosine,
    matmul,
    max_pool_rows,
    mean_rows,
    mul,
    relu,
    reshape,
    softmax,
    stack,
    take,
    tanh,
)
from .query_graph import NodeKind, QueryGraph


class DegenerateEncodingError(DomainError):
    """A question or graph encoding collapsed to the zero vector."""


class RelationLabelError(ValueError):
    pass


@dataclass
class StructureEncoding:
    h_structure: Tensor
    states: Tensor
    attention: Tensor | None


@dataclass
class RelationalEncoding:
    relations: list[str]
    r_whole: Tensor | None
    r_fine: Tensor | None
    h_relational: Tensor
    r_word: dict[str, Tensor] = field(default_factory=dict)


@dataclass
class GraphEncoding:
    h_whole: Tensor
    structure: StructureEncoding
    relational: RelationalEncoding


def _glorot(rng, shape):
    fan_in, fan_out = shape[-1], shape[-2]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


def init_graph_params(params: ParamRegistry, cfg, n_relations: int, rng: np.random.Generator) -> None:
    d = cfg.dim
    params.add("g.answer_init", rng.normal(0.0, 0.1, d))
    params.add("g.var_init", rng.normal(0.0, 0.1, d))
    for layer in range(cfg.graph_layers):
        params.add(f"g.l{layer}.W0", _glorot(rng, (d, d)))
        if cfg.relation_typing == "typed":
            params.add(f"g.l{layer}.W_rel", _glorot(rng, (n_relations + 1, d, d)))
            if cfg.inverse_messages:
                params.add(f"g.l{layer}.W_rel_inv", _glorot(rng, (n_relations + 1, d, d)))
        else:
            params.add(f"g.l{layer}.W_v", _glorot(rng, (d, d)))
            if cfg.inverse_messages:
                params.add(f"g.l{layer}.W_v_inv", _glorot(rng, (d, d)))
    params.add("wn.W", np.ones(1))
    params.add("wn.b", np.zeros(1))
    params.add("fuse.W", _glorot(rng, (d, d)))
    params.add("fuse.b", np.full(d, 0.1))


# ---------------------------------------------------------------------------
# structure semantics


def node_init(g: QueryGraph, table: EmbeddingTable, params: ParamRegistry,
              labels: Mapping[str, str] | None = None) -> Tensor:
    """Initial node states, stacked in ``g.nodes`` order."""
    labels = labels or {}
    rows = []
    for n in g.nodes:
        if n.kind is NodeKind.ANSWER:
            rows.append(params["g.answer_init"])
        elif n.kind is NodeKind.VARIABLE:
            rows.append(params["g.var_init"])
        else:
            rows.append(table.phrase(labels.get(n.entity) or n.entity))
    return stack(rows)


def relation_attention(e_avg: Tensor, g: QueryGraph, relvocab: RelationVocabulary) -> Tensor | None:
    """Per-edge softmax of ``E_avg · r_i``; None for an edgeless graph."""
    if not g.edges:
        return None
    if e_avg.shape[0] != relvocab.dim:
        raise DomainError(f"E_avg has dimension {e_avg.shape[0]}, relations {relvocab.dim}")
    rows = take(relvocab.matrix, [relvocab.index(e.relation) for e in g.edges])
    return softmax(matmul(rows, e_avg))


def structure_forward(g: QueryGraph, h0: Tensor, attention: Tensor | None, params: ParamRegistry, cfg,
                      relvocab: RelationVocabulary) -> StructureEncoding:
    """``h' = ReLU(sum over incoming edges of a_r W_rel h_src + W0 h)``, read out at the answer node.

    Messages are not normalised by neighbour count.  With ``inverse_messages``
    every edge also sends ``a_r W_rel_inv h_dst`` back to its source.  No
    dropout on this path: dropout lives in the question encoder only.
    """
    pos = {n.name: i for i, n in enumerate(g.nodes)}
    n_nodes, n_edges = len(g.nodes), len(g.edges)
    src = [pos[e.src] for e in g.edges]
    dst = [pos[e.dst] for e in g.edges]
    rel_idx = [relvocab.index(e.relation) for e in g.edges]
    if n_edges:
        to_dst = np.zeros((n_nodes, n_edges))
        to_src = np.zeros((n_nodes, n_edges))
        to_dst[dst, np.arange(n_edges)] = 1.0
        to_src[src, np.arange(n_edges)] = 1.0
        use_attention = cfg.structure_attention and attention is not None
        scale = reshape(attention, (n_edges, 1)) if use_attention else None
    typed = cfg.relation_typing == "typed"

    def messages(h: Tensor, senders: list[int], weight: str) -> Tensor:
        hs = take(h, senders)
        if typed:
            out = batched_matvec(take(params[weight], rel_idx), hs)
        else:
            out = matmul(hs, params[weight])
        return mul(out, scale) if scale is not None else out

    h = h0
    for layer in range(cfg.graph_layers):
        total = matmul(h, params[f"g.l{layer}.W0"])
        if n_edges:
            w = f"g.l{layer}.W_rel" if typed else f"g.l{layer}.W_v"
            total = add(total, matmul(constant(to_dst), messages(h, src, w)))
            if cfg.inverse_messages:
                total = add(total, matmul(constant(to_src), messages(h, dst, w + "_inv")))
        h = relu(total)
    return StructureEncoding(take(h, pos[g.answer.name]), h, attention)


# ---------------------------------------------------------------------------
# relational semantics


def relation_level_embed(g: QueryGraph, relvocab: RelationVocabulary) -> tuple[list[str], Tensor | None]:
    """One row per distinct relation in lexicographic order (unknown → UNK row)."""
    rels = g.relations()
    if not rels:
        return rels, None
    return rels, take(relvocab.matrix, [relvocab.index(r) for r in rels])


def wordnet_sense_vector(lemma_vectors: Tensor, e_avg: Tensor) -> Tensor:
    """Lemma attention ``softmax(tanh(avg_q · w))`` and the weighted lemma sum."""
    a = softmax(tanh(matmul(lemma_vectors, e_avg)))
    return matmul(a, lemma_vectors)


def sense_weights(sense_vectors: Tensor, e_avg: Tensor, params: ParamRegistry) -> Tensor:
    scores = tanh(matmul(sense_vectors, e_avg))
    return softmax(add(mul(scores, params["wn.W"]), params["wn.b"]))


def wordnet_word_vector(word: str, lex: SenseLexicon, e_avg: Tensor, table: EmbeddingTable,
                        params: ParamRegistry, use_wordnet: bool = True) -> Tensor:
    """Sense-attended word vector; the raw embedding when ``use_wordnet`` is off."""
    if not use_wordnet:
        return table.lookup(word)
    senses = lex.senses_of(word)
    vectors = [wordnet_sense_vector(stack([table.phrase(l) for l in s.lemmas]), e_avg) for s in senses]
    if len(vectors) == 1:
        return vectors[0]
    sv = stack(vectors)
    return matmul(sense_weights(sv, e_avg, params), sv)


def fine_grained(r_whole: Tensor, word_vectors: Sequence[Tensor]) -> Tensor:
    """Row i: mean of relation i's word vectors plus its relation-level row."""
    means = []
    for i, words in enumerate(word_vectors):
        if words.shape[0] == 0:
            raise RelationLabelError(f"relation {i} has no words")
        means.append(mean_rows(words))
    return add(stack(means), r_whole)


def relational_pool(r_fine: Tensor | None, dim: int) -> Tensor:
    """Column-wise max; the zero vector for an edgeless graph."""
    if r_fine is None:
        return constant(np.zeros(dim))
    return max_pool_rows(r_fine)


def relational_forward(g: QueryGraph, e_avg: Tensor, table: EmbeddingTable, relvocab: RelationVocabulary,
                       lex: SenseLexicon, params: ParamRegistry, cfg,
                       cache: dict[str, Tensor] | None = None) -> RelationalEncoding:
    rels, r_whole = relation_level_embed(g, relvocab)
    if r_whole is None:
        return RelationalEncoding(rels, None, None, relational_pool(None, relvocab.dim))
    if not cfg.fine_grained:
        return RelationalEncoding(rels, r_whole, r_whole, relational_pool(r_whole, relvocab.dim))
    cache = {} if cache is None else cache
    r_word = {}
    for r in rels:
        words = relvocab.words(r)
        if not words:
            raise RelationLabelError(f"relation {r!r} has no word tokens")
        vecs = []
        for w in words:
            if w not in cache:
                cache[w] = wordnet_word_vector(w, lex, e_avg, table, params, cfg.wordnet)
            vecs.append(cache[w])
        r_word[r] = stack(vecs)
    r_fine = fine_grained(r_whole, [r_word[r] for r in rels])
    return RelationalEncoding(rels, r_whole, r_fine, relational_pool(r_fine, relvocab.dim), r_word)


# ---------------------------------------------------------------------------
# fusion and scoring


def fuse(h_relational: Tensor, h_structure: Tensor, params: ParamRegistry) -> Tensor:
    return relu(add(matmul(params["fuse.W"], add(h_relational, h_structure)), params["fuse.b"]))


def score(h_q: Tensor, h_whole: Tensor) -> Tensor:
    try:
        return cosine(h_q, h_whole)
    except DomainError:
        raise DegenerateEncodingError("degenerate graph encoding (zero vector)") from None


def encode_graph(g: QueryGraph, e_avg: Tensor, table: EmbeddingTable, relvocab: RelationVocabulary,
                 lex: SenseLexicon, params: ParamRegistry, cfg, labels: Mapping[str, str] | None = None,
                 cache: dict[str, Tensor] | None = None) -> GraphEncoding:
    h0 = node_init(g, table, params, labels)
    attention = relation_attention(e_avg, g, relvocab)
    structure = structure_forward(g, h0, attention, params, cfg, relvocab)
    relational = relational_forward(g, e_avg, table, relvocab, lex, params, cfg, cache)
    return GraphEncoding(fuse(relational.h_relational, structure.h_structure, params), structure, relational)
