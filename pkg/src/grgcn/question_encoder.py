"""Question encoding: dependency-tree RGCN plus token attention."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lexicon import EmbeddingTable
from .numerics import (
    DimensionError,
    ParamRegistry,
    Tensor,
    add,
    concat,
    constant,
    dropout,
    matmul,
    mean_rows,
    relu,
    softmax,
)

SELF_LOOP = "self"
HEAD_TO_DEP = "head"


class DependencyError(ValueError):
    pass


@dataclass
class DependencyGraph:
    """Tokens plus ``(head, dependent, class)`` edges over 0-based token indices."""

    tokens: list[str]
    edges: list[tuple[int, int, str]]

    def adjacency(self, classes: Sequence[str]) -> dict[str, np.ndarray]:
        """Per-class receiver × sender matrices, rows scaled by 1/|N^r|."""
        n = len(self.tokens)
        mats = {c: np.zeros((n, n)) for c in classes}
        for head, dep, cls in self.edges:
            if cls not in mats:
                cls = HEAD_TO_DEP
            if cls == SELF_LOOP:
                mats[cls][head, head] = 1.0
            else:
                mats[cls][dep, head] = 1.0  # dependent receives from its head
        for m in mats.values():
            deg = m.sum(axis=1, keepdims=True)
            np.divide(m, deg, out=m, where=deg > 0)
        return mats


def build_dependency_graph(record, typed: bool = False) -> DependencyGraph:
    """One self-loop per token and one head→dependent edge per non-root token.

    ``record.dep`` holds ``(head, label)`` pairs with 1-based heads and 0 for root.
    """
    tokens = list(record.tokens)
    n = len(tokens)
    if len(record.dep) != n:
        raise DependencyError(f"{len(record.dep)} dependency entries for {n} tokens")
    heads = [h for h, _ in record.dep]
    for i, h in enumerate(heads):
        if not 0 <= h <= n:
            raise DependencyError(f"head index {h} of token {i + 1} out of range")
        if h == i + 1:
            raise DependencyError(f"token {i + 1} is its own head")
    for start in range(n):
        seen = set()
        j = start
        while heads[j] != 0:
            if j in seen:
                raise DependencyError(f"cyclic head chain through token {start + 1}")
            seen.add(j)
            j = heads[j] - 1
    edges = [(i, i, SELF_LOOP) for i in range(n)]
    for i, (h, label) in enumerate(record.dep):
        if h != 0:
            edges.append((h - 1, i, label if typed else HEAD_TO_DEP))
    return DependencyGraph(tokens, edges)


@dataclass
class QuestionEncoding:
    h_q: Tensor
    e_avg: Tensor
    h0: Tensor
    h_final: Tensor
    attention: Tensor


def edge_classes(cfg, labels: Sequence[str] = ()) -> list[str]:
    if cfg.question_edge_classes == "typed":
        return [SELF_LOOP, HEAD_TO_DEP] + sorted(set(labels) - {SELF_LOOP, HEAD_TO_DEP})
    return [SELF_LOOP, HEAD_TO_DEP]


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, (fan_in, fan_out))


def init_question_params(params: ParamRegistry, cfg, classes: Sequence[str], rng: np.random.Generator) -> None:
    d = cfg.dim
    for layer in range(cfg.question_layers):
        params.add(f"q.l{layer}.W0", _glorot(rng, d, d))
        for c in classes:
            params.add(f"q.l{layer}.W_{c}", _glorot(rng, d, d))
    width = 2 * d if cfg.concat_sequence else d
    params.add("q.M", _glorot(rng, d, width))
    params.add("q.W", _glorot(rng, width, d).T.copy())
    params.add("q.b", np.zeros(d))


def question_rgcn(dep: DependencyGraph, h0: Tensor, params: ParamRegistry, layers: int,
                  classes: Sequence[str], dropout_p: float = 0.0, train: bool = False,
                  rng: np.random.Generator | None = None) -> Tensor:
    """``h' = ReLU(sum_r sum_{w in N^r} W_r h_w / |N^r| + W0 h)`` applied ``layers`` times."""
    adj = dep.adjacency(classes)
    h = h0
    for layer in range(layers):
        total = matmul(h, params[f"q.l{layer}.W0"])
        for c in classes:
            a = adj[c]
            if a.any():
                total = add(total, matmul(constant(a), matmul(h, params[f"q.l{layer}.W_{c}"])))
        h = dropout(relu(total), dropout_p, train, rng)
    return h


def token_attention(e_avg: Tensor, states: Tensor, m: Tensor) -> Tensor:
    """Softmax over tokens of ``E_avg · M · state_i``."""
    if m.shape != (e_avg.shape[0], states.shape[1]):
        raise DimensionError(f"attention matrix {m.shape} does not fit E_avg {e_avg.shape} "
                             f"and states {states.shape}")
    return softmax(matmul(states, matmul(e_avg, m)))


def encode_question(record, table: EmbeddingTable, params: ParamRegistry, cfg,
                    classes: Sequence[str] | None = None, train: bool = False,
                    rng: np.random.Generator | None = None) -> QuestionEncoding:
    classes = list(classes) if classes is not None else edge_classes(cfg)
    dep = build_dependency_graph(record, typed=cfg.question_edge_classes == "typed")
    h0 = table.rows(dep.tokens)
    e_avg = mean_rows(h0)
    h_final = question_rgcn(dep, h0, params, cfg.question_layers, classes, cfg.dropout_p, train, rng)
    states = concat([h0, h_final]) if cfg.concat_sequence else h_final
    attn = token_attention(e_avg, states, params["q.M"])
    pooled = matmul(attn, states)
    h_q = relu(add(matmul(params["q.W"], pooled), params["q.b"]))
    h_q = dropout(h_q, cfg.dropout_p, train, rng)
    return QuestionEncoding(h_q, e_avg, h0, h_final, attn)
