"""Margin-ranking training with Adam, and checkpoints."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .config import TrainConfig
from .evaluation import pr_f1
from .graph_encoder import DegenerateEncodingError
from .kb import KnowledgeBase, execute
from .lexicon import EmbeddingTable, RelationVocabulary, SenseLexicon, dump_lexicon, parse_lexicon
from .model import GRGCN, entity_labels
from .numerics import Tensor, add, as_tensor, backprop, relu
from .query_graph import (
    DEFAULT_TRIGGERS,
    GenLimits,
    QueryGraph,
    generate_candidates,
    load_triggers,
    to_logical_form,
)

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "grgcn-checkpoint"
CHECKPOINT_VERSION = 1


def hinge_loss(score_pos, score_negs: Sequence, margin: float) -> Tensor:
    """``sum_neg max(0, margin - s_pos + s_neg)``."""
    pos = as_tensor(score_pos)
    total = as_tensor(0.0)
    for s in score_negs:
        total = add(total, relu(add(as_tensor(margin) - pos, as_tensor(s))))
    return total


# ---------------------------------------------------------------------------
# labelling and sampling


@dataclass
class LabelledQuestion:
    record: object
    positive: QueryGraph | None
    negatives: list[QueryGraph]
    excluded: list[QueryGraph] = field(default_factory=list)


def label_candidates(record, candidates: Sequence[QueryGraph], kb: KnowledgeBase,
                     threshold: float = 0.5) -> LabelledQuestion:
    """Gold = F1 ≥ threshold against the record's answers.

    The positive is the best-F1 gold graph, lexicographically first logical
    form on ties; the other gold graphs are neither positive nor negative.
    """
    scored = []
    for g in candidates:
        _, _, f1 = pr_f1(execute(kb, g), record.answers)
        scored.append((f1, to_logical_form(g), g))
    gold = [s for s in scored if s[0] >= threshold]
    negatives = [s[2] for s in scored if s[0] < threshold]
    if not gold:
        return LabelledQuestion(record, None, negatives)
    best = min(gold, key=lambda s: (-s[0], s[1]))
    excluded = [s[2] for s in gold if s is not best]
    return LabelledQuestion(record, best[2], negatives, excluded)


def sample_negatives(negatives: Sequence[QueryGraph], k_neg: int, rng: np.random.Generator) -> list[QueryGraph]:
    """Uniform sample without replacement of ``min(k_neg, len(negatives))`` graphs."""
    if k_neg >= len(negatives):
        return list(negatives)
    idx = rng.choice(len(negatives), size=k_neg, replace=False)
    return [negatives[i] for i in sorted(idx)]


# ---------------------------------------------------------------------------
# optimiser


class Adam:
    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params, grads: Mapping[str, np.ndarray], lr: float) -> None:
        for name, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, t in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(t.data)
                self.v[name] = np.zeros_like(t.data)
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / bc1
            v_hat = self.v[name] / bc2
            t.data = t.data - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def adam_step(params, grads, state: Adam, lr: float) -> Adam:
    state.step(params, grads, lr)
    return state


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class Checkpoint:
    config: TrainConfig
    words: list[str]
    unk_policy: str
    relations: list[str]
    relation_labels: dict[str, str]
    classes: list[str]
    lexicon: str
    triggers: dict[str, list[str]]
    params: dict[str, np.ndarray]
    adam_t: int = 0
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    epoch: int = 0
    rng_state: dict | None = None
    loss_log: list[tuple[int, float, int]] = field(default_factory=list)

    @classmethod
    def capture(cls, model: GRGCN, triggers, adam: Adam | None = None, epoch: int = 0, rng=None,
                loss_log=()) -> "Checkpoint":
        params = model.params.snapshot()
        if "word_emb" not in params:  # frozen embeddings still need to travel
            params["word_emb"] = model.table.matrix.data.copy()
        return cls(
            config=model.cfg,
            words=model.table.words,
            unk_policy=model.table.unk_policy,
            relations=list(model.relvocab.relations),
            relation_labels=dict(model.relvocab.labels),
            classes=list(model.classes),
            lexicon=dump_lexicon(model.lexicon),
            triggers={k: list(v) for k, v in triggers.items()},
            params=params,
            adam_t=adam.t if adam else 0,
            adam_m={k: v.copy() for k, v in adam.m.items()} if adam else {},
            adam_v={k: v.copy() for k, v in adam.v.items()} if adam else {},
            epoch=epoch,
            rng_state=rng.bit_generator.state if rng is not None else None,
            loss_log=list(loss_log),
        )

    def build_model(self, kb: KnowledgeBase | None = None) -> GRGCN:
        cfg = self.config
        frozen_rows = None
        if not cfg.train_embeddings:
            frozen_rows = self.params.get("word_emb")
        dim = cfg.dim
        matrix = np.zeros((len(self.words), dim))
        table = EmbeddingTable(self.words, matrix, cfg.train_embeddings, self.unk_policy, cfg.seed)
        if frozen_rows is not None:
            table.matrix = Tensor(frozen_rows, name="word_emb")
        relvocab = RelationVocabulary(self.relations, dim, cfg.seed + 1, self.relation_labels)
        labels = entity_labels(kb) if kb is not None else {}
        model = GRGCN(cfg, table, relvocab, parse_lexicon(self.lexicon), self.classes, labels)
        model.params.load(self.params)
        return model

    def to_json(self) -> dict:
        def arrays(d):
            return {k: {"shape": list(v.shape), "data": v.reshape(-1).tolist()} for k, v in d.items()}

        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "words": self.words,
            "unk_policy": self.unk_policy,
            "relations": self.relations,
            "relation_labels": self.relation_labels,
            "classes": self.classes,
            "lexicon": self.lexicon,
            "triggers": self.triggers,
            "params": arrays(self.params),
            "adam": {"t": self.adam_t, "m": arrays(self.adam_m), "v": arrays(self.adam_v)},
            "epoch": self.epoch,
            "rng_state": self.rng_state,
            "loss_log": [list(x) for x in self.loss_log],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Checkpoint":
        if obj.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a checkpoint file")
        if obj.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {obj.get('version')}")

        def arrays(d):
            return {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"]) for k, v in d.items()}

        return cls(
            config=TrainConfig.from_dict(obj["config"]),
            words=obj["words"],
            unk_policy=obj["unk_policy"],
            relations=obj["relations"],
            relation_labels=obj["relation_labels"],
            classes=obj["classes"],
            lexicon=obj["lexicon"],
            triggers=obj["triggers"],
            params=arrays(obj["params"]),
            adam_t=obj["adam"]["t"],
            adam_m=arrays(obj["adam"]["m"]),
            adam_v=arrays(obj["adam"]["v"]),
            epoch=obj["epoch"],
            rng_state=obj["rng_state"],
            loss_log=[tuple(x) for x in obj["loss_log"]],
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Checkpoint":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def write_loss_log(loss_log, path) -> None:
    Path(path).write_text("".join(f"{e}\t{m!r}\t{n}\n" for e, m, n in loss_log), encoding="utf-8")


def read_loss_log(path) -> list[tuple[int, float, int]]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        e, m, n = line.split("\t")
        rows.append((int(e), float(m), int(n)))
    return rows


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    model: GRGCN
    checkpoint: Checkpoint
    loss_log: list[tuple[int, float, int]]
    skipped: list[str]


def limits_of(cfg: TrainConfig) -> GenLimits:
    return GenLimits(cfg.max_hops, cfg.max_candidates, cfg.max_branch)


def prepare(dataset, kb: KnowledgeBase, cfg: TrainConfig, triggers) -> tuple[list[LabelledQuestion], list[str]]:
    limits = limits_of(cfg)
    usable, skipped = [], []
    for rec in dataset:
        lq = label_candidates(rec, generate_candidates(rec, kb, limits, triggers), kb, cfg.gold_f1_threshold)
        if lq.positive is None or not lq.negatives:
            log.info("skipping %s: %s", rec.id, "no positive candidate" if lq.positive is None else "no negatives")
            skipped.append(rec.id)
            continue
        usable.append(lq)
    return usable, skipped


def train(dataset, kb: KnowledgeBase, cfg: TrainConfig, lexicon: SenseLexicon | None = None,
          triggers: Mapping[str, list[str]] | None = None, resume: Checkpoint | None = None,
          checkpoint_path=None, log_path=None, embeddings: EmbeddingTable | None = None) -> TrainResult:
    """Hinge-loss training; one Adam step per batch of questions."""
    dataset = list(dataset)
    if not dataset:
        raise ValueError("empty dataset")
    if triggers is None:
        triggers = load_triggers(cfg.triggers) if cfg.triggers else DEFAULT_TRIGGERS
    if resume is not None:
        model = resume.build_model(kb)
        cfg = model.cfg = model.cfg.replace(epochs=cfg.epochs)
        adam = Adam()
        adam.t, adam.m, adam.v = resume.adam_t, dict(resume.adam_m), dict(resume.adam_v)
        rng = np.random.default_rng()
        rng.bit_generator.state = resume.rng_state
        start, loss_log = resume.epoch, list(resume.loss_log)
        triggers = resume.triggers
    else:
        if lexicon is None:
            from .lexicon import load_lexicon

            lexicon = load_lexicon(cfg.lexicon) if cfg.lexicon else SenseLexicon()
        model = GRGCN.build(cfg, kb, dataset, lexicon, embeddings)
        adam = Adam()
        rng = np.random.default_rng(cfg.seed + 7919)
        start, loss_log = 0, []

    usable, skipped = prepare(dataset, kb, cfg, triggers)
    if not usable:
        raise ValueError("no trainable questions: every record lacks a positive or a negative candidate")

    for epoch in range(start, cfg.epochs):
        order = rng.permutation(len(usable))
        epoch_loss, epoch_pairs = 0.0, 0
        for lo in range(0, len(order), cfg.batch_size):
            batch_loss, batch_pairs = None, 0
            for idx in order[lo:lo + cfg.batch_size]:
                lq = usable[idx]
                negs = sample_negatives(lq.negatives, cfg.negatives_per_positive, rng)
                q = model.encode_question(lq.record, train=True, rng=rng)
                cache: dict = {}
                try:
                    pos = model.score(q, model.encode_graph(lq.positive, q, cache))
                except DegenerateEncodingError:
                    log.debug("degenerate positive for %s", lq.record.id)
                    continue
                neg_scores = []
                for g in negs:
                    try:
                        neg_scores.append(model.score(q, model.encode_graph(g, q, cache)))
                    except DegenerateEncodingError:
                        log.debug("degenerate negative for %s", lq.record.id)
                if not neg_scores:
                    continue
                loss = hinge_loss(pos, neg_scores, cfg.margin)
                batch_loss = loss if batch_loss is None else add(batch_loss, loss)
                batch_pairs += len(neg_scores)
            if batch_loss is None:
                continue
            epoch_loss += batch_loss.item()
            epoch_pairs += batch_pairs
            grads = backprop(batch_loss * (1.0 / batch_pairs), model.params)
            adam.step(model.params, grads, cfg.learning_rate)
        mean = epoch_loss / epoch_pairs if epoch_pairs else 0.0
        loss_log.append((epoch + 1, mean, epoch_pairs))
        log.info("epoch %d mean_loss %.6f pairs %d", epoch + 1, mean, epoch_pairs)
        if checkpoint_path and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            Checkpoint.capture(model, triggers, adam, epoch + 1, rng, loss_log).save(checkpoint_path)

    ckpt = Checkpoint.capture(model, triggers, adam, max(start, cfg.epochs), rng, loss_log)
    if checkpoint_path:
        ckpt.save(checkpoint_path)
    if log_path:
        write_loss_log(loss_log, log_path)
    return TrainResult(model, ckpt, loss_log, skipped)
