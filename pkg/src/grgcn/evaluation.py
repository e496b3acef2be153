"""Prediction pipeline and macro precision / recall / F1."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .kb import KnowledgeBase, execute, value_key, value_str
from .query_graph import GenLimits, QueryGraph, generate_candidates, to_logical_form


def pr_f1(predicted, gold) -> tuple[float, float, float]:
    predicted, gold = set(predicted), set(gold)
    hit = len(predicted & gold)
    p = hit / len(predicted) if predicted else 0.0
    r = hit / len(gold) if gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


@dataclass
class Prediction:
    record_id: str
    ranking: list[tuple[float, str]] = field(default_factory=list)  # (score, logical form), best first
    chosen: QueryGraph | None = None
    answers: set = field(default_factory=set)

    @property
    def chosen_form(self) -> str:
        return to_logical_form(self.chosen) if self.chosen is not None else ""


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float
    per_question: list[tuple[str, float, float, float, str]] = field(default_factory=list)

    def __str__(self) -> str:
        return f"precision={self.precision:.4f} recall={self.recall:.4f} f1={self.f1:.4f} n={len(self.per_question)}"


def rank(scores: Sequence[float], forms: Sequence[str]) -> list[int]:
    """Indices by descending score, ties broken by logical form."""
    return sorted(range(len(scores)), key=lambda i: (-scores[i], forms[i]))


def predict(record, kb: KnowledgeBase, model, limits: GenLimits = GenLimits(),
            triggers: Mapping[str, list[str]] | None = None) -> Prediction:
    candidates = generate_candidates(record, kb, limits, triggers)
    if not candidates:
        return Prediction(record.id)
    forms = [to_logical_form(g) for g in candidates]
    scores = model.score_graphs(record, candidates)
    order = rank(scores, forms)
    best = candidates[order[0]]
    return Prediction(record.id, [(scores[i], forms[i]) for i in order], best, execute(kb, best))


def flat_form(form: str) -> str:
    return " ; ".join(form.splitlines())


def evaluate(dataset, kb: KnowledgeBase, model, limits: GenLimits = GenLimits(),
             triggers: Mapping[str, list[str]] | None = None, report_path=None) -> Metrics:
    """Macro-averaged metrics; optionally writes ``id<TAB>p<TAB>r<TAB>f1<TAB>chosen_form`` lines."""
    rows = []
    for rec in dataset:
        pred = predict(rec, kb, model, limits, triggers)
        p, r, f1 = pr_f1(pred.answers, rec.answers)
        rows.append((rec.id, p, r, f1, flat_form(pred.chosen_form)))
    n = len(rows)
    metrics = Metrics(
        sum(x[1] for x in rows) / n if n else 0.0,
        sum(x[2] for x in rows) / n if n else 0.0,
        sum(x[3] for x in rows) / n if n else 0.0,
        rows,
    )
    if report_path is not None:
        write_report(metrics, report_path)
    return metrics


def write_report(metrics: Metrics, path) -> None:
    Path(path).write_text("".join(f"{i}\t{p!r}\t{r!r}\t{f!r}\t{form}\n" for i, p, r, f, form in metrics.per_question),
                          encoding="utf-8")


def read_report(path) -> list[tuple[str, float, float, float, str]]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        i, p, r, f, form = line.split("\t")
        rows.append((i, float(p), float(r), float(f), form))
    return rows


def format_answers(answers) -> str:
    return ";".join(value_str(v) for v in sorted(answers, key=value_key))
