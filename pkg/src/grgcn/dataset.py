"""Question records and their line-oriented file format.

One record per line, tab-separated ``key=value`` fields::

    id=q1<TAB>text=who directed it<TAB>tokens=who;directed;it<TAB>dep=2:nsubj;0:root;2:obj
    <TAB>entities=Q7@2:3<TAB>answers=Q9;Q10<TAB>gold=(?q)-[director]->(Q7)

* ``tokens``, ``dep``, ``entities``, ``answers`` and ``gold`` are ``;``-separated lists.
* ``dep`` items are ``head:label`` with 1-based heads and ``0`` for the root.
* ``entities`` items are ``kb_id@start:end`` over 0-based, end-exclusive token spans.
* ``answers`` use the triple-file literal grammar (entity id, number, date, ``"string"``).
* ``gold`` (optional) is a logical form whose lines are joined by ``;``.

Blank lines and lines starting with ``#`` are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .kb import Value, parse_value, value_key, value_str

REQUIRED = ("id", "text", "tokens", "dep")
KNOWN = REQUIRED + ("entities", "answers", "gold")


class DatasetError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class EntityMention:
    kb_id: str
    start: int
    end: int


@dataclass
class DatasetRecord:
    id: str
    text: str
    tokens: list[str]
    dep: list[tuple[int, str]]
    entities: list[EntityMention] = field(default_factory=list)
    answers: set = field(default_factory=set)
    gold_logical_form: str | None = None

    def validate(self) -> list[str]:
        problems = []
        n = len(self.tokens)
        if not n:
            problems.append("no tokens")
        if len(self.dep) != n:
            problems.append(f"dep has {len(self.dep)} entries for {n} tokens")
        roots = sum(1 for h, _ in self.dep if h == 0)
        if roots != 1:
            problems.append(f"expected exactly one root, found {roots}")
        for h, _ in self.dep:
            if not 0 <= h <= n:
                problems.append(f"head {h} out of range")
        for m in self.entities:
            if not 0 <= m.start < m.end <= n:
                problems.append(f"entity span {m.start}:{m.end} out of bounds")
        return problems


def parse_record(line: str) -> DatasetRecord:
    fields_: dict[str, str] = {}
    for part in line.rstrip("\n").split("\t"):
        if "=" not in part:
            raise ValueError(f"field {part!r} is not key=value")
        k, v = part.split("=", 1)
        if k not in KNOWN:
            raise ValueError(f"unknown field {k!r}")
        if k in fields_:
            raise ValueError(f"duplicate field {k!r}")
        fields_[k] = v
    missing = [k for k in REQUIRED if k not in fields_]
    if missing:
        raise ValueError(f"missing fields {', '.join(missing)}")

    def items(key):
        raw = fields_.get(key, "")
        return [x.strip() for x in raw.split(";") if x.strip()]

    dep = []
    for item in items("dep"):
        head, _, label = item.partition(":")
        dep.append((int(head), label or "dep"))
    entities = []
    for item in items("entities"):
        kb_id, _, span = item.rpartition("@")
        start, _, end = span.partition(":")
        if not kb_id:
            raise ValueError(f"bad entity item {item!r}")
        entities.append(EntityMention(kb_id, int(start), int(end)))
    answers = {parse_value(a) for a in items("answers")}
    gold = "\n".join(items("gold")) or None
    rec = DatasetRecord(fields_["id"], fields_["text"], items("tokens"), dep, entities, answers, gold)
    problems = rec.validate()
    if problems:
        raise ValueError("; ".join(problems))
    return rec


def load_dataset(path) -> list[DatasetRecord]:
    records = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip() or raw.startswith("#"):
                continue
            try:
                rec = parse_record(raw)
            except ValueError as exc:
                raise DatasetError(str(exc), lineno) from None
            if rec.id in seen:
                raise DatasetError(f"duplicate record id {rec.id!r}", lineno)
            seen.add(rec.id)
            records.append(rec)
    return records


def format_record(rec: DatasetRecord) -> str:
    parts = [
        f"id={rec.id}",
        f"text={rec.text}",
        "tokens=" + ";".join(rec.tokens),
        "dep=" + ";".join(f"{h}:{lab}" for h, lab in rec.dep),
    ]
    if rec.entities:
        parts.append("entities=" + ";".join(f"{m.kb_id}@{m.start}:{m.end}" for m in rec.entities))
    if rec.answers:
        parts.append("answers=" + ";".join(value_str(v) for v in sorted(rec.answers, key=value_key)))
    if rec.gold_logical_form:
        parts.append("gold=" + ";".join(rec.gold_logical_form.splitlines()))
    return "\t".join(parts)


def dump_dataset(records, path) -> None:
    Path(path).write_text("".join(format_record(r) + "\n" for r in records), encoding="utf-8")


def split_holdout(records, every: int = 4) -> tuple[list[DatasetRecord], list[DatasetRecord]]:
    """Deterministic split: every ``every``-th record (1-based) is held out."""
    train = [r for i, r in enumerate(records, 1) if i % every]
    held = [r for i, r in enumerate(records, 1) if not i % every]
    return train, held
