"""In-memory triple store and query-graph execution."""

from __future__ import annotations

import datetime as _dt
import itertools
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

INSTANCE_OF = "instance_of"
LABEL = "label"


class LoadError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class GuardExceeded(RuntimeError):
    """Brute-force enumeration refused because the search space is too large."""


@dataclass(frozen=True, order=True)
class StringLit:
    text: str

    def __str__(self) -> str:
        return f'"{self.text}"'


@dataclass(frozen=True, order=True)
class NumberLit:
    value: float

    def __str__(self) -> str:
        return format_number(self.value)


@dataclass(frozen=True, order=True)
class DateLit:
    date: _dt.date

    def __str__(self) -> str:
        return self.date.isoformat()


# Entity ids are plain strings; literals are wrapped.
Value = Union[str, StringLit, NumberLit, DateLit]

_DATE_RE = re.compile(r"^[0-9]{4}-[0-9]{2}-[0-9]{2}$")
_NUMBER_RE = re.compile(r"^[+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?:[eE][+-]?[0-9]+)?$")


def format_number(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def parse_value(text: str) -> Value:
    """Parse an object token: ISO date, decimal number, quoted string, or entity id."""
    if _DATE_RE.match(text):
        try:
            return DateLit(_dt.date.fromisoformat(text))
        except ValueError:
            raise ValueError(f"invalid calendar date {text!r}") from None
    if _NUMBER_RE.match(text):
        return NumberLit(float(text))
    if text.startswith('"'):
        if len(text) < 2 or not text.endswith('"'):
            raise ValueError(f"unclosed quote in {text!r}")
        return StringLit(text[1:-1])
    if not is_entity_id(text):
        raise ValueError(f"invalid entity id {text!r}")
    return text


def is_entity_id(text) -> bool:
    return isinstance(text, str) and bool(text) and not any(c.isspace() for c in text)


def value_key(v: Value) -> tuple:
    """Total order over mixed values: entities, strings, numbers, dates."""
    if isinstance(v, str):
        return (0, v)
    if isinstance(v, StringLit):
        return (1, v.text)
    if isinstance(v, NumberLit):
        return (2, v.value)
    return (3, v.date.toordinal())


def value_str(v: Value) -> str:
    return v if isinstance(v, str) else str(v)


@dataclass(frozen=True)
class Triple:
    subject: str
    relation: str
    object: Value

    def __post_init__(self):
        if not is_entity_id(self.subject):
            raise ValueError(f"invalid subject {self.subject!r}")
        if not self.relation or any(c.isspace() for c in self.relation):
            raise ValueError(f"invalid relation {self.relation!r}")


class KnowledgeBase:
    """Immutable indexed triple set."""

    def __init__(self, triples: Iterable[Triple], instance_of: str = INSTANCE_OF, label: str = LABEL):
        self.instance_of = instance_of
        self.label_relation = label
        self.triples: frozenset[Triple] = frozenset(triples)
        self.index_sp: dict[str, dict[str, set]] = defaultdict(lambda: defaultdict(set))
        self.index_op: dict[Value, dict[str, set]] = defaultdict(lambda: defaultdict(set))
        self.by_relation: dict[str, set[tuple[str, Value]]] = defaultdict(set)
        # canonical order so dict iteration does not depend on string hashing
        for t in sorted(self.triples, key=lambda t: (t.subject, t.relation, value_key(t.object))):
            self.index_sp[t.subject][t.relation].add(t.object)
            self.index_op[t.object][t.relation].add(t.subject)
            self.by_relation[t.relation].add((t.subject, t.object))
        self.type_index: dict[str, set[str]] = {
            s: {o for o in rels[instance_of] if isinstance(o, str)}
            for s, rels in self.index_sp.items() if instance_of in rels
        }
        self.values: frozenset[Value] = frozenset(self.index_sp) | frozenset(self.index_op)
        # freeze the defaultdicts so lookups never insert
        self.index_sp = {k: dict(v) for k, v in self.index_sp.items()}
        self.index_op = {k: dict(v) for k, v in self.index_op.items()}
        self.by_relation = dict(self.by_relation)

    def __len__(self) -> int:
        return len(self.triples)

    def __contains__(self, triple: Triple) -> bool:
        return triple in self.triples

    def has(self, s, r, o) -> bool:
        return o in self.index_sp.get(s, {}).get(r, ())

    def objects(self, s, r) -> set:
        return self.index_sp.get(s, {}).get(r, set())

    def subjects(self, r, o) -> set:
        return self.index_op.get(o, {}).get(r, set())

    def label(self, entity: str) -> str | None:
        labels = sorted(o.text for o in self.objects(entity, self.label_relation) if isinstance(o, StringLit))
        return labels[0] if labels else None

    def relations(self) -> list[str]:
        return sorted(self.by_relation)

    def type_ids(self) -> list[str]:
        return sorted({t for ts in self.type_index.values() for t in ts})

    def check_indexes(self) -> bool:
        """Rebuild from the triple set and compare."""
        fresh = KnowledgeBase(self.triples, self.instance_of, self.label_relation)
        return (fresh.index_sp == self.index_sp and fresh.index_op == self.index_op
                and fresh.type_index == self.type_index)


def load_triples(path, instance_of: str = INSTANCE_OF, label: str = LABEL) -> KnowledgeBase:
    """Read a ``subject<TAB>relation<TAB>object`` file.  Blank lines and ``#`` comments are skipped."""
    triples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise LoadError(f"expected 3 tab-separated fields, got {len(parts)}", lineno)
            s, r, o = parts
            try:
                triples.append(Triple(s, r, parse_value(o)))
            except ValueError as exc:
                raise LoadError(str(exc), lineno) from None
    return KnowledgeBase(triples, instance_of, label)


def dump_triples(kb: KnowledgeBase, path) -> None:
    rows = sorted(kb.triples, key=lambda t: (t.subject, t.relation, value_key(t.object)))
    Path(path).write_text("".join(f"{t.subject}\t{t.relation}\t{value_str(t.object)}\n" for t in rows),
                          encoding="utf-8")


def neighbors(kb: KnowledgeBase, node: str, direction: str = "outgoing") -> list[tuple[str, Value]]:
    if direction == "outgoing":
        rels = kb.index_sp.get(node, {})
    elif direction == "incoming":
        rels = kb.index_op.get(node, {})
    else:
        raise ValueError(f"direction must be 'outgoing' or 'incoming', got {direction!r}")
    pairs = [(r, v) for r, vs in rels.items() for v in vs]
    return sorted(pairs, key=lambda p: (p[0], value_key(p[1])))


# ---------------------------------------------------------------------------
# constraint semantics


def _compare(a, op: str, b) -> bool:
    if op == "=":
        return a == b
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    if op == "<=":
        return a <= b
    if op == ">=":
        return a >= b
    raise ValueError(f"unknown comparator {op!r}")


def _dates_of(kb: KnowledgeBase, b: Value, prop: str | None) -> list[_dt.date]:
    if isinstance(b, DateLit):
        return [b.date]
    if not isinstance(b, str):
        return []
    rels = kb.index_sp.get(b, {})
    props = [prop] if prop is not None else list(rels)
    return [o.date for p in props for o in rels.get(p, ()) if isinstance(o, DateLit)]


def _numbers_of(kb: KnowledgeBase, b: Value, prop: str | None) -> list[float]:
    if isinstance(b, NumberLit):
        return [b.value]
    if not isinstance(b, str):
        return []
    rels = kb.index_sp.get(b, {})
    props = [prop] if prop is not None else list(rels)
    return [o.value for p in props for o in rels.get(p, ()) if isinstance(o, NumberLit)]


def satisfies(kb: KnowledgeBase, c, b: Value) -> bool:
    """Per-binding check for entity / type / temporal / compare constraints."""
    from .query_graph import CompareConstraint, EntityConstraint, TemporalConstraint, TypeConstraint

    if isinstance(c, EntityConstraint):
        return b == c.entity
    if isinstance(c, TypeConstraint):
        return isinstance(b, str) and c.type_id in kb.type_index.get(b, ())
    if isinstance(c, TemporalConstraint):
        dates = _dates_of(kb, b, c.property)
        if c.explicit:
            return any(_compare(d, c.comparator, c.date) for d in dates)
        return any(_compare(d.year, c.comparator, c.date.year) for d in dates)
    if isinstance(c, CompareConstraint):
        return any(_compare(x, c.comparator, c.number) for x in _numbers_of(kb, b, c.property))
    raise TypeError(f"not a filter constraint: {c!r}")


def order_key(kb: KnowledgeBase, b: Value, prop: str, direction: str):
    """Sort key of a binding under an order constraint, or None when it has no such property."""
    keys = []
    if isinstance(b, str):
        for o in kb.index_sp.get(b, {}).get(prop, ()):
            if isinstance(o, NumberLit):
                keys.append((0, o.value))
            elif isinstance(o, DateLit):
                keys.append((1, float(o.date.toordinal())))
    if not keys:
        return None
    return min(keys) if direction == "ASC" else max(keys)


def apply_order(kb: KnowledgeBase, solutions: list[dict], c) -> list[dict]:
    """Keep solutions whose target binding holds the k-th distinct key (ties kept)."""
    keyed = []
    for sol in solutions:
        k = order_key(kb, sol[c.target], c.property, c.direction)
        if k is not None:
            keyed.append((k, sol))
    distinct = sorted({k for k, _ in keyed}, reverse=(c.direction == "DESC"))
    if len(distinct) < c.rank:
        return []
    chosen = distinct[c.rank - 1]
    return [sol for k, sol in keyed if k == chosen]


# ---------------------------------------------------------------------------
# execution


def _split_constraints(g):
    from .query_graph import OrderConstraint

    filters = [c for c in g.constraints if not isinstance(c, OrderConstraint)]
    orders = [c for c in g.constraints if isinstance(c, OrderConstraint)]
    return filters, orders


def solutions(kb: KnowledgeBase, g) -> list[dict]:
    """All node assignments satisfying edges and filter constraints (before ordering).

    Backtracking join: entity nodes are bound first, then the variable with the
    most bound neighbours (ties broken by fewest candidate values).
    """
    filters, _ = _split_constraints(g)
    by_node: dict[str, list] = defaultdict(list)
    for c in filters:
        by_node[c.target].append(c)
    binding: dict[str, Value] = {n.name: n.entity for n in g.nodes if n.entity is not None}
    for name, value in binding.items():
        if not all(satisfies(kb, c, value) for c in by_node[name]):
            return []
    for e in g.edges:
        if e.src in binding and e.dst in binding and not kb.has(binding[e.src], e.relation, binding[e.dst]):
            return []
    free = [n.name for n in g.nodes if n.name not in binding]
    incident: dict[str, list] = defaultdict(list)
    for e in g.edges:
        incident[e.src].append(e)
        incident[e.dst].append(e)
    out: list[dict] = []

    def domain(name: str) -> set | frozenset:
        best = None
        for e in incident[name]:
            if e.src == name and e.dst in binding:
                cand = kb.subjects(e.relation, binding[e.dst])
            elif e.dst == name and e.src in binding:
                cand = kb.objects(binding[e.src], e.relation)
            else:
                continue
            best = set(cand) if best is None else best & cand
            if not best:
                return set()
        return kb.values if best is None else best

    def pick() -> tuple[str, set]:
        choice = None
        for name in free:
            if name in binding:
                continue
            n_bound = sum(1 for e in incident[name] if (e.src if e.dst == name else e.dst) in binding)
            dom = domain(name)
            rank = (-n_bound, len(dom), name)
            if choice is None or rank < choice[0]:
                choice = (rank, name, dom)
        return choice[1], choice[2]

    def consistent(name: str, value) -> bool:
        for e in incident[name]:
            s = value if e.src == name else binding.get(e.src)
            o = value if e.dst == name else binding.get(e.dst)
            if e.src == e.dst:
                s = o = value
            if s is not None and o is not None and not kb.has(s, e.relation, o):
                return False
        return all(satisfies(kb, c, value) for c in by_node[name])

    def search(remaining: int):
        if remaining == 0:
            out.append(dict(binding))
            return
        name, dom = pick()
        for value in sorted(dom, key=value_key):
            if consistent(name, value):
                binding[name] = value
                search(remaining - 1)
                del binding[name]

    search(len(free))
    return out


def execute(kb: KnowledgeBase, g) -> set:
    """Answer-node bindings of ``g`` over ``kb``, with every constraint applied."""
    from .query_graph import validate

    problems = validate(g)
    if problems:
        raise ValueError("invalid query graph: " + "; ".join(problems))
    _, orders = _split_constraints(g)
    sols = solutions(kb, g)
    for c in orders:
        sols = apply_order(kb, sols, c)
    answer = g.answer.name
    return {s[answer] for s in sols}


def node_bindings(kb: KnowledgeBase, g, node: str) -> set:
    """Bindings of an arbitrary node across all solutions (ordering applied)."""
    _, orders = _split_constraints(g)
    sols = solutions(kb, g)
    for c in orders:
        sols = apply_order(kb, sols, c)
    return {s[node] for s in sols}


def brute_force_execute(kb: KnowledgeBase, g, max_variables: int = 4, max_values: int = 500) -> set:
    """Reference executor: enumerate every assignment of non-entity nodes to KB values.

    Shares no code with :func:`execute`; used as its test oracle.
    """
    free = [n.name for n in g.nodes if n.entity is None]
    universe = sorted(kb.values, key=value_key)
    if len(free) > max_variables or len(universe) > max_values:
        raise GuardExceeded(f"{len(free)} variables over {len(universe)} values exceeds the guard")
    fixed = {n.name: n.entity for n in g.nodes if n.entity is not None}
    triples = {(t.subject, t.relation, t.object) for t in kb.triples}

    def types_of(v):
        return {t.object for t in kb.triples if t.subject == v and t.relation == kb.instance_of}

    def props(v, p, kind):
        return [t.object for t in kb.triples
                if t.subject == v and (p is None or t.relation == p) and isinstance(t.object, kind)]

    def ok(c, v) -> bool:
        kind = type(c).__name__
        if kind == "EntityConstraint":
            return v == c.entity
        if kind == "TypeConstraint":
            return c.type_id in types_of(v)
        if kind == "TemporalConstraint":
            ds = [v] if isinstance(v, DateLit) else props(v, c.property, DateLit)
            if c.explicit:
                return any(_compare(d.date, c.comparator, c.date) for d in ds)
            return any(_compare(d.date.year, c.comparator, c.date.year) for d in ds)
        if kind == "CompareConstraint":
            xs = [v] if isinstance(v, NumberLit) else props(v, c.property, NumberLit)
            return any(_compare(x.value, c.comparator, c.number) for x in xs)
        raise TypeError(kind)

    filters = [c for c in g.constraints if type(c).__name__ != "OrderConstraint"]
    orders = [c for c in g.constraints if type(c).__name__ == "OrderConstraint"]
    sols = []
    for combo in itertools.product(universe, repeat=len(free)):
        assign = dict(fixed)
        assign.update(zip(free, combo))
        if all((assign[e.src], e.relation, assign[e.dst]) in triples for e in g.edges) and \
                all(ok(c, assign[c.target]) for c in filters):
            sols.append(assign)
    for c in orders:
        keyed = []
        for sol in sols:
            vals = [(0, o.value) if isinstance(o, NumberLit) else (1, float(o.date.toordinal()))
                    for o in props(sol[c.target], c.property, (NumberLit, DateLit))]
            if vals:
                keyed.append((min(vals) if c.direction == "ASC" else max(vals), sol))
        ranks = sorted({k for k, _ in keyed}, reverse=c.direction == "DESC")
        sols = [s for k, s in keyed if len(ranks) >= c.rank and k == ranks[c.rank - 1]]
    return {s[g.answer.name] for s in sols}
