"""Query graphs: data model, validation, logical forms and heuristic generation."""

from __future__ import annotations

import datetime as _dt
import itertools
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .kb import (
    DateLit,
    KnowledgeBase,
    NumberLit,
    format_number,
    node_bindings,
    value_key,
)


class NodeKind(str, Enum):
    ANSWER = "answer"
    VARIABLE = "variable"
    ENTITY = "entity"


@dataclass(frozen=True)
class Node:
    name: str
    kind: NodeKind
    entity: str | None = None


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    relation: str


COMPARATORS = ("=", "<", ">", "<=", ">=")


@dataclass(frozen=True)
class EntityConstraint:
    target: str
    entity: str


@dataclass(frozen=True)
class TypeConstraint:
    target: str
    type_id: str


@dataclass(frozen=True)
class TemporalConstraint:
    """Date comparison.  Inexplicit constraints compare years only."""

    target: str
    comparator: str
    date: _dt.date
    explicit: bool
    property: str | None = None


@dataclass(frozen=True)
class OrderConstraint:
    target: str
    direction: str  # "ASC" | "DESC"
    rank: int
    property: str


@dataclass(frozen=True)
class CompareConstraint:
    target: str
    comparator: str
    number: float
    property: str | None = None


Constraint = EntityConstraint | TypeConstraint | TemporalConstraint | OrderConstraint | CompareConstraint


class InvalidGraphError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


@dataclass(frozen=True)
class QueryGraph:
    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...] = ()
    constraints: tuple = ()

    @property
    def answer(self) -> Node:
        return next(n for n in self.nodes if n.kind is NodeKind.ANSWER)

    def node(self, name: str) -> Node:
        return next(n for n in self.nodes if n.name == name)

    def relations(self) -> list[str]:
        return sorted({e.relation for e in self.edges})

    def entities(self) -> list[str]:
        return [n.entity for n in self.nodes if n.entity is not None]

    def with_constraint(self, c) -> "QueryGraph":
        return replace(self, constraints=self.constraints + (c,))


def answer_node(name: str = "?q") -> Node:
    return Node(name, NodeKind.ANSWER)


def variable_node(name: str) -> Node:
    return Node(name, NodeKind.VARIABLE)


def entity_node(entity: str) -> Node:
    return Node(entity, NodeKind.ENTITY, entity)


def validate(g: QueryGraph) -> list[str]:
    """Every invariant violation of ``g``; an empty list means valid."""
    problems = []
    names = [n.name for n in g.nodes]
    answers = [n for n in g.nodes if n.kind is NodeKind.ANSWER]
    if not answers:
        problems.append("no answer node")
    elif len(answers) > 1:
        problems.append("multiple answer nodes")
    for name in sorted({x for x in names if names.count(x) > 1}):
        problems.append(f"duplicate node name {name}")
    ents = [n.entity for n in g.nodes if n.kind is NodeKind.ENTITY]
    for e in sorted({x for x in ents if ents.count(x) > 1 and x is not None}):
        problems.append(f"duplicate entity node {e}")
    for n in g.nodes:
        if n.kind is NodeKind.ENTITY and not n.entity:
            problems.append(f"entity node {n.name} has no entity id")
        if n.kind is not NodeKind.ENTITY and n.entity is not None:
            problems.append(f"non-entity node {n.name} carries an entity id")
    declared = set(names)
    for e in g.edges:
        for end in (e.src, e.dst):
            if end not in declared:
                problems.append(f"edge references undeclared node {end}")
        if not e.relation:
            problems.append(f"edge {e.src}->{e.dst} has an empty relation")
    for c in g.constraints:
        if c.target not in declared:
            problems.append(f"constraint targets undeclared node {c.target}")
        if isinstance(c, OrderConstraint):
            if c.rank < 1:
                problems.append(f"order rank must be >= 1, got {c.rank}")
            if c.direction not in ("ASC", "DESC"):
                problems.append(f"order direction must be ASC or DESC, got {c.direction}")
        if isinstance(c, (TemporalConstraint, CompareConstraint)) and c.comparator not in COMPARATORS:
            problems.append(f"unknown comparator {c.comparator}")
    if names and not _connected(names, g.edges):
        problems.append("graph is disconnected")
    return problems


def _connected(names: list[str], edges) -> bool:
    adj = {n: set() for n in names}
    for e in edges:
        if e.src in adj and e.dst in adj:
            adj[e.src].add(e.dst)
            adj[e.dst].add(e.src)
    seen = {names[0]}
    todo = [names[0]]
    while todo:
        for m in adj[todo.pop()]:
            if m not in seen:
                seen.add(m)
                todo.append(m)
    return seen == set(adj)


# ---------------------------------------------------------------------------
# logical forms


def _constraint_line(c, rename: Mapping[str, str]) -> str:
    t = rename[c.target]
    if isinstance(c, EntityConstraint):
        return f"ENTITY({t}, {c.entity})"
    if isinstance(c, TypeConstraint):
        return f"TYPE({t}, {c.type_id})"
    if isinstance(c, TemporalConstraint):
        when = c.date.isoformat() if c.explicit else f"{c.date.year:04d}"
        tail = f", {c.property}" if c.property else ""
        return f"TEMPORAL({t}, {c.comparator}, {when}{tail})"
    if isinstance(c, OrderConstraint):
        return f"ORDER({t}, {c.direction}, {c.rank}, {c.property})"
    if isinstance(c, CompareConstraint):
        tail = f", {c.property}" if c.property else ""
        return f"COMPARE({t}, {c.comparator}, {format_number(c.number)}{tail})"
    raise TypeError(c)


def _render(g: QueryGraph, rename: Mapping[str, str]) -> list[str]:
    edges = sorted(f"({rename[e.src]})-[{e.relation}]->({rename[e.dst]})" for e in g.edges)
    filters = sorted(_constraint_line(c, rename) for c in g.constraints if not isinstance(c, OrderConstraint))
    # order constraints apply sequentially, so their relative order is meaningful
    orders = [_constraint_line(c, rename) for c in g.constraints if isinstance(c, OrderConstraint)]
    return edges + filters + orders


def to_logical_form(g: QueryGraph) -> str:
    """Canonical text form: sorted edge lines, then constraint lines.

    Variables are renamed ``?v1, ?v2, ...`` under the permutation giving the
    lexicographically smallest rendering, so isomorphic graphs print alike.
    """
    problems = validate(g)
    if problems:
        raise InvalidGraphError(problems)
    base = {n.name: (n.entity if n.kind is NodeKind.ENTITY else "?q") for n in g.nodes
            if n.kind is not NodeKind.VARIABLE}
    variables = [n.name for n in g.nodes if n.kind is NodeKind.VARIABLE]
    best = None
    for perm in itertools.permutations(range(1, len(variables) + 1)):
        rename = dict(base)
        rename.update({v: f"?v{i}" for v, i in zip(variables, perm)})
        lines = _render(g, rename)
        if best is None or lines < best:
            best = lines
    return "\n".join(best)


_EDGE_RE = re.compile(r"^\((\S+?)\)-\[([^\]\s]+)\]->\((\S+?)\)$")
_CONSTRAINT_RE = re.compile(r"^(ENTITY|TYPE|TEMPORAL|ORDER|COMPARE)\((.*)\)$")


def _node_for(name: str) -> Node:
    if name == "?q":
        return answer_node()
    if name.startswith("?"):
        return variable_node(name)
    return entity_node(name)


def parse_logical_form(text: str) -> QueryGraph:
    """Inverse of :func:`to_logical_form`.  Lines may also be separated by ``;``."""
    nodes: dict[str, Node] = {"?q": answer_node()}
    edges = []
    constraints = []
    lines = [ln.strip() for ln in re.split(r"[\n;]", text) if ln.strip()]
    for ln in lines:
        m = _EDGE_RE.match(ln)
        if m:
            src, rel, dst = m.groups()
            for name in (src, dst):
                nodes.setdefault(name, _node_for(name))
            edges.append(Edge(src, dst, rel))
            continue
        m = _CONSTRAINT_RE.match(ln)
        if not m:
            raise ValueError(f"unparseable logical-form line {ln!r}")
        kind, args = m.group(1), [a.strip() for a in m.group(2).split(",")]
        target = args[0]
        nodes.setdefault(target, _node_for(target))
        try:
            if kind == "ENTITY":
                constraints.append(EntityConstraint(target, args[1]))
            elif kind == "TYPE":
                constraints.append(TypeConstraint(target, args[1]))
            elif kind == "TEMPORAL":
                explicit = "-" in args[2]
                date = _dt.date.fromisoformat(args[2]) if explicit else _dt.date(int(args[2]), 1, 1)
                prop = args[3] if len(args) > 3 else None
                constraints.append(TemporalConstraint(target, args[1], date, explicit, prop))
            elif kind == "ORDER":
                constraints.append(OrderConstraint(target, args[1], int(args[2]), args[3]))
            else:
                prop = args[3] if len(args) > 3 else None
                constraints.append(CompareConstraint(target, args[1], float(args[2]), prop))
        except (IndexError, ValueError) as exc:
            raise ValueError(f"bad constraint line {ln!r}: {exc}") from None
    g = QueryGraph(tuple(nodes.values()), tuple(edges), tuple(constraints))
    problems = validate(g)
    if problems:
        raise InvalidGraphError(problems)
    return g


# ---------------------------------------------------------------------------
# candidate generation


@dataclass(frozen=True)
class GenLimits:
    max_hops: int = 2
    max_candidates: int = 100
    max_branch: int = 10

    def __post_init__(self):
        if self.max_hops not in (1, 2):
            raise ValueError(f"max_hops must be 1 or 2, got {self.max_hops}")
        if self.max_candidates < 1 or self.max_branch < 1:
            raise ValueError("max_candidates and max_branch must be positive")


DEFAULT_TRIGGERS: dict[str, list[str]] = {
    "order_asc": ["first", "smallest"],
    "order_desc": ["last", "largest"],
    "compare_gt": ["more than"],
    "compare_lt": ["less than"],
    "temporal_before": ["before"],
    "temporal_after": ["after"],
}


def load_limits(path) -> GenLimits:
    values = read_key_values(path)
    return GenLimits(**{k: int(v) for k, v in values.items()})


def read_key_values(path) -> dict[str, str]:
    """Flat ``key=value`` file; ``#`` comments and blank lines ignored."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}: line {lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_triggers(path) -> dict[str, list[str]]:
    """Trigger lexicon: ``key=phrase,phrase`` lines.  Unlisted keys keep their defaults."""
    triggers = {k: list(v) for k, v in DEFAULT_TRIGGERS.items()}
    for k, v in read_key_values(path).items():
        triggers[k] = [p.strip().lower() for p in v.split(",") if p.strip()]
    return triggers


def _phrase_positions(tokens: Sequence[str], phrase: str) -> list[int]:
    """End index (exclusive) of every occurrence of ``phrase`` in ``tokens``."""
    words = phrase.lower().split()
    n = len(words)
    return [i + n for i in range(len(tokens) - n + 1) if list(tokens[i:i + n]) == words]


_YEAR_RE = re.compile(r"^[0-9]{4}$")
_ISO_RE = re.compile(r"^[0-9]{4}-[0-9]{2}-[0-9]{2}$")
_NUM_RE = re.compile(r"^[+-]?[0-9]+(?:\.[0-9]+)?$")


def _branches(kb: KnowledgeBase, bindings, skip: set[str], limit: int, exclude=None):
    """Sorted (relation, direction) pairs incident to any binding, capped at ``limit``.

    ``direction`` is ``"out"`` when the binding is the triple's subject.
    """
    pairs = set()
    for b in bindings:
        if isinstance(b, str):
            pairs.update((r, "out") for r in kb.index_sp.get(b, {}) if r not in skip)
        pairs.update((r, "in") for r in kb.index_op.get(b, {}) if r not in skip)
    if exclude is not None:
        pairs.discard(exclude)
    return sorted(pairs)[:limit]


def _text_constraints(tokens: list[str], kb: KnowledgeBase, triggers: Mapping[str, list[str]]):
    """Constraints attached to every candidate: types named in the text and temporal mentions."""
    out = []
    for type_id in kb.type_ids():
        label = kb.label(type_id)
        if not label:
            continue
        words = label.lower().split()
        plural = words[:-1] + [words[-1] + "s"]
        if _phrase_positions(tokens, " ".join(words)) or _phrase_positions(tokens, " ".join(plural)):
            out.append(TypeConstraint("?q", type_id))
    before = {p for ph in triggers.get("temporal_before", ()) for p in _phrase_positions(tokens, ph)}
    after = {p for ph in triggers.get("temporal_after", ()) for p in _phrase_positions(tokens, ph)}
    for i, tok in enumerate(tokens):
        comparator = "<=" if i in before else ">=" if i in after else "="
        if _ISO_RE.match(tok):
            try:
                out.append(TemporalConstraint("?q", comparator, _dt.date.fromisoformat(tok), True))
            except ValueError:
                pass
        elif _YEAR_RE.match(tok):
            out.append(TemporalConstraint("?q", comparator, _dt.date(int(tok), 1, 1), False))
    return out


def generate_candidates(record, kb: KnowledgeBase, limits: GenLimits = GenLimits(),
                        triggers: Mapping[str, list[str]] | None = None,
                        skip_relations: Sequence[str] | None = None) -> list[QueryGraph]:
    """Heuristic staged expansion from the record's linked entities.

    1-hop graphs around each entity, 2-hop chains through one variable, a
    second linked entity attached to any non-entity node, then constraints
    triggered by the question text.  When an order or compare trigger fires,
    graphs whose answers carry a matching property are emitted only in their
    constrained forms.  Output is deduplicated by logical form
    and capped at ``limits.max_candidates``.
    """
    triggers = DEFAULT_TRIGGERS if triggers is None else triggers
    skip = set(skip_relations) if skip_relations is not None else {kb.label_relation, kb.instance_of}
    tokens = [t.lower() for t in record.tokens]
    seeds = list(dict.fromkeys(e.kb_id for e in record.entities))
    if not seeds:
        return []

    structural: list[QueryGraph] = []
    for e in seeds:
        one_hop = []
        for rel, direction in _branches(kb, [e], skip, limits.max_branch):
            edge = Edge(e, "?q", rel) if direction == "out" else Edge("?q", e, rel)
            one_hop.append(QueryGraph((answer_node(), entity_node(e)), (edge,)))
        structural.extend(one_hop)
        if limits.max_hops == 2:
            for g in one_hop:
                first = g.edges[0]
                # the 1-hop answer becomes the intermediate variable
                v_edge = Edge(first.src if first.src != "?q" else "?v", first.dst if first.dst != "?q" else "?v",
                              first.relation)
                chain = QueryGraph((entity_node(e), variable_node("?v")), (v_edge,))
                v_vals = node_bindings(kb, QueryGraph((answer_node("?v"), entity_node(e)), (v_edge,)), "?v")
                back = (first.relation, "in" if v_edge.dst == "?v" else "out")
                for rel, direction in _branches(kb, v_vals, skip, limits.max_branch, exclude=back):
                    edge = Edge("?v", "?q", rel) if direction == "out" else Edge("?q", "?v", rel)
                    structural.append(QueryGraph(chain.nodes + (answer_node(),), chain.edges + (edge,)))

    expanded: list[QueryGraph] = []
    for g in structural:
        expanded.append(g)
        for e2 in seeds:
            if e2 in g.entities():
                continue
            for n in g.nodes:
                if n.kind is NodeKind.ENTITY:
                    continue
                vals = node_bindings(kb, g, n.name)
                rels = set()
                for b in vals:
                    if isinstance(b, str):
                        rels.update((r, "out") for r, objs in kb.index_sp.get(b, {}).items() if e2 in objs)
                    rels.update((r, "in") for r, subs in kb.index_op.get(b, {}).items() if e2 in subs)
                for rel, direction in sorted(r for r in rels if r[0] not in skip)[:limits.max_branch]:
                    edge = Edge(n.name, e2, rel) if direction == "out" else Edge(e2, n.name, rel)
                    expanded.append(QueryGraph(g.nodes + (entity_node(e2),), g.edges + (edge,)))

    shared = _text_constraints(tokens, kb, triggers)
    order_dirs = []
    for key, direction in (("order_asc", "ASC"), ("order_desc", "DESC")):
        if any(_phrase_positions(tokens, ph) for ph in triggers.get(key, ())):
            order_dirs.append(direction)
    compares = []
    for key, comparator in (("compare_gt", ">"), ("compare_lt", "<")):
        for ph in triggers.get(key, ()):
            for end in _phrase_positions(tokens, ph):
                if end < len(tokens) and _NUM_RE.match(tokens[end]):
                    compares.append((comparator, float(tokens[end])))

    seen: set[str] = set()
    out: list[QueryGraph] = []

    def emit(g: QueryGraph) -> bool:
        lf = to_logical_form(g)
        if lf not in seen:
            seen.add(lf)
            out.append(g)
        return len(out) >= limits.max_candidates

    for g in expanded:
        g = replace(g, constraints=g.constraints + tuple(shared))
        variants = []
        if order_dirs or compares:
            answers = node_bindings(kb, g, "?q")
            numeric, dated = set(), set()
            for b in answers:
                if not isinstance(b, str):
                    continue
                for rel, objs in kb.index_sp.get(b, {}).items():
                    if any(isinstance(o, NumberLit) for o in objs):
                        numeric.add(rel)
                    if any(isinstance(o, DateLit) for o in objs):
                        dated.add(rel)
            for direction in order_dirs:
                for prop in sorted(numeric | dated)[:limits.max_branch]:
                    variants.append(g.with_constraint(OrderConstraint("?q", direction, 1, prop)))
            for comparator, number in compares:
                for prop in sorted(numeric)[:limits.max_branch]:
                    variants.append(g.with_constraint(CompareConstraint("?q", comparator, number, prop)))
        # a triggered constraint replaces the bare graph: the encoder cannot tell them apart
        for v in variants or [g]:
            if emit(v):
                return out
    return out
