import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grgcn.config import TrainConfig
from grgcn.dataset import DatasetRecord
from grgcn.graph_encoder import (
    DegenerateEncodingError,
    RelationLabelError,
    encode_graph,
    fine_grained,
    fuse,
    init_graph_params,
    node_init,
    relation_attention,
    relation_level_embed,
    relational_forward,
    relational_pool,
    score,
    sense_weights,
    structure_forward,
    wordnet_sense_vector,
    wordnet_word_vector,
)
from grgcn.gradcheck import instance
from grgcn.lexicon import EmbeddingTable, RelationVocabulary, SenseLexicon, parse_lexicon
from grgcn.numerics import ParamRegistry, backprop, constant, finite_diff_check, tensor_sum
from grgcn.query_graph import Edge, QueryGraph, answer_node, entity_node, parse_logical_form, variable_node
from grgcn.question_encoder import (
    HEAD_TO_DEP,
    SELF_LOOP,
    DependencyError,
    build_dependency_graph,
    edge_classes,
    encode_question,
    init_question_params,
    question_rgcn,
    token_attention,
)
from grgcn.trainer import hinge_loss


def make_record(tokens, heads, labels=None):
    labels = labels or ["dep"] * len(tokens)
    return DatasetRecord("t", " ".join(tokens), list(tokens), list(zip(heads, labels)))


def question_setup(d=5, seed=0, **overrides):
    cfg = TrainConfig(dim=d, seed=seed, **overrides)
    rng = np.random.default_rng(seed)
    words = ["who", "directed", "it", "the", "film", "a", "b", "c", "d"]
    table = EmbeddingTable(words, rng.normal(0, 1, (len(words), d)))
    params = ParamRegistry()
    table.register(params)
    classes = edge_classes(cfg)
    init_question_params(params, cfg, classes, rng)
    return cfg, table, params, classes


# --- dependency graph -------------------------------------------------------


def test_single_token_graph():
    dep = build_dependency_graph(make_record(["who"], [0]))
    assert dep.edges == [(0, 0, SELF_LOOP)]


def test_who_directed_it():
    dep = build_dependency_graph(make_record(["who", "directed", "it"], [2, 0, 2]))
    assert sorted(e for e in dep.edges if e[2] == HEAD_TO_DEP) == [(1, 0, HEAD_TO_DEP), (1, 2, HEAD_TO_DEP)]
    assert sum(1 for e in dep.edges if e[2] == SELF_LOOP) == 3


def test_typed_labels():
    dep = build_dependency_graph(make_record(["who", "directed"], [2, 0], ["nsubj", "root"]), typed=True)
    assert (1, 0, "nsubj") in dep.edges


@pytest.mark.parametrize("heads", [[2, 1], [3, 0], [1, 0]])
def test_bad_heads(heads):
    with pytest.raises(DependencyError):
        build_dependency_graph(make_record(["a", "b"], heads))


# --- question RGCN ----------------------------------------------------------


def test_isolated_token_identity():
    cfg, table, params, classes = question_setup(d=3)
    params["q.l0.W0"].data[...] = np.eye(3)
    params[f"q.l0.W_{SELF_LOOP}"].data[...] = 0.0
    dep = build_dependency_graph(make_record(["a"], [0]))
    h0 = constant([[0.5, 0.0, 2.0]])
    np.testing.assert_array_equal(question_rgcn(dep, h0, params, 1, classes).data, h0.data)


def test_adjacency_rows_normalised():
    from grgcn.question_encoder import DependencyGraph

    cfg, table, params, classes = question_setup(d=3)
    g = DependencyGraph(["x", "y", "z"], [(1, 0, HEAD_TO_DEP), (2, 0, HEAD_TO_DEP), (0, 0, SELF_LOOP)])
    adj = g.adjacency(classes)
    np.testing.assert_allclose(adj[HEAD_TO_DEP][0], [0.0, 0.5, 0.5])
    np.testing.assert_allclose(adj[SELF_LOOP][0], [1.0, 0.0, 0.0])
    assert not adj[HEAD_TO_DEP][1:].any()


def test_identical_neighbours_average():
    cfg, table, params, classes = question_setup(d=3)
    from grgcn.question_encoder import DependencyGraph

    h = constant(np.array([[0.1, 0.2, 0.3], [1.0, 2.0, 0.5], [1.0, 2.0, 0.5]]))
    two = DependencyGraph(["x", "y", "z"], [(1, 0, HEAD_TO_DEP), (2, 0, HEAD_TO_DEP)])
    one = DependencyGraph(["x", "y", "z"], [(1, 0, HEAD_TO_DEP)])
    a = question_rgcn(two, h, params, 1, classes).data[0]
    b = question_rgcn(one, h, params, 1, classes).data[0]
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_rgcn_gradients_four_token_tree():
    cfg, table, params, classes = question_setup(d=4, seed=3)
    dep = build_dependency_graph(make_record(["a", "b", "c", "d"], [0, 1, 1, 3]))
    h0 = table.rows(dep.tokens)
    rep = finite_diff_check(lambda p: tensor_sum(question_rgcn(dep, h0, p, 3, classes)), params,
                            names=[n for n in params.names() if n.startswith("q.l")])
    assert rep.passed, rep.failures()


# --- token attention --------------------------------------------------------


def test_attention_single_token():
    a = token_attention(constant([1.0, 2.0]), constant([[3.0, 1.0, 0.0, 2.0]]), constant(np.ones((2, 4))))
    np.testing.assert_array_equal(a.data, [1.0])


def test_attention_identical_states():
    states = constant([[1.0, 2.0], [1.0, 2.0]])
    a = token_attention(constant([0.3, -0.1]), states, constant(np.ones((2, 2))))
    np.testing.assert_array_equal(a.data, [0.5, 0.5])


def test_attention_zero_m_uniform():
    states = constant(np.arange(12.0).reshape(3, 4))
    a = token_attention(constant([1.0, 1.0]), states, constant(np.zeros((2, 4))))
    np.testing.assert_allclose(a.data, [1 / 3] * 3, rtol=0, atol=1e-15)


def test_attention_shape_error():
    from grgcn.numerics import DimensionError

    with pytest.raises(DimensionError):
        token_attention(constant([1.0, 1.0]), constant(np.ones((3, 4))), constant(np.ones((2, 3))))


# --- encode_question --------------------------------------------------------


def test_single_token_h_q():
    cfg, table, params, classes = question_setup(d=4)
    rec = make_record(["who"], [0])
    enc = encode_question(rec, table, params, cfg, classes)
    x = np.concatenate([enc.h0.data[0], enc.h_final.data[0]])
    expected = np.maximum(params["q.W"].data @ x + params["q.b"].data, 0.0)
    np.testing.assert_array_equal(enc.attention.data, [1.0])
    np.testing.assert_allclose(enc.h_q.data, expected, rtol=0, atol=1e-14)
    np.testing.assert_array_equal(enc.e_avg.data, table.lookup("who").data)


def test_concat_off_shapes():
    cfg, table, params, classes = question_setup(d=4, concat_sequence=False)
    assert params["q.W"].shape == (4, 4)
    assert params["q.M"].shape == (4, 4)
    enc = encode_question(make_record(["who", "directed", "it"], [2, 0, 2]), table, params, cfg, classes)
    assert enc.h_q.shape == (4,)


def test_eval_mode_deterministic():
    cfg, table, params, classes = question_setup(d=4)
    rec = make_record(["who", "directed", "it"], [2, 0, 2])
    a = encode_question(rec, table, params, cfg, classes, train=False, rng=np.random.default_rng(1))
    b = encode_question(rec, table, params, cfg, classes, train=False, rng=np.random.default_rng(2))
    np.testing.assert_array_equal(a.h_q.data, b.h_q.data)


def _permute_record(tokens, heads, perm):
    """Move token i to position perm[i], remapping heads."""
    n = len(tokens)
    new_tokens = [None] * n
    new_heads = [None] * n
    for i in range(n):
        new_tokens[perm[i]] = tokens[i]
        new_heads[perm[i]] = 0 if heads[i] == 0 else perm[heads[i] - 1] + 1
    return new_tokens, new_heads


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_token_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    words = ["who", "directed", "it", "the", "film", "a", "b", "c", "d"]
    tokens = [words[int(i)] for i in rng.integers(0, len(words), n)]
    root = int(rng.integers(n))
    order = [root] + [int(i) for i in rng.permutation([i for i in range(n) if i != root])]
    heads = [0] * n
    for k, i in enumerate(order[1:], 1):
        heads[i] = order[int(rng.integers(k))] + 1
    cfg, table, params, classes = question_setup(d=4, seed=seed % 97)
    perm = [int(i) for i in rng.permutation(n)]
    p_tokens, p_heads = _permute_record(tokens, heads, perm)
    a = encode_question(make_record(tokens, heads), table, params, cfg, classes).h_q.data
    b = encode_question(make_record(p_tokens, p_heads), table, params, cfg, classes).h_q.data
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


# --- graph encoder: structure ----------------------------------------------


def graph_setup(d=4, seed=0, relations=("a", "b"), **overrides):
    cfg = TrainConfig(dim=d, seed=seed, **overrides)
    rng = np.random.default_rng(seed)
    rv = RelationVocabulary(list(relations), d, seed)
    params = ParamRegistry()
    rv.register(params)
    init_graph_params(params, cfg, len(rv), rng)
    return cfg, rv, params


def test_node_init():
    cfg, rv, params = graph_setup()
    table = EmbeddingTable(["barack", "obama"], np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]]))
    g = QueryGraph((answer_node(), variable_node("?v"), entity_node("Q76")),
                   (Edge("Q76", "?v", "a"), Edge("?v", "?q", "b")))
    h0 = node_init(g, table, params, {"Q76": "Barack Obama"}).data
    np.testing.assert_array_equal(h0[0], params["g.answer_init"].data)
    np.testing.assert_array_equal(h0[1], params["g.var_init"].data)
    np.testing.assert_array_equal(h0[2], [0.5, 0.5, 0, 0])


def test_relation_attention_examples():
    cfg, rv, params = graph_setup()
    one = QueryGraph((answer_node(), entity_node("E")), (Edge("E", "?q", "a"),))
    two = QueryGraph((answer_node(), entity_node("E"), entity_node("F")),
                     (Edge("E", "?q", "a"), Edge("F", "?q", "a")))
    mixed = QueryGraph((answer_node(), entity_node("E"), entity_node("F")),
                       (Edge("E", "?q", "a"), Edge("F", "?q", "b")))
    e = constant([0.3, -1.0, 2.0, 0.5])
    np.testing.assert_array_equal(relation_attention(e, one, rv).data, [1.0])
    np.testing.assert_array_equal(relation_attention(e, two, rv).data, [0.5, 0.5])
    np.testing.assert_array_equal(relation_attention(constant(np.zeros(4)), mixed, rv).data, [0.5, 0.5])
    assert relation_attention(e, QueryGraph((answer_node(),)), rv) is None


def test_answer_only_graph_identity():
    cfg, rv, params = graph_setup(d=3)
    cfg = cfg.replace(graph_layers=1)
    params["g.l0.W0"].data[...] = np.eye(3)
    g = QueryGraph((answer_node(),))
    h0 = constant([[0.2, 0.0, 1.5]])
    np.testing.assert_array_equal(structure_forward(g, h0, None, params, cfg, rv).h_structure.data, h0.data[0])


def test_attention_halves_messages():
    cfg, rv, params = graph_setup(d=3, graph_layers=1)
    params["g.l0.W0"].data[...] = 0.0
    g = QueryGraph((answer_node(), entity_node("E"), entity_node("F")),
                   (Edge("E", "?q", "a"), Edge("F", "?q", "a")))
    h0 = constant(np.abs(np.random.default_rng(0).normal(size=(3, 3))))
    params["g.l0.W_rel"].data[...] = np.abs(params["g.l0.W_rel"].data)
    att = relation_attention(constant([1.0, 0.0, 0.0]), g, rv)
    on = structure_forward(g, h0, att, params, cfg, rv).h_structure.data
    off = structure_forward(g, h0, att, params, cfg.replace(structure_attention=False), rv).h_structure.data
    np.testing.assert_allclose(on, off / 2, rtol=0, atol=1e-15)


def _relabel(g: QueryGraph, mapping):
    from grgcn.query_graph import Node

    nodes = tuple(Node(mapping.get(n.name, n.name), n.kind, n.entity) for n in g.nodes)
    edges = tuple(Edge(mapping.get(e.src, e.src), mapping.get(e.dst, e.dst), e.relation) for e in g.edges)
    return QueryGraph(nodes, edges)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_node_relabel_invariance(seed):
    rng = np.random.default_rng(seed)
    cfg, rv, params = graph_setup(d=4, seed=seed % 13, inverse_messages=bool(seed % 2))
    table = EmbeddingTable(["x", "y"], rng.normal(size=(2, 4)))
    names = ["?q", "?v1", "?v2", "Q1"][: int(rng.integers(2, 5))]
    nodes = [answer_node()] + [variable_node(n) for n in names[1:] if n.startswith("?")] + \
        [entity_node(n) for n in names[1:] if not n.startswith("?")]
    edges = []
    for i in range(1, len(names)):
        j = int(rng.integers(i))
        a, b = (names[i], names[j]) if rng.random() < 0.5 else (names[j], names[i])
        edges.append(Edge(a, b, "ab"[int(rng.integers(2))]))
    g = QueryGraph(tuple(nodes), tuple(edges))
    mapping = {n: f"?w{k}" for k, n in enumerate(names) if n.startswith("?v")}
    h = _relabel(g, mapping)
    # also shuffle declaration order
    order = rng.permutation(len(h.nodes))
    h = QueryGraph(tuple(h.nodes[i] for i in order), tuple(h.edges[i] for i in rng.permutation(len(h.edges))))
    e = constant(rng.normal(size=4))
    labels = {"Q1": "x y"}
    a = structure_forward(g, node_init(g, table, params, labels), relation_attention(e, g, rv), params, cfg, rv)
    b = structure_forward(h, node_init(h, table, params, labels), relation_attention(e, h, rv), params, cfg, rv)
    np.testing.assert_allclose(a.h_structure.data, b.h_structure.data, rtol=0, atol=1e-12)


def test_untyped_renaming_invariance():
    d = 4
    cfg = TrainConfig(dim=d, relation_typing="untyped")
    g = parse_logical_form("(Q1)-[a]->(?v1)\n(?v1)-[b]->(?q)")
    h = parse_logical_form("(Q1)-[c]->(?v1)\n(?v1)-[d]->(?q)")
    params_g, params_h = ParamRegistry(), ParamRegistry()
    rv_g = RelationVocabulary(["a", "b"], d, 0)
    rv_h = RelationVocabulary(["c", "d"], d, 0)
    rv_g.register(params_g)
    rv_h.register(params_h)
    init_graph_params(params_g, cfg, 2, np.random.default_rng(5))
    init_graph_params(params_h, cfg, 2, np.random.default_rng(5))
    h0 = constant(np.abs(np.random.default_rng(1).normal(size=(3, d))))
    e = constant([0.1, 0.2, -0.3, 0.4])
    a = structure_forward(g, h0, relation_attention(e, g, rv_g), params_g, cfg, rv_g).h_structure.data
    b = structure_forward(h, h0, relation_attention(e, h, rv_h), params_h, cfg, rv_h).h_structure.data
    np.testing.assert_array_equal(a, b)


def test_structure_sees_direction_and_order():
    cfg, rv, params = graph_setup(d=4, seed=2)
    table = EmbeddingTable(["anna"], np.array([[1.0, 0.5, 0.2, 0.9]]))
    g1 = parse_logical_form("(Q1)-[a]->(?v1)\n(?v1)-[b]->(?q)")
    g2 = parse_logical_form("(Q1)-[b]->(?v1)\n(?v1)-[a]->(?q)")
    e = constant([0.1, 0.2, 0.3, 0.4])
    out = [structure_forward(g, node_init(g, table, params, {"Q1": "anna"}), relation_attention(e, g, rv),
                             params, cfg, rv).h_structure.data for g in (g1, g2)]
    assert not np.allclose(out[0], out[1])


# --- graph encoder: relational ---------------------------------------------


def test_relation_level_embed():
    cfg, rv, params = graph_setup(relations=("a", "b"))
    g = parse_logical_form("(Q1)-[b]->(?v1)\n(?v1)-[a]->(?q)\n(Q1)-[a]->(?q)")
    rels, rows = relation_level_embed(g, rv)
    assert rels == ["a", "b"]
    np.testing.assert_array_equal(rows.data, rv.matrix.data[[0, 1]])
    rels, rows = relation_level_embed(parse_logical_form("(Q1)-[zzz]->(?q)"), rv)
    np.testing.assert_array_equal(rows.data[0], rv.matrix.data[rv.unk_index])


def test_sense_vector_examples():
    lemma = constant([[1.0, 2.0]])
    np.testing.assert_array_equal(wordnet_sense_vector(lemma, constant([3.0, -1.0])).data, [1.0, 2.0])
    twins = constant([[1.0, 2.0], [1.0, 2.0]])
    np.testing.assert_array_equal(wordnet_sense_vector(twins, constant([0.4, 0.1])).data, [1.0, 2.0])
    pair = constant([[1.0, 0.0], [0.0, 3.0]])
    np.testing.assert_allclose(wordnet_sense_vector(pair, constant([0.0, 0.0])).data, [0.5, 1.5])


def test_subject_sense_attention():
    lex = parse_lexicon("subject: topic = topic, theme, subject\nsubject: citizen = national, subject\n")
    words = ["topic", "theme", "subject", "national"]
    m = np.array([[1.0, 0.0], [1.0, 0.1], [0.5, 0.5], [0.0, 1.0]])
    table = EmbeddingTable(words, m)
    params = ParamRegistry()
    params.add("wn.W", np.ones(1))
    params.add("wn.b", np.zeros(1))
    e = constant([1.0, 0.0])  # aligned with the topic lemmas
    senses = [wordnet_sense_vector(table.rows(list(s.lemmas)), e) for s in lex.senses_of("subject")]
    from grgcn.numerics import stack

    w = sense_weights(stack(senses), e, params).data
    # hand computation of both logits
    def sense(rows):
        rows = np.array(rows)
        a = np.exp(np.tanh(rows @ [1.0, 0.0]))
        return (a / a.sum()) @ rows
    s1, s2 = sense(m[[0, 1, 2]]), sense(m[[3, 2]])
    l1, l2 = np.tanh(s1[0]), np.tanh(s2[0])
    np.testing.assert_allclose(w, np.exp([l1, l2]) / np.exp([l1, l2]).sum(), rtol=1e-12)
    assert w[0] > 0.5


def test_single_sense_word_ignores_affine():
    lex = SenseLexicon()
    table = EmbeddingTable(["held"], np.array([[0.3, 0.7]]))
    params = ParamRegistry()
    params.add("wn.W", np.array([5.0]))
    params.add("wn.b", np.array([-2.0]))
    v = wordnet_word_vector("held", lex, constant([1.0, 1.0]), table, params)
    np.testing.assert_array_equal(v.data, [0.3, 0.7])


def test_wordnet_off_is_raw_lookup():
    lex = parse_lexicon("held: a = occupied, held\nheld: b = gripped\n")
    table = EmbeddingTable(["held", "occupied", "gripped"], np.random.default_rng(0).normal(size=(3, 4)))
    params = ParamRegistry()
    params.add("wn.W", np.ones(1))
    params.add("wn.b", np.zeros(1))
    v = wordnet_word_vector("held", lex, constant(np.ones(4)), table, params, use_wordnet=False)
    np.testing.assert_array_equal(v.data, table.lookup("held").data)


def test_fine_grained_example():
    out = fine_grained(constant([[1.0, 1.0]]), [constant([[1.0, 0.0], [0.0, 1.0]])])
    np.testing.assert_array_equal(out.data, [[1.5, 1.5]])
    with pytest.raises(RelationLabelError):
        fine_grained(constant([[1.0, 1.0]]), [constant(np.zeros((0, 2)))])


def test_fine_grained_off_is_whole():
    cfg, rv, params = graph_setup(relations=("position_held",), fine_grained=False)
    table = EmbeddingTable(["position", "held"], np.ones((2, 4)))
    g = parse_logical_form("(?q)-[position_held]->(Q1)")
    enc = relational_forward(g, constant(np.ones(4)), table, rv, SenseLexicon(), params, cfg)
    np.testing.assert_array_equal(enc.r_fine.data, enc.r_whole.data)


def test_pool_examples():
    np.testing.assert_array_equal(relational_pool(constant([[1.0, 0.0], [0.0, 1.0]]), 2).data, [1.0, 1.0])
    np.testing.assert_array_equal(relational_pool(constant([[3.0, -1.0]]), 2).data, [3.0, -1.0])
    np.testing.assert_array_equal(relational_pool(None, 3).data, [0.0, 0.0, 0.0])


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_relation_row_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    rows = rng.normal(size=(int(rng.integers(1, 6)), 5))
    perm = rng.permutation(rows.shape[0])
    a = relational_pool(constant(rows), 5).data
    b = relational_pool(constant(rows[perm]), 5).data
    np.testing.assert_array_equal(a, b)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_h_relational_independent_of_vocab_order(seed):
    """Permuting the relation vocabulary rows (and indices with them) leaves h_relational unchanged."""
    rng = np.random.default_rng(seed)
    rels = ["spouse", "father", "position_held", "located_in"]
    d = 4
    cfg = TrainConfig(dim=d)
    table = EmbeddingTable(["spouse", "father", "position", "held", "located", "in"], rng.normal(size=(6, d)))
    base = rng.normal(size=(len(rels) + 1, d))
    perm = [int(i) for i in rng.permutation(len(rels))]
    rv1 = RelationVocabulary(rels, d, 0)
    rv1.matrix.data[...] = base
    rv2 = RelationVocabulary([rels[i] for i in perm], d, 0)
    rv2.matrix.data[...] = np.vstack([base[perm], base[-1:]])
    params = ParamRegistry()
    params.add("wn.W", np.ones(1))
    params.add("wn.b", np.zeros(1))
    chosen = [rels[i] for i in rng.permutation(len(rels))[: int(rng.integers(1, 4))]]
    lines = [f"(Q{k})-[{r}]->(?q)" for k, r in enumerate(chosen)]
    g = parse_logical_form("\n".join(lines))
    e = constant(rng.normal(size=d))
    a = relational_forward(g, e, table, rv1, SenseLexicon(), params, cfg).h_relational.data
    b = relational_forward(g, e, table, rv2, SenseLexicon(), params, cfg).h_relational.data
    np.testing.assert_array_equal(a, b)


# --- fusion, scoring, gradients ---------------------------------------------


def test_fuse_identity():
    params = ParamRegistry()
    params.add("fuse.W", np.eye(3))
    params.add("fuse.b", np.zeros(3))
    out = fuse(constant([1.0, 0.0, 2.0]), constant([0.5, 0.5, 0.0]), params)
    np.testing.assert_array_equal(out.data, [1.5, 0.5, 2.0])


def test_score_self_and_degenerate():
    h = constant([0.3, 0.4, 0.0])
    assert score(h, h).item() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DegenerateEncodingError):
        score(h, constant(np.zeros(3)))


def test_full_path_gradients():
    model, record, pos, neg = instance(seed=1)

    def loss(_):
        q = model.encode_question(record)
        return hinge_loss(model.score(q, model.encode_graph(pos, q)),
                          [model.score(q, model.encode_graph(neg, q))], model.cfg.margin)

    rep = finite_diff_check(loss, model.params)
    assert rep.passed, rep.failures()


def test_parameter_coverage():
    """Every parameter but the sense bias receives gradient on the crafted instance.

    The sense bias is a scalar added to every sense logit, so softmax makes it
    inert: its gradient is zero up to round-off.
    """
    model, record, pos, neg = instance(seed=0)
    q = model.encode_question(record)
    loss = hinge_loss(model.score(q, model.encode_graph(pos, q)),
                      [model.score(q, model.encode_graph(neg, q))], model.cfg.margin)
    grads = backprop(loss, model.params)
    dead = [n for n, g in grads.items() if np.abs(g).max() < 1e-8]
    assert dead == ["wn.b"]
    assert np.abs(grads["wn.b"]).max() < 1e-12


def test_encode_graph_nonnegative():
    model, record, pos, neg = instance(seed=2)
    q = model.encode_question(record)
    for g in (pos, neg):
        enc = encode_graph(g, q.e_avg, model.table, model.relvocab, model.lexicon, model.params, model.cfg,
                           model.labels)
        assert (enc.h_whole.data >= 0).all()
        assert enc.structure.attention.data.sum() == pytest.approx(1.0, abs=1e-12)
