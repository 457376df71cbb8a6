import math
from random import Random

import pytest

from gridlore.engine import combat_outcome, step
from gridlore.rps import (
    RPS_ALPHABET,
    RPS_GOAL,
    TRAIN_ALPHABET_SIZE,
    AlphabetTooSmall,
    DependencyGraph,
    DivisionDomain,
    RpsDynamics,
    all_graphs,
    make_rps_splits,
    parse_beats_statements,
    redundancy_percent,
    redundancy_probability,
    render_rps_texts,
    rps_episode,
    sample_graph,
)
from gridlore.worldgen import preset


def graphs_by_triple(graphs):
    out = {}
    for g in graphs:
        out.setdefault(g.nodes, []).append(g)
    return out


# ---------------------------------------------------------------------------
# Graphs


def test_graph_is_a_three_cycle():
    g = DependencyGraph(nodes=("a", "b", "c"), beats=(("a", "b"), ("b", "c"), ("c", "a")))
    m = g.beats_map
    assert sorted(m) == ["a", "b", "c"]
    assert sorted(m.values()) == ["a", "b", "c"]
    for n in g.nodes:
        assert m[n] != n
        assert m[m[m[n]]] == n


def test_graph_validation_rejects_non_cycles():
    with pytest.raises(ValueError):
        DependencyGraph(nodes=("a", "b", "b"), beats=(("a", "b"), ("b", "a"), ("a", "a")))
    with pytest.raises(ValueError):
        DependencyGraph(nodes=("a", "b", "c"), beats=(("a", "b"), ("b", "a"), ("c", "c")))
    with pytest.raises(ValueError):
        DependencyGraph(nodes=("a", "b", "c"), beats=(("a", "b"), ("b", "c"), ("a", "c")))


def test_all_graphs_enumerates_both_orientations():
    graphs = all_graphs(("a", "b", "c", "d"))
    assert len(graphs) == math.comb(4, 3) * 2
    assert len(set(graphs)) == 8
    for triple, pair in graphs_by_triple(graphs).items():
        assert len(pair) == 2
        assert pair[0].edges.isdisjoint(pair[1].edges)


def test_sampling_covers_every_cycle():
    # enumeration oracle: 10,000 draws from 4 characters must hit all 8 cycles
    rng = Random(0)
    seen = {sample_graph(("a", "b", "c", "d"), rng) for _ in range(10_000)}
    assert seen == set(all_graphs(("a", "b", "c", "d")))


def test_sample_graph_needs_three_characters():
    with pytest.raises(AlphabetTooSmall):
        sample_graph(("a", "b"), Random(0))


def test_alphabet_constants():
    assert len(RPS_ALPHABET) == 36
    assert TRAIN_ALPHABET_SIZE == 30


# ---------------------------------------------------------------------------
# Splits


def test_permutation_split_counts_and_orientation():
    split = make_rps_splits("permutation")
    assert len(split.train_graphs) == math.comb(30, 3) == 4060
    assert len(split.dev_graphs) == 4060
    assert set(split.train_graphs).isdisjoint(split.dev_graphs)
    by_triple_train = graphs_by_triple(split.train_graphs)
    by_triple_dev = graphs_by_triple(split.dev_graphs)
    assert by_triple_train.keys() == by_triple_dev.keys()
    for triple in by_triple_train:
        train_g, dev_g = by_triple_train[triple][0], by_triple_dev[triple][0]
        assert train_g.edges.isdisjoint(dev_g.edges)


def test_permutation_split_introduces_no_new_edges_or_nodes():
    split = make_rps_splits("permutation")
    train_edges = set()
    for g in split.train_graphs:
        train_edges |= g.edges
    for g in split.dev_graphs:
        assert g.edges <= train_edges
    assert split.dev_alphabet == split.train_alphabet


def test_new_edge_split_reserves_edges_for_dev():
    split = make_rps_splits("new_edge")
    train_edges = set()
    for g in split.train_graphs:
        train_edges |= g.edges
    for g in split.dev_graphs:
        assert g.edges - train_edges, "every dev graph must carry an unseen edge"
    assert len(split.train_graphs) + len(split.dev_graphs) == 2 * math.comb(30, 3)
    assert split.dev_alphabet == split.train_alphabet


def test_new_edge_nodes_split_holds_out_characters():
    split = make_rps_splits("new_edge_nodes")
    assert len(split.train_alphabet) == 30
    assert len(split.dev_alphabet) == 6
    assert set(split.train_alphabet).isdisjoint(split.dev_alphabet)
    assert set(split.train_alphabet) | set(split.dev_alphabet) == set(RPS_ALPHABET)
    assert len(split.dev_graphs) == math.comb(6, 3) * 2
    train_nodes = {n for g in split.train_graphs for n in g.nodes}
    for g in split.dev_graphs:
        assert set(g.nodes).isdisjoint(train_nodes)


def test_splits_deterministic_in_seed():
    plain = make_rps_splits.__wrapped__
    assert plain("permutation", 0) == plain("permutation", 0)
    assert plain("permutation", 0) != plain("permutation", 1)


def test_unknown_split_kind_rejected():
    with pytest.raises(ValueError):
        make_rps_splits.__wrapped__("diagonal", 0)
    with pytest.raises(ValueError):
        make_rps_splits("permutation").side("test")


# ---------------------------------------------------------------------------
# Rendering and parsing


def test_render_and_parse_round_trip():
    rng = Random(4)
    for _ in range(50):
        g = sample_graph(RPS_ALPHABET, rng)
        goal, doc = render_rps_texts(g, rng)
        assert goal == RPS_GOAL
        assert len(doc.statements) == 3
        assert parse_beats_statements(doc.raw_text, RPS_ALPHABET) == g.beats_map


def test_parse_skips_untyped_lines():
    text = "q beats z.\nthe monster growls\nz beats 3."
    got = parse_beats_statements(text, RPS_ALPHABET)
    assert got == {"q": "z", "z": "3"}


# ---------------------------------------------------------------------------
# Episodes


def test_rps_episode_layout():
    for seed in range(15):
        state, obs = rps_episode(preset("rps", seed=seed))
        assert len(state.monsters) == 1 and state.monsters[0].is_target
        assert len(state.items) == 3
        dyn = state.assignment
        assert {i.modifier for i in state.items} == set(dyn.graph.nodes)
        assert state.monsters[0].element == dyn.monster_type
        assert obs.goal == RPS_GOAL
        winners = [i for i in state.items if combat_outcome(state.monsters[0], i, dyn)]
        assert [w.modifier for w in winners] == [dyn.winning_type]


def test_rps_episode_graphs_come_from_the_configured_side():
    split = make_rps_splits("permutation")
    train_side = set(split.train_graphs)
    eval_side = set(split.dev_graphs)
    for seed in range(10):
        state, _ = rps_episode(preset("rps", seed=seed))
        assert state.assignment.graph in train_side
        state, _ = rps_episode(preset("rps", seed=seed, split="eval"))
        assert state.assignment.graph in eval_side


def test_rps_winning_item_wins_in_engine():
    state, _ = rps_episode(preset("rps", seed=2))
    dyn = state.assignment
    winning = next(i for i in state.items if i.modifier == dyn.winning_type)
    state.inventory = winning
    winning.pos = None
    mx, my = state.monsters[0].pos
    state.agent = (mx, my - 1)
    res = step(state, "down")
    assert res.outcome == "win" and res.reward == 1.0


def test_rps_dynamics_winning_type():
    g = DependencyGraph(nodes=("a", "b", "c"), beats=(("a", "b"), ("b", "c"), ("c", "a")))
    dyn = RpsDynamics(graph=g, monster_name="wolf", monster_type="b")
    assert dyn.winning_type == "a"
    assert dyn.modifier_element == {"a": "b", "b": "c", "c": "a"}


def test_rps_episode_deterministic():
    a, _ = rps_episode(preset("rps", seed=9))
    b, _ = rps_episode(preset("rps", seed=9))
    assert a.serialize() == b.serialize()


# ---------------------------------------------------------------------------
# Redundancy arithmetic


def test_redundancy_reference_point():
    # 5e7 frames / 10 per episode = 5e6 episodes over 24360 * 4060 pairs
    p = redundancy_probability(5 * 10**7, 10, 24_360, 4_060)
    assert p == (5 * 10**7 / 10) / (24_360 * 4_060)
    assert 0.0505 <= p <= 0.0507
    assert redundancy_percent(p) == "5%"


def test_redundancy_zero_frames():
    assert redundancy_probability(0, 10, 24_360, 4_060) == 0.0


@pytest.mark.parametrize(
    "args",
    [
        (1.0, 0, 10, 10),
        (1.0, -1, 10, 10),
        (1.0, 5, 0, 10),
        (1.0, 5, 10, 0),
        (-1.0, 5, 10, 10),
    ],
)
def test_redundancy_domain_errors(args):
    with pytest.raises(DivisionDomain):
        redundancy_probability(*args)
