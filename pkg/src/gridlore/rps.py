"""Cyclic three-type variant: one monster, three items, a beats-cycle to read.

Each episode samples a directed 3-cycle over single-character types (``a``
beats ``b`` beats ``c`` beats ``a``), spawns one monster with a random type
and one item per type, and documents the cycle as ``"x beats y."`` statements.
Winning means engaging the monster while holding the item whose type beats
the monster's type.

Three split constructions control what is novel at evaluation time:

* ``permutation``: every unordered type triple appears in training with one
  cycle orientation; evaluation gets the opposite orientations.  No new nodes
  or edges, only unseen whole graphs.
* ``new_edge``: a reserved subset of directed edges never occurs in training;
  evaluation graphs each contain at least one reserved edge.
* ``new_edge_nodes``: evaluation graphs are built from held-out characters,
  so every node and edge is new.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from random import Random

from .catalog import EntityCatalog, load_catalog
from .engine import (
    ItemInstance,
    MonsterInstance,
    Observation,
    PlacementFailed,
    WorldState,
    border_walls,
    find_path,
    interior_cells,
    render_observation,
)
from .templates import Document, Statement, tokenize
from .worldgen import EpisodeConfig

RPS_ALPHABET = tuple("abcdefghijklmnopqrstuvwxyz0123456789")
TRAIN_ALPHABET_SIZE = 30
RPS_GOAL = "defeat the monster"

_NEW_EDGE_RESERVED_FRACTION = 0.1
_PLACEMENT_ATTEMPTS = 500


class AlphabetTooSmall(ValueError):
    """Fewer than three distinct characters to build a cycle from."""


class DivisionDomain(ValueError):
    """A denominator of the redundancy formula is not positive."""


@dataclass(frozen=True)
class DependencyGraph:
    """A directed 3-cycle: ``beats`` lists (winner, loser) pairs, sorted."""

    nodes: tuple[str, str, str]
    beats: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if len(set(self.nodes)) != 3:
            raise ValueError("a dependency graph needs 3 distinct nodes")
        winners = [w for w, _ in self.beats]
        losers = [l for _, l in self.beats]
        if sorted(winners) != sorted(self.nodes) or sorted(losers) != sorted(self.nodes):
            raise ValueError("beats relation must be a cycle over the nodes")
        m = self.beats_map
        for n in self.nodes:
            if m[m[m[n]]] != n:
                raise ValueError("beats relation is not cyclic")

    @property
    def beats_map(self) -> dict[str, str]:
        return dict(self.beats)

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        return frozenset(self.beats)


def _cycle(triple: tuple[str, str, str], reverse: bool) -> DependencyGraph:
    a, b, c = triple
    pairs = ((a, c), (b, a), (c, b)) if reverse else ((a, b), (b, c), (c, a))
    return DependencyGraph(nodes=triple, beats=tuple(sorted(pairs)))


def sample_graph(alphabet: tuple[str, ...], rng: Random) -> DependencyGraph:
    """Uniformly sample one of the ``2 * C(n, 3)`` directed 3-cycles."""
    pool = sorted(set(alphabet))
    if len(pool) < 3:
        raise AlphabetTooSmall(f"need >= 3 distinct characters, got {len(pool)}")
    triple = tuple(sorted(rng.sample(pool, 3)))
    return _cycle(triple, rng.random() < 0.5)


def all_graphs(alphabet: tuple[str, ...]) -> list[DependencyGraph]:
    pool = sorted(set(alphabet))
    out = []
    for triple in itertools.combinations(pool, 3):
        out.append(_cycle(triple, False))
        out.append(_cycle(triple, True))
    return out


@dataclass(frozen=True)
class RpsSplit:
    kind: str
    seed: int
    train_alphabet: tuple[str, ...]
    dev_alphabet: tuple[str, ...]
    train_graphs: tuple[DependencyGraph, ...]
    dev_graphs: tuple[DependencyGraph, ...]

    def side(self, split_id: str) -> tuple[DependencyGraph, ...]:
        if split_id == "train":
            return self.train_graphs
        if split_id == "eval":
            return self.dev_graphs
        raise ValueError(f"unknown split {split_id!r}")


def _edge_union(graphs) -> set[tuple[str, str]]:
    edges: set[tuple[str, str]] = set()
    for g in graphs:
        edges |= g.edges
    return edges


@lru_cache(maxsize=32)
def make_rps_splits(kind: str, seed: int = 0) -> RpsSplit:
    """Construct the train/dev graph sets for one split kind."""
    rng = Random(f"cycle-split:{kind}:{seed}")
    full = sorted(RPS_ALPHABET)
    train_chars = tuple(sorted(rng.sample(full, TRAIN_ALPHABET_SIZE)))

    if kind == "permutation":
        train: list[DependencyGraph] = []
        dev: list[DependencyGraph] = []
        for triple in itertools.combinations(train_chars, 3):
            first = rng.random() < 0.5
            train.append(_cycle(triple, first))
            dev.append(_cycle(triple, not first))
        # Dev must introduce no new edge; repair by swapping orientations of
        # any offending triple (vanishingly rare, but made deterministic).
        for _ in range(10):
            train_edges = _edge_union(train)
            bad = [i for i, g in enumerate(dev) if not g.edges <= train_edges]
            if not bad:
                break
            for i in bad:
                train[i], dev[i] = dev[i], train[i]
        assert _edge_union(dev) <= _edge_union(train)
        return RpsSplit(kind, seed, train_chars, train_chars, tuple(train), tuple(dev))

    if kind == "new_edge":
        pairs = sorted(
            (a, b) for a in train_chars for b in train_chars if a != b
        )
        reserved = set(rng.sample(pairs, round(_NEW_EDGE_RESERVED_FRACTION * len(pairs))))
        train = []
        dev = []
        for g in all_graphs(train_chars):
            (dev if g.edges & reserved else train).append(g)
        assert train and dev
        # Every training character must still occur in some training graph.
        seen = {n for g in train for n in g.nodes}
        assert seen == set(train_chars)
        return RpsSplit(kind, seed, train_chars, train_chars, tuple(train), tuple(dev))

    if kind == "new_edge_nodes":
        dev_chars = tuple(sorted(set(full) - set(train_chars)))
        train = all_graphs(train_chars)
        dev = all_graphs(dev_chars)
        return RpsSplit(kind, seed, train_chars, dev_chars, tuple(train), tuple(dev))

    raise ValueError(f"unknown split kind {kind!r}")


@dataclass(frozen=True)
class RpsDynamics:
    """Episode rules for the cyclic variant, shaped like the quest rule set.

    ``modifier_element`` maps an item's type character to the type it beats,
    which is exactly what combat resolution consumes.
    """

    graph: DependencyGraph
    monster_name: str
    monster_type: str

    @property
    def modifier_element(self) -> dict[str, str]:
        return self.graph.beats_map

    @property
    def winning_type(self) -> str:
        for winner, loser in self.graph.beats:
            if loser == self.monster_type:
                return winner
        raise ValueError("monster type not in graph")


def render_rps_texts(graph: DependencyGraph, rng: Random) -> tuple[str, Document]:
    statements = [Statement("modifier", f"{w} beats {l}.") for w, l in graph.beats]
    order_seed = rng.getrandbits(32)
    Random(order_seed).shuffle(statements)
    doc = Document(
        statements=tuple(statements),
        text=tuple(tokenize("\n".join(s.text for s in statements))),
        statement_order_seed=order_seed,
    )
    return RPS_GOAL, doc


def parse_beats_statements(doc_text: str, alphabet: tuple[str, ...]) -> dict[str, str]:
    """Read ``"x beats y."`` lines back into a winner->loser map."""
    chars = set(alphabet)
    beats: dict[str, str] = {}
    for line in doc_text.splitlines():
        words = tokenize(line)
        if len(words) == 3 and words[1] == "beats" and words[0] in chars and words[2] in chars:
            beats[words[0]] = words[2]
    return beats


def rps_episode(
    config: EpisodeConfig,
    split: RpsSplit | None = None,
    rng: Random | None = None,
    catalog: EntityCatalog | None = None,
) -> tuple[WorldState, Observation]:
    """Build a cyclic-variant episode on the shared grid engine."""
    if rng is None:
        rng = Random(config.seed)
    if split is None:
        split = make_rps_splits(config.rps_kind, config.split_seed)
    cat = catalog or load_catalog()

    graphs = split.side(config.split)
    graph = graphs[rng.randrange(len(graphs))]
    monster_type = rng.choice(graph.nodes)
    monster_name = rng.choice(cat.monsters)
    dynamics = RpsDynamics(graph=graph, monster_name=monster_name, monster_type=monster_type)
    goal, doc = render_rps_texts(graph, rng)

    walls = border_walls(config.width, config.height)
    free = interior_cells(config.width, config.height, walls)
    if len(free) < 5:
        raise PlacementFailed(f"{config.width}x{config.height} grid has too few interior cells")

    winning = dynamics.winning_type
    for _ in range(_PLACEMENT_ATTEMPTS):
        cells = rng.sample(free, 5)
        agent, monster_pos = cells[0], cells[1]
        item_cells = dict(zip(graph.nodes, cells[2:]))
        others = {c for t, c in item_cells.items() if t != winning}
        blocked = set(walls) | {monster_pos} | others
        if find_path(config.width, config.height, blocked, agent, item_cells[winning]) is None:
            continue
        blocked = set(walls) | others
        if (
            find_path(config.width, config.height, blocked, item_cells[winning], monster_pos)
            is not None
        ):
            break
    else:
        raise PlacementFailed("no solvable placement found")

    monster = MonsterInstance(
        name=monster_name, element=monster_type, team="", pos=monster_pos, is_target=True
    )
    items = [ItemInstance(modifier=t, weapon="", pos=item_cells[t]) for t in graph.nodes]
    state = WorldState(
        config=config,
        assignment=dynamics,
        walls=walls,
        agent=agent,
        monsters=[monster],
        items=items,
        inventory=None,
        goal=goal,
        doc=doc,
        frame=0,
        rng=rng,
    )
    return state, render_observation(state)


def redundancy_probability(
    frames: float, mean_episode_len: float, grid_configs: int, graphs: int
) -> float:
    """Chance a training run revisits a (layout, graph) pair: episodes / pairs."""
    if mean_episode_len <= 0:
        raise DivisionDomain("mean_episode_len must be positive")
    if grid_configs <= 0 or graphs <= 0:
        raise DivisionDomain("grid_configs and graphs must be positive")
    if frames < 0:
        raise DivisionDomain("frames must be non-negative")
    return (frames / mean_episode_len) / (grid_configs * graphs)


def redundancy_percent(p: float) -> str:
    """Whole-percent formatting used when quoting the redundancy figure."""
    return f"{round(p * 100)}%"
