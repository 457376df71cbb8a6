"""Scripted players: a document-reading oracle and reference baselines.

The oracle plays the game the way it is meant to be played: it parses the
document and goal text it is shown, works out which monster is the target
and which item beats it, fetches that item, and engages.  It never touches
privileged engine state; everything it knows comes from the observation.

Baselines pin down the task's difficulty floor: picking an item uniformly
at random and then playing perfectly wins exactly half the time, attacking
without an item never wins, and acting uniformly at random almost never
stumbles into a win.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from random import Random

from .catalog import load_catalog
from .engine import ACTIONS, DELTAS, DIRECTIONS, Observation, Position, find_path, step
from .episodes import new_episode
from .logs import EpisodeLog
from .rps import RPS_ALPHABET, parse_beats_statements
from .templates import extract_assignment
from .worldgen import EpisodeConfig

_ACTION_OF_DELTA = {d: a for a, d in DELTAS.items()}


class NoPlan(RuntimeError):
    """The oracle found no route that can ever reach its objective."""


@dataclass
class _Board:
    """Everything an agent can read off one observation."""

    width: int
    height: int
    walls: set[Position]
    monsters: dict[Position, tuple[str, str]]  # pos -> (element, name)
    items: dict[Position, str]  # pos -> modifier
    agent: Position
    inventory_modifier: str | None


def read_board(obs: Observation, monster_names: frozenset[str]) -> _Board:
    walls: set[Position] = set()
    monsters: dict[Position, tuple[str, str]] = {}
    items: dict[Position, str] = {}
    for x, column in enumerate(obs.cells):
        for y, phrase in enumerate(column):
            if not phrase:
                continue
            if phrase == "wall":
                walls.add((x, y))
                continue
            words = phrase.split()
            if len(words) >= 2 and words[-1] in monster_names:
                monsters[(x, y)] = (words[0], words[-1])
            else:
                items[(x, y)] = words[0]
    inv = None if obs.inventory == "empty" else obs.inventory.split()[0]
    return _Board(
        width=len(obs.cells),
        height=len(obs.cells[0]),
        walls=walls,
        monsters=monsters,
        items=items,
        agent=obs.agent,
        inventory_modifier=inv,
    )


def bfs_path(
    board: _Board, goal: Position, avoid: set[Position] | frozenset[Position] = frozenset()
) -> list[Position] | None:
    """Path from the agent to ``goal``; monsters and items block unless goal."""
    blocked = (
        board.walls
        | (set(board.monsters) - {goal})
        | (set(board.items) - {goal})
        | (set(avoid) - {goal})
    )
    return find_path(board.width, board.height, blocked, board.agent, goal)


class Agent:
    tag = "agent"

    def begin(self, obs: Observation, config: EpisodeConfig, rng: Random) -> None:
        self.config = config
        self.rng = rng

    def act(self, obs: Observation) -> str:
        raise NotImplementedError


class UniformRandomAgent(Agent):
    tag = "uniform_random"

    def act(self, obs: Observation) -> str:
        return self.rng.choice(ACTIONS)


class _ReaderAgent(Agent):
    """Shared document parsing and path following for the scripted players."""

    def begin(self, obs: Observation, config: EpisodeConfig, rng: Random) -> None:
        super().begin(obs, config, rng)
        catalog = load_catalog()
        self._monster_names = frozenset(n.lower() for n in catalog.monsters)
        if config.task == "rps":
            self._beats = parse_beats_statements(obs.doc_text, RPS_ALPHABET)
            self._target_team = None
        else:
            extracted = extract_assignment(obs.doc_text, obs.goal, catalog=catalog)
            self._beats = extracted.modifier_element
            self._monster_team = {
                m.lower(): t for m, t in extracted.monster_team.items()
            }
            self._target_team = extracted.target_team

    def _target_pos(self, board: _Board) -> Position | None:
        for pos, (element, name) in sorted(board.monsters.items()):
            if self._target_team is None:
                return pos  # single-monster variant
            if self._monster_team.get(name) == self._target_team:
                return pos
        return None

    def _target_element(self, board: _Board) -> str | None:
        pos = self._target_pos(board)
        return board.monsters[pos][0] if pos is not None else None

    def _winning_items(self, board: _Board) -> list[Position]:
        element = self._target_element(board)
        return sorted(
            pos for pos, modifier in board.items.items() if self._beats.get(modifier) == element
        )

    def _holds_winning(self, board: _Board) -> bool:
        if board.inventory_modifier is None:
            return False
        return self._beats.get(board.inventory_modifier) == self._target_element(board)

    def _monster_halo(self, board: _Board, positions) -> set[Position]:
        """Cells a listed monster could reach next frame."""
        halo: set[Position] = set()
        for x, y in positions:
            halo.add((x, y))
            for dx, dy in DIRECTIONS:
                halo.add((x + dx, y + dy))
        return halo

    def _step_toward(self, board: _Board, path: list[Position]) -> str:
        nxt = path[0]
        delta = (nxt[0] - board.agent[0], nxt[1] - board.agent[1])
        return _ACTION_OF_DELTA[delta]


class OracleAgent(_ReaderAgent):
    """Reads the document, fetches a winning item, engages the target."""

    tag = "oracle"

    def _flee(self, board: _Board, threats: list[Position]) -> str:
        """Legal move maximizing distance to the nearest nearby threat."""

        def closest(cell: Position) -> int:
            return min(abs(cell[0] - tx) + abs(cell[1] - ty) for tx, ty in threats)

        blocked = board.walls | set(board.monsters) | set(board.items)
        best, action = closest(board.agent), "stay"
        x, y = board.agent
        for dx, dy in DIRECTIONS:
            cell = (x + dx, y + dy)
            if cell in blocked or not (0 <= cell[0] < board.width and 0 <= cell[1] < board.height):
                continue
            if closest(cell) > best:
                best, action = closest(cell), _ACTION_OF_DELTA[(dx, dy)]
        return action

    def act(self, obs: Observation) -> str:
        board = read_board(obs, self._monster_names)
        target = self._target_pos(board)
        if target is None:
            return "stay"  # target already gone; episode is ending

        armed = self._holds_winning(board)
        if armed:
            dests = [target]
            threats = [p for p in board.monsters if p != target]
        else:
            dests = self._winning_items(board)
            threats = list(board.monsters)
            if not dests:
                raise NoPlan("no winning item to fetch")

        # Monsters only threaten when they move; otherwise they are scenery.
        halo = self._monster_halo(board, threats) if self.config.dyna else set()
        for dest in dests:
            path = bfs_path(board, dest, avoid=halo)
            if path:
                return self._step_toward(board, path)

        if not self.config.dyna:
            raise NoPlan("objective unreachable")

        ax, ay = board.agent
        near = [p for p in threats if abs(p[0] - ax) + abs(p[1] - ay) <= 2]
        if near:
            return self._flee(board, near)
        for dest in dests:
            path = bfs_path(board, dest)
            if path:
                return self._step_toward(board, path)
        # Blocked right now.  If walls and items alone leave a route, the
        # blockage is a monster and will clear; otherwise no plan can exist.
        for dest in dests:
            static = board.walls | (set(board.items) - {dest})
            if find_path(board.width, board.height, static, board.agent, dest) is not None:
                return "stay"
        raise NoPlan("objective unreachable past walls and items")


class RandomItemAgent(_ReaderAgent):
    """Grabs a uniformly random item, then plays the oracle's endgame."""

    tag = "random_item_then_target"

    def begin(self, obs: Observation, config: EpisodeConfig, rng: Random) -> None:
        super().begin(obs, config, rng)
        board = read_board(obs, self._monster_names)
        cells = sorted(board.items)
        self._chosen = cells[rng.randrange(len(cells))]

    def act(self, obs: Observation) -> str:
        board = read_board(obs, self._monster_names)
        target = self._target_pos(board)
        if target is None:
            return "stay"
        dest = self._chosen if board.inventory_modifier is None else target
        path = bfs_path(board, dest)
        if path:
            return self._step_toward(board, path)
        return "stay"


class UnarmedAttacker(_ReaderAgent):
    """Marches on the target empty-handed and never touches an item."""

    tag = "unarmed_attacker"

    def act(self, obs: Observation) -> str:
        board = read_board(obs, self._monster_names)
        target = self._target_pos(board)
        if target is None:
            return "stay"
        path = bfs_path(board, target)
        if path:
            return self._step_toward(board, path)
        return "stay"


BASELINES = {
    OracleAgent.tag: OracleAgent,
    UniformRandomAgent.tag: UniformRandomAgent,
    RandomItemAgent.tag: RandomItemAgent,
    UnarmedAttacker.tag: UnarmedAttacker,
}


def baseline_policy(kind: str) -> Agent:
    if kind not in BASELINES:
        raise ValueError(f"unknown agent {kind!r}, expected one of {sorted(BASELINES)}")
    return BASELINES[kind]()


@dataclass
class WinStats:
    episodes: int = 0
    wins: int = 0
    losses_combat: int = 0
    losses_timeout: int = 0
    total_frames: int = 0
    outcomes: dict = field(default_factory=dict)

    @property
    def win_rate(self) -> float:
        return self.wins / self.episodes if self.episodes else 0.0

    @property
    def mean_frames(self) -> float:
        return self.total_frames / self.episodes if self.episodes else 0.0

    def record(self, outcome: str, frames: int) -> None:
        self.episodes += 1
        self.total_frames += frames
        self.outcomes[outcome] = self.outcomes.get(outcome, 0) + 1
        if outcome == "win":
            self.wins += 1
        elif outcome == "loss_combat":
            self.losses_combat += 1
        elif outcome == "loss_timeout":
            self.losses_timeout += 1

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "wins": self.wins,
            "win_rate": self.win_rate,
            "losses_combat": self.losses_combat,
            "losses_timeout": self.losses_timeout,
            "mean_frames": self.mean_frames,
            "outcomes": dict(sorted(self.outcomes.items())),
        }


def run_episode(agent: Agent, config: EpisodeConfig, seed: int) -> EpisodeLog:
    """Play one full episode and return its replayable log."""
    cfg = config.with_seed(seed)
    state, obs = new_episode(cfg)
    agent.begin(obs, cfg, Random(f"{agent.tag}:{seed}"))
    actions: list[str] = []
    rewards: list[float] = []
    while not state.done:
        action = agent.act(obs)
        result = step(state, action)
        actions.append(action)
        rewards.append(result.reward)
        obs = result.observation
    return EpisodeLog(
        config=config,
        seed=seed,
        actions=tuple(actions),
        rewards=tuple(rewards),
        outcome=state.outcome,
        agent_tag=agent.tag,
    )


def evaluate_agent(
    agent: Agent, config: EpisodeConfig, episodes: int, seed: int = 0
) -> WinStats:
    """Win statistics over ``episodes`` consecutive seeds starting at ``seed``."""
    stats = WinStats()
    for i in range(episodes):
        log = run_episode(agent, config, seed + i)
        stats.record(log.outcome, len(log.actions))
    return stats
