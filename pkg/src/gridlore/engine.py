"""Grid engine: world state, movement, combat, and observation rendering.

The world is a ``width x height`` grid whose outer ring is wall.  The agent
and every monster occupy one interior cell each; items sit on interior cells
until picked up.  Movement is four-directional plus ``stay``; walking into a
wall wastes the step.  Entering an item's cell picks it up (swapping out any
held item onto the cell just vacated); entering a monster's cell resolves
combat instantly and ends the episode, as does a monster stepping onto the
agent.  Combat is won exactly when the engaged monster is the target and the
held item's modifier overcomes that monster's element.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass
from random import Random

from .templates import Document, render_texts, tokenize
from .worldgen import (
    DynamicsAssignment,
    EpisodeConfig,
    SplitSpec,
    sample_dynamics,
    split_assignments,
)

Position = tuple[int, int]

ACTIONS = ("up", "down", "left", "right", "stay")
DELTAS = {"up": (0, -1), "down": (0, 1), "left": (-1, 0), "right": (1, 0), "stay": (0, 0)}
# Fixed neighbor order; every tie-break and expansion uses it.
DIRECTIONS = ((0, -1), (0, 1), (-1, 0), (1, 0))

CHASE_PROBABILITY = 0.6
EMPTY_TOKEN = "empty"
WALL_TOKEN = "wall"

OUTCOMES = ("ongoing", "win", "loss_combat", "loss_timeout")

_PLACEMENT_ATTEMPTS = 500


class EngineError(RuntimeError):
    pass


class SteppedAfterDone(EngineError):
    """step() was called on a finished episode."""


class PlacementFailed(EngineError):
    """No solvable entity placement was found."""


@dataclass
class MonsterInstance:
    name: str
    element: str
    team: str
    pos: Position
    is_target: bool

    @property
    def phrase(self) -> str:
        return f"{self.element} {self.name}"


@dataclass
class ItemInstance:
    modifier: str
    weapon: str
    pos: Position | None  # None while held by the agent

    @property
    def phrase(self) -> str:
        return f"{self.modifier} {self.weapon}".strip()


@dataclass(frozen=True)
class Observation:
    """What a player (human or model) sees each frame.

    ``cells[x][y]`` holds exactly one of: an entity phrase, ``"wall"``, or the
    empty string.  The agent is not drawn into cells; its position rides along
    separately.  ``doc`` is the tokenized document, ``doc_text`` the same text
    with statement boundaries intact.
    """

    cells: tuple[tuple[str, ...], ...]
    doc: tuple[str, ...]
    goal: str
    inventory: str
    frame: int
    agent: Position
    doc_text: str


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    shaped_reward: float
    done: bool
    outcome: str


@dataclass
class WorldState:
    config: EpisodeConfig
    assignment: object  # DynamicsAssignment or the cyclic-game equivalent
    walls: frozenset[Position]
    agent: Position
    monsters: list[MonsterInstance]
    items: list[ItemInstance]
    inventory: ItemInstance | None
    goal: str
    doc: Document
    frame: int
    rng: Random
    done: bool = False
    outcome: str = "ongoing"
    combat_initiator: str | None = None
    _doc_tokens: tuple[str, ...] | None = None
    _doc_text: str | None = None

    def __post_init__(self) -> None:
        if self._doc_tokens is None:
            self._doc_tokens = tuple(self.doc.text)
        if self._doc_text is None:
            self._doc_text = self.doc.raw_text

    @property
    def width(self) -> int:
        return self.config.width

    @property
    def height(self) -> int:
        return self.config.height

    def state_dict(self) -> dict:
        """JSON-able snapshot; equal snapshots mean equal states."""
        rng_digest = hashlib.sha256(repr(self.rng.getstate()).encode()).hexdigest()
        return {
            "config": self.config.to_dict(),
            "walls": sorted(map(list, self.walls)),
            "agent": list(self.agent),
            "monsters": [
                [m.name, m.element, m.team, list(m.pos), m.is_target] for m in self.monsters
            ],
            "items": [
                [i.modifier, i.weapon, list(i.pos) if i.pos else None] for i in self.items
            ],
            "inventory": self.inventory.phrase if self.inventory else None,
            "goal": self.goal,
            "statements": [s.text for s in self.doc.statements],
            "frame": self.frame,
            "outcome": self.outcome,
            "rng": rng_digest,
        }

    def serialize(self) -> str:
        return json.dumps(self.state_dict(), sort_keys=True)


def border_walls(width: int, height: int) -> frozenset[Position]:
    walls = set()
    for x in range(width):
        walls.add((x, 0))
        walls.add((x, height - 1))
    for y in range(height):
        walls.add((0, y))
        walls.add((width - 1, y))
    return frozenset(walls)


def interior_cells(width: int, height: int, walls: frozenset[Position]) -> list[Position]:
    return [
        (x, y) for x in range(1, width - 1) for y in range(1, height - 1) if (x, y) not in walls
    ]


def find_path(
    width: int,
    height: int,
    blocked: set[Position] | frozenset[Position],
    start: Position,
    goal: Position,
) -> list[Position] | None:
    """Shortest 4-connected path as the list of cells after ``start``.

    ``goal`` may be a blocked cell (it is still enterable as the destination).
    Returns None when unreachable, [] when start == goal.  Ties are broken by
    the fixed direction order, so the path is deterministic.
    """
    if start == goal:
        return []
    came_from: dict[Position, Position] = {start: start}
    queue: deque[Position] = deque([start])
    while queue:
        cur = queue.popleft()
        for dx, dy in DIRECTIONS:
            nxt = (cur[0] + dx, cur[1] + dy)
            if nxt in came_from or not (0 <= nxt[0] < width and 0 <= nxt[1] < height):
                continue
            if nxt == goal:
                came_from[nxt] = cur
                path = [nxt]
                while came_from[path[-1]] != start:
                    path.append(came_from[path[-1]])
                path.reverse()
                return path
            if nxt in blocked:
                continue
            came_from[nxt] = cur
            queue.append(nxt)
    return None


def combat_outcome(
    monster: MonsterInstance, inventory: ItemInstance | None, assignment
) -> bool:
    """True exactly when engaging ``monster`` wins the episode."""
    if not monster.is_target or inventory is None:
        return False
    return assignment.modifier_element.get(inventory.modifier) == monster.element


def _placement_solvable(
    width: int,
    height: int,
    walls: frozenset[Position],
    agent: Position,
    target_pos: Position,
    distractor_pos: Position,
    item_cells: list[Position],
) -> bool:
    """Check the fetch-then-engage legs for both items.

    Monsters and the respectively-other item are obstacles; with stationary
    monsters this makes the winning plan executable from frame 0, and keeps
    the pick-either-item behavior well defined.
    """
    monsters = {target_pos, distractor_pos}
    for idx, cell in enumerate(item_cells):
        others = {c for j, c in enumerate(item_cells) if j != idx}
        if find_path(width, height, walls | monsters | others, agent, cell) is None:
            return False
        if find_path(width, height, walls | {distractor_pos} | others, cell, target_pos) is None:
            return False
    return True


def reset_episode(
    config: EpisodeConfig,
    split: SplitSpec | None = None,
    rng: Random | None = None,
) -> tuple[WorldState, Observation]:
    """Build a fresh quest episode: dynamics, texts, then a solvable placement."""
    if rng is None:
        rng = Random(config.seed)
    if split is None:
        train, ev = split_assignments(
            eval_fraction=config.eval_fraction, seed=config.split_seed
        )
        split = train if config.split == "train" else ev

    assignment = sample_dynamics(rng, config, split)
    goal, doc = render_texts(assignment, rng, nl=config.nl, catalog=split.catalog)

    walls = border_walls(config.width, config.height)
    free = interior_cells(config.width, config.height, walls)
    if len(free) < 5:
        raise PlacementFailed(f"{config.width}x{config.height} grid has too few interior cells")

    for _ in range(_PLACEMENT_ATTEMPTS):
        agent, target_pos, distractor_pos, t_item, d_item = rng.sample(free, 5)
        if _placement_solvable(
            config.width,
            config.height,
            walls,
            agent,
            target_pos,
            distractor_pos,
            [t_item, d_item],
        ):
            break
    else:
        raise PlacementFailed("no solvable placement found")

    monsters = [
        MonsterInstance(
            name=assignment.target_monster,
            element=assignment.target_element,
            team=assignment.target_team,
            pos=target_pos,
            is_target=True,
        ),
        MonsterInstance(
            name=assignment.distractor_monster,
            element=assignment.distractor_element,
            team=assignment.distractor_team,
            pos=distractor_pos,
            is_target=False,
        ),
    ]
    items = [
        ItemInstance(assignment.target_modifier, assignment.target_weapon, t_item),
        ItemInstance(assignment.distractor_modifier, assignment.distractor_weapon, d_item),
    ]
    state = WorldState(
        config=config,
        assignment=assignment,
        walls=walls,
        agent=agent,
        monsters=monsters,
        items=items,
        inventory=None,
        goal=goal,
        doc=doc,
        frame=0,
        rng=rng,
    )
    return state, render_observation(state)


def _monster_at(state: WorldState, pos: Position) -> MonsterInstance | None:
    for m in state.monsters:
        if m.pos == pos:
            return m
    return None


def _item_at(state: WorldState, pos: Position) -> ItemInstance | None:
    for i in state.items:
        if i.pos == pos:
            return i
    return None


def _resolve_combat(state: WorldState, monster: MonsterInstance, initiator: str) -> None:
    won = combat_outcome(monster, state.inventory, state.assignment)
    state.done = True
    state.outcome = "win" if won else "loss_combat"
    state.combat_initiator = initiator
    if won:
        state.monsters.remove(monster)


def monster_transition(state: WorldState, monster: MonsterInstance, rng: Random) -> Position:
    """One monster's move.  Identity unless the moving-monsters flag is set.

    With probability 0.6 the monster takes a legal move that strictly reduces
    Manhattan distance to the agent (uniform over all legal moves plus stay if
    none exists); otherwise it moves uniformly among the legal non-approaching
    moves, stay included.  Walls, item cells, and other monsters block; the
    agent's cell is enterable and triggers combat at the caller.
    """
    if not state.config.dyna:
        return monster.pos
    x, y = monster.pos
    ax, ay = state.agent
    blocked = (
        set(state.walls)
        | {i.pos for i in state.items if i.pos is not None}
        | {m.pos for m in state.monsters if m is not monster}
    )
    legal = []
    for dx, dy in DIRECTIONS:
        cell = (x + dx, y + dy)
        if 0 <= cell[0] < state.width and 0 <= cell[1] < state.height and cell not in blocked:
            legal.append(cell)
    dist0 = abs(ax - x) + abs(ay - y)
    closing = [c for c in legal if abs(ax - c[0]) + abs(ay - c[1]) < dist0]
    if rng.random() < CHASE_PROBABILITY:
        if closing:
            return rng.choice(closing)
        return rng.choice(legal) if legal else (x, y)
    holding = [c for c in legal if abs(ax - c[0]) + abs(ay - c[1]) >= dist0]
    return rng.choice(holding + [(x, y)])


def step(state: WorldState, action: str) -> StepResult:
    """Advance one frame: agent move (and pickup/combat), then monster moves."""
    if state.done:
        raise SteppedAfterDone(f"episode already ended with {state.outcome!r}")
    if action not in DELTAS:
        raise ValueError(f"unknown action {action!r}")

    state.combat_initiator = None
    prev = state.agent
    dx, dy = DELTAS[action]
    nxt = (prev[0] + dx, prev[1] + dy)
    if (
        not (0 <= nxt[0] < state.width and 0 <= nxt[1] < state.height)
        or nxt in state.walls
    ):
        nxt = prev

    if nxt != prev:
        monster = _monster_at(state, nxt)
        if monster is not None:
            state.agent = nxt
            _resolve_combat(state, monster, "agent")
        else:
            item = _item_at(state, nxt)
            state.agent = nxt
            if item is not None:
                held = state.inventory
                state.inventory = item
                item.pos = None
                if held is not None:
                    held.pos = prev

    if not state.done and state.config.dyna:
        for monster in state.monsters:
            monster.pos = monster_transition(state, monster, state.rng)
            if monster.pos == state.agent:
                _resolve_combat(state, monster, "monster")
                break

    state.frame += 1
    if not state.done and state.frame >= state.config.max_frames:
        state.done = True
        state.outcome = "loss_timeout"

    if state.outcome == "win":
        reward = 1.0
    elif state.done:
        reward = -1.0
    else:
        reward = 0.0
    shaped = reward + (state.config.step_penalty if not state.done else 0.0)
    return StepResult(
        observation=render_observation(state),
        reward=reward,
        shaped_reward=shaped,
        done=state.done,
        outcome=state.outcome,
    )


def render_observation(state: WorldState) -> Observation:
    cells = [["" for _ in range(state.height)] for _ in range(state.width)]
    for x, y in state.walls:
        cells[x][y] = WALL_TOKEN
    for item in state.items:
        if item.pos is not None:
            cells[item.pos[0]][item.pos[1]] = item.phrase
    for monster in state.monsters:
        cells[monster.pos[0]][monster.pos[1]] = monster.phrase
    return Observation(
        cells=tuple(tuple(col) for col in cells),
        doc=state._doc_tokens,
        goal=state.goal,
        inventory=state.inventory.phrase if state.inventory else EMPTY_TOKEN,
        frame=state.frame,
        agent=state.agent,
        doc_text=state._doc_text,
    )
