"""Procedural episode dynamics: who fights for whom and what beats what.

Every episode hides a rule set behind the document the player must read:

* an assignment of monsters to teams (one monster per team, or two in
  ``group`` mode), and
* an assignment of item modifiers to the element each one overcomes
  (again one or two per element).

On top of the rule set sit the episode's combatants: a target monster drawn
from the goal team and a distractor monster from a different team, each with
an element, plus the two items that beat those elements.  The distractor's
element always differs from the target's, so exactly one of the two items in
the world can defeat the target.

Train/eval generalization is controlled by a seeded hash partition over every
(monster, team, modifier, element) joint tuple.  An episode belongs to a split
when the joint tuples realized by its target and distractor both fall on that
split's side of the partition.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field, fields, replace
from random import Random
from typing import Iterator

from .catalog import EntityCatalog, load_catalog

# (monster, team, modifier, element)
JointTuple = tuple[str, str, str, str]

SPLIT_VERSION = 1
SPLIT_IDS = ("train", "eval")
TASKS = ("quest", "rps")
RPS_KINDS = ("permutation", "new_edge", "new_edge_nodes")

_SAMPLE_ATTEMPTS = 10_000


class SplitExhausted(RuntimeError):
    """No assignment satisfying the requested split could be drawn."""


@dataclass(frozen=True)
class EpisodeConfig:
    """Everything needed to regenerate an episode from scratch.

    ``width``/``height`` count the full grid including the border wall ring.
    ``step_penalty`` and ``discount`` only shape auxiliary reward signals;
    win/loss and the terminal +1/-1 never depend on them.
    """

    width: int = 6
    height: int = 6
    dyna: bool = False
    group: bool = False
    nl: bool = False
    max_frames: int = 1000
    step_penalty: float = -0.02
    discount: float = 0.99
    split: str = "train"
    seed: int = 0
    task: str = "quest"
    split_seed: int = 0
    eval_fraction: float = 0.2
    rps_kind: str = "permutation"

    def __post_init__(self) -> None:
        if self.width < 4 or self.height < 4:
            raise ValueError(f"grid must be at least 4x4, got {self.width}x{self.height}")
        if self.max_frames < 1:
            raise ValueError("max_frames must be >= 1")
        if self.step_penalty > 0:
            raise ValueError("step_penalty must be <= 0")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must be in (0, 1]")
        if self.split not in SPLIT_IDS:
            raise ValueError(f"split must be one of {SPLIT_IDS}, got {self.split!r}")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if not 0 <= self.eval_fraction < 1:
            raise ValueError("eval_fraction must be in [0, 1)")
        if self.rps_kind not in RPS_KINDS:
            raise ValueError(f"rps_kind must be one of {RPS_KINDS}, got {self.rps_kind!r}")

    def with_seed(self, seed: int) -> "EpisodeConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, doc: dict) -> "EpisodeConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)


# Named variant configurations.  "full" turns on every variant flag.
PRESETS = {
    "base6": EpisodeConfig(width=6, height=6),
    "base10": EpisodeConfig(width=10, height=10),
    "full6": EpisodeConfig(width=6, height=6, dyna=True, group=True, nl=True),
    "full10": EpisodeConfig(width=10, height=10, dyna=True, group=True, nl=True),
    "rps": EpisodeConfig(width=10, height=10, task="rps"),
}


def preset(name: str, **overrides) -> EpisodeConfig:
    """Return a named preset config, optionally overriding fields."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}, expected one of {sorted(PRESETS)}")
    cfg = PRESETS[name]
    return replace(cfg, **overrides) if overrides else cfg


def _hash_unit(seed: int, joint: JointTuple) -> float:
    """Deterministic hash of a joint tuple to [0, 1), stable across runs."""
    key = "\x1f".join((str(seed),) + joint).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


@dataclass(frozen=True)
class SplitSpec:
    """One side of a seeded partition of the joint tuple space."""

    split_id: str
    seed: int
    eval_fraction: float
    catalog: EntityCatalog = field(default_factory=EntityCatalog)

    def __post_init__(self) -> None:
        if self.split_id not in SPLIT_IDS:
            raise ValueError(f"split_id must be one of {SPLIT_IDS}")
        if not 0 <= self.eval_fraction < 1:
            raise ValueError("eval_fraction must be in [0, 1)")

    def contains(self, joint: JointTuple) -> bool:
        in_eval = _hash_unit(self.seed, joint) < self.eval_fraction
        return in_eval == (self.split_id == "eval")

    def all_tuples(self) -> Iterator[JointTuple]:
        """Every joint tuple over the catalog, member or not."""
        cat = self.catalog
        for joint in itertools.product(cat.monsters, cat.teams, cat.modifiers, cat.elements):
            yield joint

    def tuples(self) -> Iterator[JointTuple]:
        """Exhaustively enumerate this split's member tuples, for audits."""
        for joint in self.all_tuples():
            if self.contains(joint):
                yield joint

    def to_json(self) -> str:
        import json

        doc = {
            "version": SPLIT_VERSION,
            "split_id": self.split_id,
            "seed": self.seed,
            "eval_fraction": self.eval_fraction,
            "catalog": self.catalog.to_json(),
        }
        return json.dumps(doc, sort_keys=True)


def split_assignments(
    catalog: EntityCatalog | None = None,
    eval_fraction: float = 0.2,
    seed: int = 0,
) -> tuple[SplitSpec, SplitSpec]:
    """Build the (train, eval) pair of split specs over one catalog."""
    cat = catalog or load_catalog()
    train = SplitSpec("train", seed, eval_fraction, cat)
    ev = SplitSpec("eval", seed, eval_fraction, cat)
    return train, ev


@dataclass(frozen=True)
class DynamicsAssignment:
    """One episode's hidden rule set plus its realized combatants.

    ``monster_team`` maps each sampled monster to its team; ``modifier_element``
    maps each sampled modifier to the single element it overcomes.
    """

    monster_team: dict[str, str]
    modifier_element: dict[str, str]
    target_team: str
    target_monster: str
    target_element: str
    target_modifier: str
    target_weapon: str
    distractor_monster: str
    distractor_element: str
    distractor_modifier: str
    distractor_weapon: str

    @property
    def distractor_team(self) -> str:
        return self.monster_team[self.distractor_monster]

    def assignment_tuples(self) -> tuple[JointTuple, JointTuple]:
        """The joint tuples this episode realizes; split membership is judged on these."""
        return (
            (self.target_monster, self.target_team, self.target_modifier, self.target_element),
            (
                self.distractor_monster,
                self.distractor_team,
                self.distractor_modifier,
                self.distractor_element,
            ),
        )

    def team_monsters(self, catalog: EntityCatalog) -> dict[str, list[str]]:
        """team -> its monsters, in catalog order."""
        out: dict[str, list[str]] = {t: [] for t in catalog.teams}
        for m in catalog.monsters:
            if m in self.monster_team:
                out[self.monster_team[m]].append(m)
        return out

    def element_modifiers(self, catalog: EntityCatalog) -> dict[str, list[str]]:
        """element -> the modifiers that overcome it, in catalog order."""
        out: dict[str, list[str]] = {e: [] for e in catalog.elements}
        for d in catalog.modifiers:
            if d in self.modifier_element:
                out[self.modifier_element[d]].append(d)
        return out

    def validate(self, catalog: EntityCatalog) -> None:
        if self.monster_team[self.target_monster] != self.target_team:
            raise ValueError("target monster not on target team")
        if self.distractor_team == self.target_team:
            raise ValueError("distractor shares the target's team")
        if self.distractor_element == self.target_element:
            raise ValueError("distractor shares the target's element")
        if self.modifier_element[self.target_modifier] != self.target_element:
            raise ValueError("target modifier does not overcome the target element")
        if self.modifier_element[self.distractor_modifier] != self.distractor_element:
            raise ValueError("distractor modifier does not overcome the distractor element")
        if (self.target_modifier, self.target_weapon) == (
            self.distractor_modifier,
            self.distractor_weapon,
        ):
            raise ValueError("the two items are indistinguishable")
        for m, t in self.monster_team.items():
            if m not in catalog.monsters or t not in catalog.teams:
                raise ValueError(f"unknown monster/team pair ({m!r}, {t!r})")
        for d, e in self.modifier_element.items():
            if d not in catalog.modifiers or e not in catalog.elements:
                raise ValueError(f"unknown modifier/element pair ({d!r}, {e!r})")
        if self.target_weapon not in catalog.weapons or self.distractor_weapon not in catalog.weapons:
            raise ValueError("unknown weapon")


def sample_dynamics(
    rng: Random,
    config: EpisodeConfig,
    split: SplitSpec,
    max_attempts: int = _SAMPLE_ATTEMPTS,
) -> DynamicsAssignment:
    """Draw a rule set plus combatants whose realized tuples lie in ``split``.

    Rejection-samples whole assignments until both joint tuples are members.
    Raises :class:`SplitExhausted` when the catalog cannot support the draw or
    no attempt lands inside the split.
    """
    cat = split.catalog
    k = 2 if config.group else 1
    teams, elements = cat.teams, cat.elements
    if len(teams) < 2:
        raise SplitExhausted("need at least two teams to pose a distractor")
    if len(elements) < 2:
        raise SplitExhausted("need at least two elements to pose a distractor")
    if len(cat.monsters) < k * len(teams):
        raise SplitExhausted(f"catalog has too few monsters for {k} per team")
    if len(cat.modifiers) < k * len(elements):
        raise SplitExhausted(f"catalog has too few modifiers for {k} per element")

    for _ in range(max_attempts):
        picked_m = rng.sample(cat.monsters, k * len(teams))
        monster_team: dict[str, str] = {}
        for i, team in enumerate(teams):
            for m in picked_m[i * k : (i + 1) * k]:
                monster_team[m] = team
        picked_d = rng.sample(cat.modifiers, k * len(elements))
        modifier_element: dict[str, str] = {}
        for i, element in enumerate(elements):
            for d in picked_d[i * k : (i + 1) * k]:
                modifier_element[d] = element

        target_team = rng.choice(teams)
        target_monster = rng.choice([m for m in picked_m if monster_team[m] == target_team])
        target_element = rng.choice(elements)
        target_modifier = rng.choice(
            [d for d in picked_d if modifier_element[d] == target_element]
        )
        target_weapon = rng.choice(cat.weapons)

        distractor_team = rng.choice([t for t in teams if t != target_team])
        distractor_monster = rng.choice(
            [m for m in picked_m if monster_team[m] == distractor_team]
        )
        distractor_element = rng.choice([e for e in elements if e != target_element])
        distractor_modifier = rng.choice(
            [d for d in picked_d if modifier_element[d] == distractor_element]
        )
        distractor_weapon = rng.choice(cat.weapons)

        assignment = DynamicsAssignment(
            monster_team=monster_team,
            modifier_element=modifier_element,
            target_team=target_team,
            target_monster=target_monster,
            target_element=target_element,
            target_modifier=target_modifier,
            target_weapon=target_weapon,
            distractor_monster=distractor_monster,
            distractor_element=distractor_element,
            distractor_modifier=distractor_modifier,
            distractor_weapon=distractor_weapon,
        )
        if all(split.contains(t) for t in assignment.assignment_tuples()):
            assignment.validate(cat)
            return assignment
    raise SplitExhausted(
        f"no assignment fell inside split {split.split_id!r} after {max_attempts} attempts"
    )


def _grouped_arrangements(n: int, groups: int, k: int) -> int:
    """Ways to fill ``groups`` labeled groups with ``k`` distinct names each from ``n``."""
    if n < groups * k:
        return 0
    total = 1
    for i in range(groups):
        total *= math.comb(n - i * k, k)
    return total


def _grouped_maps(names: tuple[str, ...], groups: tuple[str, ...], k: int):
    """Enumerate every name->group map with exactly k names per group."""

    def rec(remaining: tuple[str, ...], gi: int, acc: dict[str, str]):
        if gi == len(groups):
            yield dict(acc)
            return
        for combo in itertools.combinations(remaining, k):
            for name in combo:
                acc[name] = groups[gi]
            rest = tuple(n for n in remaining if n not in combo)
            yield from rec(rest, gi + 1, acc)
            for name in combo:
                del acc[name]

    yield from rec(names, 0, {})


def enumerate_rule_sets(
    catalog: EntityCatalog, group: bool = False
) -> Iterator[tuple[dict[str, str], dict[str, str]]]:
    """Brute-force every (monster_team, modifier_element) rule-set pair."""
    k = 2 if group else 1
    for mt in _grouped_maps(catalog.monsters, catalog.teams, k):
        for de in _grouped_maps(catalog.modifiers, catalog.elements, k):
            yield mt, de


def count_space(
    config: EpisodeConfig,
    catalog: EntityCatalog | None = None,
    team_templates: int | None = None,
    modifier_templates: int | None = None,
) -> tuple[int, int]:
    """Closed-form (dynamics_count, document_count) for a config.

    ``dynamics_count`` is the number of distinct rule-set pairs under the
    sampling design.  ``document_count`` multiplies in the per-statement
    template choices (natural-language mode only) and every ordering of the
    statement sequence.
    """
    cat = catalog or load_catalog()
    k = 2 if config.group else 1
    rule_sets = _grouped_arrangements(len(cat.monsters), len(cat.teams), k) * _grouped_arrangements(
        len(cat.modifiers), len(cat.elements), k
    )
    n_statements = len(cat.teams) + len(cat.elements)
    if config.nl:
        if team_templates is None or modifier_templates is None:
            from .templates import load_template_pack

            pack = load_template_pack()
            team_templates = team_templates if team_templates is not None else len(pack.team)
            modifier_templates = (
                modifier_templates if modifier_templates is not None else len(pack.modifier)
            )
        template_choices = team_templates ** len(cat.teams) * modifier_templates ** len(
            cat.elements
        )
    else:
        template_choices = 1
    document_count = rule_sets * template_choices * math.factorial(n_statements)
    return rule_sets, document_count
