"""Document and goal text: rendering from a rule set, and reading it back.

A document is one statement per team plus one statement per element, shuffled.
In canonical mode every statement uses a fixed grammar; in natural-language
mode each statement independently draws a template from the pack.  Extraction
inverts rendering: it matches statements against every known template, resolves
slot fills against the catalog, and rebuilds the rule-set maps.  A statement
fill only counts as a match when every extracted entity resolves, which is what
keeps superficially overlapping templates unambiguous.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from random import Random

from .catalog import EntityCatalog, load_catalog
from .worldgen import DynamicsAssignment

PACK_VERSION = 1

# Fixed canonical grammar used when the natural-language flag is off.
CANONICAL_TEAM = "{team}: {monsters}"
CANONICAL_MODIFIER = "{modifiers} beats {element}"

_SLOTS = {"goal": ("team",), "team": ("team", "monsters"), "modifier": ("modifiers", "element")}
_LIST_SEP = " and "


class TemplateError(ValueError):
    """A template pack failed validation."""


class ExtractionError(ValueError):
    """A document or goal could not be read back into a rule set."""


class MissingStatement(ExtractionError):
    """A team or element has no statement (or the goal did not parse)."""


class AmbiguousTemplate(ExtractionError):
    """Two templates match one statement."""


@dataclass(frozen=True)
class TemplatePack:
    """Slot-filling templates: goal phrasings plus the two statement kinds."""

    goal: tuple[str, ...]
    team: tuple[str, ...]
    modifier: tuple[str, ...]
    version: int = PACK_VERSION

    def __post_init__(self) -> None:
        for kind in ("goal", "team", "modifier"):
            templates = getattr(self, kind)
            if not templates:
                raise TemplateError(f"{kind} template list is empty")
            if len(set(templates)) != len(templates):
                raise TemplateError(f"duplicate {kind} template")
            for t in templates:
                found = re.findall(r"\{(\w+)\}", t)
                if sorted(found) != sorted(_SLOTS[kind]):
                    raise TemplateError(
                        f"{kind} template {t!r} must contain slots {_SLOTS[kind]} exactly once"
                    )


def load_template_pack(path: str | None = None) -> TemplatePack:
    """Load the packaged template pack, or a custom one from JSON."""
    if path is None:
        text = resources.files("gridlore.data").joinpath("templates.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    doc = json.loads(text)
    if doc.get("version") != PACK_VERSION:
        raise TemplateError(f"unsupported template pack version {doc.get('version')!r}")
    return TemplatePack(
        goal=tuple(doc["goal"]), team=tuple(doc["team"]), modifier=tuple(doc["modifier"])
    )


@dataclass(frozen=True)
class Statement:
    kind: str  # "team" | "modifier"
    text: str


@dataclass(frozen=True)
class Document:
    """Shuffled statements plus their tokenization."""

    statements: tuple[Statement, ...]
    text: tuple[str, ...]  # tokens
    statement_order_seed: int

    @property
    def raw_text(self) -> str:
        return "\n".join(s.text for s in self.statements)


_TOKEN_JUNK = re.compile(r"[^a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, whitespace-split, punctuation-stripped tokens."""
    out = []
    for word in text.lower().split():
        tok = _TOKEN_JUNK.sub("", word)
        if tok:
            out.append(tok)
    return out


def _join_names(names: list[str]) -> str:
    return _LIST_SEP.join(names)


def render_texts(
    assignment: DynamicsAssignment,
    rng: Random,
    nl: bool = False,
    pack: TemplatePack | None = None,
    catalog: EntityCatalog | None = None,
) -> tuple[str, Document]:
    """Render (goal, document) for an assignment.

    Statement content depends only on the rule-set maps; which team is the
    target shows up nowhere outside the goal.  rng draws happen in a fixed
    order (goal template, one per statement, then the shuffle seed) so a seed
    pins the full rendering.
    """
    pack = pack or load_template_pack()
    cat = catalog or load_catalog()

    goal_template = rng.choice(pack.goal) if nl else pack.goal[0]
    goal = goal_template.format(team=assignment.target_team)

    statements: list[Statement] = []
    for team, monsters in assignment.team_monsters(cat).items():
        if not monsters:
            continue
        template = rng.choice(pack.team) if nl else CANONICAL_TEAM
        statements.append(
            Statement("team", template.format(team=team, monsters=_join_names(monsters)))
        )
    for element, mods in assignment.element_modifiers(cat).items():
        if not mods:
            continue
        template = rng.choice(pack.modifier) if nl else CANONICAL_MODIFIER
        statements.append(
            Statement("modifier", template.format(element=element, modifiers=_join_names(mods)))
        )

    order_seed = rng.getrandbits(32)
    Random(order_seed).shuffle(statements)
    doc = Document(
        statements=tuple(statements),
        text=tuple(tokenize("\n".join(s.text for s in statements))),
        statement_order_seed=order_seed,
    )
    return goal, doc


@dataclass(frozen=True)
class ExtractedDynamics:
    """What a reader can recover: the rule-set maps and the goal's team."""

    monster_team: dict[str, str]
    modifier_element: dict[str, str]
    target_team: str


def _template_pattern(template: str) -> re.Pattern:
    parts = re.split(r"\{(\w+)\}", template)
    regex = ""
    for i, part in enumerate(parts):
        regex += f"(?P<{part}>.+?)" if i % 2 else re.escape(part)
    return re.compile(rf"^{regex}$")


def _resolve_names(fill: str, pool: tuple[str, ...]) -> list[str] | None:
    lookup = {n.lower(): n for n in pool}
    names = []
    for piece in fill.split(_LIST_SEP):
        name = lookup.get(piece.strip().lower())
        if name is None:
            return None
        names.append(name)
    return names if len(set(names)) == len(names) else None


def _resolve_one(fill: str, pool: tuple[str, ...]) -> str | None:
    lookup = {n.lower(): n for n in pool}
    return lookup.get(fill.strip().lower())


def _match_statement(text: str, catalog: EntityCatalog, pack: TemplatePack):
    """Return every validated (kind, payload, template) interpretation of a statement."""
    matches = []
    team_templates = dict.fromkeys((CANONICAL_TEAM, *pack.team))
    for template in team_templates:
        m = _template_pattern(template).match(text.strip())
        if not m:
            continue
        team = _resolve_one(m.group("team"), catalog.teams)
        monsters = _resolve_names(m.group("monsters"), catalog.monsters)
        if team is not None and monsters:
            matches.append(("team", (team, tuple(monsters)), template))
    modifier_templates = dict.fromkeys((CANONICAL_MODIFIER, *pack.modifier))
    for template in modifier_templates:
        m = _template_pattern(template).match(text.strip().rstrip("."))
        if not m:
            continue
        element = _resolve_one(m.group("element"), catalog.elements)
        mods = _resolve_names(m.group("modifiers"), catalog.modifiers)
        if element is not None and mods:
            matches.append(("modifier", (element, tuple(mods)), template))
    return matches


def parse_goal(goal: str, catalog: EntityCatalog, pack: TemplatePack | None = None) -> str:
    """Recover the target team named by a goal utterance."""
    pack = pack or load_template_pack()
    teams = []
    for template in dict.fromkeys(pack.goal):
        m = _template_pattern(template).match(goal.strip())
        if not m:
            continue
        team = _resolve_one(m.group("team"), catalog.teams)
        if team is not None:
            teams.append(team)
    if not teams:
        raise MissingStatement(f"goal {goal!r} names no known team")
    if len(set(teams)) > 1:
        raise AmbiguousTemplate(f"goal {goal!r} matches multiple teams")
    return teams[0]


def extract_assignment(
    doc: "Document | str",
    goal: str,
    catalog: EntityCatalog | None = None,
    pack: TemplatePack | None = None,
) -> ExtractedDynamics:
    """Read a rendered document back into its rule-set maps.

    Accepts a :class:`Document` or its raw text (one statement per line).
    Raises :class:`MissingStatement` when any catalog team or element lacks a
    statement, and :class:`AmbiguousTemplate` when one statement admits more
    than one validated reading.
    """
    cat = catalog or load_catalog()
    pack = pack or load_template_pack()
    lines = (
        [s.text for s in doc.statements]
        if isinstance(doc, Document)
        else [ln for ln in doc.splitlines() if ln.strip()]
    )

    team_payload: dict[str, tuple[str, ...]] = {}
    element_payload: dict[str, tuple[str, ...]] = {}
    for line in lines:
        matches = _match_statement(line, cat, pack)
        if not matches:
            continue
        distinct = {(kind, payload) for kind, payload, _ in matches}
        if len(distinct) > 1 or len(matches) > 1:
            raise AmbiguousTemplate(f"statement {line!r} matches {len(matches)} templates")
        kind, payload, _ = matches[0]
        if kind == "team":
            team, monsters = payload
            if team in team_payload and team_payload[team] != monsters:
                raise AmbiguousTemplate(f"conflicting statements for team {team!r}")
            team_payload[team] = monsters
        else:
            element, mods = payload
            if element in element_payload and element_payload[element] != mods:
                raise AmbiguousTemplate(f"conflicting statements for element {element!r}")
            element_payload[element] = mods

    missing_teams = [t for t in cat.teams if t not in team_payload]
    missing_elements = [e for e in cat.elements if e not in element_payload]
    if missing_teams or missing_elements:
        raise MissingStatement(
            f"no statement for teams {missing_teams} / elements {missing_elements}"
        )

    monster_team = {m: t for t, ms in team_payload.items() for m in ms}
    modifier_element = {d: e for e, ds in element_payload.items() for d in ds}
    return ExtractedDynamics(
        monster_team=monster_team,
        modifier_element=modifier_element,
        target_team=parse_goal(goal, cat, pack),
    )


def build_vocab(
    catalog: EntityCatalog | None = None,
    pack: TemplatePack | None = None,
    extra: tuple[str, ...] = (),
) -> tuple[str, ...]:
    """Every token the games can emit, sorted: shared by tokenizer and models."""
    cat = catalog or load_catalog()
    pack = pack or load_template_pack()
    words: set[str] = set()
    for pool in (cat.monsters, cat.weapons, cat.elements, cat.modifiers, cat.teams):
        for name in pool:
            words.update(tokenize(name))
    for templates in (pack.goal, pack.team, pack.modifier, (CANONICAL_TEAM, CANONICAL_MODIFIER)):
        for t in templates:
            words.update(tokenize(re.sub(r"\{\w+\}", " ", t)))
    # grid/engine vocabulary and the cyclic-game alphabet
    words.update(("wall", "empty", "monster"))
    words.update("abcdefghijklmnopqrstuvwxyz0123456789")
    words.update(tokenize(" ".join(extra)))
    return tuple(sorted(words))
