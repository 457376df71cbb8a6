"""Entity catalog for the quest game.

The catalog is the fixed pool of names that procedural generation draws from:
monster species, weapon kinds, item modifiers, damage elements, and the teams
monsters can be assigned to.  Nothing here carries game rules; which monster
fights for which team and which modifier overcomes which element is sampled
per episode (see :mod:`gridlore.worldgen`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields

CATALOG_VERSION = 1

MONSTERS = ("wolf", "jaguar", "panther", "goblin", "bat", "imp", "shaman", "ghost", "zombie")
WEAPONS = ("sword", "axe", "morningstar", "polearm", "knife", "katana", "cutlass", "spear")
ELEMENTS = ("cold", "fire", "lightning", "poison")
MODIFIERS = (
    "grandmaster's",
    "blessed",
    "shimmering",
    "gleaming",
    "fanatical",
    "mysterious",
    "soldier's",
    "arcane",
)
TEAMS = ("Star Alliance", "Order of the Forest", "Rebel Enclave")


class CatalogError(ValueError):
    """A catalog failed validation."""


@dataclass(frozen=True)
class EntityCatalog:
    """Pools of entity names, one tuple per class.

    Order matters: samplers and renderers use catalog order as the canonical
    order, so two processes holding the same catalog agree on every derived
    ordering.
    """

    monsters: tuple[str, ...] = MONSTERS
    weapons: tuple[str, ...] = WEAPONS
    elements: tuple[str, ...] = ELEMENTS
    modifiers: tuple[str, ...] = MODIFIERS
    teams: tuple[str, ...] = TEAMS

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for f in fields(self):
            names = getattr(self, f.name)
            if not isinstance(names, tuple):
                object.__setattr__(self, f.name, tuple(names))
                names = getattr(self, f.name)
            if not names:
                raise CatalogError(f"catalog class {f.name!r} is empty")
            for name in names:
                if not isinstance(name, str) or not name or name != name.strip():
                    raise CatalogError(f"bad entity name {name!r} in {f.name}")
                if "\n" in name or ":" in name:
                    raise CatalogError(f"entity name {name!r} contains reserved characters")
                key = name.lower()
                if key in seen:
                    raise CatalogError(f"duplicate entity name {name!r}")
                seen.add(key)

    def to_json(self) -> str:
        doc = {"version": CATALOG_VERSION}
        for f in fields(self):
            doc[f.name] = list(getattr(self, f.name))
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EntityCatalog":
        doc = json.loads(text)
        if doc.get("version") != CATALOG_VERSION:
            raise CatalogError(f"unsupported catalog version {doc.get('version')!r}")
        kwargs = {f.name: tuple(doc[f.name]) for f in fields(cls)}
        return cls(**kwargs)


def load_catalog(path: str | None = None) -> EntityCatalog:
    """Return the stock catalog, or a validated custom one loaded from JSON."""
    if path is None:
        return EntityCatalog()
    with open(path, encoding="utf-8") as fh:
        return EntityCatalog.from_json(fh.read())
