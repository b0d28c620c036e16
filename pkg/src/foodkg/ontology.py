"""Node/edge taxonomy for the food graph and the fixed category vocabularies.

The graph is typed: every node has one of ten kinds, every edge one of
eleven kinds, and each edge kind is only legal between a fixed set of
(source kind, target kind) pairs. Closed category vocabularies (allergen
categories, food pyramid groups, seasons, diet restrictions, cuisines)
ship as editable JSON files under ``foodkg/data``; the diet and cuisine
lists are reconstructions, since no official machine-readable list exists.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources


class NodeKind(str, Enum):
    RECIPE = "Recipe"
    INGREDIENT = "Ingredient"
    INSTRUCTION = "Instruction"
    UTENSIL = "Utensil"
    CUISINE = "Cuisine"
    SEASON = "Season"
    DIET_RESTRICTION = "DietRestriction"
    ALLERGEN_CATEGORY = "AllergenCategory"
    SFP_CATEGORY = "SwissFoodPyramidCategory"
    COMPOSITE_SUBSTITUTE = "CompositeSubstitute"


class EdgeKind(str, Enum):
    CONTAINS = "CONTAINS"
    IS_SUITABLE_FOR = "IS_SUITABLE_FOR"
    IS_FOR_SEASON = "IS_FOR_SEASON"
    IS_PART_OF = "IS_PART_OF"
    USES = "USES"
    HAS = "HAS"
    ALLERGEN_OF = "ALLERGEN_OF"
    CLASSIFIED_AS = "CLASSIFIED_AS"
    SUBSTITUTED_BY = "SUBSTITUTED_BY"
    HAS_COMPOSITE_SUBSTITUTE = "HAS_COMPOSITE_SUBSTITUTE"
    COMPOSED_OF = "COMPOSED_OF"


# Legal (source kind, target kind) pairs per edge kind. Anything not listed
# here is rejected by the graph store.
ALLOWED_ENDPOINTS: dict[EdgeKind, frozenset[tuple[NodeKind, NodeKind]]] = {
    EdgeKind.CONTAINS: frozenset({(NodeKind.RECIPE, NodeKind.INGREDIENT)}),
    EdgeKind.IS_SUITABLE_FOR: frozenset(
        {
            (NodeKind.RECIPE, NodeKind.DIET_RESTRICTION),
            (NodeKind.INGREDIENT, NodeKind.DIET_RESTRICTION),
        }
    ),
    EdgeKind.IS_FOR_SEASON: frozenset({(NodeKind.RECIPE, NodeKind.SEASON)}),
    EdgeKind.IS_PART_OF: frozenset({(NodeKind.RECIPE, NodeKind.CUISINE)}),
    EdgeKind.USES: frozenset(
        {
            (NodeKind.RECIPE, NodeKind.UTENSIL),
            (NodeKind.INSTRUCTION, NodeKind.INGREDIENT),
        }
    ),
    EdgeKind.HAS: frozenset({(NodeKind.RECIPE, NodeKind.INSTRUCTION)}),
    EdgeKind.ALLERGEN_OF: frozenset(
        {(NodeKind.INGREDIENT, NodeKind.ALLERGEN_CATEGORY)}
    ),
    EdgeKind.CLASSIFIED_AS: frozenset({(NodeKind.INGREDIENT, NodeKind.SFP_CATEGORY)}),
    EdgeKind.SUBSTITUTED_BY: frozenset({(NodeKind.INGREDIENT, NodeKind.INGREDIENT)}),
    EdgeKind.HAS_COMPOSITE_SUBSTITUTE: frozenset(
        {(NodeKind.INGREDIENT, NodeKind.COMPOSITE_SUBSTITUTE)}
    ),
    EdgeKind.COMPOSED_OF: frozenset(
        {(NodeKind.COMPOSITE_SUBSTITUTE, NodeKind.INGREDIENT)}
    ),
}


def is_legal(src_kind: NodeKind, edge_kind: EdgeKind, dst_kind: NodeKind) -> bool:
    """True when an edge of ``edge_kind`` may connect the two node kinds."""
    return (src_kind, dst_kind) in ALLOWED_ENDPOINTS[edge_kind]


def legal_triples() -> list[tuple[NodeKind, EdgeKind, NodeKind]]:
    """All legal (source kind, edge kind, target kind) triples, in a fixed order."""
    triples: list[tuple[NodeKind, EdgeKind, NodeKind]] = []
    for edge_kind in EdgeKind:
        for src, dst in sorted(ALLOWED_ENDPOINTS[edge_kind], key=lambda p: (p[0].value, p[1].value)):
            triples.append((src, edge_kind, dst))
    return triples


@dataclass(frozen=True)
class AllergenCategory:
    """One of the 14 regulated allergen categories, identified by number."""

    id: int
    name: str


@dataclass(frozen=True)
class SfpCategory:
    """One of the nine food pyramid groups, identified by slug."""

    id: str
    name: str


@dataclass(frozen=True)
class DietRestriction:
    """A diet label. ``implies`` lists diets a dish automatically also suits."""

    id: str
    group: str
    implies: tuple[str, ...] = field(default_factory=tuple)


UNRESTRICTED = "unrestricted"


def _load_data(filename: str) -> object:
    text = resources.files("foodkg.data").joinpath(filename).read_text("utf-8")
    return json.loads(text)


@lru_cache(maxsize=None)
def allergen_categories() -> tuple[AllergenCategory, ...]:
    raw = _load_data("allergen_categories.json")
    cats = tuple(AllergenCategory(id=c["id"], name=c["name"]) for c in raw)
    if len(cats) != 14:
        raise ValueError(f"expected 14 allergen categories, found {len(cats)}")
    return cats


@lru_cache(maxsize=None)
def sfp_categories() -> tuple[SfpCategory, ...]:
    raw = _load_data("sfp_categories.json")
    cats = tuple(SfpCategory(id=c["id"], name=c["name"]) for c in raw)
    if len(cats) != 9:
        raise ValueError(f"expected 9 food pyramid categories, found {len(cats)}")
    return cats


@lru_cache(maxsize=None)
def seasons() -> tuple[str, ...]:
    raw = _load_data("seasons.json")
    names = tuple(str(s) for s in raw)
    if len(names) != 4:
        raise ValueError(f"expected 4 seasons, found {len(names)}")
    return names


@lru_cache(maxsize=None)
def diet_restrictions() -> tuple[DietRestriction, ...]:
    """The 18 restriction labels plus ``unrestricted``, 19 in total."""
    raw = _load_data("diet_restrictions.json")
    diets = tuple(
        DietRestriction(id=d["id"], group=d["group"], implies=tuple(d.get("implies", ())))
        for d in raw
    )
    if len(diets) != 19:
        raise ValueError(f"expected 19 diet labels, found {len(diets)}")
    ids = {d.id for d in diets}
    if UNRESTRICTED not in ids:
        raise ValueError("diet list must include 'unrestricted'")
    for d in diets:
        for implied in d.implies:
            if implied not in ids:
                raise ValueError(f"diet {d.id!r} implies unknown diet {implied!r}")
    return diets


def restriction_ids() -> tuple[str, ...]:
    """The 18 diet ids that are actual restrictions (``unrestricted`` excluded)."""
    return tuple(d.id for d in diet_restrictions() if d.id != UNRESTRICTED)


def diet_ids() -> tuple[str, ...]:
    return tuple(d.id for d in diet_restrictions())


def diet_implications() -> dict[str, tuple[str, ...]]:
    return {d.id: d.implies for d in diet_restrictions()}


def apply_diet_implications(true_diets: set[str]) -> set[str]:
    """Close a set of diet ids under the implication table (e.g. vegan -> vegetarian)."""
    table = diet_implications()
    closed = set(true_diets)
    frontier = list(true_diets)
    while frontier:
        for implied in table.get(frontier.pop(), ()):
            if implied not in closed:
                closed.add(implied)
                frontier.append(implied)
    return closed


@lru_cache(maxsize=None)
def cuisines() -> tuple[str, ...]:
    raw = _load_data("cuisines.json")
    names = tuple(str(c) for c in raw)
    if len(names) != 100:
        raise ValueError(f"expected 100 cuisines, found {len(names)}")
    return names
