"""Entity resolution against the nutrient, GI and substitution tables.

Resolution follows a fixed ladder: exact match in the Swiss table, exact in
the USDA table, then embedding nearest-neighbor in Swiss, then in USDA.
Exact matching compares lowercased, whitespace-collapsed, naively
singularized names. Embedding matches below the confidence threshold are
still attached but flagged for review (correct matches do occur at low
scores); matches below the attach floor are treated as unmatched.

Indexes are flat arrays scanned in full — exactness matters more than speed
at this scale (a few thousand entries).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .backends import EmbeddingBackend
from .graph import FoodGraph, normalize_name
from .ingest import GIEntry, NutrientEntry, SubstitutionEntry
from .ontology import EdgeKind, NodeKind

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.5
DEFAULT_FLOOR = 0.25


class MatchError(Exception):
    pass


@dataclass
class EmbeddingVector:
    """A fixed-length real vector tagged with the model that produced it."""

    values: np.ndarray
    model_tag: str

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise MatchError("embedding vector must be one-dimensional")
        if not np.any(self.values):
            raise MatchError("zero embedding vector is not allowed")


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two vectors: dot(a,b) / (|a| * |b|)."""
    if a.values.shape != b.values.shape:
        raise MatchError(
            f"vector length mismatch: {a.values.shape[0]} vs {b.values.shape[0]}"
        )
    denom = float(np.linalg.norm(a.values) * np.linalg.norm(b.values))
    return float(np.dot(a.values, b.values)) / denom


def singularize(word: str) -> str:
    """Naive singular form. Lossy on irregular nouns, but it is applied to
    both sides of every exact comparison, so matching stays consistent."""
    if len(word) <= 3 or not word.endswith("s") or word.endswith("ss"):
        return word
    if word.endswith("ies"):
        return word[:-3] + "y"
    if word.endswith("oes"):
        return word[:-2]
    return word[:-1]


def _singularize_token(token: str) -> str:
    core = token.rstrip(".,;:()")
    return singularize(core) + token[len(core):]


def exact_key(name: str) -> str:
    return " ".join(_singularize_token(w) for w in normalize_name(name).split())


@dataclass
class VectorIndex:
    """Immutable flat index of (key, vector) rows for one embedding model."""

    model_tag: str
    keys: list[str]
    matrix: np.ndarray
    source: str = ""
    _norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.keys) != len(set(self.keys)):
            raise MatchError("index keys must be unique")
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.keys):
            raise MatchError("index matrix shape does not match keys")
        self._norms = np.linalg.norm(self.matrix, axis=1)
        if np.any(self._norms == 0):
            raise MatchError("zero embedding vector is not allowed in an index")

    def __len__(self) -> int:
        return len(self.keys)

    @classmethod
    def build(
        cls, keys: Sequence[str], embedder: EmbeddingBackend, source: str = ""
    ) -> "VectorIndex":
        keys = list(keys)
        if not keys:
            return cls(
                model_tag=embedder.model,
                keys=[],
                matrix=np.zeros((0, 0)),
                source=source,
            )
        vectors = embedder.embed(keys)
        matrix = np.asarray(vectors, dtype=np.float64).reshape(len(keys), -1)
        return cls(model_tag=embedder.model, keys=keys, matrix=matrix, source=source)

    def scores(self, query_vector: np.ndarray) -> np.ndarray:
        query_vector = np.asarray(query_vector, dtype=np.float64)
        qnorm = float(np.linalg.norm(query_vector))
        if qnorm == 0:
            raise MatchError("zero query vector")
        return (self.matrix @ query_vector) / (self._norms * qnorm)


@dataclass
class MatchResult:
    query: str
    candidate: str
    score: float
    method: str  # exact | embedding
    source: str  # swiss | usda | gi | subs


def nearest(
    query: str, index: VectorIndex, embedder: EmbeddingBackend
) -> list[MatchResult]:
    """Highest-similarity candidates for the query.

    Returns one result normally; on an exact score tie all tied candidates
    come back (in index order) for manual resolution.
    """
    if len(index) == 0:
        raise MatchError("cannot search an empty index")
    if embedder.model != index.model_tag:
        raise MatchError(
            f"index was built with {index.model_tag!r}, embedder is {embedder.model!r}"
        )
    query_vector = np.asarray(embedder.embed([query])[0], dtype=np.float64)
    scores = index.scores(query_vector)
    best = float(np.max(scores))
    return [
        MatchResult(
            query=query,
            candidate=index.keys[i],
            score=float(scores[i]),
            method="embedding",
            source=index.source,
        )
        for i in np.flatnonzero(scores == best)
    ]


# -- nutrient and GI resolution --


def _unique_names(entries: Sequence) -> list[str]:
    names: list[str] = []
    seen: set[str] = set()
    for entry in entries:
        if entry.name not in seen:
            seen.add(entry.name)
            names.append(entry.name)
    return names


@dataclass
class NutrientTable:
    """A nutrient database with an exact-name map and an embedding index."""

    source: str
    entries: list[NutrientEntry]
    index: VectorIndex
    by_key: dict[str, NutrientEntry]
    by_name: dict[str, NutrientEntry]

    @classmethod
    def build(
        cls, entries: Sequence[NutrientEntry], embedder: EmbeddingBackend, source: str
    ) -> "NutrientTable":
        by_key: dict[str, NutrientEntry] = {}
        for entry in entries:
            by_key.setdefault(exact_key(entry.name), entry)
        index = VectorIndex.build(_unique_names(entries), embedder, source=source)
        return cls(
            source=source,
            entries=list(entries),
            index=index,
            by_key=by_key,
            by_name={entry.name: entry for entry in entries},
        )

    def exact(self, name: str) -> NutrientEntry | None:
        return self.by_key.get(exact_key(name))


@dataclass
class Resolution:
    """Outcome of resolving one ingredient name against the tables."""

    query: str
    match: MatchResult | None
    nutrients: dict[str, float] | None
    source_name: str | None
    low_confidence: bool = False
    tied: tuple[str, ...] = ()

    @property
    def matched(self) -> bool:
        return self.match is not None


def _best_embedding(
    name: str, index: VectorIndex, embedder: EmbeddingBackend
) -> tuple[MatchResult, tuple[str, ...]]:
    results = nearest(name, index, embedder)
    tied = tuple(r.candidate for r in results) if len(results) > 1 else ()
    if tied:
        logger.warning("embedding tie for %r in %s: %s", name, index.source, tied)
    return results[0], tied


def resolve_nutrients(
    name: str,
    swiss: NutrientTable,
    usda: NutrientTable,
    embedder: EmbeddingBackend,
    threshold: float = DEFAULT_THRESHOLD,
    floor: float = DEFAULT_FLOOR,
) -> Resolution:
    """Resolve a name through the ladder exact-swiss > exact-usda >
    embedding-swiss > embedding-usda and return the attached nutrients.

    Embedding matches at or above ``threshold`` are clean; between ``floor``
    and ``threshold`` they are attached flagged low-confidence; below
    ``floor`` the name stays unmatched.
    """
    if not swiss.entries and not usda.entries:
        raise MatchError("both nutrient databases are empty")

    for table in (swiss, usda):
        entry = table.exact(name)
        if entry is not None:
            match = MatchResult(
                query=name,
                candidate=entry.name,
                score=1.0,
                method="exact",
                source=table.source,
            )
            return Resolution(
                query=name,
                match=match,
                nutrients=dict(entry.nutrients),
                source_name=entry.name,
            )

    candidates: list[tuple[MatchResult, tuple[str, ...], NutrientTable]] = []
    for table in (swiss, usda):
        if table.entries:
            best, tied = _best_embedding(name, table.index, embedder)
            candidates.append((best, tied, table))

    chosen = next(
        (c for c in candidates if c[0].score >= threshold),
        max(candidates, key=lambda c: c[0].score),
    )
    best, tied, table = chosen
    if best.score < floor:
        return Resolution(
            query=name, match=None, nutrients=None, source_name=None, tied=tied
        )
    entry = table.by_name[best.candidate]
    return Resolution(
        query=name,
        match=best,
        nutrients=dict(entry.nutrients),
        source_name=entry.name,
        low_confidence=best.score < threshold,
        tied=tied,
    )


@dataclass
class GITable:
    entries: list[GIEntry]
    index: VectorIndex
    by_key: dict[str, GIEntry]
    by_name: dict[str, GIEntry]

    @classmethod
    def build(
        cls, entries: Sequence[GIEntry], embedder: EmbeddingBackend
    ) -> "GITable":
        by_key: dict[str, GIEntry] = {}
        for entry in entries:
            by_key.setdefault(exact_key(entry.name), entry)
        index = VectorIndex.build(_unique_names(entries), embedder, source="gi")
        return cls(
            entries=list(entries),
            index=index,
            by_key=by_key,
            by_name={entry.name: entry for entry in entries},
        )


@dataclass
class GIResolution:
    query: str
    match: MatchResult
    gi: float
    source_name: str
    low_confidence: bool = False


def attach_gi(
    name: str,
    gi_table: GITable,
    embedder: EmbeddingBackend,
    threshold: float = DEFAULT_THRESHOLD,
    floor: float = DEFAULT_FLOOR,
) -> GIResolution | None:
    """Find a GI value by the same ladder (exact, then embedding).

    Returns None when there is no plausible match; a node never receives a
    default GI value.
    """
    if not gi_table.entries:
        return None
    entry = gi_table.by_key.get(exact_key(name))
    if entry is not None:
        return GIResolution(
            query=name,
            match=MatchResult(name, entry.name, 1.0, "exact", "gi"),
            gi=entry.gi,
            source_name=entry.name,
        )
    best, _ = _best_embedding(name, gi_table.index, embedder)
    if best.score < floor:
        return None
    entry = gi_table.by_name[best.candidate]
    return GIResolution(
        query=name,
        match=best,
        gi=entry.gi,
        source_name=entry.name,
        low_confidence=best.score < threshold,
    )


# -- substitution linking --


@dataclass
class SubstitutionReport:
    substituted_by_edges: int = 0
    composite_nodes: int = 0
    has_composite_edges: int = 0
    composed_of_edges: int = 0
    created_substitute_nodes: int = 0
    skipped_targets: int = 0


def link_substitutes(
    entries: Sequence[SubstitutionEntry],
    graph: FoodGraph,
    embedder: EmbeddingBackend,
    threshold: float = DEFAULT_THRESHOLD,
) -> SubstitutionReport:
    """Materialize substitution entries as graph edges.

    Targets must resolve to an existing ingredient node (exact, then
    embedding at or above the threshold) or the entry is skipped. Substitute
    foods that resolve nowhere are created as substitute-only ingredient
    nodes. Single substitutes become SUBSTITUTED_BY edges; composites become
    a CompositeSubstitute node with HAS_COMPOSITE_SUBSTITUTE and COMPOSED_OF
    edges.
    """
    report = SubstitutionReport()
    ingredient_nodes = graph.nodes_of_kind(NodeKind.INGREDIENT)
    key_to_id: dict[str, str] = {}
    for node in ingredient_nodes:
        key_to_id.setdefault(exact_key(node.name), node.id)
    names = [node.name for node in ingredient_nodes]
    index = (
        VectorIndex.build(names, embedder, source="subs") if names else None
    )

    def resolve_existing(name: str) -> str | None:
        node_id = key_to_id.get(exact_key(name))
        if node_id is not None:
            return node_id
        if index is None:
            return None
        best = nearest(name, index, embedder)[0]
        if best.score >= threshold:
            matched = graph.find_node(NodeKind.INGREDIENT, best.candidate)
            return matched.id if matched else None
        return None

    def resolve_or_create(name: str) -> str:
        node_id = resolve_existing(name)
        if node_id is not None:
            return node_id
        node_id = graph.add_node(
            NodeKind.INGREDIENT, name, {"is_substitute_only": True}
        )
        key_to_id.setdefault(exact_key(name), node_id)
        report.created_substitute_nodes += 1
        return node_id

    with graph.batch():
        for entry in entries:
            target_id = resolve_existing(entry.target)
            if target_id is None:
                logger.info(
                    "substitution target %r has no ingredient node; skipped",
                    entry.target,
                )
                report.skipped_targets += 1
                continue
            for substitute in entry.substitutes:
                props: dict = {}
                if substitute.ratio is not None:
                    props["ratio"] = substitute.ratio
                if substitute.notes:
                    props["notes"] = substitute.notes
                if not substitute.is_composite:
                    sub_id = resolve_or_create(substitute.components[0].name)
                    if not graph.find_edges(target_id, EdgeKind.SUBSTITUTED_BY, sub_id):
                        graph.add_edge(
                            target_id, EdgeKind.SUBSTITUTED_BY, sub_id, props
                        )
                        report.substituted_by_edges += 1
                    continue
                composite_name = " + ".join(c.name for c in substitute.components)
                existing = graph.find_node(
                    NodeKind.COMPOSITE_SUBSTITUTE, composite_name
                )
                composite_id = graph.add_node(
                    NodeKind.COMPOSITE_SUBSTITUTE, composite_name
                )
                if existing is None:
                    report.composite_nodes += 1
                if not graph.find_edges(
                    target_id, EdgeKind.HAS_COMPOSITE_SUBSTITUTE, composite_id
                ):
                    graph.add_edge(
                        target_id,
                        EdgeKind.HAS_COMPOSITE_SUBSTITUTE,
                        composite_id,
                        props,
                    )
                    report.has_composite_edges += 1
                for component in substitute.components:
                    comp_props: dict = {}
                    if component.quantity is not None:
                        comp_props["quantity"] = component.quantity
                    if component.unit:
                        comp_props["unit"] = component.unit
                    ing_id = resolve_or_create(component.name)
                    if not graph.find_edges(composite_id, EdgeKind.COMPOSED_OF, ing_id):
                        graph.add_edge(
                            composite_id, EdgeKind.COMPOSED_OF, ing_id, comp_props
                        )
                        report.composed_of_edges += 1
    return report
