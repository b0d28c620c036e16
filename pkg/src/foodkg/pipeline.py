"""End-to-end pipeline: ingest -> enrich -> match -> build graph -> index.

Each stage reads the previous stage's artifact file and writes its own under
the configured work directory, so a run can resume from any completed stage
and every intermediate result stays auditable. All artifact writers sort
collections and keys, which makes reruns over unchanged inputs byte-identical
when the backends are deterministic (they are, in mock mode).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .backends import (
    BackendUnreachable,
    ChatBackend,
    EmbeddingBackend,
    GenerationConfig,
    HttpChatBackend,
    HttpEmbeddingBackend,
    MockChatBackend,
    MockEmbedder,
)
from .enrich import (
    CanonicalRecipe,
    EnrichedCorpus,
    IngredientLabels,
    PromptPack,
    RecipeTags,
    SplitIngredient,
    enrich_corpus,
)
from .graph import FoodGraph
from .graphrag import build_fact_index, save_fact_index
from .ingest import (
    RawRecipe,
    SubstitutionEntry,
    assign_ids,
    dedupe,
    load_gi_table,
    load_nutrient_db,
    load_substitutions,
    parse_recipe_corpus,
)
from .match import (
    GIResolution,
    GITable,
    NutrientTable,
    Resolution,
    attach_gi,
    link_substitutes,
    resolve_nutrients,
)
from .ontology import (
    EdgeKind,
    NodeKind,
    allergen_categories,
    cuisines,
    seasons,
    sfp_categories,
)

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, cause: str) -> None:
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    corpus: Path
    nutrients_swiss: Path
    nutrients_usda: Path
    workdir: Path
    snapshot: Path
    index: Path
    gi: Path | None = None
    substitutions: Path | None = None
    prompt_pack: Path | None = None
    chat_endpoint: str = "http://127.0.0.1:11434"
    chat_model: str = "chat-model"
    embed_endpoint: str = "http://127.0.0.1:11434"
    embed_model: str = "embed-model"
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    cutoff: float = 0.5
    k: int = 10
    match_threshold: float = 0.5
    match_floor: float = 0.25
    mock: bool = False
    mock_transcript: Path | None = None
    mock_embed_dim: int = 32
    max_workers: int = 4

    def artifact(self, name: str) -> Path:
        return self.workdir / name


def load_config(path: str | Path, mock_override: bool = False) -> RunConfig:
    """Load and validate a JSON run config; every referenced input file must
    exist, and mock mode requires a transcript path."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")

    base = path.parent

    def resolve(p: str | None) -> Path | None:
        return (base / p).resolve() if p else None

    paths = data.get("paths", {})
    required = ("corpus", "nutrients_swiss", "nutrients_usda", "snapshot", "index")
    for key in required:
        if not paths.get(key):
            raise ConfigError(f"config paths.{key} is required")

    mock_cfg = data.get("mock", {})
    mock = bool(mock_cfg.get("enabled", False)) or mock_override

    cfg = RunConfig(
        corpus=resolve(paths["corpus"]),
        nutrients_swiss=resolve(paths["nutrients_swiss"]),
        nutrients_usda=resolve(paths["nutrients_usda"]),
        gi=resolve(paths.get("gi")),
        substitutions=resolve(paths.get("substitutions")),
        workdir=resolve(paths.get("workdir", "artifacts")),
        snapshot=resolve(paths["snapshot"]),
        index=resolve(paths["index"]),
        prompt_pack=resolve(paths.get("prompt_pack")),
        chat_endpoint=data.get("chat", {}).get("endpoint", "http://127.0.0.1:11434"),
        chat_model=data.get("chat", {}).get("model", "chat-model"),
        embed_endpoint=data.get("embedding", {}).get(
            "endpoint", "http://127.0.0.1:11434"
        ),
        embed_model=data.get("embedding", {}).get("model", "embed-model"),
        generation=GenerationConfig().with_overrides(data.get("generation")),
        cutoff=float(data.get("retrieval", {}).get("cutoff", 0.5)),
        k=int(data.get("retrieval", {}).get("k", 10)),
        match_threshold=float(data.get("matching", {}).get("threshold", 0.5)),
        match_floor=float(data.get("matching", {}).get("floor", 0.25)),
        mock=mock,
        mock_transcript=resolve(mock_cfg.get("chat_transcript")),
        mock_embed_dim=int(mock_cfg.get("embed_dim", 32)),
        max_workers=int(data.get("max_workers", 4)),
    )

    for name, file in (
        ("corpus", cfg.corpus),
        ("nutrients_swiss", cfg.nutrients_swiss),
        ("nutrients_usda", cfg.nutrients_usda),
        ("gi", cfg.gi),
        ("substitutions", cfg.substitutions),
        ("prompt_pack", cfg.prompt_pack),
    ):
        if file is not None and not file.exists():
            raise ConfigError(f"config paths.{name}: {file} does not exist")
    if cfg.mock:
        if cfg.mock_transcript is None:
            raise ConfigError("mock mode requires mock.chat_transcript")
        if not cfg.mock_transcript.exists():
            raise ConfigError(
                f"mock.chat_transcript: {cfg.mock_transcript} does not exist"
            )
    return cfg


def make_chat_backend(cfg: RunConfig) -> ChatBackend:
    if cfg.mock:
        return MockChatBackend.from_file(cfg.mock_transcript)
    return HttpChatBackend(cfg.chat_endpoint, cfg.chat_model)


def make_embedder(cfg: RunConfig) -> EmbeddingBackend:
    if cfg.mock:
        return MockEmbedder(dim=cfg.mock_embed_dim)
    return HttpEmbeddingBackend(cfg.embed_endpoint, cfg.embed_model)


def make_prompt_pack(cfg: RunConfig) -> PromptPack:
    if cfg.prompt_pack is not None:
        return PromptPack.from_dir(cfg.prompt_pack)
    return PromptPack.bundled()


def _write_json(path: Path, payload: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )


def _read_json(path: Path, stage: str) -> Any:
    if not path.exists():
        raise StageError(stage, f"missing artifact {path.name}; run the earlier stages")
    return json.loads(path.read_text(encoding="utf-8"))


# -- artifact (de)serialization --


def _raw_recipe_to_dict(recipe: RawRecipe) -> dict:
    return asdict(recipe)


def _raw_recipe_from_dict(data: dict) -> RawRecipe:
    return RawRecipe(**data)


def _split_to_dict(split: SplitIngredient) -> dict:
    return {
        "name": split.name,
        "quantity": split.quantity,
        "unit": split.unit,
        "notes": split.notes,
        "utensils": list(split.utensils),
    }


def _canonical_to_dict(recipe: CanonicalRecipe) -> dict:
    return {
        "id": recipe.id,
        "name": recipe.name,
        "description": recipe.description,
        "keywords": list(recipe.keywords),
        "nutrition": dict(recipe.nutrition),
        "instructions": list(recipe.instructions),
        "ingredients": [_split_to_dict(s) for s in recipe.ingredients],
        "utensils": list(recipe.utensils),
        "tags": {
            "cuisine": recipe.tags.cuisine,
            "seasons": list(recipe.tags.seasons),
            "diets": sorted(recipe.tags.diets),
        },
        "diet_flags": dict(sorted(recipe.diet_flags.items())),
        "cuisine_hint": recipe.cuisine_hint,
        "season_hint": recipe.season_hint,
    }


def _canonical_from_dict(data: dict) -> CanonicalRecipe:
    return CanonicalRecipe(
        id=data["id"],
        name=data["name"],
        description=data["description"],
        keywords=list(data["keywords"]),
        nutrition=dict(data["nutrition"]),
        instructions=list(data["instructions"]),
        ingredients=[SplitIngredient(**s) for s in data["ingredients"]],
        utensils=list(data["utensils"]),
        tags=RecipeTags(
            cuisine=data["tags"]["cuisine"],
            seasons=tuple(data["tags"]["seasons"]),
            diets=frozenset(data["tags"]["diets"]),
        ),
        diet_flags=dict(data["diet_flags"]),
        cuisine_hint=data.get("cuisine_hint"),
        season_hint=data.get("season_hint"),
    )


def _labels_to_dict(labels: IngredientLabels) -> dict:
    return {
        "allergens": sorted(labels.allergens),
        "sfp": labels.sfp,
        "diets": dict(sorted(labels.diets.items())),
    }


def _labels_from_dict(data: dict) -> IngredientLabels:
    return IngredientLabels(
        allergens=frozenset(data["allergens"]),
        sfp=data["sfp"],
        diets=dict(data["diets"]),
    )


def _resolution_to_dict(res: Resolution) -> dict:
    return {
        "query": res.query,
        "matched": res.matched,
        "method": res.match.method if res.match else None,
        "source": res.match.source if res.match else None,
        "candidate": res.match.candidate if res.match else None,
        "score": res.match.score if res.match else None,
        "low_confidence": res.low_confidence,
        "tied": list(res.tied),
        "nutrients": res.nutrients,
        "source_name": res.source_name,
    }


def _gi_to_dict(res: GIResolution) -> dict:
    return {
        "query": res.query,
        "method": res.match.method,
        "candidate": res.match.candidate,
        "score": res.match.score,
        "gi": res.gi,
        "source_name": res.source_name,
        "low_confidence": res.low_confidence,
    }


# -- stages --

INGEST_ARTIFACT = "ingest.json"
ENRICH_ARTIFACT = "enrich.json"
MATCH_ARTIFACT = "match.json"
RUN_REPORT = "run_report.json"


def stage_ingest(cfg: RunConfig) -> dict:
    """Parse, validate, dedupe and id-assign the recipe corpus."""
    try:
        report = parse_recipe_corpus(cfg.corpus)
        deduped = dedupe(report.parsed)
        recipes = assign_ids(deduped)
    except Exception as exc:
        raise StageError("ingest", str(exc)) from exc
    counts = {
        "records_total": report.total,
        "parsed": len(report.parsed),
        "rejected": len(report.rejected),
        "rejected_by_reason": _count_by(r.reason for r in report.rejected),
        "after_dedupe": len(recipes),
    }
    payload = {
        "recipes": [_raw_recipe_to_dict(r) for r in recipes],
        "rejected": [asdict(r) for r in report.rejected],
        "counts": counts,
    }
    _write_json(cfg.artifact(INGEST_ARTIFACT), payload)
    return counts


def _count_by(items) -> dict[str, int]:
    counts: dict[str, int] = {}
    for item in items:
        counts[item] = counts.get(item, 0) + 1
    return dict(sorted(counts.items()))


def stage_enrich(cfg: RunConfig) -> dict:
    """Run the LLM enrichment over the ingested corpus."""
    data = _read_json(cfg.artifact(INGEST_ARTIFACT), "enrich")
    recipes = [_raw_recipe_from_dict(r) for r in data["recipes"]]
    backend = make_chat_backend(cfg)
    prompts = make_prompt_pack(cfg)
    try:
        corpus = enrich_corpus(
            recipes, backend, prompts, cfg.generation, max_workers=cfg.max_workers
        )
    except BackendUnreachable:
        raise
    except Exception as exc:
        raise StageError("enrich", str(exc)) from exc
    utensil_only = sum(
        1 for r in corpus.recipes for s in r.ingredients if s.is_utensil_only
    )
    counts = {
        "recipes": len(corpus.recipes),
        "unique_ingredients": len(corpus.ingredient_labels),
        "utensil_only_lines": utensil_only,
        "warnings": len(corpus.warnings),
    }
    payload = {
        "recipes": [_canonical_to_dict(r) for r in corpus.recipes],
        "ingredient_labels": {
            name: _labels_to_dict(labels)
            for name, labels in sorted(corpus.ingredient_labels.items())
        },
        "warnings": corpus.warnings,
        "prompt_checksums": prompts.checksums(),
        "counts": counts,
    }
    _write_json(cfg.artifact(ENRICH_ARTIFACT), payload)
    return counts


def _load_enriched(cfg: RunConfig, stage: str) -> EnrichedCorpus:
    data = _read_json(cfg.artifact(ENRICH_ARTIFACT), stage)
    return EnrichedCorpus(
        recipes=[_canonical_from_dict(r) for r in data["recipes"]],
        ingredient_labels={
            name: _labels_from_dict(l)
            for name, l in data["ingredient_labels"].items()
        },
        warnings=list(data["warnings"]),
    )


def stage_match(cfg: RunConfig) -> dict:
    """Resolve every unique ingredient name against the nutrient and GI
    tables; writes per-name resolutions and the ladder distribution."""
    corpus = _load_enriched(cfg, "match")
    embedder = make_embedder(cfg)
    try:
        swiss_rows = load_nutrient_db(cfg.nutrients_swiss, "swiss")
        usda_rows = load_nutrient_db(cfg.nutrients_usda, "usda")
        swiss = NutrientTable.build(swiss_rows.entries, embedder, "swiss")
        usda = NutrientTable.build(usda_rows.entries, embedder, "usda")
        gi_table = None
        if cfg.gi is not None:
            gi_rows = load_gi_table(cfg.gi)
            gi_table = GITable.build(gi_rows.entries, embedder)

        resolutions: dict[str, dict] = {}
        gi_resolutions: dict[str, dict] = {}
        ladder: dict[str, int] = {
            "exact_swiss": 0,
            "exact_usda": 0,
            "embedding_swiss": 0,
            "embedding_usda": 0,
            "unmatched": 0,
        }
        low_confidence = 0
        for name in corpus.unique_ingredient_names():
            res = resolve_nutrients(
                name, swiss, usda, embedder, cfg.match_threshold, cfg.match_floor
            )
            resolutions[name] = _resolution_to_dict(res)
            if res.match is None:
                ladder["unmatched"] += 1
            else:
                ladder[f"{res.match.method}_{res.match.source}"] += 1
                low_confidence += res.low_confidence
            if gi_table is not None:
                gi_res = attach_gi(
                    name, gi_table, embedder, cfg.match_threshold, cfg.match_floor
                )
                if gi_res is not None:
                    gi_resolutions[name] = _gi_to_dict(gi_res)
    except BackendUnreachable:
        raise
    except Exception as exc:
        raise StageError("match", str(exc)) from exc

    counts = {
        "ladder": ladder,
        "low_confidence": low_confidence,
        "gi_attached": len(gi_resolutions),
        "zero_nutrient_ingredients": ladder["unmatched"],
        "swiss_rows_skipped": len(swiss_rows.skipped),
        "usda_rows_skipped": len(usda_rows.skipped),
    }
    payload = {
        "resolutions": dict(sorted(resolutions.items())),
        "gi": dict(sorted(gi_resolutions.items())),
        "counts": counts,
    }
    _write_json(cfg.artifact(MATCH_ARTIFACT), payload)
    return counts


def build_graph(
    corpus: EnrichedCorpus,
    resolutions: dict[str, dict],
    gi_resolutions: dict[str, dict],
    substitutions: list[SubstitutionEntry],
    embedder: EmbeddingBackend,
    match_threshold: float,
) -> tuple[FoodGraph, dict]:
    """Assemble the typed graph from enriched recipes, attach nutrient/GI
    props, and link substitutions."""
    graph = FoodGraph.seeded()
    valid_seasons = set(seasons())
    valid_cuisines = set(cuisines())
    allergen_node: dict[int, str] = {
        cat.id: graph.find_node(NodeKind.ALLERGEN_CATEGORY, cat.name).id
        for cat in allergen_categories()
    }
    sfp_node: dict[str, str] = {
        cat.id: graph.find_node(NodeKind.SFP_CATEGORY, cat.name).id
        for cat in sfp_categories()
    }

    with graph.batch():
        for recipe in corpus.recipes:
            display = recipe.name
            clash = graph.find_node(NodeKind.RECIPE, display)
            if clash is not None:
                display = f"{recipe.name} ({recipe.id})"
            props: dict = {"recipe_id": recipe.id}
            if recipe.description:
                props["description"] = recipe.description
            if recipe.keywords:
                props["keywords"] = list(recipe.keywords)
            props.update(recipe.nutrition)
            recipe_id = graph.add_node(NodeKind.RECIPE, display, props)

            step_ids: list[str] = []
            for idx, step in enumerate(recipe.instructions, start=1):
                step_name = f"{display}, step {idx}: {step}"
                step_id = graph.add_node(
                    NodeKind.INSTRUCTION, step_name, {"step_index": idx}
                )
                graph.add_edge(recipe_id, EdgeKind.HAS, step_id)
                step_ids.append(step_id)

            ingredient_ids: dict[str, str] = {}
            ingredient_props: dict[str, dict] = {}
            for split in recipe.ingredients:
                if split.name is None:
                    continue
                ing_id = graph.add_node(NodeKind.INGREDIENT, split.name)
                ingredient_ids.setdefault(split.name, ing_id)
                edge_props: dict = {}
                if split.quantity is not None:
                    edge_props["quantity"] = split.quantity
                if split.unit:
                    edge_props["unit"] = split.unit
                if split.notes:
                    edge_props["notes"] = split.notes
                ingredient_props.setdefault(split.name, edge_props)
                graph.add_edge(recipe_id, EdgeKind.CONTAINS, ing_id, edge_props)

            for utensil in recipe.utensils:
                utensil_id = graph.add_node(NodeKind.UTENSIL, utensil)
                if not graph.find_edges(recipe_id, EdgeKind.USES, utensil_id):
                    graph.add_edge(recipe_id, EdgeKind.USES, utensil_id)

            # Instruction -> Ingredient usage by name mention in the step text.
            for step_id, step in zip(step_ids, recipe.instructions):
                lowered = step.lower()
                for name, ing_id in ingredient_ids.items():
                    if name in lowered:
                        graph.add_edge(
                            step_id, EdgeKind.USES, ing_id, ingredient_props[name]
                        )

            season_tags = set(recipe.tags.seasons)
            if recipe.season_hint and recipe.season_hint.lower() in valid_seasons:
                season_tags.add(recipe.season_hint.lower())
            for season in sorted(season_tags):
                season_node = graph.find_node(NodeKind.SEASON, season)
                graph.add_edge(recipe_id, EdgeKind.IS_FOR_SEASON, season_node.id)

            hint = recipe.cuisine_hint.lower() if recipe.cuisine_hint else None
            cuisine = recipe.tags.cuisine or (
                hint if hint in valid_cuisines else None
            )
            if cuisine:
                cuisine_id = graph.add_node(NodeKind.CUISINE, cuisine)
                graph.add_edge(recipe_id, EdgeKind.IS_PART_OF, cuisine_id)

            for diet, suitable in sorted(recipe.diet_flags.items()):
                if suitable:
                    diet_node = graph.find_node(NodeKind.DIET_RESTRICTION, diet)
                    graph.add_edge(recipe_id, EdgeKind.IS_SUITABLE_FOR, diet_node.id)

        for name, labels in corpus.ingredient_labels.items():
            node = graph.find_node(NodeKind.INGREDIENT, name)
            if node is None:
                # Labeled but never attached to a recipe (all lines dropped).
                continue
            for allergen in sorted(labels.allergens):
                graph.add_edge(
                    node.id, EdgeKind.ALLERGEN_OF, allergen_node[allergen]
                )
            if labels.sfp is not None:
                graph.add_edge(node.id, EdgeKind.CLASSIFIED_AS, sfp_node[labels.sfp])
            for diet, suitable in sorted(labels.diets.items()):
                if suitable:
                    diet_node = graph.find_node(NodeKind.DIET_RESTRICTION, diet)
                    graph.add_edge(node.id, EdgeKind.IS_SUITABLE_FOR, diet_node.id)

            res = resolutions.get(name)
            if res and res["matched"]:
                props = dict(res["nutrients"] or {})
                props["nutrients_source"] = res["source"]
                props["nutrients_source_name"] = res["source_name"]
                if res["low_confidence"]:
                    props["nutrients_low_confidence"] = True
                node.props.update(props)
            gi_res = gi_resolutions.get(name)
            if gi_res is not None:
                node.props["gi"] = gi_res["gi"]
                node.props["gi_source_name"] = gi_res["source_name"]
                if gi_res["low_confidence"]:
                    node.props["gi_low_confidence"] = True

    subs_report = link_substitutes(substitutions, graph, embedder, match_threshold)
    stats = graph.stats()
    counts = {
        "nodes": stats.total_nodes,
        "edges": stats.total_edges,
        "substituted_by_edges": subs_report.substituted_by_edges,
        "composite_nodes": subs_report.composite_nodes,
        "has_composite_edges": subs_report.has_composite_edges,
        "composed_of_edges": subs_report.composed_of_edges,
        "created_substitute_nodes": subs_report.created_substitute_nodes,
        "skipped_substitution_targets": subs_report.skipped_targets,
    }
    return graph, counts


def stage_build(cfg: RunConfig) -> dict:
    """Build the graph from the enrich and match artifacts, then snapshot it."""
    corpus = _load_enriched(cfg, "build-graph")
    match_data = _read_json(cfg.artifact(MATCH_ARTIFACT), "build-graph")
    embedder = make_embedder(cfg)
    try:
        substitutions: list[SubstitutionEntry] = []
        if cfg.substitutions is not None:
            substitutions = load_substitutions(cfg.substitutions).entries
        graph, counts = build_graph(
            corpus,
            match_data["resolutions"],
            match_data["gi"],
            substitutions,
            embedder,
            cfg.match_threshold,
        )
        cfg.snapshot.parent.mkdir(parents=True, exist_ok=True)
        graph.export_snapshot(cfg.snapshot)
    except BackendUnreachable:
        raise
    except Exception as exc:
        raise StageError("build-graph", str(exc)) from exc
    return counts


def stage_index(cfg: RunConfig) -> dict:
    """Embed every graph fact and persist the index."""
    try:
        graph = FoodGraph.import_snapshot(cfg.snapshot)
        embedder = make_embedder(cfg)
        index = build_fact_index(graph, embedder)
        cfg.index.parent.mkdir(parents=True, exist_ok=True)
        save_fact_index(index, cfg.index)
    except BackendUnreachable:
        raise
    except Exception as exc:
        raise StageError("embed-index", str(exc)) from exc
    return {"facts": len(index), "model_tag": index.model_tag}


def run_pipeline(cfg: RunConfig) -> dict:
    """Run all stages in order and write the combined run report."""
    report = {
        "ingest": stage_ingest(cfg),
        "enrich": stage_enrich(cfg),
        "match": stage_match(cfg),
        "build": stage_build(cfg),
        "index": stage_index(cfg),
        "prompt_checksums": make_prompt_pack(cfg).checksums(),
    }
    _write_json(cfg.artifact(RUN_REPORT), report)
    return report
