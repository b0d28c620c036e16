"""LLM-backed enrichment: translation, ingredient splitting, category
mapping, and recipe tagging.

Every task goes through ``complete_structured``: the backend's text reply is
parsed as JSON, read leniently (unknown fields dropped, missing optional
fields defaulted), validated against the task schema and the closed
vocabularies, and retried with a corrective instruction when invalid. After
the retry budget the task fails hard with the raw model text attached, so an
out-of-vocabulary label can never reach the graph.

Prompts live in a versioned pack (one text file per task); their checksums
go into run reports. The user-prompt builders are module functions so that
offline transcript files can be constructed against the exact same strings.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

from pydantic import BaseModel, ConfigDict, ValidationError

from .backends import ChatBackend, GenerationConfig
from .ingest import RawRecipe
from .ontology import (
    UNRESTRICTED,
    allergen_categories,
    apply_diet_implications,
    cuisines,
    diet_ids,
    restriction_ids,
    seasons,
    sfp_categories,
)

logger = logging.getLogger(__name__)

PROMPT_TASKS = (
    "translation",
    "splitting",
    "allergen",
    "sfp",
    "diets",
    "tagging",
    "query_plan",
    "synthesis",
)


class EnrichmentError(Exception):
    pass


class SchemaViolation(EnrichmentError):
    """The backend kept returning output that fails schema or vocabulary
    validation; ``raw`` carries its last reply."""

    def __init__(self, message: str, raw: str) -> None:
        super().__init__(message)
        self.raw = raw


@dataclass
class PromptPack:
    """System-prompt templates, one per task, with vocabulary placeholders."""

    templates: dict[str, str]

    @classmethod
    def bundled(cls) -> "PromptPack":
        templates = {
            task: resources.files("foodkg.data.prompts")
            .joinpath(f"{task}.txt")
            .read_text("utf-8")
            for task in PROMPT_TASKS
        }
        return cls(templates)

    @classmethod
    def from_dir(cls, path: str | Path) -> "PromptPack":
        root = Path(path)
        templates: dict[str, str] = {}
        for task in PROMPT_TASKS:
            file = root / f"{task}.txt"
            if not file.is_file():
                raise EnrichmentError(f"prompt pack is missing {file.name}")
            templates[task] = file.read_text(encoding="utf-8")
        return cls(templates)

    def system_prompt(self, task: str) -> str:
        try:
            template = self.templates[task]
        except KeyError:
            raise EnrichmentError(f"unknown prompt task {task!r}") from None
        # Plain replacement, not str.format: templates contain JSON braces.
        vocabularies = {
            "{allergen_categories}": "\n".join(
                f"{c.id}: {c.name}" for c in allergen_categories()
            ),
            "{sfp_categories}": "\n".join(
                f"{c.id}: {c.name}" for c in sfp_categories()
            ),
            "{diets}": ", ".join(diet_ids()),
            "{seasons}": ", ".join(seasons()),
            "{cuisines}": ", ".join(cuisines()),
        }
        for placeholder, text in vocabularies.items():
            template = template.replace(placeholder, text)
        return template

    def checksums(self) -> dict[str, str]:
        return {
            task: hashlib.sha256(text.encode("utf-8")).hexdigest()
            for task, text in sorted(self.templates.items())
        }


# -- structured completion --


def extract_json(text: str) -> object:
    """Pull the first JSON value out of a model reply that may carry prose."""
    decoder = json.JSONDecoder()
    for start, ch in enumerate(text):
        if ch in "{[":
            try:
                value, _ = decoder.raw_decode(text[start:])
                return value
            except json.JSONDecodeError:
                continue
    raise ValueError("reply contains no JSON value")


def corrective_prompt(user: str, reason: str) -> str:
    """The retry prompt: the original request plus a fix-it instruction."""
    return (
        f"{user}\n\n[correction] Your previous reply was invalid: {reason}. "
        "Reply with exactly one JSON object matching the required schema and "
        "nothing else."
    )


def _failure_reason(exc: Exception) -> str:
    if isinstance(exc, ValidationError):
        parts = [
            f"{'.'.join(str(loc) for loc in err['loc'])}: {err['msg']}"
            for err in exc.errors()[:3]
        ]
        return "; ".join(parts)
    return str(exc)


M = TypeVar("M", bound=BaseModel)


def complete_structured(
    backend: ChatBackend,
    system: str,
    user: str,
    model_cls: type[M],
    config: GenerationConfig,
    validate: Callable[[M], None] | None = None,
) -> M:
    """Ask the backend for JSON conforming to ``model_cls``.

    ``validate`` may raise ValueError for semantic violations (e.g. labels
    outside a closed vocabulary); those are retried like schema errors.
    """
    current_user = user
    last_raw = ""
    last_reason = ""
    for _ in range(config.max_retries + 1):
        raw = backend.complete(system, current_user, config)
        try:
            value = model_cls.model_validate(extract_json(raw))
            if validate is not None:
                validate(value)
            return value
        except (ValueError, ValidationError) as exc:
            last_raw = raw
            last_reason = _failure_reason(exc)
            current_user = corrective_prompt(user, last_reason)
    raise SchemaViolation(
        f"backend output failed validation after {config.max_retries} retries: "
        f"{last_reason}",
        raw=last_raw,
    )


# -- response schemas (read leniently: extra fields are dropped) --


class _Lenient(BaseModel):
    model_config = ConfigDict(extra="ignore")


class TranslationOut(_Lenient):
    name: str
    description: str = ""
    keywords: list[str] = []
    ingredient_lines: list[str]
    instructions: list[str]


class SplitOut(_Lenient):
    name: str | None = None
    quantity: float | None = None
    unit: str | None = None
    notes: str | None = None
    utensils: list[str] = []


class AllergenOut(_Lenient):
    allergens: list[int] = []


class SfpOut(_Lenient):
    sfp: str | None = None


class DietsOut(_Lenient):
    diets: dict[str, bool]


class TagOut(_Lenient):
    cuisine: str | None = None
    seasons: list[str] = []
    diets: list[str] = []


# -- domain results --


@dataclass
class SplitIngredient:
    """One parsed ingredient line; ``name`` is None for utensil-only lines."""

    name: str | None
    quantity: float | None = None
    unit: str | None = None
    notes: str | None = None
    utensils: list[str] = field(default_factory=list)

    @property
    def is_utensil_only(self) -> bool:
        return self.name is None


@dataclass
class RecipeTags:
    cuisine: str | None
    seasons: tuple[str, ...]
    diets: frozenset[str]


@dataclass
class IngredientLabels:
    allergens: frozenset[int]
    sfp: str | None
    diets: dict[str, bool]


# -- user-prompt builders (shared with transcript tooling) --


def translation_user_prompt(recipe: RawRecipe) -> str:
    lines = [f"name: {recipe.name}", f"description: {recipe.description}"]
    lines.append("keywords: " + " | ".join(recipe.keywords))
    lines.append("ingredient_lines:")
    lines.extend(f"{i}. {line}" for i, line in enumerate(recipe.ingredient_lines, 1))
    lines.append("instructions:")
    lines.extend(f"{i}. {step}" for i, step in enumerate(recipe.instructions, 1))
    return "\n".join(lines)


def tagging_user_prompt(recipe: RawRecipe) -> str:
    return (
        f"name: {recipe.name} | description: {recipe.description} | "
        f"keywords: {', '.join(recipe.keywords)}"
    )


# -- enrichment tasks --


def translate_recipe(
    recipe: RawRecipe,
    backend: ChatBackend,
    prompts: PromptPack,
    config: GenerationConfig,
) -> RawRecipe:
    """Translate a non-English recipe; English input returns unchanged."""
    if recipe.language == "en":
        return recipe

    def check(out: TranslationOut) -> None:
        if len(out.ingredient_lines) != len(recipe.ingredient_lines):
            raise ValueError(
                f"ingredient line count changed: expected "
                f"{len(recipe.ingredient_lines)}, got {len(out.ingredient_lines)}"
            )
        if len(out.instructions) != len(recipe.instructions):
            raise ValueError(
                f"instruction count changed: expected "
                f"{len(recipe.instructions)}, got {len(out.instructions)}"
            )
        if len(out.keywords) != len(recipe.keywords):
            raise ValueError(
                f"keyword count changed: expected {len(recipe.keywords)}, "
                f"got {len(out.keywords)}"
            )
        if not out.name.strip():
            raise ValueError("translated name is empty")

    out = complete_structured(
        backend,
        prompts.system_prompt("translation"),
        translation_user_prompt(recipe),
        TranslationOut,
        config,
        validate=check,
    )
    return replace(
        recipe,
        name=out.name.strip(),
        description=out.description.strip(),
        keywords=[k.strip() for k in out.keywords],
        ingredient_lines=[line.strip() for line in out.ingredient_lines],
        instructions=[step.strip() for step in out.instructions],
        language="en",
    )


def split_ingredient_line(
    line: str,
    backend: ChatBackend,
    prompts: PromptPack,
    config: GenerationConfig,
) -> SplitIngredient:
    if not line or not line.strip():
        raise EnrichmentError("ingredient line must be non-empty")

    def check(out: SplitOut) -> None:
        if out.name is not None and not out.name.strip():
            raise ValueError("name must be null or non-empty")
        if out.name is None and not out.utensils:
            raise ValueError("a line with no food must name at least one utensil")
        if out.quantity is not None and out.quantity < 0:
            raise ValueError("quantity must be non-negative")
        if out.name is not None:
            lowered = out.name.strip().lower()
            for utensil in out.utensils:
                if utensil.strip().lower() == lowered:
                    raise ValueError("utensils must not appear as the food name")

    out = complete_structured(
        backend,
        prompts.system_prompt("splitting"),
        line.strip(),
        SplitOut,
        config,
        validate=check,
    )
    return SplitIngredient(
        name=out.name.strip().lower() if out.name else None,
        quantity=out.quantity,
        unit=out.unit.strip().lower() if out.unit else None,
        notes=out.notes.strip() if out.notes else None,
        utensils=[u.strip().lower() for u in out.utensils if u.strip()],
    )


def map_allergens(
    name: str,
    backend: ChatBackend,
    prompts: PromptPack,
    config: GenerationConfig,
) -> frozenset[int]:
    valid_ids = {c.id for c in allergen_categories()}

    def check(out: AllergenOut) -> None:
        bad = [a for a in out.allergens if a not in valid_ids]
        if bad:
            raise ValueError(f"unknown allergen categories: {bad}")

    out = complete_structured(
        backend,
        prompts.system_prompt("allergen"),
        name,
        AllergenOut,
        config,
        validate=check,
    )
    return frozenset(out.allergens)


def map_sfp(
    name: str,
    backend: ChatBackend,
    prompts: PromptPack,
    config: GenerationConfig,
) -> str | None:
    valid_ids = {c.id for c in sfp_categories()}

    def check(out: SfpOut) -> None:
        if out.sfp is not None and out.sfp not in valid_ids:
            raise ValueError(f"unknown food pyramid category: {out.sfp!r}")

    out = complete_structured(
        backend,
        prompts.system_prompt("sfp"),
        name,
        SfpOut,
        config,
        validate=check,
    )
    return out.sfp


def map_diets(
    name: str,
    backend: ChatBackend,
    prompts: PromptPack,
    config: GenerationConfig,
) -> dict[str, bool]:
    """Per-diet suitability flags for one ingredient, over all 19 labels."""
    valid = set(diet_ids())

    def check(out: DietsOut) -> None:
        unknown = sorted(set(out.diets) - valid)
        if unknown:
            raise ValueError(f"unknown diet labels: {unknown}")
        missing = sorted(valid - set(out.diets))
        if missing:
            raise ValueError(f"missing diet labels: {missing}")

    out = complete_structured(
        backend,
        prompts.system_prompt("diets"),
        name,
        DietsOut,
        config,
        validate=check,
    )
    flags = dict(out.diets)
    flags[UNRESTRICTED] = True
    for implied in apply_diet_implications({d for d, v in flags.items() if v}):
        flags[implied] = True
    return flags


def tag_recipe(
    recipe: RawRecipe,
    backend: ChatBackend,
    prompts: PromptPack,
    config: GenerationConfig,
) -> RecipeTags:
    valid_cuisines = set(cuisines())
    valid_seasons = set(seasons())
    valid_diets = set(diet_ids())

    def check(out: TagOut) -> None:
        if out.cuisine is not None and out.cuisine not in valid_cuisines:
            raise ValueError(f"unknown cuisine: {out.cuisine!r}")
        bad_seasons = sorted(set(out.seasons) - valid_seasons)
        if bad_seasons:
            raise ValueError(f"unknown seasons: {bad_seasons}")
        bad_diets = sorted(set(out.diets) - valid_diets)
        if bad_diets:
            raise ValueError(f"unknown diet labels: {bad_diets}")

    out = complete_structured(
        backend,
        prompts.system_prompt("tagging"),
        tagging_user_prompt(recipe),
        TagOut,
        config,
        validate=check,
    )
    diets = apply_diet_implications(set(out.diets) | {UNRESTRICTED})
    ordered_seasons = tuple(s for s in seasons() if s in set(out.seasons))
    return RecipeTags(cuisine=out.cuisine, seasons=ordered_seasons, diets=frozenset(diets))


def propagate_recipe_diets(
    ingredient_diets: Sequence[dict[str, bool]],
) -> dict[str, bool]:
    """Recipe-level diet flags: AND over ingredient flags for each of the 18
    restrictions, with ``unrestricted`` always true (any dish suits someone
    without restrictions).

    A recipe with no labeled ingredients degenerates to all-true flags (the
    empty intersection); that is logged as a warning because it carries no
    evidence.
    """
    flags: dict[str, bool] = {}
    for label in restriction_ids():
        values = []
        for diets in ingredient_diets:
            if label not in diets:
                raise EnrichmentError(f"ingredient diet flags missing {label!r}")
            values.append(diets[label])
        flags[label] = all(values)
    flags[UNRESTRICTED] = True
    if not ingredient_diets:
        logger.warning(
            "recipe has no ingredient-level diet flags; "
            "all restriction flags default to true"
        )
    return flags


# -- corpus runner --


@dataclass
class CanonicalRecipe:
    """A recipe after translation, splitting, tagging and diet propagation."""

    id: str
    name: str
    description: str
    keywords: list[str]
    nutrition: dict[str, float]
    instructions: list[str]
    ingredients: list[SplitIngredient]
    utensils: list[str]
    tags: RecipeTags
    diet_flags: dict[str, bool]
    cuisine_hint: str | None = None
    season_hint: str | None = None


@dataclass
class EnrichedCorpus:
    recipes: list[CanonicalRecipe]
    ingredient_labels: dict[str, IngredientLabels]
    warnings: list[str] = field(default_factory=list)

    def unique_ingredient_names(self) -> list[str]:
        return list(self.ingredient_labels.keys())


def _dedup_preserve(items: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for item in items:
        key = item.strip().lower()
        if key and key not in seen:
            seen.add(key)
            out.append(key)
    return out


def enrich_corpus(
    recipes: Sequence[RawRecipe],
    backend: ChatBackend,
    prompts: PromptPack,
    config: GenerationConfig,
    max_workers: int = 4,
) -> EnrichedCorpus:
    """Run the full enrichment over a corpus.

    Items are independent and run with a bounded worker pool; results are
    merged in input order, so the output is deterministic regardless of
    completion order. Ingredient-level mappings run once per unique name.
    """
    warnings: list[str] = []

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        translated = list(
            pool.map(
                lambda r: translate_recipe(r, backend, prompts, config), recipes
            )
        )
        tags = list(
            pool.map(lambda r: tag_recipe(r, backend, prompts, config), translated)
        )
        split_jobs = [
            (idx, line) for idx, r in enumerate(translated) for line in r.ingredient_lines
        ]
        splits = list(
            pool.map(
                lambda job: split_ingredient_line(job[1], backend, prompts, config),
                split_jobs,
            )
        )
        per_recipe_splits: dict[int, list[SplitIngredient]] = {
            i: [] for i in range(len(translated))
        }
        for (idx, _), split in zip(split_jobs, splits):
            per_recipe_splits[idx].append(split)

        names: list[str] = _dedup_preserve(
            split.name for split in splits if split.name
        )
        allergen_results = list(
            pool.map(lambda n: map_allergens(n, backend, prompts, config), names)
        )
        sfp_results = list(
            pool.map(lambda n: map_sfp(n, backend, prompts, config), names)
        )
        diet_results = list(
            pool.map(lambda n: map_diets(n, backend, prompts, config), names)
        )

    labels = {
        name: IngredientLabels(allergens=allergens, sfp=sfp, diets=diets)
        for name, allergens, sfp, diets in zip(
            names, allergen_results, sfp_results, diet_results
        )
    }

    canonical: list[CanonicalRecipe] = []
    for idx, (recipe, recipe_tags) in enumerate(zip(translated, tags)):
        ingredients = per_recipe_splits[idx]
        food_names = [s.name for s in ingredients if s.name]
        if not food_names:
            warnings.append(f"recipe {recipe.id}: no food ingredients after splitting")
        flags = propagate_recipe_diets(
            [labels[name].diets for name in food_names]
        )
        utensils = _dedup_preserve(
            list(recipe.utensils)
            + [u for split in ingredients for u in split.utensils]
        )
        canonical.append(
            CanonicalRecipe(
                id=recipe.id or f"r{idx + 1:03d}",
                name=recipe.name,
                description=recipe.description,
                keywords=list(recipe.keywords),
                nutrition=dict(recipe.nutrition),
                instructions=list(recipe.instructions),
                ingredients=ingredients,
                utensils=utensils,
                tags=recipe_tags,
                diet_flags=flags,
                cuisine_hint=recipe.cuisine,
                season_hint=recipe.season,
            )
        )
    return EnrichedCorpus(
        recipes=canonical, ingredient_labels=labels, warnings=warnings
    )
