"""Loaders for the raw inputs: recipe corpus, nutrient tables, GI table,
substitution list.

Parsing is total: a record either becomes a typed entry, lands in the
rejection/skip report with a reason, or the file itself fails with a declared
structural error (unreadable, missing required columns). Nothing else escapes.

Input formats are documented in the README: recipes are a UTF-8 JSON array,
the three tables are UTF-8 delimited text with a header row (semicolon or
comma, auto-detected, decimal point only).
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

LANGUAGES = ("en", "fr", "de", "it")

REASON_INVALID_INGREDIENTS = "invalid ingredients"
REASON_MISSING_INSTRUCTIONS = "missing instructions"
REASON_MALFORMED = "malformed"


class IngestError(Exception):
    pass


@dataclass
class RawRecipe:
    name: str
    language: str
    ingredient_lines: list[str]
    instructions: list[str]
    id: str | None = None
    description: str = ""
    keywords: list[str] = field(default_factory=list)
    utensils: list[str] = field(default_factory=list)
    nutrition: dict[str, float] = field(default_factory=dict)
    cuisine: str | None = None
    season: str | None = None


@dataclass
class RejectedRecord:
    index: int
    name: str | None
    reason: str
    detail: str = ""


@dataclass
class IngestReport:
    parsed: list[RawRecipe]
    rejected: list[RejectedRecord]

    @property
    def total(self) -> int:
        return len(self.parsed) + len(self.rejected)


class _Reject(Exception):
    def __init__(self, reason: str, detail: str = "") -> None:
        super().__init__(detail or reason)
        self.reason = reason
        self.detail = detail


_JUNK_LINE = re.compile(r"^[\W\d_]*$")


def _is_junk_line(line: str) -> bool:
    return bool(_JUNK_LINE.match(line.strip()))


def _string_list(value: object, what: str) -> list[str]:
    if not isinstance(value, list) or any(not isinstance(x, str) for x in value):
        raise _Reject(REASON_MALFORMED, f"{what} must be a list of strings")
    return [x.strip() for x in value if x.strip()]


def _coerce_record(obj: object) -> RawRecipe:
    if not isinstance(obj, dict):
        raise _Reject(REASON_MALFORMED, "record is not an object")
    name = obj.get("name")
    if not isinstance(name, str) or not name.strip():
        raise _Reject(REASON_MALFORMED, "missing or empty name")
    language = obj.get("language")
    if language not in LANGUAGES:
        raise _Reject(REASON_MALFORMED, f"language must be one of {LANGUAGES}")

    lines = _string_list(obj.get("ingredient_lines", []), "ingredient_lines")
    if not lines:
        raise _Reject(REASON_INVALID_INGREDIENTS, "no ingredient lines")
    junk = [line for line in lines if _is_junk_line(line)]
    if junk:
        raise _Reject(
            REASON_INVALID_INGREDIENTS, f"lines without letters: {junk[:3]}"
        )

    instructions = _string_list(obj.get("instructions", []), "instructions")
    if not instructions:
        raise _Reject(REASON_MISSING_INSTRUCTIONS, "no instructions")

    nutrition_raw = obj.get("nutrition", {})
    if not isinstance(nutrition_raw, dict):
        raise _Reject(REASON_MALFORMED, "nutrition must be an object")
    nutrition: dict[str, float] = {}
    for key, value in nutrition_raw.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise _Reject(REASON_MALFORMED, f"nutrition value {key!r} is not numeric")
        nutrition[str(key)] = float(value)

    rec_id = obj.get("id")
    if rec_id is not None and not isinstance(rec_id, str):
        rec_id = str(rec_id)
    description = obj.get("description", "")
    if not isinstance(description, str):
        raise _Reject(REASON_MALFORMED, "description must be a string")
    cuisine = obj.get("cuisine")
    if cuisine is not None and not isinstance(cuisine, str):
        raise _Reject(REASON_MALFORMED, "cuisine must be a string")
    season = obj.get("season")
    if season is not None and not isinstance(season, str):
        raise _Reject(REASON_MALFORMED, "season must be a string")

    return RawRecipe(
        name=name.strip(),
        language=language,
        ingredient_lines=lines,
        instructions=instructions,
        id=rec_id,
        description=description.strip(),
        keywords=_string_list(obj.get("keywords", []), "keywords"),
        utensils=_string_list(obj.get("utensils", []), "utensils"),
        nutrition=nutrition,
        cuisine=cuisine,
        season=season,
    )


def parse_recipe_corpus(path: str | Path) -> IngestReport:
    """Parse a recipe JSON file; every record is either kept or rejected with
    a reason, so len(parsed) + len(rejected) equals the record count."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read recipe corpus: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise IngestError(f"recipe corpus is not valid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise IngestError("recipe corpus must be a JSON array")

    report = IngestReport(parsed=[], rejected=[])
    for index, obj in enumerate(data):
        try:
            report.parsed.append(_coerce_record(obj))
        except _Reject as rej:
            name = obj.get("name") if isinstance(obj, dict) else None
            report.rejected.append(
                RejectedRecord(
                    index=index,
                    name=name if isinstance(name, str) else None,
                    reason=rej.reason,
                    detail=rej.detail,
                )
            )
    return report


def _norm(text: str) -> str:
    return " ".join(text.split()).lower()


def _dedupe_key(recipe: RawRecipe) -> tuple:
    return (
        _norm(recipe.name),
        tuple(_norm(line) for line in recipe.ingredient_lines),
        tuple(_norm(step) for step in recipe.instructions),
    )


def dedupe(recipes: Iterable[RawRecipe]) -> list[RawRecipe]:
    """Drop exact duplicates (same name, ingredient lines, and instructions
    after whitespace/case normalization), keeping the first occurrence."""
    seen: set[tuple] = set()
    out: list[RawRecipe] = []
    for recipe in recipes:
        key = _dedupe_key(recipe)
        if key in seen:
            continue
        seen.add(key)
        out.append(recipe)
    return out


def assign_ids(recipes: Iterable[RawRecipe]) -> list[RawRecipe]:
    """Give every recipe a unique stable id, keeping provided ids when free."""
    used: set[str] = set()
    out: list[RawRecipe] = []
    for i, recipe in enumerate(recipes, start=1):
        rec_id = recipe.id
        if not rec_id or rec_id in used:
            rec_id = f"r{i:03d}"
        suffix = 2
        base = rec_id
        while rec_id in used:
            rec_id = f"{base}-{suffix}"
            suffix += 1
        used.add(rec_id)
        recipe.id = rec_id
        out.append(recipe)
    return out


# -- delimited tables --


@dataclass
class NutrientEntry:
    source: str  # swiss | usda
    name: str
    nutrients: dict[str, float]


@dataclass
class GIEntry:
    name: str
    gi: float


@dataclass
class SubstituteComponent:
    name: str
    quantity: float | None = None
    unit: str | None = None


@dataclass
class Substitute:
    """One substitution option: a single food or a composite of several."""

    components: list[SubstituteComponent]
    ratio: float | None = None
    notes: str | None = None

    @property
    def is_composite(self) -> bool:
        return len(self.components) > 1


@dataclass
class SubstitutionEntry:
    target: str
    substitutes: list[Substitute]


@dataclass
class SkippedRow:
    line: int
    reason: str


@dataclass
class TableLoadResult:
    entries: list
    skipped: list[SkippedRow]


def _read_rows(path: str | Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """Header and (line number, cells) rows with the delimiter auto-detected."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"cannot read table: {exc}") from exc
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise IngestError("table file is empty")
    delimiter = ";" if lines[0].count(";") >= lines[0].count(",") else ","
    parsed = list(csv.reader(lines, delimiter=delimiter))
    header = [cell.strip().lower() for cell in parsed[0]]
    rows = [
        (i + 2, [cell.strip() for cell in cells])
        for i, cells in enumerate(parsed[1:])
    ]
    return header, rows


def load_nutrient_db(path: str | Path, source: str) -> TableLoadResult:
    """Load a nutrient table: a ``name`` column plus numeric per-100g columns."""
    if source not in ("swiss", "usda"):
        raise IngestError(f"source must be swiss or usda, got {source!r}")
    header, rows = _read_rows(path)
    if "name" not in header:
        raise IngestError("nutrient table is missing the 'name' column")
    name_col = header.index("name")
    nutrient_cols = [(i, col) for i, col in enumerate(header) if i != name_col]
    if not nutrient_cols:
        raise IngestError("nutrient table has no nutrient columns")

    result = TableLoadResult(entries=[], skipped=[])
    for line, cells in rows:
        if len(cells) != len(header):
            result.skipped.append(SkippedRow(line, "wrong column count"))
            continue
        name = cells[name_col]
        if not name:
            result.skipped.append(SkippedRow(line, "empty name"))
            continue
        nutrients: dict[str, float] = {}
        bad: str | None = None
        for i, col in nutrient_cols:
            raw = cells[i]
            if raw == "":
                continue
            try:
                value = float(raw)
            except ValueError:
                bad = f"unparseable {col}={raw!r}"
                break
            if value < 0:
                bad = f"negative {col}={raw!r}"
                break
            nutrients[col] = value
        if bad:
            result.skipped.append(SkippedRow(line, bad))
            continue
        result.entries.append(NutrientEntry(source=source, name=name, nutrients=nutrients))
    return result


def load_gi_table(path: str | Path) -> TableLoadResult:
    """Load the glycemic index table: columns ``name`` and ``gi``."""
    header, rows = _read_rows(path)
    for col in ("name", "gi"):
        if col not in header:
            raise IngestError(f"GI table is missing the {col!r} column")
    name_col = header.index("name")
    gi_col = header.index("gi")

    result = TableLoadResult(entries=[], skipped=[])
    for line, cells in rows:
        if len(cells) != len(header):
            result.skipped.append(SkippedRow(line, "wrong column count"))
            continue
        name = cells[name_col]
        if not name:
            result.skipped.append(SkippedRow(line, "empty name"))
            continue
        try:
            gi = float(cells[gi_col])
        except ValueError:
            result.skipped.append(SkippedRow(line, f"unparseable gi={cells[gi_col]!r}"))
            continue
        if not 0 <= gi <= 150:
            result.skipped.append(SkippedRow(line, f"gi out of range: {gi}"))
            continue
        result.entries.append(GIEntry(name=name, gi=gi))
    return result


_COMPONENT = re.compile(
    r"^\s*(?P<qty>\d+(?:\.\d+)?(?:\s*/\s*\d+)?)?\s*(?P<rest>.*?)\s*$"
)
_UNIT_ALIASES = {
    "cup": "cup", "cups": "cup",
    "tbsp": "tbsp", "tablespoon": "tbsp", "tablespoons": "tbsp",
    "tsp": "tsp", "teaspoon": "tsp", "teaspoons": "tsp",
    "g": "g", "gram": "g", "grams": "g",
    "kg": "kg", "ml": "ml",
    "l": "l", "liter": "l", "liters": "l", "litre": "l", "litres": "l",
    "oz": "oz", "ounce": "oz", "ounces": "oz",
    "lb": "lb", "pound": "lb", "pounds": "lb",
    "piece": "piece", "pieces": "piece",
    "slice": "slice", "slices": "slice",
    "pinch": "pinch", "dash": "dash",
    "clove": "clove", "cloves": "clove",
}


def _parse_quantity(raw: str) -> float:
    if "/" in raw:
        num, den = raw.split("/", 1)
        return float(num) / float(den)
    return float(raw)


def parse_substitute_component(text: str) -> SubstituteComponent:
    """Parse e.g. ``1 cup milk`` into (name, quantity, unit); both optional."""
    match = _COMPONENT.match(text)
    assert match is not None  # pattern matches any string
    qty_raw = match.group("qty")
    rest = match.group("rest")
    quantity = _parse_quantity(qty_raw.replace(" ", "")) if qty_raw else None
    unit: str | None = None
    words = rest.split()
    if words and words[0].lower() in _UNIT_ALIASES:
        unit = _UNIT_ALIASES[words[0].lower()]
        words = words[1:]
    name = " ".join(words).strip()
    return SubstituteComponent(name=name, quantity=quantity, unit=unit)


def load_substitutions(path: str | Path) -> TableLoadResult:
    """Load the substitution table: ``target``, ``substitute`` and optional
    ``ratio``/``notes`` columns. A substitute cell may be a composite of
    several components joined with `` + ``. Rows sharing a target merge into
    one entry."""
    header, rows = _read_rows(path)
    for col in ("target", "substitute"):
        if col not in header:
            raise IngestError(f"substitution table is missing the {col!r} column")
    target_col = header.index("target")
    sub_col = header.index("substitute")
    ratio_col = header.index("ratio") if "ratio" in header else None
    notes_col = header.index("notes") if "notes" in header else None

    entries: dict[str, SubstitutionEntry] = {}
    result = TableLoadResult(entries=[], skipped=[])
    for line, cells in rows:
        if len(cells) != len(header):
            result.skipped.append(SkippedRow(line, "wrong column count"))
            continue
        target = cells[target_col]
        sub_text = cells[sub_col]
        if not target or not sub_text:
            result.skipped.append(SkippedRow(line, "empty target or substitute"))
            continue
        ratio: float | None = None
        if ratio_col is not None and cells[ratio_col]:
            try:
                ratio = float(cells[ratio_col])
            except ValueError:
                result.skipped.append(
                    SkippedRow(line, f"unparseable ratio={cells[ratio_col]!r}")
                )
                continue
        notes = cells[notes_col] if notes_col is not None and cells[notes_col] else None
        components = [
            parse_substitute_component(part)
            for part in sub_text.split(" + ")
        ]
        components = [c for c in components if c.name]
        if not components:
            result.skipped.append(SkippedRow(line, "substitute has no food name"))
            continue
        substitute = Substitute(components=components, ratio=ratio, notes=notes)
        entry = entries.get(_norm(target))
        if entry is None:
            entry = SubstitutionEntry(target=target, substitutes=[])
            entries[_norm(target)] = entry
            result.entries.append(entry)
        entry.substitutes.append(substitute)
    return result
