"""Evaluation metrics for the enrichment and QA benchmark tasks.

All functions here are pure and side-effect free. The string similarity is
the gestalt pattern-matching score 2M/(|a|+|b|) where M counts characters
matched by recursively peeling off longest common substrings; ties between
equal-length common substrings are broken leftmost-in-a, then leftmost-in-b,
and the score is symmetrized by taking max(M(a,b), M(b,a)) because the
recursive decomposition is order-sensitive in rare tie cases.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from statistics import fmean
from typing import Iterable, Protocol, Sequence

from .ontology import restriction_ids


class MetricError(Exception):
    pass


# -- gestalt string similarity --


def _longest_common_block(a: str, b: str) -> tuple[int, int, int]:
    """Longest common substring of a and b as (start_a, start_b, length).

    Among equal-length candidates the one starting earliest in ``a`` wins,
    then earliest in ``b``. Returns length 0 when there is no common char.
    """
    best = (0, 0, 0)
    if not a or not b:
        return best
    # prev[j+1] = length of common suffix of a[:i] and b[:j+1]. Scanning i then
    # j ascending means the first maximal block found is already the
    # leftmost-in-a, leftmost-in-b one, so a strict > keeps the right block.
    prev = [0] * (len(b) + 1)
    for i, ca in enumerate(a):
        cur = [0] * (len(b) + 1)
        for j, cb in enumerate(b):
            if ca == cb:
                size = prev[j] + 1
                cur[j + 1] = size
                if size > best[2]:
                    best = (i - size + 1, j - size + 1, size)
        prev = cur
    return best


def _matching_chars(a: str, b: str) -> int:
    """Total characters matched by recursive longest-common-substring peeling."""
    if not a or not b:
        return 0
    i, j, size = _longest_common_block(a, b)
    if size == 0:
        return 0
    return (
        size
        + _matching_chars(a[:i], b[:j])
        + _matching_chars(a[i + size :], b[j + size :])
    )


def gestalt_similarity(a: str, b: str) -> float:
    """Gestalt pattern-matching similarity in [0, 1]; two empty strings score 1."""
    total = len(a) + len(b)
    if total == 0:
        return 1.0
    matched = max(_matching_chars(a, b), _matching_chars(b, a))
    return 2.0 * matched / total


# -- set-based and binary F1 --


def set_f1(s_true: Iterable[str], s_pred: Iterable[str]) -> float:
    """Set-overlap F1: 1 when both sets are empty, 0 when they are disjoint."""
    true_set = set(s_true)
    pred_set = set(s_pred)
    if not true_set and not pred_set:
        return 1.0
    overlap = len(true_set & pred_set)
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_set)
    recall = overlap / len(true_set)
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class BinaryConfusion:
    tp: int
    fp: int
    fn: int
    tn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise MetricError("confusion counts must be non-negative")

    @property
    def is_degenerate(self) -> bool:
        """True when precision and recall are both undefined (tp=fp=fn=0)."""
        return self.tp == 0 and self.fp == 0 and self.fn == 0


def binary_f1(c: BinaryConfusion) -> float:
    """Standard F1 from a confusion; 0 by convention when P + R = 0."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def mean_label_f1(
    confusions: dict[str, BinaryConfusion],
    labels: Sequence[str] | None = None,
) -> float:
    """Unweighted mean of per-label binary F1 over the 18 restriction labels.

    ``labels`` defaults to the bundled restriction list; every label must be
    present in ``confusions``.
    """
    if labels is None:
        labels = restriction_ids()
    missing = [label for label in labels if label not in confusions]
    if missing:
        raise MetricError(f"missing confusions for labels: {missing}")
    return fmean(binary_f1(confusions[label]) for label in labels)


# -- retrieval and containment accuracy --


def retrieval_accuracy(
    predictions: Sequence[tuple[str | Iterable[str], str]],
) -> float:
    """Fraction of queries whose prediction equals the truth.

    A prediction may be a set of tied candidates; it counts as correct when
    the truth is among them.
    """
    if not predictions:
        raise MetricError("retrieval_accuracy needs at least one prediction")
    hits = 0
    for predicted, truth in predictions:
        if isinstance(predicted, str):
            hits += predicted == truth
        else:
            hits += truth in set(predicted)
    return hits / len(predictions)


def normalize_text(text: str) -> str:
    """NFC-normalize, casefold, and collapse whitespace."""
    return " ".join(unicodedata.normalize("NFC", text).casefold().split())


def contains_expected(response: str, expected: str) -> bool:
    return normalize_text(expected) in normalize_text(response)


def containment_accuracy(pairs: Sequence[tuple[str, str]]) -> float:
    """Fraction of (response, expected) pairs where the expected text appears
    inside the response after normalization."""
    if not pairs:
        raise MetricError("containment_accuracy needs at least one pair")
    hits = sum(contains_expected(response, expected) for response, expected in pairs)
    return hits / len(pairs)


# -- per-task score reports --


@dataclass
class MetricItem:
    id: str
    score: float
    flags: tuple[str, ...] = ()


@dataclass
class MetricReport:
    """Per-item scores for one task plus their mean."""

    task: str
    items: list[MetricItem] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.items)

    @property
    def aggregate(self) -> float:
        if not self.items:
            return 0.0
        return fmean(item.score for item in self.items)


class ExternalScorer(Protocol):
    """Pluggable translation-quality scorer.

    Implementations wrap an external model (e.g. a learned metric served over
    HTTP or invoked as a subprocess) and return one real-valued score for a
    (source, translation, reference) triple. No scorer is bundled; adapters
    only need to satisfy this call signature.
    """

    def score(self, source: str, translation: str, reference: str) -> float: ...


def score_translations(
    triples: Sequence[tuple[str, str, str, str]],
    scorer: ExternalScorer,
    task: str = "translation",
) -> MetricReport:
    """Score (id, source, translation, reference) rows with an external scorer."""
    report = MetricReport(task=task)
    for item_id, source, translation, reference in triples:
        report.items.append(
            MetricItem(id=item_id, score=scorer.score(source, translation, reference))
        )
    return report
