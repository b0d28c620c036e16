"""Question answering over the graph: fact retrieval plus answer synthesis.

Every edge of the graph is serialized to a deterministic fact string and
embedded; a question is answered by scoring all facts against the question
embedding with a similarity cutoff (default 0.5), force-including facts
incident to keyword-seeded nodes, keeping the top 10 by score, and asking
the chat backend to synthesize an answer grounded only in those facts.
Seeded facts bypass the cutoff but still compete in the ranking.

When nothing survives retrieval the pipeline answers with a fixed honest
fallback instead of letting the model free-generate; these zero-retrieval
events are logged and flagged in evaluation reports.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict

from .backends import BackendError, ChatBackend, EmbeddingBackend, GenerationConfig
from .enrich import PromptPack, SchemaViolation, complete_structured
from .graph import FoodGraph
from .metrics import MetricError, contains_expected
from .ontology import EdgeKind, NodeKind

logger = logging.getLogger(__name__)

INDEX_SCHEMA = "foodkg.fact_index"
INDEX_VERSION = 1

DEFAULT_CUTOFF = 0.5
DEFAULT_TOP_K = 10

FALLBACK_ANSWER = (
    "No knowledge could be retrieved from the graph for this question, "
    "so I cannot give a grounded answer."
)

# Crude chars-per-token estimate used to keep prompts inside the context
# window without depending on any specific tokenizer.
_CHARS_PER_TOKEN = 4
_PROMPT_RESERVE_TOKENS = 1024


class GraphRagError(Exception):
    pass


class StaleIndexError(GraphRagError):
    """The fact index was built with a different embedding model."""


@dataclass
class FactEmbedding:
    edge_id: str
    fact: str
    vector: list[float]


@dataclass
class FactIndex:
    """Embedded fact per edge, in edge insertion order."""

    model_tag: str
    dim: int
    facts: list[FactEmbedding]
    _matrix: np.ndarray | None = field(default=None, init=False, repr=False)

    def __len__(self) -> int:
        return len(self.facts)

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.asarray(
                [f.vector for f in self.facts], dtype=np.float64
            ).reshape(len(self.facts), self.dim)
        return self._matrix

    def ensure_model(self, model_tag: str) -> None:
        if model_tag != self.model_tag:
            raise StaleIndexError(
                f"fact index was built with {self.model_tag!r}, "
                f"got embedder {model_tag!r}; rebuild the index"
            )


def build_fact_index(graph: FoodGraph, embedder: EmbeddingBackend) -> FactIndex:
    """Embed one fact per edge. An embedder failure propagates before any
    index object exists, so a partial index can never be observed."""
    edges = graph.edges()
    if not edges:
        raise GraphRagError("cannot index an empty graph")
    facts = [graph.serialize_fact(edge.id) for edge in edges]
    vectors = embedder.embed(facts)
    dim = len(vectors[0])
    return FactIndex(
        model_tag=embedder.model,
        dim=dim,
        facts=[
            FactEmbedding(edge_id=edge.id, fact=fact, vector=list(vector))
            for edge, fact, vector in zip(edges, facts, vectors)
        ],
    )


def save_fact_index(index: FactIndex, path: str | Path) -> None:
    lines = [
        json.dumps(
            {
                "schema": INDEX_SCHEMA,
                "version": INDEX_VERSION,
                "model_tag": index.model_tag,
                "dim": index.dim,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
    ]
    for fact in index.facts:
        lines.append(
            json.dumps(
                {"edge_id": fact.edge_id, "fact": fact.fact, "vector": fact.vector},
                ensure_ascii=False,
                sort_keys=True,
                separators=(",", ":"),
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_fact_index(
    path: str | Path, expected_model_tag: str | None = None
) -> FactIndex:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise GraphRagError(f"cannot read fact index: {exc}") from exc
    if not lines:
        raise GraphRagError("fact index file is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise GraphRagError(f"fact index header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict) or header.get("schema") != INDEX_SCHEMA:
        raise GraphRagError("not a fact index file")
    if header.get("version") != INDEX_VERSION:
        raise GraphRagError(
            f"fact index version {header.get('version')!r} is not supported"
        )
    index = FactIndex(model_tag=header["model_tag"], dim=header["dim"], facts=[])
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            index.facts.append(
                FactEmbedding(
                    edge_id=record["edge_id"],
                    fact=record["fact"],
                    vector=[float(x) for x in record["vector"]],
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise GraphRagError(f"fact index line {lineno} malformed: {exc}") from exc
    if expected_model_tag is not None:
        index.ensure_model(expected_model_tag)
    return index


# -- query planning and node seeding --


class PlanOut(BaseModel):
    model_config = ConfigDict(extra="ignore")
    concepts: list[str] = []
    keywords: list[str] = []
    synonyms: list[str] = []


@dataclass
class QueryPlan:
    concepts: list[str] = field(default_factory=list)
    keywords: list[str] = field(default_factory=list)
    synonyms: list[str] = field(default_factory=list)

    def terms(self) -> list[str]:
        return self.concepts + self.keywords + self.synonyms

    @property
    def is_empty(self) -> bool:
        return not (self.concepts or self.keywords or self.synonyms)


def _dedup_lower(items: Sequence[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for item in items:
        lowered = item.strip().lower()
        if lowered and lowered not in seen:
            seen.add(lowered)
            out.append(lowered)
    return out


def extract_query_plan(
    question: str,
    backend: ChatBackend,
    prompts: PromptPack,
    config: GenerationConfig,
) -> QueryPlan:
    """LLM concept/keyword/synonym extraction; degrades to an empty plan on
    backend failure so retrieval can continue embedding-only."""
    if not question or not question.strip():
        raise GraphRagError("question must be non-empty")
    try:
        out = complete_structured(
            backend,
            prompts.system_prompt("query_plan"),
            question.strip(),
            PlanOut,
            config,
        )
    except (BackendError, SchemaViolation) as exc:
        logger.warning("query-plan extraction failed (%s); using empty plan", exc)
        return QueryPlan()
    concepts = _dedup_lower(out.concepts)
    keywords = [k for k in _dedup_lower(out.keywords) if k not in set(concepts)]
    seen = set(concepts) | set(keywords)
    synonyms = [s for s in _dedup_lower(out.synonyms) if s not in seen]
    return QueryPlan(concepts=concepts, keywords=keywords, synonyms=synonyms)


def seed_node_search(plan: QueryPlan, graph: FoodGraph) -> set[str]:
    """Node ids whose name contains any plan term (case-insensitive
    substring, so "milk" also hits "buttermilk")."""
    terms = _dedup_lower(plan.terms())
    if not terms:
        return set()
    seeds: set[str] = set()
    for node in graph.nodes():
        lowered = node.name.lower()
        if any(term in lowered for term in terms):
            seeds.add(node.id)
    return seeds


def seeded_edge_ids(graph: FoodGraph, seed_nodes: set[str]) -> set[str]:
    """All edges incident to any seed node."""
    edge_ids: set[str] = set()
    for node_id in seed_nodes:
        for edge, _ in graph.neighbors(node_id, direction="both"):
            edge_ids.add(edge.id)
    return edge_ids


# -- retrieval --


@dataclass
class RetrievedFact:
    edge_id: str
    fact: str
    score: float
    seeded: bool


@dataclass
class RetrievedContext:
    """Top retrieved facts, scores non-increasing; may be empty."""

    items: list[RetrievedFact]

    @property
    def is_empty(self) -> bool:
        return not self.items


def retrieve(
    question: str,
    index: FactIndex,
    embedder: EmbeddingBackend,
    seed_edge_ids: set[str] | frozenset[str] = frozenset(),
    cutoff: float = DEFAULT_CUTOFF,
    k: int = DEFAULT_TOP_K,
) -> RetrievedContext:
    """Score all facts against the question embedding and keep the top k.

    Facts below the cutoff are dropped unless they are seeded; seeded facts
    bypass the cutoff but still rank by score. Ties break by index position,
    so the ranking is a total, stable order.
    """
    index.ensure_model(embedder.model)
    if len(index) == 0:
        return RetrievedContext(items=[])
    query = np.asarray(embedder.embed([question])[0], dtype=np.float64)
    qnorm = float(np.linalg.norm(query))
    if qnorm == 0:
        raise GraphRagError("question embedding is the zero vector")
    norms = np.linalg.norm(index.matrix, axis=1)
    scores = (index.matrix @ query) / (norms * qnorm)

    candidates = [
        (float(scores[i]), i)
        for i in range(len(index))
        if scores[i] >= cutoff or index.facts[i].edge_id in seed_edge_ids
    ]
    candidates.sort(key=lambda item: (-item[0], item[1]))
    top = candidates[:k]
    items = [
        RetrievedFact(
            edge_id=index.facts[i].edge_id,
            fact=index.facts[i].fact,
            score=score,
            seeded=index.facts[i].edge_id in seed_edge_ids,
        )
        for score, i in top
    ]
    if not items:
        logger.warning("zero-retrieval event for question: %s", question)
    return RetrievedContext(items=items)


# -- synthesis --


@dataclass
class Answer:
    text: str
    cited_facts: list[RetrievedFact]
    zero_retrieval: bool


def synthesis_user_prompt(question: str, facts: Sequence[str]) -> str:
    lines = [f"Question: {question}", "", "Facts:"]
    lines.extend(f"{i}. {fact}" for i, fact in enumerate(facts, 1))
    return "\n".join(lines)


def _truncate_to_window(
    question: str, context: RetrievedContext, config: GenerationConfig
) -> list[RetrievedFact]:
    """Drop the lowest-scored facts until the prompt fits the context window."""
    budget_chars = (config.context_window - _PROMPT_RESERVE_TOKENS) * _CHARS_PER_TOKEN
    kept = list(context.items)
    while len(kept) > 1:
        prompt = synthesis_user_prompt(question, [f.fact for f in kept])
        if len(prompt) <= budget_chars:
            break
        kept.pop()  # items are score-ordered; the last is the lowest
    return kept


def synthesize_answer(
    question: str,
    context: RetrievedContext,
    backend: ChatBackend,
    prompts: PromptPack,
    config: GenerationConfig,
) -> Answer:
    """Answer from the retrieved facts only; an empty context yields the
    fixed fallback text with no citations and no model call."""
    if context.is_empty:
        return Answer(text=FALLBACK_ANSWER, cited_facts=[], zero_retrieval=True)
    kept = _truncate_to_window(question, context, config)
    user = synthesis_user_prompt(question, [f.fact for f in kept])
    text = backend.complete(prompts.system_prompt("synthesis"), user, config)
    return Answer(text=text.strip(), cited_facts=kept, zero_retrieval=False)


# -- the composed pipeline --


@dataclass
class AskResult:
    question: str
    answer: str
    facts: list[RetrievedFact]
    zero_retrieval: bool
    plan: QueryPlan


class QaPipeline:
    """extract plan -> seed nodes -> retrieve -> synthesize, per question."""

    def __init__(
        self,
        graph: FoodGraph,
        index: FactIndex,
        chat: ChatBackend,
        embedder: EmbeddingBackend,
        prompts: PromptPack,
        config: GenerationConfig,
        cutoff: float = DEFAULT_CUTOFF,
        k: int = DEFAULT_TOP_K,
    ) -> None:
        index.ensure_model(embedder.model)
        self.graph = graph
        self.index = index
        self.chat = chat
        self.embedder = embedder
        self.prompts = prompts
        self.config = config
        self.cutoff = cutoff
        self.k = k

    def ask(self, question: str) -> AskResult:
        plan = extract_query_plan(question, self.chat, self.prompts, self.config)
        seeds = seed_node_search(plan, self.graph)
        seed_edges = seeded_edge_ids(self.graph, seeds)
        context = retrieve(
            question,
            self.index,
            self.embedder,
            seed_edge_ids=seed_edges,
            cutoff=self.cutoff,
            k=self.k,
        )
        answer = synthesize_answer(
            question, context, self.chat, self.prompts, self.config
        )
        return AskResult(
            question=question,
            answer=answer.text,
            facts=answer.cited_facts,
            zero_retrieval=answer.zero_retrieval,
            plan=plan,
        )


# -- QA sets and evaluation --


@dataclass
class QAItem:
    question: str
    expected: str

    def __post_init__(self) -> None:
        if not self.question.strip() or not self.expected.strip():
            raise GraphRagError("QA items need a non-empty question and expected text")


def load_qa_set(path: str | Path) -> list[QAItem]:
    items: list[QAItem] = []
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            items.append(QAItem(question=record["question"], expected=record["expected"]))
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise GraphRagError(f"QA set line {lineno} malformed: {exc}") from exc
    return items


def save_qa_set(items: Sequence[QAItem], path: str | Path) -> None:
    lines = [
        json.dumps(
            {"question": item.question, "expected": item.expected},
            ensure_ascii=False,
            sort_keys=True,
        )
        for item in items
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def generate_qa(graph: FoodGraph, limit: int = 50) -> list[QAItem]:
    """Derive simple QA items from graph facts (a starter set, not a
    benchmark): ingredient containment, season suitability and cuisine
    membership questions whose expected text is one entity name."""
    items: list[QAItem] = []
    for edge in graph.edges():
        if len(items) >= limit:
            break
        src = graph.node(edge.src)
        dst = graph.node(edge.dst)
        if edge.kind == EdgeKind.CONTAINS:
            items.append(
                QAItem(
                    question=f"Which ingredients does the recipe '{src.name}' contain?",
                    expected=dst.name,
                )
            )
        elif edge.kind == EdgeKind.IS_FOR_SEASON:
            items.append(
                QAItem(
                    question=f"For which season is the recipe '{src.name}' suitable?",
                    expected=dst.name,
                )
            )
        elif edge.kind == EdgeKind.IS_PART_OF:
            items.append(
                QAItem(
                    question=f"To which cuisine does the recipe '{src.name}' belong?",
                    expected=dst.name,
                )
            )
        elif edge.kind == EdgeKind.IS_SUITABLE_FOR:
            items.append(
                QAItem(
                    question=f"Which dietary restrictions is '{src.name}' suitable for?",
                    expected=dst.name,
                )
            )
        elif edge.kind == EdgeKind.ALLERGEN_OF and dst.kind == NodeKind.ALLERGEN_CATEGORY:
            items.append(
                QAItem(
                    question=f"Which allergen category does '{src.name}' belong to?",
                    expected=dst.name,
                )
            )
    return items


@dataclass
class EvalRow:
    qid: str
    question: str
    answer_hash: str
    hit: bool
    zero_retrieval: bool
    fact_count: int


@dataclass
class EvalReport:
    rows: list[EvalRow]

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def accuracy(self) -> float:
        if not self.rows:
            raise MetricError("evaluation needs at least one QA item")
        return sum(row.hit for row in self.rows) / len(self.rows)

    @property
    def zero_retrieval_count(self) -> int:
        return sum(row.zero_retrieval for row in self.rows)


def evaluate(items: Sequence[QAItem], pipeline: QaPipeline) -> EvalReport:
    """Run the full pipeline per question and score containment accuracy."""
    rows: list[EvalRow] = []
    for i, item in enumerate(items, start=1):
        result = pipeline.ask(item.question)
        rows.append(
            EvalRow(
                qid=f"q{i:03d}",
                question=item.question,
                answer_hash=hashlib.sha256(result.answer.encode("utf-8")).hexdigest(),
                hit=contains_expected(result.answer, item.expected),
                zero_retrieval=result.zero_retrieval,
                fact_count=len(result.facts),
            )
        )
    return EvalReport(rows=rows)
