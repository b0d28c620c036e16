"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (visible with ``pytest -s`` or on failure)."""

import json
import logging
import math
import random
import shutil
import time

import numpy as np
import pytest

from foodkg.backends import MockChatBackend, MockEmbedder, prompt_key
from foodkg.graph import FoodGraph, OntologyViolationError
from foodkg.graphrag import (
    FALLBACK_ANSWER,
    FactEmbedding,
    FactIndex,
    QAItem,
    QaPipeline,
    evaluate,
    load_fact_index,
    load_qa_set,
    retrieve,
)
from foodkg.ingest import NutrientEntry
from foodkg.match import NutrientTable, resolve_nutrients
from foodkg.metrics import BinaryConfusion, binary_f1, gestalt_similarity, set_f1
from foodkg.ontology import EdgeKind, NodeKind, restriction_ids
from foodkg.pipeline import load_config, run_pipeline
from foodkg.report import write_eval_report
from foodkg.enrich import propagate_recipe_diets

import mockdata
from oracles import brute_gestalt, brute_rank, fsum_cosine, pairs_with_total_length
from test_graph import ORACLE_ALLOWED


def report(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS")


class TestMetricOracles:
    def test_metric_oracle_suite(self):
        """gestalt matches the brute-force oracle exhaustively; set and binary
        F1 match hand-derived values; all inside the 10 s budget."""
        start = time.monotonic()

        for a, b in pairs_with_total_length("abc", 8):
            assert gestalt_similarity(a, b) == brute_gestalt(a, b), (a, b)

        # set-based F1, hand-derived
        assert set_f1(set(), set()) == 1.0
        assert set_f1({"1"}, {"2"}) == 0.0
        assert set_f1({"1", "7"}, {"7"}) == 2 / 3

        # binary F1, hand-derived
        assert binary_f1(BinaryConfusion(tp=5, fp=0, fn=0)) == 1.0
        assert binary_f1(BinaryConfusion(tp=1, fp=0, fn=1)) == 2 / 3
        assert binary_f1(BinaryConfusion(tp=0, fp=0, fn=0)) == 0.0

        elapsed = time.monotonic() - start
        assert elapsed < 10.0, f"metric oracle suite took {elapsed:.1f}s"
        report("metric-oracle-suite")

    def test_eq_case_conformance(self):
        """The two special branches of the set-F1 definition hold exactly."""
        assert set_f1(set(), set()) == 1.0
        assert set_f1({"a"}, {"b"}) == 0.0
        assert set_f1({"a", "b"}, {"c", "d"}) == 0.0
        report("eq-case-conformance")


class TestOntologyProperty:
    def test_randomized_edges_match_table_oracle(self):
        graph = FoodGraph()
        node_by_kind = {
            kind: graph.add_node(kind, f"probe {kind.value}") for kind in NodeKind
        }
        rng = random.Random(0xF00D)
        kinds = list(NodeKind)
        edge_kinds = list(EdgeKind)
        false_accepts = false_rejects = 0
        for _ in range(10_000):
            src, dst = rng.choice(kinds), rng.choice(kinds)
            kind = rng.choice(edge_kinds)
            legal = (src.value, kind.value, dst.value) in ORACLE_ALLOWED
            try:
                graph.add_edge(node_by_kind[src], kind, node_by_kind[dst])
                accepted = True
            except OntologyViolationError:
                accepted = False
            false_accepts += accepted and not legal
            false_rejects += legal and not accepted
        assert false_accepts == 0
        assert false_rejects == 0
        report("ontology-property")


class TestSnapshotRoundTrip:
    def test_fixture_graph_roundtrip(self, fixture_env, tmp_path):
        graph = fixture_env.graph
        assert len(graph.nodes_of_kind(NodeKind.RECIPE)) == 20
        path = tmp_path / "roundtrip.jsonl"
        graph.export_snapshot(path)
        restored = FoodGraph.import_snapshot(path)
        assert restored.stats() == graph.stats()
        canonical = lambda props: json.dumps(
            props, sort_keys=True, ensure_ascii=False
        ).encode()
        for node in graph.nodes():
            assert canonical(restored.node(node.id).props) == canonical(node.props)
        for edge in graph.edges():
            assert canonical(restored.edge(edge.id).props) == canonical(edge.props)
        report("snapshot-roundtrip")


class TestRetrievalExactness:
    def test_hundred_randomized_indexes(self):
        rng = np.random.default_rng(0xCAFE)
        embedder = MockEmbedder(dim=12)
        cutoff, k = 0.5, 10
        for trial in range(100):
            n = int(rng.integers(1, 501))
            facts = [f"fact {trial}/{i}" for i in range(n)]
            vectors = embedder.embed(facts)
            index = FactIndex(
                model_tag=embedder.model,
                dim=12,
                facts=[
                    FactEmbedding(edge_id=f"e{i + 1}", fact=facts[i], vector=vectors[i])
                    for i in range(n)
                ],
            )
            n_seeds = int(rng.integers(0, min(6, n + 1)))
            seed_positions = set(
                int(i) for i in rng.choice(n, size=n_seeds, replace=False)
            )
            seeds = {f"e{i + 1}" for i in seed_positions}
            question = f"question {trial}"
            got = retrieve(question, index, embedder, seed_edge_ids=seeds,
                           cutoff=cutoff, k=k)
            qv = embedder.embed([question])[0]
            scores = [fsum_cosine(qv, v) for v in vectors]
            expected = brute_rank(scores, seed_positions, cutoff, k)
            assert [f.edge_id for f in got.items] == [f"e{i + 1}" for i in expected]
            for fact in got.items:  # the cutoff is never violated unseeded
                if not fact.seeded:
                    assert fact.score >= cutoff
        report("retrieval-exactness")


class TestEndToEndDeterminism:
    @pytest.fixture()
    def fresh_copy(self, fixture_env, tmp_path):
        for name in (
            "recipes.json", "nutrients_swiss.csv", "nutrients_usda.csv",
            "gi.csv", "subs.csv", "qa.jsonl", "transcript.json",
            "transcript_perturbed.json",
        ):
            shutil.copy(fixture_env.root / name, tmp_path / name)
        mockdata.write_config(tmp_path)
        mockdata.write_config(
            tmp_path, "transcript_perturbed.json", "config_perturbed.json"
        )
        return tmp_path

    def _evaluate(self, config_path, prompts):
        cfg = load_config(config_path)
        graph = FoodGraph.import_snapshot(cfg.snapshot)
        embedder = MockEmbedder(dim=cfg.mock_embed_dim)
        index = load_fact_index(cfg.index, expected_model_tag=embedder.model)
        pipeline = QaPipeline(
            graph=graph,
            index=index,
            chat=MockChatBackend.from_file(cfg.mock_transcript),
            embedder=embedder,
            prompts=prompts,
            config=cfg.generation,
            cutoff=cfg.cutoff,
            k=cfg.k,
        )
        items = load_qa_set(config_path.parent / "qa.jsonl")
        return evaluate(items, pipeline)

    def test_two_runs_byte_identical_and_qa_scores(self, fresh_copy, prompts):
        config_path = fresh_copy / "config.json"

        run_pipeline(load_config(config_path))
        snapshot_1 = (fresh_copy / "artifacts/graph.snapshot.jsonl").read_bytes()
        index_1 = (fresh_copy / "artifacts/facts.index.jsonl").read_bytes()
        eval_1 = self._evaluate(config_path, prompts)
        write_eval_report(eval_1, fresh_copy / "eval_1.tsv", figure=False)

        run_pipeline(load_config(config_path))
        snapshot_2 = (fresh_copy / "artifacts/graph.snapshot.jsonl").read_bytes()
        index_2 = (fresh_copy / "artifacts/facts.index.jsonl").read_bytes()
        eval_2 = self._evaluate(config_path, prompts)
        write_eval_report(eval_2, fresh_copy / "eval_2.tsv", figure=False)

        assert snapshot_1 == snapshot_2
        assert index_1 == index_2
        assert (fresh_copy / "eval_1.tsv").read_bytes() == (
            fresh_copy / "eval_2.tsv"
        ).read_bytes()

        assert eval_1.n == 20
        assert eval_1.accuracy == 1.0

        perturbed = self._evaluate(fresh_copy / "config_perturbed.json", prompts)
        assert perturbed.accuracy == 0.80
        report("deterministic-end-to-end")


class TestDietIntersectionProperty:
    def test_adding_ingredient_never_flips_false_to_true(self):
        labels = list(restriction_ids())
        rng = random.Random(0xD1E7)

        def random_flags():
            flags = {label: rng.random() < 0.7 for label in labels}
            flags["unrestricted"] = True
            return flags

        for _ in range(1_000):
            recipe = [random_flags() for _ in range(rng.randint(1, 6))]
            before = propagate_recipe_diets(recipe)
            after = propagate_recipe_diets(recipe + [random_flags()])
            for label in labels:
                if not before[label]:
                    assert not after[label]
        report("diet-intersection-property")


class TestZeroRetrievalPath:
    def test_orthogonal_question_falls_back(self, fixture_env, prompts, genconfig, caplog):
        question = "Is there any information about zorbium crystals?"
        probe = [0.0] * mockdata.EMBED_DIM
        probe[0] = 1.0  # mock fact vectors all have component 0 == 0
        embedder = MockEmbedder(
            dim=mockdata.EMBED_DIM, overrides={question: probe}
        )
        transcript = {
            prompt_key(prompts.system_prompt("query_plan"), question): json.dumps(
                {"concepts": ["zorbium"], "keywords": [], "synonyms": []}
            )
        }
        pipeline = QaPipeline(
            graph=fixture_env.graph,
            index=fixture_env.index,
            chat=MockChatBackend(transcript),
            embedder=embedder,
            prompts=prompts,
            config=genconfig,
        )
        qv = np.asarray(embedder.embed([question])[0])
        for fact in fixture_env.index.facts:  # construction check: orthogonal
            assert float(np.dot(qv, np.asarray(fact.vector))) == 0.0

        with caplog.at_level(logging.WARNING):
            result = pipeline.ask(question)
        assert result.facts == []
        assert result.zero_retrieval is True
        assert result.answer == FALLBACK_ANSWER
        assert any("zero-retrieval" in r.message for r in caplog.records)

        eval_report = evaluate(
            [QAItem(question=question, expected="zorbium facts")], pipeline
        )
        assert eval_report.rows[0].zero_retrieval is True
        assert eval_report.rows[0].hit is False
        report("zero-retrieval-path")


class TestMatchingLadder:
    def test_three_scripted_cases(self):
        vectors = {
            "apple": [1.0, 0.0, 0.0],
            "Apfel, roh": [0.8, 0.6, 0.0],
            "Apples, raw, with skin": [0.9, math.sqrt(1 - 0.81), 0.0],
            "pear": [0.0, 1.0, 0.0],
        }

        class Pinned:
            model = "pinned"

            def embed(self, texts):
                return [list(vectors[t]) for t in texts]

        embedder = Pinned()

        def table(source, names):
            return NutrientTable.build(
                [NutrientEntry(source, n, {"kcal_per_100g": 50.0}) for n in names],
                embedder,
                source,
            )

        # case 1: present in both -> swiss wins
        res = resolve_nutrients(
            "apple", table("swiss", ["apple", "pear"]), table("usda", ["apple"]), embedder
        )
        assert (res.match.method, res.match.source) == ("exact", "swiss")

        # case 2: removed from swiss -> exact usda
        res = resolve_nutrients(
            "apple", table("swiss", ["pear"]), table("usda", ["apple"]), embedder
        )
        assert (res.match.method, res.match.source) == ("exact", "usda")

        # case 3: no exact match anywhere -> embedding
        res = resolve_nutrients(
            "apple",
            table("swiss", ["Apfel, roh"]),
            table("usda", ["Apples, raw, with skin"]),
            embedder,
        )
        assert res.match.method == "embedding"
        assert res.match.source == "swiss"  # 0.8 >= threshold, ladder prefers swiss
        assert res.match.score == pytest.approx(0.8)
        report("matching-ladder")
