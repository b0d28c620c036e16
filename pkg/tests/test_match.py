import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from foodkg.backends import MockEmbedder
from foodkg.graph import FoodGraph
from foodkg.ingest import (
    GIEntry,
    NutrientEntry,
    Substitute,
    SubstituteComponent,
    SubstitutionEntry,
)
from foodkg.match import (
    EmbeddingVector,
    GITable,
    MatchError,
    NutrientTable,
    VectorIndex,
    attach_gi,
    cosine,
    exact_key,
    link_substitutes,
    nearest,
    resolve_nutrients,
    singularize,
)
from foodkg.ontology import EdgeKind, NodeKind

from oracles import fsum_cosine


def vec(*values, tag="mock-embed"):
    return EmbeddingVector(values=np.array(values, dtype=float), model_tag=tag)


class PinnedEmbedder:
    """Embedder with a fixed lookup table; unknown text is an error."""

    def __init__(self, table: dict[str, list[float]], model: str = "pinned"):
        self.table = table
        self.model = model

    def embed(self, texts):
        return [list(self.table[t]) for t in texts]


class TestCosine:
    def test_identity(self):
        v = vec(0.3, -0.2, 0.9)
        assert cosine(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert cosine(vec(1, 0), vec(0, 1)) == 0.0

    def test_hand_computed(self):
        assert cosine(vec(1, 1, 0), vec(1, 0, 0)) == pytest.approx(
            0.7071067811865475
        )

    def test_length_mismatch(self):
        with pytest.raises(MatchError):
            cosine(vec(1, 0), vec(1, 0, 0))

    def test_zero_vector_rejected(self):
        with pytest.raises(MatchError):
            vec(0, 0, 0)

    # Near-zero components are snapped to 0 so norms cannot underflow.
    component = st.floats(-10, 10).map(lambda x: 0.0 if abs(x) < 1e-6 else x)

    @given(
        st.lists(component, min_size=3, max_size=3),
        st.lists(component, min_size=3, max_size=3),
        st.floats(0.1, 5.0),
    )
    def test_symmetry_and_scale_invariance(self, a, b, k):
        if not any(a) or not any(b):
            return
        va, vb = vec(*a), vec(*b)
        assert cosine(va, vb) == pytest.approx(cosine(vb, va))
        assert cosine(va, vec(*[k * x for x in a])) == pytest.approx(1.0)
        assert abs(cosine(va, vb)) <= 1.0 + 1e-12

    @given(
        st.lists(component, min_size=4, max_size=4),
        st.lists(component, min_size=4, max_size=4),
    )
    def test_matches_fsum_oracle(self, a, b):
        if not any(a) or not any(b):
            return
        assert cosine(vec(*a), vec(*b)) == pytest.approx(fsum_cosine(a, b), abs=1e-12)


class TestNearest:
    def test_identical_key_scores_one(self):
        embedder = MockEmbedder(dim=16)
        index = VectorIndex.build(["apple", "pear", "plum"], embedder)
        results = nearest("pear", index, embedder)
        assert len(results) == 1
        assert results[0].candidate == "pear"
        assert results[0].score == pytest.approx(1.0)

    def test_hand_built_similarities(self):
        table = {
            "query": [1.0, 0.0],
            "close": [0.9, math.sqrt(1 - 0.81)],
            "far": [0.2, math.sqrt(1 - 0.04)],
        }
        embedder = PinnedEmbedder(table)
        index = VectorIndex.build(["close", "far"], embedder)
        results = nearest("query", index, embedder)
        assert results[0].candidate == "close"
        assert results[0].score == pytest.approx(0.9)

    def test_exact_tie_returns_all(self):
        table = {
            "query": [1.0, 0.0],
            "left": [0.5, 0.5],
            "right": [0.5, -0.5],
            "off": [0.0, 1.0],
        }
        embedder = PinnedEmbedder(table)
        index = VectorIndex.build(["left", "right", "off"], embedder)
        results = nearest("query", index, embedder)
        assert [r.candidate for r in results] == ["left", "right"]

    def test_empty_index(self):
        embedder = MockEmbedder()
        index = VectorIndex(model_tag=embedder.model, keys=[], matrix=np.zeros((0, 4)))
        with pytest.raises(MatchError):
            nearest("x", index, embedder)

    def test_model_tag_mismatch(self):
        index = VectorIndex.build(["a"], MockEmbedder(model="one"))
        with pytest.raises(MatchError):
            nearest("a", index, MockEmbedder(model="two"))

    def test_duplicate_keys_rejected(self):
        embedder = MockEmbedder()
        with pytest.raises(MatchError):
            VectorIndex.build(["a", "a"], embedder)

    def test_agrees_with_bruteforce_on_random_indexes(self):
        rng = np.random.default_rng(7)
        embedder = MockEmbedder(dim=12)
        for trial in range(20):
            n = int(rng.integers(2, 1000))
            keys = [f"key {trial} {i}" for i in range(n)]
            index = VectorIndex.build(keys, embedder)
            query = f"query {trial}"
            got = nearest(query, index, embedder)[0]
            qv = np.asarray(embedder.embed([query])[0])
            best_key, best_score = None, -2.0
            for key in keys:  # brute-force linear scan
                kv = np.asarray(embedder.embed([key])[0])
                score = fsum_cosine(qv, kv)
                if score > best_score:
                    best_key, best_score = key, score
            assert got.candidate == best_key
            assert got.score == pytest.approx(best_score, abs=1e-12)


class TestSingularize:
    @pytest.mark.parametrize(
        "word,expected",
        [
            ("apples", "apple"),
            ("berries", "berry"),
            ("potatoes", "potato"),
            ("swiss", "swiss"),
            ("eggs", "egg"),
            ("rice", "rice"),
        ],
    )
    def test_cases(self, word, expected):
        assert singularize(word) == expected

    def test_exact_key_consistency(self):
        assert exact_key("  Apples ") == exact_key("apple")
        assert exact_key("Tomatoes, raw") == exact_key("tomato, raw")


def nutrient_tables(embedder, swiss_names, usda_names):
    swiss = NutrientTable.build(
        [NutrientEntry("swiss", n, {"kcal_per_100g": 10.0 + i}) for i, n in enumerate(swiss_names)],
        embedder,
        "swiss",
    )
    usda = NutrientTable.build(
        [NutrientEntry("usda", n, {"kcal_per_100g": 20.0 + i}) for i, n in enumerate(usda_names)],
        embedder,
        "usda",
    )
    return swiss, usda


class TestResolveNutrients:
    def test_exact_swiss_wins_over_usda(self):
        embedder = MockEmbedder()
        swiss, usda = nutrient_tables(embedder, ["apple", "pear"], ["apple"])
        res = resolve_nutrients("apple", swiss, usda, embedder)
        assert res.match.method == "exact"
        assert res.match.source == "swiss"
        assert res.nutrients == {"kcal_per_100g": 10.0}

    def test_falls_to_exact_usda(self):
        embedder = MockEmbedder()
        swiss, usda = nutrient_tables(embedder, ["pear"], ["apple"])
        res = resolve_nutrients("apples", swiss, usda, embedder)  # singularized
        assert res.match.method == "exact"
        assert res.match.source == "usda"

    def test_falls_to_embedding(self):
        table = {
            "nori": [0.0, 1.0, 0.0],
            "Seaweed, Nori, dried": [0.0, 0.47, math.sqrt(1 - 0.47**2)],
            "Cheddar": [0.0, 0.0, 1.0],
        }
        embedder = PinnedEmbedder(table)
        swiss = NutrientTable.build(
            [NutrientEntry("swiss", "Cheddar", {"kcal_per_100g": 402.0})],
            embedder,
            "swiss",
        )
        usda = NutrientTable.build(
            [NutrientEntry("usda", "Seaweed, Nori, dried", {"kcal_per_100g": 35.0})],
            embedder,
            "usda",
        )
        res = resolve_nutrients("nori", swiss, usda, embedder, threshold=0.5, floor=0.25)
        assert res.match.method == "embedding"
        assert res.match.source == "usda"
        assert res.match.candidate == "Seaweed, Nori, dried"
        assert res.match.score == pytest.approx(0.47)
        assert res.low_confidence  # 0.47 < 0.5, attached but flagged
        assert res.nutrients == {"kcal_per_100g": 35.0}

    def test_below_floor_is_unmatched(self):
        table = {
            "query thing": [1.0, 0.0],
            "unrelated": [0.1, math.sqrt(1 - 0.01)],
        }
        embedder = PinnedEmbedder(table)
        swiss = NutrientTable.build(
            [NutrientEntry("swiss", "unrelated", {"kcal_per_100g": 1.0})],
            embedder,
            "swiss",
        )
        usda = NutrientTable.build([], embedder, "usda")
        res = resolve_nutrients("query thing", swiss, usda, embedder, floor=0.25)
        assert not res.matched
        assert res.nutrients is None

    def test_both_empty_is_error(self):
        embedder = MockEmbedder()
        swiss, usda = nutrient_tables(embedder, [], [])
        with pytest.raises(MatchError):
            resolve_nutrients("apple", swiss, usda, embedder)

    def test_swiss_embedding_preferred_when_above_threshold(self):
        table = {
            "q": [1.0, 0.0],
            "swiss close": [0.8, 0.6],
            "usda closer": [0.95, math.sqrt(1 - 0.9025)],
        }
        embedder = PinnedEmbedder(table)
        swiss = NutrientTable.build(
            [NutrientEntry("swiss", "swiss close", {"kcal_per_100g": 1.0})],
            embedder,
            "swiss",
        )
        usda = NutrientTable.build(
            [NutrientEntry("usda", "usda closer", {"kcal_per_100g": 2.0})],
            embedder,
            "usda",
        )
        res = resolve_nutrients("q", swiss, usda, embedder, threshold=0.5)
        # ladder order: swiss embedding clears the threshold, so usda never wins
        assert res.match.source == "swiss"
        assert not res.low_confidence


class TestAttachGi:
    def test_exact_match(self):
        embedder = MockEmbedder()
        table = GITable.build([GIEntry("white bread", 75.0)], embedder)
        res = attach_gi("white bread", table, embedder)
        assert res.gi == 75.0
        assert res.match.method == "exact"

    def test_no_plausible_match_returns_none(self):
        table_vectors = {
            "gi item": [0.05, math.sqrt(1 - 0.0025)],
            "victim": [1.0, 0.0],
        }
        embedder = PinnedEmbedder(table_vectors)
        table = GITable.build([GIEntry("gi item", 40.0)], embedder)
        assert attach_gi("victim", table, embedder, floor=0.25) is None

    def test_empty_table_returns_none(self):
        embedder = MockEmbedder()
        table = GITable.build([], embedder)
        assert attach_gi("bread", table, embedder) is None

    def test_low_confidence_flagged(self):
        vectors = {
            "brown loaf": [0.4, math.sqrt(1 - 0.16)],
            "bread": [1.0, 0.0],
        }
        embedder = PinnedEmbedder(vectors)
        table = GITable.build([GIEntry("brown loaf", 60.0)], embedder)
        res = attach_gi("bread", table, embedder, threshold=0.5, floor=0.25)
        assert res is not None
        assert res.low_confidence


def single(name, ratio=None, notes=None):
    return Substitute(components=[SubstituteComponent(name=name)], ratio=ratio, notes=notes)


class TestLinkSubstitutes:
    def build_graph(self):
        g = FoodGraph.seeded()
        recipe = g.add_node(NodeKind.RECIPE, "Cake")
        for name in ("butter", "cream", "milk", "egg", "water"):
            ing = g.add_node(NodeKind.INGREDIENT, name)
            g.add_edge(recipe, EdgeKind.CONTAINS, ing)
        return g

    def test_single_substitute_edge_with_ratio(self):
        g = self.build_graph()
        embedder = MockEmbedder()
        report = link_substitutes(
            [SubstitutionEntry("butter", [single("margarine", ratio=1.0)])],
            g,
            embedder,
        )
        assert report.substituted_by_edges == 1
        assert report.created_substitute_nodes == 1
        butter = g.find_node(NodeKind.INGREDIENT, "butter")
        margarine = g.find_node(NodeKind.INGREDIENT, "margarine")
        assert margarine.props.get("is_substitute_only") is True
        edges = g.find_edges(butter.id, EdgeKind.SUBSTITUTED_BY, margarine.id)
        assert edges[0].props == {"ratio": 1.0}

    def test_composite_substitute_structure(self):
        g = self.build_graph()
        embedder = MockEmbedder()
        composite = Substitute(
            components=[
                SubstituteComponent("milk", 1.0, "cup"),
                SubstituteComponent("lemon juice", 1.0, "tbsp"),
            ],
            notes="let stand",
        )
        report = link_substitutes(
            [SubstitutionEntry("cream", [composite])], g, embedder
        )
        assert report.composite_nodes == 1
        assert report.has_composite_edges == 1
        assert report.composed_of_edges == 2
        comp = g.find_node(NodeKind.COMPOSITE_SUBSTITUTE, "milk + lemon juice")
        assert comp is not None
        components = [
            node.name for _, node in g.neighbors(comp.id, EdgeKind.COMPOSED_OF, "out")
        ]
        assert components == ["milk", "lemon juice"]

    def test_empty_entries_no_edges(self):
        g = self.build_graph()
        before = g.stats().total_edges
        report = link_substitutes([], g, MockEmbedder())
        assert g.stats().total_edges == before
        assert report.substituted_by_edges == 0

    def test_unresolvable_target_skipped(self):
        g = self.build_graph()
        vectors = {"zz unknown target zz": [0.0, 1.0, 0.0]}
        for node in g.nodes_of_kind(NodeKind.INGREDIENT):
            vectors[node.name] = [1.0, 0.0, 0.0]
        vectors["margarine"] = [0.0, 0.0, 1.0]
        embedder = PinnedEmbedder(vectors)
        report = link_substitutes(
            [SubstitutionEntry("zz unknown target zz", [single("margarine")])],
            g,
            embedder,
        )
        assert report.skipped_targets == 1
        assert report.substituted_by_edges == 0

    def test_existing_ingredient_reused_not_duplicated(self):
        g = self.build_graph()
        report = link_substitutes(
            [SubstitutionEntry("butter", [single("milk")])], g, MockEmbedder()
        )
        assert report.created_substitute_nodes == 0
        milk = g.find_node(NodeKind.INGREDIENT, "milk")
        assert milk.props.get("is_substitute_only") is None
