from dataclasses import dataclass
from pathlib import Path

import pytest

from foodkg.backends import GenerationConfig, MockEmbedder, save_transcript
from foodkg.enrich import PromptPack
from foodkg.graph import FoodGraph
from foodkg.graphrag import FactIndex, load_fact_index
from foodkg.pipeline import RunConfig, load_config, make_embedder, run_pipeline

import mockdata


@pytest.fixture(scope="session")
def prompts() -> PromptPack:
    return PromptPack.bundled()


@pytest.fixture(scope="session")
def genconfig() -> GenerationConfig:
    return GenerationConfig()


@dataclass
class FixtureEnv:
    """A fully materialized offline run: inputs, transcripts, artifacts."""

    root: Path
    config_path: Path
    perturbed_config_path: Path
    cfg: RunConfig
    run_report: dict
    graph: FoodGraph
    index: FactIndex
    embedder: MockEmbedder


@pytest.fixture(scope="session")
def fixture_env(tmp_path_factory, prompts) -> FixtureEnv:
    """Build the fixture corpus, run the whole mock pipeline once, and script
    the QA transcript against the resulting graph and index."""
    root = tmp_path_factory.mktemp("fixture")
    mockdata.write_input_files(root)
    enrich_entries = mockdata.enrichment_transcript(prompts)
    save_transcript(enrich_entries, root / "transcript.json")
    config_path = mockdata.write_config(root)

    cfg = load_config(config_path)
    run_report = run_pipeline(cfg)

    graph = FoodGraph.import_snapshot(cfg.snapshot)
    embedder = make_embedder(cfg)
    index = load_fact_index(cfg.index, expected_model_tag=embedder.model)

    qa_entries = mockdata.qa_transcript(prompts, graph, index, embedder)
    save_transcript({**enrich_entries, **qa_entries}, root / "transcript.json")
    perturbed = mockdata.qa_transcript(prompts, graph, index, embedder, perturbed=True)
    save_transcript(
        {**enrich_entries, **perturbed}, root / "transcript_perturbed.json"
    )

    perturbed_config = mockdata.write_config(
        root, "transcript_perturbed.json", "config_perturbed.json"
    )

    return FixtureEnv(
        root=root,
        config_path=config_path,
        perturbed_config_path=perturbed_config,
        cfg=cfg,
        run_report=run_report,
        graph=graph,
        index=index,
        embedder=embedder,
    )
