#!/usr/bin/env python3
"""Generate a self-contained offline demo environment.

Writes the bundled 20-recipe fixture corpus, nutrient/GI/substitution tables,
QA set, mock chat transcript, and a ready-to-use config into a directory,
then runs the pipeline once so the snapshot and fact index exist:

    python scripts/gen_demo.py demo/
    foodkg --config demo/config.json ask "What can I use instead of butter?"
    foodkg --config demo/config.json eval --qa demo/qa.jsonl
    foodkg --config demo/config.json serve --port 8000
"""

import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

import mockdata  # noqa: E402
from foodkg.backends import save_transcript  # noqa: E402
from foodkg.enrich import PromptPack  # noqa: E402
from foodkg.graph import FoodGraph  # noqa: E402
from foodkg.graphrag import load_fact_index  # noqa: E402
from foodkg.pipeline import load_config, make_embedder, run_pipeline  # noqa: E402


def main() -> None:
    if len(sys.argv) != 2:
        print(__doc__)
        raise SystemExit(2)
    target = Path(sys.argv[1]).resolve()
    prompts = PromptPack.bundled()

    mockdata.write_input_files(target)
    enrich_entries = mockdata.enrichment_transcript(prompts)
    save_transcript(enrich_entries, target / "transcript.json")
    config_path = mockdata.write_config(target)

    cfg = load_config(config_path)
    report = run_pipeline(cfg)

    graph = FoodGraph.import_snapshot(cfg.snapshot)
    embedder = make_embedder(cfg)
    index = load_fact_index(cfg.index, expected_model_tag=embedder.model)
    qa_entries = mockdata.qa_transcript(prompts, graph, index, embedder)
    save_transcript({**enrich_entries, **qa_entries}, target / "transcript.json")

    stats = graph.stats()
    print(f"demo environment written to {target}")
    print(f"graph: {stats.total_nodes} nodes, {stats.total_edges} edges")
    print(f"fact index: {report['index']['facts']} facts")
    print(f"try: foodkg --config {config_path} stats")


if __name__ == "__main__":
    main()
