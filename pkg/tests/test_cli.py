import json
import shutil

import pytest
from click.testing import CliRunner

from foodkg.cli import main

import mockdata


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def cli_env(fixture_env, tmp_path_factory):
    """A copy of the fixture inputs so CLI runs cannot disturb the shared
    artifacts."""
    root = tmp_path_factory.mktemp("cli")
    for name in (
        "recipes.json",
        "nutrients_swiss.csv",
        "nutrients_usda.csv",
        "gi.csv",
        "subs.csv",
        "qa.jsonl",
        "transcript.json",
    ):
        shutil.copy(fixture_env.root / name, root / name)
    config_path = mockdata.write_config(root)
    return root, config_path


class TestExitCodes:
    def test_missing_config_file_is_2(self, runner, tmp_path):
        result = runner.invoke(main, ["--config", str(tmp_path / "no.json"), "stats"])
        assert result.exit_code == 2

    def test_invalid_config_is_2(self, runner, tmp_path):
        config = tmp_path / "bad.json"
        config.write_text("{}")
        result = runner.invoke(main, ["--config", str(config), "ingest"])
        assert result.exit_code == 2
        assert "config error" in result.output

    def test_missing_artifact_is_stage_failure_3(self, runner, cli_env):
        root, config_path = cli_env
        # enrich before ingest: its input artifact does not exist yet
        result = runner.invoke(main, ["--config", str(config_path), "enrich"])
        assert result.exit_code == 3

    def test_backend_unreachable_is_4(self, runner, cli_env, tmp_path):
        root, _ = cli_env
        config = json.loads((root / "config.json").read_text())
        config["mock"] = {"enabled": False}
        config["chat"] = {"endpoint": "http://127.0.0.1:9", "model": "m"}
        config["embedding"] = {"endpoint": "http://127.0.0.1:9", "model": "m"}
        offline = root / "config_live.json"
        offline.write_text(json.dumps(config))
        runner.invoke(main, ["--config", str(offline), "ingest"])
        result = runner.invoke(main, ["--config", str(offline), "enrich"])
        assert result.exit_code == 4
        assert "backend unreachable" in result.output

    def test_mock_flag_overrides_disabled_mock(self, runner, cli_env):
        root, _ = cli_env
        config = json.loads((root / "config.json").read_text())
        config["mock"]["enabled"] = False  # transcript path stays configured
        flagged = root / "config_flag.json"
        flagged.write_text(json.dumps(config))
        result = runner.invoke(
            main, ["--config", str(flagged), "--mock", "ingest"]
        )
        assert result.exit_code == 0, result.output


class TestStageCommands:
    def test_full_stage_sequence(self, runner, cli_env):
        root, config_path = cli_env
        for command in ("ingest", "enrich", "build-graph", "embed-index"):
            result = runner.invoke(main, ["--config", str(config_path), command])
            assert result.exit_code == 0, (command, result.output)
        assert (root / "artifacts" / "graph.snapshot.jsonl").exists()
        assert (root / "artifacts" / "facts.index.jsonl").exists()

    def test_stats_reports_and_figures(self, runner, cli_env):
        root, config_path = cli_env
        result = runner.invoke(main, ["--config", str(config_path), "stats"])
        assert result.exit_code == 0
        assert f"Recipe: {mockdata.N_RECIPES}" in result.output
        assert (root / "artifacts" / "graph_stats.tsv").exists()
        assert (root / "artifacts" / "graph_stats.png").exists()

    def test_ask_prints_answer_and_citations(self, runner, cli_env):
        root, config_path = cli_env
        result = runner.invoke(
            main,
            ["--config", str(config_path), "ask", "What is the glycemic index of rice?"],
        )
        assert result.exit_code == 0
        assert "73" in result.output
        assert "cited facts:" in result.output

    def test_eval_writes_report(self, runner, cli_env):
        root, config_path = cli_env
        result = runner.invoke(
            main,
            [
                "--config", str(config_path),
                "eval", "--qa", str(root / "qa.jsonl"),
            ],
        )
        assert result.exit_code == 0, result.output
        assert "accuracy: 1.0000" in result.output
        report = root / "artifacts" / "eval_report.tsv"
        assert report.exists()
        assert (root / "artifacts" / "eval_report.png").exists()
        lines = report.read_text().splitlines()
        assert lines[0].startswith("qid\thit\tzero_retrieval")
        assert len(lines) == 2 + len(mockdata.QA_ITEMS)  # header + rows + aggregate

    def test_run_command_end_to_end(self, runner, fixture_env, tmp_path_factory):
        root = tmp_path_factory.mktemp("cli_run")
        for name in (
            "recipes.json", "nutrients_swiss.csv", "nutrients_usda.csv",
            "gi.csv", "subs.csv", "transcript.json",
        ):
            shutil.copy(fixture_env.root / name, root / name)
        config_path = mockdata.write_config(root)
        result = CliRunner().invoke(main, ["--config", str(config_path), "run"])
        assert result.exit_code == 0, result.output
        assert (root / "artifacts" / "run_report.json").exists()
        snapshot = (root / "artifacts" / "graph.snapshot.jsonl").read_bytes()
        assert snapshot == fixture_env.cfg.snapshot.read_bytes()
