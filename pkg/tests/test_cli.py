import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from rtop.cli import main
from rtop.config import SessionConfig
from rtop.snapshot import load_kb


@pytest.fixture
def workspace(tmp_path):
    lib_dir = tmp_path / "library"
    lib_dir.mkdir()
    (lib_dir / "manifest.json").write_text(
        json.dumps(
            {
                "images": {"wheel": {"kind": "synth", "spec": "flat:0,0,200:64"}},
                "audio": {"WHEEL": {"kind": "synth", "spec": "sine:440:0.6"}},
            }
        )
    )
    script = tmp_path / "train.script"
    script.write_text(
        "at=2 play_audio WHEEL dur=2\n"
        "at=5 present_image wheel hold=6\n"
        "run until=20\n"
    )
    config = tmp_path / "config.json"
    config.write_text(SessionConfig(seed=4, hunger_interval_ticks=0).to_json())
    return tmp_path


def _run(workspace, *extra):
    runner = CliRunner()
    out_kb = workspace / "out.kb"
    log = workspace / "events.jsonl"
    result = runner.invoke(
        main,
        [
            "run",
            "--script", str(workspace / "train.script"),
            "--config", str(workspace / "config.json"),
            "--library", str(workspace / "library"),
            "--out-kb", str(out_kb),
            "--log", str(log),
            *extra,
        ],
    )
    assert result.exit_code == 0, result.output
    return out_kb, log, result


class TestRun:
    def test_creates_snapshot_and_log(self, workspace):
        out_kb, log, result = _run(workspace)
        assert out_kb.exists() and log.exists()
        assert "ran to tick 20" in result.output
        lines = log.read_text().splitlines()
        assert lines and all(json.loads(line)["kind"] for line in lines)

    def test_rerun_byte_identical(self, workspace):
        out_kb, log, _ = _run(workspace)
        first_kb = out_kb.read_bytes()
        first_log = log.read_text()
        out_kb2, log2, _ = _run(workspace)
        assert out_kb2.read_bytes() == first_kb
        assert log2.read_text() == first_log

    def test_continue_from_kb(self, workspace):
        out_kb, _, _ = _run(workspace)
        runner = CliRunner()
        result = runner.invoke(
            main,
            [
                "run",
                "--script", str(workspace / "train.script"),
                "--library", str(workspace / "library"),
                "--kb", str(out_kb),
                "--out-kb", str(workspace / "out2.kb"),
            ],
        )
        assert result.exit_code == 0, result.output
        assert load_kb(str(workspace / "out2.kb")).tick == 40


class TestInspect:
    def test_renders_tree(self, workspace):
        out_kb, _, _ = _run(workspace)
        kb = load_kb(str(out_kb))
        root = sorted(kb.trees.trees)[0]
        runner = CliRunner()
        result = runner.invoke(main, ["inspect", "--kb", str(out_kb), "--node", str(root)])
        assert result.exit_code == 0, result.output
        assert "-->" in result.output and "[" in result.output

    def test_no_tree_message(self, workspace):
        out_kb, _, _ = _run(workspace)
        kb = load_kb(str(out_kb))
        leaf = [n for n in kb.store.nodes if n not in kb.trees.trees][0]
        runner = CliRunner()
        result = runner.invoke(main, ["inspect", "--kb", str(out_kb), "--node", str(leaf)])
        assert "no observation tree" in result.output


class TestGeneralize:
    def test_pass_runs_and_saves(self, workspace):
        out_kb, _, _ = _run(workspace)
        runner = CliRunner()
        result = runner.invoke(main, ["generalize", "--kb", str(out_kb)])
        assert result.exit_code == 0, result.output
        assert "reductions=" in result.output
        assert load_kb(str(out_kb)).trace.entries == []


class TestExport:
    def test_future_trees(self, workspace):
        out_kb, _, _ = _run(workspace)
        out_dir = workspace / "export"
        runner = CliRunner()
        result = runner.invoke(
            main, ["export", "--kb", str(out_kb), "--what", "future-trees", "--out", str(out_dir)]
        )
        assert result.exit_code == 0, result.output
        text = (out_dir / "future-trees.txt").read_text()
        assert "-->" in text

    def test_projection_empty(self, workspace):
        out_kb, _, _ = _run(workspace)
        runner = CliRunner()
        result = runner.invoke(
            main,
            ["export", "--kb", str(out_kb), "--what", "projection", "--out", str(workspace / "proj")],
        )
        assert result.exit_code == 0, result.output
        assert "wrote 0 frames" in result.output
