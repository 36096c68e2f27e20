"""Command-line entry points: run scripted sessions, inspect trees, force
the offline pass, serve the HTTP API, export artifacts."""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from .config import SessionConfig
from .environment import StimulusLibrary, parse_script
from .kb import KnowledgeBase
from .motivation import ActionRepertoire
from .nodes import NodeId
from .percepts import AUDIO_RATE, ImageData, hsl8_to_rgb8
from .session import inspect as inspect_tree
from .session import run_session
from .snapshot import load_kb, save_kb


def _load_config(path: str | None) -> SessionConfig:
    if path is None:
        return SessionConfig()
    return SessionConfig.from_json(Path(path).read_text())


def _load_library(path: str | None) -> StimulusLibrary:
    if path is None:
        return StimulusLibrary()
    return StimulusLibrary.from_manifest(path)


def _repertoire(config: SessionConfig, spec: str | None) -> ActionRepertoire | None:
    if not spec:
        return None
    rep = ActionRepertoire()
    for part in spec.split(","):
        if part == "speech":
            rep.vocabulary = {k: tuple(v) for k, v in config.vocabulary.items()}
        elif part == "focus":
            from .agent import repertoire_from_config

            rep.focus_moves = repertoire_from_config(config, speech=False, focus=True).focus_moves
        elif part == "attention":
            rep.attention_moves = ["visual", "audio"]
        elif part == "babble":
            rep.free_speech = True
        else:
            raise click.BadParameter(f"unknown repertoire part {part!r}")
    return rep


@click.group()
def main():
    """Trainable-agent simulator with a scripted deterministic environment."""


@main.command()
@click.option("--script", "script_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--kb", "kb_path", type=click.Path(exists=True))
@click.option("--out-kb", "out_kb", required=True, type=click.Path())
@click.option("--log", "log_path", type=click.Path())
@click.option("--library", "library_path", type=click.Path(exists=True))
@click.option("--actions", "actions", default=None, help="comma list: speech,focus,attention,babble")
def run(script_path, config_path, kb_path, out_kb, log_path, library_path, actions):
    """Execute a stimulus script and write the resulting KB snapshot."""
    config = _load_config(config_path)
    kb = load_kb(kb_path) if kb_path else KnowledgeBase(config)
    if kb_path:
        config = kb.config
    script = parse_script(Path(script_path).read_text())
    result = run_session(
        config,
        script,
        library=_load_library(library_path),
        kb=kb,
        repertoire=_repertoire(config, actions),
    )
    save_kb(result.kb, out_kb)
    if log_path:
        Path(log_path).write_text(result.event_log_text())
    click.echo(f"ran to tick {result.kb.tick}: {len(result.kb.store)} nodes, "
               f"{len(result.kb.trees.trees)} trees, {len(result.events)} events")


@main.command()
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True))
@click.option("--node", "node_text", required=True)
@click.option("--depth", type=int, default=None)
def inspect(kb_path, node_text, depth):
    """Render a node's observation tree."""
    kb = load_kb(kb_path)
    text = inspect_tree(kb, NodeId.parse(node_text), depth=depth)
    click.echo(text if text else f"{node_text}: no observation tree")


@main.command()
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True))
@click.option("--out-kb", "out_kb", type=click.Path())
def generalize(kb_path, out_kb):
    """Force an offline generalization pass on a saved KB."""
    kb = load_kb(kb_path)
    report = kb.run_generalization()
    for line in report.lines:
        click.echo(line)
    click.echo(f"reductions={report.reductions} merged={len(report.merged_nodes)} "
               f"groups={len(report.group_nodes)} parameterized={report.parameterized}")
    save_kb(kb, out_kb or kb_path)


@main.command()
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True))
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--auto/--paused", default=False, help="step in real time or wait for /control step")
@click.option("--library", "library_path", type=click.Path(exists=True))
@click.option("--ui", "ui_dir", type=click.Path(exists=True), help="static trainer UI directory")
@click.option("--actions", "actions", default=None, help="comma list: speech,focus,attention,babble")
def serve(kb_path, port, host, auto, library_path, ui_dir, actions):
    """Serve the session API (state, stimuli, rewards, control, event stream)."""
    import uvicorn

    from .service import SessionRunner, create_app

    kb = load_kb(kb_path)
    runner = SessionRunner(
        kb,
        library=_load_library(library_path),
        repertoire=_repertoire(kb.config, actions),
        auto=auto,
    )
    app = create_app(runner, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True))
@click.option("--what", type=click.Choice(["future-trees", "projection"]), required=True)
@click.option("--out", "out_dir", type=click.Path(), default="export")
@click.option("--depth", type=int, default=4)
def export(kb_path, what, out_dir, depth):
    """Dump tree renderings or the projection canvas (PPM frames, WAV clips)."""
    kb = load_kb(kb_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if what == "future-trees":
        lines = []
        for root in sorted(kb.trees.trees):
            tree = kb.trees.trees[root]
            lines.extend(tree.render(label=kb.store.label, depth=depth))
            lines.append("")
        target = out / "future-trees.txt"
        target.write_text("\n".join(lines))
        click.echo(f"wrote {target}")
        return
    count = clips = 0
    for i, node_id in enumerate(kb.canvas.frame_nodes):
        if node_id not in kb.store:
            continue
        payload = kb.store.payload(node_id)
        if isinstance(payload, ImageData):
            (out / f"frame_{i:04d}.ppm").write_bytes(_to_ppm(payload))
            count += 1
        elif hasattr(payload, "samples"):
            (out / f"clip_{i:04d}.wav").write_bytes(_to_wav(payload.samples))
            clips += 1
    click.echo(f"wrote {count} frames to {out}" + (f" and {clips} clips" if clips else ""))


def _to_ppm(img: ImageData) -> bytes:
    rgb = hsl8_to_rgb8(img.to_hsl8())
    header = f"P6\n{rgb.shape[1]} {rgb.shape[0]}\n255\n".encode("ascii")
    return header + rgb.tobytes()


def _to_wav(samples: np.ndarray) -> bytes:
    import io
    import wave

    buf = io.BytesIO()
    with wave.open(buf, "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(1)
        fh.setframerate(AUDIO_RATE)
        fh.writeframes((samples.astype(np.int16) + 128).astype(np.uint8).tobytes())
    return buf.getvalue()


if __name__ == "__main__":
    sys.exit(main())
