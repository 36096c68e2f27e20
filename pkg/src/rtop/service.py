"""HTTP boundary for trainers and the browser UI.

All mutating commands funnel through the single agent-loop queue; reads
serve snapshots under a lock. Events stream to clients over a persistent
text/event-stream connection.
"""

from __future__ import annotations

import base64
import threading
import time
from queue import Empty, Queue
from typing import Optional

from fastapi import Body, FastAPI, HTTPException
from fastapi.responses import StreamingResponse

from .agent import Agent, AgentEvent
from .environment import (
    StimulusLibrary,
    StimulusScript,
    World,
    load_raster,
    load_wav,
    synth_audio,
    synth_image,
)
from .kb import KnowledgeBase
from .motivation import ActionRepertoire
from .nodes import NodeId
from .percepts import AudioData, ImageData, ImageMergedData, hsl8_to_rgb8
from .session import inspect as inspect_tree


class SessionRunner:
    """Owns one live session: agent + world + command queue + subscribers."""

    def __init__(
        self,
        kb: KnowledgeBase,
        library: Optional[StimulusLibrary] = None,
        repertoire: Optional[ActionRepertoire] = None,
        auto: bool = False,
    ):
        self.kb = kb
        self.library = library or StimulusLibrary()
        self.world = World(StimulusScript(), self.library, kb.config, start_tick=kb.tick)
        self.lock = threading.RLock()
        self.recent_events: list[AgentEvent] = []
        self.subscribers: list[Queue] = []
        self.agent = Agent(kb, self.world, repertoire=repertoire, sink=self._fanout)
        self.commands: Queue = Queue()
        self.auto = auto
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        if auto:
            self.start()

    # --- events ------------------------------------------------------------------

    def _fanout(self, event: AgentEvent) -> None:
        self.recent_events.append(event)
        if len(self.recent_events) > 1000:
            self.recent_events = self.recent_events[-1000:]
        for q in list(self.subscribers):
            q.put(event)

    def subscribe(self) -> Queue:
        q: Queue = Queue()
        self.subscribers.append(q)
        return q

    def unsubscribe(self, q: Queue) -> None:
        if q in self.subscribers:
            self.subscribers.remove(q)

    # --- stepping -------------------------------------------------------------------

    def start(self) -> None:
        if self._thread is not None:
            return
        self._stop.clear()
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def pause(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None

    def _loop(self) -> None:
        period = self.kb.config.tick_ms / 1000.0
        while not self._stop.is_set():
            started = time.monotonic()
            self.step(1)
            elapsed = time.monotonic() - started
            time.sleep(max(0.0, period - elapsed))

    def step(self, ticks: int = 1) -> int:
        with self.lock:
            for _ in range(ticks):
                self._drain_commands()
                self.agent.step()
            return self.kb.tick

    def _drain_commands(self) -> None:
        while True:
            try:
                command = self.commands.get_nowait()
            except Empty:
                return
            command()

    # --- commands ----------------------------------------------------------------------

    def enqueue(self, fn) -> None:
        self.commands.put(fn)
        if self._thread is None:
            # paused: apply on the next explicit step; nothing to do now
            pass

    def present_image(self, name: str, hold: int) -> None:
        def apply():
            raster = self.library.image(name)
            self.world.current_raster = raster
            self.world.hold_left = hold

        self.enqueue(apply)

    def play_audio(self, name: str, dur: int = 1) -> None:
        def apply():
            wave = self.library.audio_token(name)
            start = self.kb.tick + 1
            self.world.audio_runs.append((start, start + dur, wave))

        self.enqueue(apply)

    def reward(self, kind: str, amount: float) -> None:
        def apply():
            self.agent._apply_reward(kind, amount)

        self.enqueue(apply)

    def set_attention(self, target: str) -> None:
        def apply():
            self.agent._set_attention(target, cause="control")

        self.enqueue(apply)

    def generalize_now(self) -> None:
        def apply():
            self.agent._run_offline_pass()

        self.enqueue(apply)


def _thumb_png(img: ImageData) -> str:
    import io

    from PIL import Image

    rgb = hsl8_to_rgb8(img.to_hsl8())
    buf = io.BytesIO()
    Image.fromarray(rgb, "RGB").resize((64, 64), Image.NEAREST).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(runner: SessionRunner, ui_dir: Optional[str] = None) -> FastAPI:
    from fastapi.middleware.cors import CORSMiddleware

    app = FastAPI(title="rtop session")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    def guard_offline() -> None:
        if runner.agent.offline:
            raise HTTPException(status_code=409, detail="generalization pass running")

    @app.get("/state")
    def state():
        with runner.lock:
            return runner.agent.state_view()

    @app.post("/stimulus/image")
    def stimulus_image(body: dict = Body(...)):
        guard_offline()
        hold = int(body.get("hold", 4))
        if "name" in body:
            name = body["name"]
            if name not in runner.library.images and "spec" in body:
                runner.library.add_image(name, synth_image(body["spec"]))
        elif "png_base64" in body:
            name = body.get("store_as", f"upload{len(runner.library.images)}")
            runner.library.add_image(name, load_raster(base64.b64decode(body["png_base64"])))
        else:
            raise HTTPException(status_code=422, detail="need name or png_base64")
        if name not in runner.library.images:
            raise HTTPException(status_code=404, detail=f"unknown image {name}")
        runner.present_image(name, hold)
        return {"ok": True, "name": name, "hold": hold}

    @app.post("/stimulus/audio")
    def stimulus_audio(body: dict = Body(...)):
        guard_offline()
        if "name" in body:
            name = body["name"]
            if name not in runner.library.audio and "spec" in body:
                runner.library.add_audio(name, synth_audio(body["spec"]))
        elif "wav_base64" in body:
            name = body.get("store_as", f"upload{len(runner.library.audio)}")
            runner.library.add_audio(name, load_wav(base64.b64decode(body["wav_base64"])))
        else:
            raise HTTPException(status_code=422, detail="need name or wav_base64")
        if name not in runner.library.audio:
            raise HTTPException(status_code=404, detail=f"unknown token {name}")
        runner.play_audio(name, dur=int(body.get("dur", 1)))
        return {"ok": True, "name": name}

    @app.post("/reward")
    def reward(body: dict = Body(...)):
        guard_offline()
        if body.get("feed"):
            runner.reward("feed", 0.0)
            return {"ok": True, "kind": "feed"}
        if "comfort_delta" in body:
            runner.reward("comfort_delta", float(body["comfort_delta"]))
            return {"ok": True, "kind": "comfort_delta"}
        raise HTTPException(status_code=422, detail="need feed or comfort_delta")

    @app.post("/control")
    def control(body: dict = Body(...)):
        op = body.get("op")
        if op == "pause":
            runner.pause()
            return {"ok": True, "running": False}
        if op == "resume":
            runner.start()
            return {"ok": True, "running": True}
        if op == "step":
            guard_offline()
            ticks = int(body.get("ticks", 1))
            tick = runner.step(ticks)
            return {"ok": True, "tick": tick}
        if op == "generalize":
            guard_offline()
            runner.generalize_now()
            runner.step(1)
            return {"ok": True}
        if op == "set-attention":
            guard_offline()
            runner.set_attention(body.get("target", "visual"))
            return {"ok": True}
        raise HTTPException(status_code=422, detail=f"unknown op {op!r}")

    @app.get("/kb/nodes")
    def kb_nodes(type: Optional[str] = None, limit: int = 200):
        with runner.lock:
            out = []
            for node_id, node in runner.kb.store.nodes.items():
                if type and node_id.type_tag.value != type:
                    continue
                entry = {
                    "id": str(node_id),
                    "label": runner.kb.store.label(node_id),
                    "type": node_id.type_tag.value,
                    "merged": node_id.merged,
                    "created_at": node.created_at,
                }
                if isinstance(node.payload, ImageData):
                    entry["thumb_png"] = _thumb_png(node.payload)
                elif isinstance(node.payload, ImageMergedData):
                    entry["thumb_png"] = _thumb_png(node.payload.to_image())
                    entry["mask"] = node.payload.must_match.astype(int).tolist()
                elif isinstance(node.payload, AudioData):
                    samples = node.payload.samples[:: max(1, len(node.payload.samples) // 128)]
                    entry["waveform"] = samples.astype(int).tolist()
                attrs = runner.kb.store.index.get(node_id)
                if attrs:
                    entry["summary"] = attrs
                out.append(entry)
                if len(out) >= limit:
                    break
            return {"nodes": out}

    @app.get("/kb/tree/{node_text}")
    def kb_tree(node_text: str, depth: int = 4):
        with runner.lock:
            try:
                node_id = NodeId.parse(node_text)
            except Exception:
                raise HTTPException(status_code=404, detail=f"bad node id {node_text!r}")
            if node_id not in runner.kb.store:
                raise HTTPException(status_code=404, detail=f"unknown node {node_text}")
            text = inspect_tree(runner.kb, node_id, depth=depth)
            tree = runner.kb.trees.get(node_id)
            return {
                "id": str(node_id),
                "text": text,
                "tree": _tree_json(runner.kb, tree, depth) if tree else None,
            }

    @app.get("/projection/frames")
    def projection_frames():
        with runner.lock:
            frames = []
            for i, node_id in enumerate(runner.kb.canvas.frame_nodes):
                if node_id in runner.kb.store:
                    payload = runner.kb.store.payload(node_id)
                    if isinstance(payload, ImageData):
                        frames.append({"index": i, "node": str(node_id), "png": _thumb_png(payload)})
            return {"frames": frames}

    @app.get("/events")
    def events(since: int = -1, limit: int = 0):
        """Persistent event stream; `limit` > 0 closes after that many events
        (handy for polling clients and tests)."""
        queue = runner.subscribe()

        def gen():
            sent = 0
            try:
                with runner.lock:
                    backlog = [e for e in runner.recent_events if e.seq > since]
                for event in backlog:
                    yield f"data: {event.to_json()}\n\n"
                    sent += 1
                    if limit and sent >= limit:
                        return
                while True:
                    try:
                        event = queue.get(timeout=1.0)
                        yield f"data: {event.to_json()}\n\n"
                        sent += 1
                        if limit and sent >= limit:
                            return
                    except Empty:
                        yield ": keepalive\n\n"
            finally:
                runner.unsubscribe(queue)

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.get("/library")
    def library():
        return {
            "images": sorted(runner.library.images),
            "audio": sorted(runner.library.audio),
        }

    @app.get("/library/audio/{name}")
    def library_audio(name: str):
        """Token waveform as WAV (base64) so the trainer can hear what it sends."""
        if name not in runner.library.audio:
            raise HTTPException(status_code=404, detail=f"unknown token {name}")
        import io
        import wave as wave_module

        samples = runner.library.audio[name].samples
        buf = io.BytesIO()
        with wave_module.open(buf, "wb") as fh:
            fh.setnchannels(1)
            fh.setsampwidth(1)
            fh.setframerate(16000)
            fh.writeframes((samples.astype("int16") + 128).astype("uint8").tobytes())
        return {"name": name, "wav_base64": base64.b64encode(buf.getvalue()).decode("ascii")}

    return app


def _tree_json(kb, tree, depth: int) -> dict:
    def level(connections: dict, depth_left: int) -> list:
        out = []
        total = sum(c.count for c in connections.values())
        for child in sorted(connections):
            conn = connections[child]
            item = {
                "node": str(child),
                "label": kb.store.label(child),
                "probability": conn.count / total if total else 0.0,
                "delta": conn.mean_delta,
                "count": conn.count,
            }
            if depth_left > 1:
                item["children"] = level(conn.children, depth_left - 1)
            else:
                item["elided"] = sum(1 for _ in _walk(conn.children))
            out.append(item)
        return out

    def _walk(connections: dict):
        for conn in connections.values():
            yield conn
            yield from _walk(conn.children)

    return {"root": str(tree.root), "label": kb.store.label(tree.root), "children": level(tree.branches, depth)}
