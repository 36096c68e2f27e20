"""Deterministic scripted world standing in for camera and microphone.

A stimulus script drives image/audio presentations, rewards, and response
rules on the simulation clock; agent speech echoes back through the
configured conditioning rules.
"""

from __future__ import annotations

import io
import json
import wave as wave_module
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import SessionConfig
from .errors import ScriptError
from .nodes import SpeechAction
from .percepts import (
    AUDIO_SAMPLES,
    AudioData,
    ImageData,
    encode_image,
    noise_wave,
    rgb_to_hsl8,
    silence,
    sine_wave,
)

BLANK_SIDE = 64


@dataclass
class SimClock:
    tick: int = 0
    tick_ms: int = 250

    def advance(self) -> int:
        self.tick += 1
        return self.tick

    @property
    def seconds(self) -> float:
        return self.tick * self.tick_ms / 1000.0


@dataclass
class ScriptEvent:
    at_tick: int
    kind: str
    args: dict = field(default_factory=dict)


@dataclass
class StimulusScript:
    events: list = field(default_factory=list)
    until: Optional[int] = None

    @property
    def end_tick(self) -> int:
        if self.until is not None:
            return self.until
        last = 0
        for ev in self.events:
            tail = ev.at_tick
            if ev.kind == "present_image":
                tail += ev.args.get("hold", 1)
            if ev.kind == "play_audio":
                rep = ev.args.get("repeat", 1)
                dur = ev.args.get("dur", 1)
                gap = ev.args.get("gap", 1)
                tail += rep * dur + (rep - 1) * gap
            last = max(last, tail)
        return last + 1


def _parse_kv(tokens: list[str]) -> dict:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ScriptError(f"expected key=value, got {tok!r}")
        key, value = tok.split("=", 1)
        out[key] = value
    return out


def parse_script(text: str) -> StimulusScript:
    """One event per line: `at=<tick> <event> <args>`; `rule`/`run` directives
    may omit the tick (rules then apply from the start)."""
    script = StimulusScript()
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        at = 0
        if tokens[0].startswith("at="):
            at = int(tokens[0][3:])
            tokens = tokens[1:]
        kind = tokens[0]
        rest = tokens[1:]
        if kind == "run":
            kv = _parse_kv(rest)
            script.until = int(kv["until"])
            continue
        if kind == "present_image":
            args = {"name": rest[0]}
            kv = _parse_kv(rest[1:])
            args["hold"] = int(kv.get("hold", 1))
            if "noise" in kv:
                sigma, seed = kv["noise"].split(":")
                args["noise_sigma"] = float(sigma)
                args["noise_seed"] = int(seed)
        elif kind == "play_audio":
            args = {"name": rest[0]}
            kv = _parse_kv(rest[1:])
            args["repeat"] = int(kv.get("repeat", 1))
            args["dur"] = int(kv.get("dur", 1))
            args["gap"] = int(kv.get("gap", 1))
        elif kind == "set_comfort":
            args = {"amount": float(rest[0])}
        elif kind == "feed":
            args = {}
        elif kind == "expect":
            args = {"id": rest[0]}
        elif kind == "generalize":
            args = {}
        elif kind == "rule":
            args = {"word": rest[0]}
            kv = _parse_kv(rest[1:])
            if "comfort" in kv:
                args["comfort"] = float(kv["comfort"])
            if "reply" in kv:
                args["reply"] = kv["reply"]
        elif kind == "rule_default":
            kv = _parse_kv(rest)
            args = {"comfort": float(kv["comfort"])}
        elif kind == "rules_reset":
            args = {}
        elif kind == "set_attention":
            args = {"target": rest[0]}
        else:
            raise ScriptError(f"unknown script event {kind!r}")
        script.events.append(ScriptEvent(at, kind, args))
    script.events.sort(key=lambda e: e.at_tick)
    return script


# --- stimulus library -----------------------------------------------------------


def synth_image(spec: str) -> np.ndarray:
    """Deterministic HSL rasters: flat:h,s,l[:side], noise:seed[:side],
    blocks:seed[:side]."""
    parts = spec.split(":")
    kind = parts[0]
    if kind == "flat":
        h, s, l = (int(v) for v in parts[1].split(","))
        side = int(parts[2]) if len(parts) > 2 else BLANK_SIDE
        out = np.zeros((side, side, 3), dtype=np.uint8)
        out[:, :] = (h, s, l)
        return out
    if kind == "noise":
        seed = int(parts[1])
        side = int(parts[2]) if len(parts) > 2 else BLANK_SIDE
        rng = np.random.default_rng(seed)
        return rng.integers(0, 256, size=(side, side, 3), dtype=np.uint8)
    if kind == "blocks":
        seed = int(parts[1])
        side = int(parts[2]) if len(parts) > 2 else BLANK_SIDE
        rng = np.random.default_rng(seed)
        out = np.zeros((side, side, 3), dtype=np.uint8)
        out[:, :, 2] = 32
        for _ in range(6):
            x0, y0 = rng.integers(0, side - 8, size=2)
            w, h = rng.integers(4, side // 2, size=2)
            color = rng.integers(0, 256, size=3)
            out[y0:y0 + h, x0:x0 + w] = color
        return out
    raise ScriptError(f"unknown synthetic image spec {spec!r}")


def synth_audio(spec: str) -> AudioData:
    parts = spec.split(":")
    kind = parts[0]
    if kind == "silence":
        return silence()
    if kind == "sine":
        freq = float(parts[1])
        amp = float(parts[2]) if len(parts) > 2 else 0.5
        return sine_wave(freq, amp)
    if kind == "noise":
        seed = int(parts[1])
        amp = float(parts[2]) if len(parts) > 2 else 0.5
        return noise_wave(seed, amp)
    raise ScriptError(f"unknown synthetic audio spec {spec!r}")


def load_wav(data: bytes) -> AudioData:
    """16 kHz mono WAV, 8 or 16 bit; 16-bit samples rescale to 8."""
    with wave_module.open(io.BytesIO(data)) as wav:
        if wav.getnchannels() != 1 or wav.getframerate() != 16000:
            raise ScriptError("audio files must be 16 kHz mono")
        frames = wav.readframes(wav.getnframes())
        width = wav.getsampwidth()
    if width == 1:
        samples = np.frombuffer(frames, dtype=np.uint8).astype(np.int16) - 128
    elif width == 2:
        samples = np.frombuffer(frames, dtype="<i2").astype(np.int32) >> 8
    else:
        raise ScriptError("audio files must be 8 or 16 bit")
    out = np.zeros(AUDIO_SAMPLES, dtype=np.int8)
    n = min(len(samples), AUDIO_SAMPLES)
    out[:n] = np.clip(samples[:n], -128, 127).astype(np.int8)
    return AudioData(out)


def load_raster(data: bytes) -> np.ndarray:
    """PNG or PPM bytes to an HSL raster."""
    from PIL import Image

    img = Image.open(io.BytesIO(data)).convert("RGB")
    return rgb_to_hsl8(np.asarray(img, dtype=np.uint8))


class StimulusLibrary:
    """Named rasters (HSL) and audio tokens backed by files or synth specs."""

    def __init__(self):
        self.images: dict[str, np.ndarray] = {}
        self.audio: dict[str, AudioData] = {}

    def add_image(self, name: str, raster: np.ndarray) -> None:
        self.images[name] = np.asarray(raster, dtype=np.uint8)

    def add_audio(self, name: str, wave: AudioData) -> None:
        self.audio[name] = wave

    def image(self, name: str) -> np.ndarray:
        if name not in self.images:
            raise ScriptError(f"unknown image stimulus {name!r}")
        return self.images[name]

    def audio_token(self, name: str) -> AudioData:
        if name not in self.audio:
            raise ScriptError(f"unknown audio stimulus {name!r}")
        return self.audio[name]

    @classmethod
    def from_manifest(cls, directory: str) -> "StimulusLibrary":
        lib = cls()
        root = Path(directory)
        manifest = json.loads((root / "manifest.json").read_text())
        for name, entry in manifest.get("images", {}).items():
            if entry["kind"] == "file":
                lib.add_image(name, load_raster((root / entry["path"]).read_bytes()))
            else:
                lib.add_image(name, synth_image(entry["spec"]))
        for name, entry in manifest.get("audio", {}).items():
            if entry["kind"] == "file":
                lib.add_audio(name, load_wav((root / entry["path"]).read_bytes()))
            else:
                lib.add_audio(name, synth_audio(entry["spec"]))
        return lib


# --- the world --------------------------------------------------------------------


@dataclass
class WorldEffect:
    kind: str  # reward | expect | generalize | set_attention
    args: dict = field(default_factory=dict)


class World:
    def __init__(
        self,
        script: StimulusScript,
        library: StimulusLibrary,
        config: SessionConfig,
        start_tick: int = 0,
    ):
        self.script = script
        self.library = library
        self.config = config
        self.start_tick = start_tick  # script ticks are relative to session start
        self.blank = np.zeros((BLANK_SIDE, BLANK_SIDE, 3), dtype=np.uint8)
        self.current_raster: Optional[np.ndarray] = None
        self.hold_left = 0
        self.audio_runs: list[tuple[int, int, AudioData]] = []  # (start, end) half-open
        self.rules: dict[str, dict] = {}
        self.default_comfort: Optional[float] = None
        self.pending_effects: list[tuple[int, WorldEffect]] = []
        self._cursor = 0
        self.clamped_focus = False

    # --- per-tick -------------------------------------------------------------

    def apply_due(self, tick: int) -> list[WorldEffect]:
        effects: list[WorldEffect] = []
        rel = tick - self.start_tick
        while self._cursor < len(self.script.events) and self.script.events[self._cursor].at_tick <= rel:
            self._apply_event(self.script.events[self._cursor], tick, effects)
            self._cursor += 1
        still_pending = []
        for due, effect in self.pending_effects:
            if due <= tick:
                effects.append(effect)
            else:
                still_pending.append((due, effect))
        self.pending_effects = still_pending
        return effects

    def _apply_event(self, ev: ScriptEvent, tick: int, effects: list[WorldEffect]) -> None:
        if ev.kind == "present_image":
            raster = self.library.image(ev.args["name"])
            if "noise_sigma" in ev.args:
                rng = np.random.default_rng(ev.args["noise_seed"])
                jitter = rng.normal(0.0, ev.args["noise_sigma"], size=raster.shape)
                noisy = np.clip(raster.astype(np.float64) + jitter, 0, 255)
                raster = noisy.astype(np.uint8)
            self.current_raster = raster
            self.hold_left = ev.args["hold"]
        elif ev.kind == "play_audio":
            wave = self.library.audio_token(ev.args["name"])
            dur, gap = ev.args["dur"], ev.args["gap"]
            start = self.start_tick + ev.at_tick
            for _ in range(ev.args["repeat"]):
                self.audio_runs.append((start, start + dur, wave))
                start += dur + gap
        elif ev.kind == "set_comfort":
            effects.append(WorldEffect("reward", {"kind": "comfort_delta", "amount": ev.args["amount"]}))
        elif ev.kind == "feed":
            effects.append(WorldEffect("reward", {"kind": "feed", "amount": 0.0}))
        elif ev.kind == "expect":
            effects.append(WorldEffect("expect", {"id": ev.args["id"]}))
        elif ev.kind == "generalize":
            effects.append(WorldEffect("generalize", {}))
        elif ev.kind == "set_attention":
            effects.append(WorldEffect("set_attention", {"target": ev.args["target"]}))
        elif ev.kind == "rule":
            self.rules[ev.args["word"]] = {
                "comfort": ev.args.get("comfort"),
                "reply": ev.args.get("reply"),
            }
        elif ev.kind == "rule_default":
            self.default_comfort = ev.args["comfort"]
        elif ev.kind == "rules_reset":
            self.rules = {}
            self.default_comfort = None

    def end_tick(self, tick: int) -> None:
        if self.hold_left > 0:
            self.hold_left -= 1
            if self.hold_left == 0:
                self.current_raster = None
        self.audio_runs = [run for run in self.audio_runs if run[1] > tick + 1]

    # --- channels ----------------------------------------------------------------

    def raster(self) -> np.ndarray:
        return self.current_raster if self.current_raster is not None else self.blank

    def clamp_focus(self, focus: tuple[int, int, int]) -> tuple[int, int, int]:
        raster = self.raster()
        h, w = raster.shape[:2]
        cx, cy, side = focus
        side = max(self.config.focus_side_min, min(side, min(h, w)))
        cx = max(0, min(cx, w - side))
        cy = max(0, min(cy, h - side))
        clamped = (cx, cy, side)
        self.clamped_focus = clamped != focus
        return clamped

    def visual_sample(self, focus: tuple[int, int, int]) -> ImageData:
        return encode_image(self.raster(), self.clamp_focus(focus))

    def audio_sample(self, tick: int) -> AudioData:
        for start, end, wave in self.audio_runs:
            if start <= tick < end:
                return wave
        return silence()

    # --- agent speech echo -----------------------------------------------------------

    def word_for(self, action: SpeechAction) -> Optional[str]:
        for word, phones in self.config.vocabulary.items():
            if tuple(phones) == action.phones:
                return word
        return None

    def echo_speech(self, action: SpeechAction, tick: int) -> None:
        """Conditioning rules answer speech next tick with comfort and/or a
        reply token; unlisted words fall to the default comfort rule."""
        word = self.word_for(action)
        rule = self.rules.get(word) if word is not None else None
        comfort = None
        reply = None
        if rule is not None:
            comfort = rule.get("comfort")
            reply = rule.get("reply")
        elif self.default_comfort is not None:
            comfort = self.default_comfort
        if comfort is not None and comfort != 0.0:
            self.pending_effects.append(
                (tick + 1, WorldEffect("reward", {"kind": "comfort_delta", "amount": comfort}))
            )
        if reply is not None:
            wave = self.library.audio_token(reply)
            self.audio_runs.append((tick + 1, tick + 2, wave))
