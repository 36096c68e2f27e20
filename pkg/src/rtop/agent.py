"""The per-tick agent loop.

Each tick yields exactly one foreground trace node, chosen by priority:
reflex attention shift > pending internal-sense reading > decided action >
thought composite > channel capture. Prediction maintenance, background
matching and the offline-pass trigger run around that slot.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from typing import Optional

from .config import SessionConfig
from .environment import World
from .errors import OfflineError
from .innovation import thought_once
from .kb import KnowledgeBase
from .motivation import (
    ActionRepertoire,
    background_reflex,
    explore,
    explore_probability,
    happiness,
    select_action,
)
from .nodes import (
    SENSORY_TYPES,
    AttentionAction,
    FocusAction,
    InternalSenseReading,
    NodeId,
    SpeechAction,
)
from .percepts import audio_summary, image_summary
from .prediction import PredictionSet, build_futures, refresh_policy
from .snapshot import encode_payload


@dataclass
class AgentEvent:
    tick: int
    seq: int
    kind: str
    data: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"tick": self.tick, "seq": self.seq, "kind": self.kind, "data": self.data},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, line: str) -> "AgentEvent":
        raw = json.loads(line)
        return cls(raw["tick"], raw["seq"], raw["kind"], raw.get("data", {}))


def repertoire_from_config(config: SessionConfig, speech: bool = True,
                           focus: bool = False, attention: bool = False,
                           free_speech: bool = False) -> ActionRepertoire:
    rep = ActionRepertoire(free_speech=free_speech)
    if speech:
        rep.vocabulary = {k: tuple(v) for k, v in config.vocabulary.items()}
    if focus:
        rep.focus_moves = [
            FocusAction(16, 0, 0), FocusAction(-16, 0, 0),
            FocusAction(0, 16, 0), FocusAction(0, -16, 0),
            FocusAction(0, 0, 16), FocusAction(0, 0, -16),
        ]
    if attention:
        rep.attention_moves = ["visual", "audio"]
    return rep


class Agent:
    def __init__(
        self,
        kb: KnowledgeBase,
        world: World,
        repertoire: Optional[ActionRepertoire] = None,
        sink=None,
    ):
        self.kb = kb
        self.world = world
        self.repertoire = repertoire or ActionRepertoire()
        self.pset = PredictionSet(k_active=kb.config.k_active)
        self.sink = sink  # callable(AgentEvent) or None
        self._seq = 0
        self._prev_background: dict[str, float] = {}
        self._thought_budget = 0
        self.offline = False
        self.action_log: list[str] = []

    # --- events -----------------------------------------------------------------

    def _emit(self, kind: str, **data) -> AgentEvent:
        event = AgentEvent(self.kb.tick, self._seq, kind, data)
        self._seq += 1
        if self.sink is not None:
            self.sink(event)
        return event

    # --- the loop ----------------------------------------------------------------

    def run(self, until: int) -> None:
        while self.kb.tick < until:
            self.step()

    def step(self) -> int:
        kb = self.kb
        config = kb.config
        kb.tick += 1
        tick = kb.tick

        force_generalize = False
        for effect in self.world.apply_due(tick):
            if effect.kind == "reward":
                self._apply_reward(effect.args["kind"], effect.args["amount"])
            elif effect.kind == "expect":
                self._emit("expect", id=effect.args["id"])
            elif effect.kind == "generalize":
                force_generalize = True
            elif effect.kind == "set_attention":
                self._set_attention(effect.args["target"], cause="control")

        if config.hunger_interval_ticks and tick % config.hunger_interval_ticks == 0:
            kb.pp.hunger_step()

        visual = self.world.visual_sample(kb.attention.visual_focus)
        audio = self.world.audio_sample(tick)
        summaries = {
            "visual": image_summary(visual)["mean_lightness"],
            "audio": audio_summary(audio)["var_amplitude"],
        }
        reflex_target = self._check_reflexes(summaries)
        self._background_predictions(visual, audio)

        if force_generalize:
            self._run_offline_pass()
            self.world.end_tick(tick)
            return tick

        appended: Optional[NodeId] = None
        if reflex_target is not None:
            appended = self._set_attention(reflex_target, cause="reflex")
        elif self._pending_sense_node():
            appended = self._emit_sense_node()
        elif self._decision_due():
            appended = self._decide()
        elif kb.attention.focus == "thought":
            appended = self._thought_tick()
        else:
            payload = visual if kb.attention.focus == "visual" else audio
            appended = self._capture(payload, kb.attention.focus)

        if appended is not None:
            self._maintain_predictions(appended)

        if len(kb.trace) >= config.trace_threshold:
            self._run_offline_pass()

        self.world.end_tick(tick)
        return tick

    # --- slot handlers --------------------------------------------------------------

    def _apply_reward(self, kind: str, amount: float) -> None:
        sense, level, clamped = self.kb.pp.apply_reward(kind, amount)
        self._emit(
            "reward_applied",
            reward=kind, amount=amount, sense=sense, level=level, clamped=clamped,
        )

    def _check_reflexes(self, summaries: dict) -> Optional[str]:
        config = self.kb.config
        target = None
        for channel in ("visual", "audio"):
            value = summaries[channel]
            # baseline is blank/silence, so an onset at tick 1 still startles
            prev = self._prev_background.get(channel, 0.0)
            self._prev_background[channel] = value
            if channel == self.kb.attention.focus:
                continue
            if channel == "visual":
                delta = abs(value - prev)
                threshold = config.reflex_visual_threshold
            else:
                delta = abs(value - prev) / max(prev, 1e-9)
                threshold = config.reflex_audio_threshold
            if target is None and background_reflex(channel, delta, threshold):
                target = channel
        return target

    def _background_predictions(self, visual, audio) -> None:
        """Quick match on unattended channels; nothing is stored."""
        kb = self.kb
        for channel, payload in (("visual", visual), ("audio", audio)):
            if channel == kb.attention.focus:
                continue
            hit = kb.store.find_match(payload, kb.config)
            if hit is None:
                continue
            self.pset.background_active = build_futures(
                [hit[0]], kb.trees, kb.store, kb.config, kb.tick,
                cap=kb.config.k_background,
            )

    def _set_attention(self, target: str, cause: str) -> Optional[NodeId]:
        kb = self.kb
        if kb.attention.focus == target:
            return None
        kb.attention.focus = target
        if target == "thought":
            self._thought_budget = kb.config.thought_budget
        node = kb.record_action(AttentionAction(target))
        self._emit("attention_shift", to=target, cause=cause, node=str(node))
        self._emit_captured(node, source="action", new=False)
        return node

    def _pending_sense_node(self) -> bool:
        return bool(self.kb.config.emit_sense_nodes and self.kb.sense_changes())

    def _emit_sense_node(self) -> NodeId:
        kb = self.kb
        sense, level = kb.sense_changes()[0]
        node = kb.record_action(InternalSenseReading(sense, level))
        kb.mark_sense_emitted(sense, level)
        self._emit_captured(node, source="sense", new=False)
        return node

    def _decision_due(self) -> bool:
        kb = self.kb
        if not self.repertoire or kb.attention.focus == "thought":
            return False
        if kb.config.action_interval <= 0 or kb.tick % kb.config.action_interval != 0:
            return False
        last = kb.trace.last()
        return last is not None and last.node.type_tag in SENSORY_TYPES

    def _decide(self) -> Optional[NodeId]:
        kb = self.kb
        best = select_action(self.pset)
        p_explore = explore_probability(best, kb.config)
        use_best = best is not None and (p_explore <= 0.0 or kb.rng.random() >= p_explore)
        if use_best:
            payload = kb.store.payload(best.node)
            node = kb.record_action(payload)
            line = f"{kb.tick} DECISION best={kb.store.label(node)} expected={best.expected:.6g}"
            self._emit(
                "action_taken",
                node=str(node), label=kb.store.label(node), mode="learned",
                expected=best.expected, line=line,
            )
        else:
            if not self.repertoire:
                return None
            payload = explore(
                self.repertoire, kb.rng, kb.config.explore_weights, kb.attention.focus
            )
            node = kb.record_action(payload)
            line = f"{kb.tick} DECISION EXPLORE {kb.store.label(node)}"
            self._emit(
                "action_taken",
                node=str(node), label=kb.store.label(node), mode="explore", line=line,
            )
        self.action_log.append(line)
        self._emit_captured(node, source="action", new=False)
        self._apply_action_effects(node)
        return node

    def _apply_action_effects(self, node: NodeId) -> None:
        kb = self.kb
        payload = kb.store.payload(node)
        if isinstance(payload, SpeechAction):
            self.world.echo_speech(payload, kb.tick)
        elif isinstance(payload, FocusAction):
            cx, cy, side = kb.attention.visual_focus
            moved = (cx + payload.dx, cy + payload.dy, side + payload.dzoom)
            kb.attention.visual_focus = self.world.clamp_focus(moved)
        elif isinstance(payload, AttentionAction):
            kb.attention.focus = payload.target
            if payload.target == "thought":
                self._thought_budget = kb.config.thought_budget
            self._emit("attention_shift", to=payload.target, cause="action", node=str(node))

    def _thought_tick(self) -> Optional[NodeId]:
        kb = self.kb
        if self._thought_budget > 0 and len(self.pset.active) > 1:
            node = thought_once(kb, self.pset)
            self._thought_budget -= 1
            if node is not None:
                self._emit(
                    "projection_frame",
                    node=str(node), index=len(kb.canvas.frame_nodes) - 1,
                )
                self._emit_captured(node, source="thought", new=True)
                return node
        # episode over: return to the channel with the larger recent change
        target = "visual"
        if self._prev_background.get("audio", 0.0) > self._prev_background.get("visual", 0.0):
            target = "audio"
        self._thought_budget = 0
        return self._set_attention(target, cause="thought-exit")

    def _capture(self, payload, channel: str) -> NodeId:
        kb = self.kb
        hit = kb.store.find_match(payload, kb.config)
        if hit is not None:
            node, _dist = hit
            kb.append_trace(node)
            self._emit("match_found", node=str(node), distance=hit[1], channel=channel)
            self._emit_captured(node, source=channel, new=False)
        else:
            node = kb.store.put_node(payload, kb.tick)
            kb.append_trace(node)
            self._emit_captured(node, source=channel, new=True)
        return node

    def _emit_captured(self, node: NodeId, source: str, new: bool) -> None:
        data = {
            "node": str(node),
            "label": self.kb.store.label(node),
            "source": source,
            "new": new,
            "p_net": self.kb.pp.p_net,
        }
        # actions/senses always carry their payload so a log replay can
        # rebuild the KB; sensory payloads ride along only when new
        if new or node.type_tag not in SENSORY_TYPES:
            data["payload_b64"] = base64.b64encode(
                encode_payload(self.kb.store.payload(node))
            ).decode("ascii")
        self._emit("node_captured", **data)

    # --- prediction + offline ---------------------------------------------------------

    def _maintain_predictions(self, incoming: NodeId) -> None:
        kb = self.kb
        self.pset.observe(incoming, kb.store, kb.config)
        if refresh_policy(self.pset, kb.config):
            recent = kb.trace.recent_nodes(kb.config.context_depth)
            self.pset.active = build_futures(
                recent, kb.trees, kb.store, kb.config, kb.tick
            )
            self.pset.last_conformed = True
            if self.pset.active:
                self._emit(
                    "future_built",
                    count=len(self.pset.active),
                    anchors=[str(t.anchor) for t in self.pset.active],
                    depths=[t.context_depth for t in self.pset.active],
                )

    def _run_offline_pass(self) -> None:
        if self.offline:
            raise OfflineError("generalization already running")
        self.offline = True
        try:
            report = self.kb.run_generalization()
        finally:
            self.offline = False
        self.pset.active = []
        self.pset.background_active = []
        self._emit(
            "generalization_report",
            lines=report.lines,
            merged=[str(n) for n in report.merged_nodes],
            groups=[str(n) for n in report.group_nodes],
            reductions=report.reductions,
            parameterized=report.parameterized,
            deleted=[str(n) for n in report.deleted],
        )

    # --- introspection -----------------------------------------------------------------

    def state_view(self) -> dict:
        kb = self.kb
        return {
            "tick": kb.tick,
            "attention": kb.attention.focus,
            "visual_focus": list(kb.attention.visual_focus),
            "p_net": kb.pp.p_net,
            "senses": dict(kb.pp.levels),
            "happiness": happiness(self.pset),
            "active_trees": [
                {
                    "anchor": str(t.anchor),
                    "context_depth": t.context_depth,
                    "lines": t.render(label=kb.store.label, depth=4),
                }
                for t in self.pset.active
            ],
            "offline": self.offline,
            "trace_length": len(kb.trace),
            "node_count": len(kb.store),
        }
