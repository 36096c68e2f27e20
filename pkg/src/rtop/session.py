"""Scripted sessions: run, inspect, replay.

A session is (config, script, optional KB in) -> (KB out, event log); the
same inputs always produce byte-identical outputs.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from typing import Optional

from .agent import Agent, AgentEvent
from .config import SessionConfig
from .environment import StimulusLibrary, StimulusScript, World, parse_script
from .errors import UnknownNodeError
from .kb import KnowledgeBase
from .motivation import ActionRepertoire
from .nodes import NodeId
from .snapshot import decode_payload


@dataclass
class SessionResult:
    kb: KnowledgeBase
    events: list = field(default_factory=list)
    action_log: list = field(default_factory=list)
    agent: object = None  # live Agent, for inspecting active predictions

    def event_log_text(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)


def run_session(
    config: SessionConfig,
    script: StimulusScript | str,
    library: Optional[StimulusLibrary] = None,
    kb: Optional[KnowledgeBase] = None,
    repertoire: Optional[ActionRepertoire] = None,
) -> SessionResult:
    if isinstance(script, str):
        script = parse_script(script)
    library = library or StimulusLibrary()
    kb = kb or KnowledgeBase(config)
    world = World(script, library, config, start_tick=kb.tick)
    events: list[AgentEvent] = []
    agent = Agent(kb, world, repertoire=repertoire, sink=events.append)
    end = kb.tick + script.end_tick
    agent.run(until=end)
    return SessionResult(kb=kb, events=events, action_log=list(agent.action_log), agent=agent)


def inspect(kb: KnowledgeBase, node: NodeId | str, depth: Optional[int] = None) -> str:
    """Text rendering of a node's observation tree with [probability, mean
    delta] per edge; empty when the node has no tree."""
    node_id = NodeId.parse(node) if isinstance(node, str) else node
    if node_id not in kb.store:
        raise UnknownNodeError(str(node_id))
    tree = kb.trees.get(node_id)
    if tree is None or tree.is_empty():
        return ""
    return "\n".join(tree.render(label=kb.store.label, depth=depth))


def replay_events(events: list[AgentEvent], config: SessionConfig) -> KnowledgeBase:
    """Rebuild a KB from node_captured + reward + generalization events.

    Captures carry payload bytes when they created nodes (and always for
    action/sense nodes); rewards and the hunger schedule reproduce the
    pleasure-pain curve, so trace deltas land identically.
    """
    kb = KnowledgeBase(config)
    by_tick: dict[int, list[AgentEvent]] = {}
    last_tick = 0
    for event in events:
        by_tick.setdefault(event.tick, []).append(event)
        last_tick = max(last_tick, event.tick)

    for tick in range(1, last_tick + 1):
        kb.tick = tick
        if config.hunger_interval_ticks and tick % config.hunger_interval_ticks == 0:
            kb.pp.hunger_step()
        for event in sorted(by_tick.get(tick, []), key=lambda e: e.seq):
            if event.kind == "reward_applied":
                kb.pp.apply_reward(event.data["reward"], event.data["amount"])
            elif event.kind == "node_captured":
                node_id = NodeId.parse(event.data["node"])
                if node_id not in kb.store:
                    blob = event.data.get("payload_b64")
                    if blob is None:
                        raise UnknownNodeError(f"replay missing payload for {node_id}")
                    payload = decode_payload(base64.b64decode(blob))
                    if node_id.type_tag.value in ("IMG", "AUD") and not node_id.merged:
                        stored = kb.store.put_node(payload, tick)
                    else:
                        stored = kb.store.intern_node(payload, tick)
                    if stored != node_id:
                        raise UnknownNodeError(f"replay id drift: {stored} != {node_id}")
                kb.append_trace(node_id)
                replayed = kb.store.payload(node_id)
                from .nodes import AttentionAction, InternalSenseReading

                if isinstance(replayed, AttentionAction):
                    kb.attention.focus = replayed.target
                elif isinstance(replayed, InternalSenseReading):
                    kb.mark_sense_emitted(replayed.sense, replayed.level)
            elif event.kind == "generalization_report":
                kb.run_generalization()
            elif event.kind == "reward_sense":
                pass
    return kb
