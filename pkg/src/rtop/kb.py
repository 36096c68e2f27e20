"""Knowledge base aggregate: store + trees + trace + internal state.

Owns the single mutation path (capture/record) that keeps trace entries,
tree folding, indexes and the pleasure-pain sampling consistent.
"""

from __future__ import annotations

import hashlib
from typing import Optional

import numpy as np

from .config import SessionConfig
from .innovation import ProjectionCanvas
from .motivation import AttentionState, PleasurePainState
from .nodes import GroupSpec, JumpSpec, NodeId, SuperimposeSpec
from .store import MemoryStore
from .trace import ObservationTrace, TraceEntry
from .trees import TreeStore


class KnowledgeBase:
    def __init__(self, config: Optional[SessionConfig] = None, rng_state: Optional[dict] = None):
        self.config = config or SessionConfig()
        self.store = MemoryStore()
        self.trees = TreeStore(max_depth=self.config.path_length - 1)
        self.trace = ObservationTrace(
            path_length=self.config.path_length,
            stride=self.config.stride,
            jump_hop=self.config.jump_hop,
            jump_enabled=self.config.jump_enabled,
            jump_node=self._jump_node,
        )
        self.pp = PleasurePainState(self.config.coefficients)
        self.attention = AttentionState(
            focus=self.config.initial_attention,
            visual_focus=tuple(self.config.initial_focus),
        )
        self.tick = 0
        self.canvas = ProjectionCanvas()
        self.rng = np.random.default_rng(self.config.seed)
        if rng_state is not None:
            self.rng.bit_generator.state = rng_state
        self._last_emitted_levels = dict(self.pp.levels)

    def _jump_node(self) -> NodeId:
        return self.store.intern_node(JumpSpec(self.config.jump_hop), self.tick)

    # --- trace mutation -------------------------------------------------------

    def append_trace(self, node_id: NodeId) -> TraceEntry:
        entry = TraceEntry(node_id, self.tick, self.pp.p_net)
        self.trace.append(entry)
        for path in self.trace.drain_paths():
            self.trees.fold_path(path.nodes, path.deltas)
        return entry

    def capture(self, payload: object) -> tuple[NodeId, bool]:
        """Store-or-match a sensory payload and append it to the trace."""
        hit = self.store.find_match(payload, self.config)
        if hit is not None:
            node_id, matched = hit[0], True
        else:
            node_id, matched = self.store.put_node(payload, self.tick), False
        self.append_trace(node_id)
        return node_id, matched

    def record_action(self, payload: object) -> NodeId:
        node_id = self.store.intern_node(payload, self.tick)
        self.append_trace(node_id)
        return node_id

    def sense_changes(self) -> list[tuple[str, float]]:
        """Discrete level changes since the last emitted sense nodes."""
        changes = []
        for sense, level in self.pp.levels.items():
            if level != self._last_emitted_levels.get(sense):
                changes.append((sense, level))
        return changes

    def mark_sense_emitted(self, sense: str, level: float) -> None:
        self._last_emitted_levels[sense] = level

    # --- reference integrity ----------------------------------------------------

    def references(self, node_id: NodeId) -> bool:
        """Whether a surviving observation path (or trace entry) mentions the node."""
        if self.trees.references(node_id):
            return True
        return any(e.node == node_id for e in self.trace.entries)

    def delete_nodes(self, ids: list[NodeId]) -> int:
        return self.store.delete_nodes(ids, is_referenced=self.references)

    def run_generalization(self):
        from .generalize import run_generalization

        return run_generalization(self)

    # --- identity ---------------------------------------------------------------

    def fingerprint(self, include_rng: bool = False) -> str:
        """Digest of the KB content; replayed KBs compare equal without RNG."""
        from .snapshot import kb_to_bytes

        blob = kb_to_bytes(self, include_rng=include_rng)
        return hashlib.sha256(blob).hexdigest()

    def orphan_candidates(self) -> list[NodeId]:
        """Nodes no path, group, or superimpose spec references."""
        held: set[NodeId] = set()
        for node in self.store.nodes.values():
            if isinstance(node.payload, GroupSpec):
                held.update(node.payload.members)
            if isinstance(node.payload, SuperimposeSpec):
                for part in (node.payload.base, node.payload.overlay):
                    if isinstance(part, NodeId):
                        held.add(part)
        out = [
            nid
            for nid in self.store.nodes
            if nid not in held and not self.references(nid)
        ]
        out.sort()
        return out
