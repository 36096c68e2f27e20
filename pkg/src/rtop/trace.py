"""Foreground observation trace and its breakdown into observation paths.

Direct paths of fixed length start at every stride offset of a moving
window; jump paths hop a fixed number of nodes to give long-horizon
structure. Each emitted path carries per-edge pleasure-pain deltas taken
from the trace entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from .errors import NonMonotonicTickError
from .nodes import ACTION_TYPES, NodeId

JUMP_MAX_RAW = 5
JUMP_MIN_RAW = 3


@dataclass(frozen=True)
class TraceEntry:
    node: NodeId
    tick: int
    p_net_at: float


@dataclass
class ObservationPath:
    nodes: list[NodeId]
    deltas: list[float]  # len(nodes) - 1
    kind: str            # "direct" | "jump"
    origin: int          # trace offset of the indexing node


class ObservationTrace:
    def __init__(
        self,
        path_length: int = 16,
        stride: int = 4,
        jump_hop: int = 5,
        jump_enabled: bool = True,
        jump_node: Optional[Callable[[], NodeId]] = None,
    ):
        self.path_length = path_length
        self.stride = stride
        self.jump_hop = jump_hop
        self.jump_enabled = jump_enabled
        self._jump_node = jump_node
        self.entries: list[TraceEntry] = []
        self._next_direct = 0
        self._next_jump = 0
        self._pending: list[ObservationPath] = []

    def __len__(self) -> int:
        return len(self.entries)

    def last(self) -> Optional[TraceEntry]:
        return self.entries[-1] if self.entries else None

    def recent_nodes(self, count: int) -> list[NodeId]:
        return [e.node for e in self.entries[-count:]]

    def append(self, entry: TraceEntry) -> None:
        if self.entries and entry.tick <= self.entries[-1].tick:
            raise NonMonotonicTickError(
                f"tick {entry.tick} not after {self.entries[-1].tick}"
            )
        self.entries.append(entry)
        self._emit_due()

    def drain_paths(self) -> list[ObservationPath]:
        out, self._pending = self._pending, []
        return out

    def clear(self) -> None:
        """Drop all entries; window alignment restarts at offset 0."""
        self.entries = []
        self._next_direct = 0
        self._next_jump = 0
        self._pending = []

    # --- windowing ------------------------------------------------------------

    def _emit_due(self) -> None:
        n = len(self.entries)
        while self._next_direct + self.path_length <= n:
            self._pending.append(self._direct_path(self._next_direct))
            self._next_direct += self.stride
        if not self.jump_enabled:
            return
        # emit eagerly only at full horizon (5 raw nodes); shorter tails are
        # flushed when the trace is about to clear
        span = (JUMP_MAX_RAW - 1) * (self.jump_hop + 1)
        while self._next_jump + span <= n - 1:
            path = self._jump_path(self._next_jump)
            if path is not None:
                self._pending.append(path)
            self._next_jump += self.stride

    def flush_jump_tails(self) -> list[ObservationPath]:
        """Emit the remaining jump anchors that still reach at least the
        minimum raw-node count; used right before the trace clears."""
        if not self.jump_enabled:
            return []
        n = len(self.entries)
        min_span = (JUMP_MIN_RAW - 1) * (self.jump_hop + 1)
        while self._next_jump + min_span <= n - 1:
            path = self._jump_path(self._next_jump)
            if path is not None:
                self._pending.append(path)
            self._next_jump += self.stride
        return self.drain_paths()

    def _direct_path(self, start: int) -> ObservationPath:
        window = self.entries[start:start + self.path_length]
        nodes = [e.node for e in window]
        deltas = [b.p_net_at - a.p_net_at for a, b in zip(window, window[1:])]
        return ObservationPath(nodes, deltas, "direct", start)

    def _jump_path(self, start: int) -> Optional[ObservationPath]:
        anchor = self.entries[start]
        if anchor.node.type_tag in ACTION_TYPES:
            return None
        hop = self.jump_hop + 1
        picks = [self.entries[i] for i in range(start, len(self.entries), hop)][:JUMP_MAX_RAW]
        if len(picks) < JUMP_MIN_RAW:
            return None
        jump = self._jump_node() if self._jump_node else NodeId.parse(f"JMP.{self.jump_hop}")
        nodes: list[NodeId] = [picks[0].node]
        deltas: list[float] = []
        for prev, nxt in zip(picks, picks[1:]):
            nodes.append(jump)
            deltas.append(0.0)  # the hop edge into JMP carries no change
            nodes.append(nxt.node)
            deltas.append(nxt.p_net_at - prev.p_net_at)
        return ObservationPath(nodes, deltas, "jump", start)

    def export_lines(self) -> list[str]:
        return [f"{e.tick} {e.node} p_net={e.p_net_at:g}" for e in self.entries]
