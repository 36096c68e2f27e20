"""Memory node identity and the non-sensory payload types.

Node ids are `<TYPE>.<serial>` with a separate `<TYPE>.M.<serial>` namespace
for merged nodes, so raw vs merged provenance stays visible in logs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

from .errors import MalformedPayloadError


class NodeType(str, Enum):
    IMAGE = "IMG"
    AUDIO = "AUD"
    FOCUS = "IFA"
    ATTENTION = "ATT"
    SPEECH = "SPK"
    JUMP = "JMP"
    GROUP = "GRP"
    SUPERIMPOSE = "SIA"
    SENSE = "SNS"


ACTION_TYPES = {NodeType.FOCUS, NodeType.ATTENTION, NodeType.SPEECH}
SENSORY_TYPES = {NodeType.IMAGE, NodeType.AUDIO}

_ATT_LABELS = {"visual": "IMG", "audio": "AUD", "thought": "THT"}


@dataclass(frozen=True, order=True)
class NodeId:
    type_tag: NodeType
    serial: int
    merged: bool = False

    def __str__(self) -> str:
        if self.merged:
            return f"{self.type_tag.value}.M.{self.serial}"
        return f"{self.type_tag.value}.{self.serial}"

    @classmethod
    def parse(cls, text: str) -> "NodeId":
        parts = text.strip().split(".")
        try:
            tag = NodeType(parts[0])
            if len(parts) == 2:
                return cls(tag, int(parts[1]))
            if len(parts) == 3 and parts[1] == "M":
                return cls(tag, int(parts[2]), merged=True)
        except (ValueError, KeyError):
            pass
        raise MalformedPayloadError(f"not a node id: {text!r}")


class Placeholder(Enum):
    P_IMG = "P_IMG"
    P_PRECEDING = "P_PRECEDING"
    P_FOLLOWING = "P_FOLLOWING"


@dataclass(frozen=True)
class FocusAction:
    """Focus move: dx right, dy down, dzoom grows the focus square."""

    dx: int
    dy: int
    dzoom: int

    def __post_init__(self):
        for v in (self.dx, self.dy, self.dzoom):
            if not isinstance(v, int):
                raise MalformedPayloadError("focus deltas must be integers")

    @property
    def is_identity(self) -> bool:
        return self.dx == 0 and self.dy == 0 and self.dzoom == 0


@dataclass(frozen=True)
class FocusMergedData:
    """Merged focus action: mean deltas with a tolerance box."""

    center: tuple[float, float, float]
    tol: tuple[float, float, float]
    provenance: tuple[tuple[Union[NodeId, None], FocusAction], ...] = ()

    def contains(self, action: FocusAction) -> bool:
        deltas = (action.dx, action.dy, action.dzoom)
        return all(abs(d - c) <= t for d, c, t in zip(deltas, self.center, self.tol))


@dataclass(frozen=True)
class AttentionAction:
    target: str  # visual | audio | thought

    def __post_init__(self):
        if self.target not in _ATT_LABELS:
            raise MalformedPayloadError(f"unknown attention target {self.target!r}")


@dataclass(frozen=True)
class SpeechAction:
    phones: tuple[str, ...]

    def __post_init__(self):
        if not self.phones:
            raise MalformedPayloadError("speech action needs at least one phone")


@dataclass(frozen=True)
class JumpSpec:
    hop: int

    def __post_init__(self):
        if self.hop < 1:
            raise MalformedPayloadError("jump hop must be >= 1")


@dataclass(frozen=True)
class GroupSpec:
    members: tuple[NodeId, ...]  # sorted, unique, never group nodes
    is_wildcard: bool = False

    def __post_init__(self):
        if len(set(self.members)) != len(self.members):
            raise MalformedPayloadError("group members must be distinct")
        if len(self.members) < 2 and not self.is_wildcard:
            raise MalformedPayloadError("group needs at least two members")
        if any(m.type_tag is NodeType.GROUP for m in self.members):
            raise MalformedPayloadError("groups do not nest")


@dataclass(frozen=True)
class SuperimposeSpec:
    base: Union[NodeId, Placeholder]
    overlay: Union[NodeId, Placeholder]

    @property
    def placeholders(self) -> tuple[Placeholder, ...]:
        return tuple(p for p in (self.base, self.overlay) if isinstance(p, Placeholder))


@dataclass(frozen=True)
class InternalSenseReading:
    sense: str
    level: float


@dataclass
class MemoryNode:
    id: NodeId
    payload: object
    created_at: int = 0


def payload_label(node_id: NodeId, payload: object) -> str:
    """Symbolic display name used in logs and tree renderings."""
    if isinstance(payload, FocusAction):
        return f"IFA.{payload.dx},{payload.dy},{payload.dzoom}"
    if isinstance(payload, FocusMergedData):
        c = payload.center
        return f"IFA.M.{c[0]:g},{c[1]:g},{c[2]:g}"
    if isinstance(payload, AttentionAction):
        return f"ATT.{_ATT_LABELS[payload.target]}"
    if isinstance(payload, SpeechAction):
        return "SPK." + "-".join(payload.phones)
    if isinstance(payload, JumpSpec):
        return f"JMP.{payload.hop}"
    if isinstance(payload, InternalSenseReading):
        return f"SNS.{payload.sense.upper()}.{payload.level:g}"
    if isinstance(payload, SuperimposeSpec):
        def part(p):
            return p.value if isinstance(p, Placeholder) else str(p)

        return f"SIA:[{part(payload.base)},{part(payload.overlay)}]"
    return str(node_id)
