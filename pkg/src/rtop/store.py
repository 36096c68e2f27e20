"""Memory store: node ownership, serial assignment, summary indexes, matching.

put_node always mints a fresh id (dedup of sensory captures happens through
find_match); intern_node reuses ids for action/jump/group/superimpose/sense
payloads so repeated actions accumulate counts on one node.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional

from .config import SessionConfig
from .errors import DanglingReferenceError, MalformedPayloadError, UnknownNodeError
from .nodes import (
    AttentionAction,
    FocusAction,
    FocusMergedData,
    GroupSpec,
    InternalSenseReading,
    JumpSpec,
    MemoryNode,
    NodeId,
    NodeType,
    SpeechAction,
    SuperimposeSpec,
    payload_label,
)
from .percepts import (
    AudioData,
    AudioMergedData,
    ImageData,
    ImageMergedData,
    audio_masked_distance,
    audio_summary,
    image_distance,
    masked_distance,
    match_audio_masked,
    match_image_masked,
    payload_summary,
)

_PAYLOAD_TYPES = {
    NodeType.IMAGE: (ImageData, ImageMergedData),
    NodeType.AUDIO: (AudioData, AudioMergedData),
    NodeType.FOCUS: (FocusAction, FocusMergedData),
    NodeType.ATTENTION: (AttentionAction,),
    NodeType.SPEECH: (SpeechAction,),
    NodeType.JUMP: (JumpSpec,),
    NodeType.GROUP: (GroupSpec,),
    NodeType.SUPERIMPOSE: (SuperimposeSpec,),
    NodeType.SENSE: (InternalSenseReading,),
}

_MERGED_PAYLOADS = (ImageMergedData, AudioMergedData, FocusMergedData)


def node_type_of(payload: object) -> NodeType:
    for tag, kinds in _PAYLOAD_TYPES.items():
        if isinstance(payload, kinds):
            return tag
    raise MalformedPayloadError(f"unsupported payload {type(payload).__name__}")


def _intern_key(payload: object):
    """Hashable identity for payloads that are deduplicated; None otherwise."""
    if isinstance(payload, FocusAction):
        return ("IFA", payload.dx, payload.dy, payload.dzoom)
    if isinstance(payload, AttentionAction):
        return ("ATT", payload.target)
    if isinstance(payload, SpeechAction):
        return ("SPK", payload.phones)
    if isinstance(payload, JumpSpec):
        return ("JMP", payload.hop)
    if isinstance(payload, GroupSpec):
        return ("GRP", payload.members, payload.is_wildcard)
    if isinstance(payload, SuperimposeSpec):
        return ("SIA", payload.base, payload.overlay)
    if isinstance(payload, InternalSenseReading):
        return ("SNS", payload.sense, payload.level)
    return None


class MemoryStore:
    def __init__(self):
        self.nodes: dict[NodeId, MemoryNode] = {}
        self.serials: dict[tuple[NodeType, bool], int] = {}
        self.index: dict[NodeId, dict[str, float]] = {}
        self._interned: dict[object, NodeId] = {}
        self._merge_registry: dict[tuple, NodeId] = {}

    # --- basic ownership ----------------------------------------------------

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, node_id: NodeId) -> bool:
        return node_id in self.nodes

    def get(self, node_id: NodeId) -> MemoryNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(str(node_id)) from None

    def payload(self, node_id: NodeId) -> object:
        return self.get(node_id).payload

    def label(self, node_id: NodeId) -> str:
        node = self.nodes.get(node_id)
        if node is None:
            return str(node_id)
        return payload_label(node_id, node.payload)

    def next_serial(self, tag: NodeType, merged: bool) -> int:
        return self.serials.get((tag, merged), 0) + 1

    def put_node(self, payload: object, created_at: int = 0) -> NodeId:
        tag = node_type_of(payload)
        merged = isinstance(payload, _MERGED_PAYLOADS)
        serial = self.next_serial(tag, merged)
        self.serials[(tag, merged)] = serial
        node_id = NodeId(tag, serial, merged)
        self.nodes[node_id] = MemoryNode(node_id, payload, created_at)
        self._index_node(node_id, payload)
        key = _intern_key(payload)
        if key is not None and key not in self._interned:
            self._interned[key] = node_id
        if merged:
            prov = self._provenance_key(payload)
            if prov is not None:
                self._merge_registry[prov] = node_id
        return node_id

    def intern_node(self, payload: object, created_at: int = 0) -> NodeId:
        """Reuse the node for an identical action/jump/group/etc payload."""
        key = _intern_key(payload)
        if key is None:
            raise MalformedPayloadError(f"{type(payload).__name__} payloads are not interned")
        existing = self._interned.get(key)
        if existing is not None:
            return existing
        return self.put_node(payload, created_at)

    def replace_payload(self, node_id: NodeId, payload: object) -> None:
        """In-place payload update (merged nodes grow provenance); re-indexes."""
        node = self.get(node_id)
        if node_type_of(payload) is not node_id.type_tag:
            raise MalformedPayloadError("replacement payload changes node type")
        old_prov = self._provenance_key(node.payload)
        if old_prov is not None:
            self._merge_registry.pop(old_prov, None)
        node.payload = payload
        self._index_node(node_id, payload)
        new_prov = self._provenance_key(payload)
        if new_prov is not None:
            self._merge_registry[new_prov] = node_id

    def _provenance_key(self, payload: object) -> Optional[tuple]:
        if isinstance(payload, (ImageMergedData, AudioMergedData, FocusMergedData)):
            ids = tuple(sorted(str(pid) for pid, _ in payload.provenance if pid is not None))
            if ids:
                return (node_type_of(payload), ids)
        return None

    def merged_for_provenance(self, tag: NodeType, source_ids: Iterable[NodeId]) -> Optional[NodeId]:
        key = (tag, tuple(sorted(str(s) for s in source_ids)))
        return self._merge_registry.get(key)

    def _index_node(self, node_id: NodeId, payload: object) -> None:
        summary = payload_summary(payload)
        if summary is not None:
            self.index[node_id] = summary
        else:
            self.index.pop(node_id, None)

    # --- retrieval ------------------------------------------------------------

    def candidates(self, probe: object, leeway: dict) -> list[NodeId]:
        """All same-type nodes whose every indexed attribute is within +-leeway."""
        probe_summary = payload_summary(probe)
        if probe_summary is None:
            raise MalformedPayloadError("probe type has no summary attributes")
        tag = node_type_of(probe)
        hits = []
        for node_id, attrs in self.index.items():
            if node_id.type_tag is not tag:
                continue
            if all(abs(attrs[k] - probe_summary[k]) <= leeway[k] for k in probe_summary):
                hits.append(node_id)
        hits.sort()
        return hits

    def leeway_for(self, probe: object, config: SessionConfig) -> dict:
        if isinstance(probe, (ImageData, ImageMergedData)):
            return {
                "mean_lightness": config.index_leeway_mean_lightness,
                "var_lightness": config.index_leeway_var_lightness,
            }
        summary = audio_summary(probe)
        f = config.audio_index_leeway_factor
        return {k: max(abs(v) * f, 1e-9) for k, v in summary.items()}

    def find_match(self, probe: object, config: SessionConfig) -> Optional[tuple[NodeId, float]]:
        """Best matching stored node for a sensory probe.

        Candidates come from the index; the full comparison ranks by distance
        with ties broken by lowest serial. Merged nodes with an empty mask
        match anything but rank below every concrete match.
        """
        ranked = []
        tolerances = {
            "var_amplitude": config.audio_tol_var_amplitude,
            "mean_cross_rate": config.audio_tol_mean_cross_rate,
        }
        for node_id in self.candidates(probe, self.leeway_for(probe, config)):
            payload = self.nodes[node_id].payload
            wildcard = 0
            if isinstance(probe, ImageData):
                if isinstance(payload, ImageData):
                    dist = image_distance(probe, payload)
                    if dist > config.image_match_threshold:
                        continue
                elif isinstance(payload, ImageMergedData):
                    if not match_image_masked(probe, payload):
                        continue
                    dist = masked_distance(probe, payload)
                    if not payload.must_match.any():
                        wildcard = 1
                else:
                    continue
            elif isinstance(probe, AudioData):
                if isinstance(payload, AudioData):
                    from .percepts import audio_distance

                    dist = audio_distance(probe, payload, tolerances)
                    if dist > 1.0:
                        continue
                elif isinstance(payload, AudioMergedData):
                    if not match_audio_masked(probe, payload):
                        continue
                    dist = audio_masked_distance(probe, payload)
                else:
                    continue
            else:
                return None
            ranked.append((wildcard, dist, node_id.merged, node_id.serial, node_id))
        if not ranked:
            return None
        ranked.sort(key=lambda r: r[:4])
        best = ranked[0]
        return best[4], best[1]

    # --- deletion --------------------------------------------------------------

    def delete_nodes(self, ids: list[NodeId], is_referenced: Optional[Callable[[NodeId], bool]] = None) -> int:
        """Remove nodes and their index entries; serials are never reused.

        The caller must have rewritten observation paths first; a surviving
        reference (group membership here, plus whatever the callback checks)
        raises DanglingReferenceError.
        """
        ids = list(ids)
        for node_id in ids:
            if node_id not in self.nodes:
                raise UnknownNodeError(str(node_id))
        doomed = set(ids)
        for node_id, node in self.nodes.items():
            if node_id in doomed:
                continue
            if isinstance(node.payload, GroupSpec):
                held = doomed.intersection(node.payload.members)
                if held:
                    raise DanglingReferenceError(f"{node_id} still groups {sorted(map(str, held))}")
            if isinstance(node.payload, SuperimposeSpec):
                for part in (node.payload.base, node.payload.overlay):
                    if part in doomed:
                        raise DanglingReferenceError(f"{node_id} still references {part}")
        if is_referenced is not None:
            for node_id in ids:
                if is_referenced(node_id):
                    raise DanglingReferenceError(f"{node_id} still referenced by a surviving path")
        count = 0
        for node_id in ids:
            node = self.nodes.pop(node_id, None)
            if node is None:
                continue
            self.index.pop(node_id, None)
            key = _intern_key(node.payload)
            if key is not None and self._interned.get(key) == node_id:
                del self._interned[key]
            prov = self._provenance_key(node.payload)
            if prov is not None and self._merge_registry.get(prov) == node_id:
                del self._merge_registry[prov]
            count += 1
        return count

    # --- group helpers -----------------------------------------------------------

    def groups_containing(self, node_id: NodeId) -> list[NodeId]:
        out = [
            gid
            for gid, node in self.nodes.items()
            if isinstance(node.payload, GroupSpec) and node_id in node.payload.members
        ]
        out.sort()
        return out

    def iter_type(self, tag: NodeType) -> list[NodeId]:
        out = [nid for nid in self.nodes if nid.type_tag is tag]
        out.sort()
        return out
