"""Versioned binary KB snapshots with bit-exact round trips.

Layout: header {magic, version, tick}, config JSON, RNG state, pleasure-pain
and attention state, serial counters, node table (type-tagged payload
blobs), index table, observation trees, trace, bookkeeping. All integers are
little-endian; floats are IEEE-754 doubles, so load(save(kb)) is exact.
"""

from __future__ import annotations

import io
import json
import struct
from typing import BinaryIO, Optional

import numpy as np

from .config import SessionConfig
from .errors import MalformedPayloadError
from .nodes import (
    AttentionAction,
    FocusAction,
    FocusMergedData,
    GroupSpec,
    InternalSenseReading,
    JumpSpec,
    NodeId,
    NodeType,
    Placeholder,
    SpeechAction,
    SuperimposeSpec,
)
from .percepts import (
    AUDIO_SAMPLES,
    AudioData,
    AudioMergedData,
    IMAGE_SIDE,
    ImageData,
    ImageMergedData,
)
from .trees import Connection, ObservationTree

MAGIC = b"RTOPKB\x00\x01"
FORMAT_VERSION = 1

_TYPE_ORDER = list(NodeType)
_TYPE_INDEX = {t: i for i, t in enumerate(_TYPE_ORDER)}

_GRID_BYTES = IMAGE_SIDE * IMAGE_SIDE * 3


def _w(fh: BinaryIO, fmt: str, *values) -> None:
    fh.write(struct.pack("<" + fmt, *values))


def _r(fh: BinaryIO, fmt: str):
    size = struct.calcsize("<" + fmt)
    return struct.unpack("<" + fmt, fh.read(size))


def _w_bytes(fh: BinaryIO, data: bytes) -> None:
    _w(fh, "I", len(data))
    fh.write(data)


def _r_bytes(fh: BinaryIO) -> bytes:
    (n,) = _r(fh, "I")
    return fh.read(n)


def _w_str(fh: BinaryIO, text: str) -> None:
    _w_bytes(fh, text.encode("utf-8"))


def _r_str(fh: BinaryIO) -> str:
    return _r_bytes(fh).decode("utf-8")


def _w_node_id(fh: BinaryIO, node_id: Optional[NodeId]) -> None:
    if node_id is None:
        _w(fh, "B", 0xFF)
        return
    _w(fh, "BBQ", _TYPE_INDEX[node_id.type_tag], 1 if node_id.merged else 0, node_id.serial)


def _r_node_id(fh: BinaryIO) -> Optional[NodeId]:
    (tag,) = _r(fh, "B")
    if tag == 0xFF:
        return None
    merged, serial = _r(fh, "BQ")
    return NodeId(_TYPE_ORDER[tag], serial, bool(merged))


# --- payload codec (also used for event-log replay) -------------------------------


def encode_payload(payload: object) -> bytes:
    fh = io.BytesIO()
    if isinstance(payload, ImageData):
        _w(fh, "B", 0x01)
        fh.write(payload.hsl.tobytes())
    elif isinstance(payload, ImageMergedData):
        _w(fh, "B", 0x02)
        fh.write(payload.center_hsl.astype("<f4").tobytes())
        fh.write(payload.l_tol.astype("<f4").tobytes())
        fh.write(payload.must_match.astype(np.uint8).tobytes())
        _w(fh, "B", len(payload.provenance))
        for pid, grid in payload.provenance:
            _w_node_id(fh, pid)
            fh.write(np.asarray(grid, dtype=np.uint8).tobytes())
    elif isinstance(payload, AudioData):
        _w(fh, "B", 0x03)
        fh.write(payload.samples.tobytes())
    elif isinstance(payload, AudioMergedData):
        _w(fh, "B", 0x04)
        _w(fh, "B", len(payload.center))
        for attr in sorted(payload.center):
            _w_str(fh, attr)
            _w(fh, "dd", payload.center[attr], payload.tol[attr])
        _w(fh, "B", len(payload.provenance))
        for pid, samples in payload.provenance:
            _w_node_id(fh, pid)
            fh.write(np.asarray(samples, dtype=np.int8).tobytes())
    elif isinstance(payload, FocusAction):
        _w(fh, "B", 0x05)
        _w(fh, "iii", payload.dx, payload.dy, payload.dzoom)
    elif isinstance(payload, FocusMergedData):
        _w(fh, "B", 0x06)
        _w(fh, "ddd", *payload.center)
        _w(fh, "ddd", *payload.tol)
        _w(fh, "B", len(payload.provenance))
        for pid, action in payload.provenance:
            _w_node_id(fh, pid)
            _w(fh, "iii", action.dx, action.dy, action.dzoom)
    elif isinstance(payload, AttentionAction):
        _w(fh, "B", 0x07)
        _w_str(fh, payload.target)
    elif isinstance(payload, SpeechAction):
        _w(fh, "B", 0x08)
        _w(fh, "B", len(payload.phones))
        for phone in payload.phones:
            _w_str(fh, phone)
    elif isinstance(payload, JumpSpec):
        _w(fh, "B", 0x09)
        _w(fh, "I", payload.hop)
    elif isinstance(payload, GroupSpec):
        _w(fh, "B", 0x0A)
        _w(fh, "B", 1 if payload.is_wildcard else 0)
        _w(fh, "H", len(payload.members))
        for member in payload.members:
            _w_node_id(fh, member)
    elif isinstance(payload, SuperimposeSpec):
        _w(fh, "B", 0x0B)
        for part in (payload.base, payload.overlay):
            if isinstance(part, Placeholder):
                _w(fh, "B", 1)
                _w_str(fh, part.value)
            else:
                _w(fh, "B", 0)
                _w_node_id(fh, part)
    elif isinstance(payload, InternalSenseReading):
        _w(fh, "B", 0x0C)
        _w_str(fh, payload.sense)
        _w(fh, "d", payload.level)
    else:
        raise MalformedPayloadError(f"cannot encode {type(payload).__name__}")
    return fh.getvalue()


def decode_payload(data: bytes) -> object:
    fh = io.BytesIO(data)
    (tag,) = _r(fh, "B")
    if tag == 0x01:
        grid = np.frombuffer(fh.read(_GRID_BYTES), dtype=np.uint8).reshape(IMAGE_SIDE, IMAGE_SIDE, 3)
        return ImageData(grid.copy())
    if tag == 0x02:
        center = np.frombuffer(fh.read(_GRID_BYTES * 4), dtype="<f4").reshape(IMAGE_SIDE, IMAGE_SIDE, 3)
        l_tol = np.frombuffer(fh.read(IMAGE_SIDE * IMAGE_SIDE * 4), dtype="<f4").reshape(IMAGE_SIDE, IMAGE_SIDE)
        mask = np.frombuffer(fh.read(IMAGE_SIDE * IMAGE_SIDE), dtype=np.uint8).reshape(IMAGE_SIDE, IMAGE_SIDE)
        (n,) = _r(fh, "B")
        prov = []
        for _ in range(n):
            pid = _r_node_id(fh)
            grid = np.frombuffer(fh.read(_GRID_BYTES), dtype=np.uint8).reshape(IMAGE_SIDE, IMAGE_SIDE, 3)
            prov.append((pid, grid.copy()))
        return ImageMergedData(center.copy(), l_tol.copy(), mask.astype(bool), tuple(prov))
    if tag == 0x03:
        samples = np.frombuffer(fh.read(AUDIO_SAMPLES), dtype=np.int8)
        return AudioData(samples.copy())
    if tag == 0x04:
        (n_attr,) = _r(fh, "B")
        center, tol = {}, {}
        for _ in range(n_attr):
            attr = _r_str(fh)
            c, t = _r(fh, "dd")
            center[attr] = c
            tol[attr] = t
        (n,) = _r(fh, "B")
        prov = []
        for _ in range(n):
            pid = _r_node_id(fh)
            samples = np.frombuffer(fh.read(AUDIO_SAMPLES), dtype=np.int8)
            prov.append((pid, samples.copy()))
        return AudioMergedData(center, tol, tuple(prov))
    if tag == 0x05:
        dx, dy, dz = _r(fh, "iii")
        return FocusAction(dx, dy, dz)
    if tag == 0x06:
        center = _r(fh, "ddd")
        tol = _r(fh, "ddd")
        (n,) = _r(fh, "B")
        prov = []
        for _ in range(n):
            pid = _r_node_id(fh)
            dx, dy, dz = _r(fh, "iii")
            prov.append((pid, FocusAction(dx, dy, dz)))
        return FocusMergedData(center, tol, tuple(prov))
    if tag == 0x07:
        return AttentionAction(_r_str(fh))
    if tag == 0x08:
        (n,) = _r(fh, "B")
        return SpeechAction(tuple(_r_str(fh) for _ in range(n)))
    if tag == 0x09:
        (hop,) = _r(fh, "I")
        return JumpSpec(hop)
    if tag == 0x0A:
        wildcard, count = _r(fh, "BH")
        members = tuple(_r_node_id(fh) for _ in range(count))
        return GroupSpec(members, bool(wildcard))
    if tag == 0x0B:
        parts = []
        for _ in range(2):
            (is_ph,) = _r(fh, "B")
            parts.append(Placeholder(_r_str(fh)) if is_ph else _r_node_id(fh))
        return SuperimposeSpec(parts[0], parts[1])
    if tag == 0x0C:
        sense = _r_str(fh)
        (level,) = _r(fh, "d")
        return InternalSenseReading(sense, level)
    raise MalformedPayloadError(f"unknown payload tag {tag:#x}")


# --- tree codec ----------------------------------------------------------------


def _w_connections(fh: BinaryIO, level: dict) -> None:
    _w(fh, "I", len(level))
    for child in level:  # insertion order: reproduced on load
        conn = level[child]
        _w_node_id(fh, child)
        _w(fh, "Q", conn.count)
        _w(fh, "d", conn.delta_p_sum)
        _w_connections(fh, conn.children)


def _r_connections(fh: BinaryIO) -> dict:
    (n,) = _r(fh, "I")
    level = {}
    for _ in range(n):
        child = _r_node_id(fh)
        (count,) = _r(fh, "Q")
        (delta,) = _r(fh, "d")
        conn = Connection(child, count, delta)
        conn.children = _r_connections(fh)
        level[child] = conn
    return level


# --- whole KB ---------------------------------------------------------------------


def kb_to_bytes(kb, include_rng: bool = True) -> bytes:
    fh = io.BytesIO()
    fh.write(MAGIC)
    _w(fh, "I", FORMAT_VERSION)
    _w(fh, "Q", kb.tick)
    _w_str(fh, kb.config.to_json())
    if include_rng:
        _w_str(fh, json.dumps(kb.rng.bit_generator.state, sort_keys=True))
    else:
        _w_str(fh, "")

    # pleasure-pain + attention
    _w(fh, "B", len(kb.pp.levels))
    for sense in sorted(kb.pp.levels):
        _w_str(fh, sense)
        _w(fh, "d", kb.pp.levels[sense])
        _w(fh, "d", kb._last_emitted_levels.get(sense, kb.pp.levels[sense]))
    _w_str(fh, kb.attention.focus)
    _w(fh, "iii", *kb.attention.visual_focus)

    # serial counters
    _w(fh, "H", len(kb.store.serials))
    for (tag, merged), serial in sorted(kb.store.serials.items(), key=lambda kv: (_TYPE_INDEX[kv[0][0]], kv[0][1])):
        _w(fh, "BBQ", _TYPE_INDEX[tag], 1 if merged else 0, serial)

    # node table (insertion order)
    _w(fh, "I", len(kb.store.nodes))
    for node_id, node in kb.store.nodes.items():
        _w_node_id(fh, node_id)
        _w(fh, "Q", node.created_at)
        _w_bytes(fh, encode_payload(node.payload))

    # index table
    _w(fh, "I", len(kb.store.index))
    for node_id, attrs in kb.store.index.items():
        _w_node_id(fh, node_id)
        _w(fh, "B", len(attrs))
        for attr in sorted(attrs):
            _w_str(fh, attr)
            _w(fh, "d", attrs[attr])

    # observation trees
    _w(fh, "I", len(kb.trees.trees))
    for root, tree in kb.trees.trees.items():
        _w_node_id(fh, root)
        _w_connections(fh, tree.branches)
    _w(fh, "I", len(kb.trees.touched))
    for root in sorted(kb.trees.touched):
        _w_node_id(fh, root)

    # trace + window cursors
    _w(fh, "I", len(kb.trace.entries))
    for entry in kb.trace.entries:
        _w_node_id(fh, entry.node)
        _w(fh, "Q", entry.tick)
        _w(fh, "d", entry.p_net_at)
    _w(fh, "QQ", kb.trace._next_direct, kb.trace._next_jump)

    # projection canvas (stored frame nodes only; frames are in the node table)
    _w(fh, "I", len(kb.canvas.frame_nodes))
    for node_id in kb.canvas.frame_nodes:
        _w_node_id(fh, node_id)

    return fh.getvalue()


def kb_from_bytes(data: bytes):
    from .kb import KnowledgeBase
    from .trace import TraceEntry

    fh = io.BytesIO(data)
    magic = fh.read(len(MAGIC))
    if magic != MAGIC:
        raise MalformedPayloadError("not a KB snapshot")
    (version,) = _r(fh, "I")
    if version != FORMAT_VERSION:
        raise MalformedPayloadError(f"unsupported snapshot version {version}")
    (tick,) = _r(fh, "Q")
    config = SessionConfig.from_json(_r_str(fh))
    rng_json = _r_str(fh)

    kb = KnowledgeBase(config)
    kb.tick = tick
    if rng_json:
        kb.rng.bit_generator.state = json.loads(rng_json)

    (n_senses,) = _r(fh, "B")
    for _ in range(n_senses):
        sense = _r_str(fh)
        (level,) = _r(fh, "d")
        (emitted,) = _r(fh, "d")
        kb.pp.levels[sense] = level
        kb._last_emitted_levels[sense] = emitted
    kb.attention.focus = _r_str(fh)
    kb.attention.visual_focus = tuple(_r(fh, "iii"))

    (n_serials,) = _r(fh, "H")
    for _ in range(n_serials):
        tag, merged, serial = _r(fh, "BBQ")
        kb.store.serials[(_TYPE_ORDER[tag], bool(merged))] = serial

    (n_nodes,) = _r(fh, "I")
    for _ in range(n_nodes):
        node_id = _r_node_id(fh)
        (created,) = _r(fh, "Q")
        payload = decode_payload(_r_bytes(fh))
        from .nodes import MemoryNode

        kb.store.nodes[node_id] = MemoryNode(node_id, payload, created)
        from .store import _intern_key

        key = _intern_key(payload)
        if key is not None and key not in kb.store._interned:
            kb.store._interned[key] = node_id
        prov = kb.store._provenance_key(payload)
        if prov is not None:
            kb.store._merge_registry[prov] = node_id

    (n_index,) = _r(fh, "I")
    for _ in range(n_index):
        node_id = _r_node_id(fh)
        (n_attrs,) = _r(fh, "B")
        attrs = {}
        for _ in range(n_attrs):
            attr = _r_str(fh)
            (value,) = _r(fh, "d")
            attrs[attr] = value
        kb.store.index[node_id] = attrs

    (n_trees,) = _r(fh, "I")
    for _ in range(n_trees):
        root = _r_node_id(fh)
        tree = ObservationTree(root, kb.trees.max_depth)
        tree.branches = _r_connections(fh)
        kb.trees.trees[root] = tree
    (n_touched,) = _r(fh, "I")
    for _ in range(n_touched):
        kb.trees.touched.add(_r_node_id(fh))

    (n_entries,) = _r(fh, "I")
    for _ in range(n_entries):
        node_id = _r_node_id(fh)
        (entry_tick,) = _r(fh, "Q")
        (p_net,) = _r(fh, "d")
        kb.trace.entries.append(TraceEntry(node_id, entry_tick, p_net))
    next_direct, next_jump = _r(fh, "QQ")
    kb.trace._next_direct = next_direct
    kb.trace._next_jump = next_jump

    (n_frames,) = _r(fh, "I")
    for _ in range(n_frames):
        node_id = _r_node_id(fh)
        kb.canvas.frame_nodes.append(node_id)
        payload = kb.store.nodes.get(node_id)
        if payload is not None and isinstance(payload.payload, ImageData):
            kb.canvas.frames.append(payload.payload)

    return kb


def save_kb(kb, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(kb_to_bytes(kb))


def load_kb(path: str):
    with open(path, "rb") as fh:
        return kb_from_bytes(fh.read())
