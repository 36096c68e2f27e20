"""Offline generalization: reduce similar observation paths.

Similar path pairs within a tree merge their differing nodes (masked merged
nodes for sensory pairs, tolerance boxes for focus actions) or group them
when merging fails; the pair's counts fold onto the reduced path and the
trace is cleared afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import SessionConfig
from .nodes import (
    FocusMergedData,
    GroupSpec,
    NodeId,
    NodeType,
)
from .percepts import (
    AUDIO_ATTRIBUTES,
    AudioData,
    AudioMergedData,
    ImageMergedData,
    audio_summary,
)
from .trees import Connection, ObservationTree

_SENSORY_CATEGORY = {NodeType.IMAGE, NodeType.AUDIO, NodeType.GROUP, NodeType.SENSE}
_ACTION_CATEGORY = {NodeType.FOCUS, NodeType.SPEECH, NodeType.ATTENTION}


@dataclass
class PathPair:
    root: NodeId
    path_a: list[NodeId]
    path_b: list[NodeId]
    diff_positions: list[int]


@dataclass
class GeneralizationReport:
    lines: list[str] = field(default_factory=list)
    merged_nodes: list[NodeId] = field(default_factory=list)
    group_nodes: list[NodeId] = field(default_factory=list)
    reductions: int = 0
    parameterized: int = 0
    deleted: list[NodeId] = field(default_factory=list)

    def log(self, line: str) -> None:
        self.lines.append(line)

    @property
    def empty(self) -> bool:
        return self.reductions == 0 and self.parameterized == 0


def _category(node_id: NodeId) -> Optional[str]:
    if node_id.type_tag in _SENSORY_CATEGORY:
        return "sensory"
    if node_id.type_tag in _ACTION_CATEGORY:
        return "action"
    return None  # jump / superimpose positions never reduce


def similar_pairs(tree: ObservationTree, d_max_divisor: int = 8) -> list[PathPair]:
    """Unordered pairs of equal-length root-to-leaf paths differing in at most
    ceil(len/divisor) positions, with same-category nodes at every difference."""
    paths = [nodes for nodes, _ in tree.paths()]
    out: list[PathPair] = []
    for i in range(len(paths)):
        for j in range(i + 1, len(paths)):
            a, b = paths[i], paths[j]
            if len(a) != len(b):
                continue
            d_max = math.ceil(len(a) / d_max_divisor)
            diffs = [k for k, (x, y) in enumerate(zip(a, b)) if x != y]
            if not diffs or len(diffs) > d_max:
                continue
            if all(_category(a[k]) is not None and _category(a[k]) == _category(b[k]) for k in diffs):
                out.append(PathPair(tree.root, list(a), list(b), diffs))
    return out


# --- merge primitives ---------------------------------------------------------


def _image_sources(node_id: Optional[NodeId], payload) -> list[tuple[Optional[NodeId], np.ndarray]]:
    if isinstance(payload, ImageMergedData):
        return [(pid, np.asarray(grid)) for pid, grid in payload.provenance]
    return [(node_id, payload.hsl)]


def merge_images(
    a: tuple[Optional[NodeId], object],
    b: tuple[Optional[NodeId], object],
    config: SessionConfig,
) -> Optional[ImageMergedData]:
    """Pixel-wise mean with a deviation mask over the union of provenance.

    l_tol = max |deviation| + slack; pixels stay matchable while their
    tolerance is at most the cutoff. Rejected when too little of the image
    remains matchable.
    """
    sources: list[tuple[Optional[NodeId], np.ndarray]] = []
    seen: set[str] = set()
    for nid, grid in _image_sources(*a) + _image_sources(*b):
        key = str(nid) if nid is not None else f"anon{len(sources)}"
        if key in seen:
            continue
        seen.add(key)
        sources.append((nid, grid))
    sources = sources[-config.provenance_limit:]

    stack = np.stack([g.astype(np.float64) for _, g in sources])  # (n, 32, 32, 3)
    center = stack.mean(axis=0)
    dev = np.abs(stack[:, :, :, 2] - center[None, :, :, 2]).max(axis=0)
    l_tol = dev + config.merge_slack_l
    must_match = l_tol <= config.merge_tol_cutoff
    if must_match.mean() < config.merge_min_must_match:
        return None
    return ImageMergedData(
        center_hsl=center.astype(np.float32),
        l_tol=l_tol.astype(np.float32),
        must_match=must_match,
        provenance=tuple((nid, np.asarray(g, dtype=np.uint8)) for nid, g in sources),
    )


def _audio_sources(node_id: Optional[NodeId], payload) -> list[tuple[Optional[NodeId], np.ndarray]]:
    if isinstance(payload, AudioMergedData):
        return [(pid, np.asarray(s)) for pid, s in payload.provenance]
    return [(node_id, payload.samples)]


def merge_audio(
    a: tuple[Optional[NodeId], object],
    b: tuple[Optional[NodeId], object],
    config: SessionConfig,
) -> Optional[AudioMergedData]:
    """Summary-space merge: attribute means with widened tolerances; rejected
    when the sources deviate beyond a multiple of the match tolerance."""
    sources: list[tuple[Optional[NodeId], np.ndarray]] = []
    seen: set[str] = set()
    for nid, samples in _audio_sources(*a) + _audio_sources(*b):
        key = str(nid) if nid is not None else f"anon{len(sources)}"
        if key in seen:
            continue
        seen.add(key)
        sources.append((nid, samples))
    sources = sources[-config.provenance_limit:]

    summaries = [audio_summary(AudioData(np.asarray(s, dtype=np.int8))) for _, s in sources]
    match_tols = {
        "var_amplitude": config.audio_tol_var_amplitude,
        "mean_cross_rate": config.audio_tol_mean_cross_rate,
    }
    center: dict[str, float] = {}
    tol: dict[str, float] = {}
    for attr in AUDIO_ATTRIBUTES:
        values = np.array([s[attr] for s in summaries])
        c = float(values.mean())
        max_dev = float(np.abs(values - c).max())
        rel_dev = max_dev / max(abs(c), 1e-12)
        if rel_dev > config.audio_merge_reject_factor * match_tols[attr]:
            return None
        center[attr] = c
        tol[attr] = max_dev + config.audio_merge_slack * abs(c)
    return AudioMergedData(
        center=center,
        tol=tol,
        provenance=tuple((nid, np.asarray(s, dtype=np.int8)) for nid, s in sources),
    )


def merge_focus(
    a: tuple[Optional[NodeId], object],
    b: tuple[Optional[NodeId], object],
    config: SessionConfig,
) -> Optional[FocusMergedData]:
    def sources(nid, payload):
        if isinstance(payload, FocusMergedData):
            return list(payload.provenance)
        return [(nid, payload)]

    all_sources = sources(*a) + sources(*b)
    deltas = np.array([[p.dx, p.dy, p.dzoom] for _, p in all_sources], dtype=np.float64)
    center = deltas.mean(axis=0)
    tol = np.abs(deltas - center).max(axis=0) + config.focus_merge_slack_px
    if (tol > config.focus_merge_cutoff_px).any():
        return None
    return FocusMergedData(
        center=tuple(float(v) for v in center),
        tol=tuple(float(v) for v in tol),
        provenance=tuple(all_sources[-config.provenance_limit:]),
    )


def make_group(store, members: list[NodeId], tick: int, config: SessionConfig) -> NodeId:
    """Group node over distinct members; large cross-type groups degrade to
    wildcards that conform to anything."""
    flat: list[NodeId] = []
    for m in members:
        if m.type_tag is NodeType.GROUP:
            flat.extend(store.payload(m).members)
        else:
            flat.append(m)
    unique = sorted(set(flat))
    if len(unique) < 2:
        raise ValueError("group needs at least two distinct members")
    wildcard = (
        len(unique) >= config.group_wildcard_size
        and len({m.type_tag for m in unique}) >= 2
    )
    return store.intern_node(GroupSpec(tuple(unique), wildcard), tick)


# --- path rewriting -------------------------------------------------------------


def _edges_along(tree: ObservationTree, path: list[NodeId]) -> Optional[list[Connection]]:
    level = tree.branches
    edges = []
    for node in path[1:]:
        conn = level.get(node)
        if conn is None:
            return None
        edges.append(conn)
        level = conn.children
    return edges


def _remove_path(tree: ObservationTree, path: list[NodeId]) -> Optional[tuple[int, list[float]]]:
    """Subtract the leaf path's mass from its edges; returns (count, mean deltas)."""
    edges = _edges_along(tree, path)
    if edges is None or edges[-1].children:
        return None  # not a leaf path anymore
    weight = edges[-1].count
    means = [e.mean_delta for e in edges]
    for e, mean in zip(edges, means):
        e.delta_p_sum -= weight * mean
        e.count -= weight
    # prune emptied suffix edges
    level = tree.branches
    for node in path[1:]:
        conn = level.get(node)
        if conn is None:
            break
        if conn.count <= 0:
            del level[node]
            break
        level = conn.children
    return weight, means


def _add_path(tree: ObservationTree, path: list[NodeId], weight: int, deltas: list[float]) -> None:
    level = tree.branches
    for node, delta in zip(path[1:], deltas):
        conn = level.get(node)
        if conn is None:
            conn = Connection(node)
            level[node] = conn
        conn.count += weight
        conn.delta_p_sum += weight * delta
        level = conn.children


def rewrite_paths(tree: ObservationTree, pair: PathPair, replacements: dict) -> list[NodeId]:
    """Fold both paths of a pair onto the reduced path through the replacement
    nodes; counts and delta sums of the originals add up on the new edges."""
    removed_a = _remove_path(tree, pair.path_a)
    removed_b = _remove_path(tree, pair.path_b)
    reduced = list(pair.path_a)
    for pos, node in replacements.items():
        reduced[pos] = node
    for removed in (removed_a, removed_b):
        if removed is not None:
            weight, means = removed
            _add_path(tree, reduced, weight, means)
    return reduced


# --- the offline pass -------------------------------------------------------------


def _position_outcome(kb, pos: int, a: NodeId, b: NodeId, report: GeneralizationReport):
    """Merge when both sides share a modality, otherwise group; returns a
    replacement NodeId or None when nothing applies."""
    store = kb.store
    config = kb.config
    pa, pb = store.payload(a), store.payload(b)

    def register_merged(payload, kind_tag):
        source_ids = [pid for pid, _ in payload.provenance if pid is not None]
        existing = store.merged_for_provenance(kind_tag, source_ids)
        if existing is not None:
            return existing
        for side in (a, b):
            if side.merged:
                store.replace_payload(side, payload)
                return side
        return store.put_node(payload, kb.tick)

    if a.type_tag is NodeType.IMAGE and b.type_tag is NodeType.IMAGE:
        merged = merge_images((a, pa), (b, pb), config)
        if merged is not None:
            node = register_merged(merged, NodeType.IMAGE)
            report.log(f"Created merged node {node} by merging {store.label(a)} and {store.label(b)}")
            report.merged_nodes.append(node)
            return node
    elif a.type_tag is NodeType.AUDIO and b.type_tag is NodeType.AUDIO:
        merged = merge_audio((a, pa), (b, pb), config)
        if merged is not None:
            node = register_merged(merged, NodeType.AUDIO)
            report.log(f"Created merged node {node} by merging {store.label(a)} and {store.label(b)}")
            report.merged_nodes.append(node)
            return node
    elif a.type_tag is NodeType.FOCUS and b.type_tag is NodeType.FOCUS:
        merged = merge_focus((a, pa), (b, pb), config)
        if merged is not None:
            node = register_merged(merged, NodeType.FOCUS)
            report.log(f"Created merged node {node} by merging {store.label(a)} and {store.label(b)}")
            report.merged_nodes.append(node)
            return node

    try:
        group = make_group(store, [a, b], kb.tick, config)
    except ValueError:
        return None
    members = store.payload(group).members
    report.log(f"Created group node {group} over {len(members)} members for {store.label(a)} | {store.label(b)}")
    report.group_nodes.append(group)
    return group


def run_generalization(kb) -> GeneralizationReport:
    """The offline pass: reduce similar path pairs in recently touched trees to
    a fixpoint, parameterize superimposition positions, retire orphans, clear
    the trace."""
    report = GeneralizationReport()
    # short jump tails fold in before their trace disappears
    for path in kb.trace.flush_jump_tails():
        kb.trees.fold_path(path.nodes, path.deltas)
    touched = sorted(kb.trees.touched)
    candidates_roots = [r for r in touched if r in kb.trees.trees]
    merged_away: set[NodeId] = set()

    for _ in range(32):
        changed = False
        for root in candidates_roots:
            tree = kb.trees.trees.get(root)
            if tree is None:
                continue
            for pair in similar_pairs(tree, kb.config.d_max_divisor):
                # the pair may reference paths consumed by an earlier reduction
                if _edges_along(tree, pair.path_a) is None or _edges_along(tree, pair.path_b) is None:
                    continue
                report.log("Attempting reduction of path-pair:")
                report.log(" " + "->".join(kb.store.label(n) for n in pair.path_a))
                report.log(" " + "->".join(kb.store.label(n) for n in pair.path_b))
                replacements = {}
                for pos in pair.diff_positions:
                    report.log(
                        f"Attempting merging of {kb.store.label(pair.path_a[pos])}"
                        f" and {kb.store.label(pair.path_b[pos])}"
                    )
                    outcome = _position_outcome(kb, pos, pair.path_a[pos], pair.path_b[pos], report)
                    if outcome is None:
                        replacements = None
                        break
                    replacements[pos] = outcome
                if not replacements:
                    continue
                rewrite_paths(tree, pair, replacements)
                report.reductions += 1
                changed = True
                for pos in pair.diff_positions:
                    for side in (pair.path_a[pos], pair.path_b[pos]):
                        if side != replacements[pos]:
                            merged_away.add(side)
        if not changed:
            break

    kb.trees.drop_empty()

    from .innovation import parameterize_paths

    report.parameterized = parameterize_paths(kb)

    # retire orphaned originals; nodes still referenced anywhere survive
    for node_id in sorted(merged_away):
        if node_id not in kb.store.nodes:
            continue
        if kb.references(node_id):
            continue
        try:
            kb.store.delete_nodes([node_id], is_referenced=kb.references)
        except Exception:
            continue
        report.deleted.append(node_id)
        report.log(f"Retired {node_id}")

    kb.trace.clear()
    kb.trees.touched.clear()
    return report
