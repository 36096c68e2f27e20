"""Superimposition across concurrent predictions.

Parameterized paths carry placeholder slots bound from other active
prediction trees; instantiated superimpositions land on the projection
canvas and, under attention, back into memory like any other percept.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import UnplayableAudioError
from .nodes import NodeId, NodeType, Placeholder, SuperimposeSpec
from .percepts import (
    AudioData,
    AudioMergedData,
    ImageData,
    ImageMergedData,
    audio_summary,
)
from .prediction import FutureTree, PredictionSet

_CH_MAX = np.array([7, 3, 7], dtype=np.int64)


def _to_grid(payload: Union[ImageData, ImageMergedData]) -> np.ndarray:
    if isinstance(payload, ImageMergedData):
        return np.clip(np.rint(payload.center_hsl), 0, _CH_MAX.reshape(1, 1, 3)).astype(np.uint8)
    return payload.hsl


def superimpose_images(
    base: Union[ImageData, ImageMergedData],
    overlay: Union[ImageData, ImageMergedData],
) -> ImageData:
    """Overlay pixels replace base pixels wherever the overlay is defined:
    everywhere for a raw overlay, on must_match pixels for a merged one."""
    base_grid = _to_grid(base)
    over_grid = _to_grid(overlay)
    if isinstance(overlay, ImageMergedData):
        mask = overlay.must_match
    else:
        mask = np.ones(base_grid.shape[:2], dtype=bool)
    out = np.where(mask[:, :, None], over_grid, base_grid)
    return ImageData(out.astype(np.uint8))


def superimpose_audio(
    content: Union[AudioData, AudioMergedData],
    timbre: AudioMergedData,
) -> AudioData:
    """Rescale the content waveform so its amplitude variance moves to the
    timbre's center; duration is untouched."""
    if isinstance(content, AudioMergedData):
        samples = content.waveform()
        if samples is None:
            raise UnplayableAudioError("merged audio has no provenance waveform")
        wave = AudioData(np.asarray(samples, dtype=np.int8))
    else:
        wave = content
    current = audio_summary(wave)["var_amplitude"]
    target = timbre.center.get("var_amplitude", current)
    if current <= 0.0:
        return wave
    scale = float(np.sqrt(target / current))
    scaled = np.clip(np.rint(wave.samples.astype(np.float64) * scale), -128, 127)
    return AudioData(scaled.astype(np.int8))


@dataclass
class IncompleteBinding:
    unbound: list[Placeholder]


@dataclass
class ProjectionCanvas:
    frames: list = field(default_factory=list)       # ImageData in prediction order
    audio_track: list = field(default_factory=list)  # AudioData
    frame_nodes: list = field(default_factory=list)  # NodeId of stored composites


def _frontier(tree: FutureTree, type_tag: NodeType, depth: int) -> list[tuple[float, NodeId]]:
    """(net-probability, node) for nodes of a type within the next few steps."""
    out = []
    stack = [(fn, fn.probability, 1) for fn in tree.cursor_children()]
    while stack:
        fn, rho, d = stack.pop()
        if fn.node.type_tag is type_tag:
            out.append((rho, fn.node))
        if d < depth:
            stack.extend((c, rho * c.probability, d + 1) for c in fn.children)
    return out


def most_predicted(
    pset: PredictionSet,
    type_tag: NodeType,
    exclude: Optional[FutureTree] = None,
    depth: int = 3,
) -> Optional[NodeId]:
    """Highest net-probability node of a type over the other trees' frontier;
    ties go to the lower serial."""
    best: Optional[tuple] = None
    for tree in pset.active:
        if tree is exclude:
            continue
        for rho, node in _frontier(tree, type_tag, depth):
            key = (-rho, node)
            if best is None or key < best[0]:
                best = (key, node)
    return None if best is None else best[1]


def bind_placeholders(
    path: list[Union[NodeId, Placeholder]],
    pset: PredictionSet,
    store,
    owner: Optional[FutureTree] = None,
    frontier_depth: int = 3,
) -> Union[list[NodeId], IncompleteBinding]:
    """Resolve placeholder slots in a parameterized sequence.

    P_IMG binds to the most predicted image across the other active trees;
    P_PRECEDING / P_FOLLOWING bind to the nearest audio in the sequence, or
    failing that to audio predicted by earlier/later-anchored trees.
    """
    resolved: list[Optional[NodeId]] = []
    unbound: list[Placeholder] = []

    def audio_neighbor(idx: int, direction: int) -> Optional[NodeId]:
        j = idx + direction
        while 0 <= j < len(path):
            item = path[j]
            if isinstance(item, NodeId) and item.type_tag is NodeType.AUDIO:
                return item
            j += direction
        anchor_tick = owner.anchor_tick if owner is not None else 0
        candidates = [
            t
            for t in pset.active
            if t is not owner
            and ((t.anchor_tick < anchor_tick) if direction < 0 else (t.anchor_tick > anchor_tick))
        ]
        best: Optional[tuple] = None
        for tree in candidates:
            for rho, node in _frontier(tree, NodeType.AUDIO, frontier_depth):
                key = (-rho, node)
                if best is None or key < best[0]:
                    best = (key, node)
        return None if best is None else best[1]

    def resolve(part, idx: int) -> Optional[NodeId]:
        if isinstance(part, NodeId):
            return part
        if part is Placeholder.P_IMG:
            return most_predicted(pset, NodeType.IMAGE, exclude=owner, depth=frontier_depth)
        if part is Placeholder.P_PRECEDING:
            return audio_neighbor(idx, -1)
        return audio_neighbor(idx, +1)

    for idx, item in enumerate(path):
        if isinstance(item, Placeholder):
            node = resolve(item, idx)
            if node is None:
                unbound.append(item)
                resolved.append(None)
            else:
                resolved.append(node)
        elif isinstance(item, NodeId) and item.type_tag is NodeType.SUPERIMPOSE:
            spec = store.payload(item)
            base = resolve(spec.base, idx)
            overlay = resolve(spec.overlay, idx)
            missing = [p for p, r in ((spec.base, base), (spec.overlay, overlay)) if isinstance(p, Placeholder) and r is None]
            if missing:
                unbound.extend(missing)
                resolved.append(None)
            else:
                resolved.append(store.intern_node(SuperimposeSpec(base, overlay)))
        else:
            resolved.append(item)

    if unbound:
        return IncompleteBinding(sorted(set(unbound), key=lambda p: p.value))
    return [n for n in resolved if n is not None]


def parameterize_paths(kb) -> int:
    """Replace merged-image positions whose provenance varies across other
    indexing contexts with superimpose slots taking a predicted image."""
    count = 0
    for root in sorted(kb.trees.trees):
        tree = kb.trees.trees[root]
        for _ in range(16):  # each round rewrites one position, then re-enumerates
            rewritten = False
            for nodes, _edges in tree.paths():
                pos = _parameterizable_position(kb, root, nodes)
                if pos is None:
                    continue
                sia = kb.store.intern_node(
                    SuperimposeSpec(Placeholder.P_IMG, nodes[pos]), kb.tick
                )
                weight_means = _detach(tree, nodes)
                if weight_means is None:
                    continue
                weight, means = weight_means
                reduced = list(nodes)
                reduced[pos] = sia
                _reattach(tree, reduced, weight, means)
                count += 1
                rewritten = True
                break
            if not rewritten:
                break
    return count


def _parameterizable_position(kb, root: NodeId, nodes: list[NodeId]) -> Optional[int]:
    """First merged-image position whose provenance spans other indexing trees."""
    for pos in range(1, len(nodes)):
        node = nodes[pos]
        if node.type_tag is not NodeType.IMAGE or not node.merged:
            continue
        payload = kb.store.payload(node)
        sources = {pid for pid, _ in payload.provenance if pid is not None}
        if len(sources) < 2:
            continue
        elsewhere = set()
        for other_root, other_tree in kb.trees.trees.items():
            if other_root == root:
                continue
            for src in sources:
                if other_root == src or _tree_contains(other_tree, src):
                    elsewhere.add(src)
        if len(elsewhere) >= 2:
            return pos
    return None


def _tree_contains(tree, node_id: NodeId) -> bool:
    return any(conn.child == node_id for conn in tree.iter_connections())


def _detach(tree, nodes):
    from .generalize import _remove_path

    return _remove_path(tree, nodes)


def _reattach(tree, nodes, weight, means):
    from .generalize import _add_path

    _add_path(tree, nodes, weight, means)


def thought_step(kb, pset: PredictionSet, budget: int) -> list[NodeId]:
    """Run up to `budget` superimposition steps, storing each composite.

    Each step advances the clock by one tick (composites are foreground
    percepts). Stops early once a single prediction remains.
    """
    stored: list[NodeId] = []
    for _ in range(budget):
        if len(pset.active) <= 1:
            break
        kb.tick += 1
        node = thought_once(kb, pset)
        if node is None:
            break
        stored.append(node)
    return stored


def thought_once(kb, pset: PredictionSet) -> Optional[NodeId]:
    """One pairwise superimposition: compose the two frontier images whose
    composite lies closest to something already known, store it, and merge
    the two predictions."""
    frontiers = []
    for idx, tree in enumerate(pset.active):
        best: Optional[tuple] = None
        for rho, node in _frontier(tree, NodeType.IMAGE, kb.config.frontier_depth):
            key = (-rho, node)
            if best is None or key < best[0]:
                best = (key, node)
        if best is not None:
            frontiers.append((idx, best[1]))
    if len(frontiers) < 2:
        return None

    candidates = []
    for ai in range(len(frontiers)):
        for bi in range(ai + 1, len(frontiers)):
            ia, na = frontiers[ai]
            ib, nb = frontiers[bi]
            pa, pb = kb.store.payload(na), kb.store.payload(nb)
            if isinstance(pb, ImageMergedData) and not isinstance(pa, ImageMergedData):
                base, overlay = pa, pb
            elif isinstance(pa, ImageMergedData) and not isinstance(pb, ImageMergedData):
                base, overlay = pb, pa
            else:
                base, overlay = pa, pb
            composite = superimpose_images(base, overlay)
            hit = kb.store.find_match(composite, kb.config)
            dist = hit[1] if hit is not None else float("inf")
            candidates.append((dist, ia, ib, composite))
    if not candidates:
        return None
    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    dist, ia, ib, composite = candidates[0]

    node_id, _ = kb.capture(composite)
    kb.canvas.frames.append(composite)
    kb.canvas.frame_nodes.append(node_id)

    merged_trees = {ia, ib}
    pset.active = [t for i, t in enumerate(pset.active) if i not in merged_trees]
    replacement = None
    tree = kb.trees.get(node_id)
    if tree is not None:
        from .prediction import build_futures

        rebuilt = build_futures([node_id], kb.trees, kb.store, kb.config, kb.tick, cap=1)
        if rebuilt:
            replacement = rebuilt[0]
    if replacement is not None:
        pset.active.append(replacement)
    return node_id


def render_projection(kb, sequence: list[NodeId], pset: Optional[PredictionSet] = None) -> ProjectionCanvas:
    """Materialize an instantiated sequence into frames and audio clips."""
    canvas = ProjectionCanvas()
    for node in sequence:
        payload = kb.store.payload(node)
        if isinstance(payload, SuperimposeSpec):
            base = kb.store.payload(payload.base) if isinstance(payload.base, NodeId) else None
            overlay = kb.store.payload(payload.overlay) if isinstance(payload.overlay, NodeId) else None
            if base is not None and overlay is not None:
                if isinstance(base, (ImageData, ImageMergedData)) and isinstance(overlay, (ImageData, ImageMergedData)):
                    canvas.frames.append(superimpose_images(base, overlay))
                elif isinstance(overlay, AudioMergedData):
                    canvas.audio_track.append(superimpose_audio(base, overlay))
        elif isinstance(payload, (ImageData, ImageMergedData)):
            canvas.frames.append(payload if isinstance(payload, ImageData) else payload.to_image())
        elif isinstance(payload, AudioData):
            canvas.audio_track.append(payload)
        elif isinstance(payload, AudioMergedData):
            wave = payload.waveform()
            if wave is not None:
                canvas.audio_track.append(AudioData(np.asarray(wave, dtype=np.int8)))
    return canvas
