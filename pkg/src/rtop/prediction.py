"""Future-trees: knowledge-base lookup of the ongoing observation.

A future tree freezes the probabilities and mean deltas of an observation
subtree at build time; incoming nodes either conform (cursor advances) or
violate it. Deeper observed context ranks a tree higher.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .config import SessionConfig
from .nodes import (
    ACTION_TYPES,
    FocusAction,
    FocusMergedData,
    GroupSpec,
    NodeId,
    NodeType,
)
from .percepts import (
    AudioData,
    AudioMergedData,
    ImageData,
    ImageMergedData,
    image_distance,
    match_audio,
    match_audio_masked,
    match_image_masked,
)
from .trees import ObservationTree


@dataclass
class FutureNode:
    node: NodeId
    probability: float
    delta: float
    children: list = field(default_factory=list)


@dataclass
class FutureTree:
    anchor: NodeId
    branches: list[FutureNode]
    context_depth: int = 1
    anchor_tick: int = 0
    cursor: Optional[FutureNode] = None  # None = at the anchor
    violated: bool = False
    age: int = 0

    def cursor_children(self) -> list[FutureNode]:
        return self.cursor.children if self.cursor is not None else self.branches

    def iter_with_net_prob(self) -> Iterator[tuple[FutureNode, float]]:
        """Every node with its net-probability (product of edge probabilities)."""
        stack = [(fn, fn.probability) for fn in self.branches]
        while stack:
            fn, rho = stack.pop()
            yield fn, rho
            stack.extend((c, rho * c.probability) for c in fn.children)

    def remaining_depth(self) -> int:
        def depth(nodes: list[FutureNode]) -> int:
            return 1 + max((depth(fn.children) for fn in nodes), default=0) if nodes else 0

        return depth(self.cursor_children())

    def best_remaining_probability(self) -> float:
        """Best full-continuation probability below the cursor."""

        def best(nodes: list[FutureNode]) -> float:
            if not nodes:
                return 1.0
            return max(fn.probability * best(fn.children) for fn in nodes)

        children = self.cursor_children()
        return best(children) if children else 0.0

    def render(self, label=str, depth: Optional[int] = None) -> list[str]:
        lines: list[str] = []

        def hidden(nodes: list[FutureNode]) -> int:
            return sum(1 + hidden(fn.children) for fn in nodes)

        def walk(nodes: list[FutureNode], prefix: str, depth_left):
            for fn in sorted(nodes, key=lambda f: f.node):
                seg = f"{prefix}--[{fn.probability:.2f},{fn.delta:.2f}]-->{label(fn.node)}"
                if fn.children:
                    if depth_left is not None and depth_left <= 1:
                        lines.append(f"{seg}--...(+{hidden(fn.children)})")
                    else:
                        walk(fn.children, seg, None if depth_left is None else depth_left - 1)
                else:
                    lines.append(seg)

        walk(self.branches, f"-->{label(self.anchor)}", depth)
        return lines


def child_matches(child: NodeId, incoming: NodeId, store, config: SessionConfig) -> bool:
    """Conformance test between an expected child and an incoming node.

    Raw equality; masked match for merged children; member test for groups;
    jump children are wildcards. With global groups on, a group containing
    the expected child substitutes for it.
    """
    if child == incoming:
        return True
    if child.type_tag is NodeType.JUMP:
        return True
    if child not in store.nodes or incoming not in store.nodes:
        return False
    expected = store.payload(child)
    actual = store.payload(incoming)
    if isinstance(expected, GroupSpec):
        return _group_matches(expected, incoming, actual, store, config)
    if isinstance(expected, ImageMergedData) and isinstance(actual, ImageData):
        return match_image_masked(actual, expected)
    if isinstance(expected, AudioMergedData) and isinstance(actual, AudioData):
        return match_audio_masked(actual, expected)
    if isinstance(expected, FocusMergedData) and isinstance(actual, FocusAction):
        return expected.contains(actual)
    if child.type_tag is NodeType.SUPERIMPOSE:
        # parameterized projection slot: any image satisfies it
        return incoming.type_tag is NodeType.IMAGE
    if config.global_groups:
        for gid in store.groups_containing(child):
            group = store.payload(gid)
            if _group_matches(group, incoming, actual, store, config):
                return True
    return False


def _group_matches(group: GroupSpec, incoming: NodeId, actual, store, config: SessionConfig) -> bool:
    if group.is_wildcard:
        return True
    if incoming in group.members:
        return True
    tolerances = {
        "var_amplitude": config.audio_tol_var_amplitude,
        "mean_cross_rate": config.audio_tol_mean_cross_rate,
    }
    for member in group.members:
        if member not in store.nodes:
            continue
        payload = store.payload(member)
        if isinstance(payload, ImageData) and isinstance(actual, ImageData):
            if image_distance(actual, payload) <= config.image_match_threshold:
                return True
        elif isinstance(payload, ImageMergedData) and isinstance(actual, ImageData):
            if match_image_masked(actual, payload):
                return True
        elif isinstance(payload, AudioData) and isinstance(actual, AudioData):
            if match_audio(actual, payload, tolerances):
                return True
        elif isinstance(payload, AudioMergedData) and isinstance(actual, AudioData):
            if match_audio_masked(actual, payload):
                return True
    return False


def _snapshot_level(tree: ObservationTree, level: dict) -> list[FutureNode]:
    total = sum(c.count for c in level.values())
    out = []
    for child in sorted(level):
        conn = level[child]
        out.append(
            FutureNode(
                node=child,
                probability=conn.count / total if total else 0.0,
                delta=conn.mean_delta,
                children=_snapshot_level(tree, conn.children),
            )
        )
    return out


def build_futures(
    recent: list[NodeId],
    trees,
    store,
    config: SessionConfig,
    tick: int = 0,
    cap: Optional[int] = None,
) -> list[FutureTree]:
    """One future tree per recent node whose observation tree is consistent
    with the observed suffix; deeper context ranks first."""
    if not recent:
        return []
    built: list[FutureTree] = []
    for start in range(len(recent)):
        root = recent[start]
        suffix = recent[start + 1:]
        tree = trees.get(root)
        if tree is None:
            continue
        level = tree.branches
        ok = True
        for observed in suffix:
            conn = _walk_child(level, observed, store, config)
            if conn is None:
                ok = False
                break
            level = conn.children
        if not ok or not level:
            continue
        branches = _snapshot_level(tree, level)
        built.append(
            FutureTree(
                anchor=recent[-1],
                branches=branches,
                context_depth=len(suffix) + 1,
                anchor_tick=tick,
            )
        )
    built.sort(
        key=lambda t: (
            -t.context_depth,
            -max((fn.probability for fn in t.branches), default=0.0),
            t.anchor,
        )
    )
    limit = cap if cap is not None else config.k_active
    return built[:limit]


def _walk_child(level: dict, observed: NodeId, store, config: SessionConfig):
    if observed in level:
        return level[observed]
    for child in sorted(level):
        if child_matches(child, observed, store, config):
            return level[child]
    return None


def conform(tree: FutureTree, incoming: NodeId, store, config: SessionConfig) -> bool:
    """Advance the cursor if the incoming node matches an expected child."""
    if tree.violated:
        return False
    for fn in tree.cursor_children():
        if child_matches(fn.node, incoming, store, config):
            tree.cursor = fn
            return True
    tree.violated = True
    return False


@dataclass
class PredictionSet:
    active: list[FutureTree] = field(default_factory=list)
    background_active: list[FutureTree] = field(default_factory=list)
    k_active: int = 8
    last_conformed: bool = True

    def observe(self, incoming: NodeId, store, config: SessionConfig) -> bool:
        """Conform every active tree against the incoming node; violated trees
        drop out and can only return through a rebuild."""
        conformed_any = False
        survivors = []
        for tree in self.active:
            tree.age += 1
            if conform(tree, incoming, store, config):
                conformed_any = True
                survivors.append(tree)
        self.active = survivors
        self.last_conformed = conformed_any
        return conformed_any

    def action_children(self) -> list[tuple[FutureTree, FutureNode]]:
        out = []
        for tree in self.active:
            for fn in tree.cursor_children():
                if fn.node.type_tag in ACTION_TYPES:
                    out.append((tree, fn))
        return out


def refresh_policy(pset: PredictionSet, config: SessionConfig) -> bool:
    """Rebuild when nothing conformed, or every tree is nearly spent."""
    if not pset.active:
        return True
    if not pset.last_conformed:
        return True
    return all(
        t.best_remaining_probability() < config.rebuild_min_probability
        or t.remaining_depth() < config.rebuild_min_depth
        for t in pset.active
    )
