"""Observation trees: per-indexing-node aggregation of observation paths.

Every edge carries an occurrence count and a cumulative pleasure-pain delta;
probabilities are count ratios over siblings, so folding the same path
multiset in any order yields the same tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .nodes import NodeId


@dataclass
class Connection:
    child: NodeId
    count: int = 0
    delta_p_sum: float = 0.0
    children: dict = field(default_factory=dict)  # NodeId -> Connection

    @property
    def mean_delta(self) -> float:
        return self.delta_p_sum / self.count if self.count else 0.0


class ObservationTree:
    def __init__(self, root: NodeId, max_depth: int = 15):
        self.root = root
        self.max_depth = max_depth
        self.branches: dict[NodeId, Connection] = {}

    def fold(self, nodes: list[NodeId], deltas: list[float]) -> None:
        """Walk/extend the branch for one path, accumulating counts and deltas."""
        assert nodes[0] == self.root and len(deltas) == len(nodes) - 1
        level = self.branches
        for depth, (node, delta) in enumerate(zip(nodes[1:], deltas)):
            if depth >= self.max_depth:
                break
            conn = level.get(node)
            if conn is None:
                conn = Connection(node)
                level[node] = conn
            conn.count += 1
            conn.delta_p_sum += delta
            level = conn.children

    def probability(self, conn: Connection, level: dict) -> float:
        total = sum(c.count for c in level.values())
        return conn.count / total if total else 0.0

    def is_empty(self) -> bool:
        return not self.branches

    def paths(self) -> list[tuple[list[NodeId], list[Connection]]]:
        """All root-to-leaf paths as (node list incl. root, edge list)."""
        out: list[tuple[list[NodeId], list[Connection]]] = []

        def walk(level: dict, nodes: list[NodeId], edges: list[Connection]):
            if not level:
                if edges:
                    out.append((list(nodes), list(edges)))
                return
            for child in sorted(level):
                conn = level[child]
                nodes.append(child)
                edges.append(conn)
                walk(conn.children, nodes, edges)
                nodes.pop()
                edges.pop()

        walk(self.branches, [self.root], [])
        return out

    def iter_connections(self) -> Iterator[Connection]:
        stack = list(self.branches.values())
        while stack:
            conn = stack.pop()
            yield conn
            stack.extend(conn.children.values())

    def total_leaf_mass(self) -> int:
        """Sum of leaf-edge counts; conserved by path reduction."""
        total = 0
        for conn in self.iter_connections():
            if not conn.children:
                total += conn.count
            else:
                total += conn.count - sum(c.count for c in conn.children.values())
        return total

    def render(self, label=str, depth: Optional[int] = None) -> list[str]:
        """One line per (depth-limited) chain: -->ROOT--[p,d]-->CHILD--...

        Edges show [probability, mean delta]. Chains cut by the depth limit
        end with an ellipsis marker carrying the hidden descendant count.
        """
        lines: list[str] = []

        def hidden_count(level: dict) -> int:
            return sum(1 + hidden_count(c.children) for c in level.values())

        def walk(level: dict, prefix: str, depth_left: Optional[int]):
            for child in sorted(level):
                conn = level[child]
                p = self.probability(conn, level)
                seg = f"{prefix}--[{p:.2f},{conn.mean_delta:.2f}]-->{label(child)}"
                if conn.children:
                    if depth_left is not None and depth_left <= 1:
                        lines.append(f"{seg}--...(+{hidden_count(conn.children)})")
                    else:
                        walk(conn.children, seg,
                             None if depth_left is None else depth_left - 1)
                else:
                    lines.append(seg)

        walk(self.branches, f"-->{label(self.root)}", depth)
        return lines


class TreeStore:
    def __init__(self, max_depth: int = 15):
        self.max_depth = max_depth
        self.trees: dict[NodeId, ObservationTree] = {}
        self.touched: set[NodeId] = set()

    def get(self, root: NodeId) -> Optional[ObservationTree]:
        return self.trees.get(root)

    def fold_path(self, nodes: list[NodeId], deltas: list[float]) -> ObservationTree:
        tree = self.trees.get(nodes[0])
        if tree is None:
            tree = ObservationTree(nodes[0], self.max_depth)
            self.trees[nodes[0]] = tree
        tree.fold(nodes, deltas)
        self.touched.add(nodes[0])
        return tree

    def drop_empty(self) -> None:
        for root in [r for r, t in self.trees.items() if t.is_empty()]:
            del self.trees[root]

    def references(self, node_id: NodeId) -> bool:
        """Whether any surviving observation path mentions the node."""
        for root, tree in self.trees.items():
            if root == node_id:
                return True
            for conn in tree.iter_connections():
                if conn.child == node_id:
                    return True
        return False
