import random

import numpy as np
import pytest

from rtop.nodes import NodeId, NodeType
from rtop.trees import ObservationTree, TreeStore


def node(n: int) -> NodeId:
    return NodeId(NodeType.IMAGE, n)


A, B, C, D, E = (node(i) for i in range(1, 6))


def fold_many(tree: ObservationTree, path, deltas=None, times=1):
    deltas = deltas or [0.0] * (len(path) - 1)
    for _ in range(times):
        tree.fold(path, deltas)


class TestFold:
    def test_probability_formation(self):
        tree = ObservationTree(A)
        fold_many(tree, [A, B, C], times=7)
        fold_many(tree, [A, D, E], times=3)
        level = tree.branches
        assert tree.probability(level[B], level) == 0.7
        assert tree.probability(level[D], level) == 0.3

    def test_single_path_probability_one(self):
        tree = ObservationTree(A)
        fold_many(tree, [A, B, C, D])
        for conn in tree.iter_connections():
            level = {conn.child: conn}
            assert tree.probability(conn, level) == 1.0

    def test_delta_accumulation_is_running_mean(self):
        tree = ObservationTree(A)
        tree.fold([A, B], [1.0])
        tree.fold([A, B], [3.0])
        assert tree.branches[B].mean_delta == 2.0

    def test_depth_bound(self):
        tree = ObservationTree(A, max_depth=2)
        tree.fold([A, B, C, D, E], [0.0] * 4)
        paths = tree.paths()
        assert paths[0][0] == [A, B, C]


class TestFrequencyOracle:
    def test_hundred_random_paths(self):
        rng = random.Random(42)
        store = TreeStore(max_depth=15)
        alphabet = [node(i) for i in range(2, 8)]
        folded = []
        for _ in range(100):
            length = rng.randint(2, 6)
            path = [A] + [rng.choice(alphabet) for _ in range(length - 1)]
            deltas = [rng.randint(-8, 8) / 8.0 for _ in range(length - 1)]
            store.fold_path(path, deltas)
            folded.append((path, deltas))

        # independent prefix counter over the raw path multiset
        counts, delta_sums = {}, {}
        for path, deltas in folded:
            for i in range(1, len(path)):
                prefix = tuple(path[: i + 1])
                counts[prefix] = counts.get(prefix, 0) + 1
                delta_sums[prefix] = delta_sums.get(prefix, 0.0) + deltas[i - 1]

        tree = store.get(A)

        def check(level, prefix):
            sibling_total = sum(c.count for c in level.values())
            for child, conn in level.items():
                key = prefix + (child,)
                assert conn.count == counts[key]
                assert conn.delta_p_sum == delta_sums[key]
                expected_p = counts[key] / sibling_total
                assert tree.probability(conn, level) == expected_p
                check(conn.children, key)

        check(tree.branches, (A,))

    def test_sibling_probabilities_sum_to_one(self):
        rng = random.Random(7)
        tree = ObservationTree(A)
        for _ in range(50):
            path = [A] + [node(rng.randint(2, 6)) for _ in range(rng.randint(1, 5))]
            tree.fold(path, [0.0] * (len(path) - 1))

        def check(level):
            if not level:
                return
            total = sum(tree.probability(c, level) for c in level.values())
            assert total == pytest.approx(1.0, abs=1e-9)
            for conn in level.values():
                check(conn.children)

        check(tree.branches)


class TestInvariants:
    def test_count_conservation(self):
        tree = ObservationTree(A)
        fold_many(tree, [A, B, C], times=5)
        fold_many(tree, [A, B], times=2)  # shorter path ends mid-tree

        def check(level):
            for conn in level.values():
                assert conn.count >= sum(c.count for c in conn.children.values())
                check(conn.children)

        check(tree.branches)

    def test_tree_locality_under_reversal(self):
        store = TreeStore()
        store.fold_path([node(4), node(3), node(2), node(1)], [0.0] * 3)
        before = _dump(store.get(node(4)))
        store.fold_path([node(1), node(2), node(3), node(4)], [0.0] * 3)
        assert _dump(store.get(node(4))) == before

    def test_replay_determinism(self):
        paths = []
        rng = random.Random(3)
        for _ in range(40):
            length = rng.randint(2, 5)
            path = [A] + [node(rng.randint(2, 6)) for _ in range(length - 1)]
            deltas = [rng.randint(-4, 4) / 4.0 for _ in range(length - 1)]  # dyadic
            paths.append((path, deltas))
        dumps = []
        for seed in (0, 1, 2):
            shuffled = list(paths)
            random.Random(seed).shuffle(shuffled)
            tree = ObservationTree(A)
            for path, deltas in shuffled:
                tree.fold(path, deltas)
            dumps.append(_dump(tree))
        assert dumps[0] == dumps[1] == dumps[2]

    def test_total_leaf_mass(self):
        tree = ObservationTree(A)
        fold_many(tree, [A, B, C], times=7)
        fold_many(tree, [A, D, E], times=3)
        assert tree.total_leaf_mass() == 10


class TestRender:
    def test_two_branch_rendering(self):
        tree = ObservationTree(A)
        fold_many(tree, [A, B, C], times=7)
        fold_many(tree, [A, D, E], times=3)
        lines = tree.render()
        assert lines == [
            "-->IMG.1--[0.70,0.00]-->IMG.2--[1.00,0.00]-->IMG.3",
            "-->IMG.1--[0.30,0.00]-->IMG.4--[1.00,0.00]-->IMG.5",
        ]

    def test_depth_limit_elides(self):
        tree = ObservationTree(A)
        fold_many(tree, [A, B, C, D, E])
        (line,) = tree.render(depth=2)
        assert line.endswith("--...(+2)")


def _dump(tree):
    def level(conns):
        return sorted(
            (str(child), c.count, c.delta_p_sum, level(c.children))
            for child, c in conns.items()
        )

    return level(tree.branches)
