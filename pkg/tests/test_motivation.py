import numpy as np
import pytest

from rtop.config import SessionConfig
from rtop.motivation import (
    ActionRepertoire,
    PleasurePainState,
    background_reflex,
    delta_p_net,
    explore,
    explore_probability,
    happiness,
    select_action,
)
from rtop.nodes import AttentionAction, FocusAction, NodeId, NodeType, SpeechAction
from rtop.prediction import FutureNode, FutureTree, PredictionSet


def img(n):
    return NodeId(NodeType.IMAGE, n)


def aud(n):
    return NodeId(NodeType.AUDIO, n)


def spk(n):
    return NodeId(NodeType.SPEECH, n)


def chain(spec):
    """Build a FutureNode chain from [(node, p, delta), ...]."""
    head = None
    for node, p, d in reversed(spec):
        head = FutureNode(node, p, d, [head] if head else [])
    return head


def worked_example_tree() -> FutureTree:
    top = chain([(img(2), 0.7, 0.0), (img(3), 1.0, 0.0), (img(1), 1.0, 0.0)])
    lower = FutureNode(
        img(4), 0.3, 0.5,
        [
            chain([(img(5), 0.7, 1.0), (img(3), 1.0, -0.5)]),
            chain([(img(9), 0.3, 0.0), (img(7), 1.0, 0.0)]),
        ],
    )
    return FutureTree(anchor=img(1), branches=[top, lower])


class TestDeltaPNet:
    def test_worked_example_value(self):
        assert delta_p_net(worked_example_tree()) == pytest.approx(0.255, abs=1e-9)

    def test_all_zero(self):
        tree = FutureTree(anchor=img(1), branches=[chain([(img(2), 0.5, 0.0), (img(3), 1.0, 0.0)])])
        assert delta_p_net(tree) == 0.0

    def test_matches_prefix_enumeration_oracle(self):
        rng = np.random.default_rng(9)

        def random_nodes(depth, serial_start):
            serial = serial_start
            nodes = []
            width = int(rng.integers(1, 5))
            for _ in range(width):
                serial += 1
                children = random_nodes(depth - 1, serial * 10) if depth > 1 else []
                nodes.append(
                    FutureNode(img(serial), float(rng.uniform(0.05, 1.0)), float(rng.uniform(-2, 2)), children)
                )
            return nodes

        tree = FutureTree(anchor=img(1), branches=random_nodes(6, 1))

        def enumerate_sum(nodes, prefix_prob):
            total = 0.0
            for fn in nodes:
                rho = prefix_prob * fn.probability
                total += rho * fn.delta
                total += enumerate_sum(fn.children, rho)
            return total

        assert delta_p_net(tree) == pytest.approx(enumerate_sum(tree.branches, 1.0), abs=1e-12)


class TestHappiness:
    def test_empty(self):
        assert happiness(PredictionSet()) == 0.0

    def test_single_tree(self):
        pset = PredictionSet(active=[worked_example_tree()])
        assert happiness(pset) == pytest.approx(0.255, abs=1e-9)

    def test_additivity(self):
        pset = PredictionSet(active=[worked_example_tree(), worked_example_tree()])
        assert happiness(pset) == pytest.approx(0.51, abs=1e-9)


class TestSelectAction:
    def _car_tree(self):
        branches = [
            chain([(spk(1), 0.4, 0.0), (NodeId(NodeType.ATTENTION, 1), 1.0, 0.0), (aud(1), 1.0, 0.0), (aud(4), 1.0, 0.0)]),
            chain([(spk(2), 0.4, 0.0), (NodeId(NodeType.ATTENTION, 1), 1.0, 0.0), (aud(2), 1.0, 0.0), (aud(4), 1.0, 0.0)]),
            chain([(spk(3), 0.2, 0.0), (NodeId(NodeType.ATTENTION, 1), 1.0, 0.0), (aud(3), 1.0, 0.0), (aud(5), 1.0, 1.0)]),
        ]
        return FutureTree(anchor=img(10), branches=branches)

    def test_positive_reward_path_wins(self):
        pset = PredictionSet(active=[self._car_tree()])
        choice = select_action(pset)
        assert choice.node == spk(3)
        assert choice.expected == pytest.approx(0.2, abs=1e-12)

    def test_log_extract_tree(self):
        # four speech branches; only the last carries a positive change
        branches = [
            chain([(spk(1), 0.003, -3.10), (aud(1), 1.0, -3.10)]),
            chain([(spk(2), 0.010, -3.10), (aud(2), 1.0, -3.10)]),
            chain([(spk(3), 0.004, -2.10), (aud(3), 1.0, -2.10)]),
            chain([(spk(4), 0.030, 0.21), (aud(4), 0.57, 0.22)]),
        ]
        pset = PredictionSet(active=[FutureTree(anchor=img(158), branches=branches)])
        choice = select_action(pset)
        assert choice.node == spk(4)
        assert choice.expected == pytest.approx(0.030 * (0.21 + 0.57 * 0.22), abs=1e-12)

    def test_none_without_action_children(self):
        pset = PredictionSet(active=[worked_example_tree()])
        assert select_action(pset) is None

    def test_tie_breaks_probability_then_serial(self):
        branches = [
            FutureNode(spk(5), 0.2, 1.0),
            FutureNode(spk(4), 0.4, 0.5),  # same expected 0.2, higher probability
            FutureNode(spk(3), 0.4, 0.5),  # same value and probability, lower serial
        ]
        pset = PredictionSet(active=[FutureTree(anchor=img(1), branches=branches)])
        assert select_action(pset).node == spk(3)

    def test_scale_equivariance(self):
        def scaled(factor):
            def scale(fn):
                return FutureNode(fn.node, fn.probability, fn.delta * factor, [scale(c) for c in fn.children])

            tree = self._car_tree()
            tree.branches = [scale(fn) for fn in tree.branches]
            return select_action(PredictionSet(active=[tree])).node

        assert scaled(1.0) == scaled(0.25) == scaled(40.0)


class TestExplore:
    def _repertoire(self):
        return ActionRepertoire(
            vocabulary={"wheel": ("w", "i", "l"), "car": ("k", "A", "r")},
            focus_moves=[FocusAction(16, 0, 0), FocusAction(-16, 0, 0)],
            attention_moves=["visual", "audio"],
        )

    def test_reproducible(self):
        weights = {"speech": 0.5, "focus": 0.3, "attention": 0.2}
        seq1 = [explore(self._repertoire(), np.random.default_rng(5), weights) for _ in range(10)]
        seq2 = [explore(self._repertoire(), np.random.default_rng(5), weights) for _ in range(10)]
        assert seq1 == seq2

    def test_focus_only(self):
        rep = ActionRepertoire(focus_moves=[FocusAction(0, 0, 16)])
        rng = np.random.default_rng(1)
        for _ in range(20):
            assert isinstance(explore(rep, rng, {"focus": 1.0}), FocusAction)

    def test_kind_frequencies(self):
        weights = {"speech": 0.5, "focus": 0.3, "attention": 0.2}
        rng = np.random.default_rng(123)
        rep = self._repertoire()
        counts = {"speech": 0, "focus": 0, "attention": 0}
        n = 10000
        for _ in range(n):
            action = explore(rep, rng, weights)
            if isinstance(action, SpeechAction):
                counts["speech"] += 1
            elif isinstance(action, FocusAction):
                counts["focus"] += 1
            else:
                counts["attention"] += 1
        for kind, weight in weights.items():
            assert abs(counts[kind] / n - weight) < 0.02

    def test_exploration_contract(self):
        from rtop.motivation import ActionChoice

        eps0 = SessionConfig(epsilon=0.0)
        eps1 = SessionConfig(epsilon=1.0)
        positive = ActionChoice(spk(1), 0.5, 0.3)
        negative = ActionChoice(spk(1), -0.5, 0.3)
        assert explore_probability(positive, eps0) == 0.0
        assert explore_probability(negative, eps0) == 0.0  # best always used at eps=0
        assert explore_probability(positive, eps1) == 1.0
        assert explore_probability(None, eps0) == 1.0  # nothing learned yet

    def test_unpromising_boost(self):
        from rtop.motivation import ActionChoice

        config = SessionConfig(epsilon=0.05, unpromising_boost=10.0)
        assert explore_probability(ActionChoice(spk(1), 0.5, 0.3), config) == 0.05
        assert explore_probability(ActionChoice(spk(1), -0.5, 0.3), config) == 0.5


class TestPleasurePain:
    def test_p_net_formula(self):
        pp = PleasurePainState({"hunger": 1.0, "comfort": 1.0})
        pp.levels["hunger"] = 6.0
        pp.levels["comfort"] = 2.0
        assert pp.p_net == -4.0  # -6 + 2

    def test_feed_quenches_hunger(self):
        pp = PleasurePainState()
        pp.levels["hunger"] = 6.0
        pp.apply_reward("feed")
        assert pp.levels["hunger"] == 0.0

    def test_comfort_delta(self):
        pp = PleasurePainState()
        pp.apply_reward("comfort_delta", 2.0)
        assert pp.levels["comfort"] == 2.0

    def test_comfort_clamps(self):
        pp = PleasurePainState()
        pp.levels["comfort"] = 4.0
        sense, level, clamped = pp.apply_reward("comfort_delta", 3.0)
        assert level == 5.0 and clamped

    def test_hunger_clamps_at_ten(self):
        pp = PleasurePainState()
        for _ in range(14):
            pp.hunger_step()
        assert pp.levels["hunger"] == 10.0

    def test_coefficients_weight_senses(self):
        pp = PleasurePainState({"hunger": 2.0, "comfort": 0.5})
        pp.levels["hunger"] = 3.0
        pp.levels["comfort"] = 4.0
        assert pp.p_net == -6.0 + 2.0


class TestReflex:
    def test_loud_onset(self):
        assert background_reflex("audio", 50.0, 1.0)

    def test_below_threshold(self):
        assert not background_reflex("visual", 1.0, 1.5)

    def test_strictness(self):
        assert not background_reflex("audio", 1.0, 1.0)
