"""Pleasure-pain state, happiness over predictions, and action choice.

Happiness is the summed expected pleasure-pain change over all active
future-trees; learned actions maximize it, with seeded exploration filling
the gaps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import SessionConfig
from .nodes import AttentionAction, FocusAction, NodeId, SpeechAction
from .prediction import FutureNode, FutureTree, PredictionSet

SENSE_BOUNDS = {"hunger": (0.0, 10.0), "comfort": (-5.0, 5.0)}
# hunger is a pain: a level of h contributes -h to the net value
SENSE_SIGNS = {"hunger": -1.0, "comfort": 1.0}

CONSONANTS = ("p", "b", "t", "d", "k", "g", "m", "n", "s", "l", "r", "w", "h")
VOWELS = ("a", "e", "i", "o", "u", "A", "O", "{", "@")
CONSONANT_MS = 100
VOWEL_MS = 500


class PleasurePainState:
    """Per-sense scalar levels with a derived weighted net value."""

    def __init__(self, coefficients: Optional[dict] = None):
        self.levels: dict[str, float] = {"hunger": 0.0, "comfort": 0.0}
        self.coefficients: dict[str, float] = dict(coefficients or {"hunger": 1.0, "comfort": 1.0})

    @property
    def p_net(self) -> float:
        return sum(
            self.coefficients.get(sense, 1.0) * SENSE_SIGNS.get(sense, 1.0) * level
            for sense, level in self.levels.items()
        )

    def set_level(self, sense: str, value: float) -> tuple[float, bool]:
        lo, hi = SENSE_BOUNDS.get(sense, (-np.inf, np.inf))
        clamped = min(max(value, lo), hi)
        self.levels[sense] = clamped
        return clamped, clamped != value

    def apply_reward(self, kind: str, amount: float = 0.0) -> tuple[str, float, bool]:
        """feed zeroes hunger; comfort_delta shifts comfort with clamping."""
        if kind == "feed":
            self.levels["hunger"] = 0.0
            return "hunger", 0.0, False
        if kind == "comfort_delta":
            value, clamped = self.set_level("comfort", self.levels["comfort"] + amount)
            return "comfort", value, clamped
        raise ValueError(f"unknown reward kind {kind!r}")

    def hunger_step(self) -> float:
        value, _ = self.set_level("hunger", self.levels["hunger"] + 1.0)
        return value


@dataclass
class AttentionState:
    focus: str = "visual"  # visual | audio | thought
    visual_focus: tuple[int, int, int] = (0, 0, 32)  # cx, cy, side (top-left corner)


@dataclass
class ActionRepertoire:
    vocabulary: dict = field(default_factory=dict)  # word -> phone tuple
    focus_moves: list = field(default_factory=list)  # FocusAction deltas
    attention_moves: list = field(default_factory=list)  # "visual" / "audio"
    free_speech: bool = False  # synthesize phone sequences when True

    def kinds(self) -> list[str]:
        out = []
        if self.vocabulary or self.free_speech:
            out.append("speech")
        if self.focus_moves:
            out.append("focus")
        if self.attention_moves:
            out.append("attention")
        return out

    def __bool__(self) -> bool:
        return bool(self.kinds())


def delta_p_net(tree: FutureTree) -> float:
    """Expected pleasure-pain change: sum over nodes of net-probability x edge
    delta. One running total in depth-first sibling order keeps the result
    reproducible down to the last bit."""
    total = 0.0

    def walk(nodes, prefix_rho: float) -> None:
        nonlocal total
        for fn in nodes:
            rho = prefix_rho * fn.probability
            total += rho * fn.delta
            walk(fn.children, rho)

    walk(tree.branches, 1.0)
    return total


def happiness(pset: PredictionSet) -> float:
    return sum(delta_p_net(tree) for tree in pset.active)


def _subtree_expectation(fn: FutureNode) -> float:
    """Edge delta plus the expected delta of everything below, relative to fn's parent."""
    total = fn.delta
    stack = [(child, child.probability) for child in fn.children]
    while stack:
        node, rho = stack.pop()
        total += rho * node.delta
        stack.extend((c, rho * c.probability) for c in node.children)
    return total


@dataclass
class ActionChoice:
    node: NodeId
    expected: float
    probability: float


def select_action(pset: PredictionSet) -> Optional[ActionChoice]:
    """Best action child reachable at any active tree's cursor.

    Ranked by expected gain (branch probability x subtree delta expectation);
    ties go to higher branch probability, then lower serial.
    """
    best: Optional[tuple] = None
    for _tree, fn in pset.action_children():
        value = fn.probability * _subtree_expectation(fn)
        key = (-value, -fn.probability, fn.node)
        if best is None or key < best[0]:
            best = (key, ActionChoice(fn.node, value, fn.probability))
    return None if best is None else best[1]


def generate_phone_sequence(rng: np.random.Generator) -> tuple[str, ...]:
    """Random babble skewed toward a few consonants and vowels; alternating
    consonant/vowel shape, 2-4 phones."""
    n = int(rng.integers(2, 5))
    phones = []
    for i in range(n):
        pool = CONSONANTS if i % 2 == 0 else VOWELS
        weights = np.linspace(2.0, 1.0, len(pool))
        weights /= weights.sum()
        phones.append(str(rng.choice(pool, p=weights)))
    return tuple(phones)


def speech_duration_ms(phones: tuple[str, ...]) -> int:
    return sum(VOWEL_MS if p in VOWELS else CONSONANT_MS for p in phones)


def explore(
    repertoire: ActionRepertoire,
    rng: np.random.Generator,
    weights: dict,
    current_focus: str = "visual",
) -> object:
    """Draw an action payload: kind by configured weights, then uniform member."""
    kinds = repertoire.kinds()
    if not kinds:
        raise ValueError("empty repertoire")
    w = np.array([weights.get(k, 0.0) for k in kinds], dtype=np.float64)
    if w.sum() <= 0:
        w = np.ones(len(kinds))
    w /= w.sum()
    kind = str(rng.choice(kinds, p=w))
    if kind == "speech":
        if repertoire.vocabulary:
            word = sorted(repertoire.vocabulary)[int(rng.integers(0, len(repertoire.vocabulary)))]
            return SpeechAction(tuple(repertoire.vocabulary[word]))
        return SpeechAction(generate_phone_sequence(rng))
    if kind == "focus":
        move = repertoire.focus_moves[int(rng.integers(0, len(repertoire.focus_moves)))]
        return move if isinstance(move, FocusAction) else FocusAction(*move)
    targets = [t for t in repertoire.attention_moves if t != current_focus] or repertoire.attention_moves
    return AttentionAction(targets[int(rng.integers(0, len(targets)))])


def explore_probability(best: Optional[ActionChoice], config: SessionConfig) -> float:
    """Exploration rate: eps normally, boosted when the best learned action
    promises no gain, 1 when nothing is learned. Reduces to the exploration
    contract exactly at eps=0 and eps=1."""
    if best is None:
        return 1.0
    if best.expected > 0.0:
        return min(1.0, config.epsilon)
    return min(1.0, config.epsilon * config.unpromising_boost)


def background_reflex(channel: str, summary_delta: float, threshold: float) -> bool:
    """A large unattended change requests attention (strict threshold)."""
    return summary_delta > threshold
