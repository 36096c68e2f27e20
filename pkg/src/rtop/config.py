"""Session configuration: every tunable the simulator exposes, with defaults.

A config is serialized into each KB snapshot so a saved knowledge base
replays identically.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

DEFAULT_VOCABULARY: dict[str, tuple[str, ...]] = {
    "apple": ("A", "p", "l"),
    "ball": ("b", "O", "l"),
    "car": ("k", "A", "r"),
    "cat": ("k", "{", "t"),
    "hello": ("h", "e", "l", "o"),
    "mumma": ("m", "a", "m", "A"),
    "papa": ("p", "A", "p", "A"),
    "wheel": ("w", "i", "l"),
}


@dataclass
class SessionConfig:
    seed: int = 7
    tick_ms: int = 250

    # trace windowing
    path_length: int = 16
    stride: int = 4
    jump_hop: int = 5
    jump_enabled: bool = True

    # matching and candidate retrieval
    image_match_threshold: float = 0.5      # mean |dL| on the 0-7 lightness scale
    index_leeway_mean_lightness: float = 0.75
    index_leeway_var_lightness: float = 2.0
    audio_tol_var_amplitude: float = 0.15   # relative
    audio_tol_mean_cross_rate: float = 0.10  # relative
    audio_index_leeway_factor: float = 0.5  # index leeway as a fraction of probe value

    # prediction
    context_depth: int = 3
    k_active: int = 8
    k_background: int = 2
    rebuild_min_probability: float = 0.05
    rebuild_min_depth: int = 2

    # motivation / action
    coefficients: dict[str, float] = field(
        default_factory=lambda: {"hunger": 1.0, "comfort": 1.0}
    )
    epsilon: float = 0.1
    unpromising_boost: float = 10.0  # explore prob = min(1, eps*boost) when best gain <= 0
    explore_weights: dict[str, float] = field(
        default_factory=lambda: {"speech": 0.5, "focus": 0.3, "attention": 0.2}
    )
    reflex_visual_threshold: float = 1.5    # |d mean lightness|
    reflex_audio_threshold: float = 1.0     # relative var-amplitude change
    hunger_interval_ticks: int = 40         # +1 every 10 s at 250 ms/tick; 0 disables
    emit_sense_nodes: bool = True
    action_interval: int = 1                # min ticks between decisions

    # generalization
    trace_threshold: int = 512
    d_max_divisor: int = 8                  # d_max = ceil(path_len / divisor)
    merge_slack_l: float = 0.5
    merge_tol_cutoff: float = 2.0
    merge_min_must_match: float = 0.25
    audio_merge_slack: float = 0.10         # relative widening of merged tolerances
    audio_merge_reject_factor: float = 3.0  # reject when deviation > factor * match tol
    focus_merge_slack_px: float = 2.0
    focus_merge_cutoff_px: float = 32.0
    group_wildcard_size: int = 8
    global_groups: bool = True
    provenance_limit: int = 16

    # innovation
    thought_budget: int = 8
    frontier_depth: int = 3

    # environment / session
    initial_attention: str = "visual"
    initial_focus: tuple[int, int, int] = (0, 0, 64)
    focus_side_min: int = 32
    vocabulary: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: {k: tuple(v) for k, v in DEFAULT_VOCABULARY.items()}
    )

    def to_json(self) -> str:
        data = asdict(self)
        data["vocabulary"] = {k: list(v) for k, v in self.vocabulary.items()}
        data["initial_focus"] = list(self.initial_focus)
        return json.dumps(data, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SessionConfig":
        data = json.loads(text)
        if "vocabulary" in data:
            data["vocabulary"] = {k: tuple(v) for k, v in data["vocabulary"].items()}
        if "initial_focus" in data:
            data["initial_focus"] = tuple(data["initial_focus"])
        return cls(**data)
