"""Trainable-agent simulator: raw trace learning, offline generalization,
superimposition projections, with a scripted deterministic environment."""

from .config import SessionConfig
from .kb import KnowledgeBase
from .nodes import NodeId, NodeType

__version__ = "0.1.0"

__all__ = ["SessionConfig", "KnowledgeBase", "NodeId", "NodeType", "__version__"]
