"""Discrete active-inference agents for a two-room tool-use task."""

__version__ = "0.1.0"

from .engine import Agent, AgentConfig, evaluate_policies, infer_state, update_dirichlet  # noqa: E402
from .env import Action, Location, Room, Tool, oracle_optimal_steps  # noqa: E402
from .model import build_affordance_model, build_model, build_tool_state_model, validate  # noqa: E402

__all__ = [
    "Action", "Agent", "AgentConfig", "Location", "Room", "Tool",
    "build_affordance_model", "build_model", "build_tool_state_model", "evaluate_policies",
    "infer_state", "oracle_optimal_steps", "update_dirichlet", "validate",
]
