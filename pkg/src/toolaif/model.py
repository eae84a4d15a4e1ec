"""Factored generative models for the tool grid: Tool State and Affordance variants."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .categorical import SUM_TOL, Axis, CategoricalTensor, DirichletTensor, dirichlet_mean
from .env import (
    ACTION_LABELS,
    SOLVING_PAIR,
    Action,
    Location,
    Room,
    Tool,
    next_room_tool,
    parse_location,
    solving_pairs,
)

REWARD_PREFERENCE = 50.0

TOOL_STATE = "ToolState"
AFFORDANCE = "Affordance"
MODEL_VARIANTS = (TOOL_STATE, AFFORDANCE)

# affordance (x_reach, y_reach) <-> observed tool
REACH_TO_TOOL = {(0, 0): Tool.NULL, (0, 1): Tool.V, (1, 0): Tool.H, (1, 1): Tool.HV}
TOOL_TO_REACH = {tool: reach for reach, tool in REACH_TO_TOOL.items()}


@dataclass(frozen=True)
class FactorSpec:
    name: str
    cardinality: int
    transition_deps: tuple[str, ...]
    controlled_by: Optional[str] = "Action"
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "transition_deps", tuple(self.transition_deps))
        if self.cardinality < 2:
            raise ValueError(f"factor {self.name} needs cardinality >= 2")
        if self.name not in self.transition_deps:
            raise ValueError(f"factor {self.name} must depend on itself")
        if len(set(self.transition_deps)) != len(self.transition_deps):
            raise ValueError(f"factor {self.name} has duplicate dependencies")


@dataclass(frozen=True)
class ModalitySpec:
    name: str
    cardinality: int
    obs_deps: tuple[str, ...]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "obs_deps", tuple(self.obs_deps))
        if self.cardinality < 2:
            raise ValueError(f"modality {self.name} needs cardinality >= 2")
        if not self.obs_deps:
            raise ValueError(f"modality {self.name} has no state dependencies")


@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    detail: str = ""

    def __str__(self):
        return f"{self.kind}[{self.where}]: {self.detail}"


@dataclass(frozen=True, eq=False)
class GenerativeModel:
    """A/B/C/D arrays plus the dependency graph that indexes them.

    ``A[m]`` has axes ``(obs, *obs_deps)``; ``B[f]`` has axes
    ``(next, *transition_deps, control)``. ``pB[f]`` (when learnable) is congruent
    with ``B[f]``. Arrays are plain numpy; :func:`validate` checks the invariants.
    """

    factors: tuple[FactorSpec, ...]
    modalities: tuple[ModalitySpec, ...]
    controls: tuple[tuple[str, int], ...]
    A: tuple[np.ndarray, ...]
    B: tuple[np.ndarray, ...]
    C: tuple[np.ndarray, ...]
    D: tuple[np.ndarray, ...]
    pB: Optional[tuple[Optional[np.ndarray], ...]] = None
    pA: Optional[tuple[Optional[np.ndarray], ...]] = None
    variant: str = ""
    reward_location: Optional[Location] = None
    hv_solves_adjacent: bool = False
    control_labels: tuple[str, ...] = field(default=tuple(ACTION_LABELS[a] for a in Action))

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    @property
    def modality_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.modalities)

    @property
    def num_controls(self) -> int:
        return self.controls[0][1]

    def factor_index(self, name: str) -> int:
        return self.factor_names.index(name)

    def modality_index(self, name: str) -> int:
        return self.modality_names.index(name)

    def transition_dep_indices(self, f: int) -> tuple[int, ...]:
        return tuple(self.factor_index(d) for d in self.factors[f].transition_deps)

    def obs_dep_indices(self, m: int) -> tuple[int, ...]:
        return tuple(self.factor_index(d) for d in self.modalities[m].obs_deps)

    @property
    def learns_B(self) -> bool:
        return self.pB is not None and any(p is not None for p in self.pB)

    def B_axes(self, f: int) -> tuple[Axis, ...]:
        spec = self.factors[f]
        deps = [Axis(f"{d}", self.factors[self.factor_index(d)].cardinality) for d in spec.transition_deps]
        name, card = self.controls[0]
        return (Axis(f"{spec.name}'", spec.cardinality), *deps, Axis(name, card))

    def A_axes(self, m: int) -> tuple[Axis, ...]:
        spec = self.modalities[m]
        deps = [Axis(d, self.factors[self.factor_index(d)].cardinality) for d in spec.obs_deps]
        return (Axis(f"o:{spec.name}", spec.cardinality), *deps)

    def categorical_A(self, m: int) -> CategoricalTensor:
        return CategoricalTensor(self.A_axes(m), self.A[m])

    def categorical_B(self, f: int) -> CategoricalTensor:
        return CategoricalTensor(self.B_axes(f), self.B[f])

    def dirichlet_B(self, f: int) -> Optional[DirichletTensor]:
        if self.pB is None or self.pB[f] is None:
            return None
        return DirichletTensor(self.B_axes(f), self.pB[f])


@dataclass(frozen=True)
class Policy:
    controls: tuple[int, ...]

    def __len__(self):
        return len(self.controls)


class InvalidModel(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def _check_column_sums(arr, where, kind="StochasticityViolation"):
    out = []
    if np.any(arr < 0):
        out.append(Violation("NegativeProbability", where, "negative entries"))
    sums = arr.sum(axis=0)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=SUM_TOL):
        worst = float(np.max(np.abs(sums - 1.0)))
        out.append(Violation(kind, where, f"column sums deviate from 1 by up to {worst:.3g}"))
    return out


def validate(model: GenerativeModel) -> list[Violation]:
    """Return every broken model invariant; an empty list means the model is well formed."""
    violations: list[Violation] = []
    names = model.factor_names
    cards = {f.name: f.cardinality for f in model.factors}
    if len(set(names)) != len(names):
        violations.append(Violation("DuplicateFactor", "factors", str(names)))
    if len(model.controls) != 1:
        violations.append(Violation("SchemaMismatch", "controls", "exactly one control factor is supported"))
    n_ctrl = model.controls[0][1] if model.controls else 0

    for f, spec in enumerate(model.factors):
        where = f"B[{spec.name}]"
        unknown = [d for d in spec.transition_deps if d not in cards]
        if unknown:
            violations.append(Violation("UnknownDependency", where, str(unknown)))
            continue
        expected = (spec.cardinality, *(cards[d] for d in spec.transition_deps), n_ctrl)
        if f >= len(model.B) or model.B[f].shape != expected:
            got = model.B[f].shape if f < len(model.B) else None
            violations.append(Violation("SchemaMismatch", where, f"expected {expected}, got {got}"))
            continue
        violations += _check_column_sums(model.B[f], where)
        if model.pB is not None and model.pB[f] is not None:
            pB = model.pB[f]
            if pB.shape != expected:
                violations.append(Violation("SchemaMismatch", f"pB[{spec.name}]", f"shape {pB.shape}"))
            elif np.any(pB <= 0):
                violations.append(Violation("NonPositiveConcentration", f"pB[{spec.name}]"))
            elif not np.allclose(pB / pB.sum(axis=0, keepdims=True), model.B[f], rtol=0.0, atol=SUM_TOL):
                violations.append(Violation("PriorMismatch", where, "Dirichlet mean differs from B"))
        if f >= len(model.D) or model.D[f].shape != (spec.cardinality,):
            violations.append(Violation("SchemaMismatch", f"D[{spec.name}]"))
        else:
            violations += _check_column_sums(model.D[f], f"D[{spec.name}]")

    for m, spec in enumerate(model.modalities):
        where = f"A[{spec.name}]"
        unknown = [d for d in spec.obs_deps if d not in cards]
        if unknown:
            violations.append(Violation("UnknownDependency", where, str(unknown)))
            continue
        expected = (spec.cardinality, *(cards[d] for d in spec.obs_deps))
        if m >= len(model.A) or model.A[m].shape != expected:
            violations.append(Violation("SchemaMismatch", where, f"expected {expected}"))
        else:
            violations += _check_column_sums(model.A[m], where)
        if m >= len(model.C) or model.C[m].shape != (spec.cardinality,):
            violations.append(Violation("PreferenceLengthMismatch", f"C[{spec.name}]"))
    return violations


def _checked(model: GenerativeModel) -> GenerativeModel:
    problems = validate(model)
    if problems:
        raise InvalidModel(problems)
    return model


def _reward_table(location: Location, hv_solves_adjacent: bool) -> np.ndarray:
    """P(Reward | room, tool) as a (2, 4) indicator."""
    table = np.zeros((len(Room), len(Tool)))
    for room, tool in solving_pairs(location, hv_solves_adjacent):
        table[room, tool] = 1.0
    return table


def _onehot(n, i):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def _room_factor_B() -> np.ndarray:
    B = np.zeros((2, 2, len(Action)))
    for room, a in itertools.product(Room, Action):
        nxt, _ = next_room_tool(room, Tool.NULL, a)
        B[nxt, room, a] = 1.0
    return B


_ROOM_LABELS = ("Left", "Right")
_TOOL_LABELS = ("Null", "V", "H", "HV")
_REWARD_LABELS = ("Null", "Reward")


def build_tool_state_model(reward_location, hv_solves_adjacent: bool = False) -> GenerativeModel:
    loc = parse_location(reward_location)
    factors = (
        FactorSpec("Room", 2, ("Room",), labels=_ROOM_LABELS),
        FactorSpec("Tool", 4, ("Tool", "Room"), labels=_TOOL_LABELS),
    )
    modalities = (
        ModalitySpec("Room", 2, ("Room",), labels=_ROOM_LABELS),
        ModalitySpec("Tool", 4, ("Tool",), labels=_TOOL_LABELS),
        ModalitySpec("Reward", 2, ("Room", "Tool"), labels=_REWARD_LABELS),
    )

    B_tool = np.zeros((4, 4, 2, len(Action)))
    for tool, room, a in itertools.product(Tool, Room, Action):
        _, nxt = next_room_tool(room, tool, a)
        B_tool[nxt, tool, room, a] = 1.0

    p_reward = _reward_table(loc, hv_solves_adjacent)
    A_reward = np.stack([1.0 - p_reward, p_reward])

    return _checked(GenerativeModel(
        factors=factors,
        modalities=modalities,
        controls=(("Action", len(Action)),),
        A=(np.eye(2), np.eye(4), A_reward),
        B=(_room_factor_B(), B_tool),
        C=(np.zeros(2), np.zeros(4), np.array([0.0, REWARD_PREFERENCE])),
        D=(_onehot(2, Room.LEFT), _onehot(4, Tool.NULL)),
        variant=TOOL_STATE,
        reward_location=loc,
        hv_solves_adjacent=hv_solves_adjacent,
    ))


def _reach_B(native_room: Room) -> np.ndarray:
    """Binary reach factor gained by picking up in ``native_room`` and lost on drop."""
    B = np.zeros((2, 2, 2, len(Action)))
    for reach, room, a in itertools.product((0, 1), Room, Action):
        nxt = reach
        if a == Action.PICKUP and room == native_room:
            nxt = 1
        elif a == Action.DROP:
            nxt = 0
        B[nxt, reach, room, a] = 1.0
    return B


def build_affordance_model(reward_location, hv_solves_adjacent: bool = False) -> GenerativeModel:
    loc = parse_location(reward_location)
    factors = (
        FactorSpec("Room", 2, ("Room",), labels=_ROOM_LABELS),
        FactorSpec("XReach", 2, ("XReach", "Room"), labels=("0", "1")),
        FactorSpec("YReach", 2, ("YReach", "Room"), labels=("0", "1")),
    )
    modalities = (
        ModalitySpec("Room", 2, ("Room",), labels=_ROOM_LABELS),
        ModalitySpec("Tool", 4, ("XReach", "YReach"), labels=_TOOL_LABELS),
        ModalitySpec("Reward", 2, ("Room", "XReach", "YReach"), labels=_REWARD_LABELS),
    )

    A_tool = np.zeros((4, 2, 2))
    for (x, y), tool in REACH_TO_TOOL.items():
        A_tool[tool, x, y] = 1.0

    by_tool = _reward_table(loc, hv_solves_adjacent)
    p_reward = np.zeros((2, 2, 2))
    for room, (x, y) in itertools.product(Room, REACH_TO_TOOL):
        p_reward[room, x, y] = by_tool[room, REACH_TO_TOOL[(x, y)]]
    A_reward = np.stack([1.0 - p_reward, p_reward])

    return _checked(GenerativeModel(
        factors=factors,
        modalities=modalities,
        controls=(("Action", len(Action)),),
        A=(np.eye(2), A_tool, A_reward),
        B=(_room_factor_B(), _reach_B(Room.RIGHT), _reach_B(Room.LEFT)),
        C=(np.zeros(2), np.zeros(4), np.array([0.0, REWARD_PREFERENCE])),
        D=(_onehot(2, Room.LEFT), _onehot(2, 0), _onehot(2, 0)),
        variant=AFFORDANCE,
        reward_location=loc,
        hv_solves_adjacent=hv_solves_adjacent,
    ))


def build_model(variant: str, reward_location, hv_solves_adjacent: bool = False) -> GenerativeModel:
    if variant == TOOL_STATE:
        return build_tool_state_model(reward_location, hv_solves_adjacent)
    if variant == AFFORDANCE:
        return build_affordance_model(reward_location, hv_solves_adjacent)
    raise ValueError(f"unknown model variant {variant!r}; expected one of {MODEL_VARIANTS}")


def with_reward_location(model: GenerativeModel, reward_location) -> GenerativeModel:
    """Swap the reward mapping (A) while keeping transition beliefs untouched."""
    fresh = build_model(model.variant, reward_location, model.hv_solves_adjacent)
    return replace(model, A=fresh.A, reward_location=fresh.reward_location)


def set_uniform_transition_prior(model: GenerativeModel, alpha_init: float = 1.0) -> GenerativeModel:
    if not alpha_init > 0:
        raise ValueError(f"alpha_init must be positive, got {alpha_init}")
    pB = tuple(np.full(b.shape, float(alpha_init)) for b in model.B)
    B = tuple(p / p.sum(axis=0, keepdims=True) for p in pB)
    return _checked(replace(model, pB=pB, B=B))


def refresh_B(model: GenerativeModel, pB) -> GenerativeModel:
    """Install new transition concentrations and their mean as B."""
    B = tuple(
        model.B[f] if p is None else dirichlet_mean(DirichletTensor(model.B_axes(f), p)).values
        for f, p in enumerate(pB)
    )
    return replace(model, pB=tuple(pB), B=B)


def enumerate_policies(model_or_num_controls, horizon: int) -> list[Policy]:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = (
        model_or_num_controls.num_controls
        if isinstance(model_or_num_controls, GenerativeModel)
        else int(model_or_num_controls)
    )
    return [Policy(tuple(p)) for p in itertools.product(range(n), repeat=horizon)]


def policy_array(policies) -> np.ndarray:
    return np.array([p.controls for p in policies], dtype=np.intp)


def solving_state(model: GenerativeModel) -> list[tuple[int, ...]]:
    """Joint hidden-state settings (over the Reward modality's deps) with P(Reward)=1."""
    m = model.modality_index("Reward")
    idx = np.argwhere(np.isclose(model.A[m][1], 1.0))
    return [tuple(int(i) for i in row) for row in idx]


__all__ = [
    "AFFORDANCE",
    "TOOL_STATE",
    "FactorSpec",
    "GenerativeModel",
    "InvalidModel",
    "ModalitySpec",
    "Policy",
    "REACH_TO_TOOL",
    "SOLVING_PAIR",
    "TOOL_TO_REACH",
    "Violation",
    "build_affordance_model",
    "build_model",
    "build_tool_state_model",
    "enumerate_policies",
    "policy_array",
    "refresh_B",
    "set_uniform_transition_prior",
    "solving_state",
    "validate",
    "with_reward_location",
]
