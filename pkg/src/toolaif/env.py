"""Ground-truth tool grid: two walkable rooms, tools V and H, and a reward room."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum, IntEnum


class Room(IntEnum):
    LEFT = 0
    RIGHT = 1


class Tool(IntEnum):
    NULL = 0
    V = 1
    H = 2
    HV = 3


class Action(IntEnum):
    NULL = 0
    MOVE = 1
    PICKUP = 2
    DROP = 3

    @property
    def label(self) -> str:
        return ACTION_LABELS[self]


class RewardObs(IntEnum):
    NULL = 0
    REWARD = 1


ACTION_LABELS = {
    Action.NULL: "Null",
    Action.MOVE: "Move",
    Action.PICKUP: "Pick-up",
    Action.DROP: "Drop",
}
ROOM_LABELS = {Room.LEFT: "Left", Room.RIGHT: "Right"}
TOOL_LABELS = {Tool.NULL: "Null", Tool.V: "V", Tool.H: "H", Tool.HV: "HV"}
REWARD_LABELS = {RewardObs.NULL: "Null", RewardObs.REWARD: "Reward"}


class Location(str, Enum):
    NORTH_LEFT = "NorthLeft"
    NORTH_RIGHT = "NorthRight"
    EAST = "East"
    WEST = "West"
    NORTHEAST = "Northeast"
    NORTHWEST = "Northwest"


class UnknownLocation(ValueError):
    pass


# (room, tool) that reaches the reward in each location
SOLVING_PAIR = {
    Location.NORTH_LEFT: (Room.LEFT, Tool.V),
    Location.NORTH_RIGHT: (Room.RIGHT, Tool.V),
    Location.EAST: (Room.RIGHT, Tool.H),
    Location.WEST: (Room.LEFT, Tool.H),
    Location.NORTHEAST: (Room.RIGHT, Tool.HV),
    Location.NORTHWEST: (Room.LEFT, Tool.HV),
}

NATIVE_TOOL = {Room.LEFT: Tool.V, Room.RIGHT: Tool.H}


def solving_pairs(location: Location, hv_solves_adjacent: bool = False) -> set[tuple[Room, Tool]]:
    """Rewarding (room, tool) pairs; HV optionally also reaches the adjacent north/east/west rooms."""
    room, tool = SOLVING_PAIR[location]
    pairs = {(room, tool)}
    if hv_solves_adjacent and tool in (Tool.V, Tool.H):
        pairs.add((room, Tool.HV))
    return pairs


ADJACENT = (Location.NORTH_RIGHT, Location.WEST, Location.NORTH_LEFT, Location.EAST)
CORNERS = (Location.NORTHEAST, Location.NORTHWEST)


def parse_location(value) -> Location:
    if isinstance(value, Location):
        return value
    key = str(value).replace("-", "").replace("_", "").replace(" ", "").lower()
    for loc in Location:
        if loc.value.lower() == key:
            return loc
    raise UnknownLocation(f"unknown reward location: {value!r}")


@dataclass(frozen=True)
class EnvState:
    room: Room
    tool: Tool
    reward_location: Location
    hv_solves_adjacent: bool = False


@dataclass(frozen=True)
class EnvObservation:
    room: int
    tool: int
    reward: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.room, self.tool, self.reward)


def reset(reward_location, hv_solves_adjacent: bool = False) -> EnvState:
    return EnvState(Room.LEFT, Tool.NULL, parse_location(reward_location), hv_solves_adjacent)


def next_room_tool(room: Room, tool: Tool, action: Action) -> tuple[Room, Tool]:
    room, tool, action = Room(room), Tool(tool), Action(action)
    if action is Action.MOVE:
        return Room(1 - room), tool
    if action is Action.PICKUP:
        native = NATIVE_TOOL[room]
        if tool is Tool.NULL:
            return room, native
        if tool is not native and tool is not Tool.HV:
            return room, Tool.HV
        return room, tool
    if action is Action.DROP:
        return room, Tool.NULL
    return room, tool


def step(state: EnvState, action) -> EnvState:
    room, tool = next_room_tool(state.room, state.tool, Action(action))
    return EnvState(room, tool, state.reward_location, state.hv_solves_adjacent)


def is_rewarded(room, tool, location: Location, hv_solves_adjacent: bool = False) -> bool:
    return (Room(room), Tool(tool)) in solving_pairs(location, hv_solves_adjacent)


def observe(state: EnvState) -> EnvObservation:
    hit = is_rewarded(state.room, state.tool, state.reward_location, state.hv_solves_adjacent)
    reward = RewardObs.REWARD if hit else RewardObs.NULL
    return EnvObservation(int(state.room), int(state.tool), int(reward))


def oracle_optimal_steps(reward_location) -> int:
    """Breadth-first search from the reset state to the first rewarded observation."""
    loc = parse_location(reward_location)
    start = (Room.LEFT, Tool.NULL)
    if is_rewarded(*start, loc):
        return 0
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        (room, tool), depth = frontier.popleft()
        for action in Action:
            nxt = next_room_tool(room, tool, action)
            if nxt in seen:
                continue
            if is_rewarded(*nxt, loc):
                return depth + 1
            seen.add(nxt)
            frontier.append((nxt, depth + 1))
    raise RuntimeError(f"reward at {loc.value} is unreachable")
