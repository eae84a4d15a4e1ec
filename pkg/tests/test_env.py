import itertools

import pytest

from toolaif import env
from toolaif.env import Action, Location, Room, Tool

OPTIMAL_STEPS = {
    Location.NORTH_LEFT: 1,
    Location.NORTH_RIGHT: 2,
    Location.EAST: 2,
    Location.WEST: 3,
    Location.NORTHEAST: 3,
    Location.NORTHWEST: 4,
}


def test_reset_starts_left_empty_handed():
    assert env.reset("East") == env.EnvState(Room.LEFT, Tool.NULL, Location.EAST)
    assert env.reset(Location.NORTHWEST) == env.EnvState(Room.LEFT, Tool.NULL, Location.NORTHWEST)


def test_reset_rejects_unknown_location():
    with pytest.raises(env.UnknownLocation):
        env.reset("South")


@pytest.mark.parametrize(
    "room, tool, action, expected",
    [
        (Room.LEFT, Tool.NULL, Action.PICKUP, (Room.LEFT, Tool.V)),
        (Room.RIGHT, Tool.NULL, Action.PICKUP, (Room.RIGHT, Tool.H)),
        (Room.RIGHT, Tool.V, Action.PICKUP, (Room.RIGHT, Tool.HV)),
        (Room.LEFT, Tool.H, Action.PICKUP, (Room.LEFT, Tool.HV)),
        (Room.RIGHT, Tool.HV, Action.DROP, (Room.RIGHT, Tool.NULL)),
        (Room.LEFT, Tool.V, Action.PICKUP, (Room.LEFT, Tool.V)),
        (Room.LEFT, Tool.HV, Action.PICKUP, (Room.LEFT, Tool.HV)),
        (Room.LEFT, Tool.V, Action.MOVE, (Room.RIGHT, Tool.V)),
        (Room.RIGHT, Tool.H, Action.NULL, (Room.RIGHT, Tool.H)),
    ],
)
def test_step_rules(room, tool, action, expected):
    out = env.step(env.EnvState(room, tool, Location.EAST), action)
    assert (out.room, out.tool) == expected


def test_step_is_pure():
    for room, tool, action in itertools.product(Room, Tool, Action):
        s = env.EnvState(room, tool, Location.WEST)
        assert env.step(s, action) == env.step(s, action)


@pytest.mark.parametrize("room", list(Room))
def test_drop_undoes_pickup(room):
    s = env.EnvState(room, Tool.NULL, Location.EAST)
    assert env.step(env.step(s, Action.PICKUP), Action.DROP) == s


def test_observe_reward_pairs():
    assert env.observe(env.EnvState(Room.RIGHT, Tool.V, Location.NORTH_RIGHT)).reward == 1
    assert env.observe(env.EnvState(Room.RIGHT, Tool.V, Location.EAST)).reward == 0
    assert env.observe(env.EnvState(Room.LEFT, Tool.HV, Location.NORTHWEST)).reward == 1


@pytest.mark.parametrize("loc", list(Location))
def test_exactly_one_solving_pair(loc):
    hits = [(r, t) for r, t in itertools.product(Room, Tool) if env.observe(env.EnvState(r, t, loc)).reward]
    assert len(hits) == 1


def test_hv_adjacent_switch_adds_pair():
    pairs = env.solving_pairs(Location.NORTH_LEFT, hv_solves_adjacent=True)
    assert pairs == {(Room.LEFT, Tool.V), (Room.LEFT, Tool.HV)}
    assert env.solving_pairs(Location.NORTHEAST, hv_solves_adjacent=True) == {(Room.RIGHT, Tool.HV)}


@pytest.mark.parametrize("loc, steps", OPTIMAL_STEPS.items())
def test_oracle_matches_table(loc, steps):
    assert env.oracle_optimal_steps(loc) == steps


def _replay(actions, loc):
    s = env.reset(loc)
    for k, a in enumerate(actions, start=1):
        s = env.step(s, a)
        if env.observe(s).reward:
            return k
    return None


def test_listed_sequences_are_solutions():
    P, M = Action.PICKUP, Action.MOVE
    assert _replay([P], Location.NORTH_LEFT) == 1
    assert _replay([P, M], Location.NORTH_RIGHT) == 2
    assert _replay([M, P], Location.EAST) == 2
    assert _replay([M, P, M], Location.WEST) == 3
    assert _replay([P, M, P], Location.NORTHEAST) == 3
    assert _replay([P, M, P, M], Location.NORTHWEST) == 4
    assert _replay([M, P, M, P], Location.NORTHWEST) == 4
