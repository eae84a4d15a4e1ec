"""Experiment schedules, trial orchestration, metrics and aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import env
from .engine import ARGMAX, SAMPLE, Agent, AgentConfig, PolicyEvaluations
from .env import ADJACENT, Action, Location, Room, Tool, parse_location
from .model import AFFORDANCE, TOOL_STATE, build_model, set_uniform_transition_prior, with_reward_location

STEPS_PER_RUN = 12
RUNS_PER_ADJACENT_ROOM = 10
CORNER_RUNS = 3
EXP2_TRIALS = 20
EXP3_TRIALS = 10

# strict-improvement margin when ranking policies on accumulated float scores
RANK_TOL = 1e-9


@dataclass(frozen=True)
class Probe:
    """One transition entry tracked through learning."""

    name: str
    factor: str
    from_state: int
    dep_states: tuple[int, ...]
    action: int
    to_state: int


TOOL_STATE_PROBES = (
    Probe("V", "Tool", Tool.NULL, (Room.LEFT,), Action.PICKUP, Tool.V),
    Probe("H", "Tool", Tool.NULL, (Room.RIGHT,), Action.PICKUP, Tool.H),
    Probe("HV_from_V", "Tool", Tool.V, (Room.RIGHT,), Action.PICKUP, Tool.HV),
    Probe("HV_from_H", "Tool", Tool.H, (Room.LEFT,), Action.PICKUP, Tool.HV),
)
AFFORDANCE_PROBES = (
    Probe("V", "YReach", 0, (Room.LEFT,), Action.PICKUP, 1),
    Probe("H", "XReach", 0, (Room.RIGHT,), Action.PICKUP, 1),
)


def default_probes(variant: str) -> tuple[Probe, ...]:
    return TOOL_STATE_PROBES if variant == TOOL_STATE else AFFORDANCE_PROBES


@dataclass(frozen=True)
class Schedule:
    blocks: tuple[tuple[Location, int], ...]
    steps_per_run: int = STEPS_PER_RUN
    model_variant: str = TOOL_STATE
    learning: bool = True
    ablate_ig_on_final_block: bool = False
    num_trials: int = 1
    base_seed: int = 0

    def __post_init__(self):
        blocks = tuple((parse_location(loc), int(n)) for loc, n in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise ValueError("schedule needs at least one block")
        if any(n < 1 for _, n in blocks):
            raise ValueError("every block needs num_runs >= 1")
        if self.steps_per_run < 1:
            raise ValueError("steps_per_run must be >= 1")
        if self.num_trials < 1:
            raise ValueError("num_trials must be >= 1")

    @property
    def num_runs(self) -> int:
        return sum(n for _, n in self.blocks)

    def run_locations(self) -> list[Location]:
        return [loc for loc, n in self.blocks for _ in range(n)]

    def block_of_run(self) -> list[int]:
        return [b for b, (_, n) in enumerate(self.blocks) for _ in range(n)]

    def block_bounds(self) -> list[tuple[int, int]]:
        """(first_run, last_run) of every block, inclusive."""
        out, start = [], 0
        for _, n in self.blocks:
            out.append((start, start + n - 1))
            start += n
        return out


def continual_schedule(final_corner, variant: str = TOOL_STATE, num_trials: int = EXP2_TRIALS,
                       base_seed: int = 0, utility_only: bool = False) -> Schedule:
    corner = parse_location(final_corner)
    if corner not in env.CORNERS:
        raise ValueError(f"final corner must be one of {[c.value for c in env.CORNERS]}")
    blocks = tuple((loc, RUNS_PER_ADJACENT_ROOM) for loc in ADJACENT) + ((corner, CORNER_RUNS),)
    return Schedule(blocks, model_variant=variant, learning=True,
                    ablate_ig_on_final_block=utility_only, num_trials=num_trials, base_seed=base_seed)


@dataclass
class TrialRecord:
    trial: int
    seed: int
    steps_to_solve: list[int] = field(default_factory=list)
    # (run, step) -> ranks of the selected policy
    utility_rank: list[list[int]] = field(default_factory=list)
    infogain_rank: list[list[int]] = field(default_factory=list)
    # probe name -> probability after every cumulative step (index 0 = before any step)
    probes: dict[str, list[float]] = field(default_factory=dict)
    # (run, step, action, room, tool, reward) with the observation that followed the action
    actions: list[tuple[int, int, int, int, int, int]] = field(default_factory=list)
    efe: list[PolicyEvaluations] = field(default_factory=list)


@dataclass
class ExperimentReport:
    name: str
    schedule: Optional[Schedule]
    config: AgentConfig
    alpha_init: float
    trials: list[TrialRecord]
    locations: list[Location]
    extra: dict = field(default_factory=dict)
    baseline: Optional["ExperimentReport"] = None

    def steps_matrix(self) -> np.ndarray:
        return np.array([t.steps_to_solve for t in self.trials], dtype=float)

    def mean_rank_per_run(self, which: str) -> np.ndarray:
        """(trials, runs) mean over steps of the chosen rank series."""
        return np.array([[np.mean(r) for r in getattr(t, which)] for t in self.trials])


def compute_policy_ranks(evaluations: PolicyEvaluations, selected: int) -> tuple[int, int]:
    """Number of policies strictly better than ``selected`` on summed utility / information gain."""
    util = evaluations.total_utility
    info = evaluations.total_infogain
    u_rank = int(np.sum(util > util[selected] + RANK_TOL))
    i_rank = int(np.sum(info > info[selected] + RANK_TOL))
    return u_rank, i_rank


def _probe_values(agent: Agent, probes: Sequence[Probe]) -> dict[str, float]:
    from .engine import probe_transition

    return {
        p.name: probe_transition(agent.model, p.factor, p.from_state, p.dep_states, p.action, p.to_state)
        for p in probes
    }


def run_episode(agent: Agent, location, steps: int, record: Optional[TrialRecord] = None, run_index: int = 0,
                probes: Sequence[Probe] = (), keep_efe: bool = False) -> int:
    """Play one run from the reset state; returns steps until the first reward (``steps`` if never)."""
    state = env.reset(location, agent.model.hv_solves_adjacent)
    agent.reset()
    obs = env.observe(state)
    agent.infer(obs.as_tuple())
    solved = None
    u_ranks, i_ranks = [], []
    for k in range(steps):
        result = agent.act()
        u, i = compute_policy_ranks(result.evaluations, result.policy_index)
        u_ranks.append(u)
        i_ranks.append(i)
        state = env.step(state, result.action)
        obs = env.observe(state)
        agent.infer(obs.as_tuple())
        if solved is None and obs.reward == env.RewardObs.REWARD:
            solved = k + 1
        if record is not None:
            record.actions.append((run_index, k, result.action, obs.room, obs.tool, obs.reward))
            if keep_efe:
                record.efe.append(result.evaluations)
            for name, value in _probe_values(agent, probes).items():
                record.probes.setdefault(name, []).append(value)
    steps_to_solve = steps if solved is None else solved
    if record is not None:
        record.steps_to_solve.append(steps_to_solve)
        record.utility_rank.append(u_ranks)
        record.infogain_rank.append(i_ranks)
    return steps_to_solve


def run_trial(schedule: Schedule, trial_index: int, config: AgentConfig, alpha_init: float = 1.0,
              probes: Optional[Sequence[Probe]] = None) -> TrialRecord:
    """One independent agent taken through every block of ``schedule``; learning persists across runs."""
    seed = schedule.base_seed + trial_index
    locations = schedule.run_locations()
    model = build_model(schedule.model_variant, locations[0])
    if schedule.learning:
        model = set_uniform_transition_prior(model, alpha_init)
    config = replace(config, learn_B=schedule.learning, rng_seed=seed)
    agent = Agent(model, config, np.random.default_rng(seed))
    probes = default_probes(schedule.model_variant) if probes is None else probes
    record = TrialRecord(trial=trial_index, seed=seed)
    if schedule.learning:
        for name, value in _probe_values(agent, probes).items():
            record.probes[name] = [value]
    final_block = len(schedule.blocks) - 1
    for run, (loc, block) in enumerate(zip(locations, schedule.block_of_run())):
        agent.model = with_reward_location(agent.model, loc)
        if schedule.ablate_ig_on_final_block and block == final_block:
            agent.config = replace(agent.config, use_state_ig=False, use_param_ig=False)
        run_episode(agent, loc, schedule.steps_per_run, record, run,
                    probes if schedule.learning else ())
    return record


def run_schedule(name: str, schedule: Schedule, config: AgentConfig, alpha_init: float = 1.0) -> ExperimentReport:
    trials = [run_trial(schedule, i, config, alpha_init) for i in range(schedule.num_trials)]
    return ExperimentReport(name, schedule, config, alpha_init, trials, schedule.run_locations())


# learning-experiment hyperparameters, chosen by sweeping gamma, alpha_init and eta over
# the continual schedule; gamma barely matters, a small prior makes unvisited transitions
# attractive enough that exploration covers them before the corner blocks
DEFAULT_GAMMA = 16.0
DEFAULT_ALPHA_INIT = 0.1
DEFAULT_ETA = 1.0


def experiment_defaults(experiment: int) -> dict[str, float]:
    """Shipped hyperparameters per experiment id; Experiment 1 does not learn so its prior is moot."""
    if experiment == 1:
        return {"gamma": DEFAULT_GAMMA, "alpha_init": 1.0, "eta": 1.0}
    return {"gamma": DEFAULT_GAMMA, "alpha_init": DEFAULT_ALPHA_INIT, "eta": DEFAULT_ETA}


def default_config(gamma: float = DEFAULT_GAMMA, eta: float = DEFAULT_ETA, **kw) -> AgentConfig:
    return AgentConfig(gamma=gamma, eta=eta, **kw)


def run_experiment_1(config: Optional[AgentConfig] = None, base_seed: int = 0,
                     variant: str = TOOL_STATE) -> ExperimentReport:
    """Known-model tool use: one episode per reward location, no learning."""
    config = config or default_config(action_selection=ARGMAX)
    config = replace(config, learn_B=False)
    trials, locations = [], list(Location)
    for i, loc in enumerate(locations):
        agent = Agent(build_model(variant, loc), replace(config, rng_seed=base_seed + i),
                      np.random.default_rng(base_seed + i))
        record = TrialRecord(trial=i, seed=base_seed + i)
        run_episode(agent, loc, STEPS_PER_RUN, record, 0, keep_efe=True)
        trials.append(record)
    return ExperimentReport("experiment1", None, config, math.nan, trials, locations)


def run_experiment_2(final_corner, num_trials: int = EXP2_TRIALS, base_seed: int = 0,
                     config: Optional[AgentConfig] = None, alpha_init: float = DEFAULT_ALPHA_INIT,
                     variant: str = TOOL_STATE) -> ExperimentReport:
    schedule = continual_schedule(final_corner, variant, num_trials, base_seed)
    return run_schedule("experiment2", schedule, config or default_config(), alpha_init)


def run_experiment_3(final_corner, utility_only: bool = False, num_trials: int = EXP3_TRIALS,
                     base_seed: int = 0, config: Optional[AgentConfig] = None,
                     alpha_init: float = DEFAULT_ALPHA_INIT, with_baseline: bool = True) -> ExperimentReport:
    """Affordance Model on the continual schedule, plus the Tool State baseline under the same schedule."""
    config = config or default_config()
    schedule = continual_schedule(final_corner, AFFORDANCE, num_trials, base_seed, utility_only)
    report = run_schedule("experiment3", schedule, config, alpha_init)
    if with_baseline:
        baseline_schedule = replace(schedule, model_variant=TOOL_STATE)
        report.baseline = run_schedule("experiment3-baseline", baseline_schedule, config, alpha_init)
    return report


@dataclass(frozen=True)
class Aggregate:
    mean: np.ndarray
    ste: np.ndarray
    n: int

    @property
    def degenerate(self) -> bool:
        """True when a single trial makes the standard error meaningless (reported as 0)."""
        return self.n < 2


def aggregate(values) -> Aggregate:
    """Pointwise mean and standard error (sample sd / sqrt(n)) over the leading trial axis."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0 or arr.shape[0] < 1:
        raise ValueError("aggregate needs at least one trial")
    n = arr.shape[0]
    mean = arr.mean(axis=0)
    if n < 2:
        return Aggregate(mean, np.zeros_like(mean), n)
    return Aggregate(mean, arr.std(axis=0, ddof=1) / math.sqrt(n), n)


def aggregate_trials(trials: Sequence[TrialRecord]) -> dict[str, Aggregate]:
    """Per-run steps and per-(run, step) rank curves."""
    if not trials:
        raise ValueError("aggregate needs at least one trial")
    return {
        "steps_to_solve": aggregate([t.steps_to_solve for t in trials]),
        "utility_rank": aggregate([t.utility_rank for t in trials]),
        "infogain_rank": aggregate([t.infogain_rank for t in trials]),
    }
