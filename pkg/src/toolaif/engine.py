"""Active-inference loop: state inference, policy evaluation, action selection, learning.

Policy scores ``G`` follow the "larger is better" convention, i.e. they are the
negative expected free energy: utility plus the enabled information-gain terms,
accumulated over every step of the planning horizon.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .categorical import DirichletTensor, kl_divergence, log_stable, outer, softmax, wnorm
from .model import GenerativeModel, Policy, enumerate_policies, policy_array, refresh_B

BeliefState = tuple  # one marginal (1-d numpy array) per hidden-state factor

SAMPLE = "sample"
ARGMAX = "argmax"
# state information gain below this is float residue from the log epsilon, reported as 0
IG_FLOOR = 1e-12


class ZeroPosterior(ValueError):
    pass


@dataclass(frozen=True)
class AgentConfig:
    policy_len: int = 4
    gamma: float = 16.0
    use_utility: bool = True
    use_state_ig: bool = True
    use_param_ig: bool = True
    learn_B: bool = True
    eta: float = 1.0
    action_selection: str = SAMPLE
    num_iter: int = 6
    rng_seed: int = 0

    def __post_init__(self):
        if self.policy_len < 1:
            raise ValueError("policy_len must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.action_selection not in (SAMPLE, ARGMAX):
            raise ValueError(f"action_selection must be {SAMPLE!r} or {ARGMAX!r}")


# -- single-policy primitives -------------------------------------------------

def delta_belief(model: GenerativeModel, states: Sequence[int]) -> BeliefState:
    out = []
    for spec, s in zip(model.factors, states):
        q = np.zeros(spec.cardinality)
        q[s] = 1.0
        out.append(q)
    return tuple(out)


def prior_belief(model: GenerativeModel) -> BeliefState:
    return tuple(np.asarray(d, dtype=float) for d in model.D)


def _contract(tensor: np.ndarray, vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Sum ``tensor`` against one vector per trailing axis, keeping the leading axis."""
    out = tensor
    for v in reversed(vectors):
        out = out @ v
    return out


def infer_state(model: GenerativeModel, observation: Sequence[int], prior: BeliefState,
                num_iter: int = 6) -> BeliefState:
    """Mean-field posterior over factors given one outcome per modality."""
    lnA = [log_stable(model.A[m][o]) for m, o in enumerate(observation)]
    deps = [model.obs_dep_indices(m) for m in range(len(model.modalities))]
    ln_prior = [log_stable(p) for p in prior]
    qs = [np.asarray(p, dtype=float).copy() for p in prior]
    for _ in range(num_iter):
        for f in range(len(model.factors)):
            acc = ln_prior[f].copy()
            for m, dep in enumerate(deps):
                if f not in dep:
                    continue
                axis = dep.index(f)
                # expectation of ln A over the other factors this modality depends on
                term = np.moveaxis(lnA[m], axis, 0)
                others = [qs[d] for d in dep if d != f]
                acc = acc + _contract(term, others)
            q = np.exp(acc - acc.max())
            total = q.sum()
            if not np.isfinite(total) or total <= 0:
                raise ZeroPosterior(f"posterior for factor {model.factors[f].name} vanished")
            qs[f] = q / total
    return tuple(qs)


def predict(model: GenerativeModel, belief: BeliefState, action: int) -> BeliefState:
    """One-step mean-field prediction under a single control state."""
    out = []
    for f in range(len(model.factors)):
        Bu = model.B[f][..., action]
        out.append(_contract(Bu, [belief[d] for d in model.transition_dep_indices(f)]))
    return tuple(out)


def expected_states(model: GenerativeModel, belief: BeliefState, policy: Policy, tau: int) -> BeliefState:
    """Predicted marginals after applying control ``policy[tau]`` to ``belief``."""
    if not 0 <= tau < len(policy):
        raise IndexError(f"timestep {tau} outside policy of length {len(policy)}")
    return predict(model, belief, policy.controls[tau])


def expected_obs(model: GenerativeModel, belief: BeliefState) -> list[np.ndarray]:
    return [
        _contract(model.A[m], [belief[d] for d in model.obs_dep_indices(m)])
        for m in range(len(model.modalities))
    ]


def utility(qo: Sequence[np.ndarray], C: Sequence[np.ndarray]) -> float:
    total = 0.0
    for q, c in zip(qo, C):
        q = np.asarray(q, dtype=float)
        c = np.asarray(c, dtype=float)
        if q.shape != c.shape:
            raise ValueError(f"expected-outcome length {q.shape} does not match preferences {c.shape}")
        total += float(q @ c)
    return total


def state_info_gain(model: GenerativeModel, belief_pred: BeliefState) -> float:
    """Expected KL between outcome-conditioned and predicted joint states, per modality."""
    total = 0.0
    for m in range(len(model.modalities)):
        dep = model.obs_dep_indices(m)
        joint = outer([belief_pred[d] for d in dep]).ravel()
        A = model.A[m].reshape(model.A[m].shape[0], -1)
        qo = A @ joint
        for o, p_o in enumerate(qo):
            if p_o <= 0:
                continue
            post = A[o] * joint
            post = post / post.sum()
            total += p_o * kl_divergence(post, joint)
    return float(total)


def param_info_gain(model: GenerativeModel, belief_prev: BeliefState, belief_pred: BeliefState,
                    action: int) -> float:
    """Expected Dirichlet novelty of the transition entries used by ``action``."""
    if not model.learns_B:
        return 0.0
    total = 0.0
    for f, p in enumerate(model.pB):
        if p is None:
            continue
        w = wnorm(DirichletTensor(model.B_axes(f), p))[..., action]
        prev = [belief_prev[d] for d in model.transition_dep_indices(f)]
        total += float(belief_pred[f] @ _contract(w, prev))
    return total


# -- batched policy evaluation -------------------------------------------------

@dataclass(frozen=True)
class PolicyEvaluation:
    policy: Policy
    utility: np.ndarray
    state_ig: np.ndarray
    param_ig: np.ndarray
    G: float

    @property
    def total_utility(self) -> float:
        return float(self.utility.sum())

    @property
    def total_infogain(self) -> float:
        return float(self.state_ig.sum() + self.param_ig.sum())


@dataclass(frozen=True, eq=False)
class PolicyEvaluations:
    """Per-policy, per-timestep EFE terms for a whole policy set.

    Arrays are shaped ``(num_policies, horizon)``; ``G`` is their sum over time.
    Indexing yields a :class:`PolicyEvaluation`.
    """

    policies: np.ndarray
    utility: np.ndarray
    state_ig: np.ndarray
    param_ig: np.ndarray
    G: np.ndarray

    def __len__(self):
        return len(self.policies)

    def __getitem__(self, i) -> PolicyEvaluation:
        return PolicyEvaluation(
            Policy(tuple(int(u) for u in self.policies[i])),
            self.utility[i], self.state_ig[i], self.param_ig[i], float(self.G[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def total_utility(self) -> np.ndarray:
        return self.utility.sum(axis=1)

    @property
    def total_infogain(self) -> np.ndarray:
        return self.state_ig.sum(axis=1) + self.param_ig.sum(axis=1)


_LETTERS = string.ascii_lowercase.replace("p", "")


def _batched_contract(tensor: np.ndarray, vectors: Sequence[np.ndarray], extra: Sequence[np.ndarray] = (),
                      batched_tensor: bool = True) -> np.ndarray:
    """einsum over ``p``-batched operands.

    ``tensor`` axes are ``(p?, X, d1, d2, ...)``; each of ``vectors`` is ``(p, |d_i|)``.
    Optional ``extra`` holds a ``(p, |X|)`` weight on the leading axis, in which case
    the result is ``(p,)``.
    """
    n_dep = len(vectors)
    lead = _LETTERS[0]
    dep = _LETTERS[1:1 + n_dep]
    t_sub = ("p" if batched_tensor else "") + lead + dep
    operands = [tensor]
    subs = [t_sub]
    for letter, v in zip(dep, vectors):
        subs.append("p" + letter)
        operands.append(v)
    for e in extra:
        subs.append("p" + lead)
        operands.append(e)
    out = "p" + ("" if extra else lead)
    return np.einsum(",".join(subs) + "->" + out, *operands, optimize=False)


def _entropy_rows(q: np.ndarray) -> np.ndarray:
    return -np.sum(q * log_stable(q), axis=-1)


_TREE_CACHE: dict = {}


def _prefix_tree(pol: np.ndarray):
    """Per level ``t``: unique length-``t+1`` prefixes, each policy's node, and each node's parent."""
    key = (pol.shape, pol.tobytes())
    if key in _TREE_CACHE:
        return _TREE_CACHE[key]
    levels = []
    prev_inverse = None
    for t in range(pol.shape[1]):
        nodes, first, inverse = np.unique(pol[:, :t + 1], axis=0, return_index=True, return_inverse=True)
        parent = None if prev_inverse is None else prev_inverse[first]
        levels.append((nodes[:, t], inverse.ravel(), parent))
        prev_inverse = inverse.ravel()
    if len(_TREE_CACHE) > 64:
        _TREE_CACHE.clear()
    _TREE_CACHE[key] = levels
    return levels


def evaluate_policies(model: GenerativeModel, belief_now: BeliefState, policies, config: AgentConfig) -> PolicyEvaluations:
    """Score every policy by rolling mean-field predictions over its horizon.

    Policies sharing a prefix share every term up to the end of that prefix, so the
    rollout is computed once per node of the prefix tree and scattered back.
    """
    pol = policies if isinstance(policies, np.ndarray) else policy_array(policies)
    pol = np.asarray(pol, dtype=np.intp)
    n_pol, horizon = pol.shape
    n_fac = len(model.factors)
    t_deps = [model.transition_dep_indices(f) for f in range(n_fac)]
    o_deps = [model.obs_dep_indices(m) for m in range(len(model.modalities))]

    # conditional outcome entropy of each A column, reused for every node
    H_A = [-np.sum(A * log_stable(A), axis=0) for A in model.A]
    use_param = config.use_param_ig and model.learns_B
    W = None
    if use_param:
        W = [None if p is None else wnorm(DirichletTensor(model.B_axes(f), p)) for f, p in enumerate(model.pB)]

    util = np.zeros((n_pol, horizon))
    s_ig = np.zeros((n_pol, horizon))
    p_ig = np.zeros((n_pol, horizon))

    qs = [np.asarray(b, dtype=float)[None, :] for b in belief_now]
    for t, (u, inverse, parent) in enumerate(_prefix_tree(pol)):
        n_node = len(u)
        prev = [q[np.zeros(n_node, dtype=np.intp) if parent is None else parent] for q in qs]
        nxt = []
        for f in range(n_fac):
            Bu = np.moveaxis(model.B[f][..., u], -1, 0)
            nxt.append(_batched_contract(Bu, [prev[d] for d in t_deps[f]]))
        node_util = np.zeros(n_node)
        node_sig = np.zeros(n_node)
        node_pig = np.zeros(n_node)
        if use_param:
            for f in range(n_fac):
                if W[f] is None:
                    continue
                Wu = np.moveaxis(W[f][..., u], -1, 0)
                node_pig += _batched_contract(Wu, [prev[d] for d in t_deps[f]], extra=[nxt[f]])
        for m, A in enumerate(model.A):
            dep_q = [nxt[d] for d in o_deps[m]]
            if not (config.use_utility or config.use_state_ig):
                break
            qo = _batched_contract(A, dep_q, batched_tensor=False)
            if config.use_utility:
                node_util += qo @ model.C[m]
            if config.use_state_ig:
                # mutual information between outcome and joint dep states
                node_sig += _entropy_rows(qo) - _expected_scalar(H_A[m], dep_q)
        util[:, t] = node_util[inverse]
        s_ig[:, t] = np.where(node_sig > IG_FLOOR, node_sig, 0.0)[inverse]
        p_ig[:, t] = node_pig[inverse]
        qs = nxt

    G = util.sum(axis=1) + s_ig.sum(axis=1) + p_ig.sum(axis=1)
    return PolicyEvaluations(pol, util, s_ig, p_ig, G)


def _expected_scalar(table: np.ndarray, vectors: Sequence[np.ndarray]) -> np.ndarray:
    dep = _LETTERS[:len(vectors)]
    subs = [dep] + ["p" + letter for letter in dep]
    return np.einsum(",".join(subs) + "->p", table, *vectors, optimize=False)


def evaluate_policy_reference(model: GenerativeModel, belief_now: BeliefState, policy: Policy,
                              config: AgentConfig) -> PolicyEvaluation:
    """Unbatched evaluation of one policy, built from the single-policy primitives."""
    T = len(policy)
    util, s_ig, p_ig = np.zeros(T), np.zeros(T), np.zeros(T)
    prev = belief_now
    for t in range(T):
        pred = expected_states(model, prev, policy, t)
        if config.use_utility:
            util[t] = utility(expected_obs(model, pred), model.C)
        if config.use_state_ig:
            ig = state_info_gain(model, pred)
            s_ig[t] = ig if ig > IG_FLOOR else 0.0
        if config.use_param_ig:
            p_ig[t] = param_info_gain(model, prev, pred, policy.controls[t])
        prev = pred
    return PolicyEvaluation(policy, util, s_ig, p_ig, float(util.sum() + s_ig.sum() + p_ig.sum()))


# -- selection and learning ------------------------------------------------------

def policy_posterior(evaluations: PolicyEvaluations, gamma: float) -> np.ndarray:
    return softmax(evaluations.G, gamma)


def select_policy(evaluations: PolicyEvaluations, config: AgentConfig, rng: np.random.Generator) -> int:
    if len(evaluations) == 0:
        raise ValueError("no policies to select from")
    if config.action_selection == ARGMAX:
        return int(np.argmax(evaluations.G))  # first maximum = lowest policy index
    q_pi = policy_posterior(evaluations, config.gamma)
    return int(rng.choice(len(q_pi), p=q_pi))


def select_action(evaluations: PolicyEvaluations, config: AgentConfig, rng: np.random.Generator) -> int:
    return int(evaluations.policies[select_policy(evaluations, config, rng), 0])


def update_dirichlet(model: GenerativeModel, action: int, belief_prev: BeliefState, belief_now: BeliefState,
                     eta: float = 1.0) -> GenerativeModel:
    """Add ``eta * q(s') x prod_d q(s_d)`` to the taken action's slice of every learnable pB."""
    if not model.learns_B or eta == 0:
        return model
    new_pB = []
    for f, p in enumerate(model.pB):
        if p is None:
            new_pB.append(None)
            continue
        deps = [belief_prev[d] for d in model.transition_dep_indices(f)]
        p = p.copy()
        p[..., action] += eta * outer([belief_now[f], *deps])
        new_pB.append(p)
    return refresh_B(model, new_pB)


class IndexOutOfRange(IndexError):
    pass


def probe_transition(model: GenerativeModel, factor, from_state: int, dep_states: dict | Sequence[int],
                     action: int, to_state: int) -> float:
    """Posterior-mean probability of ``factor`` moving ``from_state -> to_state`` under ``action``.

    ``dep_states`` gives the remaining conditioning factors, either as a mapping
    from factor name to state or in ``transition_deps`` order (excluding self).
    """
    f = model.factor_index(factor) if isinstance(factor, str) else int(factor)
    spec = model.factors[f]
    others = [d for d in spec.transition_deps if d != spec.name]
    if isinstance(dep_states, dict):
        dep_states = [dep_states[d] for d in others]
    dep_states = list(dep_states)
    if len(dep_states) != len(others):
        raise IndexOutOfRange(f"{spec.name} needs states for {others}")
    given = dict(zip(others, dep_states))
    given[spec.name] = from_state
    index = [to_state] + [given[d] for d in spec.transition_deps] + [action]
    source = model.B[f] if model.pB is None or model.pB[f] is None else None
    table = source if source is not None else model.pB[f] / model.pB[f].sum(axis=0, keepdims=True)
    for i, size in zip(index, table.shape):
        if not 0 <= i < size:
            raise IndexOutOfRange(f"index {index} outside table of shape {table.shape}")
    return float(table[tuple(index)])


# -- agent -------------------------------------------------------------------------

@dataclass
class StepResult:
    action: int
    policy_index: int
    evaluations: PolicyEvaluations


@dataclass
class Agent:
    """Stateful wrapper holding the model, current beliefs and the policy set."""

    model: GenerativeModel
    config: AgentConfig = field(default_factory=AgentConfig)
    rng: Optional[np.random.Generator] = None

    def __post_init__(self):
        if self.rng is None:
            self.rng = np.random.default_rng(self.config.rng_seed)
        self.policies = policy_array(enumerate_policies(self.model, self.config.policy_len))
        self.belief: Optional[BeliefState] = None
        self.last_action: Optional[int] = None

    def reset(self):
        self.belief = None
        self.last_action = None

    def infer(self, observation: Sequence[int]) -> BeliefState:
        if self.belief is None or self.last_action is None:
            prior = prior_belief(self.model)
        else:
            prior = predict(self.model, self.belief, self.last_action)
        new = infer_state(self.model, observation, prior, self.config.num_iter)
        if self.config.learn_B and self.belief is not None and self.last_action is not None:
            self.model = update_dirichlet(self.model, self.last_action, self.belief, new, self.config.eta)
        self.belief = new
        return new

    def plan(self) -> PolicyEvaluations:
        return evaluate_policies(self.model, self.belief, self.policies, self.config)

    def act(self) -> StepResult:
        evaluations = self.plan()
        idx = select_policy(evaluations, self.config, self.rng)
        action = int(self.policies[idx, 0])
        self.last_action = action
        return StepResult(action, idx, evaluations)
