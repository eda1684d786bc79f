"""Tabular Q-learning for per-SBS power levels.

Each SBS observes a binary state (1 when its last SINR met the QoS
threshold) and picks one of ``n_levels`` power levels. The reward is the
instantaneous rate ln(1 + SINR) when the threshold is met and 0 otherwise.
The realized action frequencies form the `PowerPmf` handed back to the
analytic rate engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import softmax

from .analytic_rate import PowerPmf
from .config import NetworkConfig
from .deployment import Deployment, instantaneous_sinr, large_scale_gain
from .units import convert_rate

N_STATES = 2


@dataclass
class QTable:
    """State-action values with the exploration and learning-rate settings.

    ``beta`` is a constant in [0, 1) or ``"visits"`` for 1 / (1 + n(s, a)),
    where n counts earlier updates of (s, a); the first update of a pair
    therefore uses a step of 1.
    """

    values: np.ndarray
    visits: np.ndarray
    gamma: float = 0.95
    epsilon: float = 0.1
    beta: float | str = 0.5
    T_p: float | None = None
    exploration: str = "epsilon"
    strict_max: bool = False

    @classmethod
    def zeros(cls, n_states: int, n_actions: int, **kw) -> "QTable":
        return cls(np.zeros((n_states, n_actions)),
                   np.zeros((n_states, n_actions), dtype=np.int64), **kw)

    @classmethod
    def from_config(cls, cfg: NetworkConfig, n_states: int = N_STATES) -> "QTable":
        return cls.zeros(n_states, cfg.n_levels, gamma=cfg.gamma, epsilon=cfg.epsilon,
                         beta=cfg.beta, T_p=cfg.T_p, exploration=cfg.exploration,
                         strict_max=cfg.strict_max)

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def step_size(self, s: int, a: int) -> float:
        if self.beta == "visits":
            return 1.0 / (1.0 + self.visits[s, a])
        return float(self.beta)

    def policy(self, s: int) -> np.ndarray:
        """Action distribution of the exploration policy in state ``s``."""
        q = self.values[s]
        if self.exploration == "boltzmann":
            return softmax(q / self.T_p)
        p = np.full(self.n_actions, self.epsilon / self.n_actions)
        p[int(np.argmax(q))] += 1.0 - self.epsilon
        return p

    def to_json(self) -> str:
        return json.dumps({
            "values": self.values.tolist(), "visits": self.visits.tolist(),
            "gamma": self.gamma, "epsilon": self.epsilon, "beta": self.beta,
            "T_p": self.T_p, "exploration": self.exploration,
            "strict_max": self.strict_max,
        })

    @classmethod
    def from_json(cls, text: str) -> "QTable":
        d = json.loads(text)
        return cls(np.array(d["values"], dtype=float),
                   np.array(d["visits"], dtype=np.int64),
                   d["gamma"], d["epsilon"], d["beta"], d["T_p"],
                   d["exploration"], d["strict_max"])


def select_action(q: QTable, s: int, rng) -> int:
    """epsilon-greedy (ties to the lowest level) or Boltzmann sampling."""
    if q.exploration == "boltzmann":
        return int(rng.choice(q.n_actions, p=softmax(q.values[s] / q.T_p)))
    if rng.random() < q.epsilon:
        return int(rng.integers(q.n_actions))
    return int(np.argmax(q.values[s]))


def _max_next(q: QTable, s_next: int, a: int) -> float:
    row = q.values[s_next]
    if q.strict_max and q.n_actions > 1:
        return float(np.max(np.delete(row, a)))
    return float(np.max(row))


def q_update(q: QTable, s: int, a: int, reward: float, s_next: int) -> QTable:
    """One in-place update Q <- (1 - b) Q + b (w + gamma max Q[s_next])."""
    b = q.step_size(s, a)
    target = reward + q.gamma * _max_next(q, s_next, a)
    q.values[s, a] = (1.0 - b) * q.values[s, a] + b * target
    q.visits[s, a] += 1
    return q


# ---------------------------------------------------------------- oracles


def bellman_operator(Q: np.ndarray, P: np.ndarray, W: np.ndarray, gamma: float) -> np.ndarray:
    """H(Q)(s, a) = W(s, a) + gamma sum_v P[s, a, v] max_b Q(v, b)."""
    return W + gamma * P @ Q.max(axis=1)


def value_iteration_oracle(P, W, gamma: float, tol: float = 1e-10,
                           max_iter: int = 100_000) -> np.ndarray:
    """Fixed point of the Bellman operator for an explicit MDP.

    ``P`` has shape (S, A, S) and ``W`` shape (S, A).
    """
    P = np.asarray(P, dtype=float)
    W = np.asarray(W, dtype=float)
    if not 0 <= gamma < 1:
        raise ValueError(f"value iteration needs 0 <= gamma < 1 (got {gamma})")
    if P.shape != W.shape + (W.shape[0],):
        raise ValueError("P must have shape (S, A, S) matching W (S, A)")
    Q = np.zeros_like(W)
    for _ in range(max_iter):
        nxt = bellman_operator(Q, P, W, gamma)
        if np.max(np.abs(nxt - Q)) < tol * (1 - gamma):
            return nxt
        Q = nxt
    raise RuntimeError("value iteration did not converge")


def run_mdp(P, W, q: QTable, steps: int, seed=None, s0: int = 0) -> QTable:
    """Drive ``q`` on an explicit MDP with deterministic rewards ``W``."""
    rng = np.random.default_rng(seed)
    P = np.asarray(P, dtype=float)
    W = np.asarray(W, dtype=float)
    cum = np.cumsum(P, axis=2)
    s = s0
    for _ in range(steps):
        a = select_action(q, s, rng)
        s_next = min(int(np.searchsorted(cum[s, a], rng.random(), side="right")),
                     P.shape[2] - 1)
        q_update(q, s, a, W[s, a], s_next)
        s = s_next
    return q


def random_mdp(n_states: int, n_actions: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Dirichlet transitions and U[0, 1) rewards."""
    rng = np.random.default_rng(rng)
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    W = rng.random((n_states, n_actions))
    return P, W


# ------------------------------------------------------------ environment


@dataclass
class LearningEnv:
    """Single-SBS learning environment on a fixed deployment.

    ``rb_of_sbs`` maps SBS id -> RB. SBSs other than ``target`` draw their
    power from ``other_pmfs`` (SBS id -> `PowerPmf`; missing SBSs use
    ``default_pmf``, which defaults to full power). With ``fresh_fading``
    off the deployment's own fading is reused, giving a stationary,
    deterministic channel.
    """

    cfg: NetworkConfig
    deployment: Deployment
    target: int
    rb_of_sbs: Mapping[int, int]
    other_pmfs: Mapping[int, PowerPmf] = field(default_factory=dict)
    default_pmf: PowerPmf | None = None
    units: str = "nats"
    mode: str | None = None
    fresh_fading: bool = True

    def __post_init__(self):
        if self.default_pmf is None:
            self.default_pmf = PowerPmf.full(self.cfg.n_levels, self.cfg.delta)

    def sample_powers(self, own_level: int, rng) -> dict:
        powers = {}
        for j in self.rb_of_sbs:
            if j == self.target:
                powers[j] = own_level * self.cfg.delta
            else:
                pmf = self.other_pmfs.get(j, self.default_pmf)
                powers[j] = pmf.levels[rng.choice(pmf.n_levels, p=pmf.probs)]
        return powers

    def sample_fading(self, rng) -> np.ndarray | None:
        """Fresh fading into the target's UE, drawn target first."""
        if not self.fresh_fading:
            return None
        n = self.deployment.n_sbs
        order = [self.target] + [j for j in range(n) if j != self.target]
        h = np.ones((n, n))
        h[order, self.target] = rng.exponential(1.0 / self.cfg.eta, size=n)
        return h


def observe(env: LearningEnv, powers: Mapping[int, float],
            fading: np.ndarray | None = None) -> tuple[int, float]:
    """(state, reward) for the target SBS under the given powers."""
    p = powers.get(env.target, 0.0)
    if p <= 0:
        return 0, 0.0
    sinr = instantaneous_sinr(env.cfg, env.deployment, env.rb_of_sbs, powers,
                              env.target, env.mode, fading)
    if sinr < env.cfg.sinr_th:
        return 0, 0.0
    return 1, float(convert_rate(np.log1p(sinr), env.units))


def _pmf_from_actions(actions, n_levels, delta) -> PowerPmf:
    return PowerPmf.from_counts(np.bincount(actions, minlength=n_levels), delta)


def learn_pmf(env: LearningEnv, episodes: int, cfg: NetworkConfig | None = None,
              seed=None, window: float = 0.5, q: QTable | None = None
              ) -> tuple[PowerPmf, QTable]:
    """Run Q-learning for ``episodes`` steps and return the realized power pmf.

    The pmf is the action frequency over the trailing ``window`` fraction of
    steps, or the final exploration policy averaged over the two states when
    ``cfg.pmf_mode == "policy"``. Fading is redrawn every step unless the
    environment disables it.
    """
    cfg = cfg or env.cfg
    rng = np.random.default_rng(seed)
    q = q or QTable.from_config(cfg)
    s = 0
    actions = np.empty(episodes, dtype=np.int64)
    states = np.empty(episodes, dtype=np.int64)
    for t in range(episodes):
        a = select_action(q, s, rng)
        powers = env.sample_powers(a, rng)
        fading = env.sample_fading(rng)
        s_next, w = observe(env, powers, fading)
        q_update(q, s, a, w, s_next)
        actions[t], states[t] = a, s
        s = s_next
    start = min(int(episodes * (1 - window)), episodes - 1)
    if cfg.pmf_mode == "policy":
        freq = np.bincount(states[start:], minlength=q.n_states) / (episodes - start)
        p = sum(f * q.policy(i) for i, f in enumerate(freq))
        return PowerPmf.from_counts(p, cfg.delta), q
    return _pmf_from_actions(actions[start:], cfg.n_levels, cfg.delta), q


# ---------------------------------------------------- multi-agent learner


class MultiAgentLearner:
    """All SBS agents of one trial, learning together on a shared deployment.

    An agent is a (child, SBS) pair: every SBS of parent k transmits on the
    RB of each of k's children. All agents act simultaneously each step on
    fresh fading; interference comes from every other SBS transmitting on
    the same RB. Q-tables persist across epochs keyed by (child, SBS).
    """

    def __init__(self, cfg: NetworkConfig, deployment: Deployment, parent_of_child,
                 seed=None, units: str = "nats"):
        self.cfg = cfg
        self.dep = deployment
        self.units = units
        self.rng = np.random.default_rng(seed)
        self.parent_of_child = tuple(parent_of_child)
        agents = [(ch, s) for ch, k in enumerate(self.parent_of_child)
                  for s in deployment.sbs_of(k)]
        self.child = np.array([a[0] for a in agents], dtype=int)
        self.sbs = np.array([a[1] for a in agents], dtype=int)
        self.parent = np.array([self.parent_of_child[c] for c in self.child], dtype=int)
        n = len(agents)
        self.Q = np.zeros((n, N_STATES, cfg.n_levels))
        self.visits = np.zeros((n, N_STATES, cfg.n_levels), dtype=np.int64)
        self.state = np.zeros(n, dtype=int)
        self.gain = large_scale_gain(cfg, deployment) if deployment.n_sbs else np.zeros((0, 0))

    @property
    def n_agents(self) -> int:
        return len(self.child)

    def _act(self) -> np.ndarray:
        cfg = self.cfg
        q = self.Q[np.arange(self.n_agents), self.state]
        if cfg.exploration == "boltzmann":
            p = softmax(q / cfg.T_p, axis=1)
            u = self.rng.random((self.n_agents, 1))
            return np.minimum((np.cumsum(p, axis=1) < u).sum(axis=1), cfg.n_levels - 1)
        greedy = np.argmax(q, axis=1)
        explore = self.rng.random(self.n_agents) < cfg.epsilon
        rand = self.rng.integers(cfg.n_levels, size=self.n_agents)
        return np.where(explore, rand, greedy)

    def _rewards(self, rb_of_agent, levels):
        cfg = self.cfg
        n = self.n_agents
        p = levels * cfg.delta
        h = self.rng.exponential(1.0 / cfg.eta, size=(n, n))
        # rx[i, j]: power of agent i at the UE of agent j
        rx = h * self.gain[np.ix_(self.sbs, self.sbs)] * p[:, None]
        co = (rb_of_agent[:, None] == rb_of_agent[None, :]) & (self.sbs[:, None] != self.sbs[None, :])
        interference = (rx * co).sum(axis=0)
        sinr = np.diag(rx) / (interference + cfg.sigma2)
        ok = (sinr >= cfg.sinr_th) & (p > 0)
        w = np.where(ok, np.log1p(sinr), 0.0)
        return ok.astype(int), w

    def epoch(self, assignment, steps: int, window: float = 0.5) -> list[PowerPmf]:
        """Run ``steps`` synchronous learning steps; return one pmf per parent."""
        cfg = self.cfg
        n = self.n_agents
        if n == 0:
            return [PowerPmf.full(cfg.n_levels, cfg.delta)] * cfg.K
        rb = np.asarray(assignment)[self.child]
        idx = np.arange(n)
        start = min(int(steps * (1 - window)), steps - 1)
        counts = np.zeros((n, cfg.n_levels))
        for t in range(steps):
            a = self._act()
            s_next, w = self._rewards(rb, a)
            s = self.state
            if cfg.beta == "visits":
                b = 1.0 / (1.0 + self.visits[idx, s, a])
            else:
                b = float(cfg.beta)
            nxt = self.Q[idx, s_next]
            if cfg.strict_max and cfg.n_levels > 1:
                nxt = np.where(np.arange(cfg.n_levels)[None, :] == a[:, None], -np.inf, nxt)
            target = w + cfg.gamma * nxt.max(axis=1)
            self.Q[idx, s, a] = (1 - b) * self.Q[idx, s, a] + b * target
            self.visits[idx, s, a] += 1
            self.state = s_next
            if t >= start:
                counts[idx, a] += 1
        pmfs = []
        for k in range(cfg.K):
            mine = self.parent == k
            if not mine.any():
                pmfs.append(PowerPmf.full(cfg.n_levels, cfg.delta))
                continue
            # average of the agents' own frequency vectors
            freq = counts[mine] / counts[mine].sum(axis=1, keepdims=True)
            pmfs.append(PowerPmf.from_counts(freq.mean(axis=0), cfg.delta))
        return pmfs
