"""Actor-critic agent that learns combining phase vectors from binary rewards.

The actor maps the current phase vector to the next one; the critic scores
(state, action) pairs.  Element-wise quantization is applied only when acting
on an environment -- it never appears in a gradient path, so training sees
raw (continuous) actions throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import gain_to_db, make_codebook, quantize, to_combiner, wrap_phase
from .environment import estimate_sinr
from .neuralnet import Adam, mlp

_AGENT_STREAM = 4


@dataclass
class ActorCriticConfig:
    """Sizes and hyperparameters of the learning agent.

    Hidden widths follow the 16x rule: first hidden layer is 16x the input
    size, second is 16x the output size (actor M->16M,16M->M; critic
    2M->32M,16->1).  Overridable for experiments.
    """

    antennas: int
    bits: int
    gamma: float = 0.5
    tau: float = 0.005
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    replay_capacity: int = 4096
    batch_size: int = 128
    explore_sigma: float = 0.5
    explore_decay: float = 0.995
    explore_floor: float = 0.05
    actor_hidden: tuple | None = None
    critic_hidden: tuple | None = None

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must be in [0, 1), got {self.gamma}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        for name in ("antennas", "bits", "replay_capacity", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.actor_hidden is None:
            self.actor_hidden = (16 * self.antennas, 16 * self.antennas)
        if self.critic_hidden is None:
            self.critic_hidden = (32 * self.antennas, 16)


@dataclass(frozen=True)
class Transition:
    """One interaction: the quantized action is also the next state."""

    state: np.ndarray
    raw_action: np.ndarray
    action: np.ndarray
    reward: int
    sinr: float

    @property
    def next_state(self) -> np.ndarray:
        return self.action


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling."""

    def __init__(self, capacity: int, antennas: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, antennas))
        self.raw_actions = np.zeros((capacity, antennas))
        self.actions = np.zeros((capacity, antennas))
        self.rewards = np.zeros(capacity)
        self.sinrs = np.zeros(capacity)
        self.size = 0
        self.pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, t: Transition) -> None:
        i = self.pos
        self.states[i] = t.state
        self.raw_actions[i] = t.raw_action
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.sinrs[i] = t.sinr
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=batch)
        return (
            self.states[idx],
            self.raw_actions[idx],
            self.rewards[idx],
            self.actions[idx],  # deterministic transition: next state == action
        )


class BeamAgent:
    """DDPG-style learner over quantized phase vectors."""

    def __init__(self, config: ActorCriticConfig, seed: int = 0):
        self.config = config
        self.codebook = make_codebook(config.bits)
        self.rng = np.random.default_rng(np.random.SeedSequence((seed, _AGENT_STREAM)))
        m = config.antennas
        self.actor = mlp((m, *config.actor_hidden, m), self.rng, output_tanh_scale=np.pi)
        self.critic = mlp((2 * m, *config.critic_hidden, 1), self.rng)
        self.actor_target = self.actor.clone()
        self.critic_target = self.critic.clone()
        self.actor_target.eval()
        self.critic_target.eval()
        self.actor_opt = Adam(self.actor.params(), lr=config.actor_lr)
        self.critic_opt = Adam(self.critic.params(), lr=config.critic_lr)
        self.sigma = config.explore_sigma

    def random_state(self) -> np.ndarray:
        """Uniform draw from the codebook grid -- the starting beam."""
        return self.rng.choice(self.codebook.values, size=self.config.antennas)

    def act(self, state, explore: bool = True):
        """Return (raw, quantized) actions for one state.

        The raw action is pi*tanh(actor output) plus exploration noise wrapped
        back into (-pi, pi]; the quantized action is what the environment gets.
        """
        self.actor.eval()
        raw = self.actor.forward(np.asarray(state, dtype=float))
        if explore:
            raw = wrap_phase(raw + self.rng.normal(0.0, self.sigma, size=raw.shape))
        return raw, quantize(raw, self.codebook)

    def decay_exploration(self) -> None:
        self.sigma = max(self.sigma * self.config.explore_decay, self.config.explore_floor)

    def train_step(self, buffer: ReplayBuffer):
        """One critic regression step and one actor ascent step, then soft updates.

        Returns loss diagnostics, or None when the buffer is still smaller
        than a batch.
        """
        cfg = self.config
        if len(buffer) < cfg.batch_size:
            return None
        states, raw_actions, rewards, next_states = buffer.sample(cfg.batch_size, self.rng)

        # TD target from the target networks (inference mode).
        next_raw = self.actor_target.forward(next_states)
        q_next = self.critic_target.forward(np.hstack([next_states, next_raw]))[:, 0]
        targets = rewards + cfg.gamma * q_next

        self.critic.train()
        q = self.critic.forward(np.hstack([states, raw_actions]))[:, 0]
        diff = q - targets
        critic_loss = float(np.mean(diff ** 2))
        self.critic.backward((2.0 * diff / diff.size)[:, None])
        self.critic_opt.step(self.critic.params(), self.critic.grads())

        # Actor ascends the critic: gradient of -mean(Q(s, actor(s))).
        self.actor.train()
        actions_pi = self.actor.forward(states)
        q_pi = self.critic.forward(np.hstack([states, actions_pi]))[:, 0]
        actor_loss = float(-np.mean(q_pi))
        dinput = self.critic.backward(np.full((cfg.batch_size, 1), -1.0 / cfg.batch_size))
        self.actor.backward(dinput[:, cfg.antennas:])
        self.actor_opt.step(self.actor.params(), self.actor.grads())

        self.actor_target.copy_weights_from(self.actor, rate=cfg.tau)
        self.critic_target.copy_weights_from(self.critic, rate=cfg.tau)
        return {"critic_loss": critic_loss, "actor_loss": actor_loss}


@dataclass
class SegmentResult:
    best_phases: np.ndarray
    best_sinr: float
    iterations: int


@dataclass
class LearnResult:
    best_phases: np.ndarray
    best_sinr: float
    log: list
    measurement_pairs: int


class LearningSession:
    """Drives the state -> act -> step -> store -> train loop.

    The environment is pluggable (actual or surrogate; identical step
    contract) and may change between `run` calls; the current state, replay
    buffer, and exploration schedule persist across segments.
    """

    def __init__(self, agent: BeamAgent, initial_state=None):
        self.agent = agent
        self.buffer = ReplayBuffer(agent.config.replay_capacity, agent.config.antennas)
        self.state = agent.random_state() if initial_state is None else np.asarray(initial_state, float)
        self.prev_sinr = None
        self.iteration = 0
        self.log: list[dict] = []
        self._env = None

    def run(
        self,
        env,
        iterations: int,
        phase: str = "real",
        sample_sink=None,
        stop_after_no_improve: int | None = None,
    ) -> SegmentResult:
        """Interact for up to `iterations` steps; track the segment's best beam.

        `sample_sink(w, measurement)` collects every on/off measurement this
        segment performs.  With `stop_after_no_improve=W`, the segment ends
        early once the best seen SINR has not improved for W steps.
        """
        if iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {iterations}")
        agent = self.agent
        if env is not self._env or self.prev_sinr is None:
            # New environment: its SINR scale may differ, so re-measure the
            # beam we are currently sitting on.
            self._env = env
            m = env.measure(self.state)
            self.prev_sinr = estimate_sinr(m)
            if sample_sink is not None:
                sample_sink(to_combiner(self.state), m)
        best_phases = self.state.copy()
        best_sinr = self.prev_sinr
        since_improve = 0
        done = 0
        for _ in range(iterations):
            raw, action = agent.act(self.state, explore=True)
            outcome = env.step(self.prev_sinr, action)
            if sample_sink is not None:
                sample_sink(to_combiner(action), outcome.measurement)
            self.buffer.add(
                Transition(
                    state=self.state,
                    raw_action=raw,
                    action=action,
                    reward=outcome.reward,
                    sinr=outcome.sinr,
                )
            )
            losses = agent.train_step(self.buffer)
            self.iteration += 1
            done += 1
            row = {"iter": self.iteration}
            row.update(env.log_metrics(action))
            row["reward"] = outcome.reward
            row["sinr_measured_db"] = float(gain_to_db(outcome.sinr))
            row["sigma_explore"] = agent.sigma
            row["critic_loss"] = losses["critic_loss"] if losses else np.nan
            row["actor_loss"] = losses["actor_loss"] if losses else np.nan
            row["phase"] = phase
            self.log.append(row)

            if outcome.sinr > best_sinr:
                best_sinr = outcome.sinr
                best_phases = action.copy()
                since_improve = 0
            else:
                since_improve += 1
            self.state = action
            self.prev_sinr = outcome.sinr
            agent.decay_exploration()
            if stop_after_no_improve is not None and since_improve >= stop_after_no_improve:
                break
        return SegmentResult(best_phases=best_phases, best_sinr=best_sinr, iterations=done)


def learn(agent: BeamAgent, env, iterations: int, sample_sink=None) -> LearnResult:
    """Plain online learning against one environment; returns the best beam found."""
    session = LearningSession(agent)
    segment = session.run(env, iterations, sample_sink=sample_sink)
    pairs = getattr(env, "measurement_pairs", 0)
    return LearnResult(
        best_phases=segment.best_phases,
        best_sinr=segment.best_sinr,
        log=session.log,
        measurement_pairs=pairs,
    )
