"""
Twin-delayed deterministic policy-gradient agent over the pricing environment.

The agent owns an actor, two critics, their target copies and one optimizer bundle per
online network. Randomness is split into independent streams (initialization,
exploration, replay sampling, target smoothing) spawned from the run seed.
"""

from __future__ import annotations

import json
import logging
import os
import time
import typing as t

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from . import exceptions
from . import market_env as env
from .approximator import archive
from .approximator.networks import (
    Actor,
    Critic,
    Network,
    backward_many,
    extractors,
    forward_many,
    make_extractor_spec,
    soft_update,
)
from .approximator.optim import ParameterBundle, optimizer_step
from .domain import Scenario

__all__ = (
    "AgentConfig",
    "ConstantPolicy",
    "EpisodeMetrics",
    "EvaluationResult",
    "MetricsWriter",
    "RandomPolicy",
    "ReplayBuffer",
    "ReplayPolicy",
    "TD3Agent",
    "TrainDiagnostics",
    "TrainResult",
    "Transition",
    "critic_target",
    "evaluate",
    "load_checkpoint",
    "save_checkpoint",
    "select_action",
    "td3_target",
    "train",
    "train_step",
)

logger = logging.getLogger(__name__)

Policy = t.Callable[[np.ndarray], t.Sequence[float]]


class AgentConfig(BaseModel):
    """
    Training hyperparameters.

    :param gamma: Discount rate of future rewards.
    :param lr_actor: Actor step size.
    :param lr_critic: Critic step size.
    :param batch: Replay minibatch size.
    :param buffer_capacity: Replay buffer capacity (transitions).
    :param policy_delay: Critic updates per actor and target update.
    :param tau: Soft update rate of the target networks.
    :param exploration_sigma: Std of the Gaussian exploration noise on raw actions.
    :param target_sigma: Std of the target policy smoothing noise.
    :param target_clip: Clip of the target policy smoothing noise.
    :param warmup_steps: Steps taken with uniform random actions before learning starts.
    :param total_steps: Environment steps per training run.
    :param extractor: Feature extractor kind, mbtf or mlp.
    :param head_hidden: Hidden layer widths of the actor and critic heads.
    :param lstm_hidden: Hidden state size of each recurrent branch.
    :param scalar_hidden: Output size of the scalar branch.
    :param fused_dim: Output size of the fusion layer.
    :param adam_betas: Moment decay rates of the optimizer.
    :param adam_eps: Optimizer denominator floor.
    :param eval_every: Episodes between logged greedy evaluations.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(0.99, gt=0, le=1)
    lr_actor: float = Field(1e-5, ge=0)
    lr_critic: float = Field(1e-5, ge=0)
    batch: int = Field(100, ge=1)
    buffer_capacity: int = Field(1_000_000, ge=1)
    policy_delay: int = Field(2, ge=1)
    tau: float = Field(0.005, gt=0, le=1)
    exploration_sigma: float = Field(0.1, ge=0)
    target_sigma: float = Field(0.2, ge=0)
    target_clip: float = Field(0.5, ge=0)
    warmup_steps: int = Field(1000, ge=0)
    total_steps: int = Field(200_000, ge=1)
    extractor: str = "mbtf"
    head_hidden: t.Tuple[int, ...] = (64, 64)
    lstm_hidden: int = Field(16, ge=1)
    scalar_hidden: int = Field(8, ge=1)
    fused_dim: int = Field(64, ge=1)
    adam_betas: t.Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = Field(1e-8, gt=0)
    eval_every: int = Field(10, ge=1)


class Transition(t.NamedTuple):
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool


class TransitionBatch(t.NamedTuple):
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray


class ReplayBuffer:
    """Ring buffer of transitions; once full, new transitions overwrite the oldest."""

    def __init__(self, capacity: int, rng: np.random.Generator) -> None:
        self.capacity = capacity
        self.rng = rng
        self.cursor = 0
        self._storage: t.List[Transition] = []

    def __len__(self) -> int:
        return len(self._storage)

    def __getitem__(self, index: int) -> Transition:
        return self._storage[index]

    def add(self, transition: Transition) -> None:
        if len(self._storage) < self.capacity:
            self._storage.append(transition)
        else:
            self._storage[self.cursor] = transition
        self.cursor = (self.cursor + 1) % self.capacity

    def sample(self, batch: int) -> TransitionBatch:
        """
        :raises exceptions.InsufficientBufferException: If fewer than `batch` transitions are stored
        """
        if len(self._storage) < batch:
            raise exceptions.InsufficientBufferException(size=len(self._storage), batch=batch)
        idx = self.rng.integers(0, len(self._storage), size=batch)
        rows = [self._storage[i] for i in idx]
        return TransitionBatch(
            obs=np.stack([r.obs for r in rows]),
            action=np.stack([r.action for r in rows]),
            reward=np.array([r.reward for r in rows], dtype=np.float64),
            next_obs=np.stack([r.next_obs for r in rows]),
            done=np.array([r.done for r in rows], dtype=np.float64),
        )


class TD3Agent:
    """Online and target networks, optimizer state and random streams of one run."""

    def __init__(
        self,
        cfg: AgentConfig,
        actor: Actor,
        critic1: Critic,
        critic2: Critic,
        seed: int = 0,
    ) -> None:
        self.cfg = cfg
        self.seed = seed
        self.actor, self.critic1, self.critic2 = actor, critic1, critic2
        self.actor_target = actor.copy()
        self.critic1_target = critic1.copy()
        self.critic2_target = critic2.copy()
        self.actor_opt = ParameterBundle.from_params(actor.params)
        self.critic1_opt = ParameterBundle.from_params(critic1.params)
        self.critic2_opt = ParameterBundle.from_params(critic2.params)
        self.critic_updates = 0
        self.actor_updates = 0
        streams = np.random.SeedSequence(seed).spawn(3)
        self.explore_rng = np.random.default_rng(streams[0])
        self.sample_rng = np.random.default_rng(streams[1])
        self.noise_rng = np.random.default_rng(streams[2])

    @classmethod
    def build(cls, sequence_len: int, cfg: AgentConfig, seed: int = 0) -> "TD3Agent":
        """
        Fresh networks for observations built from windows of `sequence_len`.

        :raises exceptions.RegistryException: If the configured extractor is unknown
        """
        spec = make_extractor_spec(sequence_len, cfg.lstm_hidden, cfg.scalar_hidden, cfg.fused_dim)
        factory = extractors[cfg.extractor]
        init_rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1D1]))
        actor = t.cast(Actor, Actor.build(factory(spec), cfg.head_hidden, init_rng))
        critic1 = t.cast(Critic, Critic.build(factory(spec), cfg.head_hidden, init_rng))
        critic2 = t.cast(Critic, Critic.build(factory(spec), cfg.head_hidden, init_rng))
        return cls(cfg, actor, critic1, critic2, seed=seed)

    def networks(self) -> t.Dict[str, Network]:
        return {
            "actor": self.actor,
            "critic1": self.critic1,
            "critic2": self.critic2,
            "actor_target": self.actor_target,
            "critic1_target": self.critic1_target,
            "critic2_target": self.critic2_target,
        }


def select_action(actor: Actor, obs: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Actor output plus Gaussian noise, clipped to [-1, 1]; sigma 0 is the greedy policy."""
    a = actor.forward(obs)[0]
    if sigma > 0:
        a = a + rng.normal(0.0, sigma, size=a.shape)
    return np.clip(a, -1.0, 1.0)


def td3_target(
    reward: np.ndarray, done: np.ndarray, q1: np.ndarray, q2: np.ndarray, gamma: float
) -> np.ndarray:
    """r + (1 - done) * gamma * min(q1, q2)."""
    return reward + (1.0 - done) * gamma * np.minimum(q1, q2)


def critic_target(
    reward: np.ndarray,
    done: np.ndarray,
    next_obs: np.ndarray,
    agent: TD3Agent,
    rng: t.Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Bootstrapped regression target with smoothed target-policy actions."""
    cfg = agent.cfg
    rng = rng or agent.noise_rng
    a_next = agent.actor_target.forward(next_obs)
    if cfg.target_sigma > 0:
        noise = np.clip(rng.normal(0.0, cfg.target_sigma, size=a_next.shape), -cfg.target_clip, cfg.target_clip)
        a_next = np.clip(a_next + noise, -1.0, 1.0)
    (q1, q2), _ = forward_many([agent.critic1_target, agent.critic2_target], next_obs, a_next)
    return td3_target(
        np.asarray(reward, dtype=np.float64), np.asarray(done, dtype=np.float64), q1[:, 0], q2[:, 0], cfg.gamma
    )


class TrainDiagnostics(t.NamedTuple):
    critic_loss: float
    actor_loss: t.Optional[float]


def _update_critics(agent: TD3Agent, batch: TransitionBatch, y: np.ndarray) -> float:
    """Both critics regress on `y` in one stacked pass; returns their mean squared error."""
    cfg = agent.cfg
    critics = [agent.critic1, agent.critic2]
    qs, stacked = forward_many(critics, batch.obs, batch.action)
    errs = [q[:, 0] - y for q in qs]
    grads = backward_many(critics, stacked, [(2.0 * e / len(y))[:, None] for e in errs])
    for (g, _), bundle in zip(grads, (agent.critic1_opt, agent.critic2_opt)):
        bundle.set_grads(g)
        optimizer_step(bundle, cfg.lr_critic, cfg.adam_betas, cfg.adam_eps)
    return float(np.mean([np.mean(e * e) for e in errs]))


def train_step(agent: TD3Agent, buffer: ReplayBuffer) -> TrainDiagnostics:
    """
    One critic update on a sampled minibatch; every `policy_delay` critic updates, one actor
    update followed by the soft update of all targets.

    :raises exceptions.InsufficientBufferException: If the buffer holds fewer than a batch
    """
    cfg = agent.cfg
    batch = buffer.sample(cfg.batch)
    y = critic_target(batch.reward, batch.done, batch.next_obs, agent)
    critic_loss = _update_critics(agent, batch, y)
    agent.critic_updates += 1

    actor_loss = None
    if agent.critic_updates % cfg.policy_delay == 0:
        n = len(y)
        a = agent.actor.forward(batch.obs)
        q = agent.critic1.forward(batch.obs, a)[:, 0]
        # critic gradients of this pass are discarded
        _, d_action = agent.critic1.backward_full(np.full((n, 1), -1.0 / n))
        grads, _ = agent.actor.backward_full(d_action)
        agent.actor_opt.set_grads(grads)
        optimizer_step(agent.actor_opt, cfg.lr_actor, cfg.adam_betas, cfg.adam_eps)
        for target, online in (
            (agent.actor_target, agent.actor),
            (agent.critic1_target, agent.critic1),
            (agent.critic2_target, agent.critic2),
        ):
            soft_update(target, online, cfg.tau)
        agent.actor_updates += 1
        actor_loss = float(-np.mean(q))

    return TrainDiagnostics(critic_loss=critic_loss, actor_loss=actor_loss)


class EpisodeMetrics(t.NamedTuple):
    seed: int
    episode: int
    extractor: str
    ret: float
    mean_c_ave: float
    beta_lin: float
    beta_sqr: float
    penalty: float
    steps: int
    wall_time: float
    manifest_id: str

    def record(self) -> t.Dict[str, t.Any]:
        row = self._asdict()
        return {"return" if k == "ret" else k: v for k, v in row.items()}


class MetricsWriter:
    """Writes one JSON line per episode to `path`, replacing any earlier log."""

    def __init__(self, path: str | os.PathLike[str]) -> None:
        self.path = path

    def __enter__(self) -> "MetricsWriter":
        self._fp = open(self.path, "w", encoding="utf-8")
        return self

    def __exit__(self, *exc: t.Any) -> None:
        self._fp.close()

    def write(self, metrics: EpisodeMetrics) -> None:
        self._fp.write(json.dumps(metrics.record()) + "\n")
        self._fp.flush()


class TrainResult(t.NamedTuple):
    agent: TD3Agent
    metrics: t.List[EpisodeMetrics]
    warmup_actions: t.List[np.ndarray]


def train(
    scenario: Scenario,
    cfg: AgentConfig,
    seed: int = 0,
    *,
    writer: t.Optional[MetricsWriter] = None,
    manifest_id: str = "",
) -> TrainResult:
    """
    Run whole episodes until at least `cfg.total_steps` environment steps are taken.

    Learning starts once `warmup_steps` have been taken and the buffer holds a batch;
    before that actions are uniform in [-1, 1]^2.
    """
    agent = TD3Agent.build(scenario.sequence_len, cfg, seed)
    buffer = ReplayBuffer(cfg.buffer_capacity, agent.sample_rng)
    market = env.MarketEnv(scenario)
    metrics: t.List[EpisodeMetrics] = []
    warmup_actions: t.List[np.ndarray] = []
    steps, episode = 0, 0
    started = time.perf_counter()

    while steps < cfg.total_steps:
        obs, _ = market.reset(seed=seed)
        done, ep_return, ep_penalty, c_ave = False, 0.0, 0.0, 0.0
        while not done:
            if steps < cfg.warmup_steps:
                action = agent.explore_rng.uniform(-1.0, 1.0, size=2)
                warmup_actions.append(action)
            else:
                action = select_action(agent.actor, obs, cfg.exploration_sigma, agent.explore_rng)
            next_obs, r, done, _, info = market.step(action)
            buffer.add(Transition(obs, np.asarray(action, dtype=np.float64), float(r), next_obs, bool(done)))
            obs = next_obs
            steps += 1
            ep_return += r
            ep_penalty += info["outcome"].penalty
            c_ave = info["outcome"].c_ave
            if steps >= cfg.warmup_steps and len(buffer) >= cfg.batch:
                train_step(agent, buffer)

        assert market.state is not None
        st = market.state.penalty_state
        m = EpisodeMetrics(
            seed=seed,
            episode=episode,
            extractor=cfg.extractor,
            ret=float(ep_return),
            mean_c_ave=float(c_ave),
            beta_lin=float(st.beta_lin),
            beta_sqr=float(st.beta_sqr),
            penalty=float(ep_penalty),
            steps=steps,
            wall_time=round(time.perf_counter() - started, 3),
            manifest_id=manifest_id,
        )
        metrics.append(m)
        if writer is not None:
            writer.write(m)
        logger.info(
            "seed=%d episode=%d return=%.3f c_ave=%.3f beta_lin=%.3f beta_sqr=%.3f",
            seed, episode, m.ret, m.mean_c_ave, m.beta_lin, m.beta_sqr,
        )  # fmt: skip
        if (episode + 1) % cfg.eval_every == 0:
            greedy = evaluate(agent.actor.act, scenario)
            logger.info("seed=%d episode=%d greedy_return=%.3f", seed, episode, greedy.mean_return)
        episode += 1

    return TrainResult(agent=agent, metrics=metrics, warmup_actions=warmup_actions)


class ConstantPolicy:
    def __init__(self, a1: float, a2: float) -> None:
        self.action = (float(a1), float(a2))

    def __call__(self, obs: np.ndarray) -> t.Tuple[float, float]:
        return self.action


class RandomPolicy:
    """Uniform raw actions from a seeded stream."""

    def __init__(self, seed: int = 0) -> None:
        self.rng = np.random.default_rng(seed)

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        return self.rng.uniform(-1.0, 1.0, size=2)


class ReplayPolicy:
    """Replays a fixed sequence of raw actions, restarting at the top of every episode."""

    def __init__(self, actions: t.Sequence[t.Sequence[float]]) -> None:
        self.actions = [tuple(a) for a in actions]
        self._next = 0

    def rewind(self) -> None:
        self._next = 0

    def __call__(self, obs: np.ndarray) -> t.Tuple[float, ...]:
        a = self.actions[self._next % len(self.actions)]
        self._next += 1
        return a


class EvaluationResult(t.NamedTuple):
    mean_return: float
    mean_satisfaction: float
    returns: t.List[float]
    traces: t.List[t.List[t.Dict[str, t.Any]]]


def evaluate(policy: Policy, scenario: Scenario, n_episodes: int = 1, seed: int = 0) -> EvaluationResult:
    """
    Noise-free rollouts of `policy`, each from freshly initialized penalty coefficients.

    Satisfaction is the day-average (final running average) of each episode.
    """
    returns, sats, traces = [], [], []
    for k in range(n_episodes):
        if isinstance(policy, ReplayPolicy):
            policy.rewind()
        state, obs = env.reset(scenario, seed + k)
        total, rows, outcome = 0.0, [], None
        while state.t < scenario.horizon:
            outcome, state, obs = env.step(scenario, state, policy(obs.flatten()))
            total += outcome.reward
            rows.append(env.trace_record(outcome))
        returns.append(total)
        sats.append(outcome.c_ave if outcome is not None else 0.0)
        traces.append(rows)
    return EvaluationResult(
        mean_return=float(np.mean(returns)),
        mean_satisfaction=float(np.mean(sats)),
        returns=returns,
        traces=traces,
    )


_SEP = ":"


def save_checkpoint(
    path: str | os.PathLike[str], agent: TD3Agent, sequence_len: int, manifest_id: t.Optional[str] = None
) -> None:
    """All six networks plus the agent config in one versioned archive, tagged with the run's manifest id."""
    params = {
        f"{net}{_SEP}{name}": arr
        for net, network in agent.networks().items()
        for name, arr in network.params.items()
    }
    meta = {
        "config": agent.cfg.model_dump(mode="json"),
        "extractor": agent.cfg.extractor,
        "sequence_len": sequence_len,
        "seed": agent.seed,
        "manifest_id": manifest_id,
    }
    archive.save_params(path, params, meta)


def load_checkpoint(path: str | os.PathLike[str]) -> TD3Agent:
    """
    :raises exceptions.ArchiveVersionException: If the archive version is not supported
    """
    params, meta = archive.load_params(path)
    cfg = AgentConfig(**meta["config"])
    agent = TD3Agent.build(int(meta["sequence_len"]), cfg, int(meta.get("seed", 0)))
    for net, network in agent.networks().items():
        for name, arr in network.params.items():
            arr[...] = params[f"{net}{_SEP}{name}"]
    return agent
