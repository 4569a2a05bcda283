"""Actor-critic trainer with replay buffer, target networks, and decaying
Gaussian exploration.

The actor maps the flattened mission state to a squashed (speed, pitch,
heading) triple; the critic scores state-action pairs. Positions and the
pheromone are rescaled to order one before entering either network; actions
are handled in the squashed [-1, 1] space and mapped to physical bounds at
the environment boundary.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .mdp import Action, Mission
from .neuralnet import Adam, Mlp, flatten_grads, soft_update
from .seeding import derive_seed, stream_rng


class TrainingDiverged(RuntimeError):
    """A loss or parameter went non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 8000
    batch_size: int = 256
    discount: float = 0.99
    soft_update_tau: float = 0.005
    noise_std: float = 0.6
    noise_decay: float = 0.999
    warmup: int = 2000
    buffer_capacity: int = 125_000
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    hidden: tuple = (200, 200)
    checkpoint_every: int = 500

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must be in (0, 1)")
        if not 0.0 < self.soft_update_tau <= 1.0:
            raise ValueError("soft_update_tau must be in (0, 1]")
        if self.batch_size > self.warmup:
            raise ValueError("batch_size must not exceed the warmup threshold")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring with uniform minibatch sampling."""

    def __init__(self, capacity, state_dim, action_dim=3):
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self.cursor = 0
        self.size = 0

    def add(self, state, action, reward, next_state, done):
        i = self.cursor
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def add_transition(self, tr: Transition):
        self.add(tr.state, tr.action, tr.reward, tr.next_state, tr.done)

    def sample(self, rng, batch_size):
        """Uniform minibatch without replacement from the current fill."""
        if batch_size > self.size:
            raise ValueError("not enough stored transitions")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return {
            "state": self.states[idx],
            "action": self.actions[idx],
            "reward": self.rewards[idx],
            "next_state": self.next_states[idx],
            "done": self.dones[idx],
        }


@dataclass(frozen=True)
class ScaleSpec:
    """Constants that map raw states/actions to network inputs."""

    num_gts: int
    area_side: float
    z_min: float
    z_max: float
    capture_gain: float
    max_speed: float

    @classmethod
    def from_mission(cls, env: Mission):
        p = env.urban_map.params
        return cls(
            num_gts=env.num_gts,
            area_side=p.area_side_m,
            z_min=p.z_bounds_m[0],
            z_max=p.z_bounds_m[1],
            capture_gain=env.config.capture_gain,
            max_speed=env.config.max_speed,
        )

    @property
    def state_dim(self):
        return 2 * self.num_gts + 4

    def normalize_states(self, s):
        s = np.atleast_2d(np.asarray(s, dtype=np.float64)).copy()
        k2 = 2 * self.num_gts
        s[:, k2] /= self.area_side
        s[:, k2 + 1] /= self.area_side
        s[:, k2 + 2] = (s[:, k2 + 2] - self.z_min) / (self.z_max - self.z_min)
        s[:, k2 + 3] /= self.num_gts * self.capture_gain
        return s

    def normalize_actions(self, a):
        a = np.atleast_2d(np.asarray(a, dtype=np.float64)).copy()
        a[:, 0] = 2.0 * a[:, 0] / self.max_speed - 1.0
        a[:, 1] = 2.0 * a[:, 1] / math.pi - 1.0
        a[:, 2] = a[:, 2] / math.pi - 1.0
        return a

    def action_from_squashed(self, t):
        speed = (t[0] + 1.0) / 2.0 * self.max_speed
        pitch = (t[1] + 1.0) / 2.0 * math.pi
        heading = (t[2] + 1.0) * math.pi
        if heading <= 0.0:
            heading = 2.0 * math.pi
        return Action(float(speed), float(pitch), float(heading))


class DdpgAgent:
    """Online and target networks plus their optimizers."""

    def __init__(self, scale: ScaleSpec, cfg: TrainConfig, seed):
        self.scale = scale
        self.cfg = cfg
        state_dim = scale.state_dim
        self.actor = Mlp((state_dim, *cfg.hidden, 3), output_activation="tanh",
                         rng=stream_rng(seed, "init/actor"))
        self.critic = Mlp((state_dim + 3, *cfg.hidden, 1),
                          rng=stream_rng(seed, "init/critic"))
        self.actor_target = self.actor.clone()
        self.critic_target = self.critic.clone()
        self.actor_opt = Adam(self.actor.parameters(), cfg.actor_lr)
        self.critic_opt = Adam(self.critic.parameters(), cfg.critic_lr)

    def squashed_policy(self, states_norm, net=None):
        net = net or self.actor
        out, _ = net.forward(states_norm)
        return out

    def select_action(self, state, noise_std, rng) -> Action:
        """Policy output plus clipped Gaussian noise in the squashed space."""
        s = self.scale.normalize_states(state)
        t = self.squashed_policy(s)[0]
        if noise_std > 0.0:
            t = t + noise_std * rng.standard_normal(3)
        t = np.clip(t, -1.0, 1.0)
        return self.scale.action_from_squashed(t)

    def greedy_action(self, state) -> Action:
        s = self.scale.normalize_states(state)
        return self.scale.action_from_squashed(self.squashed_policy(s)[0])

    def critic_targets(self, rewards, next_states, dones):
        """Bootstrapped regression targets, masked at terminal transitions."""
        ns = self.scale.normalize_states(next_states)
        next_actions = self.squashed_policy(ns, net=self.actor_target)
        q_next, _ = self.critic_target.forward(np.hstack([ns, next_actions]))
        return rewards + self.cfg.discount * (1.0 - dones) * q_next[:, 0]

    def update_critic(self, batch, targets):
        """One regression step on the mean squared target error."""
        s = self.scale.normalize_states(batch["state"])
        a = self.scale.normalize_actions(batch["action"])
        q, cache = self.critic.forward(np.hstack([s, a]))
        err = q[:, 0] - targets
        loss = float(np.mean(err**2))
        grad = (2.0 / len(err)) * err[:, None]
        grads, _ = self.critic.backward(cache, grad)
        self.critic_opt.step(self.critic.parameters(), flatten_grads(grads))
        return loss

    def update_actor(self, batch):
        """Ascend the critic's score of the policy's own actions."""
        s = self.scale.normalize_states(batch["state"])
        pi, cache_pi = self.actor.forward(s)
        q, cache_q = self.critic.forward(np.hstack([s, pi]))
        value = float(np.mean(q[:, 0]))
        upstream = np.full((len(s), 1), -1.0 / len(s))
        _, grad_in = self.critic.backward(cache_q, upstream)
        grad_actions = np.ascontiguousarray(grad_in[:, self.scale.state_dim:])
        grads, _ = self.actor.backward(cache_pi, grad_actions)
        self.actor_opt.step(self.actor.parameters(), flatten_grads(grads))
        return value

    def update(self, batch):
        targets = self.critic_targets(batch["reward"], batch["next_state"],
                                      batch["done"])
        loss = self.update_critic(batch, targets)
        value = self.update_actor(batch)
        tau = self.cfg.soft_update_tau
        soft_update(self.critic_target, self.critic, tau)
        soft_update(self.actor_target, self.actor, tau)
        if not (np.isfinite(loss) and np.isfinite(value)):
            raise TrainingDiverged(f"loss={loss}, policy value={value}")
        for arr in self.critic.parameters() + self.actor.parameters():
            if not np.isfinite(arr).all():
                raise TrainingDiverged("non-finite network parameter")
        return loss, value

    def save(self, directory):
        os.makedirs(directory, exist_ok=True)
        self.actor.save(os.path.join(directory, "actor.npz"))
        self.critic.save(os.path.join(directory, "critic.npz"))
        self.actor_target.save(os.path.join(directory, "actor_target.npz"))
        self.critic_target.save(os.path.join(directory, "critic_target.npz"))
        np.savez(os.path.join(directory, "optimizer.npz"),
                 **{f"actor_{k}": v for k, v in self.actor_opt.state_arrays().items()},
                 **{f"critic_{k}": v for k, v in self.critic_opt.state_arrays().items()})
        meta = {
            "num_gts": self.scale.num_gts,
            "area_side": self.scale.area_side,
            "z_min": self.scale.z_min,
            "z_max": self.scale.z_max,
            "capture_gain": self.scale.capture_gain,
            "max_speed": self.scale.max_speed,
        }
        with open(os.path.join(directory, "scale.json"), "w") as f:
            json.dump(meta, f, indent=1)

    @classmethod
    def load(cls, directory, cfg: TrainConfig):
        with open(os.path.join(directory, "scale.json")) as f:
            meta = json.load(f)
        scale = ScaleSpec(**meta)
        agent = cls.__new__(cls)
        agent.scale = scale
        agent.cfg = cfg
        agent.actor = Mlp.load(os.path.join(directory, "actor.npz"))
        agent.critic = Mlp.load(os.path.join(directory, "critic.npz"))
        agent.actor_target = Mlp.load(os.path.join(directory, "actor_target.npz"))
        agent.critic_target = Mlp.load(os.path.join(directory, "critic_target.npz"))
        agent.actor_opt = Adam(agent.actor.parameters(), cfg.actor_lr)
        agent.critic_opt = Adam(agent.critic.parameters(), cfg.critic_lr)
        data = np.load(os.path.join(directory, "optimizer.npz"))
        agent.actor_opt.load_state_arrays(
            {k[len("actor_"):]: v for k, v in data.items() if k.startswith("actor_")})
        agent.critic_opt.load_state_arrays(
            {k[len("critic_"):]: v for k, v in data.items() if k.startswith("critic_")})
        return agent


def noise_schedule(cfg: TrainConfig, episode):
    """Exploration noise std in effect for the given episode index."""
    return cfg.noise_std * cfg.noise_decay**episode


@dataclass
class EpisodeRow:
    episode: int
    accumulated_reward: float
    steps: int
    completed: bool


@dataclass
class TrainResult:
    rows: list
    critic_losses: list = field(default_factory=list)


def _run_episode(env, agent, episode_seed, noise_std, noise_rng, buffer,
                 buffer_rng, cfg, collect_losses=None):
    state = env.reset(episode_seed)
    flat = state.flatten()
    total = 0.0
    completed = False
    while True:
        action = agent.select_action(flat, noise_std, noise_rng)
        outcome = env.step(action)
        next_flat = outcome.next_state.flatten()
        buffer.add(flat, action.as_array(), outcome.reward, next_flat,
                   outcome.done)
        total += outcome.reward
        if buffer.size > cfg.warmup:
            loss, _ = agent.update(buffer.sample(buffer_rng, cfg.batch_size))
            if collect_losses is not None:
                collect_losses.append(loss)
        flat = next_flat
        if outcome.done:
            completed = outcome.completed
            break
    return total, env.steps_taken, completed


def train(env: Mission, agent: DdpgAgent, cfg: TrainConfig, root_seed,
          reward_path=None, checkpoint_dir=None, progress=None,
          start_episode=0, buffer=None):
    """Run the episode/update loop; returns the per-episode reward history.

    Learning updates start only once the buffer fill exceeds the warmup
    threshold; after that there is exactly one critic and one actor update
    per environment step. Writes one reward-curve row per episode when
    reward_path is given.
    """
    noise_rng = stream_rng(root_seed, "exploration")
    buffer_rng = stream_rng(root_seed, "replay")
    if buffer is None:
        buffer = ReplayBuffer(cfg.buffer_capacity, agent.scale.state_dim)
    result = TrainResult(rows=[])
    curve = open(reward_path, "w", newline="") if reward_path else None
    try:
        if curve:
            curve.write("episode,accumulated_reward,steps,completed\n")
        for episode in range(start_episode, cfg.episodes):
            noise_std = noise_schedule(cfg, episode)
            episode_seed = derive_seed(root_seed, f"episode/{episode}")
            try:
                total, steps, completed = _run_episode(
                    env, agent, episode_seed, noise_std, noise_rng, buffer,
                    buffer_rng, cfg, collect_losses=result.critic_losses)
            except TrainingDiverged:
                if checkpoint_dir:
                    agent.save(os.path.join(checkpoint_dir, "diverged"))
                raise
            row = EpisodeRow(episode, total, steps, completed)
            result.rows.append(row)
            if curve:
                curve.write(f"{episode},{total!r},{steps},{int(completed)}\n")
                curve.flush()
            if progress:
                progress(row)
            if (checkpoint_dir and cfg.checkpoint_every > 0
                    and (episode + 1) % cfg.checkpoint_every == 0):
                agent.save(os.path.join(checkpoint_dir, f"ep{episode + 1:06d}"))
        if checkpoint_dir:
            agent.save(os.path.join(checkpoint_dir, "final"))
    finally:
        if curve:
            curve.close()
    return result


@dataclass
class EvalRow:
    realization: int
    mission_time_s: float
    steps: int
    served: int
    completed: bool


@dataclass
class EvalSummary:
    rows: list

    @property
    def mean_time(self):
        return float(np.mean([r.mission_time_s for r in self.rows]))

    @property
    def std_time(self):
        return float(np.std([r.mission_time_s for r in self.rows]))

    @property
    def completion_rate(self):
        return float(np.mean([float(r.completed) for r in self.rows]))


def greedy_rollout(env: Mission, agent: DdpgAgent, seed, position=None):
    """One noise-free episode; returns (mission_time, steps, served, completed)."""
    state = env.reset(seed, position=position)
    flat = state.flatten()
    while True:
        outcome = env.step(agent.greedy_action(flat))
        flat = outcome.next_state.flatten()
        if outcome.done:
            break
    return env.elapsed_s, env.steps_taken, int(env.state.served.sum()), env.completed


def evaluate(agent: DdpgAgent, envs, episodes_per_map, root_seed,
             trajectory_path=None) -> EvalSummary:
    """Noise-free evaluation over independent realizations.

    Each realization redraws the UAV start position (and fading) from its
    own seed stream; the actor is read-only throughout.
    """
    rows = []
    index = 0
    for env in envs:
        for _ in range(episodes_per_map):
            seed = derive_seed(root_seed, f"eval/{index}")
            t, steps, served, completed = greedy_rollout(env, agent, seed)
            rows.append(EvalRow(index, t, steps, served, completed))
            if trajectory_path and index == 0:
                env.write_trajectory(trajectory_path)
            index += 1
    return EvalSummary(rows=rows)
