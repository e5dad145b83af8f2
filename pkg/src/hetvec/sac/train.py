"""Training and testing loops for the SAC allocator."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..env import SystemConfig, Trajectory, VecEnv, rollout
from .agent import SacAgent
from .buffer import ReplayBuffer

log = logging.getLogger(__name__)


@dataclass
class EpisodeStats:
    episode: int
    avg_reward: float
    mean_backlog: float
    violation_rate: float
    updates: int
    beta: float


@dataclass
class TrainResult:
    agent: SacAgent
    episodes: list[EpisodeStats] = field(default_factory=list)
    skipped_updates: int = 0

    @property
    def rewards(self) -> np.ndarray:
        return np.array([e.avg_reward for e in self.episodes])


def train(sys: SystemConfig, cfg, v: float, seed: int, episode_seed: Callable[[int], int] | None = None,
          agent: SacAgent | None = None, callback=None) -> TrainResult:
    """Episodic SAC training.

    Each episode redraws the channel and starts from empty queues.  After
    every ``k_u``-th episode, ``r_u`` update iterations run on minibatches of
    ``batch_size``; iterations are skipped while the buffer is smaller than
    one minibatch.  ``episode_seed(k)`` gives the environment seed of
    episode ``k`` (default: derived from ``seed``).
    """
    env = VecEnv(sys, v)
    agent = agent or SacAgent(env.state_dim, sys.n, cfg, seed)
    buf = ReplayBuffer(cfg.replay_capacity, env.state_dim, agent.act_dim, agent.act_dim)
    if episode_seed is None:
        base = np.random.SeedSequence(seed).generate_state(1)[0]
        episode_seed = lambda k: int(base) * 1_000_003 + k  # noqa: E731
    result = TrainResult(agent)
    for k in range(cfg.k_max):
        s = env.reset(episode_seed(k))
        total, backlog, viol = 0.0, 0.0, 0.0
        for _ in range(cfg.t_max):
            agent.norm.update(s)
            raw, proj, decision = agent.act(s)
            s_next, r, info = env.step(decision)
            buf.add(s, raw, proj, r * cfg.reward_scale, s_next)
            total += r
            backlog += float(np.mean(info.backlog))
            viol += float(np.mean(info.outcome.violation))
            s = s_next
        if (k + 1) % cfg.k_u == 0:
            for _ in range(cfg.r_u):
                if len(buf) < cfg.batch_size:
                    result.skipped_updates += 1
                    continue
                agent.update(buf.sample(cfg.batch_size, agent.update_rng))
        if result.skipped_updates and k + 1 == cfg.k_u:
            log.info("buffer below batch size: skipped %d update iterations", result.skipped_updates)
        stats = EpisodeStats(k, total / cfg.t_max, backlog / cfg.t_max, viol / cfg.t_max,
                             agent.updates, agent.beta)
        result.episodes.append(stats)
        if callback is not None:
            callback(stats)
    return result


def evaluate(agent: SacAgent, sys: SystemConfig, v: float, t_test: int, seed: int) -> Trajectory:
    """Deterministic (mean-action) rollout; the critics are never touched."""
    agent.norm.frozen = True
    env = VecEnv(sys, v)
    return rollout(env, lambda s, _env: agent.act(s, deterministic=True)[2], t_test, seed)
