"""Soft actor-critic built on numpy."""
from .agent import SacAgent, actor_forward, actor_loss, critic_loss, soft_target, temperature_loss
from .buffer import ReplayBuffer
from .mlp import Adam, Mlp
from .train import TrainResult, evaluate, train

__all__ = ["Adam", "Mlp", "ReplayBuffer", "SacAgent", "TrainResult", "actor_forward", "actor_loss",
           "critic_loss", "evaluate", "soft_target", "temperature_loss", "train"]
