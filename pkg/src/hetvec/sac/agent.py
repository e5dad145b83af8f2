"""Soft actor-critic with twin critics, Polyak targets and a learned temperature.

The actor outputs a diagonal Gaussian over ``4N+1`` logits.  Samples are
projected onto the allocation simplex by group softmax; log-probabilities
are those of the raw Gaussian sample.  Critics see the normalised state and
the projected action including the CPU slack share.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..objective import AllocationDecision, action_dim, softmax
from .mlp import Adam, Mlp

CHECKPOINT_VERSION = 1
LOG_2PI = float(np.log(2.0 * np.pi))


# --------------------------------------------------------------- projection

def critic_action(raw: np.ndarray, n: int) -> np.ndarray:
    """Projected action fed to the critics: ``N+1`` CPU shares then ``3N`` splits."""
    lead = raw.shape[:-1]
    a = softmax(raw[..., : n + 1])
    f = softmax(raw[..., n + 1 :].reshape(lead + (n, 3))).reshape(lead + (3 * n,))
    return np.concatenate([a, f], axis=-1)


def critic_action_vjp(proj: np.ndarray, grad: np.ndarray, n: int) -> np.ndarray:
    """Pull ``d loss / d proj`` back to the raw logits through the group softmaxes."""
    lead = proj.shape[:-1]
    ya, ga = proj[..., : n + 1], grad[..., : n + 1]
    da = ya * (ga - np.sum(ya * ga, axis=-1, keepdims=True))
    yf = proj[..., n + 1 :].reshape(lead + (n, 3))
    gf = grad[..., n + 1 :].reshape(lead + (n, 3))
    df = yf * (gf - np.sum(yf * gf, axis=-1, keepdims=True))
    return np.concatenate([da, df.reshape(lead + (3 * n,))], axis=-1)


def decision_from_proj(proj: np.ndarray, n: int) -> AllocationDecision:
    lead = proj.shape[:-1]
    return AllocationDecision(proj[..., :n].copy(), proj[..., n + 1 :].reshape(lead + (n, 3)).copy())


# ------------------------------------------------------------ state scaling

class RunningNorm:
    """Per-dimension running mean/variance (Chan et al. parallel update)."""

    def __init__(self, dim: int, clip: float = 10.0):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = 0.0
        self.clip = clip
        self.frozen = False

    def update(self, x: np.ndarray) -> None:
        if self.frozen:
            return
        x = np.atleast_2d(x)
        n = x.shape[0]
        bm, bv = x.mean(axis=0), x.var(axis=0)
        tot = self.count + n
        delta = bm - self.mean
        self.mean = self.mean + delta * n / tot
        m2 = self.var * self.count + bv * n + delta**2 * self.count * n / tot
        self.var = m2 / tot
        self.count = tot

    def __call__(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.mean) / np.sqrt(self.var + 1e-8)
        return np.clip(z, -self.clip, self.clip)


# --------------------------------------------------------------- the losses

def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class PolicySample:
    mu: np.ndarray
    log_std: np.ndarray
    std: np.ndarray
    noise: np.ndarray
    raw: np.ndarray
    logp: np.ndarray
    proj: np.ndarray
    log_std_slope: np.ndarray
    cache: list = field(repr=False, default=None)


def actor_forward(actor: Mlp, s: np.ndarray, noise: np.ndarray, n: int,
                  log_std_min: float = -20.0, log_std_max: float = 2.0) -> PolicySample:
    """Reparameterised sample ``raw = mu + std * noise`` for normalised states ``s``."""
    out, cache = actor.forward(s)
    if not np.all(np.isfinite(out)):
        bad = int(np.sum(~np.isfinite(out)))
        raise FloatingPointError(f"non-finite actor output: {bad} of {out.size} entries")
    d = action_dim(n)
    mu, ls_raw = out[..., :d], out[..., d:]
    # Smooth two-sided clamp: lo + softplus(x - lo) - softplus(x - hi) lies
    # strictly inside (lo, hi), is close to x in the middle and keeps a
    # nonzero slope everywhere, so a saturated dimension can still recover.
    log_std = log_std_min + _softplus(ls_raw - log_std_min) - _softplus(ls_raw - log_std_max)
    log_std = np.clip(log_std, log_std_min, log_std_max)  # rounding guard only
    mask = _sigmoid(ls_raw - log_std_min) - _sigmoid(ls_raw - log_std_max)
    std = np.exp(log_std)
    raw = mu + std * noise
    logp = np.sum(-0.5 * noise**2 - log_std - 0.5 * LOG_2PI, axis=-1)
    return PolicySample(mu, log_std, std, noise, raw, logp, critic_action(raw, n), mask, cache)


def _critic_forward(critic: Mlp, s, proj):
    return critic.forward(np.concatenate([s, proj], axis=-1))


def critic_loss(critic: Mlp, s, proj, target):
    """``mean(0.5 (Q(s, a) - y)^2)`` and its parameter gradients."""
    q, cache = _critic_forward(critic, s, proj)
    err = q[:, 0] - target
    loss = 0.5 * float(np.mean(err**2))
    grads = critic.backward(cache, (err / len(err))[:, None])
    return loss, grads


def actor_loss(actor: Mlp, critics: tuple[Mlp, Mlp], s, noise, beta: float, n: int,
               log_std_min: float = -20.0, log_std_max: float = 2.0, sample: PolicySample | None = None):
    """``mean(beta * log pi - min(Q1, Q2))`` through the reparameterised sample.

    ``sample`` may carry a forward pass already made with the same ``noise``.
    """
    ps = sample if sample is not None else actor_forward(actor, s, noise, n, log_std_min, log_std_max)
    b = s.shape[0]
    q1, c1 = _critic_forward(critics[0], s, ps.proj)
    q2, c2 = _critic_forward(critics[1], s, ps.proj)
    use1 = (q1[:, 0] <= q2[:, 0])[:, None]
    qmin = np.where(use1, q1, q2)[:, 0]
    loss = float(np.mean(beta * ps.logp - qmin))
    # d loss / d Q_min = -1/B, routed to the critic attaining the minimum.
    gin1 = critics[0].backward(c1, np.where(use1, -1.0 / b, 0.0), True, need_param_grads=False)
    gin2 = critics[1].backward(c2, np.where(use1, 0.0, -1.0 / b), True, need_param_grads=False)
    sd = s.shape[-1]
    g_proj = gin1[:, sd:] + gin2[:, sd:]
    g_raw = critic_action_vjp(ps.proj, g_proj, n)
    g_mu = g_raw
    g_log_std = (g_raw * ps.std * ps.noise - beta / b) * ps.log_std_slope
    grads = actor.backward(ps.cache, np.concatenate([g_mu, g_log_std], axis=-1))
    return loss, grads, ps


def temperature_loss(log_beta: float, logp: np.ndarray, target_entropy: float):
    """``-beta * mean(log pi + H)`` with ``beta = exp(log_beta)``; gradient w.r.t. ``log_beta``."""
    beta = float(np.exp(log_beta))
    loss = -beta * float(np.mean(logp + target_entropy))
    return loss, loss


def soft_target(actor: Mlp, targets: tuple[Mlp, Mlp], s_next, reward, noise, beta: float,
                gamma: float, n: int, log_std_min: float = -20.0, log_std_max: float = 2.0):
    ps = actor_forward(actor, s_next, noise, n, log_std_min, log_std_max)
    q1 = _critic_forward(targets[0], s_next, ps.proj)[0][:, 0]
    q2 = _critic_forward(targets[1], s_next, ps.proj)[0][:, 0]
    return reward + gamma * (np.minimum(q1, q2) - beta * ps.logp)


# -------------------------------------------------------------------- agent

class SacAgent:
    def __init__(self, state_dim: int, n_types: int, cfg, seed: int = 0):
        self.cfg = cfg
        self.n = n_types
        self.state_dim = state_dim
        self.act_dim = action_dim(n_types)
        self.target_entropy = cfg.entropy_target_sign * self.act_dim
        ss = np.random.SeedSequence(seed)
        init_ss, act_ss, upd_ss = ss.spawn(3)
        init_rng = np.random.default_rng(init_ss)
        self.act_rng = np.random.default_rng(act_ss)
        self.update_rng = np.random.default_rng(upd_ss)
        hidden = list(cfg.hidden)
        self.dtype = np.dtype(getattr(cfg, "precision", "float64"))
        self.actor = Mlp([state_dim] + hidden + [2 * self.act_dim], init_rng, self.dtype)
        cin = state_dim + self.act_dim
        self.critics = (Mlp([cin] + hidden + [1], init_rng, self.dtype),
                        Mlp([cin] + hidden + [1], init_rng, self.dtype))
        self.targets = (self.critics[0].clone(), self.critics[1].clone())
        self.log_beta = np.array([cfg.init_log_temperature], dtype=float)
        adam = dict(beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps)
        self.actor_opt = Adam(self.actor.params, cfg.lr_actor, **adam)
        self.critic_opts = tuple(Adam(c.params, cfg.lr_critic, **adam) for c in self.critics)
        self.beta_opt = Adam([self.log_beta], cfg.lr_temperature, **adam)
        self.norm = RunningNorm(state_dim)
        self.updates = 0
        self.critic_calls = 0

    @property
    def beta(self) -> float:
        return float(np.exp(self.log_beta[0]))

    def _bounds(self):
        return self.cfg.log_std_min, self.cfg.log_std_max

    def act(self, state: np.ndarray, deterministic: bool = False):
        """Return ``(raw, proj, decision)`` for a single unnormalised state."""
        s = self.norm(np.asarray(state, dtype=float))[None, :].astype(self.dtype)
        noise = np.zeros((1, self.act_dim), self.dtype)
        if not deterministic:
            noise[...] = self.act_rng.standard_normal((1, self.act_dim))
        ps = actor_forward(self.actor, s, noise, self.n, *self._bounds())
        raw = (ps.mu[0] if deterministic else ps.raw[0]).astype(np.float64)
        # Project in double precision so the simplex constraints hold to 1e-12.
        proj = critic_action(raw, self.n)
        return raw, proj, decision_from_proj(proj, self.n)

    def update(self, batch: dict[str, np.ndarray]) -> dict[str, float]:
        """One iteration: temperature, actor, both critics, then targets every ``r_t``."""
        cfg = self.cfg
        dt = self.dtype
        s = self.norm(batch["state"]).astype(dt)
        s2 = self.norm(batch["next_state"]).astype(dt)
        proj, rew = batch["proj"].astype(dt), batch["reward"].astype(dt)
        b = s.shape[0]
        lo, hi = self._bounds()

        noise = self.update_rng.standard_normal((b, self.act_dim)).astype(dt)
        ps = actor_forward(self.actor, s, noise, self.n, lo, hi)
        t_loss, t_grad = temperature_loss(self.log_beta[0], ps.logp, self.target_entropy)
        self.beta_opt.step([np.array([t_grad])])

        a_loss, a_grads, _ = actor_loss(self.actor, self.critics, s, noise, self.beta, self.n, lo, hi,
                                        sample=ps)
        self.actor_opt.step(a_grads)

        noise2 = self.update_rng.standard_normal((b, self.act_dim)).astype(dt)
        y = soft_target(self.actor, self.targets, s2, rew, noise2, self.beta, cfg.gamma, self.n, lo, hi)
        c_losses = []
        for critic, opt in zip(self.critics, self.critic_opts):
            loss, grads = critic_loss(critic, s, proj, y)
            opt.step(grads)
            c_losses.append(loss)
        self.critic_calls += 1
        self.updates += 1
        if self.updates % cfg.r_t == 0:
            self.target_sync(cfg.tau1, cfg.tau2)
        return {"temperature_loss": t_loss, "actor_loss": a_loss, "critic1_loss": c_losses[0],
                "critic2_loss": c_losses[1], "beta": self.beta}

    def target_sync(self, tau1: float, tau2: float) -> None:
        self.targets[0].polyak(self.critics[0], tau1)
        self.targets[1].polyak(self.critics[1], tau2)

    # ----------------------------------------------------------- checkpoint

    def _named_arrays(self) -> dict[str, np.ndarray]:
        out = {"log_beta": self.log_beta, "norm_mean": self.norm.mean, "norm_var": self.norm.var}
        nets = {"actor": self.actor, "critic1": self.critics[0], "critic2": self.critics[1],
                "target1": self.targets[0], "target2": self.targets[1]}
        for name, net in nets.items():
            for k, p in enumerate(net.params):
                out[f"{name}.{k}"] = p
        opts = {"actor": self.actor_opt, "critic1": self.critic_opts[0], "critic2": self.critic_opts[1],
                "beta": self.beta_opt}
        for name, opt in opts.items():
            for k, (m, v) in enumerate(zip(opt.m, opt.v)):
                out[f"adam.{name}.m{k}"] = m
                out[f"adam.{name}.v{k}"] = v
        return out

    def save(self, path: str | Path) -> None:
        """Write ``<path>.npz`` (arrays) and ``<path>.json`` (metadata and RNG states)."""
        path = Path(path)
        meta = {
            "version": CHECKPOINT_VERSION,
            "state_dim": self.state_dim,
            "n_types": self.n,
            "sizes": {"actor": self.actor.sizes, "critic": self.critics[0].sizes},
            "updates": self.updates,
            "critic_calls": self.critic_calls,
            "norm_count": self.norm.count,
            "adam_t": {"actor": self.actor_opt.t, "critic1": self.critic_opts[0].t,
                       "critic2": self.critic_opts[1].t, "beta": self.beta_opt.t},
            "rng": {"act": self.act_rng.bit_generator.state, "update": self.update_rng.bit_generator.state},
        }
        with open(path.with_suffix(".npz"), "wb") as fh:
            np.savez(fh, **self._named_arrays())
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, cfg) -> "SacAgent":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
        agent = cls(meta["state_dim"], meta["n_types"], cfg, seed=0)
        if agent.actor.sizes != meta["sizes"]["actor"] or agent.critics[0].sizes != meta["sizes"]["critic"]:
            raise ValueError(f"checkpoint layer sizes {meta['sizes']} do not match the configuration")
        with np.load(path.with_suffix(".npz")) as data:
            for name, arr in agent._named_arrays().items():
                arr[...] = data[name]
        agent.norm.count = meta["norm_count"]
        agent.updates = meta["updates"]
        agent.critic_calls = meta["critic_calls"]
        agent.actor_opt.t = meta["adam_t"]["actor"]
        agent.critic_opts[0].t = meta["adam_t"]["critic1"]
        agent.critic_opts[1].t = meta["adam_t"]["critic2"]
        agent.beta_opt.t = meta["adam_t"]["beta"]
        agent.act_rng.bit_generator.state = meta["rng"]["act"]
        agent.update_rng.bit_generator.state = meta["rng"]["update"]
        return agent
