"""Soft Actor-Critic learner on the market-making MDP.

The original value-network formulation: a tanh-Gaussian actor, twin soft
Q-critics, a state-value network, and a Polyak-averaged target value network.
Targets use the elementwise minimum of the twin critics. The continuous
action in (-1, 1) is discretized to {-1, 0, +1} at thresholds +-1/3 only at
the environment boundary; the critics always consume the continuous action so
the reparameterized policy gradient stays well-defined.

An optional feature trunk (a third MLP whose output replaces the raw state as
input to actor and critics) can be enabled; it is trained by the critic loss
only and is off by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .environment import Observation
from . import nn_core
from .nn_core import (AdamState, Mlp, adam_update, backward, forward, mlp_init,
                      tanh_gaussian_backward, tanh_gaussian_sample)

HIDDEN = 256


@dataclass
class SacHyper:
    gamma: float = 0.99
    tau_polyak: float = 0.005
    entropy_temp: float = 0.2
    lr: float = 3e-4
    batch_size: int = 256
    capacity: int = 1_000_000
    update_interval: int = 1    # one update_step per this many environment steps
    warmup_steps: int = 1000
    hidden: int = HIDDEN
    use_param_net: bool = False

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if not 0.0 < self.tau_polyak <= 1.0:
            raise ValueError("tau_polyak must lie in (0, 1]")
        if self.batch_size < 1 or self.capacity < self.batch_size:
            raise ValueError("capacity must be at least batch_size >= 1")
        if self.update_interval < 1:
            raise ValueError("update_interval must be >= 1")


@dataclass
class Transition:
    state: np.ndarray
    action_cont: float
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Bounded ring buffer over transitions with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int = 2):
        self.capacity = capacity
        self.size = 0
        self.cursor = 0
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, 1))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)

    def push(self, t: Transition) -> None:
        i = self.cursor
        self.states[i] = t.state
        self.actions[i, 0] = t.action_cont
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.dones[i] = float(t.done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.size, size=batch_size)
        return {
            "states": self.states[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_states": self.next_states[idx],
            "dones": self.dones[idx],
        }


def buffer_push(buf: ReplayBuffer, t: Transition) -> ReplayBuffer:
    buf.push(t)
    return buf


@dataclass
class AgentNets:
    actor: Mlp
    q1: Mlp
    q2: Mlp
    value: Mlp
    value_target: Mlp
    trunk: Mlp | None = None
    opt_actor: AdamState = None
    opt_q1: AdamState = None
    opt_q2: AdamState = None
    opt_value: AdamState = None
    opt_trunk: AdamState = None

    @classmethod
    def create(cls, hyper: SacHyper, seed) -> "AgentNets":
        h = hyper.hidden
        ss = seed if isinstance(seed, np.random.SeedSequence) \
            else np.random.SeedSequence(seed)
        actor_ss, q1_ss, q2_ss, value_ss, trunk_ss = ss.spawn(5)
        state_dim = 2
        trunk = None
        if hyper.use_param_net:
            trunk = mlp_init((2, h, h, state_dim), trunk_ss)
        actor = mlp_init((state_dim, h, h, 2), actor_ss)
        q1 = mlp_init((state_dim + 1, h, h, 1), q1_ss)
        q2 = mlp_init((state_dim + 1, h, h, 1), q2_ss)
        value = mlp_init((state_dim, h, h, 1), value_ss)
        nets = cls(actor=actor, q1=q1, q2=q2, value=value,
                   value_target=value.copy(), trunk=trunk)
        for name in ("actor", "q1", "q2", "value", "trunk"):
            net = getattr(nets, name)
            if net is not None:
                setattr(nets, "opt_" + name, AdamState.for_net(net, lr=hyper.lr))
        return nets

    def features(self, states: np.ndarray) -> np.ndarray:
        """State representation fed to actor and critics (trunk output when
        the parameter network is enabled, raw state otherwise)."""
        if self.trunk is None:
            return np.atleast_2d(states)
        out, _ = forward(self.trunk, states)
        return out


def discretize(action_cont: float) -> int:
    """Map the continuous action to {-1, 0, +1}; the boundaries +-1/3 hold."""
    if action_cont > 1.0 / 3.0:
        return 1
    if action_cont < -1.0 / 3.0:
        return -1
    return 0


def act(nets: AgentNets, obs: Observation | np.ndarray, deterministic: bool,
        rng: np.random.Generator | None = None) -> tuple[float, int]:
    s = obs.as_array() if isinstance(obs, Observation) else np.asarray(obs, dtype=float)
    feat = nets.features(s.reshape(1, -1))
    out, _ = forward(nets.actor, feat)
    mu = out[:, :1]
    log_sigma = out[:, 1:]
    if deterministic:
        action = float(np.tanh(mu[0, 0]))
    else:
        noise = rng.standard_normal((1, 1))
        a, _ = tanh_gaussian_sample(mu, log_sigma, noise)
        action = float(a[0, 0])
    return action, discretize(action)


def _sample_policy(nets: AgentNets, feats: np.ndarray,
                   rng: np.random.Generator):
    """Fresh tanh-Gaussian actions for a batch of feature vectors."""
    out, cache = forward(nets.actor, feats)
    mu, log_sigma = out[:, :1], out[:, 1:]
    noise = rng.standard_normal(mu.shape)
    actions, log_probs = tanh_gaussian_sample(mu, log_sigma, noise)
    return actions, log_probs, mu, log_sigma, noise, cache


def critic_update(nets: AgentNets, batch: dict, gamma: float) -> tuple[float, float]:
    """Soft Bellman residual step on both critics (and the trunk, if any).

    Target: Q_hat = r + gamma * (1 - done) * V_target(s'), no gradient.
    """
    B = batch["states"].shape[0]
    if B == 0:
        raise ValueError("empty batch")
    v_next, _ = forward(nets.value_target, batch["next_states"])
    q_hat = batch["rewards"] + gamma * (1.0 - batch["dones"]) * v_next[:, 0]
    q_hat = q_hat[:, None]

    if nets.trunk is None:
        feats = batch["states"]
        trunk_cache = None
    else:
        feats, trunk_cache = forward(nets.trunk, batch["states"])
    sa = np.concatenate([feats, batch["actions"]], axis=1)

    losses = []
    trunk_grad = None
    for net, opt in ((nets.q1, nets.opt_q1), (nets.q2, nets.opt_q2)):
        q, cache = forward(net, sa)
        resid = q - q_hat
        losses.append(float(0.5 * np.mean(resid ** 2)))
        (w_g, b_g), in_grad = backward(net, cache, resid / B)
        adam_update(opt, net, w_g, b_g)
        if trunk_cache is not None:
            g = in_grad[:, :feats.shape[1]]
            trunk_grad = g if trunk_grad is None else trunk_grad + g
    if trunk_cache is not None:
        (w_g, b_g), _ = backward(nets.trunk, trunk_cache, trunk_grad)
        adam_update(nets.opt_trunk, nets.trunk, w_g, b_g)
    return losses[0], losses[1]


def _min_q(nets: AgentNets, feats: np.ndarray, actions: np.ndarray) -> np.ndarray:
    sa = np.concatenate([feats, actions], axis=1)
    q1, _ = forward(nets.q1, sa)
    q2, _ = forward(nets.q2, sa)
    return np.minimum(q1, q2)


def value_update(nets: AgentNets, batch: dict, entropy_temp: float,
                 rng: np.random.Generator) -> float:
    """Regress V(s) onto min Q(s, a~) - temp * log pi(a~|s) with fresh samples."""
    B = batch["states"].shape[0]
    if B == 0:
        raise ValueError("empty batch")
    feats = nets.features(batch["states"])
    actions, log_probs, *_ = _sample_policy(nets, feats, rng)
    target = _min_q(nets, feats, actions)[:, 0] - entropy_temp * log_probs
    v, cache = forward(nets.value, batch["states"])
    resid = v - target[:, None]
    loss = float(0.5 * np.mean(resid ** 2))
    (w_g, b_g), _ = backward(nets.value, cache, resid / B)
    adam_update(nets.opt_value, nets.value, w_g, b_g)
    return loss


def policy_update(nets: AgentNets, batch: dict, entropy_temp: float,
                  rng: np.random.Generator) -> tuple[float, float]:
    """Reparameterized policy step.

    loss = mean[ temp * log pi(a|s) - min Q(s, a) ], a = tanh(mu + sigma eps).
    The Q gradient flows through the action input of the per-sample minimum
    critic back into the actor head. Returns (loss, mean entropy).
    """
    B = batch["states"].shape[0]
    if B == 0:
        raise ValueError("empty batch")
    feats = nets.features(batch["states"])
    actions, log_probs, mu, log_sigma, noise, actor_cache = \
        _sample_policy(nets, feats, rng)

    sa = np.concatenate([feats, actions], axis=1)
    q1, c1 = forward(nets.q1, sa)
    q2, c2 = forward(nets.q2, sa)
    loss = float(np.mean(entropy_temp * log_probs - np.minimum(q1, q2)[:, 0]))

    # dL/da through the minimum critic only; critics are not updated here.
    in1 = nn_core.backward_input_only(nets.q1, c1, -np.ones_like(q1) / B)
    in2 = nn_core.backward_input_only(nets.q2, c2, -np.ones_like(q2) / B)
    use1 = (q1 <= q2).astype(float)
    d_action = use1 * in1[:, -1:] + (1.0 - use1) * in2[:, -1:]
    d_log_prob = np.full(B, entropy_temp / B)

    d_mu, d_log_sigma = tanh_gaussian_backward(mu, log_sigma, noise,
                                               d_action, d_log_prob)
    out_grad = np.concatenate([d_mu, d_log_sigma], axis=1)
    (w_g, b_g), _ = backward(nets.actor, actor_cache, out_grad)
    adam_update(nets.opt_actor, nets.actor, w_g, b_g)
    return loss, float(np.mean(-log_probs))


def soft_update_target(nets: AgentNets, tau_polyak: float) -> None:
    """Polyak average: target <- (1 - tau) target + tau online."""
    if not 0.0 < tau_polyak <= 1.0:
        raise ValueError("tau_polyak must lie in (0, 1]")
    for t, o in zip(nets.value_target.weights + nets.value_target.biases,
                    nets.value.weights + nets.value.biases):
        t *= 1.0 - tau_polyak
        t += tau_polyak * o


def update_step(nets: AgentNets, buffer: ReplayBuffer, hyper: SacHyper,
                rng: np.random.Generator) -> dict:
    """One full SAC update: critics, value, policy, then the target EWMA.

    Skips (returning {"skipped": True}) until the buffer holds both a full
    batch and the warmup quota.
    """
    if buffer.size < max(hyper.batch_size, hyper.warmup_steps):
        return {"skipped": True, "buffer_size": buffer.size}
    batch = buffer.sample(hyper.batch_size, rng)
    loss_q1, loss_q2 = critic_update(nets, batch, hyper.gamma)
    loss_v = value_update(nets, batch, hyper.entropy_temp, rng)
    loss_pi, entropy = policy_update(nets, batch, hyper.entropy_temp, rng)
    soft_update_target(nets, hyper.tau_polyak)
    diag = {
        "skipped": False,
        "loss_q1": loss_q1,
        "loss_q2": loss_q2,
        "loss_v": loss_v,
        "loss_pi": loss_pi,
        "entropy": entropy,
        "buffer_size": buffer.size,
    }
    for k in ("loss_q1", "loss_q2", "loss_v", "loss_pi", "entropy"):
        if not np.isfinite(diag[k]):
            raise FloatingPointError(f"non-finite {k} = {diag[k]} in SAC update")
    return diag


# Checkpoint roles in declaration order; the trunk record is present only
# when the parameter network is enabled.
NET_ROLES = ("actor", "q1", "q2", "value", "value_target", "trunk")


def dump_nets(nets: AgentNets) -> str:
    parts = []
    for role in NET_ROLES:
        net = getattr(nets, role)
        if net is not None:
            parts.append(nn_core.dump_net(net, role))
    return "".join(parts)
