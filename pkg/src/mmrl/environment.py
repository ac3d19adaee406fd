"""Episodic market-making MDP.

State: z-scored midprice and min-max-normalized inventory. Action: a scalar
code in {-1, 0, +1} (post ask / hold / post bid), masked by the inventory
bound. Reward: per-step wealth change minus a running inventory penalty, so
the episode sum telescopes to W_T - W_0 - alpha * sum |Q_t| dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .execution import (ArrivalConfig, FillOutcome, LedgerState, PostingDecision,
                        adverse_fill_indicators, apply_fills, combine_fills,
                        derive_quotes, nonadverse_fill_indicators,
                        sample_market_orders, wealth)
from .price_dynamics import DiffusionParams, n_steps

EPS_STD = 1e-8


@dataclass
class EpisodeConfig:
    dt: float = 0.001
    T: float = 1.0
    P0: float = 50.0
    q_max: int = 5
    delta: float = 0.01
    alpha_inv: float = 0.001
    p_fill: float = 0.2
    adverse_enabled: bool = True
    arrivals: ArrivalConfig = field(default_factory=ArrivalConfig)
    params: DiffusionParams = field(
        default_factory=lambda: DiffusionParams(0.0, 0.1, 0.1, 0.1))

    def validate(self) -> None:
        if self.q_max < 1:
            raise ValueError("maximum inventory q must be at least 1")
        if self.alpha_inv < 0:
            raise ValueError("inventory penalty must be nonnegative")
        if not 0.0 <= self.p_fill <= 1.0:
            raise ValueError(f"fill probability {self.p_fill} outside [0, 1]")
        if self.delta <= 0:
            raise ValueError("spread must be positive")
        n_steps(self.dt, self.T)  # raises on a bad grid

    @property
    def episode_steps(self) -> int:
        return n_steps(self.dt, self.T)


@dataclass(frozen=True)
class Observation:
    price_z: float
    inv_n: float

    def as_array(self) -> np.ndarray:
        return np.array([self.price_z, self.inv_n])


@dataclass
class StepResult:
    observation: Observation
    reward: float
    done: bool
    info: dict


class Normalizer:
    """Welford running mean/variance of raw prices; freezable for testing."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self._m2 = 0.0
        self.frozen = False

    def update(self, x: float) -> None:
        if self.frozen:
            return
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (x - self.mean)

    @property
    def std(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self._m2 / self.count)

    def zscore(self, x: float) -> float:
        if self.count < 2:
            return x - self.mean  # unit-scale fallback until 2 samples
        return (x - self.mean) / max(self.std, EPS_STD)

    def state(self) -> tuple[int, float, float, bool]:
        return (self.count, self.mean, self._m2, self.frozen)

    @classmethod
    def from_state(cls, state) -> "Normalizer":
        n = cls()
        n.count, n.mean, n._m2, n.frozen = int(state[0]), float(state[1]), \
            float(state[2]), bool(state[3])
        return n


def allowed_actions(Q: int, q: int) -> set[int]:
    """Inventory-masked action set: no buys at +q cap, no sells at -q cap."""
    if abs(Q) > q:
        raise ValueError(f"inventory {Q} outside bound {q}")
    if Q == -q:
        return {0, 1}
    if Q == q:
        return {-1, 0}
    return {-1, 0, 1}


def step_reward(W_prev: float, W_next: float, Q_next: int, alpha_inv: float,
                dt: float) -> float:
    return (W_next - W_prev) - alpha_inv * abs(Q_next) * dt


def normalize_observation(P: float, Q: int, normalizer: Normalizer,
                          q: int) -> Observation:
    """Read-only normalization; callers update the normalizer beforehand
    when in training mode."""
    return Observation(price_z=normalizer.zscore(P), inv_n=Q / q)


class MarketMakingEnv:
    """Single-threaded episodic environment.

    Three independent RNG streams are spawned from the episode seed, in
    order: price noise, market-order arrivals, fill thinning. Flipping the
    adverse toggle therefore never changes the price path for a given seed.
    """

    def __init__(self, config: EpisodeConfig, normalizer: Normalizer | None = None):
        config.validate()
        self.config = config
        self.normalizer = normalizer if normalizer is not None else Normalizer()
        self._started = False

    def reset(self, seed) -> Observation:
        cfg = self.config
        ss = seed if isinstance(seed, np.random.SeedSequence) \
            else np.random.SeedSequence(seed)
        price_ss, arrival_ss, fill_ss = ss.spawn(3)
        self._price_rng = np.random.default_rng(price_ss)
        self._arrival_rng = np.random.default_rng(arrival_ss)
        self._fill_rng = np.random.default_rng(fill_ss)
        self.P = cfg.P0
        self.ledger = LedgerState()
        self.step_count = 0
        self.n_total = cfg.episode_steps
        self._vol_sqrt_dt = cfg.params.total_vol * math.sqrt(cfg.dt)
        self._started = True
        self.normalizer.update(self.P)
        return normalize_observation(self.P, 0, self.normalizer, cfg.q_max)

    def step(self, action: int) -> StepResult:
        if not self._started:
            raise RuntimeError("step() before reset()")
        if self.step_count >= self.n_total:
            raise RuntimeError("episode is done; call reset()")
        cfg = self.config
        Q = self.ledger.inventory

        effective = action
        masked = False
        if action not in allowed_actions(Q, cfg.q_max):
            effective = 0
            masked = True
        posting = PostingDecision(post_ask=int(effective == -1),
                                  post_bid=int(effective == 1))

        P_t = self.P
        quote_t = derive_quotes(P_t, cfg.delta)
        W_prev = wealth(self.ledger, P_t)

        # Price advances one Euler step on its own stream.
        z = self._price_rng.standard_normal()
        P_t1 = P_t + cfg.params.eta * cfg.dt + self._vol_sqrt_dt * z
        quote_t1 = derive_quotes(P_t1, cfg.delta)

        arrivals = sample_market_orders(cfg.arrivals, self._arrival_rng)
        if cfg.adverse_enabled:
            adverse = adverse_fill_indicators(posting, quote_t, quote_t1)
        else:
            adverse = (0, 0)
        nonadverse = nonadverse_fill_indicators(posting, arrivals, cfg.p_fill,
                                                self._fill_rng)
        fills = combine_fills(adverse, nonadverse)
        self.ledger = apply_fills(self.ledger, fills, P_t, cfg.delta)

        self.P = P_t1
        self.step_count += 1
        W_next = wealth(self.ledger, self.P)
        reward = step_reward(W_prev, W_next, self.ledger.inventory,
                             cfg.alpha_inv, cfg.dt)
        done = self.step_count >= self.n_total

        self.normalizer.update(self.P)
        obs = normalize_observation(self.P, self.ledger.inventory,
                                    self.normalizer, cfg.q_max)
        info = {
            "step": self.step_count,
            "P": self.P,
            "bid": quote_t1.bid,
            "ask": quote_t1.ask,
            "action": action,
            "effective_action": effective,
            "masked": masked,
            "fills": fills,
            "Q": self.ledger.inventory,
            "C": self.ledger.cash,
            "W": W_next,
            "reward": reward,
        }
        return StepResult(observation=obs, reward=reward, done=done, info=info)
