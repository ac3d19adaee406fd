"""Diffusion-approximation coefficients and midprice path simulation.

Two routes produce the same coefficient bundle: the semi-Markov chain route
(continuation probabilities, holding times, inter-arrival distributions) and
the Hawkes route (background intensity, branching ratio, ergodic tables).
Either way the midprice follows

    dP = eta dt + sqrt(sigma^2 + sigma_bar^2 + varsigma^2) dW,

which is simulated with Euler-Maruyama on a uniform grid (exact for constant
coefficients).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DIST_SUM_TOL = 1e-9


def _check_distribution(name: str, dist: dict) -> None:
    if not dist:
        raise ValueError(f"{name}: empty support")
    total = 0.0
    for k, w in dist.items():
        if w < 0:
            raise ValueError(f"{name}: negative mass {w} at {k}")
        total += w
    if abs(total - 1.0) > DIST_SUM_TOL:
        raise ValueError(f"{name}: masses sum to {total}, expected 1")


@dataclass
class SemiMarkovInputs:
    """Raw inputs of the semi-Markov diffusion approximation.

    ``m`` maps the two chain states (-delta, +delta) to mean holding times.
    ``alpha_b``/``alpha_a`` are discrete distributions over positive integers,
    ``f``/``f_tilde`` joint distributions over integer pairs (k, p) after a
    price increase / decrease. ``pi_factor`` is the undefined scalar in the
    jump-variance formula; it defaults to 1 and is simply passed through.
    ``tau`` may be omitted, in which case it is computed from the
    distributions via :func:`compute_tau`.
    """

    p_cont: float
    p_cont_prime: float
    delta: float
    m: dict[float, float]
    sigma: float
    pi_factor: float = 1.0
    tau: float | None = None
    alpha_b: dict[int, float] = field(default_factory=dict)
    alpha_a: dict[int, float] = field(default_factory=dict)
    f: dict[tuple[int, int], float] = field(default_factory=dict)
    f_tilde: dict[tuple[int, int], float] = field(default_factory=dict)

    def validate(self) -> None:
        if not (0.0 < self.p_cont < 1.0 and 0.0 < self.p_cont_prime < 1.0):
            raise ValueError("continuation probabilities must lie in (0, 1)")
        if self.delta <= 0:
            raise ValueError("tick size delta must be positive")
        for state in (-self.delta, self.delta):
            if self.m.get(state, 0.0) <= 0:
                raise ValueError(f"holding time m({state}) must be positive")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive when supplied")
        if self.tau is None:
            _check_distribution("alpha_b", self.alpha_b)
            _check_distribution("alpha_a", self.alpha_a)
            _check_distribution("f", self.f)
            _check_distribution("f_tilde", self.f_tilde)


@dataclass
class HawkesInputs:
    """Raw inputs of the Hawkes diffusion approximation.

    ``a_star`` and ``sigma_hat`` may be given directly, or as ergodic tables
    [(pi_i, value_i), ...] that :func:`hawkes_a_star` / :func:`hawkes_sigma_hat`
    aggregate (the table entries for sigma_hat are per-state variances v(i)).
    """

    lam: float
    mu_hat: float
    sigma: float
    a_star: float | None = None
    sigma_hat: float | None = None
    a_table: list[tuple[float, float]] | None = None
    v_table: list[tuple[float, float]] | None = None

    def validate(self) -> None:
        if self.lam <= 0:
            raise ValueError("background intensity lambda must be positive")
        if not (0.0 <= self.mu_hat < 1.0):
            raise ValueError(f"branching ratio {self.mu_hat} violates stationarity "
                             "(must lie in [0, 1))")
        if self.a_star is None and not self.a_table:
            raise ValueError("either a_star or its ergodic table is required")
        if self.sigma_hat is None and not self.v_table:
            raise ValueError("either sigma_hat or its variance table is required")


@dataclass(frozen=True)
class DiffusionParams:
    """Coefficient bundle (eta, sigma, sigma_bar, varsigma) of the midprice SDE."""

    eta: float
    sigma: float
    sigma_bar: float
    varsigma: float

    def __post_init__(self):
        for name in ("sigma", "sigma_bar", "varsigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    @property
    def total_vol(self) -> float:
        return math.sqrt(self.sigma ** 2 + self.sigma_bar ** 2 + self.varsigma ** 2)


@dataclass
class PricePath:
    times: np.ndarray
    prices: np.ndarray
    seed: object


# ---------------------------------------------------------------------------
# Semi-Markov route
# ---------------------------------------------------------------------------

def semi_markov_pi_star(p_cont: float, p_cont_prime: float) -> float:
    """Long-run probability of the up state: (p' - 1) / (p + p' - 2)."""
    denom = p_cont + p_cont_prime - 2.0
    if denom == 0.0:
        raise ValueError("degenerate chain: p_cont + p_cont_prime = 2")
    return (p_cont_prime - 1.0) / denom


def semi_markov_sigma_star(p_cont: float, p_cont_prime: float, delta: float) -> float:
    """Chain volatility constant sigma* of the jump-part approximation."""
    if delta < 0:
        raise ValueError("tick size delta must be nonnegative")
    pi_star = semi_markov_pi_star(p_cont, p_cont_prime)
    denom = (p_cont + p_cont_prime - 2.0) ** 2
    radicand = 4.0 * delta ** 2 * (
        (1.0 - p_cont_prime + pi_star * (p_cont_prime - p_cont)) / denom)
    if radicand < 0:
        raise ValueError(
            f"negative radicand {radicand} for p_cont={p_cont}, "
            f"p_cont_prime={p_cont_prime}, delta={delta}")
    return math.sqrt(radicand)


def compute_tau(alpha_b: dict[int, float], alpha_a: dict[int, float],
                f: dict[tuple[int, int], float],
                f_tilde: dict[tuple[int, int], float],
                pi_star: float) -> float:
    """Mean jump inter-arrival time.

    tau = sum_k sum_p alpha_b(k) alpha_a(p) f*(k, p), with the mixture
    f* = pi* f + (1 - pi*) f~. The double sum is truncated at the supplied
    finite supports, so heavy-tailed inputs must be pre-truncated.
    """
    _check_distribution("alpha_b", alpha_b)
    _check_distribution("alpha_a", alpha_a)
    _check_distribution("f", f)
    _check_distribution("f_tilde", f_tilde)
    tau = 0.0
    for k, wb in alpha_b.items():
        for p, wa in alpha_a.items():
            f_star = pi_star * f.get((k, p), 0.0) + (1.0 - pi_star) * f_tilde.get((k, p), 0.0)
            tau += wb * wa * f_star
    return tau


def semi_markov_m_tau(pi_star: float, m: dict[float, float], delta: float) -> float:
    """Ergodic mean holding time: pi* m(+delta) + (1 - pi*) m(-delta)."""
    m_up = m[delta]
    m_down = m[-delta]
    if m_up <= 0 or m_down <= 0:
        raise ValueError("holding times must be positive")
    return pi_star * m_up + (1.0 - pi_star) * m_down


def semi_markov_params(inputs: SemiMarkovInputs) -> DiffusionParams:
    """Assemble (eta, sigma, sigma_bar, varsigma) from semi-Markov inputs."""
    inputs.validate()
    pi_star = semi_markov_pi_star(inputs.p_cont, inputs.p_cont_prime)
    sigma_star = semi_markov_sigma_star(inputs.p_cont, inputs.p_cont_prime, inputs.delta)
    m_tau = semi_markov_m_tau(pi_star, inputs.m, inputs.delta)
    tau = inputs.tau
    if tau is None:
        tau = compute_tau(inputs.alpha_b, inputs.alpha_a, inputs.f,
                          inputs.f_tilde, pi_star)
    if tau <= 0:
        raise ValueError(f"nonpositive tau {tau}")
    s_star = inputs.delta * (2.0 * pi_star - 1.0)
    eta = s_star / m_tau
    sigma_bar = math.sqrt(sigma_star ** 2 / m_tau
                          + inputs.pi_factor * inputs.sigma ** 2 / m_tau)
    varsigma = sigma_star / math.sqrt(tau)
    return DiffusionParams(eta=eta, sigma=inputs.sigma, sigma_bar=sigma_bar,
                           varsigma=varsigma)


# ---------------------------------------------------------------------------
# Hawkes route
# ---------------------------------------------------------------------------

def _check_ergodic_weights(table) -> None:
    total = sum(w for w, _ in table)
    if abs(total - 1.0) > DIST_SUM_TOL:
        raise ValueError(f"ergodic probabilities sum to {total}, expected 1")
    if any(w < 0 for w, _ in table):
        raise ValueError("ergodic probabilities must be nonnegative")


def hawkes_a_star(table: list[tuple[float, float]]) -> float:
    """Ergodic average drift constant: sum_i pi*_i a(i)."""
    _check_ergodic_weights(table)
    return sum(w * a for w, a in table)


def hawkes_sigma_hat(table: list[tuple[float, float]]) -> float:
    """Ergodic volatility: sqrt(sum_i pi*_i v(i)) over per-state variances v(i)."""
    _check_ergodic_weights(table)
    if any(v < 0 for _, v in table):
        raise ValueError("per-state variances v(i) must be nonnegative")
    return math.sqrt(sum(w * v for w, v in table))


def hawkes_params(inputs: HawkesInputs,
                  sigma_bar_literal: bool = False) -> DiffusionParams:
    """Assemble (eta, sigma, sigma_bar, varsigma) from Hawkes inputs.

    The stationary intensity ratio r = lambda / (1 - mu_hat) drives every
    coefficient: eta = a* r, sigma* = sigma_hat sqrt(r), varsigma = sigma* sqrt(r).

    sigma_bar sums variances, so the drift summand is squared by default:
    sigma_bar = sqrt(sigma*^2 + (a* sqrt(r))^2). ``sigma_bar_literal=True``
    leaves that summand unsquared, i.e. sqrt(sigma*^2 + a* sqrt(r)), which is
    dimensionally odd but provided for comparison.
    """
    inputs.validate()
    a_star = inputs.a_star if inputs.a_star is not None else hawkes_a_star(inputs.a_table)
    sigma_hat = (inputs.sigma_hat if inputs.sigma_hat is not None
                 else hawkes_sigma_hat(inputs.v_table))
    ratio = inputs.lam / (1.0 - inputs.mu_hat)
    eta = a_star * ratio
    sigma_star = sigma_hat * math.sqrt(ratio)
    varsigma = sigma_star * math.sqrt(ratio)
    drift_term = a_star * math.sqrt(ratio)
    radicand = sigma_star ** 2 + (drift_term if sigma_bar_literal else drift_term ** 2)
    if radicand < 0:
        raise ValueError(f"negative sigma_bar radicand {radicand} "
                         "(literal formula with negative a*)")
    sigma_bar = math.sqrt(radicand)
    return DiffusionParams(eta=eta, sigma=inputs.sigma, sigma_bar=sigma_bar,
                           varsigma=varsigma)


# ---------------------------------------------------------------------------
# Path simulation
# ---------------------------------------------------------------------------

def n_steps(dt: float, T: float) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if T < dt:
        raise ValueError("horizon T must be at least dt")
    steps = T / dt
    n = round(steps)
    if abs(steps - n) > 1e-9:
        raise ValueError(f"T/dt = {steps} is not integral")
    return int(n)


def simulate_path(params: DiffusionParams, dt: float, T: float, P0: float,
                  seed) -> PricePath:
    """Euler-Maruyama path on the uniform grid 0, dt, ..., T.

    P_{t+dt} = P_t + eta dt + total_vol sqrt(dt) Z with Z ~ N(0,1) drawn from
    ``numpy.random.default_rng(seed)`` (PCG64, ziggurat normals), so one seed
    gives one bit-identical path.
    """
    n = n_steps(dt, T)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    increments = params.eta * dt + params.total_vol * math.sqrt(dt) * z
    prices = np.empty(n + 1)
    prices[0] = P0
    np.cumsum(increments, out=prices[1:])
    prices[1:] += P0
    times = np.arange(n + 1) * dt
    return PricePath(times=times, prices=prices, seed=seed)
