"""Dense-network substrate: MLPs with hand-written backprop, Adam, and the
tanh-Gaussian sampling head.

Everything is plain numpy (float64). The architectures used by the agent are
small and fixed (two ReLU hidden layers), so gradients are derived explicitly
per layer instead of pulling in an autodiff framework.

Normal variates are always supplied by the caller (or drawn from an explicit
``numpy.random.Generator``), so identical seeds reproduce identical numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_SIGMA_MIN = -20.0
LOG_SIGMA_MAX = 2.0
TANH_CORRECTION_EPS = 1e-6

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class Mlp:
    """Fully connected ReLU network: hidden layers ReLU, output linear."""

    dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_in(self) -> int:
        return self.dims[0]

    @property
    def n_out(self) -> int:
        return self.dims[-1]

    def copy(self) -> "Mlp":
        return Mlp(self.dims, [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases])

    def flat_params(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.weights + self.biases])

    def set_flat_params(self, flat: np.ndarray) -> None:
        i = 0
        for arr in self.weights + self.biases:
            arr[...] = flat[i:i + arr.size].reshape(arr.shape)
            i += arr.size
        if i != flat.size:
            raise ValueError(f"flat parameter vector has size {flat.size}, expected {i}")


def mlp_init(dims: tuple[int, ...] | list[int], seed) -> Mlp:
    """Create an MLP with fan-in-scaled uniform weights and zero biases.

    Weights of layer l are drawn uniformly from [-sqrt(6/fan_in), +sqrt(6/fan_in)].
    ``seed`` may be an int or a ``numpy.random.Generator``/``SeedSequence``.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"invalid layer dimensions {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(np.zeros(n_out))
    return Mlp(dims, weights, biases)


def forward(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Run the network on a batch (or a single vector).

    Returns (output, cache). The cache holds the layer inputs needed by
    :func:`backward`; cache[0] is the (2-d) input itself.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != net.n_in:
        raise ValueError(f"input width {x.shape[1]} does not match net input {net.n_in}")
    cache = [x]
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        h = z if i == last else np.maximum(z, 0.0)
        cache.append(h)
    return h, cache


def backward(net: Mlp, cache: list[np.ndarray], output_grad: np.ndarray):
    """Reverse-mode gradients from dL/d(output).

    Returns ((weight_grads, bias_grads), input_grad). The ReLU masks are
    recovered from the cached post-activations (h > 0 iff z > 0).
    """
    if len(cache) != len(net.weights) + 1:
        raise ValueError("activation cache does not match network depth")
    g = np.atleast_2d(np.asarray(output_grad, dtype=float))
    if g.shape != cache[-1].shape:
        raise ValueError(f"output grad shape {g.shape} does not match cached output "
                         f"{cache[-1].shape}")
    w_grads = [None] * len(net.weights)
    b_grads = [None] * len(net.biases)
    for i in range(len(net.weights) - 1, -1, -1):
        w_grads[i] = cache[i].T @ g
        b_grads[i] = g.sum(axis=0)
        g = g @ net.weights[i].T
        if i > 0:
            g = g * (cache[i] > 0.0)
    return (w_grads, b_grads), g


def backward_input_only(net: Mlp, cache: list[np.ndarray],
                        output_grad: np.ndarray) -> np.ndarray:
    """Input gradient without materializing parameter gradients."""
    g = np.atleast_2d(np.asarray(output_grad, dtype=float))
    for i in range(len(net.weights) - 1, -1, -1):
        g = g @ net.weights[i].T
        if i > 0:
            g = g * (cache[i] > 0.0)
    return g


@dataclass
class AdamState:
    """Per-network Adam accumulators (bias-corrected update)."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: Mlp, lr: float = 3e-4, beta1: float = 0.9,
                beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        params = net.weights + net.biases
        return cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
                   m=[np.zeros_like(p) for p in params],
                   v=[np.zeros_like(p) for p in params])


def adam_update(state: AdamState, net: Mlp, w_grads: list[np.ndarray],
                b_grads: list[np.ndarray]) -> None:
    """One in-place Adam step on the network parameters."""
    params = net.weights + net.biases
    grads = list(w_grads) + list(b_grads)
    if len(grads) != len(params):
        raise ValueError("gradient list does not match parameter list")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def clamp_log_sigma(log_sigma: np.ndarray) -> np.ndarray:
    return np.clip(log_sigma, LOG_SIGMA_MIN, LOG_SIGMA_MAX)


def tanh_gaussian_sample(mu: np.ndarray, log_sigma: np.ndarray,
                         noise: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Squashed-Gaussian sample and its log-density.

    u = mu + sigma * noise, action = tanh(u), and the log-probability carries
    the tanh change-of-variables correction:
        log_prob = sum_j [ log N(u_j; mu_j, sigma_j) - log(1 - tanh(u_j)^2 + 1e-6) ]

    Accepts batched (B, k) or flat (k,) arrays; log_prob has shape (B,) or ().
    """
    mu = np.asarray(mu, dtype=float)
    log_sigma = clamp_log_sigma(np.asarray(log_sigma, dtype=float))
    noise = np.asarray(noise, dtype=float)
    sigma = np.exp(log_sigma)
    u = mu + sigma * noise
    action = np.tanh(u)
    log_normal = -log_sigma - 0.5 * _LOG_2PI - 0.5 * noise ** 2
    correction = np.log(1.0 - action ** 2 + TANH_CORRECTION_EPS)
    log_prob = np.sum(log_normal - correction, axis=-1)
    return action, log_prob


def tanh_gaussian_backward(mu: np.ndarray, log_sigma_raw: np.ndarray,
                           noise: np.ndarray, d_action: np.ndarray,
                           d_log_prob: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of (action, log_prob) wrt the raw head outputs (mu, log_sigma).

    Implements the reparameterization chain rule: with u = mu + sigma*eps,
        d action / d mu        = 1 - tanh(u)^2
        d action / d log_sigma = (1 - tanh(u)^2) * sigma * eps
        d log_prob / d u       = 2 t (1 - t^2) / (1 - t^2 + eps_c),  t = tanh(u)
        d log_prob / d log_sigma (direct term) = -1 (zero where the clamp is active)
    """
    mu = np.asarray(mu, dtype=float)
    log_sigma_raw = np.asarray(log_sigma_raw, dtype=float)
    log_sigma = clamp_log_sigma(log_sigma_raw)
    active = ((log_sigma_raw > LOG_SIGMA_MIN) & (log_sigma_raw < LOG_SIGMA_MAX)).astype(float)
    noise = np.asarray(noise, dtype=float)
    sigma = np.exp(log_sigma)
    u = mu + sigma * noise
    t = np.tanh(u)
    sech2 = 1.0 - t ** 2
    dlp_du = 2.0 * t * sech2 / (sech2 + TANH_CORRECTION_EPS)
    d_action = np.asarray(d_action, dtype=float)
    d_log_prob = np.atleast_1d(np.asarray(d_log_prob, dtype=float))[..., None]
    d_u = d_action * sech2 + d_log_prob * dlp_du
    d_mu = d_u
    d_log_sigma = (d_u * sigma * noise - d_log_prob) * active
    return d_mu, d_log_sigma


# ---------------------------------------------------------------------------
# Checkpoint serialization (text format "mmnet-v1")
# ---------------------------------------------------------------------------
# Layout, one record per network:
#   mmnet-v1 <role>
#   dims d0 d1 ... dk
#   <W values row-major, one layer per line> for each layer
#   <b values, one layer per line>
# Floats are written with repr (shortest round-trip), so save/load is lossless.

CHECKPOINT_MAGIC = "mmnet-v1"


def _fmt_floats(a: np.ndarray) -> str:
    return " ".join(repr(float(x)) for x in a.ravel())


def dump_net(net: Mlp, role: str) -> str:
    lines = [f"{CHECKPOINT_MAGIC} {role}",
             "dims " + " ".join(str(d) for d in net.dims)]
    for w in net.weights:
        lines.append("W " + _fmt_floats(w))
    for b in net.biases:
        lines.append("b " + _fmt_floats(b))
    return "\n".join(lines) + "\n"


def load_net(text: str) -> tuple[Mlp, str]:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"bad network record header: {lines[0]!r}")
    role = head[1]
    if not lines[1].startswith("dims "):
        raise ValueError("network record missing dims line")
    dims = tuple(int(x) for x in lines[1].split()[1:])
    n_layers = len(dims) - 1
    weights, biases = [], []
    idx = 2
    for i in range(n_layers):
        tag, *vals = lines[idx].split()
        if tag != "W":
            raise ValueError(f"expected weight line, got {tag!r}")
        weights.append(np.array([float(v) for v in vals]).reshape(dims[i], dims[i + 1]))
        idx += 1
    for i in range(n_layers):
        tag, *vals = lines[idx].split()
        if tag != "b":
            raise ValueError(f"expected bias line, got {tag!r}")
        biases.append(np.array([float(v) for v in vals]))
        idx += 1
    return Mlp(dims, weights, biases), role
