"""Small dense networks with hand-rolled reverse-mode gradients.

Policies and value functions in this package are two-hidden-layer ReLU
perceptrons.  They are implemented directly on numpy arrays, in float64,
because the actor updates need exact gradients of the critic with respect
to its *inputs* (the action slots), and because seeded runs must be
bit-reproducible.  All functions here are pure: parameters go in,
new parameters come out, nothing is mutated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

HIDDEN_ACTIVATIONS = ("relu",)
OUTPUT_ACTIVATIONS = ("identity", "sigmoid")


@dataclass
class MLPParams:
    """Weights and biases of one multilayer perceptron.

    ``weights[l]`` has shape ``(layer_dims[l+1], layer_dims[l])`` and
    ``biases[l]`` has length ``layer_dims[l+1]``.
    """

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "identity"

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MLPParams":
        return MLPParams(
            layer_dims=tuple(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            hidden_activation=self.hidden_activation,
            output_activation=self.output_activation,
        )


@dataclass
class MLPGrads:
    """Gradients mirroring the shapes of :class:`MLPParams`."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter bundle."""

    step_count: int
    m_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_weights: list[np.ndarray]
    v_biases: list[np.ndarray]
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def init_params(layer_dims, output_activation: str = "identity", rng=None) -> MLPParams:
    """Create parameters with fan-in scaled uniform weights and zero biases.

    Weights for a layer with ``fan_in`` inputs are drawn from
    ``U(-1/sqrt(fan_in), +1/sqrt(fan_in))``.  ``rng`` may be an integer seed
    or a ``numpy.random.Generator``; the same seed always gives the same
    parameters.
    """
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2:
        raise ValueError(f"need at least input and output widths, got {dims}")
    if any(d < 1 for d in dims):
        raise ValueError(f"all layer widths must be >= 1, got {dims}")
    if output_activation not in OUTPUT_ACTIVATIONS:
        raise ValueError(f"unknown output activation {output_activation!r}")
    gen = _as_rng(rng)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(gen.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MLPParams(dims, weights, biases, "relu", output_activation)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # branch on sign to avoid overflow in exp for large |z|
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_cached(params: MLPParams, x: np.ndarray):
    """Forward pass returning the output and the per-layer activations.

    The cache is the list of layer inputs (post-activation), needed to
    backpropagate without recomputing.  Accepts a single input vector or a
    ``(batch, in_dim)`` matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    a = x[None, :] if squeeze else x
    if a.shape[-1] != params.in_dim:
        raise ValueError(f"input width {a.shape[-1]} != expected {params.in_dim}")
    cache = [a]
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        if l < last:
            a = np.maximum(z, 0.0)
        elif params.output_activation == "sigmoid":
            a = _sigmoid(z)
        else:
            a = z
        cache.append(a)
    y = cache[-1]
    return (y[0] if squeeze else y), cache


def forward(params: MLPParams, x: np.ndarray) -> np.ndarray:
    """Evaluate the network on a vector or a batch of row vectors."""
    y, _ = forward_cached(params, x)
    return y


def backward(params: MLPParams, x: np.ndarray, upstream: np.ndarray, cache=None):
    """Reverse-mode gradients of ``upstream . output`` w.r.t. params and input.

    For batched inputs the parameter gradients are summed over rows (the
    gradient of ``sum_b upstream[b] . output[b]``) while the input gradient
    keeps one row per sample.  The ReLU subgradient at exactly zero is taken
    as zero.  Pass the cache from :func:`forward_cached` to skip the
    recomputation of the forward pass.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if cache is None:
        _, cache = forward_cached(params, x)
    upstream = np.asarray(upstream, dtype=np.float64)
    u = upstream[None, :] if upstream.ndim == 1 else upstream
    if u.shape[-1] != params.out_dim:
        raise ValueError(f"upstream width {u.shape[-1]} != expected {params.out_dim}")
    if u.shape[0] != cache[0].shape[0]:
        raise ValueError("upstream batch size does not match input batch size")

    n_layers = len(params.weights)
    d_weights: list[np.ndarray | None] = [None] * n_layers
    d_biases: list[np.ndarray | None] = [None] * n_layers

    if params.output_activation == "sigmoid":
        s = cache[-1]
        dz = u * s * (1.0 - s)
    else:
        dz = u
    for l in range(n_layers - 1, -1, -1):
        a_prev = cache[l]
        d_weights[l] = dz.T @ a_prev
        d_biases[l] = dz.sum(axis=0)
        da = dz @ params.weights[l]
        if l > 0:
            dz = da * (cache[l] > 0.0)
    input_grad = da[0] if squeeze else da
    return MLPGrads(d_weights, d_biases), input_grad


def init_adam(
    params: MLPParams,
    learning_rate: float = 0.01,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> AdamState:
    return AdamState(
        step_count=0,
        m_weights=[np.zeros_like(w) for w in params.weights],
        m_biases=[np.zeros_like(b) for b in params.biases],
        v_weights=[np.zeros_like(w) for w in params.weights],
        v_biases=[np.zeros_like(b) for b in params.biases],
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def _adam_update(theta, g, m, v, state: AdamState, t: int):
    m_new = state.beta1 * m + (1.0 - state.beta1) * g
    v_new = state.beta2 * v + (1.0 - state.beta2) * g * g
    m_hat = m_new / (1.0 - state.beta1**t)
    v_hat = v_new / (1.0 - state.beta2**t)
    theta_new = theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return theta_new, m_new, v_new


def adam_step(state: AdamState, params: MLPParams, grads: MLPGrads):
    """One Adam update (with bias correction) in the descent direction.

    Returns ``(new_params, new_state)``.  Gradient shapes must match the
    parameters and be finite.
    """
    if len(grads.weights) != len(params.weights):
        raise ValueError("gradient layer count does not match parameters")
    for gw, gb, w, b in zip(grads.weights, grads.biases, params.weights, params.biases):
        if gw.shape != w.shape or gb.shape != b.shape:
            raise ValueError("gradient shapes do not match parameters")
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise ValueError("non-finite gradient")
    t = state.step_count + 1
    new_w, new_b = [], []
    m_w, m_b, v_w, v_b = [], [], [], []
    for w, gw, m, v in zip(params.weights, grads.weights, state.m_weights, state.v_weights):
        wn, mn, vn = _adam_update(w, gw, m, v, state, t)
        new_w.append(wn)
        m_w.append(mn)
        v_w.append(vn)
    for b, gb, m, v in zip(params.biases, grads.biases, state.m_biases, state.v_biases):
        bn, mn, vn = _adam_update(b, gb, m, v, state, t)
        new_b.append(bn)
        m_b.append(mn)
        v_b.append(vn)
    new_params = MLPParams(
        params.layer_dims, new_w, new_b, params.hidden_activation, params.output_activation
    )
    new_state = AdamState(
        t, m_w, m_b, v_w, v_b, state.learning_rate, state.beta1, state.beta2, state.epsilon
    )
    return new_params, new_state


def soft_update(target: MLPParams, online: MLPParams, tau: float) -> MLPParams:
    """Convex combination ``tau * online + (1 - tau) * target``."""
    if target.layer_dims != online.layer_dims:
        raise ValueError("target and online networks have different shapes")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    weights = [tau * wo + (1.0 - tau) * wt for wt, wo in zip(target.weights, online.weights)]
    biases = [tau * bo + (1.0 - tau) * bt for bt, bo in zip(target.biases, online.biases)]
    return MLPParams(
        online.layer_dims, weights, biases, online.hidden_activation, online.output_activation
    )


def grads_global_norm(grads: MLPGrads) -> float:
    total = 0.0
    for g in grads.weights:
        total += float(np.sum(g * g))
    for g in grads.biases:
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def clip_grads(grads: MLPGrads, max_norm: float) -> MLPGrads:
    """Scale all gradients so their global L2 norm is at most ``max_norm``."""
    norm = grads_global_norm(grads)
    if norm <= max_norm or norm == 0.0:
        return grads
    scale = max_norm / norm
    return MLPGrads(
        [g * scale for g in grads.weights],
        [g * scale for g in grads.biases],
    )


def scale_grads(grads: MLPGrads, scale: float) -> MLPGrads:
    return MLPGrads([g * scale for g in grads.weights], [g * scale for g in grads.biases])


def params_to_flat(params: MLPParams) -> np.ndarray:
    """Flatten all parameters, row-major weights then bias, layer by layer."""
    parts = []
    for w, b in zip(params.weights, params.biases):
        parts.append(w.ravel())
        parts.append(b.ravel())
    return np.concatenate(parts)


def flat_to_params(
    flat: np.ndarray,
    layer_dims,
    hidden_activation: str = "relu",
    output_activation: str = "identity",
) -> MLPParams:
    dims = tuple(int(d) for d in layer_dims)
    weights, biases = [], []
    k = 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        n = fan_out * fan_in
        weights.append(flat[k : k + n].reshape(fan_out, fan_in).copy())
        k += n
        biases.append(flat[k : k + fan_out].copy())
        k += fan_out
    if k != flat.size:
        raise ValueError(f"flat vector length {flat.size} does not match dims {dims}")
    return MLPParams(dims, weights, biases, hidden_activation, output_activation)


def adam_to_flat(state: AdamState) -> tuple[np.ndarray, np.ndarray]:
    """Pack both moment sets with the same layout as :func:`params_to_flat`."""
    m_parts, v_parts = [], []
    for mw, mb in zip(state.m_weights, state.m_biases):
        m_parts += [mw.ravel(), mb.ravel()]
    for vw, vb in zip(state.v_weights, state.v_biases):
        v_parts += [vw.ravel(), vb.ravel()]
    return np.concatenate(m_parts), np.concatenate(v_parts)


def adam_from_flat(
    params: MLPParams,
    m_flat: np.ndarray,
    v_flat: np.ndarray,
    step_count: int,
    learning_rate: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> AdamState:
    m = flat_to_params(m_flat, params.layer_dims)
    v = flat_to_params(v_flat, params.layer_dims)
    return AdamState(
        int(step_count),
        m.weights,
        m.biases,
        v.weights,
        v.biases,
        learning_rate,
        beta1,
        beta2,
        epsilon,
    )


def save_params(path, params: MLPParams, init_seed=None) -> None:
    """Write one network to an ``.npz`` container.

    Stores the layer widths, activation names, the flattened parameter
    vector (row-major weights then bias, layer by layer) and the RNG seed
    used at initialisation, when known.
    """
    meta = {
        "layer_dims": list(params.layer_dims),
        "hidden_activation": params.hidden_activation,
        "output_activation": params.output_activation,
        "init_seed": init_seed,
    }
    np.savez(
        path,
        flat=params_to_flat(params),
        meta=np.array(json.dumps(meta)),
    )


def load_params(path):
    """Inverse of :func:`save_params`; returns ``(params, init_seed)``."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        params = flat_to_params(
            data["flat"],
            meta["layer_dims"],
            meta["hidden_activation"],
            meta["output_activation"],
        )
    return params, meta["init_seed"]
