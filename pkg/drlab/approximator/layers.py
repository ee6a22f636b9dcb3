"""
Dense and recurrent layers with explicit forward caches and reverse-mode gradients.

Layers are stateless functions over a parameter mapping; parameter names are
`<prefix><name>` so several layers can share one flat mapping. Everything is float64.
"""

from __future__ import annotations

import typing as t

import numpy as np

from .. import exceptions

__all__ = (
    "Activation",
    "DenseLayerSpec",
    "RecurrentBranchSpec",
    "dense_backward",
    "dense_forward",
    "init_dense",
    "init_recurrent",
    "recurrent_backward",
    "recurrent_backward_stacked",
    "recurrent_forward",
    "recurrent_forward_stacked",
)

Activation = t.Literal["tanh", "relu", "identity"]
Params = t.Mapping[str, np.ndarray]
Grads = t.MutableMapping[str, np.ndarray]


class DenseLayerSpec(t.NamedTuple):
    in_dim: int
    out_dim: int
    activation: Activation = "relu"


class RecurrentBranchSpec(t.NamedTuple):
    input_dim: int = 1
    hidden_dim: int = 16
    sequence_len: int = 32


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == "tanh":
        return np.tanh(z)
    if activation == "relu":
        return np.maximum(z, 0.0)
    return z


def _activation_grad(z: np.ndarray, y: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == "tanh":
        return 1.0 - y * y
    if activation == "relu":
        return (z > 0).astype(np.float64)
    return np.ones_like(z)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def init_dense(spec: DenseLayerSpec, rng: np.random.Generator, prefix: str = "") -> t.Dict[str, np.ndarray]:
    """Uniform initialization in +-1/sqrt(fan_in)."""
    bound = 1.0 / np.sqrt(spec.in_dim)
    return {
        f"{prefix}W": rng.uniform(-bound, bound, size=(spec.out_dim, spec.in_dim)),
        f"{prefix}b": rng.uniform(-bound, bound, size=(spec.out_dim,)),
    }


def init_recurrent(
    spec: RecurrentBranchSpec, rng: np.random.Generator, prefix: str = ""
) -> t.Dict[str, np.ndarray]:
    """Uniform initialization in +-1/sqrt(hidden); forget-gate bias starts at 1."""
    h = spec.hidden_dim
    bound = 1.0 / np.sqrt(h)
    b = rng.uniform(-bound, bound, size=(4 * h,))
    b[h : 2 * h] = 1.0
    return {
        f"{prefix}Wx": rng.uniform(-bound, bound, size=(4 * h, spec.input_dim)),
        f"{prefix}Wh": rng.uniform(-bound, bound, size=(4 * h, h)),
        f"{prefix}b": b,
    }


class DenseCache(t.NamedTuple):
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray


def dense_forward(
    spec: DenseLayerSpec, params: Params, x: np.ndarray, prefix: str = ""
) -> t.Tuple[np.ndarray, DenseCache]:
    """
    activation(W x + b) over a batch of row vectors; a 1-D input gives a 1-D output.

    :raises exceptions.ShapeMismatchException: If the input width is not `in_dim`
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.shape[-1] != spec.in_dim:
        raise exceptions.ShapeMismatchException(
            where=f"{prefix}dense", expected=spec.in_dim, received=x2.shape[-1]
        )
    z = x2 @ params[f"{prefix}W"].T + params[f"{prefix}b"]
    y = _activate(z, spec.activation)
    cache = DenseCache(x=x2, z=z, y=y)
    return (y[0] if single else y), cache


def dense_backward(
    spec: DenseLayerSpec, params: Params, cache: DenseCache, dy: np.ndarray, grads: Grads, prefix: str = ""
) -> np.ndarray:
    """Accumulate parameter gradients into `grads`; return the input gradient."""
    dy = np.asarray(dy, dtype=np.float64).reshape(cache.y.shape)
    dz = dy * _activation_grad(cache.z, cache.y, spec.activation)
    grads[f"{prefix}W"] += dz.T @ cache.x
    grads[f"{prefix}b"] += dz.sum(axis=0)
    return dz @ params[f"{prefix}W"]


class RecurrentCache(t.NamedTuple):
    xs: np.ndarray  # (K, B, T, D) for K stacked branches
    hs: np.ndarray  # (T+1, K, B, H), hs[0] is the zero initial state
    cs: np.ndarray
    gates: np.ndarray  # (T, K, B, 4H) post-activation i, f, g, o


Branch = t.Tuple[Params, str]


def _sequence_batch(spec: RecurrentBranchSpec, sequence: np.ndarray, prefix: str) -> np.ndarray:
    xs = np.asarray(sequence, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[None, :]
    if xs.ndim == 2:
        xs = xs[:, :, None]
    if xs.shape[1] != spec.sequence_len or xs.shape[2] != spec.input_dim:
        raise exceptions.ShapeMismatchException(
            where=f"{prefix}recurrent",
            expected=(spec.sequence_len, spec.input_dim),
            received=xs.shape[1:],
        )
    return xs


def _stacked(branches: t.Sequence[Branch], name: str) -> np.ndarray:
    return np.stack([params[f"{prefix}{name}"] for params, prefix in branches])


def recurrent_forward_stacked(
    spec: RecurrentBranchSpec, branches: t.Sequence[Branch], sequences: t.Sequence[np.ndarray]
) -> t.Tuple[np.ndarray, RecurrentCache]:
    """
    Run several branches of one layout in lockstep, one (params, prefix) pair per sequence.

    All sequences need the same batch size. Returns the last hidden states as (K, B, H).

    :raises exceptions.ShapeMismatchException: If a sequence length differs from the branch layout
    """
    xs = np.stack([_sequence_batch(spec, s, prefix) for s, (_, prefix) in zip(sequences, branches)])
    n_branches, bsz, steps, _ = xs.shape
    h = spec.hidden_dim
    wx, wh_t, b = _stacked(branches, "Wx"), _stacked(branches, "Wh").transpose(0, 2, 1), _stacked(branches, "b")

    # input projections for all steps at once
    proj = np.einsum("kbtd,kjd->kbtj", xs, wx) + b[:, None, None, :]
    hs = np.zeros((steps + 1, n_branches, bsz, h))
    cs = np.zeros((steps + 1, n_branches, bsz, h))
    gates = np.empty((steps, n_branches, bsz, 4 * h))
    for s in range(steps):
        a = proj[:, :, s, :] + hs[s] @ wh_t
        i = _sigmoid(a[..., :h])
        f = _sigmoid(a[..., h : 2 * h])
        g = np.tanh(a[..., 2 * h : 3 * h])
        o = _sigmoid(a[..., 3 * h :])
        cs[s + 1] = f * cs[s] + i * g
        hs[s + 1] = o * np.tanh(cs[s + 1])
        gates[s] = np.concatenate([i, f, g, o], axis=-1)

    return hs[-1], RecurrentCache(xs=xs, hs=hs, cs=cs, gates=gates)


def recurrent_backward_stacked(
    spec: RecurrentBranchSpec,
    branches: t.Sequence[Branch],
    cache: RecurrentCache,
    dh_last: np.ndarray,
    grads: t.Sequence[Grads],
) -> np.ndarray:
    """
    Backpropagation through every step of stacked branches.

    Gradients of branch k accumulate into `grads[k]` under its prefix; returns the input
    gradients as (K, B, T, D).
    """
    h = spec.hidden_dim
    wx, wh = _stacked(branches, "Wx"), _stacked(branches, "Wh")
    steps = cache.gates.shape[0]
    dh = np.asarray(dh_last, dtype=np.float64).reshape(cache.hs[-1].shape)
    dc = np.zeros_like(dh)
    da_all = np.empty_like(cache.gates)
    for s in reversed(range(steps)):
        gs = cache.gates[s]
        i, f, g, o = gs[..., :h], gs[..., h : 2 * h], gs[..., 2 * h : 3 * h], gs[..., 3 * h :]
        tc = np.tanh(cache.cs[s + 1])
        dc = dc + dh * o * (1.0 - tc * tc)
        da = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * cache.cs[s] * f * (1.0 - f),
                dc * i * (1.0 - g * g),
                dh * tc * o * (1.0 - o),
            ],
            axis=-1,
        )
        da_all[s] = da
        dh = da @ wh
        dc = dc * f

    d_wh = np.einsum("tkbj,tkbi->kji", da_all, cache.hs[:-1])
    d_wx = np.einsum("tkbj,kbti->kji", da_all, cache.xs)
    d_b = da_all.sum(axis=(0, 2))
    for k, (g_k, (_, prefix)) in enumerate(zip(grads, branches)):
        g_k[f"{prefix}Wh"] += d_wh[k]
        g_k[f"{prefix}Wx"] += d_wx[k]
        g_k[f"{prefix}b"] += d_b[k]
    return np.einsum("tkbj,kji->kbti", da_all, wx)


def recurrent_forward(
    spec: RecurrentBranchSpec, params: Params, sequence: np.ndarray, prefix: str = ""
) -> t.Tuple[np.ndarray, RecurrentCache]:
    """
    Gated recurrence (input, forget, candidate, output) from a zero state; returns the last hidden state.

    :param sequence: (B, T) or (B, T, input_dim); a 1-D sequence is one batch row.

    :raises exceptions.ShapeMismatchException: If the sequence length differs from the branch layout
    """
    single = np.ndim(sequence) == 1
    hs, cache = recurrent_forward_stacked(spec, [(params, prefix)], [sequence])
    return (hs[0][0] if single else hs[0]), cache


def recurrent_backward(
    spec: RecurrentBranchSpec,
    params: Params,
    cache: RecurrentCache,
    dh_last: np.ndarray,
    grads: Grads,
    prefix: str = "",
) -> np.ndarray:
    """Backpropagation through every step; returns the gradient w.r.t. the input sequence."""
    return recurrent_backward_stacked(spec, [(params, prefix)], cache, dh_last, [grads])[0]
