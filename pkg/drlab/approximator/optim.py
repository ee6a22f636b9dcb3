from __future__ import annotations

import dataclasses
import typing as t

import numpy as np

__all__ = ("ParameterBundle", "optimizer_step")


@dataclasses.dataclass
class ParameterBundle:
    """
    Parameters of one network with their gradients and adaptive-moment state.

    `params` is shared with the owning network, so optimizer steps update it in place.
    """

    params: t.Dict[str, np.ndarray]
    grads: t.Dict[str, np.ndarray]
    m: t.Dict[str, np.ndarray]
    v: t.Dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def from_params(cls, params: t.Dict[str, np.ndarray]) -> "ParameterBundle":
        def zeros() -> t.Dict[str, np.ndarray]:
            return {k: np.zeros_like(p) for k, p in params.items()}

        return cls(params=params, grads=zeros(), m=zeros(), v=zeros())

    def set_grads(self, grads: t.Mapping[str, np.ndarray]) -> None:
        for k, g in grads.items():
            self.grads[k][...] = g


def optimizer_step(
    bundle: ParameterBundle,
    lr: float,
    betas: t.Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> ParameterBundle:
    """Bias-corrected adaptive-moment descent step on the current gradients."""
    b1, b2 = betas
    bundle.t += 1
    c1 = 1.0 - b1**bundle.t
    c2 = 1.0 - b2**bundle.t
    for k, p in bundle.params.items():
        g = bundle.grads[k]
        m, v = bundle.m[k], bundle.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return bundle
