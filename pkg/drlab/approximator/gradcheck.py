"""
Central finite-difference verification of analytic gradients.
"""

from __future__ import annotations

import typing as t

import numpy as np

from .networks import Network

__all__ = ("GradcheckReport", "check_gradients", "check_network", "numeric_gradient", "relative_error")

_FLOOR = 1e-5


class GradcheckReport(t.NamedTuple):
    max_rel_error: float
    checked: int
    worst: t.Optional[t.Tuple[str, t.Tuple[int, ...]]]

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_rel_error < tol


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic) + abs(numeric), _FLOOR)


def numeric_gradient(
    loss: t.Callable[[], float],
    params: t.Mapping[str, np.ndarray],
    name: str,
    index: t.Tuple[int, ...],
    h: float = 1e-5,
) -> float:
    """d loss / d params[name][index] by central difference; the entry is restored afterwards."""
    arr = params[name]
    orig = arr[index]
    arr[index] = orig + h
    up = loss()
    arr[index] = orig - h
    down = loss()
    arr[index] = orig
    return (up - down) / (2.0 * h)


def check_gradients(
    loss: t.Callable[[], float],
    params: t.Mapping[str, np.ndarray],
    grads: t.Mapping[str, np.ndarray],
    rng: np.random.Generator,
    n_samples: int = 128,
    h: float = 1e-5,
) -> GradcheckReport:
    """
    Compare `grads` against central differences of `loss` on a random subsample of entries.

    Every array contributes at least one entry; the rest are drawn uniformly over all entries.
    """
    entries: t.List[t.Tuple[str, t.Tuple[int, ...]]] = []
    names = sorted(params)
    for name in names:
        flat = int(rng.integers(params[name].size))
        entries.append((name, np.unravel_index(flat, params[name].shape)))
    sizes = np.array([params[n].size for n in names])
    total = int(sizes.sum())
    for _ in range(max(0, min(n_samples, total) - len(entries))):
        flat = int(rng.integers(total))
        k = int(np.searchsorted(np.cumsum(sizes), flat, side="right"))
        offset = flat - int(sizes[:k].sum())
        entries.append((names[k], np.unravel_index(offset, params[names[k]].shape)))

    worst, worst_at = 0.0, None
    for name, idx in entries:
        idx = tuple(int(i) for i in idx)
        err = relative_error(float(grads[name][idx]), numeric_gradient(loss, params, name, idx, h))
        if err > worst or worst_at is None:
            worst, worst_at = err, (name, idx)
    return GradcheckReport(max_rel_error=worst, checked=len(entries), worst=worst_at)


def check_network(
    network: Network,
    obs: np.ndarray,
    rng: np.random.Generator,
    extra: t.Optional[np.ndarray] = None,
    n_samples: int = 128,
) -> GradcheckReport:
    """Gradient check of a whole network under the loss sum(w * output) with random fixed w."""
    out = network.forward(obs, extra)
    w = rng.normal(size=out.shape)

    def loss() -> float:
        return float(np.sum(w * network.forward(obs, extra)))

    grads, _ = network.backward_full(w)
    return check_gradients(loss, network.params, grads, rng, n_samples=n_samples)
