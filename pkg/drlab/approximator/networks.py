"""
Feature extractors and the actor/critic networks built on top of them.

A network is a feature extractor followed by a dense head. Parameters live in one flat
name -> array mapping per network (`extractor.pv.Wx`, `head.0.W`, ...), which is what the
optimizer, the soft update and the archive work on.
"""

from __future__ import annotations

import copy
import typing as t

import numpy as np

from .. import exceptions
from .._registry import Registry
from ..market_env import ActionRaw, Observation
from .layers import (
    DenseLayerSpec,
    RecurrentBranchSpec,
    dense_backward,
    dense_forward,
    init_dense,
    init_recurrent,
    recurrent_backward_stacked,
    recurrent_forward_stacked,
)

__all__ = (
    "Actor",
    "Critic",
    "ExtractorSpec",
    "FeatureExtractor",
    "MBTFExtractor",
    "MLPExtractor",
    "Network",
    "StackedPass",
    "actor_forward",
    "backward",
    "backward_many",
    "critic_forward",
    "extract_features",
    "extractors",
    "forward_many",
    "make_extractor_spec",
    "soft_update",
)

Params = t.Dict[str, np.ndarray]
ObsLike = t.Union[Observation, np.ndarray, t.Sequence[float]]


class ExtractorSpec(t.NamedTuple):
    """
    Shape of the multi-branch temporal fusion extractor.

    :param pv_branch: Recurrent branch over the PV window.
    :param dso_branch: Recurrent branch over the DSO price window.
    :param scalar_branch: Dense layer over the scalar features.
    :param fused_dim: Width of the fused feature vector.
    """

    pv_branch: RecurrentBranchSpec
    dso_branch: RecurrentBranchSpec
    scalar_branch: DenseLayerSpec
    fused_dim: int = 64

    @property
    def fusion_in(self) -> int:
        return self.pv_branch.hidden_dim + self.dso_branch.hidden_dim + self.scalar_branch.out_dim

    @property
    def obs_dim(self) -> int:
        return self.pv_branch.sequence_len + self.dso_branch.sequence_len + self.scalar_branch.in_dim


def make_extractor_spec(
    sequence_len: int = 32,
    lstm_hidden: int = 16,
    scalar_hidden: int = 8,
    fused_dim: int = 64,
    n_scalars: int = 8,
) -> ExtractorSpec:
    branch = RecurrentBranchSpec(input_dim=1, hidden_dim=lstm_hidden, sequence_len=sequence_len)
    return ExtractorSpec(
        pv_branch=branch,
        dso_branch=branch,
        scalar_branch=DenseLayerSpec(n_scalars, scalar_hidden, "tanh"),
        fused_dim=fused_dim,
    )


def _as_batch(obs: t.Any, width: int, where: str) -> t.Tuple[np.ndarray, bool]:
    if isinstance(obs, Observation):
        obs = obs.flatten()
    x = np.asarray(obs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise exceptions.ShapeMismatchException(where=where, expected=width, received=x.shape[-1])
    return x, single


class FeatureExtractor(t.Protocol):
    spec: ExtractorSpec

    @property
    def out_dim(self) -> int: ...

    def init(self, rng: np.random.Generator, prefix: str) -> Params: ...

    def forward(self, params: Params, obs: np.ndarray, prefix: str) -> t.Tuple[np.ndarray, t.Any]: ...

    def backward(self, params: Params, cache: t.Any, dfeat: np.ndarray, grads: Params, prefix: str) -> None: ...

    def forward_many(
        self, params: t.Sequence[Params], obs: np.ndarray, prefix: str
    ) -> t.Tuple[t.List[np.ndarray], t.Any]: ...

    def backward_many(
        self,
        params: t.Sequence[Params],
        cache: t.Any,
        dfeats: t.Sequence[np.ndarray],
        grads: t.Sequence[Params],
        prefix: str,
    ) -> None: ...


extractors: Registry[t.Callable[[ExtractorSpec], FeatureExtractor]] = Registry("extractor")


@extractors.register("mbtf")
class MBTFExtractor:
    """
    Two recurrent branches over the PV and DSO price windows, a dense branch over the
    scalar features, and one linear fusion layer over their concatenation.

    Branches with the same layout run as one stacked recurrence, across all networks of a
    `forward_many` call as well.
    """

    def __init__(self, spec: ExtractorSpec) -> None:
        self.spec = spec
        self.fusion = DenseLayerSpec(spec.fusion_in, spec.fused_dim, "identity")
        lp, ld = spec.pv_branch.sequence_len, spec.dso_branch.sequence_len
        windows = [("pv.", spec.pv_branch, slice(0, lp)), ("dso.", spec.dso_branch, slice(lp, lp + ld))]
        self._groups = [windows] if spec.pv_branch == spec.dso_branch else [[w] for w in windows]

    @property
    def out_dim(self) -> int:
        return self.spec.fused_dim

    def init(self, rng: np.random.Generator, prefix: str = "") -> Params:
        params: Params = {}
        params.update(init_recurrent(self.spec.pv_branch, rng, f"{prefix}pv."))
        params.update(init_recurrent(self.spec.dso_branch, rng, f"{prefix}dso."))
        params.update(init_dense(self.spec.scalar_branch, rng, f"{prefix}scalar."))
        params.update(init_dense(self.fusion, rng, f"{prefix}fusion."))
        return params

    def forward(self, params: Params, obs: np.ndarray, prefix: str = "") -> t.Tuple[np.ndarray, t.Any]:
        feats, cache = self.forward_many([params], obs, prefix)
        return feats[0], cache

    def backward(self, params: Params, cache: t.Any, dfeat: np.ndarray, grads: Params, prefix: str = "") -> None:
        self.backward_many([params], cache, [dfeat], [grads], prefix)

    def forward_many(
        self, params: t.Sequence[Params], obs: np.ndarray, prefix: str = ""
    ) -> t.Tuple[t.List[np.ndarray], t.Any]:
        spec = self.spec
        x, _ = _as_batch(obs, spec.obs_dim, f"{prefix}observation")
        n = len(params)
        hidden: t.Dict[t.Tuple[str, int], np.ndarray] = {}
        rec_caches = []
        for group in self._groups:
            branches = [(p, f"{prefix}{name}") for name, _, _ in group for p in params]
            windows = [x[:, cols] for _, _, cols in group for _ in params]
            hs, cache = recurrent_forward_stacked(group[0][1], branches, windows)
            rec_caches.append(cache)
            for g, (name, _, _) in enumerate(group):
                for k in range(n):
                    hidden[name, k] = hs[g * n + k]

        scalars = x[:, spec.pv_branch.sequence_len + spec.dso_branch.sequence_len :]
        feats, dense_caches = [], []
        for k, p in enumerate(params):
            h_sc, c_sc = dense_forward(spec.scalar_branch, p, scalars, f"{prefix}scalar.")
            fused, c_fu = dense_forward(
                self.fusion, p, np.concatenate([hidden["pv.", k], hidden["dso.", k], h_sc], axis=1), f"{prefix}fusion."
            )
            feats.append(fused)
            dense_caches.append((c_sc, c_fu))
        return feats, (rec_caches, dense_caches)

    def backward_many(
        self,
        params: t.Sequence[Params],
        cache: t.Any,
        dfeats: t.Sequence[np.ndarray],
        grads: t.Sequence[Params],
        prefix: str = "",
    ) -> None:
        spec = self.spec
        rec_caches, dense_caches = cache
        hp, hd = spec.pv_branch.hidden_dim, spec.dso_branch.hidden_dim
        dh: t.Dict[t.Tuple[str, int], np.ndarray] = {}
        for k, (p, g, dfeat, (c_sc, c_fu)) in enumerate(zip(params, grads, dfeats, dense_caches)):
            dcat = dense_backward(self.fusion, p, c_fu, dfeat, g, f"{prefix}fusion.")
            dh["pv.", k], dh["dso.", k] = dcat[:, :hp], dcat[:, hp : hp + hd]
            dense_backward(spec.scalar_branch, p, c_sc, dcat[:, hp + hd :], g, f"{prefix}scalar.")

        for group, rc in zip(self._groups, rec_caches):
            branches = [(p, f"{prefix}{name}") for name, _, _ in group for p in params]
            order = [(name, k) for name, _, _ in group for k in range(len(params))]
            recurrent_backward_stacked(
                group[0][1], branches, rc, np.stack([dh[key] for key in order]), [grads[k] for _, k in order]
            )


@extractors.register("mlp")
class MLPExtractor:
    """Plain dense layer over the whole flattened observation."""

    def __init__(self, spec: ExtractorSpec) -> None:
        self.spec = spec
        self.layer = DenseLayerSpec(spec.obs_dim, spec.fused_dim, "relu")

    @property
    def out_dim(self) -> int:
        return self.spec.fused_dim

    def init(self, rng: np.random.Generator, prefix: str = "") -> Params:
        return init_dense(self.layer, rng, f"{prefix}dense.")

    def forward(self, params: Params, obs: np.ndarray, prefix: str = "") -> t.Tuple[np.ndarray, t.Any]:
        x, _ = _as_batch(obs, self.spec.obs_dim, f"{prefix}observation")
        return dense_forward(self.layer, params, x, f"{prefix}dense.")

    def backward(self, params: Params, cache: t.Any, dfeat: np.ndarray, grads: Params, prefix: str = "") -> None:
        dense_backward(self.layer, params, cache, dfeat, grads, f"{prefix}dense.")

    def forward_many(
        self, params: t.Sequence[Params], obs: np.ndarray, prefix: str = ""
    ) -> t.Tuple[t.List[np.ndarray], t.Any]:
        passes = [self.forward(p, obs, prefix) for p in params]
        return [f for f, _ in passes], [c for _, c in passes]

    def backward_many(
        self,
        params: t.Sequence[Params],
        cache: t.Any,
        dfeats: t.Sequence[np.ndarray],
        grads: t.Sequence[Params],
        prefix: str = "",
    ) -> None:
        for p, c, d, g in zip(params, cache, dfeats, grads):
            self.backward(p, c, d, g, prefix)


def extract_features(spec: ExtractorSpec, params: Params, obs: ObsLike, *, kind: str = "mbtf") -> np.ndarray:
    """
    Fused feature vector of one observation (or a batch of flattened observations).

    :raises exceptions.ShapeMismatchException: If the observation does not fit the extractor layout
    """
    x, single = _as_batch(obs, spec.obs_dim, "observation")
    feat, _ = extractors[kind](spec).forward(params, x)
    return feat[0] if single else feat


_EXTRACTOR_PREFIX = "extractor."


class Network:
    """
    A feature extractor followed by a dense head.

    The last forward pass is cached for `backward`; each network owns its extractor
    parameters.
    """

    name = "network"
    extra_dim = 0

    def __init__(self, extractor: FeatureExtractor, head: t.Sequence[DenseLayerSpec], params: Params) -> None:
        self.extractor = extractor
        self.head = tuple(head)
        self.params = params
        self._cache: t.Optional[t.Tuple[t.Any, t.List[t.Any]]] = None

    @classmethod
    def head_specs(cls, in_dim: int, hidden: t.Sequence[int]) -> t.List[DenseLayerSpec]:
        raise NotImplementedError

    @classmethod
    def build(
        cls, extractor: FeatureExtractor, hidden: t.Sequence[int], rng: np.random.Generator
    ) -> "Network":
        head = cls.head_specs(extractor.out_dim + cls.extra_dim, hidden)
        params = extractor.init(rng, _EXTRACTOR_PREFIX)
        for i, spec in enumerate(head):
            params.update(init_dense(spec, rng, f"head.{i}."))
        return cls(extractor, head, params)

    def copy(self) -> "Network":
        """Independent copy with the same parameter values, e.g. for target networks."""
        return type(self)(self.extractor, self.head, copy.deepcopy(self.params))

    def forward(self, obs: t.Any, extra: t.Optional[np.ndarray] = None) -> np.ndarray:
        """Batched forward pass; returns (batch, out) and caches for `backward`."""
        x, _ = _as_batch(obs, self.extractor.spec.obs_dim, f"{self.name} observation")
        feat, ext_cache = self.extractor.forward(self.params, x, _EXTRACTOR_PREFIX)
        h, caches = self._head_forward(feat, extra)
        self._cache = (ext_cache, caches)
        return h

    def _head_forward(self, feat: np.ndarray, extra: t.Optional[np.ndarray]) -> t.Tuple[np.ndarray, t.List[t.Any]]:
        h = feat
        if self.extra_dim:
            e = np.asarray(extra, dtype=np.float64).reshape(feat.shape[0], self.extra_dim)
            h = np.concatenate([feat, e], axis=1)
        caches = []
        for i, spec in enumerate(self.head):
            h, c = dense_forward(spec, self.params, h, f"head.{i}.")
            caches.append(c)
        return h, caches

    def _head_backward(
        self, caches: t.List[t.Any], dout: np.ndarray, grads: Params
    ) -> t.Tuple[np.ndarray, t.Optional[np.ndarray]]:
        d = np.asarray(dout, dtype=np.float64)
        for i in reversed(range(len(self.head))):
            d = dense_backward(self.head[i], self.params, caches[i], d, grads, f"head.{i}.")
        if self.extra_dim:
            return d[:, : -self.extra_dim], d[:, -self.extra_dim :]
        return d, None

    def backward_full(self, dout: np.ndarray) -> t.Tuple[Params, t.Optional[np.ndarray]]:
        """
        Gradients of every parameter for upstream gradient `dout`, plus the gradient with
        respect to the extra head input (the action, for critics).

        :raises exceptions.MissingForwardCacheException: If no forward pass is cached
        """
        if self._cache is None:
            raise exceptions.MissingForwardCacheException(network=self.name)
        ext_cache, caches = self._cache
        grads = {k: np.zeros_like(v) for k, v in self.params.items()}
        d, d_extra = self._head_backward(caches, dout, grads)
        self.extractor.backward(self.params, ext_cache, d, grads, _EXTRACTOR_PREFIX)
        return grads, d_extra


class Actor(Network):
    name = "actor"

    @classmethod
    def head_specs(cls, in_dim: int, hidden: t.Sequence[int]) -> t.List[DenseLayerSpec]:
        dims = [in_dim, *hidden]
        specs = [DenseLayerSpec(a, b, "relu") for a, b in zip(dims, dims[1:])]
        return specs + [DenseLayerSpec(dims[-1], 2, "tanh")]

    def act(self, obs: ObsLike) -> ActionRaw:
        a = self.forward(obs)[0]
        return ActionRaw(float(a[0]), float(a[1]))


class Critic(Network):
    name = "critic"
    extra_dim = 2

    @classmethod
    def head_specs(cls, in_dim: int, hidden: t.Sequence[int]) -> t.List[DenseLayerSpec]:
        dims = [in_dim, *hidden]
        specs = [DenseLayerSpec(a, b, "relu") for a, b in zip(dims, dims[1:])]
        return specs + [DenseLayerSpec(dims[-1], 1, "identity")]


def actor_forward(actor: Actor, obs: ObsLike) -> ActionRaw:
    """Deterministic action in [-1, 1]^2 for one observation."""
    return actor.act(obs)


def critic_forward(critic: Critic, obs: ObsLike, action: t.Sequence[float]) -> float:
    return float(critic.forward(obs, np.asarray(action, dtype=np.float64))[0, 0])


def backward(network: Network, dout: np.ndarray) -> Params:
    """Gradients of every parameter of `network` for its last forward pass."""
    grads, _ = network.backward_full(dout)
    return grads


def soft_update(target: Network, online: Network, tau: float) -> None:
    """In place: target <- tau * online + (1 - tau) * target."""
    for name, p in online.params.items():
        tp = target.params[name]
        tp *= 1.0 - tau
        tp += tau * p


class StackedPass(t.NamedTuple):
    extractor: t.Any
    heads: t.List[t.List[t.Any]]


def forward_many(
    networks: t.Sequence[Network], obs: t.Any, extra: t.Optional[np.ndarray] = None
) -> t.Tuple[t.List[np.ndarray], StackedPass]:
    """
    Forward pass of several networks of one layout over the same batch, e.g. twin critics.

    The extractors run as one stacked pass. The networks' own `backward` caches are left
    untouched; use `backward_many` with the returned pass.

    :raises ValueError: If the networks differ in extractor kind or layout
    """
    first = networks[0]
    for net in networks[1:]:
        if type(net.extractor) is not type(first.extractor) or net.extractor.spec != first.extractor.spec:
            raise ValueError("forward_many needs networks with one extractor layout")
    x, _ = _as_batch(obs, first.extractor.spec.obs_dim, f"{first.name} observation")
    feats, ext_cache = first.extractor.forward_many([n.params for n in networks], x, _EXTRACTOR_PREFIX)
    outs, heads = [], []
    for net, feat in zip(networks, feats):
        h, caches = net._head_forward(feat, extra)
        outs.append(h)
        heads.append(caches)
    return outs, StackedPass(extractor=ext_cache, heads=heads)


def backward_many(
    networks: t.Sequence[Network], stacked: StackedPass, douts: t.Sequence[np.ndarray]
) -> t.List[t.Tuple[Params, t.Optional[np.ndarray]]]:
    """Per-network gradients and extra-input gradients for a `forward_many` pass."""
    grads = [{k: np.zeros_like(v) for k, v in net.params.items()} for net in networks]
    dfeats, extras = [], []
    for net, caches, dout, g in zip(networks, stacked.heads, douts, grads):
        d, d_extra = net._head_backward(caches, dout, g)
        dfeats.append(d)
        extras.append(d_extra)
    networks[0].extractor.backward_many(
        [net.params for net in networks], stacked.extractor, dfeats, grads, _EXTRACTOR_PREFIX
    )
    return list(zip(grads, extras))
