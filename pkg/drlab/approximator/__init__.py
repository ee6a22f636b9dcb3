from .archive import load_params, save_params
from .gradcheck import check_gradients, check_network
from .layers import DenseLayerSpec, RecurrentBranchSpec, dense_forward, recurrent_forward
from .networks import (
    Actor,
    Critic,
    ExtractorSpec,
    actor_forward,
    backward,
    critic_forward,
    extract_features,
    extractors,
    make_extractor_spec,
    soft_update,
)
from .optim import ParameterBundle, optimizer_step

__all__ = (
    "Actor",
    "Critic",
    "DenseLayerSpec",
    "ExtractorSpec",
    "ParameterBundle",
    "RecurrentBranchSpec",
    "actor_forward",
    "backward",
    "check_gradients",
    "check_network",
    "critic_forward",
    "dense_forward",
    "extract_features",
    "extractors",
    "load_params",
    "make_extractor_spec",
    "optimizer_step",
    "recurrent_forward",
    "save_params",
    "soft_update",
)
