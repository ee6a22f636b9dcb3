from ._registry import Registry
from .dataio import load_scenario, synth_scenario
from .domain import Scenario, validate_scenario
from .market_env import MarketEnv
from .td3_agent import AgentConfig, evaluate, train

__all__ = (
    "AgentConfig",
    "MarketEnv",
    "Registry",
    "Scenario",
    "evaluate",
    "load_scenario",
    "synth_scenario",
    "train",
    "validate_scenario",
)
