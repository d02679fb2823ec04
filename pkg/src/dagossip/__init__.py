"""Gossip in the random phone call model with direct addressing: simulator, cluster primitives, algorithms, lower-bound lab."""

from .config import ConfigError, FailureSpec, ScheduleConstants, TrialConfig, loglog
from .engine import (
    Action,
    ContractError,
    IntentBatch,
    Kind,
    Metrics,
    ModelViolation,
    Network,
    Payload,
    ResponseBatch,
    ResponsePlan,
    RoundIntent,
    UnsupportedMode,
    new_network,
)

__all__ = [
    "Action", "ConfigError", "ContractError", "FailureSpec", "IntentBatch", "Kind", "Metrics",
    "ModelViolation", "Network", "Payload", "ResponseBatch", "ResponsePlan", "RoundIntent",
    "ScheduleConstants", "TrialConfig", "UnsupportedMode", "loglog", "new_network",
]
