"""Proximity authentication between a vehicle and its keyfob or paired devices."""

__version__ = "0.1.0"

from .edr import EventKind, EventRecord, MobilityPattern, digest
from .group import DEMO_GROUP, TOY_GROUP, GroupParams
from .protocol import Outcome, Reason, TimingPolicy, Verdict

__all__ = [
    "__version__",
    "DEMO_GROUP",
    "TOY_GROUP",
    "EventKind",
    "EventRecord",
    "GroupParams",
    "MobilityPattern",
    "Outcome",
    "Reason",
    "TimingPolicy",
    "Verdict",
    "digest",
]
