"""Classifier filters: encoding, SGD linear members, ensembles, drift tooling."""

from .diagnostics import DriftDiagnostic, drift_diagnostic
from .drift import MarginDensityMonitor, drift_check, margin_density
from .encoding import HashingTextEncoder, PretrainedVectorEncoder
from .ensemble import VotingFilterEnsemble, binary_fscore, model_weights, train_filter
from .linear import SGDLinearFilter, loss_and_gradient
from .schedule import (
    ACTION_FORK_AND_UPDATE,
    ACTION_GENERATE_NEW,
    ACTION_NONE,
    ACTION_UPDATE_EXISTING,
    ScheduleState,
    schedule_tick,
)
from .store import FilterStore, FStoreEntry

__all__ = [
    "ACTION_FORK_AND_UPDATE",
    "ACTION_GENERATE_NEW",
    "ACTION_NONE",
    "ACTION_UPDATE_EXISTING",
    "DriftDiagnostic",
    "FStoreEntry",
    "FilterStore",
    "HashingTextEncoder",
    "MarginDensityMonitor",
    "PretrainedVectorEncoder",
    "SGDLinearFilter",
    "ScheduleState",
    "VotingFilterEnsemble",
    "binary_fscore",
    "drift_check",
    "drift_diagnostic",
    "loss_and_gradient",
    "margin_density",
    "model_weights",
    "schedule_tick",
    "train_filter",
]
