"""Filter update scheduling: periodic, drift-triggered, or both.

Actions returned to the orchestrator:

  none             keep the current filter
  update_existing  warm-start the current filter on the new window's labels
  generate_new     train a fresh filter from the new window's labels
  fork_and_update  keep the existing filter, save an updated copy of it, and
                   also train a fresh filter (the hybrid response to drift,
                   preserving staggered-window knowledge)
"""

from __future__ import annotations

from dataclasses import dataclass

ACTION_NONE = "none"
ACTION_UPDATE_EXISTING = "update_existing"
ACTION_GENERATE_NEW = "generate_new"
ACTION_FORK_AND_UPDATE = "fork_and_update"

MODES = ("user", "detector", "hybrid")


@dataclass
class ScheduleState:
    last_update: int
    drift_alarm: bool = False


def schedule_tick(mode: str, state: ScheduleState, now: int, period: int | None = None) -> str:
    """Decide the filter action at a schedule tick."""
    if mode not in MODES:
        raise ValueError(f"unknown schedule mode {mode!r}")
    if mode in ("user", "hybrid") and (period is None or period <= 0):
        raise ValueError(f"{mode} schedule needs a positive period")
    period_due = period is not None and now - state.last_update >= period
    if mode == "user":
        return ACTION_UPDATE_EXISTING if period_due else ACTION_NONE
    if mode == "detector":
        return ACTION_GENERATE_NEW if state.drift_alarm else ACTION_NONE
    if state.drift_alarm:
        return ACTION_FORK_AND_UPDATE
    return ACTION_UPDATE_EXISTING if period_due else ACTION_NONE
