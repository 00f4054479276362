"""Margin-density drift detection for linear filters.

The margin density of a sample batch is the fraction of points whose
absolute decision value |w.x + b| falls inside a fixed band around the
boundary. A reference density and its spread are measured on the training
stream (chunked into folds the size of the rolling window); the detector
alarms when the observed density exceeds reference + lambda * sigma for a
configured number of consecutive windows.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

STABLE = "stable"
DRIFT = "drift"


def margin_density(X, linear_filter, band: float = 1.0) -> float:
    """Fraction of samples with |decision value| inside the band."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        return 0.0
    margins = np.abs(linear_filter.decision_function(X))
    return float(np.mean(margins <= band))


class MarginDensityMonitor(BaseEstimator):
    """Tracks rolling margin densities against training-time reference stats."""

    def __init__(
        self,
        margin_band: float = 1.0,
        alarm_lambda: float = 3.0,
        window: int = 500,
        consecutive_needed: int = 2,
    ) -> None:
        self.margin_band = margin_band
        self.alarm_lambda = alarm_lambda
        self.window = window
        self.consecutive_needed = consecutive_needed

    def fit(self, X, linear_filter) -> "MarginDensityMonitor":
        """Set rho_ref_/sigma_ref_ from fold densities of the training stream.

        The fold standard deviation is floored by the binomial sd of a
        window-sized density estimate, sqrt(rho (1 - rho) / window): the fold
        estimate is itself noisy and can undershoot the true sampling spread,
        which would turn ordinary fluctuation into alarms.
        """
        X = np.asarray(X, dtype=np.float64)
        n = X.shape[0]
        if n < 4:
            raise ValueError("need at least 4 reference samples")
        fold = min(self.window, n // 2)
        folds = [X[i : i + fold] for i in range(0, n - fold + 1, fold)]
        densities = [margin_density(f, linear_filter, self.margin_band) for f in folds]
        rho = margin_density(X, linear_filter, self.margin_band)
        binom_sd = float(np.sqrt(max(rho * (1.0 - rho), 1e-12) / self.window))
        self.rho_ref_ = rho
        self.sigma_ref_ = max(float(np.std(densities, ddof=1)), binom_sd, 1e-6)
        self._streak = 0
        self._alarmed = False
        return self

    def set_reference(self, rho_ref: float, sigma_ref: float) -> "MarginDensityMonitor":
        """Restore reference stats directly (used when reloading saved filters)."""
        self.rho_ref_ = float(rho_ref)
        self.sigma_ref_ = max(float(sigma_ref), 1e-6)
        self._streak = 0
        self._alarmed = False
        return self

    def _check_ready(self) -> None:
        if not hasattr(self, "rho_ref_"):
            raise NotFittedError("monitor has no reference statistics")

    @property
    def threshold(self) -> float:
        self._check_ready()
        return self.rho_ref_ + self.alarm_lambda * self.sigma_ref_

    def observe(self, density: float) -> str:
        """Feed one rolling-window density; returns the current status.

        An alarm latches (stays in drift) until reset_alarm().
        """
        self._check_ready()
        if density > self.threshold:
            self._streak += 1
        else:
            self._streak = 0
        if self._streak >= self.consecutive_needed:
            self._alarmed = True
        return DRIFT if self._alarmed else STABLE

    @property
    def alarmed(self) -> bool:
        return getattr(self, "_alarmed", False)

    def reset_alarm(self) -> None:
        self._streak = 0
        self._alarmed = False


def drift_check(monitor: MarginDensityMonitor, density_stream) -> str:
    """Run a density sequence through a fresh alarm state; final verdict."""
    monitor.reset_alarm()
    status = STABLE
    for density in density_stream:
        status = monitor.observe(density)
    return status
