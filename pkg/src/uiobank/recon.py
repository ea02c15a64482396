"""Attack-signal reconstruction from the selected estimate, and isolation by thresholded support."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InsufficientHistory(ValueError):
    pass


@dataclass(frozen=True)
class AttackEstimate:
    k: int
    a_u_hat: object  # estimate of a_u(k-1); None at k = 0
    a_y_hat: np.ndarray  # estimate of a_y(k)


@dataclass(frozen=True)
class IsolationReport:
    W_u_hat: frozenset
    W_y_hat: frozenset
    threshold: float
    window: int


def reconstruct(model, xhat_k, xhat_prev, u_prev, y_k, k=None):
    """a_u_hat(k) = B^+ (xhat(k) - A xhat(k-1) - f(xhat(k-1))) - u(k-1);  a_y_hat(k) = y(k) - C xhat(k)."""
    a_y_hat = y_k - model.C @ xhat_k
    if xhat_prev is None:
        return AttackEstimate(k, None, a_y_hat)
    a_u_hat = model.B_pinv @ (xhat_k - model.A @ xhat_prev - model.f(xhat_prev)) - u_prev
    return AttackEstimate(k, a_u_hat, a_y_hat)


def isolate(history, threshold=0.1, window=10):
    """Channel i is flagged when the mean |a_hat_i| over the last ``window`` estimates exceeds ``threshold``."""
    if threshold <= 0 or window < 1:
        raise ValueError("threshold must be > 0 and window >= 1")
    a_y = [h.a_y_hat for h in history]
    a_u = [h.a_u_hat for h in history if h.a_u_hat is not None]
    if len(a_y) < window or len(a_u) < window:
        raise InsufficientHistory(f"need {window} estimates, have {len(a_u)} actuator / {len(a_y)} sensor")
    mean_u = np.abs(np.array(a_u[-window:])).mean(axis=0)
    mean_y = np.abs(np.array(a_y[-window:])).mean(axis=0)
    return IsolationReport(
        frozenset(int(i) for i in np.flatnonzero(mean_u > threshold)),
        frozenset(int(i) for i in np.flatnonzero(mean_y > threshold)),
        threshold,
        window,
    )
