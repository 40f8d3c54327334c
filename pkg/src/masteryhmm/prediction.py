"""Aggregate a decoded mastery trajectory into a final score and class label."""

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import InputDomainError

__all__ = [
    "PredictorSpec",
    "Prediction",
    "predict_naive",
    "predict_average",
    "predict_window",
    "predict_exp_smooth",
    "predict_mode",
    "smoothing_weights",
    "score_to_label",
    "predict",
]

METHODS = ("naive", "average", "window", "exp_smooth", "mode")


def _states(traj):
    states = getattr(traj, "states", traj)
    arr = np.asarray(states, dtype=float).ravel()
    if arr.size == 0:
        raise InputDomainError("trajectory must contain at least one state")
    return arr


def _check_alpha(alpha):
    if not 0 <= alpha <= 1:
        raise InputDomainError(f"smoothing constant must lie in [0, 1], got {alpha!r}")


def predict_naive(traj):
    """Last state of the trajectory."""
    return float(_states(traj)[-1])


def predict_average(traj):
    """Arithmetic mean of all states."""
    return float(np.mean(_states(traj)))


def predict_window(traj, p):
    """Mean of the last ``p`` states."""
    s = _states(traj)
    if isinstance(p, bool) or not isinstance(p, (int, np.integer)) or p < 1:
        raise InputDomainError(f"window length must be a positive integer, got {p!r}")
    if p > s.size:
        raise InputDomainError(f"window length {p} exceeds trajectory length {s.size}")
    return float(np.mean(s[-p:]))


def predict_exp_smooth(traj, alpha):
    """Single exponential smoothing, ``S_n = alpha s_n + (1 - alpha) S_{n-1}``.

    The recursion starts from ``S_1 = s_1``.
    """
    _check_alpha(alpha)
    s = _states(traj)
    level = s[0]
    for value in s[1:]:
        level = alpha * value + (1 - alpha) * level
    return float(level)


def smoothing_weights(alpha, depth):
    """Weights ``alpha (1 - alpha)^i`` on ``s_n, s_{n-1}, ...``, ``i < depth``."""
    _check_alpha(alpha)
    if depth < 1:
        raise InputDomainError("depth must be >= 1")
    return [alpha * (1 - alpha) ** i for i in range(depth)]


def predict_mode(traj):
    """Most frequent state; ties go to the lowest (least mastered) state."""
    counts = Counter(_states(traj).tolist())
    top = max(counts.values())
    return float(min(state for state, c in counts.items() if c == top))


def score_to_label(score, num_states):
    """Class 2 iff ``score >= (1 + num_states) / 2``, else class 1.

    Gives the threshold 2 for three states and 1.5 for two.
    """
    if num_states < 1:
        raise InputDomainError("num_states must be >= 1")
    if not 1 <= score <= num_states:
        raise InputDomainError(f"score {score!r} outside [1, {num_states}]")
    return 2 if score >= (1 + num_states) / 2 else 1


@dataclass(frozen=True)
class PredictorSpec:
    method: str
    window_p: int = None
    alpha: float = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputDomainError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "window":
            if self.window_p is None or self.window_p < 1:
                raise InputDomainError("method 'window' needs window_p >= 1")
        if self.method == "exp_smooth":
            if self.alpha is None:
                raise InputDomainError("method 'exp_smooth' needs alpha")
            _check_alpha(self.alpha)


@dataclass(frozen=True)
class Prediction:
    score: float
    label: int


def predict(traj, spec, num_states):
    """Score ``traj`` with ``spec`` and map the score to a class label."""
    if spec.method == "naive":
        score = predict_naive(traj)
    elif spec.method == "average":
        score = predict_average(traj)
    elif spec.method == "window":
        score = predict_window(traj, spec.window_p)
    elif spec.method == "exp_smooth":
        score = predict_exp_smooth(traj, spec.alpha)
    else:
        score = predict_mode(traj)
    return Prediction(score, score_to_label(score, num_states))
