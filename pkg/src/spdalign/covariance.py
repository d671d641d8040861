"""Trial covariance estimation and Ledoit-Wolf diagonal loading.

Short windows (s = 100 samples over 100+ channels) make raw trial
covariances rank-deficient, so shrinkage toward a scaled identity is applied
per trial before any manifold operation. Signals are assumed zero-mean after
filtering: no channel mean is subtracted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = [
    "ShrinkageConfig",
    "trial_covariance",
    "ledoit_wolf_gamma",
    "ledoit_wolf_shrink",
    "shrink_covariance",
    "shrunk_covariances",
]


@dataclass(frozen=True)
class ShrinkageConfig:
    """Diagonal-loading configuration.

    ``gamma="auto"`` estimates the shrinkage intensity per trial with the
    Ledoit-Wolf closed form; an explicit float in [0, 1] fixes it. ``beta``
    and the generic-matrix transfer term exist for completeness but are
    pinned to the diagonal-loading case (beta = 0, no generic matrix) in
    every shipped configuration. ``target`` selects the shrinkage target:
    ``scaled-identity`` (mu * I with mu the mean eigenvalue, the form the
    Ledoit-Wolf estimator is defined against) or plain ``identity``.
    """

    gamma: float | str = "auto"
    beta: float = 0.0
    scaling: float = 1.0
    generic_matrix: np.ndarray | None = None
    target: str = "scaled-identity"

    def __post_init__(self):
        if isinstance(self.gamma, str):
            if self.gamma != "auto":
                raise ValueError(f"gamma must be 'auto' or a float, got {self.gamma!r}")
        elif not 0.0 <= float(self.gamma) <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.beta != 0.0:
            raise ValueError("only beta = 0 (diagonal loading) is supported")
        if self.target not in ("scaled-identity", "identity"):
            raise ValueError(f"unknown shrinkage target {self.target!r}")


def _trial_data(E) -> np.ndarray:
    data = np.asarray(getattr(E, "data", E), dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"trial data must be 2-D (channels x samples), got {data.shape}")
    if data.shape[0] < 2:
        raise ValueError(f"need at least 2 channels, got {data.shape[0]}")
    if data.shape[1] < 2:
        raise ValueError(f"need at least 2 samples, got {data.shape[1]}")
    if not np.all(np.isfinite(data)):
        raise ValueError("trial data contains non-finite entries")
    return data


def trial_covariance(E) -> np.ndarray:
    """Spatial covariance of one trial: ``E E^T / (s - 1)``.

    No channel mean subtraction. The output is symmetrised exactly; it is
    PSD but may be singular (s <= e) and must be shrunk before SPD use.
    """
    data = _trial_data(E)
    s = data.shape[1]
    C = data @ data.T / (s - 1)
    return 0.5 * (C + C.T)


def ledoit_wolf_gamma(E) -> float:
    """Ledoit-Wolf optimal shrinkage intensity from a trial's samples.

    Closed-form estimator for shrinkage toward the scaled identity, on
    uncentered samples (columns of ``E``), clipped to [0, 1]. A trial with a
    single sample carries no information about estimator variance and forces
    gamma = 1 (maximal shrinkage).
    """
    data = np.asarray(getattr(E, "data", E), dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"trial data must be 2-D, got {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError("trial data contains non-finite entries")
    e, s = data.shape
    if not np.any(data):
        raise DataError("degenerate all-zero trial: covariance undefined")
    if s < 2:
        return 1.0
    # Biased (1/s) second-moment matrix of the raw samples.
    S = data @ data.T / s
    mu = np.trace(S) / e
    delta2 = np.sum((S - mu * np.eye(e)) ** 2) / e
    if delta2 <= 0.0:
        # S is already a multiple of the identity; nothing to shrink.
        return 0.0
    # Mean squared Frobenius deviation of per-sample outer products from S:
    # (1/s^2) mean_k ||x_k x_k^T - S||_F^2 / e, expanded so no (s, s) or
    # per-sample (e, e) intermediates are formed.
    sq_norms = np.sum(data ** 2, axis=0)     # ||x_k||^2 per sample
    beta2 = (np.sum(sq_norms ** 2) - s * np.sum(S * S)) / (s ** 2 * e)
    beta2 = min(beta2, delta2)
    gamma = beta2 / delta2
    return float(min(max(gamma, 0.0), 1.0))


def ledoit_wolf_shrink(C_sample: np.ndarray, E,
                       target: str = "scaled-identity") -> tuple[np.ndarray, float]:
    """Shrink a sample covariance toward (scaled) identity, Ledoit-Wolf gamma.

    Returns ``((1 - gamma) C + gamma * mu * I, gamma)`` with
    ``mu = trace(C) / e`` under the default target, or ``mu = 1`` for the
    plain-identity target. The output is strictly SPD whenever gamma > 0.
    """
    gamma = ledoit_wolf_gamma(E)
    return shrink_covariance(C_sample, gamma, target=target), gamma


def shrink_covariance(C_sample: np.ndarray, gamma: float,
                      target: str = "scaled-identity") -> np.ndarray:
    """Convex combination ``(1 - gamma) C + gamma * mu * I``."""
    C = np.asarray(C_sample, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"covariance must be square, got {C.shape}")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    e = C.shape[0]
    if target == "scaled-identity":
        mu = np.trace(C) / e
    elif target == "identity":
        mu = 1.0
    else:
        raise ValueError(f"unknown shrinkage target {target!r}")
    return (1.0 - gamma) * C + gamma * mu * np.eye(e)


def shrunk_covariances(trials, config: ShrinkageConfig | None = None) -> np.ndarray:
    """Per-trial shrunk covariances for a stack of trials.

    ``trials`` is a ``(t, e, s)`` array or an object exposing one as
    ``.data`` (a TrialSet). Returns a ``(t, e, e)`` stack of SPD matrices.
    """
    config = config or ShrinkageConfig()
    data = np.asarray(getattr(trials, "data", trials), dtype=np.float64)
    if data.ndim != 3:
        raise ValueError(f"expected (t, e, s) trials, got {data.shape}")
    out = np.empty((data.shape[0], data.shape[1], data.shape[1]))
    for i, trial in enumerate(data):
        C = trial_covariance(trial)
        if config.gamma == "auto":
            out[i], _ = ledoit_wolf_shrink(C, trial, target=config.target)
        else:
            out[i] = shrink_covariance(C, float(config.gamma), target=config.target)
    return out
