"""CSP spatial filtering: filter estimation, application, log-variance features.

Filters maximise the ratio of class variances, obtained from the generalized
symmetric eigenproblem ``C1 w = lambda (C1 + C2) w`` on class-average
covariances. Eigenvalues lie in (0, 1); values far from 0.5 are the most
discriminative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError

__all__ = ["SpatialFilter", "fit_csp", "apply_filter", "log_variance_features"]


@dataclass(frozen=True)
class SpatialFilter:
    """Fitted spatial filters.

    ``weights`` has one filter per column, normalised so that
    ``W^T (C1 + C2) W = I``. ``eigenvalues`` holds the generalized
    eigenvalues in selection order (most discriminative first).
    """

    weights: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def n_filters(self) -> int:
        return self.weights.shape[1]


def _class_mean(covs, name: str) -> np.ndarray:
    stack = np.asarray(list(covs) if not isinstance(covs, np.ndarray) else covs,
                       dtype=np.float64)
    if stack.ndim == 2:
        stack = stack[np.newaxis]
    if stack.ndim != 3 or stack.shape[0] == 0:
        raise ValueError(f"{name} must be a nonempty list of square matrices")
    return stack.mean(axis=0)


def fit_csp(class1_covs, class2_covs, n_filters: int | None = None) -> SpatialFilter:
    """Fit CSP filters from per-class lists of (shrunk, SPD) trial covariances.

    Class-average covariances are arithmetic means of the inputs. Eigenpairs
    of ``C1 w = lambda (C1 + C2) w`` are ranked by discriminability
    ``|lambda - 0.5|`` descending (ties: larger lambda first, then original
    index), which pairs the extremes of the spectrum and is invariant under
    swapping the class labels. ``n_filters=None`` keeps every filter.

    Each filter's largest-magnitude entry is made positive so the output is
    deterministic across eigensolvers.
    """
    C1 = _class_mean(class1_covs, "class1_covs")
    C2 = _class_mean(class2_covs, "class2_covs")
    if C1.shape != C2.shape:
        raise ValueError(f"dimension mismatch: {C1.shape} vs {C2.shape}")
    e = C1.shape[0]
    f = e if n_filters is None else int(n_filters)
    if not 1 <= f <= e:
        raise ValueError(f"n_filters must lie in [1, {e}], got {f}")
    total = C1 + C2
    try:
        lam, W = scipy.linalg.eigh(0.5 * (C1 + C1.T), 0.5 * (total + total.T))
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise NumericalError(f"CSP eigenproblem is degenerate: {exc}") from exc
    order = sorted(range(e), key=lambda i: (-abs(lam[i] - 0.5), -lam[i], i))
    keep = order[:f]
    lam, W = lam[keep], W[:, keep]
    # Deterministic sign: largest-magnitude entry of each filter positive.
    signs = np.sign(W[np.abs(W).argmax(axis=0), np.arange(f)])
    signs[signs == 0] = 1.0
    return SpatialFilter(weights=W * signs, eigenvalues=lam)


def apply_filter(filt: SpatialFilter, E) -> np.ndarray:
    """Spatially filter a trial: returns ``W^T E`` with shape (f, s)."""
    data = np.asarray(getattr(E, "data", E), dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"trial data must be 2-D, got {data.shape}")
    if data.shape[0] != filt.n_channels:
        raise ValueError(
            f"channel mismatch: filter expects {filt.n_channels}, trial has "
            f"{data.shape[0]}"
        )
    return filt.weights.T @ data


def log_variance_features(E_filt: np.ndarray) -> np.ndarray:
    """Log of the per-row variance of a filtered trial (1/(s-1) normalised).

    Equals ``ln diag(trial_covariance(E_filt))``. A zero-variance row signals
    a dead channel and raises.
    """
    data = np.asarray(getattr(E_filt, "data", E_filt), dtype=np.float64)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ValueError(f"filtered trial must be (f, s) with s >= 2, got {data.shape}")
    var = np.sum(data * data, axis=1) / (data.shape[1] - 1)
    if np.any(var <= 0.0):
        dead = np.flatnonzero(var <= 0.0)
        raise ValueError(f"zero-variance filtered rows {dead.tolist()} (dead channel?)")
    return np.log(var)
