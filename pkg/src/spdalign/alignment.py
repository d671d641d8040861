"""Pre-alignment strategies for cross-subject transfer.

The full strategy has three steps operating on tangent-space features:

1. recenter: each subject's covariances are whitened by that subject's own
   log-Euclidean mean and log-mapped, so every subject's cloud is centred at
   the identity;
2. rescale: feature blocks are divided by their mean row norm so training
   and test distributions share a common spread;
3. rotate: a truncated-SVD Procrustes map, fitted on class-mean anchor
   points of the training set and a labelled calibration subset, aligns
   evaluation features with the training space.

Two ablation baselines are provided: Euclidean recentering against the
arithmetic mean of one class's trials ("adaptive-mean" alignment, recenter
only), and pooled tangent-space alignment (rescale and rotate without
per-subject recentering).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import manifold
from .covariance import ShrinkageConfig, shrunk_covariances
from .errors import DataError
from .manifold import (
    half_vectorize,
    log_euclidean_mean,
    matrix_invsqrt,
    matrix_log,
)

__all__ = [
    "SubjectFeatureBlock",
    "RotationModel",
    "AlignmentModel",
    "recenter_subject",
    "recenter_at",
    "rescale_block",
    "fit_rotation",
    "apply_rotation",
    "align_adaptive_m",
    "align_ts_baseline",
    "save_alignment_model",
    "load_alignment_model",
]

VARIANCE_THRESHOLD = 0.999


@dataclass(frozen=True)
class SubjectFeatureBlock:
    """Per-subject feature rows with aligned labels."""

    subject_id: str
    condition: str
    features: np.ndarray     # (n, d)
    labels: tuple[str, ...]  # len n

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError(f"features must be (n, d), got {self.features.shape}")
        if self.features.shape[0] != len(self.labels):
            raise ValueError(
                f"{self.features.shape[0]} feature rows vs {len(self.labels)} labels"
            )


@dataclass(frozen=True)
class RotationModel:
    """Truncated Procrustes rotation fitted on class anchors.

    ``u_trunc`` and ``v_trunc`` are the left/right singular blocks retained
    to explain at least ``variance_threshold`` of the squared-singular-value
    mass of the anchor cross-product matrix; the rotation applied to feature
    rows is ``R = u_trunc @ v_trunc.T``. At full rank R is orthogonal.
    """

    u_trunc: np.ndarray
    v_trunc: np.ndarray
    n_components: int
    variance_threshold: float = VARIANCE_THRESHOLD

    @property
    def rotation(self) -> np.ndarray:
        return self.u_trunc @ self.v_trunc.T


def recenter_subject(covs) -> tuple[np.ndarray, np.ndarray]:
    """Recenter one subject's covariances at its own log-Euclidean mean.

    Returns ``(features, M)`` where ``M`` is the subject's log-Euclidean
    mean and each row of ``features`` is
    ``half_vectorize(logm(M^{-1/2} C_i M^{-1/2}))`` -- the tangent
    projection at identity after whitening, so all subjects share the
    identity as their common reference.
    """
    stack = np.asarray(list(covs) if not isinstance(covs, np.ndarray) else covs,
                       dtype=np.float64)
    if stack.ndim == 2:
        stack = stack[np.newaxis]
    M = log_euclidean_mean(stack)
    return recenter_at(stack, M), M


def recenter_at(covs, M: np.ndarray) -> np.ndarray:
    """Whiten covariances by a fixed reference and log-map at identity."""
    stack = np.asarray(list(covs) if not isinstance(covs, np.ndarray) else covs,
                       dtype=np.float64)
    if stack.ndim == 2:
        stack = stack[np.newaxis]
    inv_sqrt = matrix_invsqrt(M)
    out = np.empty((stack.shape[0], manifold.tangent_dim(stack.shape[1])))
    for i, C in enumerate(stack):
        W = inv_sqrt @ C @ inv_sqrt
        out[i] = half_vectorize(matrix_log(0.5 * (W + W.T)))
    return out


def rescale_block(features: np.ndarray) -> tuple[np.ndarray, float]:
    """Divide every row by the block's mean Euclidean row norm.

    Returns ``(scaled, scale)``; afterwards the mean row norm is exactly 1.
    Raises on an all-zero block, where no scale exists.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"features must be a nonempty (n, d) array, got {X.shape}")
    scale = float(np.mean(np.linalg.norm(X, axis=1)))
    if scale <= 0.0:
        raise DataError("cannot rescale an all-zero feature block")
    return X / scale, scale


def _class_anchor_matrix(features: np.ndarray, labels, classes) -> np.ndarray:
    """Class-mean anchor points stacked as columns of a (d, K) matrix."""
    labels = np.asarray(labels)
    cols = []
    for cls in classes:
        mask = labels == cls
        if not np.any(mask):
            raise DataError(f"class {cls!r} has no samples; cannot fit rotation")
        cols.append(features[mask].mean(axis=0))
    return np.stack(cols, axis=1)


def fit_rotation(train_features: np.ndarray, train_labels,
                 calib_features: np.ndarray, calib_labels,
                 variance_threshold: float = VARIANCE_THRESHOLD) -> RotationModel:
    """Fit the supervised rotation from training and calibration anchors.

    Per-class mean feature vectors form (d, K) anchor matrices; their
    cross-product ``A_train @ A_calib.T`` is decomposed by SVD and the
    smallest number of singular pairs whose squared singular values reach
    ``variance_threshold`` of the total is retained. Every class present in
    either set must be present in both.
    """
    train_features = np.asarray(train_features, dtype=np.float64)
    calib_features = np.asarray(calib_features, dtype=np.float64)
    if train_features.shape[1] != calib_features.shape[1]:
        raise ValueError(
            f"feature dimension mismatch: train {train_features.shape[1]} vs "
            f"calibration {calib_features.shape[1]}"
        )
    classes = sorted(set(train_labels) | set(calib_labels))
    a_train = _class_anchor_matrix(train_features, train_labels, classes)
    a_calib = _class_anchor_matrix(calib_features, calib_labels, classes)

    # SVD of the (d, d) cross-product via its rank-K factors: with
    # A_t = Q_t R_t and A_c = Q_c R_c, the nonzero singular structure of
    # A_t A_c^T is carried by the K x K core R_t R_c^T.
    q_train, r_train = np.linalg.qr(a_train)
    q_calib, r_calib = np.linalg.qr(a_calib)
    u_core, sing, vt_core = np.linalg.svd(r_train @ r_calib.T)
    U = q_train @ u_core
    V = q_calib @ vt_core.T

    power = sing ** 2
    total = power.sum()
    if total <= 0.0:
        raise DataError("anchor cross-product is zero; rotation undefined")
    share = np.cumsum(power) / total
    n_comp = int(np.searchsorted(share, variance_threshold - 1e-15) + 1)
    n_comp = min(n_comp, len(sing))
    return RotationModel(
        u_trunc=np.ascontiguousarray(U[:, :n_comp]),
        v_trunc=np.ascontiguousarray(V[:, :n_comp]),
        n_components=n_comp,
        variance_threshold=variance_threshold,
    )


def apply_rotation(model: RotationModel, features: np.ndarray) -> np.ndarray:
    """Map each feature row ``v`` to ``R v``."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.u_trunc.shape[0]:
        raise ValueError(
            f"features must be (m, {model.u_trunc.shape[0]}), got {X.shape}"
        )
    # R v = U (V^T v); avoid forming the (d, d) rotation.
    return (X @ model.v_trunc) @ model.u_trunc.T


def align_adaptive_m(trials, reference_label: str = "adaptive",
                     shrinkage: ShrinkageConfig | None = None,
                     reference: np.ndarray | None = None):
    """Euclidean recentering of a subject's signals at one class's mean.

    The arithmetic mean R of the subject's shrunk covariances from
    ``reference_label`` trials defines the whitening ``E -> R^{-1/2} E``
    applied to every trial (equivalently ``C -> R^{-1/2} C R^{-1/2}``). Pass
    a precomputed ``reference`` to reuse a mean estimated elsewhere (e.g.
    from a calibration subset).

    Returns a new trial set of the same type (``.replace_data`` protocol)
    or, for a plain array stack, the transformed stack.
    """
    data = np.asarray(getattr(trials, "data", trials), dtype=np.float64)
    if data.ndim != 3:
        raise ValueError(f"expected (t, e, s) trials, got {data.shape}")
    if reference is None:
        labels = np.asarray(getattr(trials, "labels", ()))
        mask = labels == reference_label
        if not np.any(mask):
            raise DataError(
                f"subject has no {reference_label!r} trials; cannot align"
            )
        covs = shrunk_covariances(data[mask], shrinkage)
        reference = covs.mean(axis=0)
    transform = matrix_invsqrt(reference)
    aligned = np.einsum("ij,tjs->tis", transform, data)
    if hasattr(trials, "replace_data"):
        return trials.replace_data(aligned)
    return aligned


def align_ts_baseline(train_cov_blocks, test_covs) -> tuple[list[np.ndarray], np.ndarray, np.ndarray, np.ndarray]:
    """Pooled-recentering baseline: one reference for all training subjects.

    All training subjects' covariances are pooled and recentred with a single
    log-Euclidean mean (no per-subject alignment); the test subject is
    recentred with its own pooled mean. Rescaling and rotation are then
    applied downstream exactly as in the full per-subject strategy.

    Returns ``(train_feature_blocks, test_features, M_train, M_test)``.
    """
    blocks = [np.asarray(b, dtype=np.float64) for b in train_cov_blocks]
    if not blocks:
        raise ValueError("need at least one training block")
    pooled = np.concatenate(blocks, axis=0)
    m_train = log_euclidean_mean(pooled)
    train_feats = [recenter_at(b, m_train) for b in blocks]
    test_feats, m_test = recenter_subject(test_covs)
    return train_feats, test_feats, m_train, m_test


@dataclass
class AlignmentModel:
    """Fitted alignment state for experiment resumption.

    Holds the per-subject recentering references, the training-block scale,
    and the fitted rotation (if any).
    """

    n_channels: int
    feature_dim: int
    subject_references: dict[str, np.ndarray] = field(default_factory=dict)
    scale: float = 1.0
    rotation: RotationModel | None = None

    def to_payload(self) -> dict:
        payload = {
            "schema_version": 1,
            "n_channels": self.n_channels,
            "feature_dim": self.feature_dim,
            "subject_references": {
                key: ref.tolist() for key, ref in self.subject_references.items()
            },
            "scale": self.scale,
            "rotation": None,
        }
        if self.rotation is not None:
            payload["rotation"] = {
                "u_trunc": self.rotation.u_trunc.tolist(),
                "v_trunc": self.rotation.v_trunc.tolist(),
                "n_components": self.rotation.n_components,
                "variance_threshold": self.rotation.variance_threshold,
            }
        return payload

    @classmethod
    def from_payload(cls, payload: dict) -> "AlignmentModel":
        if payload.get("schema_version") != 1:
            raise DataError(
                f"unsupported alignment-model schema {payload.get('schema_version')!r}"
            )
        rotation = None
        if payload.get("rotation") is not None:
            rot = payload["rotation"]
            rotation = RotationModel(
                u_trunc=np.asarray(rot["u_trunc"], dtype=np.float64),
                v_trunc=np.asarray(rot["v_trunc"], dtype=np.float64),
                n_components=int(rot["n_components"]),
                variance_threshold=float(rot["variance_threshold"]),
            )
        return cls(
            n_channels=int(payload["n_channels"]),
            feature_dim=int(payload["feature_dim"]),
            subject_references={
                key: np.asarray(ref, dtype=np.float64)
                for key, ref in payload["subject_references"].items()
            },
            scale=float(payload["scale"]),
            rotation=rotation,
        )


def save_alignment_model(model: AlignmentModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_payload(), sort_keys=True))


def load_alignment_model(path) -> AlignmentModel:
    return AlignmentModel.from_payload(json.loads(Path(path).read_text()))
