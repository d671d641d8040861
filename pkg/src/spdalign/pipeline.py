"""Feature pipelines: spatial-Riemannian fusion and PCA dimension matching.

Two fusion layouts are supported. The sequential path spatially filters each
trial, then tangent-maps the filtered covariance. The parallel path derives
spatial features and tangent features independently and concatenates them;
without per-subject recentering the spatial branch is log-variance, with it
both branches are recentred tangent features (which doubles the dimension).

PCA here is deliberately minimal and deterministic: mean-centred principal
directions with a fixed sign convention, and round-half-to-even retained
counts so the bookkeeping reproduces published dimensionalities exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from .covariance import ShrinkageConfig, shrunk_covariances
from .errors import ConfigError
from .manifold import tangent_dim, tangent_project_many
from .alignment import recenter_subject, recenter_at
from .spatial import SpatialFilter, apply_filter, log_variance_features

__all__ = [
    "PipelineConfig",
    "PcaModel",
    "feature_dimension",
    "features_sequential",
    "features_parallel",
    "fit_pca",
    "apply_pca",
    "pca_component_count",
    "cross_montage_reduce",
    "filtered_covariances",
]

FUSIONS = ("sequential", "parallel")
ALIGNMENTS = ("none", "adaptive_m", "ts", "itsa")
ADAPTIVE_M_TEST_MODES = ("calibration", "skip")


@dataclass(frozen=True)
class PipelineConfig:
    """Experiment-level pipeline settings.

    ``montage`` names the channels of the (possibly reduced) test view;
    ``pca_retain`` is required whenever train and test dimensions differ.
    ``adaptive_m_test`` picks how the held-out subject is transformed under
    the adaptive-mean baseline: estimate the reference from the calibration
    fold's labelled trials, or skip the test-side transform.
    """

    fusion: str = "sequential"
    alignment: str = "itsa"
    montage: tuple[str, ...] | None = None
    pca_retain: float | None = None
    seed: int = 0
    n_filters: int | None = None
    standardize: bool = True
    svm_c: float = 1.0
    adaptive_m_test: str = "calibration"
    shrinkage_target: str = "scaled-identity"

    def __post_init__(self):
        if self.fusion not in FUSIONS:
            raise ConfigError(f"must be one of {FUSIONS}, got {self.fusion!r}",
                              field="pipeline.fusion")
        if self.alignment not in ALIGNMENTS:
            raise ConfigError(f"must be one of {ALIGNMENTS}, got {self.alignment!r}",
                              field="pipeline.alignment")
        if self.pca_retain is not None and not 0.0 < self.pca_retain <= 1.0:
            raise ConfigError(f"must lie in (0, 1], got {self.pca_retain}",
                              field="pipeline.pca_retain")
        if self.adaptive_m_test not in ADAPTIVE_M_TEST_MODES:
            raise ConfigError(
                f"must be one of {ADAPTIVE_M_TEST_MODES}, got {self.adaptive_m_test!r}",
                field="pipeline.adaptive_m_test")
        if self.n_filters is not None and self.n_filters < 1:
            raise ConfigError(f"must be >= 1, got {self.n_filters}",
                              field="pipeline.n_filters")
        if self.svm_c <= 0:
            raise ConfigError(f"must be > 0, got {self.svm_c}", field="pipeline.svm_c")

    def shrinkage(self) -> ShrinkageConfig:
        return ShrinkageConfig(target=self.shrinkage_target)

    def fingerprint(self) -> dict:
        data = asdict(self)
        data["montage"] = list(self.montage) if self.montage else None
        return data


def feature_dimension(fusion: str, alignment: str, n_channels: int,
                      n_filters: int | None = None) -> int:
    """Feature dimension produced by a fusion/alignment combination.

    Sequential features are half-vectorised filtered covariances,
    ``f (f + 1) / 2``. Parallel features concatenate the spatial branch with
    raw-covariance tangent features: log-variance (``f``) without recentred
    alignment, a second tangent block (``f (f + 1) / 2``) with it.
    """
    f = n_channels if n_filters is None else n_filters
    if fusion == "sequential":
        return tangent_dim(f)
    if fusion == "parallel":
        if alignment in ("ts", "itsa"):
            return tangent_dim(f) + tangent_dim(n_channels)
        return f + tangent_dim(n_channels)
    raise ValueError(f"unknown fusion {fusion!r}")


def filtered_covariances(trials, filt: SpatialFilter,
                         shrinkage: ShrinkageConfig | None = None) -> np.ndarray:
    """Shrunk covariances of spatially filtered trials, shape (t, f, f)."""
    data = np.asarray(getattr(trials, "data", trials), dtype=np.float64)
    if data.ndim != 3:
        raise ValueError(f"expected (t, e, s) trials, got {data.shape}")
    filtered = np.einsum("ef,tes->tfs", filt.weights, data)
    return shrunk_covariances(filtered, shrinkage)


def features_sequential(trials, filt: SpatialFilter,
                        shrinkage: ShrinkageConfig | None = None,
                        reference: np.ndarray | None = None,
                        recentred: bool = False):
    """Sequential fusion: filter, covariance, tangent map.

    With ``recentred=False`` the covariances are tangent-projected at
    ``reference`` (the pooled training Frechet mean). With
    ``recentred=True`` they are whitened-and-logged at ``reference`` (or at
    the set's own log-Euclidean mean when ``reference`` is None, the
    per-subject path), returning ``(features, reference_used)``.
    """
    covs = filtered_covariances(trials, filt, shrinkage)
    if recentred:
        if reference is None:
            return recenter_subject(covs)
        return recenter_at(covs, reference), reference
    if reference is None:
        raise ValueError("reference is required for the non-recentred path")
    return tangent_project_many(covs, reference), reference


def features_parallel(trials, filt: SpatialFilter,
                      shrinkage: ShrinkageConfig | None = None,
                      spatial_branch: str = "logvar",
                      filtered_reference: np.ndarray | None = None,
                      raw_reference: np.ndarray | None = None):
    """Parallel fusion: spatial branch and raw-covariance branch, concatenated.

    ``spatial_branch="logvar"`` takes log-variance of the filtered trials
    and tangent-projects raw covariances at ``raw_reference`` (pooled
    training Frechet mean). ``spatial_branch="tangent"`` recentres both the
    filtered-signal covariances and the raw covariances, each branch at its
    own reference (the per-subject log-Euclidean mean when None).

    Returns ``(features, (filtered_reference, raw_reference))`` where the
    references are the ones actually used (None where not applicable).
    """
    data = np.asarray(getattr(trials, "data", trials), dtype=np.float64)
    if data.ndim != 3:
        raise ValueError(f"expected (t, e, s) trials, got {data.shape}")
    raw_covs = shrunk_covariances(data, shrinkage)
    if spatial_branch == "logvar":
        if raw_reference is None:
            raise ValueError("raw_reference is required for the logvar branch")
        spatial = np.stack([log_variance_features(apply_filter(filt, E)) for E in data])
        riemann = tangent_project_many(raw_covs, raw_reference)
        return np.concatenate([spatial, riemann], axis=1), (None, raw_reference)
    if spatial_branch == "tangent":
        filt_covs = filtered_covariances(data, filt, shrinkage)
        if filtered_reference is None:
            spatial, filtered_reference = recenter_subject(filt_covs)
        else:
            spatial = recenter_at(filt_covs, filtered_reference)
        if raw_reference is None:
            riemann, raw_reference = recenter_subject(raw_covs)
        else:
            riemann = recenter_at(raw_covs, raw_reference)
        return (np.concatenate([spatial, riemann], axis=1),
                (filtered_reference, raw_reference))
    raise ValueError(f"unknown spatial_branch {spatial_branch!r}")


@dataclass(frozen=True)
class PcaModel:
    """Deterministic PCA: mean and orthonormal components (d, k)."""

    mean: np.ndarray
    components: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[1]


def pca_component_count(dim: int, retain: float) -> int:
    """Retained component count: round-half-to-even of ``retain * dim``.

    This is the rounding rule consistent with published reductions such as
    5886 -> 1472 and 5994 -> 1498 at 25%, and 5886 -> 59 / 5994 -> 60 at 1%.
    """
    if not 0.0 < retain <= 1.0:
        raise ValueError(f"retain must lie in (0, 1], got {retain}")
    return max(1, round(retain * dim))


def fit_pca(train_features: np.ndarray, retain: float | None = None,
            n_components: int | None = None) -> PcaModel:
    """Fit PCA on mean-centred rows, deterministic sign and order.

    Components are the top principal directions in descending explained
    variance; each component's largest-magnitude loading is made positive.
    ``n_components`` overrides the retain-fraction count; either way the
    count is clamped to ``[1, min(n - 1, d)]``.
    """
    X = np.asarray(train_features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"need at least 2 rows of features, got shape {X.shape}")
    n, d = X.shape
    if n_components is None:
        if retain is None:
            raise ValueError("either retain or n_components is required")
        n_components = pca_component_count(d, retain)
    k = int(min(max(1, n_components), min(n - 1, d)))
    mean = X.mean(axis=0)
    centred = X - mean
    # Economy SVD; right singular vectors are the principal directions.
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    components = vt[:k].T
    signs = np.sign(components[np.abs(components).argmax(axis=0),
                               np.arange(k)])
    signs[signs == 0] = 1.0
    return PcaModel(mean=mean, components=np.ascontiguousarray(components * signs))


def apply_pca(model: PcaModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.mean.shape[0]:
        raise ValueError(
            f"features must be (n, {model.mean.shape[0]}), got {X.shape}"
        )
    return (X - model.mean) @ model.components


def cross_montage_reduce(train_features: np.ndarray, test_features: np.ndarray,
                         retain: float) -> tuple[np.ndarray, np.ndarray,
                                                 PcaModel, PcaModel]:
    """Match train/test feature dimensions with two independent PCA models.

    The retained count ``k`` comes from the training dimension; the test set
    is reduced to the same ``k`` by a PCA fitted on the (unlabelled) test
    features themselves. Infeasible reductions (k exceeding the test
    dimension) are rejected up front, before any decomposition.
    """
    train_features = np.asarray(train_features, dtype=np.float64)
    test_features = np.asarray(test_features, dtype=np.float64)
    k = pca_component_count(train_features.shape[1], retain)
    d_test = test_features.shape[1]
    if k > d_test:
        raise ConfigError(
            f"cannot reduce to {k} components (retain {retain} of "
            f"{train_features.shape[1]} training dims): test dimension is "
            f"only {d_test}", field="pipeline.pca_retain")
    max_rank = min(train_features.shape[0], test_features.shape[0]) - 1
    if k > max_rank:
        raise ConfigError(
            f"cannot extract {k} components from {train_features.shape[0]} "
            f"training / {test_features.shape[0]} test rows",
            field="pipeline.pca_retain")
    train_model = fit_pca(train_features, n_components=k)
    test_model = fit_pca(test_features, n_components=k)
    return (apply_pca(train_model, train_features),
            apply_pca(test_model, test_features),
            train_model, test_model)
