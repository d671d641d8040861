"""Leave-one-subject-out evaluation with nested 2-fold calibration.

For each held-out subject, filters, references, PCA, the feature scaler and
the SVM are fitted on the remaining subjects only. The held-out subject's
features are split into two stratified folds; each fold in turn calibrates
the supervised rotation while the other is evaluated, and the subject score
is the mean of the two fold F1 scores. Training-side fitting never sees the
evaluation fold.

Cross-montage runs subset the held-out subject to a reduced channel set;
test-side filters and references are then fitted on the reduced view of the
training subjects (never on test labels), and PCA matches the dimensions.
"""

from __future__ import annotations

import dataclasses
import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from . import alignment as align
from .classify import f1_score, standardize_apply, standardize_fit, train_svm
from .covariance import shrunk_covariances
from .dataio import (LABEL_ADAPTIVE, MontageSpec, TrialSet, dataset_fingerprint,
                     subset_montage)
from .errors import ConfigError, DataError
from .manifold import frechet_mean, log_euclidean_mean, tangent_project_many
from .pipeline import (PipelineConfig, apply_pca, feature_dimension,
                       filtered_covariances, fit_pca, pca_component_count)
from .spatial import SpatialFilter, apply_filter, fit_csp, log_variance_features

__all__ = [
    "EvalReport",
    "AblationReport",
    "LearningCurveReport",
    "run_loso",
    "run_ablation",
    "run_learning_curve",
    "fit_performance_curves",
    "eval_report_csv",
]

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# reports


def _mean_sd_ci(values: np.ndarray) -> tuple[float, float, tuple[float, float]]:
    mean = float(values.mean())
    if values.size < 2:
        return mean, 0.0, (mean, mean)
    sd = float(values.std(ddof=1))
    half = float(sstats.t.ppf(0.975, df=values.size - 1) * sd / np.sqrt(values.size))
    return mean, sd, (mean - half, mean + half)


@dataclass
class EvalReport:
    """Aggregated LOSO results; serialisable to versioned JSON.

    ``runtime_seconds`` is informational only and deliberately excluded from
    the JSON payload so reruns with identical config and seed are
    byte-identical.
    """

    condition: str
    pipeline: dict
    seed: int
    dataset_hash: str
    subject_ids: list[str]
    per_subject_f1: list[float]
    per_fold_f1: list[list[float]]
    mean_f1: float
    sd_f1: float
    ci95: list[float]
    schema_version: int = SCHEMA_VERSION
    runtime_seconds: float | None = None

    def to_payload(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "condition": self.condition,
            "pipeline": self.pipeline,
            "seed": self.seed,
            "dataset_hash": self.dataset_hash,
            "subject_ids": self.subject_ids,
            "per_subject_f1": self.per_subject_f1,
            "per_fold_f1": self.per_fold_f1,
            "mean_f1": self.mean_f1,
            "sd_f1": self.sd_f1,
            "ci95": self.ci95,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "EvalReport":
        if payload.get("schema_version") != SCHEMA_VERSION:
            raise DataError(f"unsupported report schema "
                            f"{payload.get('schema_version')!r}")
        args = {k: payload[k] for k in (
            "condition", "pipeline", "seed", "dataset_hash", "subject_ids",
            "per_subject_f1", "per_fold_f1", "mean_f1", "sd_f1", "ci95")}
        return cls(**args)


def eval_report_csv(report: EvalReport) -> str:
    """Flat per-subject scores: subject, fold_a, fold_b, f1."""
    lines = ["subject_id,fold_a_f1,fold_b_f1,f1"]
    for sid, folds, f1 in zip(report.subject_ids, report.per_fold_f1,
                              report.per_subject_f1):
        lines.append(f"{sid},{folds[0]:.6f},{folds[1]:.6f},{f1:.6f}")
    return "\n".join(lines) + "\n"


@dataclass
class AblationReport:
    condition: str
    fusion: str
    seed: int
    dataset_hash: str
    strategies: dict[str, EvalReport]
    schema_version: int = SCHEMA_VERSION

    def to_payload(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "condition": self.condition,
            "fusion": self.fusion,
            "seed": self.seed,
            "dataset_hash": self.dataset_hash,
            "strategies": {name: rep.to_payload()
                           for name, rep in self.strategies.items()},
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "AblationReport":
        if payload.get("schema_version") != SCHEMA_VERSION:
            raise DataError(f"unsupported report schema "
                            f"{payload.get('schema_version')!r}")
        return cls(
            condition=payload["condition"], fusion=payload["fusion"],
            seed=payload["seed"], dataset_hash=payload["dataset_hash"],
            strategies={name: EvalReport.from_payload(rep)
                        for name, rep in payload["strategies"].items()},
        )


@dataclass
class LearningCurveReport:
    seed: int
    dataset_hash: str
    pipeline: dict
    sizes: list[int]
    folds: int
    per_subject: list[dict]
    aggregate: dict
    schema_version: int = SCHEMA_VERSION

    def to_payload(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# engine internals


def _hash_arrays(*items) -> str:
    digest = hashlib.sha256()
    for item in items:
        if item is None:
            digest.update(b"\x00none")
        elif isinstance(item, np.ndarray) and item.dtype.kind in "fiub":
            digest.update(np.ascontiguousarray(item, dtype="<f8").tobytes())
        elif isinstance(item, np.ndarray):
            digest.update(",".join(map(str, item.ravel().tolist())).encode())
        else:
            digest.update(repr(item).encode())
    return digest.hexdigest()


def _validate_subjects(subjects: list[TrialSet]) -> None:
    if len(subjects) < 2:
        raise DataError(f"LOSO needs at least 2 subjects, got {len(subjects)}")
    channels = subjects[0].channel_names
    seen = set()
    for ts in subjects:
        if ts.channel_names != channels:
            raise DataError(f"subject {ts.subject_id!r} has mismatched channels")
        if ts.subject_id in seen:
            raise DataError(f"duplicate subject id {ts.subject_id!r}")
        seen.add(ts.subject_id)
        if len(set(ts.labels)) < 2:
            raise DataError(f"subject {ts.subject_id!r} lacks one of the two "
                            f"classes")


def _stratified_two_fold(labels, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    fold_a: list[int] = []
    fold_b: list[int] = []
    for cls in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(idx.size)]
        half = (idx.size + 1) // 2
        fold_a.extend(idx[:half].tolist())
        fold_b.extend(idx[half:].tolist())
    return np.sort(np.asarray(fold_a)), np.sort(np.asarray(fold_b))


def _fit_filter(train_sets: list[TrialSet], config: PipelineConfig) -> SpatialFilter:
    shrink = config.shrinkage()
    class_covs: dict[str, list[np.ndarray]] = {}
    for ts in train_sets:
        covs = shrunk_covariances(ts, shrink)
        labels = ts.label_array()
        for cls in sorted(set(ts.labels)):
            class_covs.setdefault(cls, []).append(covs[labels == cls])
    classes = sorted(class_covs)
    if len(classes) != 2:
        raise DataError(f"expected 2 classes across training subjects, got {classes}")
    return fit_csp(np.concatenate(class_covs[classes[0]]),
                   np.concatenate(class_covs[classes[1]]),
                   n_filters=config.n_filters)


@dataclass
class _TrainSide:
    """Everything fitted on training subjects for one held-out iteration."""

    filt: SpatialFilter
    features: np.ndarray
    labels: np.ndarray
    refs: dict = field(default_factory=dict)
    scale: float | None = None
    pca_model: object = None
    scaler: tuple[np.ndarray, np.ndarray] | None = None
    svm: object = None

    def fingerprint(self) -> str:
        return _hash_arrays(
            self.filt.weights, self.filt.eigenvalues, self.features,
            self.labels, self.scale,
            *[self.refs[k] for k in sorted(self.refs)],
            None if self.pca_model is None else self.pca_model.components,
            None if self.scaler is None else self.scaler[0],
            None if self.scaler is None else self.scaler[1],
            None if self.svm is None else self.svm.weights,
            None if self.svm is None else self.svm.bias,
        )


def _training_features(train_sets: list[TrialSet],
                       config: PipelineConfig) -> _TrainSide:
    """Fit filters and build the (pre-PCA, pre-standardise) training block."""
    shrink = config.shrinkage()
    filt = _fit_filter(train_sets, config)
    labels = np.concatenate([ts.label_array() for ts in train_sets])
    refs: dict[str, np.ndarray] = {}
    blocks: list[np.ndarray] = []
    scale = None

    if config.fusion == "sequential":
        subject_covs = [filtered_covariances(ts, filt, shrink) for ts in train_sets]
        if config.alignment in ("none", "adaptive_m"):
            pooled = np.concatenate(subject_covs)
            refs["seq_ref"] = frechet_mean(pooled)
            blocks.append(tangent_project_many(pooled, refs["seq_ref"]))
        elif config.alignment == "ts":
            pooled = np.concatenate(subject_covs)
            refs["seq_ref"] = log_euclidean_mean(pooled)
            blocks.append(align.recenter_at(pooled, refs["seq_ref"]))
        else:  # itsa
            parts = []
            for ts, covs in zip(train_sets, subject_covs):
                feats, m_subj = align.recenter_subject(covs)
                refs[f"subject_ref:{ts.subject_id}"] = m_subj
                parts.append(feats)
            blocks.append(np.concatenate(parts))
    else:  # parallel
        raw_covs = [shrunk_covariances(ts, shrink) for ts in train_sets]
        filt_covs = [filtered_covariances(ts, filt, shrink) for ts in train_sets]
        if config.alignment in ("none", "adaptive_m"):
            logvar = np.concatenate([
                np.stack([log_variance_features(apply_filter(filt, E))
                          for E in ts.data])
                for ts in train_sets])
            pooled_raw = np.concatenate(raw_covs)
            refs["par_raw_ref"] = frechet_mean(pooled_raw)
            blocks.append(logvar)
            blocks.append(tangent_project_many(pooled_raw, refs["par_raw_ref"]))
        elif config.alignment == "ts":
            pooled_filt = np.concatenate(filt_covs)
            pooled_raw = np.concatenate(raw_covs)
            refs["par_filt_ref"] = log_euclidean_mean(pooled_filt)
            refs["par_raw_ref"] = log_euclidean_mean(pooled_raw)
            blocks.append(align.recenter_at(pooled_filt, refs["par_filt_ref"]))
            blocks.append(align.recenter_at(pooled_raw, refs["par_raw_ref"]))
        else:  # itsa
            filt_parts, raw_parts = [], []
            for ts, fcovs, rcovs in zip(train_sets, filt_covs, raw_covs):
                ffeats, m_f = align.recenter_subject(fcovs)
                rfeats, m_r = align.recenter_subject(rcovs)
                refs[f"subject_filt_ref:{ts.subject_id}"] = m_f
                refs[f"subject_raw_ref:{ts.subject_id}"] = m_r
                filt_parts.append(ffeats)
                raw_parts.append(rfeats)
            blocks.append(np.concatenate(filt_parts))
            blocks.append(np.concatenate(raw_parts))

    features = blocks[0] if len(blocks) == 1 else np.concatenate(blocks, axis=1)
    if config.alignment in ("ts", "itsa"):
        features, scale = align.rescale_block(features)
    return _TrainSide(filt=filt, features=features, labels=labels, refs=refs,
                      scale=scale)


def _test_features_fixed(test_set: TrialSet, side: _TrainSide,
                         config: PipelineConfig) -> np.ndarray:
    """Held-out subject features for alignments without fold dependence.

    ``side`` carries the reference objects fitted for the test view (for
    cross-montage runs these come from the reduced view of the training
    subjects).
    """
    shrink = config.shrinkage()
    if config.fusion == "sequential":
        covs = filtered_covariances(test_set, side.filt, shrink)
        if config.alignment in ("none", "adaptive_m"):
            return tangent_project_many(covs, side.refs["seq_ref"])
        feats, _ = align.recenter_subject(covs)
        feats, _ = align.rescale_block(feats)
        return feats
    raw = shrunk_covariances(test_set, shrink)
    if config.alignment in ("none", "adaptive_m"):
        logvar = np.stack([log_variance_features(apply_filter(side.filt, E))
                           for E in test_set.data])
        riemann = tangent_project_many(raw, side.refs["par_raw_ref"])
        return np.concatenate([logvar, riemann], axis=1)
    fcovs = filtered_covariances(test_set, side.filt, shrink)
    ffeats, _ = align.recenter_subject(fcovs)
    rfeats, _ = align.recenter_subject(raw)
    feats = np.concatenate([ffeats, rfeats], axis=1)
    feats, _ = align.rescale_block(feats)
    return feats


def _evaluate_subject(subjects: list[TrialSet], heldout: int,
                      config: PipelineConfig,
                      train_indices: list[int] | None = None,
                      collect_diagnostics: bool = False) -> dict:
    """One LOSO iteration. Returns per-fold and subject scores."""
    test_set = subjects[heldout]
    if train_indices is None:
        train_indices = [j for j in range(len(subjects)) if j != heldout]
    train_sets = [subjects[j] for j in train_indices]
    shrink = config.shrinkage()

    montage_spec = (MontageSpec("test_view", config.montage)
                    if config.montage else None)
    test_view = subset_montage(test_set, montage_spec) if montage_spec else test_set

    split_rng = np.random.default_rng(
        np.random.SeedSequence([config.seed, 7 * heldout + 1]))
    fold_a, fold_b = _stratified_two_fold(test_view.labels, split_rng)

    if config.alignment == "adaptive_m":
        train_sets = [align.align_adaptive_m(ts, LABEL_ADAPTIVE, shrink)
                      for ts in train_sets]

    side = _training_features(train_sets, config)

    # Test-view reference objects: identical to the training side without a
    # montage; refitted on the reduced view of the training subjects with one.
    if montage_spec is None:
        test_side = side
    else:
        train_views = [subset_montage(ts, montage_spec) for ts in train_sets]
        test_side = _training_features(train_views, config)

    test_labels = test_view.label_array()
    fold_scores: list[float] = []
    diagnostics: dict = {}

    # PCA dimension matching. The training model is fitted once on the
    # training features; test features get their own same-k model, fitted on
    # unlabelled (possibly per-fold) test features.
    train_feats = side.features
    k = None
    if config.pca_retain is not None:
        k = pca_component_count(side.features.shape[1], config.pca_retain)
        side.pca_model = fit_pca(side.features, n_components=k)
        train_feats = apply_pca(side.pca_model, side.features)
        if train_feats.shape[1] != k:
            raise ConfigError(
                f"cannot extract {k} components from "
                f"{side.features.shape[0]} training rows",
                field="pipeline.pca_retain")

    def _reduce_test(test_feats: np.ndarray) -> np.ndarray:
        if k is None:
            return test_feats
        model = fit_pca(test_feats, n_components=k)
        reduced = apply_pca(model, test_feats)
        if reduced.shape[1] != k:
            raise ConfigError(
                f"cannot extract {k} components from {test_feats.shape[0]} "
                f"test rows", field="pipeline.pca_retain")
        return reduced

    # Scaler and classifier are training-side objects, fitted exactly once.
    scaler = None
    train_ready = train_feats
    if config.standardize:
        scaler = standardize_fit(train_feats)
        train_ready = standardize_apply(train_feats, *scaler)
    svm = train_svm(train_ready, side.labels, c=config.svm_c, seed=config.seed)
    side.scaler = scaler
    side.svm = svm

    # Fold-independent test features where the alignment allows it.
    fixed_test_feats = None
    if config.alignment != "adaptive_m":
        fixed_test_feats = _reduce_test(
            _test_features_fixed(test_view, test_side, config))

    for calib_idx, eval_idx in ((fold_a, fold_b), (fold_b, fold_a)):
        if config.alignment == "adaptive_m":
            if config.adaptive_m_test == "calibration":
                calib_trials = test_view.select(calib_idx)
                mask = calib_trials.label_array() == LABEL_ADAPTIVE
                if not np.any(mask):
                    raise DataError("calibration fold has no adaptive-class "
                                    "trials for the adaptive-mean transform")
                reference = shrunk_covariances(
                    calib_trials.data[mask], shrink).mean(axis=0)
                transformed = align.align_adaptive_m(test_view, LABEL_ADAPTIVE,
                                                     shrink, reference=reference)
            else:
                transformed = test_view
            test_feats = _reduce_test(
                _test_features_fixed(transformed, test_side, config))
            eval_feats = test_feats[eval_idx]
        elif config.alignment in ("ts", "itsa"):
            rotation = align.fit_rotation(
                train_feats, side.labels,
                fixed_test_feats[calib_idx], test_labels[calib_idx])
            eval_feats = align.apply_rotation(rotation,
                                              fixed_test_feats[eval_idx])
        else:
            eval_feats = fixed_test_feats[eval_idx]
        if scaler is not None:
            eval_feats = standardize_apply(eval_feats, *scaler)
        preds = svm.predict(eval_feats)
        fold_scores.append(f1_score(test_labels[eval_idx], preds))

    if collect_diagnostics:
        diagnostics["train_fingerprint"] = side.fingerprint()
        diagnostics["filter_fingerprint"] = _hash_arrays(
            side.filt.weights, side.filt.eigenvalues)
        diagnostics["test_side_fingerprint"] = (
            None if montage_spec is None else test_side.fingerprint())

    return {
        "subject_id": test_set.subject_id,
        "fold_f1": fold_scores,
        "f1": float(np.mean(fold_scores)),
        "diagnostics": diagnostics,
    }


# ---------------------------------------------------------------------------
# public entry points


def run_loso(subjects: list[TrialSet], config: PipelineConfig,
             n_threads: int = 1, collect_diagnostics: bool = False,
             _results_out: list | None = None) -> EvalReport:
    """Leave-one-subject-out evaluation of one pipeline configuration."""
    _validate_subjects(subjects)
    _preflight(subjects, config)
    started = time.perf_counter()

    def job(i: int) -> dict:
        return _evaluate_subject(subjects, i, config,
                                 collect_diagnostics=collect_diagnostics)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(job, range(len(subjects))))
    else:
        results = [job(i) for i in range(len(subjects))]

    if _results_out is not None:
        _results_out.extend(results)
    scores = np.asarray([r["f1"] for r in results])
    mean, sd, ci = _mean_sd_ci(scores)
    condition = subjects[0].condition
    return EvalReport(
        condition=condition, pipeline=config.fingerprint(), seed=config.seed,
        dataset_hash=dataset_fingerprint(subjects),
        subject_ids=[r["subject_id"] for r in results],
        per_subject_f1=[r["f1"] for r in results],
        per_fold_f1=[r["fold_f1"] for r in results],
        mean_f1=mean, sd_f1=sd, ci95=list(ci),
        runtime_seconds=time.perf_counter() - started,
    )


def _preflight(subjects: list[TrialSet], config: PipelineConfig) -> None:
    """Reject infeasible runs from dimension arithmetic alone."""
    e_train = subjects[0].n_channels
    if config.montage:
        missing = set(config.montage) - set(subjects[0].channel_names)
        if missing:
            raise DataError(f"montage channels missing from dataset: "
                            f"{sorted(missing)}")
        e_test = len(config.montage)
    else:
        e_test = e_train
    d_train = feature_dimension(config.fusion, config.alignment, e_train,
                                config.n_filters)
    f_test = min(config.n_filters or e_test, e_test)
    d_test = feature_dimension(config.fusion, config.alignment, e_test, f_test)
    if d_train != d_test and config.pca_retain is None:
        raise ConfigError(
            f"train features have {d_train} dims but test features {d_test}; "
            f"set pca_retain", field="pipeline.pca_retain")
    if config.pca_retain is not None:
        k = pca_component_count(d_train, config.pca_retain)
        if k > d_test:
            raise ConfigError(
                f"retain {config.pca_retain} of {d_train} training dims needs "
                f"{k} components but the test dimension is {d_test}",
                field="pipeline.pca_retain")
        total = sum(ts.n_trials for ts in subjects)
        min_rows = min(min(total - ts.n_trials, ts.n_trials) for ts in subjects)
        if k > min_rows - 1:
            raise ConfigError(
                f"retain {config.pca_retain} needs {k} components but some "
                f"split has only {min_rows} rows", field="pipeline.pca_retain")


def run_ablation(subjects: list[TrialSet], fusion: str, config: PipelineConfig,
                 strategies: tuple[str, ...] = ("none", "adaptive_m", "ts", "itsa"),
                 n_threads: int = 1) -> AblationReport:
    """Run LOSO once per pre-alignment strategy with shared seed and fusion."""
    reports = {}
    for strategy in strategies:
        cfg = dataclasses.replace(config, fusion=fusion, alignment=strategy)
        reports[strategy] = run_loso(subjects, cfg, n_threads=n_threads)
    return AblationReport(
        condition=subjects[0].condition, fusion=fusion, seed=config.seed,
        dataset_hash=dataset_fingerprint(subjects), strategies=reports,
    )


def fit_performance_curves(points, predict_at=()) -> dict:
    """Least-squares linear and logarithmic fits to (n_train, f1) points.

    Fits ``y = a + b n`` and ``y = a + b ln n``; returns coefficients plus
    predictions at the requested sizes. Needs at least two distinct sizes.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(set(pts[:, 0].tolist())) < 2:
        raise ValueError("need (n, f1) points with at least 2 distinct sizes")
    n, y = pts[:, 0], pts[:, 1]
    if np.any(n <= 0):
        raise ValueError("sizes must be positive")
    lin = np.linalg.lstsq(np.column_stack([np.ones_like(n), n]), y, rcond=None)[0]
    log = np.linalg.lstsq(np.column_stack([np.ones_like(n), np.log(n)]), y,
                          rcond=None)[0]
    predictions = [
        {"n_train": float(v),
         "linear": float(lin[0] + lin[1] * v),
         "log": float(log[0] + log[1] * np.log(v))}
        for v in predict_at
    ]
    return {
        "linear": {"intercept": float(lin[0]), "slope": float(lin[1])},
        "log": {"intercept": float(log[0]), "slope": float(log[1])},
        "predictions": predictions,
    }


def run_learning_curve(subjects: list[TrialSet], config: PipelineConfig,
                       sizes: tuple[int, ...] = (5, 9, 15, 17),
                       folds: int = 10, n_threads: int = 1,
                       predict_at: tuple[int, ...] = ()) -> LearningCurveReport:
    """Performance as a function of the number of training subjects.

    For each held-out subject and size, ``folds`` seeded random subsets of
    the remaining subjects are trained and evaluated; the full-pool size
    collapses to the single LOSO iteration. Curves are fitted per subject
    and on the aggregate mean curve.
    """
    _validate_subjects(subjects)
    _preflight(subjects, config)
    pool = len(subjects) - 1
    sizes = tuple(int(v) for v in sizes)
    if len(set(sizes)) < 2:
        raise ConfigError("need at least 2 distinct training sizes",
                          field="sizes")
    for size in sizes:
        if not 1 <= size <= pool:
            raise ConfigError(f"size {size} exceeds the {pool}-subject "
                              f"training pool", field="sizes")

    def subject_job(heldout: int) -> dict:
        others = [j for j in range(len(subjects)) if j != heldout]
        rows = []
        for size in sizes:
            if size == pool:
                subsets = [others]
            else:
                subsets = []
                for fold in range(folds):
                    rng = np.random.default_rng(np.random.SeedSequence(
                        [config.seed, 1000 + heldout, size, fold]))
                    pick = rng.choice(len(others), size=size, replace=False)
                    subsets.append([others[p] for p in sorted(pick.tolist())])
            scores = [
                _evaluate_subject(subjects, heldout, config,
                                  train_indices=subset)["f1"]
                for subset in subsets
            ]
            rows.append({"size": size, "fold_f1": scores,
                         "mean_f1": float(np.mean(scores))})
        fits = fit_performance_curves(
            [(row["size"], row["mean_f1"]) for row in rows],
            predict_at=predict_at or sizes)
        return {"subject_id": subjects[heldout].subject_id,
                "points": rows, "fits": fits}

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as poolx:
            per_subject = list(poolx.map(subject_job, range(len(subjects))))
    else:
        per_subject = [subject_job(i) for i in range(len(subjects))]

    agg_points = []
    for size in sizes:
        vals = [row["mean_f1"] for entry in per_subject
                for row in entry["points"] if row["size"] == size]
        agg_points.append({"size": size, "mean_f1": float(np.mean(vals))})
    agg_fits = fit_performance_curves(
        [(row["size"], row["mean_f1"]) for row in agg_points],
        predict_at=predict_at or sizes)
    return LearningCurveReport(
        seed=config.seed, dataset_hash=dataset_fingerprint(subjects),
        pipeline=config.fingerprint(), sizes=list(sizes), folds=folds,
        per_subject=per_subject,
        aggregate={"points": agg_points, "fits": agg_fits},
    )
