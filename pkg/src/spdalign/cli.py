"""Batch command-line driver.

Usage::

    spd-align <command> --config <file> --out <dir> --seed <int>
              [--threads <n>] [-v]

Commands: ``segment``, ``synth``, ``run-loso``, ``ablation``,
``cross-montage``, ``learning-curve``, ``stats``. Experiment definitions
live in a JSON config file (versionable); flags carry only paths, the seed,
thread bound and verbosity. Every run writes a ``run.lock`` fingerprint
(config hash, dataset hash, seed, version) and a ``manifest.json`` that
references every artifact produced. Exit codes: 0 ok, 2 config error,
3 data error, 4 numerical/convergence error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .dataio import (TrialSet, dataset_fingerprint, load_montage,
                     read_recording, read_store, segment_trials,
                     synth_generate, write_store)
from .errors import ConfigError, DataError, NumericalError
from .evaluate import (eval_report_csv, run_ablation, run_learning_curve,
                       run_loso)
from .pipeline import PipelineConfig
from .stats import paired_tests

logger = logging.getLogger("spdalign")

COMMANDS = ("segment", "synth", "run-loso", "ablation", "cross-montage",
            "learning-curve", "stats")


class _JsonLineHandler(logging.Handler):
    def emit(self, record: logging.LogRecord) -> None:
        line = json.dumps({
            "level": record.levelname.lower(),
            "logger": record.name,
            "message": record.getMessage(),
        }, sort_keys=True)
        print(line, file=sys.stderr)


# ---------------------------------------------------------------------------
# config plumbing


def _expect(cfg: dict, path: str, kind, required: bool = True, default=None,
            choices=None):
    """Fetch ``path`` (dot-separated) from a nested dict with type checks."""
    node = cfg
    parts = path.split(".")
    for i, part in enumerate(parts):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError("missing required field", field=path)
            return default
        node = node[part]
    if kind is float and isinstance(node, int) and not isinstance(node, bool):
        node = float(node)
    if kind is not None and not isinstance(node, kind):
        raise ConfigError(
            f"expected {getattr(kind, '__name__', kind)}, got "
            f"{type(node).__name__}", field=path)
    if choices is not None and node not in choices:
        raise ConfigError(f"must be one of {list(choices)}, got {node!r}",
                          field=path)
    return node


def _load_config(path: Path) -> tuple[dict, str]:
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist", field="--config")
    raw = path.read_bytes()
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}", field="--config")
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object", field="--config")
    return cfg, hashlib.sha256(raw).hexdigest()


def _pipeline_config(cfg: dict, seed: int) -> PipelineConfig:
    pipe = _expect(cfg, "pipeline", dict, required=False, default={})
    montage = pipe.get("montage")
    if montage is not None:
        montage = _resolve_montage(montage)
    kwargs = dict(
        fusion=_expect(cfg, "pipeline.fusion", str, required=False,
                       default="sequential"),
        alignment=_expect(cfg, "pipeline.alignment", str, required=False,
                          default="itsa"),
        montage=montage,
        pca_retain=_expect(cfg, "pipeline.pca_retain", float, required=False),
        n_filters=_expect(cfg, "pipeline.n_filters", int, required=False),
        standardize=_expect(cfg, "pipeline.standardize", bool, required=False,
                            default=True),
        svm_c=_expect(cfg, "pipeline.svm_c", float, required=False, default=1.0),
        adaptive_m_test=_expect(cfg, "pipeline.adaptive_m_test", str,
                                required=False, default="calibration"),
        shrinkage_target=_expect(cfg, "pipeline.shrinkage_target", str,
                                 required=False, default="scaled-identity"),
        seed=seed,
    )
    return PipelineConfig(**kwargs)


def _resolve_montage(value) -> tuple[str, ...]:
    if isinstance(value, list):
        if not all(isinstance(v, str) for v in value):
            raise ConfigError("montage list must contain channel names",
                              field="pipeline.montage")
        return tuple(value)
    if isinstance(value, str):
        return load_montage(value).channel_names
    raise ConfigError("montage must be a name, a JSON path, or a channel list",
                      field="pipeline.montage")


def _load_subjects(cfg: dict, seed: int) -> list[TrialSet]:
    data = _expect(cfg, "data", dict)
    if "stores" in data:
        stores = _expect(cfg, "data.stores", list)
        if not stores:
            raise ConfigError("stores list is empty", field="data.stores")
        return [read_store(Path(p)) for p in stores]
    if "synth" in data:
        synth = _expect(cfg, "data.synth", dict)
        return synth_generate(
            n_subjects=_expect(cfg, "data.synth.n_subjects", int),
            trials_per_class=_expect(cfg, "data.synth.trials_per_class", int),
            e=_expect(cfg, "data.synth.n_channels", int),
            s=_expect(cfg, "data.synth.n_samples", int),
            shift_strength=_expect(cfg, "data.synth.shift_strength", float,
                                   required=False, default=0.8),
            noise_std=_expect(cfg, "data.synth.noise_std", float,
                              required=False, default=1.0),
            seed=seed,
        )
    raise ConfigError("needs either 'stores' or 'synth'", field="data")


# ---------------------------------------------------------------------------
# artifact plumbing


class _Run:
    def __init__(self, out_dir: Path, command: str, config_hash: str, seed: int):
        self.out_dir = out_dir
        self.command = command
        self.config_hash = config_hash
        self.seed = seed
        self.artifacts: list[str] = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def write_lock(self, dataset_hash: str) -> None:
        payload = {
            "command": self.command,
            "config_sha256": self.config_hash,
            "dataset_sha256": dataset_hash,
            "seed": self.seed,
            "version": __version__,
        }
        self._write("run.lock", json.dumps(payload, sort_keys=True, indent=2))

    def write_json(self, name: str, payload) -> None:
        self._write(name, json.dumps(payload, sort_keys=True, indent=2))

    def write_text(self, name: str, text: str) -> None:
        self._write(name, text)

    def register(self, name: str) -> None:
        if name not in self.artifacts:
            self.artifacts.append(name)

    def _write(self, name: str, text: str) -> None:
        (self.out_dir / name).write_text(text)
        self.register(name)

    def finish(self) -> None:
        manifest = {
            "command": self.command,
            "version": __version__,
            "artifacts": sorted(self.artifacts),
        }
        (self.out_dir / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2))


# ---------------------------------------------------------------------------
# commands


def _cmd_synth(cfg: dict, run: _Run, args) -> None:
    _expect(cfg, "synth", dict)
    subjects = synth_generate(
        n_subjects=_expect(cfg, "synth.n_subjects", int),
        trials_per_class=_expect(cfg, "synth.trials_per_class", int),
        e=_expect(cfg, "synth.n_channels", int),
        s=_expect(cfg, "synth.n_samples", int),
        shift_strength=_expect(cfg, "synth.shift_strength", float,
                               required=False, default=0.8),
        noise_std=_expect(cfg, "synth.noise_std", float, required=False,
                          default=1.0),
        seed=args.seed,
    )
    run.write_lock(dataset_fingerprint(subjects))
    for ts in subjects:
        rel = f"stores/{ts.subject_id}"
        write_store(ts, run.out_dir / rel)
        run.register(f"{rel}/manifest.json")
        run.register(f"{rel}/payload.bin")
    run.write_json("dataset.json", {
        "subjects": [ts.subject_id for ts in subjects],
        "n_channels": subjects[0].n_channels,
        "n_samples": subjects[0].n_samples,
        "stores": [f"stores/{ts.subject_id}" for ts in subjects],
    })
    logger.info("synthesised %d subjects", len(subjects))


def _cmd_segment(cfg: dict, run: _Run, args) -> None:
    recordings = _expect(cfg, "recordings", list)
    condition = _expect(cfg, "condition", str, choices=("advance", "delay"))
    if not recordings:
        raise ConfigError("recordings list is empty", field="recordings")
    produced = []
    for path in recordings:
        rec = read_recording(Path(path))
        trials = segment_trials(rec, condition)
        rel = f"stores/{rec.subject_id}_{condition}"
        write_store(trials, run.out_dir / rel)
        run.register(f"{rel}/manifest.json")
        run.register(f"{rel}/payload.bin")
        produced.append({"subject_id": rec.subject_id, "store": rel,
                         "n_trials": trials.n_trials})
    run.write_lock(hashlib.sha256(
        ",".join(str(p) for p in recordings).encode()).hexdigest())
    run.write_json("dataset.json", {"condition": condition, "stores": produced})


def _cmd_run_loso(cfg: dict, run: _Run, args) -> None:
    subjects = _load_subjects(cfg, args.seed)
    config = _pipeline_config(cfg, args.seed)
    run.write_lock(dataset_fingerprint(subjects))
    report = run_loso(subjects, config, n_threads=args.threads)
    run.write_json("report.json", report.to_payload())
    run.write_text("per_subject.csv", eval_report_csv(report))
    logger.info("LOSO mean F1 %.2f (sd %.2f)", report.mean_f1, report.sd_f1)


def _cmd_ablation(cfg: dict, run: _Run, args) -> None:
    subjects = _load_subjects(cfg, args.seed)
    config = _pipeline_config(cfg, args.seed)
    fusion = _expect(cfg, "fusion", str, required=False,
                     default=config.fusion,
                     choices=("sequential", "parallel"))
    strategies = tuple(_expect(cfg, "strategies", list, required=False,
                               default=["none", "adaptive_m", "ts", "itsa"]))
    run.write_lock(dataset_fingerprint(subjects))
    report = run_ablation(subjects, fusion, config, strategies=strategies,
                          n_threads=args.threads)
    run.write_json("report.json", report.to_payload())
    lines = ["strategy,mean_f1,sd_f1,ci_lo,ci_hi"]
    for name, rep in report.strategies.items():
        lines.append(f"{name},{rep.mean_f1:.6f},{rep.sd_f1:.6f},"
                     f"{rep.ci95[0]:.6f},{rep.ci95[1]:.6f}")
    run.write_text("table.csv", "\n".join(lines) + "\n")
    logger.info("ablation over %s done", ",".join(strategies))


def _cmd_cross_montage(cfg: dict, run: _Run, args) -> None:
    subjects = _load_subjects(cfg, args.seed)
    config = _pipeline_config(cfg, args.seed)
    montage = _expect(cfg, "test_montage", None)
    montage = _resolve_montage(montage)
    reduced_cfg = dataclasses.replace(config, montage=montage)
    full_cfg = dataclasses.replace(config, montage=None, pca_retain=None)
    run.write_lock(dataset_fingerprint(subjects))
    report_reduced = run_loso(subjects, reduced_cfg, n_threads=args.threads)
    report_full = run_loso(subjects, full_cfg, n_threads=args.threads)
    run.write_json("report_montage.json", report_reduced.to_payload())
    run.write_json("report_full.json", report_full.to_payload())
    run.write_text("per_subject_montage.csv", eval_report_csv(report_reduced))
    run.write_text("per_subject_full.csv", eval_report_csv(report_full))
    run.write_json("summary.json", {
        "montage_channels": len(montage),
        "full_mean_f1": report_full.mean_f1,
        "montage_mean_f1": report_reduced.mean_f1,
        "f1_drop": report_full.mean_f1 - report_reduced.mean_f1,
        "full_ci95": report_full.ci95,
        "montage_ci95": report_reduced.ci95,
    })
    logger.info("cross-montage drop %.2f",
                report_full.mean_f1 - report_reduced.mean_f1)


def _cmd_learning_curve(cfg: dict, run: _Run, args) -> None:
    subjects = _load_subjects(cfg, args.seed)
    config = _pipeline_config(cfg, args.seed)
    sizes = tuple(_expect(cfg, "sizes", list, required=False,
                          default=[5, 9, 15, 17]))
    folds = _expect(cfg, "folds", int, required=False, default=10)
    predict_at = tuple(_expect(cfg, "predict_at", list, required=False,
                               default=[]))
    run.write_lock(dataset_fingerprint(subjects))
    report = run_learning_curve(subjects, config, sizes=sizes, folds=folds,
                                n_threads=args.threads, predict_at=predict_at)
    run.write_json("report.json", report.to_payload())
    lines = ["subject_id,size,fold,f1"]
    for entry in report.per_subject:
        for row in entry["points"]:
            for fold, f1 in enumerate(row["fold_f1"]):
                lines.append(f"{entry['subject_id']},{row['size']},{fold},"
                             f"{f1:.6f}")
    run.write_text("curve_points.csv", "\n".join(lines) + "\n")


def _scores_from(cfg: dict, key: str) -> list[float]:
    if f"scores_{key}" in cfg:
        scores = _expect(cfg, f"scores_{key}", list)
        return [float(v) for v in scores]
    if f"csv_{key}" in cfg:
        path = Path(_expect(cfg, f"csv_{key}", str))
        if not path.exists():
            raise DataError(f"score CSV {path} does not exist")
        lines = path.read_text().strip().splitlines()
        header = lines[0].split(",")
        col = header.index("f1")
        return [float(line.split(",")[col]) for line in lines[1:]]
    raise ConfigError(f"needs scores_{key} or csv_{key}", field=f"scores_{key}")


def _cmd_stats(cfg: dict, run: _Run, args) -> None:
    scores_a = _scores_from(cfg, "a")
    scores_b = _scores_from(cfg, "b")
    digest = hashlib.sha256(
        json.dumps([scores_a, scores_b]).encode()).hexdigest()
    run.write_lock(digest)
    result = paired_tests(scores_a, scores_b, seed=args.seed)
    run.write_json("report.json", result.to_dict())
    logger.info("chosen test %s (p=%.4g)", result.chosen_test, result.chosen_p)


_HANDLERS = {
    "segment": _cmd_segment,
    "synth": _cmd_synth,
    "run-loso": _cmd_run_loso,
    "ablation": _cmd_ablation,
    "cross-montage": _cmd_cross_montage,
    "learning-curve": _cmd_learning_curve,
    "stats": _cmd_stats,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spd-align",
        description="Cross-subject SPD alignment experiments")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, type=Path,
                        help="JSON experiment definition")
    parser.add_argument("--out", required=True, type=Path,
                        help="output directory for artifacts")
    parser.add_argument("--seed", required=True, type=int,
                        help="seed for all stochastic steps")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker-thread bound for evaluation loops")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.verbose >= 1:
        handler = _JsonLineHandler()
        logging.getLogger().addHandler(handler)
        logging.getLogger().setLevel(
            logging.DEBUG if args.verbose > 1 else logging.INFO)
    try:
        if args.threads < 1:
            raise ConfigError("must be >= 1", field="--threads")
        cfg, config_hash = _load_config(args.config)
        run = _Run(args.out, args.command, config_hash, args.seed)
        _HANDLERS[args.command](cfg, run, args)
        run.finish()
        return 0
    except ConfigError as exc:
        _fail("config", exc)
        return 2
    except (DataError, ValueError, FileNotFoundError) as exc:
        _fail("data", exc)
        return 3
    except NumericalError as exc:
        _fail("numerical", exc)
        return 4


def _fail(category: str, exc: Exception) -> None:
    print(json.dumps({"error": category, "message": str(exc)}),
          file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
