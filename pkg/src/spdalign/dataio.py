"""Data containers, segmentation, montage subsetting, storage, synthesis.

Continuous recordings are segmented around labelled heel-strike triples into
fixed-length sliding windows. Trial sets travel between runs in a portable
store: a JSON manifest next to a raw little-endian float32 payload laid out
``[trial][channel][sample]``. A seeded generator synthesises cross-subject
datasets with a controllable mixing-matrix shift for desk-scale experiments.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import DataError

logger = logging.getLogger(__name__)

__all__ = [
    "LABEL_ADAPTIVE",
    "LABEL_NON_ADAPTIVE",
    "TrialSet",
    "ContinuousRecording",
    "MontageSpec",
    "load_montage",
    "segment_trials",
    "subset_montage",
    "synth_generate",
    "write_store",
    "read_store",
    "write_matrix",
    "read_matrix",
    "write_recording",
    "read_recording",
    "dataset_fingerprint",
]

LABEL_ADAPTIVE = "adaptive"
LABEL_NON_ADAPTIVE = "non_adaptive"

EVENT_HEEL_STRIKE = "heel_strike"
EVENT_ADVANCE_ONSET = "advance_onset"
EVENT_DELAY_ONSET = "delay_onset"
EVENT_TYPES = (EVENT_HEEL_STRIKE, EVENT_ADVANCE_ONSET, EVENT_DELAY_ONSET, "steady")

CONDITION_ONSETS = {"advance": EVENT_ADVANCE_ONSET, "delay": EVENT_DELAY_ONSET}

WINDOW_SAMPLES = 100
WINDOW_HOP = 50
SEGMENT_MARGIN = 256

STORE_MANIFEST = "manifest.json"
STORE_PAYLOAD = "payload.bin"
STORE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class TrialSet:
    """Windows of multichannel signal with labels and provenance."""

    subject_id: str
    condition: str
    channel_names: tuple[str, ...]
    data: np.ndarray          # (t, e, s)
    labels: tuple[str, ...]   # len t

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "labels", tuple(self.labels))
        if data.ndim != 3:
            raise DataError(f"trial data must be (t, e, s), got {data.shape}")
        t, e, s = data.shape
        if e < 2 or s < 2:
            raise DataError(f"trials need e >= 2 and s >= 2, got e={e}, s={s}")
        if len(self.channel_names) != e:
            raise DataError(
                f"{len(self.channel_names)} channel names for {e} channels"
            )
        if len(self.labels) != t:
            raise DataError(f"{len(self.labels)} labels for {t} trials")
        if not np.all(np.isfinite(data)):
            raise DataError("trial data contains non-finite entries")

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    def replace_data(self, data: np.ndarray) -> "TrialSet":
        return replace(self, data=data)

    def select(self, indices) -> "TrialSet":
        indices = np.asarray(indices)
        return replace(self, data=self.data[indices],
                       labels=tuple(self.labels[i] for i in indices))

    def label_array(self) -> np.ndarray:
        return np.asarray(self.labels)


@dataclass(frozen=True)
class ContinuousRecording:
    """A continuous multichannel recording with point events."""

    subject_id: str
    channel_names: tuple[str, ...]
    data: np.ndarray                      # (e, T)
    events: tuple[tuple[int, str], ...]   # (sample_index, event_type)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        object.__setattr__(self, "events",
                           tuple((int(i), str(kind)) for i, kind in self.events))
        if data.ndim != 2:
            raise DataError(f"recording data must be (e, T), got {data.shape}")
        if len(self.channel_names) != data.shape[0]:
            raise DataError("channel name count does not match data rows")
        last = -1
        for idx, kind in self.events:
            if not 0 <= idx < data.shape[1]:
                raise DataError(f"event sample {idx} outside recording of "
                                f"length {data.shape[1]}")
            if idx <= last:
                raise DataError("event sample indices must be strictly increasing")
            if kind not in EVENT_TYPES:
                raise DataError(f"unknown event type {kind!r}")
            last = idx


@dataclass(frozen=True)
class MontageSpec:
    """Named electrode subset."""

    name: str
    channel_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "channel_names", tuple(self.channel_names))
        if len(set(self.channel_names)) != len(self.channel_names):
            raise DataError(f"montage {self.name!r} has duplicate channel names")


def load_montage(name_or_path: str) -> MontageSpec:
    """Load a montage from the packaged assets or a JSON file path.

    Ships ``ten_twenty`` (19 electrodes) and ``ten_ten`` (60 electrodes);
    the JSON assets are editable because electrode naming is
    dataset-specific.
    """
    path = Path(name_or_path)
    if path.suffix == ".json" and path.exists():
        payload = json.loads(path.read_text())
    else:
        try:
            asset = resources.files("spdalign").joinpath(
                f"montages/{name_or_path}.json")
            payload = json.loads(asset.read_text())
        except FileNotFoundError:
            raise DataError(f"unknown montage {name_or_path!r}") from None
    return MontageSpec(name=payload["name"],
                       channel_names=tuple(payload["channel_names"]))


def _tempo_blocks(events, onset_kind: str) -> list[tuple[int, int]]:
    """(start, end) sample spans from each onset to the next onset of any kind."""
    onsets = [(i, kind) for i, kind in events if kind in CONDITION_ONSETS.values()]
    blocks = []
    for pos, (start, kind) in enumerate(onsets):
        if kind != onset_kind:
            continue
        end = onsets[pos + 1][0] if pos + 1 < len(onsets) else np.inf
        blocks.append((start, end))
    return blocks


def segment_trials(rec: ContinuousRecording, condition: str,
                   window: int = WINDOW_SAMPLES, hop: int = WINDOW_HOP,
                   margin: int = SEGMENT_MARGIN) -> TrialSet:
    """Segment a recording into labelled sliding windows around heel strikes.

    For each tempo block of the requested condition, the first three heel
    strikes form the adaptive triple and the middle three (starting at
    ``(n - 3) // 2``) the non-adaptive triple. Each triple ``(S_x, S_x+1,
    S_x+2)`` spans ``[S_x - margin, S_x+2 + margin)``; windows of ``window``
    samples are slid across it with ``hop``, giving
    ``(L - window) // hop + 1`` windows. Triples whose span leaves the
    recording, or is shorter than one window, are skipped with a warning.
    """
    if condition not in CONDITION_ONSETS:
        raise DataError(f"condition must be one of {sorted(CONDITION_ONSETS)}, "
                        f"got {condition!r}")
    strikes = np.asarray([i for i, kind in rec.events if kind == EVENT_HEEL_STRIKE])
    total = rec.data.shape[1]
    windows: list[np.ndarray] = []
    labels: list[str] = []
    for start, end in _tempo_blocks(rec.events, CONDITION_ONSETS[condition]):
        in_block = strikes[(strikes >= start) & (strikes < end)]
        if in_block.size < 3:
            logger.warning("block at %s: only %d heel strikes, skipped",
                           start, in_block.size)
            continue
        mid = (in_block.size - 3) // 2
        if mid < 3:
            logger.warning("block at %s: adaptive and non-adaptive triples "
                           "overlap (%d strikes)", start, in_block.size)
        triples = ((LABEL_ADAPTIVE, in_block[0:3]),
                   (LABEL_NON_ADAPTIVE, in_block[mid:mid + 3]))
        for label, triple in triples:
            lo = int(triple[0]) - margin
            hi = int(triple[2]) + margin
            if lo < 0 or hi > total:
                logger.warning("triple at %d: segment [%d, %d) leaves the "
                               "recording, skipped", triple[0], lo, hi)
                continue
            length = hi - lo
            if length < window:
                logger.warning("triple at %d: segment of %d samples is "
                               "shorter than one window, skipped",
                               triple[0], length)
                continue
            count = (length - window) // hop + 1
            for w in range(count):
                offset = lo + w * hop
                windows.append(rec.data[:, offset:offset + window])
                labels.append(label)
    if not windows:
        raise DataError(f"no usable {condition!r} windows in recording "
                        f"{rec.subject_id!r}")
    return TrialSet(subject_id=rec.subject_id, condition=condition,
                    channel_names=rec.channel_names,
                    data=np.stack(windows), labels=tuple(labels))


def subset_montage(trials: TrialSet, spec: MontageSpec) -> TrialSet:
    """Restrict a trial set to a montage's channels, in montage order."""
    index = {name: i for i, name in enumerate(trials.channel_names)}
    missing = [name for name in spec.channel_names if name not in index]
    if missing:
        raise DataError(f"montage {spec.name!r} channels missing from trials: "
                        f"{missing}")
    rows = [index[name] for name in spec.channel_names]
    return replace(trials, channel_names=spec.channel_names,
                   data=np.ascontiguousarray(trials.data[:, rows, :]))


def _random_orthogonal(rng: np.random.Generator, e: int) -> np.ndarray:
    """Haar-ish orthogonal matrix via QR with a deterministic sign fix."""
    q, r = np.linalg.qr(rng.standard_normal((e, e)))
    return q * np.sign(np.diag(r))


def synth_generate(n_subjects: int, trials_per_class: int, e: int, s: int,
                   shift_strength: float = 0.8, seed: int = 0,
                   noise_std: float = 1.0) -> list[TrialSet]:
    """Seeded synthetic cross-subject dataset with class-dependent sources.

    Latent sources have diagonal variance profiles; sources 0 and 1 are
    discriminative, with variances that swap between the two classes. Each
    subject observes the sources through its own mixing
    ``A = Q_base expm(shift * K) diag(exp(shift * z))`` (``K`` random
    skew-symmetric, ``z`` random normal), plus white noise. At
    ``shift_strength = 0`` every subject shares the same mixing. Fully
    deterministic given ``seed``.
    """
    if e < 4:
        raise ValueError(f"need e >= 4, got {e}")
    if trials_per_class < 8:
        raise ValueError(f"need trials_per_class >= 8, got {trials_per_class}")
    if s < 2:
        raise ValueError(f"need s >= 2, got {s}")
    root = np.random.default_rng(np.random.SeedSequence(seed))
    base_mix = _random_orthogonal(root, e)

    base_var = np.linspace(1.0, 0.5, e)
    profiles = {}
    for label, (v0, v1) in ((LABEL_ADAPTIVE, (2.0, 0.6)),
                            (LABEL_NON_ADAPTIVE, (0.6, 2.0))):
        prof = base_var.copy()
        prof[0], prof[1] = v0, v1
        profiles[label] = prof

    subjects = []
    for subj in range(n_subjects):
        rng = np.random.default_rng(np.random.SeedSequence([seed, subj]))
        skew = rng.standard_normal((e, e))
        skew = (skew - skew.T) / np.sqrt(2.0 * e)
        rotation = scipy.linalg.expm(shift_strength * skew)
        scaling = np.exp(shift_strength * rng.standard_normal(e) * 0.5)
        mixing = base_mix @ rotation * scaling  # Q_sub @ diag(scaling)

        data, labels = [], []
        for label in (LABEL_ADAPTIVE, LABEL_NON_ADAPTIVE):
            std = np.sqrt(profiles[label])[:, np.newaxis]
            for _ in range(trials_per_class):
                sources = rng.standard_normal((e, s)) * std
                noise = rng.standard_normal((e, s)) * noise_std
                data.append(mixing @ sources + noise)
                labels.append(label)
        subjects.append(TrialSet(
            subject_id=f"S{subj + 1:02d}", condition="synthetic",
            channel_names=tuple(f"ch{i:02d}" for i in range(e)),
            data=np.stack(data), labels=tuple(labels),
        ))
    return subjects


def write_store(trials: TrialSet, path) -> None:
    """Write a trial set as ``manifest.json`` + float32 LE ``payload.bin``."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(trials.data, dtype="<f4")
    manifest = {
        "schema_version": STORE_SCHEMA_VERSION,
        "subject_id": trials.subject_id,
        "condition": trials.condition,
        "channel_names": list(trials.channel_names),
        "labels": list(trials.labels),
        "n_trials": trials.n_trials,
        "n_channels": trials.n_channels,
        "n_samples": trials.n_samples,
        "dtype": "float32",
        "byte_order": "little",
        "layout": "trial_channel_sample",
    }
    (directory / STORE_PAYLOAD).write_bytes(payload.tobytes())
    (directory / STORE_MANIFEST).write_text(
        json.dumps(manifest, indent=2, sort_keys=True))


def read_store(path) -> TrialSet:
    """Read a trial store, validating the manifest against the payload."""
    directory = Path(path)
    manifest_path = directory / STORE_MANIFEST
    payload_path = directory / STORE_PAYLOAD
    if not manifest_path.exists() or not payload_path.exists():
        raise DataError(f"{directory} is not a trial store (missing manifest "
                        f"or payload)")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema_version") != STORE_SCHEMA_VERSION:
        raise DataError(f"unsupported store schema version "
                        f"{manifest.get('schema_version')!r}")
    if manifest.get("dtype") != "float32":
        raise DataError(f"unsupported payload dtype {manifest.get('dtype')!r} "
                        f"(store format fixes float32)")
    if manifest.get("byte_order") != "little":
        raise DataError(f"unsupported byte order {manifest.get('byte_order')!r}")
    t, e, s = (int(manifest[k]) for k in ("n_trials", "n_channels", "n_samples"))
    raw = payload_path.read_bytes()
    expected = t * e * s * 4
    if len(raw) != expected:
        raise DataError(f"payload length {len(raw)} does not match manifest "
                        f"dims {t}x{e}x{s} ({expected} bytes)")
    data = np.frombuffer(raw, dtype="<f4").reshape(t, e, s)
    return TrialSet(
        subject_id=manifest["subject_id"], condition=manifest["condition"],
        channel_names=tuple(manifest["channel_names"]),
        data=data.astype(np.float64), labels=tuple(manifest["labels"]),
    )


def write_matrix(X: np.ndarray, path) -> None:
    """Cache a 2-D float matrix (e.g. intermediate features) on disk.

    Same container conventions as the trial store: a JSON manifest next to a
    little-endian float32 payload.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {X.shape}")
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": STORE_SCHEMA_VERSION,
        "kind": "matrix",
        "n_rows": int(X.shape[0]),
        "n_cols": int(X.shape[1]),
        "dtype": "float32",
        "byte_order": "little",
    }
    (directory / STORE_PAYLOAD).write_bytes(
        np.ascontiguousarray(X, dtype="<f4").tobytes())
    (directory / STORE_MANIFEST).write_text(
        json.dumps(manifest, indent=2, sort_keys=True))


def read_matrix(path) -> np.ndarray:
    directory = Path(path)
    manifest_path = directory / STORE_MANIFEST
    if not manifest_path.exists():
        raise DataError(f"{directory} is not a matrix store")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema_version") != STORE_SCHEMA_VERSION:
        raise DataError(f"unsupported store schema version "
                        f"{manifest.get('schema_version')!r}")
    if manifest.get("kind") != "matrix":
        raise DataError(f"not a matrix store (kind={manifest.get('kind')!r})")
    if manifest.get("dtype") != "float32" or manifest.get("byte_order") != "little":
        raise DataError("matrix payload must be little-endian float32")
    rows, cols = int(manifest["n_rows"]), int(manifest["n_cols"])
    raw = (directory / STORE_PAYLOAD).read_bytes()
    if len(raw) != rows * cols * 4:
        raise DataError(f"payload length {len(raw)} does not match manifest "
                        f"dims {rows}x{cols}")
    return np.frombuffer(raw, dtype="<f4").reshape(rows, cols).astype(np.float64)


def write_recording(rec: ContinuousRecording, path) -> None:
    """Write a continuous recording: JSON header, float32 signal, events CSV."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    header = {
        "schema_version": STORE_SCHEMA_VERSION,
        "subject_id": rec.subject_id,
        "channel_names": list(rec.channel_names),
        "n_samples": int(rec.data.shape[1]),
        "dtype": "float32",
        "byte_order": "little",
    }
    (directory / "recording.json").write_text(
        json.dumps(header, indent=2, sort_keys=True))
    (directory / "signal.bin").write_bytes(
        np.ascontiguousarray(rec.data, dtype="<f4").tobytes())
    with open(directory / "events.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_index", "event_type"])
        writer.writerows(rec.events)


def read_recording(path) -> ContinuousRecording:
    directory = Path(path)
    header_path = directory / "recording.json"
    if not header_path.exists():
        raise DataError(f"{directory} is not a recording (missing recording.json)")
    header = json.loads(header_path.read_text())
    if header.get("schema_version") != STORE_SCHEMA_VERSION:
        raise DataError(f"unsupported recording schema version "
                        f"{header.get('schema_version')!r}")
    if header.get("dtype") != "float32" or header.get("byte_order") != "little":
        raise DataError("recording payload must be little-endian float32")
    e = len(header["channel_names"])
    n = int(header["n_samples"])
    raw = (directory / "signal.bin").read_bytes()
    if len(raw) != e * n * 4:
        raise DataError(f"signal length {len(raw)} does not match header dims "
                        f"{e}x{n}")
    data = np.frombuffer(raw, dtype="<f4").reshape(e, n).astype(np.float64)
    events = []
    with open(directory / "events.csv", newline="") as fh:
        reader = csv.reader(fh)
        headerrow = next(reader)
        if headerrow != ["sample_index", "event_type"]:
            raise DataError(f"unexpected events CSV header {headerrow}")
        for row in reader:
            events.append((int(row[0]), row[1]))
    return ContinuousRecording(
        subject_id=header["subject_id"],
        channel_names=tuple(header["channel_names"]),
        data=data, events=tuple(events),
    )


def dataset_fingerprint(subjects) -> str:
    """Stable SHA-256 over subject data, labels, channels, and identity."""
    import hashlib

    digest = hashlib.sha256()
    for ts in subjects:
        digest.update(ts.subject_id.encode())
        digest.update(ts.condition.encode())
        digest.update(",".join(ts.channel_names).encode())
        digest.update(",".join(ts.labels).encode())
        digest.update(np.ascontiguousarray(ts.data, dtype="<f8").tobytes())
    return digest.hexdigest()
