"""Fixed-length recording vectors and the labelled datasets built from them.

Every recording is reduced to seven statistics per feature dimension,
taken across frames, in the order of :data:`STATISTICS`.  The fifteen
feature blocks appear in the order of :data:`FEATURES`, giving 116
dimensions and 812 columns.  Breath and cough vectors of one participant
concatenate (breath first) into a 1624-column row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp
from .audio_io import condition
from .descriptors import (
    SpectralParams,
    rmse,
    spectral_bandwidth,
    spectral_centroid,
    spectral_contrast,
    spectral_flatness,
    spectral_flux,
    spectral_rolloff,
    zcr,
)
from .errors import (
    AllSilentError,
    EmptyInputError,
    IngestError,
    PairingError,
    SchemaError,
)
from .timefreq import (
    cens_from_chroma,
    chroma_cqt_from_spectrogram,
    chroma_stft_from_spectrogram,
    delta,
    mfcc_from_spectrogram,
    tonnetz,
)

LAYOUT_VERSION = 1

STATISTICS = ("min", "max", "mean", "median", "var", "q1", "q3")

FEATURES = (
    ("RMSE", 1), ("ZCR", 1), ("S-BW", 1), ("S-CENT", 1), ("S-FLAT", 1), ("S-FLUX", 1), ("S-ROLL", 1),
    ("S-CONT", 7),
    ("MFCC", 20), ("MFCC-D", 20), ("MFCC-D2", 20),
    ("C-ENS", 12), ("C-CQT", 12), ("C-STFT", 12),
    ("TN", 6),
)
FEATURE_DIMS = dict(FEATURES)

CATEGORIES = {
    "time": ("RMSE", "ZCR"),
    "spectral": ("S-BW", "S-CENT", "S-CONT", "S-FLAT", "S-FLUX", "S-ROLL"),
    "cepstral": ("MFCC", "MFCC-D", "MFCC-D2"),
    "tonal": ("C-ENS", "C-CQT", "C-STFT", "TN"),
}

LABELS = ("healthy", "covid")
SAMPLE_TYPES = ("B", "C", "BC")

VECTOR_LEN = sum(d for _, d in FEATURES) * len(STATISTICS)


def column_names(prefix=""):
    return [f"{prefix}{name}[{i}]/{stat}" for name, dim in FEATURES for i in range(dim) for stat in STATISTICS]


def layout_for(sample_type):
    if sample_type == "BC":
        return column_names("B/") + column_names("C/")
    if sample_type in ("B", "C"):
        return column_names()
    raise SchemaError(f"unknown sample type {sample_type!r}")


def parse_column(name):
    """Split ``[B/]FEATURE[dim]/stat`` into ``(half, feature, dim, stat)``."""
    half = ""
    if name[:2] in ("B/", "C/"):
        half, name = name[0], name[2:]
    head, stat = name.rsplit("/", 1)
    feature, dim = head[:-1].split("[")
    return half, feature, int(dim), stat


def subset_features(subset):
    """Feature names covered by a subset: a category, a single feature, or ``all``."""
    if subset == "all":
        return tuple(name for name, _ in FEATURES)
    if subset in CATEGORIES:
        return CATEGORIES[subset]
    if subset in FEATURE_DIMS:
        return (subset,)
    raise SchemaError(f"unknown feature subset {subset!r}")


def subset_columns(columns, subset):
    wanted = set(subset_features(subset))
    return np.array([i for i, c in enumerate(columns) if parse_column(c)[1] in wanted], dtype=np.intp)


# ---------------------------------------------------------------------------
# statistics


def _quantile(sorted_vals, p):
    h = (sorted_vals.shape[0] - 1) * p
    lo = int(np.floor(h))
    hi = min(lo + 1, sorted_vals.shape[0] - 1)
    return sorted_vals[lo] + (h - lo) * (sorted_vals[hi] - sorted_vals[lo])


def summarize(series):
    """Seven statistics per dimension, dimension-major.

    Quartiles interpolate linearly between order statistics (inclusive
    method) and the variance divides by the number of frames.
    """
    values = series.values if hasattr(series, "values") else np.asarray(series, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    n = values.shape[0]
    if n == 0:
        raise EmptyInputError("cannot summarise an empty series")
    s = np.sort(values, axis=0)
    mid = n // 2
    median = s[mid] if n % 2 else (s[mid - 1] + s[mid]) / 2
    mean = values.mean(axis=0)
    var = ((values - mean) ** 2).mean(axis=0)
    # rounding can push a location statistic one ulp past its bounds
    lo, hi = s[0], s[-1]
    mean = np.clip(mean, lo, hi)
    q1 = np.clip(_quantile(s, 0.25), lo, median)
    q3 = np.clip(_quantile(s, 0.75), median, hi)
    stats = np.stack([lo, hi, mean, median, var, q1, q3], axis=1)
    return stats.reshape(-1)


# ---------------------------------------------------------------------------
# recording vectors


@dataclass(frozen=True)
class ExtractionSettings:
    sample_rate_hz: int = 22050
    frame_len: int = dsp.FRAME_LEN
    hop_len: int = dsp.HOP_LEN
    trim_db: float = 60.0
    spectral: SpectralParams = field(default_factory=SpectralParams)
    cens_smooth_len: int = 41
    delta_half_width: int = 4


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: tuple
    sample_kind: str = ""
    participant_id: str = ""
    source_id: str = ""

    def __len__(self):
        return self.values.shape[0]

    def select(self, feature, statistic=None):
        idx = [i for i, c in enumerate(self.layout)
               if parse_column(c)[1] == feature and (statistic is None or parse_column(c)[3] == statistic)]
        return self.values[idx]


def extract_series(clip, settings=ExtractionSettings()):
    """All fifteen per-frame series of an already conditioned clip, in layout order."""
    sr = clip.sample_rate_hz
    frames = dsp.frame_signal(clip, settings.frame_len, settings.hop_len)
    spec = dsp.stft(frames)
    cq = dsp.cqt(clip, frame_len=settings.frame_len, hop_len=settings.hop_len)
    cepstrum = mfcc_from_spectrogram(spec, sr)
    chroma_cq = chroma_cqt_from_spectrogram(cq)
    series = [
        rmse(frames),
        zcr(frames),
        spectral_bandwidth(spec),
        spectral_centroid(spec),
        spectral_flatness(spec),
        spectral_flux(spec),
        spectral_rolloff(spec, settings.spectral),
        spectral_contrast(spec, settings.spectral),
        cepstrum,
        delta(cepstrum, 1, settings.delta_half_width),
        delta(cepstrum, 2, settings.delta_half_width),
        cens_from_chroma(chroma_cq, settings.cens_smooth_len),
        chroma_cq,
        chroma_stft_from_spectrogram(spec, sr),
        tonnetz(chroma_cq),
    ]
    return dict(zip((name for name, _ in FEATURES), series))


def build_feature_vector(clip, settings=ExtractionSettings(), sample_kind="", participant_id=""):
    """Condition a raw clip and reduce it to its 812-entry summary vector."""
    try:
        clip = condition(clip, settings.sample_rate_hz, settings.trim_db)
    except AllSilentError as exc:
        raise AllSilentError(f"{clip.source_id or '<clip>'}: {exc}", clip.source_id) from exc
    series = extract_series(clip, settings)
    values = np.concatenate([summarize(series[name]) for name, _ in FEATURES])
    if not np.all(np.isfinite(values)):
        raise SchemaError(f"non-finite feature values for {clip.source_id!r}")
    return FeatureVector(values, tuple(column_names()), sample_kind, participant_id, clip.source_id)


def concat_bc(breath, cough):
    if breath.participant_id != cough.participant_id:
        raise PairingError(f"breath from {breath.participant_id!r} paired with cough from {cough.participant_id!r}")
    return np.concatenate([breath.values, cough.values])


# ---------------------------------------------------------------------------
# datasets


@dataclass
class LabeledDataset:
    rows: np.ndarray
    labels: list
    sample_type: str
    participant_ids: list
    columns: list = None

    def __post_init__(self):
        if self.columns is None:
            self.columns = layout_for(self.sample_type)
        rows = np.asarray(self.rows, dtype=np.float64)
        self.rows = rows.reshape(len(self.labels), -1) if rows.size else rows.reshape(0, len(self.columns))
        if self.rows.shape[1] != len(self.columns):
            raise SchemaError(f"{self.rows.shape[1]} values per row but {len(self.columns)} columns")
        bad = sorted(set(self.labels) - set(LABELS))
        if bad:
            raise SchemaError(f"unknown labels {bad}")
        if len(self.participant_ids) != len(self.labels):
            raise SchemaError("participant_ids and labels differ in length")

    def __len__(self):
        return len(self.labels)

    @property
    def y(self):
        return np.array([lab == "covid" for lab in self.labels], dtype=int)

    def subset(self, name):
        return self.rows[:, subset_columns(self.columns, name)]


@dataclass(frozen=True)
class ManifestRecord:
    participant_id: str
    breath_path: Path
    cough_path: Path
    label: str


MANIFEST_HEADER = ("participant_id", "breath_path", "cough_path", "label")


def load_manifest(path, check_files=True):
    """Read and validate a participant manifest.

    Relative paths resolve against the manifest's directory.  All rows with
    missing files are reported together in one :class:`IngestError`.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"manifest {path} not found", [str(path)])
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != MANIFEST_HEADER:
            raise SchemaError(f"manifest header must be {','.join(MANIFEST_HEADER)}, got {reader.fieldnames}")
        raw = list(reader)
    records, seen, missing = [], set(), []
    for line, row in enumerate(raw, start=2):
        pid = row["participant_id"].strip()
        label = row["label"].strip()
        if label not in LABELS:
            raise SchemaError(f"line {line}: label {label!r} is not one of {LABELS}")
        if pid in seen:
            raise IngestError(f"line {line}: duplicate participant_id {pid!r}", [pid])
        seen.add(pid)
        breath = path.parent / row["breath_path"].strip()
        cough = path.parent / row["cough_path"].strip()
        if check_files:
            gone = [str(p) for p in (breath, cough) if not p.is_file()]
            if gone:
                missing.append(f"line {line} ({pid}): {', '.join(gone)}")
        records.append(ManifestRecord(pid, breath, cough, label))
    if missing:
        raise IngestError(f"{len(missing)} manifest rows reference missing files", missing)
    return records


def _header_line(sample_type):
    return ["#respire-dataset", f"layout={LAYOUT_VERSION}", f"sample_type={sample_type}"]


def write_dataset(path, dataset):
    """Write a dataset as CSV: a layout-version line, the column header, then one row per sample."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header_line(dataset.sample_type))
        w.writerow(["participant_id", "label", *dataset.columns])
        for pid, label, row in zip(dataset.participant_ids, dataset.labels, dataset.rows):
            w.writerow([pid, label, *(repr(float(v)) for v in row)])


def read_dataset(path):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            meta = next(reader)
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: missing header lines") from None
        if len(meta) != 3 or meta[0] != "#respire-dataset" or meta[1] != f"layout={LAYOUT_VERSION}":
            raise SchemaError(f"{path}: expected layout version {LAYOUT_VERSION}, found {meta}")
        sample_type = meta[2].partition("=")[2]
        columns = layout_for(sample_type)
        if header != ["participant_id", "label", *columns]:
            raise SchemaError(f"{path}: column header does not match layout version {LAYOUT_VERSION}")
        pids, labels, rows = [], [], []
        for n, rec in enumerate(reader, start=3):
            if len(rec) != len(columns) + 2:
                raise SchemaError(f"{path}:{n}: {len(rec)} cells, expected {len(columns) + 2}")
            pids.append(rec[0])
            labels.append(rec[1])
            rows.append([float(v) for v in rec[2:]])
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(columns))
    return LabeledDataset(data, labels, sample_type, pids, columns)
