"""Run configuration: flat ``key = value`` files with command-line overrides.

Defaults, and the pipeline parameter each one pins:

=====================  ========  ==============================================
key                    default   meaning
=====================  ========  ==============================================
sample_rate            22050     working sample rate after resampling (Hz)
frame_len              2048      analysis frame length (samples)
hop_len                512       hop between frames (samples)
trim_db                60        edge-silence threshold below the loudest frame
rolloff                0.85      energy share S for the rolloff frequency
contrast_fmin          200       lower edge of the first contrast octave (Hz)
contrast_quantile      0.02      peak/valley share of bins per contrast band
cens_smooth_len        41        CENS smoothing window (frames)
delta_half_width       4         regression half width for MFCC deltas
n_folds                5         cross-validation folds
seed                   0         master seed for folds and model training
threshold              0.5       operating point for precision/recall
models                 all five  comma list of ADA, KNN, LR, RF, SVM
subsets                4 groups  comma list of categories, features or ``all``
sample_types           B,C,BC    which datasets ``rank`` evaluates
workers                1         parallel worker processes
plots                  false     also write SVG ROC/PR panels
<MODEL>.<param>        --        classifier hyperparameter, e.g. ``rf.n_trees``
=====================  ========  ==============================================
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .descriptors import SpectralParams
from .errors import ParameterError
from .models import DEFAULT_HYPERPARAMS, MODEL_KINDS, normalise_kind
from .vectorizer import CATEGORIES, FEATURE_DIMS, SAMPLE_TYPES, ExtractionSettings


def _split_list(value):
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value if str(v).strip()]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _bool(value):
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"not a boolean: {value!r}")


@dataclass
class RunConfig:
    sample_rate: int = 22050
    frame_len: int = 2048
    hop_len: int = 512
    trim_db: float = 60.0
    rolloff: float = 0.85
    contrast_fmin: float = 200.0
    contrast_quantile: float = 0.02
    cens_smooth_len: int = 41
    delta_half_width: int = 4
    n_folds: int = 5
    seed: int = 0
    threshold: float = 0.5
    models: list = field(default_factory=lambda: list(MODEL_KINDS))
    subsets: list = field(default_factory=lambda: list(CATEGORIES))
    sample_types: list = field(default_factory=lambda: list(SAMPLE_TYPES))
    workers: int = 1
    plots: bool = False
    hyperparams: dict = field(default_factory=dict)

    def validate(self):
        checks = [
            (self.sample_rate >= 8400, "sample_rate must be >= 8400 Hz (CQT reaches C8)"),
            (self.frame_len >= 16 and self.frame_len & (self.frame_len - 1) == 0,
             "frame_len must be a power of two >= 16"),
            (1 <= self.hop_len <= self.frame_len, "hop_len must lie in [1, frame_len]"),
            (self.trim_db >= 0, "trim_db must be non-negative"),
            (0 < self.rolloff <= 1, "rolloff must lie in (0, 1]"),
            (0 < self.contrast_fmin < self.sample_rate / 2, "contrast_fmin must lie below Nyquist"),
            (0 < self.contrast_quantile <= 0.5, "contrast_quantile must lie in (0, 0.5]"),
            (self.cens_smooth_len >= 1, "cens_smooth_len must be >= 1"),
            (self.delta_half_width >= 1, "delta_half_width must be >= 1"),
            (self.n_folds >= 2, "n_folds must be >= 2"),
            (0 <= self.threshold <= 1, "threshold must lie in [0, 1]"),
            (self.workers >= 1, "workers must be >= 1"),
            (bool(self.models), "models must not be empty"),
            (bool(self.subsets), "subsets must not be empty"),
        ]
        for ok, message in checks:
            if not ok:
                raise ParameterError(message)
        self.models = [normalise_kind(m) for m in self.models]
        for s in self.subsets:
            if s != "all" and s not in CATEGORIES and s not in FEATURE_DIMS:
                raise ParameterError(f"unknown subset {s!r}")
        for t in self.sample_types:
            if t not in SAMPLE_TYPES:
                raise ParameterError(f"unknown sample type {t!r}")
        for kind, params in self.hyperparams.items():
            unknown = set(params) - set(DEFAULT_HYPERPARAMS[kind])
            if unknown:
                raise ParameterError(f"unknown {kind} hyperparameters {sorted(unknown)}")
        return self

    def extraction(self):
        return ExtractionSettings(
            sample_rate_hz=self.sample_rate,
            frame_len=self.frame_len,
            hop_len=self.hop_len,
            trim_db=self.trim_db,
            spectral=SpectralParams(rolloff_fraction=self.rolloff, contrast_fmin=self.contrast_fmin,
                                    contrast_quantile=self.contrast_quantile),
            cens_smooth_len=self.cens_smooth_len,
            delta_half_width=self.delta_half_width,
        )

    def model_hyperparams(self):
        """Full hyperparameter set per model: defaults overlaid with overrides."""
        out = {}
        for kind in MODEL_KINDS:
            hp = dict(DEFAULT_HYPERPARAMS[kind])
            hp.update(self.hyperparams.get(kind, {}))
            out[kind] = hp
        return out

    def to_dict(self):
        d = asdict(self)
        d["hyperparams"] = self.model_hyperparams()
        return d

    def set(self, key, value):
        """Apply one ``key = value`` setting, converting to the field's type."""
        try:
            self._set(key.strip(), value)
        except ParameterError:
            raise
        except ValueError:
            raise ParameterError(f"bad value for {key.strip()!r}: {value!r}") from None

    def _set(self, key, value):
        if "." in key:
            kind, param = key.split(".", 1)
            kind = normalise_kind(kind)
            if param not in DEFAULT_HYPERPARAMS[kind]:
                raise ParameterError(f"unknown {kind} hyperparameter {param!r}")
            default = DEFAULT_HYPERPARAMS[kind][param]
            self.hyperparams.setdefault(kind, {})[param] = type(default)(float(value)) \
                if isinstance(default, int) else float(value)
            return
        types = {f.name: f for f in fields(self)}
        if key not in types or key == "hyperparams":
            raise ParameterError(f"unknown config key {key!r}")
        current = getattr(self, key)
        if isinstance(current, bool):
            value = _bool(value)
        elif isinstance(current, list):
            value = _split_list(value)
        elif isinstance(current, int):
            value = int(float(value))
        elif isinstance(current, float):
            value = float(value)
        setattr(self, key, value)


def load_config(path=None, overrides=None):
    cfg = RunConfig()
    if path is not None:
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{n}: expected key = value")
            key, value = line.split("=", 1)
            cfg.set(key, value.strip())
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg.set(key, value)
    return cfg.validate()
