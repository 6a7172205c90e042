"""Respiratory audio feature extraction, classification and feature ranking.

Typical use::

    from respire import read_wav, build_feature_vector
    vec = build_feature_vector(read_wav("cough.wav"))
    vec.values.shape  # (812,)
"""

from .audio_io import AudioClip, condition, read_wav, trim_silence, write_wav
from .errors import RespireError
from .evaluation import (
    cross_validate,
    pr_ap,
    rank_features,
    rm_anova,
    roc_auc,
    stratified_folds,
)
from .models import MODEL_KINDS, score, train
from .vectorizer import (
    VECTOR_LEN,
    LabeledDataset,
    build_feature_vector,
    concat_bc,
    read_dataset,
    write_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "AudioClip", "condition", "read_wav", "trim_silence", "write_wav", "RespireError",
    "cross_validate", "rank_features", "rm_anova", "roc_auc", "pr_ap", "stratified_folds",
    "MODEL_KINDS", "score", "train", "VECTOR_LEN", "LabeledDataset", "build_feature_vector",
    "concat_bc", "read_dataset", "write_dataset",
]
