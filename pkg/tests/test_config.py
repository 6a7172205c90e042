import pytest

from respire.config import RunConfig, load_config
from respire.errors import ParameterError, SchemaError
from respire.models import DEFAULT_HYPERPARAMS


def test_defaults_validate():
    cfg = load_config()
    assert cfg.models == ["ADA", "KNN", "LR", "RF", "SVM"]
    assert cfg.subsets == ["time", "spectral", "cepstral", "tonal"]
    ex = cfg.extraction()
    assert (ex.sample_rate_hz, ex.frame_len, ex.hop_len) == (22050, 2048, 512)


def test_file_and_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nn_folds = 4\nmodels = svm, rf  # trailing\nrf.n_trees = 30\nplots = yes\n\n")
    cfg = load_config(path, {"seed": 7, "n_folds": None})
    assert cfg.n_folds == 4 and cfg.seed == 7 and cfg.plots is True
    assert cfg.models == ["SVM", "RF"]
    hp = cfg.model_hyperparams()
    assert hp["RF"]["n_trees"] == 30 and isinstance(hp["RF"]["n_trees"], int)
    assert hp["LR"] == DEFAULT_HYPERPARAMS["LR"]
    assert cfg.to_dict()["hyperparams"]["RF"]["n_trees"] == 30


def test_override_beats_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("seed = 1\n")
    assert load_config(path, {"seed": 2}).seed == 2


@pytest.mark.parametrize("line", ["n_folds = 1", "hop_len = 4096", "frame_len = 1000", "rolloff = 0",
                                  "bogus = 3", "rf.depth = 3", "subsets = timbre", "sample_types = X",
                                  "n_folds = many", "plots = maybe", "just a line"])
def test_invalid_settings(tmp_path, line):
    path = tmp_path / "run.cfg"
    path.write_text(line + "\n")
    with pytest.raises(ParameterError):
        load_config(path)


def test_unknown_model_kind():
    with pytest.raises(SchemaError):
        load_config(overrides={"models": "svm,xgb"})


def test_feature_level_subset_allowed():
    assert load_config(overrides={"subsets": "MFCC,all"}).subsets == ["MFCC", "all"]


def test_validate_returns_self():
    cfg = RunConfig()
    assert cfg.validate() is cfg
