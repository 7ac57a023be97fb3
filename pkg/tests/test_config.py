import pytest

from processxai.config import DEFAULT_CONFIG, ConfigError, PipelineConfig, load_config, parse_config
from processxai.dataset import DEFAULT_KEEP
from processxai.gbdt import ExactGreedyParams, GossParams
from processxai.synth import SynthConfig


def test_default_config_text(tmp_path):
    cfg = parse_config(DEFAULT_CONFIG, base_dir=tmp_path)
    assert cfg.input_path == str(tmp_path / "kamp.csv")
    assert cfg.keep == DEFAULT_KEEP
    assert cfg.test_fraction == 0.5
    assert cfg.smote.k == 5
    assert cfg.cv_folds == 3
    assert cfg.threshold == 0.70
    assert cfg.alphas == (0.05, 0.1, 0.2)
    assert cfg.exact == ExactGreedyParams()
    assert cfg.goss == GossParams()
    assert cfg.out_dir == str(tmp_path / "out")


def test_synth_section():
    cfg = parse_config("[synth]\nenabled = yes\nn_rows = 100\nrelevant = 2:10:90, 4:0:50\nseed = 3\n")
    assert cfg.synth == SynthConfig(n_rows=100, relevant=((2, 10.0, 90.0), (4, 0.0, 50.0)), seed=3)
    assert cfg.keep_list(("a", "b")) == ("a", "b")


def test_disabled_synth_needs_input():
    with pytest.raises(ConfigError, match="data.input"):
        parse_config("[synth]\nenabled = false\nn_rows = 5\n")


@pytest.mark.parametrize(
    "text, match",
    [
        ("[data]\ninput = a.csv\nbogus = 1\n", "data.bogus"),
        ("[data]\ninput = a.csv\n[ice]\nalphas = 0.1, -0.2\n", "alphas"),
        ("[data]\ninput = a.csv\n[shap]\nthreshold = 1.5\n", "threshold"),
        ("[data]\ninput = a.csv\n[gbdt]\nmodels = xgboost\n", "unknown model"),
        ("[data]\ninput = a.csv\n[smote]\nk = five\n", "smote.k"),
        ("[data]\ninput = a.csv\n[gbdt]\ncross_validate = maybe\n", "boolean"),
        ("[synth]\nenabled = true\nrelevant = 1-2-3\n", "index:lower:upper"),
        ("[data]\ninput = a.csv\n[gbdt]\na = 0.7\nb = 0.5\n", "a \\+ b"),
        ("not ini", "header"),
    ],
)
def test_bad_configs(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.ini")


def test_with_seed():
    cfg = PipelineConfig(synth=SynthConfig()).with_seed(9)
    assert (cfg.split_seed, cfg.synth.seed, cfg.smote.seed, cfg.goss.seed, cfg.shap_seed, cfg.ice_seed, cfg.cv_seed) == (9,) * 7


def test_shared_boosting_keys():
    cfg = parse_config("[data]\ninput = a.csv\n[gbdt]\nn_trees = 7\nlearning_rate = 0.3\nlambda = 2\n")
    for p in (cfg.exact, cfg.goss):
        assert (p.n_trees, p.learning_rate, p.reg_lambda) == (7, 0.3, 2.0)
