"""Pipeline configuration: an INI file whose ``[section] key`` pairs are
addressed as dotted keys (``smote.k``, ``ice.alphas``)."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dataset import DEFAULT_KEEP, DEFAULT_TARGET
from .gbdt import EXACT_GREEDY, GOSS_LEAFWISE, VARIANTS, ExactGreedyParams, GossParams
from .attribution import ESTIMATORS
from .smote import SmoteConfig
from .synth import SynthConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    input_path: str | None = None
    target: str = DEFAULT_TARGET
    keep: tuple[str, ...] | None = None  # None: default list for CSV input, all columns for synthetic
    iqr_k: float = 1.5
    test_fraction: float = 0.5
    split_seed: int = 0

    synth: SynthConfig | None = None

    smote: SmoteConfig = SmoteConfig()

    models: tuple[str, ...] = VARIANTS
    exact: ExactGreedyParams = ExactGreedyParams()
    goss: GossParams = GossParams()
    cross_validate: bool = True
    cv_folds: int = 3
    cv_seed: int = 0

    shap_estimator: str = "tree"
    shap_background: int = 128
    shap_max_instances: int = 1000
    shap_permutations: int = 1000
    shap_seed: int = 0
    threshold: float = 0.70

    alphas: tuple[float, ...] = (0.05, 0.1, 0.2)
    ice_max_instances: int = 500
    ice_seed: int = 0
    export_curves: bool = False  # per-instance ICE rows are large; the PDP rows are always written

    out_dir: str = "out"
    plots: bool = False

    def __post_init__(self):
        if self.input_path is None and self.synth is None:
            raise ConfigError("set data.input or enable [synth]")
        if not self.alphas or any(not a > 0 for a in self.alphas):
            raise ConfigError("ice.alphas must be a non-empty list of positive numbers")
        if not 0 < self.threshold <= 1:
            raise ConfigError("shap.threshold must lie in (0, 1]")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("data.test_fraction must lie in (0, 1)")
        for m in self.models:
            if m not in VARIANTS:
                raise ConfigError(f"unknown model {m!r}; choose from {', '.join(VARIANTS)}")
        if self.shap_estimator not in ESTIMATORS:
            raise ConfigError(f"unknown shap.estimator {self.shap_estimator!r}")

    def params_for(self, model: str):
        return {EXACT_GREEDY: self.exact, GOSS_LEAFWISE: self.goss}[model]

    def keep_list(self, available: tuple[str, ...]) -> tuple[str, ...]:
        if self.keep is not None:
            return self.keep
        if self.synth is not None:
            return available
        return DEFAULT_KEEP

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Every stage seed set to ``seed``."""
        return replace(
            self,
            split_seed=seed,
            synth=None if self.synth is None else replace(self.synth, seed=seed),
            smote=replace(self.smote, seed=seed),
            goss=replace(self.goss, seed=seed),
            cv_seed=seed,
            shap_seed=seed,
            ice_seed=seed,
        )


def _list(value: str) -> list[str]:
    return [p.strip() for chunk in value.splitlines() for p in chunk.split(",") if p.strip()]


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {value!r}")


def _relevant(value: str):
    out = []
    for item in _list(value):
        try:
            j, a, b = item.split(":")
            out.append((int(j), float(a), float(b)))
        except ValueError:
            raise ConfigError(f"synth.relevant entries look like index:lower:upper, got {item!r}") from None
    return tuple(out)


def parse_config(text: str, base_dir: Path | None = None) -> PipelineConfig:
    """Build a :class:`PipelineConfig`; every problem is a :class:`ConfigError`.
    Relative paths resolve against ``base_dir``."""
    try:
        return _parse(text, base_dir)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _parse(text: str, base_dir: Path | None) -> PipelineConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    flat = {f"{s}.{k}": v for s in cp.sections() for k, v in cp.items(s)}
    used = set()

    def get(key, conv=str, default=None):
        if key not in flat:
            return default
        used.add(key)
        try:
            return conv(flat[key])
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None

    kw = {}
    input_path = get("data.input")
    if input_path:
        p = Path(input_path)
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        kw["input_path"] = str(p)
    kw["target"] = get("data.target", str, DEFAULT_TARGET)
    keep = get("data.keep", _list)
    if keep:
        kw["keep"] = tuple(keep)
    kw["iqr_k"] = get("data.iqr_k", float, 1.5)
    kw["test_fraction"] = get("data.test_fraction", float, 0.5)
    kw["split_seed"] = get("data.seed", int, 0)

    if get("synth.enabled", _bool, False):
        d = SynthConfig()
        kw["synth"] = SynthConfig(
            n_rows=get("synth.n_rows", int, d.n_rows),
            n_features=get("synth.n_features", int, d.n_features),
            relevant=get("synth.relevant", _relevant, d.relevant),
            base_defect_prob=get("synth.base_defect_prob", float, d.base_defect_prob),
            out_defect_prob=get("synth.out_defect_prob", float, d.out_defect_prob),
            noise=get("synth.noise", float, d.noise),
            seed=get("synth.seed", int, d.seed),
        )
    for key in [k for k in flat if k.startswith("synth.")]:
        used.add(key)

    d = SmoteConfig()
    kw["smote"] = SmoteConfig(
        k=get("smote.k", int, d.k),
        seed=get("smote.seed", int, d.seed),
        standardize=get("smote.standardize", _bool, d.standardize),
        target_count=get("smote.target_count", int, None),
    )

    models = get("gbdt.models", _list)
    if models:
        kw["models"] = tuple(models)
    e, g = ExactGreedyParams(), GossParams()
    n_trees = get("gbdt.n_trees", int, e.n_trees)
    lr = get("gbdt.learning_rate", float, e.learning_rate)
    lam = get("gbdt.lambda", float, e.reg_lambda)
    kw["exact"] = ExactGreedyParams(
        n_trees=n_trees,
        max_depth=get("gbdt.max_depth", int, e.max_depth),
        learning_rate=lr,
        reg_lambda=lam,
        gamma=get("gbdt.gamma", float, e.gamma),
        min_child_weight=get("gbdt.min_child_weight", float, e.min_child_weight),
    )
    kw["goss"] = GossParams(
        n_trees=n_trees,
        max_leaves=get("gbdt.max_leaves", int, g.max_leaves),
        learning_rate=lr,
        reg_lambda=lam,
        a=get("gbdt.a", float, g.a),
        b=get("gbdt.b", float, g.b),
        seed=get("gbdt.seed", int, g.seed),
        min_data_in_leaf=get("gbdt.min_data_in_leaf", int, g.min_data_in_leaf),
        min_child_weight=get("gbdt.goss_min_child_weight", float, g.min_child_weight),
    )
    kw["cross_validate"] = get("gbdt.cross_validate", _bool, True)
    kw["cv_folds"] = get("gbdt.cv_folds", int, 3)
    kw["cv_seed"] = get("gbdt.cv_seed", int, 0)

    kw["shap_estimator"] = get("shap.estimator", str, "tree")
    kw["shap_background"] = get("shap.background_size", int, 128)
    kw["shap_max_instances"] = get("shap.max_instances", int, 1000)
    kw["shap_permutations"] = get("shap.n_permutations", int, 1000)
    kw["shap_seed"] = get("shap.seed", int, 0)
    kw["threshold"] = get("shap.threshold", float, 0.70)

    alphas = get("ice.alphas", _list)
    if alphas:
        kw["alphas"] = tuple(float(a) for a in alphas)
    kw["ice_max_instances"] = get("ice.max_instances", int, 500)
    kw["ice_seed"] = get("ice.seed", int, 0)
    kw["export_curves"] = get("ice.export_curves", _bool, False)

    out = Path(get("output.dir", str, "out"))
    if not out.is_absolute() and base_dir is not None:
        out = base_dir / out
    kw["out_dir"] = str(out)
    kw["plots"] = get("output.plots", _bool, False)

    unknown = sorted(set(flat) - used)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return PipelineConfig(**kw)


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


DEFAULT_CONFIG = """\
; processxai pipeline configuration
[data]
input = kamp.csv
target = PassOrFail
keep =
    Max_Screw_RPM
    Average_Screw_RPM
    Max_Injection_Pressure
    Max_Switch_Over_Pressure
    Average_Back_Pressure
    Barrel_Temperature_1
    Barrel_Temperature_2
    Barrel_Temperature_3
    Barrel_Temperature_4
    Barrel_Temperature_5
    Barrel_Temperature_6
    Barrel_Temperature_7
    Hopper_Temperature
    Mold_Temperature_3
    Mold_Temperature_4
iqr_k = 1.5
test_fraction = 0.5
seed = 0

[smote]
k = 5
seed = 0

[gbdt]
models = exact-greedy, goss-leafwise
n_trees = 100
learning_rate = 0.1
lambda = 1.0
max_depth = 6
gamma = 0
min_child_weight = 1.0
max_leaves = 31
a = 0.2
b = 0.1
seed = 0
cross_validate = true
cv_folds = 3

[shap]
estimator = tree
background_size = 128
max_instances = 1000
threshold = 0.70
seed = 0

[ice]
alphas = 0.05, 0.1, 0.2
max_instances = 500
seed = 0
; write every ICE curve, not only the PDP (large file)
export_curves = false

[output]
dir = out
plots = false
"""
