"""Stage runners. Every stage reads its inputs from, and writes its outputs
to, the output directory, so running the stages one by one produces the same
files as a full run.

Layout of ``out_dir``::

    synthetic.csv, ground_truth.csv      (synth)
    quality.csv, train.csv, test.csv,
    split_counts.csv                     (ingest)
    train_oversampled.csv,
    oversample_counts.csv                (oversample)
    <model>/model.txt, metrics.csv       (train)
    <model>/shap_importance.csv,
    <model>/shap_values.csv              (explain)
    <model>/control_ranges.csv,
    <model>/ice_curves.csv,
    <model>/ranges_table.txt             (ranges)
    <model>/validation.csv,
    <model>/validation.txt               (validate)
    summary.txt                          (report)
"""

from __future__ import annotations

import csv
import logging
import time
from pathlib import Path

import numpy as np

from . import attribution, gbdt, ice, synth, validate
from .config import PipelineConfig
from .dataset import ProcessDataset, load_csv, quality_check, select_features, split, write_csv
from .smote import oversample

log = logging.getLogger(__name__)

STAGES = ("synth", "ingest", "oversample", "train", "explain", "ranges", "validate", "report")
EXIT_CODES = {"config": 2, **{s: 3 + i for i, s in enumerate(STAGES)}}


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = EXIT_CODES[stage]


def _require(stage: str, path: Path, what: str) -> Path:
    if not path.is_file():
        raise StageError(stage, f"missing {what}: {path} (run the earlier stage first)")
    return path


def _write_rows(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_kv(path: Path) -> dict[str, str]:
    with path.open(newline="", encoding="utf-8") as fh:
        return {r["key"]: r["value"] for r in csv.DictReader(fh)}


def _load(stage: str, path: Path, what: str, target: str) -> ProcessDataset:
    return load_csv(_require(stage, path, what), target)


class Pipeline:
    def __init__(self, cfg: PipelineConfig, out_dir=None):
        self.cfg = cfg
        self.out = Path(out_dir if out_dir is not None else cfg.out_dir)

    def model_dir(self, model: str) -> Path:
        return self.out / model

    # -- stages ---------------------------------------------------------------

    def run_synth(self) -> Path:
        cfg = self.cfg.synth
        if cfg is None:
            raise StageError("synth", "no [synth] section enabled in the config")
        self.out.mkdir(parents=True, exist_ok=True)
        ds, truth = synth.generate(cfg)
        path = self.out / "synthetic.csv"
        write_csv(ds, path)
        synth.write_ground_truth(truth, self.out / "ground_truth.csv")
        return path

    def input_path(self) -> Path:
        if self.cfg.input_path is not None:
            return Path(self.cfg.input_path)
        return self.out / "synthetic.csv"

    def run_ingest(self) -> None:
        stage = "ingest"
        cfg = self.cfg
        self.out.mkdir(parents=True, exist_ok=True)
        raw = _load(stage, self.input_path(), "input data", cfg.target)
        ds = select_features(raw, cfg.keep_list(raw.feature_names))
        report = quality_check(ds, cfg.iqr_k)
        _write_rows(
            self.out / "quality.csv",
            ("feature", "missing", "outliers", "rows"),
            [(n, m, o, report.total_rows) for n, m, o in zip(report.feature_names, report.missing_count, report.outlier_count)],
        )
        pair = split(ds, cfg.test_fraction, cfg.split_seed)
        write_csv(pair.train, self.out / "train.csv")
        write_csv(pair.test, self.out / "test.csv")
        _write_rows(
            self.out / "split_counts.csv",
            ("set", "normal", "defective"),
            [("train", *pair.train.class_counts()), ("test", *pair.test.class_counts())],
        )

    def run_oversample(self) -> None:
        stage = "oversample"
        cfg = self.cfg
        train = _load(stage, self.out / "train.csv", "training split", cfg.target)
        test = _load(stage, self.out / "test.csv", "test split", cfg.target)
        balanced = oversample(train, cfg.smote)
        write_csv(balanced, self.out / "train_oversampled.csv")
        _write_rows(
            self.out / "oversample_counts.csv",
            ("set", "normal", "defective"),
            [("train", *balanced.class_counts()), ("test", *test.class_counts())],
        )

    def run_train(self, model: str) -> None:
        stage = "train"
        cfg = self.cfg
        balanced = _load(stage, self.out / "train_oversampled.csv", "oversampled training set", cfg.target)
        test = _load(stage, self.out / "test.csv", "test split", cfg.target)
        params = cfg.params_for(model)
        ens = gbdt.fit(balanced, params)
        d = self.model_dir(model)
        d.mkdir(parents=True, exist_ok=True)
        gbdt.save(ens, d / "model.txt")
        cm = gbdt.evaluate(ens, test)
        rows = [
            ("model", model),
            ("tp", cm.tp),
            ("fp", cm.fp),
            ("tn", cm.tn),
            ("fn", cm.fn),
            ("accuracy", repr(cm.accuracy)),
            ("accuracy_percent", f"{cm.accuracy_percent:.2f}"),
        ]
        if cfg.cross_validate:
            cv = gbdt.cross_validate(balanced, params, cfg.cv_folds, cfg.cv_seed)
            for i, a in enumerate(cv.fold_accuracies, start=1):
                rows.append((f"cv_fold_{i}", "degenerate" if a is None else repr(a)))
            rows.append(("cv_mean", repr(cv.mean)))
        _write_rows(d / "metrics.csv", ("key", "value"), rows)

    def _model(self, stage: str, model: str) -> gbdt.BoostedEnsemble:
        path = _require(stage, self.model_dir(model) / "model.txt", "model")
        return gbdt.load(path)

    def run_explain(self, model: str) -> None:
        stage = "explain"
        cfg = self.cfg
        ens = self._model(stage, model)
        train = _load(stage, self.out / "train.csv", "training split", cfg.target)
        if train.feature_names != ens.feature_names:
            raise StageError(stage, "model features do not match the training split")
        bg = attribution.background_sample(train, cfg.shap_background, cfg.shap_seed)
        rows = np.arange(train.n_rows)
        if train.n_rows > cfg.shap_max_instances:
            rng = np.random.default_rng(cfg.shap_seed + 1)
            rows = np.sort(rng.choice(train.n_rows, cfg.shap_max_instances, replace=False))
        explained = train.take(rows)
        report = attribution.explain(
            ens, explained, bg, cfg.shap_estimator, cfg.threshold, cfg.shap_permutations, cfg.shap_seed
        )
        d = self.model_dir(model)
        attribution.write_report_csv(report, d / "shap_importance.csv")
        attribution.write_phi_csv(report.phi, train.feature_names, d / "shap_values.csv")

    def run_ranges(self, model: str) -> None:
        stage = "ranges"
        cfg = self.cfg
        ens = self._model(stage, model)
        train = _load(stage, self.out / "train.csv", "training split", cfg.target)
        d = self.model_dir(model)
        rows = attribution.read_report_csv(_require(stage, d / "shap_importance.csv", "Shapley report"))
        main = [train.index_of(r["feature"]) for r in rows if r["selected"]]
        ranges, surfaces = ice.ranges_table(ens, train, main, cfg.alphas, cfg.ice_max_instances, cfg.ice_seed)
        ice.write_ranges_csv(ranges, d / "control_ranges.csv")
        ice.write_curves_csv(surfaces, d / "ice_curves.csv", include_curves=cfg.export_curves)
        (d / "ranges_table.txt").write_text(ice.ranges_wide_table(ranges), encoding="utf-8")
        if cfg.plots:
            ice.plot_surfaces(surfaces, ranges, d)

    def run_validate(self, model: str) -> None:
        stage = "validate"
        cfg = self.cfg
        test = _load(stage, self.out / "test.csv", "test split", cfg.target)
        d = self.model_dir(model)
        ranges = ice.read_ranges_csv(_require(stage, d / "control_ranges.csv", "control ranges"))
        per_alpha = validate.group_by_alpha(ranges)
        for a in cfg.alphas:
            per_alpha.setdefault(float(a), [])
        report = validate.validation_report(test, per_alpha)
        validate.write_report_csv(report, d / "validation.csv")
        (d / "validation.txt").write_text(validate.render_table(report, model), encoding="utf-8")

    def run_report(self) -> str:
        text = render_summary(self.out, self.cfg.models)
        (self.out / "summary.txt").write_text(text, encoding="utf-8")
        return text

    def run_all(self) -> str:
        if self.cfg.synth is not None and self.cfg.input_path is None:
            self.run_stage("synth")
        for stage in ("ingest", "oversample"):
            self.run_stage(stage)
        for model in self.cfg.models:
            t0 = time.perf_counter()
            for stage in ("train", "explain", "ranges", "validate"):
                self.run_stage(stage, model)
            log.info("%s: model stages took %.1f s", model, time.perf_counter() - t0)
        return self.run_stage("report")

    def run_stage(self, stage: str, model: str | None = None):
        per_model = stage in ("train", "explain", "ranges", "validate")
        try:
            if per_model:
                models = [model] if model is not None else list(self.cfg.models)
                for m in models:
                    log.info("stage %s (%s)", stage, m)
                    getattr(self, f"run_{stage}")(m)
                return None
            log.info("stage %s", stage)
            return getattr(self, f"run_{stage}")()
        except StageError:
            raise
        except (ValueError, OSError, KeyError) as exc:
            raise StageError(stage, str(exc)) from exc


def run_pipeline(cfg: PipelineConfig, out_dir=None) -> str:
    return Pipeline(cfg, out_dir).run_all()


# -- summary ------------------------------------------------------------------


def _read_table(path: Path) -> list[dict]:
    with path.open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _counts_block(title: str, path: Path) -> list[str]:
    if not path.is_file():
        return []
    lines = [title, f"  {'':8}{'Normal':>10}{'Defective':>11}"]
    for r in _read_table(path):
        lines.append(f"  {r['set']:8}{int(r['normal']):>10,}{int(r['defective']):>11,}")
    return lines + [""]


def render_summary(out: Path, models) -> str:
    """Plain-text summary rebuilt from the CSV artifacts only."""
    out = Path(out)
    lines = ["processxai pipeline summary", "=" * 27, ""]
    lines += _counts_block("Train/test split", out / "split_counts.csv")
    lines += _counts_block("After oversampling", out / "oversample_counts.csv")
    truth_path = out / "ground_truth.csv"
    truth = {r["feature"]: (float(r["sweet_lower"]), float(r["sweet_upper"])) for r in _read_table(truth_path)} if truth_path.is_file() else {}

    for model in models:
        d = out / model
        if not d.is_dir():
            continue
        lines += [f"[{model}]", ""]
        if (d / "metrics.csv").is_file():
            m = _read_kv(d / "metrics.csv")
            tp, fp, tn, fn = (int(m[k]) for k in ("tp", "fp", "tn", "fn"))
            lines += [
                "Confusion matrix (test)    Actual normal  Actual defective",
                f"  Predicted normal         {tp:>13,}  {fp:>16,}",
                f"  Predicted defective      {fn:>13,}  {tn:>16,}",
                f"  Accuracy (%)             {m['accuracy_percent']}",
            ]
            if "cv_mean" in m:
                folds = [v for k, v in m.items() if k.startswith("cv_fold_")]
                shown = ", ".join(v if v == "degenerate" else f"{float(v):.4f}" for v in folds)
                lines.append(f"  CV accuracy              {shown} (mean {float(m['cv_mean']):.4f})")
            lines.append("")
        if (d / "shap_importance.csv").is_file():
            rows = attribution.read_report_csv(d / "shap_importance.csv")
            lines.append("Main features (mean |SHAP|, cumulative ratio)")
            for r in rows:
                if r["selected"]:
                    lines.append(f"  {r['rank']:>2}  {r['feature']:<28}{r['mean_abs_shap']:>8.2f}{r['cumulative_ratio']:>8.2f}")
            lines.append("")
        if (d / "ranges_table.txt").is_file():
            lines.append("Control ranges")
            lines += ["  " + s for s in (d / "ranges_table.txt").read_text(encoding="utf-8").splitlines()]
            lines.append("")
            if truth and (d / "control_ranges.csv").is_file():
                lines.append("Planted vs recovered (Jaccard)")
                for r in ice.read_ranges_csv(d / "control_ranges.csv"):
                    if r.feature_name in truth:
                        j = synth.ground_truth_overlap(truth[r.feature_name], r)
                        lines.append(f"  {r.feature_name:<12} alpha={r.alpha:<6g} {j:.3f}")
                lines.append("")
        if (d / "validation.csv").is_file():
            rep = validate.read_report_csv(d / "validation.csv")
            lines.append("Validation on the untouched test set")
            lines += ["  " + s for s in validate.render_table(rep).splitlines()]
            b = rep.baseline
            if b.ratio is not None:
                lines.append(f"  (baseline exact ratio {b.ratio:.4f}% = {b.defect}/{b.normal + b.defect})")
            lines.append("")
    return "\n".join(lines).rstrip() + "\n"
