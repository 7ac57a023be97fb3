"""ICE curves, partial dependence, and alpha-threshold control ranges."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import ProcessDataset
from .gbdt.ensemble import BoostedEnsemble
from .gbdt.loss import sigmoid


@dataclass(frozen=True, eq=False)
class IceSurface:
    feature: int
    feature_name: str
    grid: np.ndarray  # sorted distinct observed values
    curves: np.ndarray  # (instances, grid) predicted probability of "normal"
    pdp: np.ndarray
    instance_ids: np.ndarray  # row indices into the source dataset

    @property
    def is_constant(self) -> bool:
        """Feature takes a single value: the surface is one column wide."""
        return self.grid.size == 1


@dataclass(frozen=True)
class ControlRange:
    feature: int
    feature_name: str
    alpha: float
    lower: float
    upper: float

    def contains(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        return (v >= self.lower) & (v <= self.upper)


def _proba_fn(model):
    if hasattr(model, "predict_proba"):
        return model.predict_proba
    if callable(model):
        return model
    raise TypeError("model must be callable or provide predict_proba()")


def _tree_ice(tree, X: np.ndarray, feature: int, values: np.ndarray) -> np.ndarray:
    """Output of one tree for every (row, value) composite.

    Each composite reaches exactly one leaf, so the indicator product below
    adds a single leaf value to exact zeros and matches direct prediction
    bit for bit.
    """
    n_leaves = len(tree.leaves)
    rows_in = np.ones((X.shape[0], n_leaves))
    vals_in = np.ones((n_leaves, values.size))
    for k, (w, box) in enumerate(tree.leaves):
        ok = np.ones(X.shape[0], dtype=bool)
        for f, (lo, hi) in box.items():
            if f == feature:
                vals_in[k] = (values > lo) & (values <= hi)
            else:
                ok &= (X[:, f] > lo) & (X[:, f] <= hi)
        rows_in[:, k] = np.where(ok, w, 0.0)
    return rows_in @ vals_in


def _ice_curves(model, X: np.ndarray, feature: int, grid: np.ndarray) -> np.ndarray:
    if isinstance(model, BoostedEnsemble):
        # outputs only change where the value crosses a split threshold on
        # this feature: evaluate one grid value per threshold bin
        thr = np.unique(np.concatenate([t.threshold[t.feature == feature] for t in model.trees] or [[]]))
        bins = np.searchsorted(thr, grid, side="left")
        _, first, expand = np.unique(bins, return_index=True, return_inverse=True)
        reps = grid[first]
        acc = np.zeros((X.shape[0], reps.size))
        for t in model.trees:
            if np.any(t.feature == feature):
                acc += _tree_ice(t, X, feature, reps)
            else:
                acc += t.predict(X)[:, None]
        raw = model.base_score + model.learning_rate * acc
        return sigmoid(raw)[:, expand.ravel()]

    f = _proba_fn(model)
    n, d = X.shape
    out = np.empty((n, grid.size))
    step = max(1, (1 << 18) // max(grid.size, 1))
    for s in range(0, n, step):
        block = X[s : s + step]
        comp = np.repeat(block[:, None, :], grid.size, axis=1)
        comp[:, :, feature] = grid[None, :]
        out[s : s + step] = np.asarray(f(comp.reshape(-1, d)), dtype=float).reshape(
            block.shape[0], grid.size
        )
    return out


def ice_surface(
    model, ds: ProcessDataset, feature: int, max_instances: int | None = 500, seed: int = 0
) -> IceSurface:
    """Sweep ``feature`` over its observed values for every retained row,
    holding the row's other features fixed."""
    if not 0 <= feature < ds.n_features:
        raise ValueError(f"feature index {feature} out of range")
    if ds.n_rows == 0:
        raise ValueError("dataset is empty")
    grid = np.unique(ds.features[:, feature])
    ids = np.arange(ds.n_rows)
    if max_instances is not None and ds.n_rows > max_instances:
        ids = np.sort(np.random.default_rng(seed).choice(ds.n_rows, max_instances, replace=False))
    curves = _ice_curves(model, ds.features[ids], feature, grid)
    return IceSurface(
        feature, ds.feature_names[feature], grid, curves, curves.mean(axis=0), ids
    )


def pdp(surface: IceSurface) -> np.ndarray:
    return surface.curves.mean(axis=0)


def control_range(
    pdp_values, grid, alpha: float, feature: int = 0, feature_name: str = ""
) -> ControlRange:
    """Span of grid values whose partial dependence is within ``alpha`` of
    the maximum. The span is the hull of all qualifying points."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    y = np.asarray(pdp_values, dtype=float)
    x = np.asarray(grid, dtype=float)
    if x.size == 0 or x.shape != y.shape:
        raise ValueError("grid must be non-empty and match the pdp length")
    q = x[y >= y.max() - alpha]
    return ControlRange(feature, feature_name, float(alpha), float(q.min()), float(q.max()))


def ranges_table(
    model,
    ds: ProcessDataset,
    main_features: Sequence[int],
    alphas: Sequence[float] = (0.05, 0.1, 0.2),
    max_instances: int | None = 500,
    seed: int = 0,
):
    """One :class:`ControlRange` per (feature, alpha), features in the given
    order. Returns ``(ranges, surfaces)``."""
    ranges, surfaces = [], []
    for j in main_features:
        s = ice_surface(model, ds, int(j), max_instances, seed)
        surfaces.append(s)
        for a in alphas:
            ranges.append(control_range(s.pdp, s.grid, a, s.feature, s.feature_name))
    return ranges, surfaces


RANGES_HEADER = ("feature", "feature_index", "alpha", "lower", "upper")


def write_ranges_csv(ranges: Sequence[ControlRange], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RANGES_HEADER)
        for r in ranges:
            w.writerow([r.feature_name, r.feature, repr(r.alpha), repr(r.lower), repr(r.upper)])


def read_ranges_csv(path) -> list[ControlRange]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [
            ControlRange(
                int(r["feature_index"]), r["feature"], float(r["alpha"]), float(r["lower"]), float(r["upper"])
            )
            for r in csv.DictReader(fh)
        ]


def ranges_wide_table(ranges: Sequence[ControlRange]) -> str:
    """Plain-text table: one row per feature, one column per alpha."""
    alphas = sorted({r.alpha for r in ranges})
    names = list(dict.fromkeys(r.feature_name for r in ranges))
    cell = {(r.feature_name, r.alpha): f"[{r.lower:.2f}, {r.upper:.2f}]" for r in ranges}
    head = ["Variable", *(f"alpha={a:g}" for a in alphas)]
    body = [[n, *(cell.get((n, a), "-") for a in alphas)] for n in names]
    widths = [max(len(str(row[i])) for row in [head, *body]) for i in range(len(head))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join(fmt.format(*row).rstrip() for row in [head, *body]) + "\n"


def write_curves_csv(surfaces: Sequence[IceSurface], path, include_curves: bool = True) -> None:
    """Long format ``feature, grid_value, instance_id, prediction``; PDP rows
    use the instance id ``pdp``."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", "grid_value", "instance_id", "prediction"])
        for s in surfaces:
            if include_curves:
                for row_id, curve in zip(s.instance_ids, s.curves):
                    for gv, p in zip(s.grid, curve):
                        w.writerow([s.feature_name, repr(float(gv)), int(row_id), repr(float(p))])
            for gv, p in zip(s.grid, s.pdp):
                w.writerow([s.feature_name, repr(float(gv)), "pdp", repr(float(p))])


def plot_surfaces(surfaces: Sequence[IceSurface], ranges: Sequence[ControlRange], out_dir) -> list[Path]:
    """One SVG per feature: ICE curves, the PDP overlaid dotted, and the
    control-range bounds. Needs matplotlib."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "processxai"
    out_dir = Path(out_dir)
    paths = []
    for s in surfaces:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.plot(s.grid, s.curves.T, color="tab:blue", alpha=0.08, linewidth=0.6)
        ax.plot(s.grid, s.pdp, color="tab:orange", linestyle=":", linewidth=2.0, label="PDP")
        ax.axhline(s.pdp.max(), color="tab:red", linewidth=0.8)
        ax.axhline(s.pdp.min(), color="tab:red", linewidth=0.8)
        for r in ranges:
            if r.feature == s.feature:
                ax.axvspan(r.lower, r.upper, alpha=0.08, color="tab:green")
        ax.set_xlabel(s.feature_name)
        ax.set_ylabel("P(normal)")
        ax.set_ylim(0, 1)
        ax.legend(loc="lower right")
        fig.tight_layout()
        p = out_dir / f"ice_{s.feature_name}.svg"
        fig.savefig(p, format="svg", metadata={"Date": None})
        plt.close(fig)
        paths.append(p)
    return paths
