import numpy as np
import pytest

from processxai.dataset import ProcessDataset
from processxai.gbdt import BoostedEnsemble
from processxai.gbdt.tree import TreeBuilder


def random_tree(rng, n_features, depth, features=None, grid=(0.0, 1.0)):
    """Random full tree over ``features`` with thresholds on a coarse grid
    (so repeated thresholds and shared features are common)."""
    features = list(range(n_features)) if features is None else list(features)
    b = TreeBuilder()

    def grow(node, d):
        if d == depth or rng.random() < 0.2:
            b.set_leaf(node, float(rng.normal()))
            return
        f = int(rng.choice(features))
        thr = float(np.round(rng.uniform(*grid), 1))
        left, right = b.add(), b.add()
        b.set_split(node, f, thr, left, right)
        grow(left, d + 1)
        grow(right, d + 1)

    grow(b.add(), 0)
    return b.build()


def random_ensemble(rng, n_features, n_trees, depth=3, features=None):
    trees = [random_tree(rng, n_features, depth, features) for _ in range(n_trees)]
    names = tuple(f"f{j}" for j in range(n_features))
    return BoostedEnsemble(float(rng.normal()), trees, float(rng.uniform(0.1, 1.0)), "exact-greedy", names)


def make_ds(X, y, names=None):
    X = np.asarray(X, dtype=float)
    names = tuple(f"f{j}" for j in range(X.shape[1])) if names is None else tuple(names)
    return ProcessDataset(X, names, np.asarray(y, dtype=np.int64))


def separable(n=400, d=3, seed=0):
    """Two classes split by a hyperplane with a margin."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, d))
    s = X @ np.linspace(1.0, 0.5, d)
    keep = np.abs(s) > 0.1
    X, s = X[keep], s[keep]
    return make_ds(X, (s > 0).astype(int))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ---------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def record():
    """``record(n, ok, detail)`` notes the outcome of acceptance criterion n
    (printed at the end of the run) and returns ``ok``."""

    def _record(n: int, ok: bool, detail: str = "") -> bool:
        ACCEPTANCE[n] = ("PASS" if ok else "FAIL", detail)
        print(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {status}  {detail}")
