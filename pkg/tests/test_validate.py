import numpy as np
import pytest

from processxai.dataset import DatasetError
from processxai.ice import ControlRange
from processxai.validate import (
    NA,
    defect_rate,
    filter_in_range,
    format_rate,
    read_report_csv,
    render_table,
    validation_report,
    write_report_csv,
)

from conftest import make_ds


def counts_ds(normal, defect):
    y = np.array([1] * normal + [0] * defect)
    return make_ds(np.zeros((y.size, 1)), y)


def test_empty_range_list_keeps_everything(rng):
    ds = make_ds(rng.normal(size=(10, 2)), rng.integers(0, 2, 10))
    assert filter_in_range(ds, []).equals(ds)


def test_closed_bounds():
    ds = make_ds([[141.59], [141.60], [142.0], [142.40], [142.41]], [1, 1, 0, 1, 1], ["Max_Injection_Pressure"])
    out = filter_in_range(ds, [ControlRange(0, "Max_Injection_Pressure", 0.05, 141.60, 142.40)])
    assert out.features[:, 0].tolist() == [141.60, 142.0, 142.40]
    assert out.target.tolist() == [1, 0, 1]


def test_unknown_feature():
    with pytest.raises(DatasetError):
        filter_in_range(counts_ds(1, 1), [ControlRange(0, "nope", 0.1, 0, 1)])


@pytest.mark.parametrize(
    "normal, defect, rate",
    [(969, 2, 0.21), (3995, 40, 0.99), (2284, 20, 0.87), (2314, 3, 0.13), (50, 0, 0.0), (1, 1, 50.0)],
)
def test_rates(normal, defect, rate):
    # hand check: 100 * defect / (normal + defect) rounded to 2 decimals
    assert defect_rate(counts_ds(normal, defect)) == rate


def test_rate_of_empty_set():
    assert defect_rate(counts_ds(0, 0)) is None
    assert format_rate(None) == NA
    assert format_rate(0.0) == "0.00"


def test_half_up_rounding():
    # 1 / 8 = 0.125 exactly; half-up gives 0.13 where round-half-even gives 0.12
    assert defect_rate(counts_ds(799, 1)) == 0.13


def test_report_rows_and_flags(tmp_path):
    X = np.array([[1.0], [2.0], [3.0], [4.0], [5.0], [6.0], [7.0], [8.0]])
    y = np.array([0, 1, 1, 1, 1, 1, 0, 1])
    test = make_ds(X, y, ["p"])
    per_alpha = {
        0.05: [ControlRange(0, "p", 0.05, 2.0, 4.0)],
        0.1: [ControlRange(0, "p", 0.1, 2.0, 7.0)],
        0.2: [ControlRange(0, "p", 0.2, 9.0, 9.5)],
    }
    rep = validation_report(test, per_alpha)
    assert rep.baseline.label == "Original Data"
    assert (rep.baseline.normal, rep.baseline.defect, rep.baseline.rate) == (6, 2, 25.0)
    assert rep.baseline.rate == defect_rate(test)
    r = rep.by_alpha()
    assert (r[0.05].normal, r[0.05].defect, r[0.05].rate) == (3, 0, 0.0)
    assert rep.improved(r[0.05])
    assert (r[0.1].normal, r[0.1].defect) == (5, 1)
    assert rep.improved(r[0.1])  # 16.67 < 25
    assert r[0.2].is_empty and r[0.2].rate is None and not rep.improved(r[0.2])

    write_report_csv(rep, tmp_path / "v.csv")
    back = read_report_csv(tmp_path / "v.csv")
    assert back == rep
    text = render_table(rep, "exact-greedy")
    lines = text.splitlines()
    assert len(lines) == 5
    assert lines[3].split()[-3:] == [NA, NA, NA]
    assert lines[4].split()[-3:] == ["6", "2", "25.00"]


def test_nested_filters_are_subsets(rng):
    X = rng.uniform(0, 10, size=(300, 2))
    ds = make_ds(X, rng.integers(0, 2, 300), ["a", "b"])
    small = [ControlRange(0, "a", 0.05, 3, 5), ControlRange(1, "b", 0.05, 2, 6)]
    big = [ControlRange(0, "a", 0.2, 2, 7), ControlRange(1, "b", 0.2, 1, 9)]
    s, b = filter_in_range(ds, small), filter_in_range(ds, big)
    assert s.n_rows <= b.n_rows <= ds.n_rows
    rows_b = {tuple(r) for r in b.features}
    assert all(tuple(r) in rows_b for r in s.features)
    # order preserved
    keep = (X[:, 0] >= 2) & (X[:, 0] <= 7) & (X[:, 1] >= 1) & (X[:, 1] <= 9)
    assert np.array_equal(b.features, X[keep])
