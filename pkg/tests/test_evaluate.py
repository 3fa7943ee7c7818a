import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from salesfc.errors import CoverageError
from salesfc.evaluate import compute_weights, rmsse, wrmsse
from salesfc.ingest import LEVEL_FIELDS, build_hierarchy

from conftest import make_panel


def test_perfect_forecast():
    assert rmsse([1, 3, 2, 4], [5, 5], [5, 5]) == 0.0


def test_rmsse_hand_example():
    assert rmsse([1, 3, 2, 4], [5, 5], [4, 6]) == pytest.approx(math.sqrt(1 / 3), rel=1e-12)


def test_rmsse_scale_invariant():
    a = rmsse([1, 3, 2, 4], [5, 5], [4, 6])
    assert rmsse([7, 21, 14, 28], [35, 35], [28, 42]) == pytest.approx(a, rel=1e-12)


def test_constant_train_policy():
    assert rmsse([2, 2, 2], [2, 2], [2, 2]) == 0.0
    assert math.isnan(rmsse([2, 2, 2], [2, 2], [3, 2]))


def test_single_series_weights():
    h = build_hierarchy(make_panel([np.arange(30)]))
    w = compute_weights(h)
    # one bottom series: all twelve levels carry the same mass
    np.testing.assert_allclose(w, 1 / 12)


def test_two_series_weights():
    p = make_panel([[0] * 2 + [1] * 28, [0] * 2 + [1] * 28], items=["A", "B"])
    p.values[0, 2:] = 0
    p.values[0, -1] = 30
    p.values[1, 2:] = 0
    p.values[1, -1] = 70
    h = build_hierarchy(p)
    bottom = h.levels == "item/store"
    w = compute_weights(h)
    np.testing.assert_allclose(w[bottom] / w[bottom].sum(), [0.3, 0.7], rtol=1e-12)


def _tiny_panel(rng, n_days=60):
    items, stores, states = [], [], []
    for st_ in ("CA", "TX"):
        for s in (1, 2):
            for it in ("A", "B"):
                items.append(it)
                stores.append(f"{st_}_{s}")
                states.append(st_)
    vals = rng.poisson(3, (8, n_days))
    return make_panel(vals, items=items, stores=stores, states=states,
                      cats=["FOODS", "HOBBIES"] * 4,
                      depts=["FOODS_1", "HOBBIES_1"] * 4)


def _flat_rows(panel):
    """Every hierarchy row as (level, key tuple, member panel rows) by flat enumeration."""
    rows = []
    for level, fields in LEVEL_FIELDS.items():
        combos = {}
        for i in range(panel.n_series):
            key = tuple(panel.attribute(f)[i] for f in fields)
            combos.setdefault(key, []).append(i)
        rows += [(level, k, v) for k, v in sorted(combos.items())]
    return rows


def test_weights_match_flat_summation(rng):
    items = ["A", "B", "C"] * 2
    stores = ["CA_1"] * 3 + ["TX_1"] * 3
    p = make_panel(rng.poisson(4, (6, 40)), items=items, stores=stores,
                   cats=["FOODS", "FOODS", "HOBBIES"] * 2)
    prices = rng.uniform(1, 5, (6, 40))
    h = build_hierarchy(p)
    w = compute_weights(h, prices)
    rev = (p.values[:, -28:] * prices[:, -28:]).sum(axis=1)
    flat = np.array([rev[m].sum() for _, _, m in _flat_rows(p)])
    np.testing.assert_allclose(w, flat / flat.sum(), rtol=1e-12, atol=1e-15)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)


def _brute_wrmsse(panel, T, actual, fc, prices=None):
    rows = _flat_rows(panel)
    total_w, parts = 0.0, []
    for _, _, m in rows:
        train = panel.values[m, :T].sum(axis=0).astype(float)
        a = actual[m].sum(axis=0)
        f = fc[m].sum(axis=0)
        win = panel.values[m, T - 28:T].astype(float)
        if prices is not None:
            win = win * prices[m, T - 28:T]
        w = win.sum()
        denom = sum((train[t] - train[t - 1]) ** 2 for t in range(1, T)) / (T - 1)
        num = sum((x - y) ** 2 for x, y in zip(a, f)) / len(a)
        parts.append((w, math.sqrt(num / denom)))
        total_w += w
    return sum(w / total_w * r for w, r in parts)


def test_wrmsse_brute_force(rng):
    p = _tiny_panel(rng, 67)
    T, h = 60, 7
    hist = p.head_days(T)
    actual = p.values[:, T:T + h].astype(float)
    fc = actual + rng.normal(0, 1, actual.shape)
    rep = wrmsse(build_hierarchy(hist), actual, fc)
    assert rep.wrmsse == pytest.approx(_brute_wrmsse(p, T, actual, fc), rel=1e-10)
    assert sum(rep.per_level.values()) == pytest.approx(rep.wrmsse, rel=1e-12)


def test_single_series_equals_rmsse(rng):
    y = rng.poisson(5, 40)
    p = make_panel([y])
    rep = wrmsse(build_hierarchy(p.head_days(33)), [y[33:]], [np.full(7, 5.0)])
    assert rep.wrmsse == pytest.approx(rmsse(y[:33], y[33:], np.full(7, 5.0)), rel=1e-12)


def test_perfect_bottom_gives_zero(rng):
    p = _tiny_panel(rng, 67)
    actual = p.values[:, 60:67]
    rep = wrmsse(build_hierarchy(p.head_days(60)), actual, actual.astype(float))
    assert rep.wrmsse == 0.0
    assert rep.summary() == "WRMSSE=0.0"


def test_missing_series_is_coverage_error(rng):
    p = _tiny_panel(rng, 67)
    h = build_hierarchy(p.head_days(60))
    fc = {str(i): np.zeros(7) for i in p.ids[1:]}
    with pytest.raises(CoverageError) as e:
        wrmsse(h, p.values[:, 60:67], fc)
    assert e.value.missing == [str(p.ids[0])]


def test_constant_series_excluded_and_renormalised():
    vals = np.array([[3] * 40, list(range(40))])
    p = make_panel(vals, items=["A", "B"])
    h = build_hierarchy(p.head_days(33))
    fc = np.array([[4.0] * 7, list(range(33, 40))], dtype=float)
    rep = wrmsse(h, p.values[:, 33:], fc)
    # item A is constant at the item, item/state and item/store levels
    assert rep.excluded == ["A", "A/CA", "A/CA_1"]
    assert rep.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.isfinite(rep.wrmsse)


def test_zero_window_uniform(caplog):
    p = make_panel([[1] * 10 + [0] * 28, [2] * 10 + [0] * 28], items=["A", "B"])
    w = compute_weights(build_hierarchy(p))
    np.testing.assert_allclose(w, 1 / len(w))
    assert "uniform" in caplog.text


def test_report_files(tmp_path, rng):
    p = _tiny_panel(rng, 67)
    rep = wrmsse(build_hierarchy(p.head_days(60)), p.values[:, 60:], p.values[:, 60:] + 1.0)
    rep.to_csv(tmp_path / "r.csv")
    rep.to_json(tmp_path / "r.json")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "# weighting=units"
    assert lines[1] == "series_id,level,weight,rmsse,contribution"
    assert lines[-1] == rep.summary()


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.0, 10))
def test_error_scaling_is_linear(seed, c):
    # every aggregate error scales by c too, so the metric scales exactly; a bump on
    # a single series is not monotone because it can cancel errors in its parents
    rng = np.random.default_rng(seed)
    p = _tiny_panel(rng, 67)
    h = build_hierarchy(p.head_days(60))
    actual = p.values[:, 60:].astype(float)
    err = rng.normal(0, 1, actual.shape)
    base = wrmsse(h, actual, actual + err).wrmsse
    assert wrmsse(h, actual, actual + c * err).wrmsse == pytest.approx(c * base, rel=1e-9,
                                                                        abs=1e-12)
