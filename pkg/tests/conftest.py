import datetime as dt

import numpy as np
import pytest

from salesfc.ingest import SalesPanel, make_calendar
from salesfc.synth import SynthSpec, generate


def make_panel(values, items=None, stores=None, states=None, cats=None, depts=None,
               calendar=False, start=dt.date(2011, 1, 29)):
    """Small hand-built panel; attribute lists default to one item per row in one store."""
    values = np.asarray(values, dtype=np.int64)
    n, D = values.shape
    items = items or [f"I{i}" for i in range(n)]
    stores = stores or ["CA_1"] * n
    states = states or [s.split("_")[0] for s in stores]
    cats = cats or ["FOODS"] * n
    depts = depts or [f"{c}_1" for c in cats]
    cal = make_calendar(start, D) if calendar else None
    obj = lambda v: np.array(v, dtype=object)  # noqa: E731
    return SalesPanel(
        ids=obj([f"{i}_{s}_evaluation" for i, s in zip(items, stores)]),
        item_ids=obj(items), dept_ids=obj(depts), cat_ids=obj(cats), store_ids=obj(stores),
        state_ids=obj(states), values=values, calendar=cal,
    )


@pytest.fixture(scope="session")
def small_synth():
    return generate(SynthSpec(n_items=10, n_stores=2, days=140, seed=3, zero_inflation=0.2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance results, filled by tests/test_acceptance.py and printed after the run
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance")
    for name, (ok, detail) in ACCEPTANCE.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
