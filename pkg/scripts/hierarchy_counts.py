"""Print per-level series counts for a full M5-shaped key space.

    python3 scripts/hierarchy_counts.py
"""
import numpy as np

from salesfc.ingest import LEVEL_NAMES, SalesPanel, build_hierarchy

STORES = {"CA": 4, "TX": 3, "WI": 3}
DEPTS = {"FOODS": [("FOODS_1", 216), ("FOODS_2", 398), ("FOODS_3", 823)],
         "HOBBIES": [("HOBBIES_1", 416), ("HOBBIES_2", 149)],
         "HOUSEHOLD": [("HOUSEHOLD_1", 532), ("HOUSEHOLD_2", 515)]}


def m5_panel() -> SalesPanel:
    items = [(f"{d}_{k:03d}", d, c) for c, ds in DEPTS.items() for d, n in ds
             for k in range(1, n + 1)]
    stores = [(f"{s}_{k}", s) for s, n in STORES.items() for k in range(1, n + 1)]
    rows = [(it, d, c, st, s) for it, d, c in items for st, s in stores]
    it, dp, ct, st, sa = (np.array(c, dtype=object) for c in zip(*rows))
    return SalesPanel(ids=np.array([f"{a}_{b}" for a, b in zip(it, st)], dtype=object),
                      item_ids=it, dept_ids=dp, cat_ids=ct, store_ids=st, state_ids=sa,
                      values=np.zeros((len(rows), 1), dtype=np.int64))


if __name__ == "__main__":
    h = build_hierarchy(m5_panel())
    for name in LEVEL_NAMES:
        print(f"{name:>16s} {h.level_counts[name]:>6d}")
    print(f"{'total':>16s} {sum(h.level_counts.values()):>6d}")
