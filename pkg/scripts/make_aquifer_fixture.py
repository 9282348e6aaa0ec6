"""Regenerate tests/fixtures/aquifer_labels.csv.

1000 labelled (aridity, well depth) rows.  900 carry the label the
decision rule implies (including rows sitting exactly on the thresholds);
100 carry the opposite label, standing in for field-verified exceptions.
The ``rule_consistent`` column records which is which.
"""

import csv
import sys
from pathlib import Path

import numpy as np


def rule(ai, depth):
    limit = 241.0 if ai > 1.48 else 19.0
    return "unconfined" if depth < limit else "confined"


def main(out):
    rng = np.random.default_rng(20240601)
    ai = np.round(rng.uniform(0.1, 4.0, 1000), 3)
    depth = np.round(rng.uniform(1.0, 400.0, 1000), 2)
    # pin some rows to the thresholds
    ai[:20] = 1.48
    depth[20:40] = 241.0
    ai[20:40] = 2.5
    depth[40:60] = 19.0
    ai[40:60] = 0.9
    flip = np.zeros(1000, dtype=bool)
    flip[rng.choice(np.arange(60, 1000), 100, replace=False)] = True
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["aridity_index", "well_depth_m", "label", "rule_consistent"])
        for a, d, f in zip(ai, depth, flip):
            lab = rule(a, d)
            if f:
                lab = "confined" if lab == "unconfined" else "unconfined"
            w.writerow([repr(float(a)), repr(float(d)), lab, int(not f)])


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else
         Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "aquifer_labels.csv")
